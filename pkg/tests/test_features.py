import numpy as np

from graphrewire.features import diffusion_probes, node_features
from graphrewire.graph import Graph


def test_default_layout(named):
    g = named["barbell6"]
    X = node_features(g)
    assert X.shape == (6, 10)
    assert np.allclose(X[:, 0], np.log1p(g.degrees))
    assert np.allclose(X[:, 1], g.degrees / g.degrees.mean())


def test_attributes_replace_degree(named):
    g = named["K3"].replace(features=np.arange(6.0).reshape(3, 2))
    X = node_features(g, n_probes=0)
    assert np.allclose(X[:, :2], g.features) and X.shape == (3, 3)


def test_probes_centred_and_unit_rms(named):
    g = named["barbell6"]
    Y = diffusion_probes(g, 5, seed=1)
    assert np.allclose(g.degrees @ Y, 0, atol=1e-12)
    assert np.allclose(np.sqrt((Y ** 2).mean(0)), 1)


def test_probes_break_bridge_symmetry(named):
    Y = diffusion_probes(named["barbell6"], 8, seed=0)
    assert np.abs(Y[2] - Y[3]).max() > 0.1


def test_probes_seeded(named):
    g = named["C4"]
    assert np.array_equal(diffusion_probes(g, seed=3), diffusion_probes(g, seed=3))
    assert not np.array_equal(diffusion_probes(g, seed=3), diffusion_probes(g, seed=4))
    assert np.array_equal(diffusion_probes(g, seed=[1, 2]), diffusion_probes(g, seed=[1, 2]))


def test_isolated_node_does_not_crash():
    X = node_features(Graph(np.zeros((2, 2))))
    assert np.all(np.isfinite(X))
