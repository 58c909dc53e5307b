import numpy as np
import pytest

from graphrewire.curvature import curvature_bounds_check, curvature_on_diffusion, curvature_report, edge_curvature, node_curvature
from graphrewire.errors import GraphError
from graphrewire.graph import build_graph, random_tree
from graphrewire.spectral import resistance_matrix


def oracle_kappa(g, u, v):
    R = resistance_matrix(g).R
    p = [1 - 0.5 * sum(R[a, w] for w in range(g.n) if g.adjacency[a, w]) for a in range(g.n)]
    return 2 * (p[u] + p[v]) / R[u, v]


def test_fixture_values(named):
    assert np.isclose(curvature_report(named["P2"]).edge[(0, 1)], 2)
    assert np.isclose(curvature_report(named["K3"]).edge[(0, 1)], 2)
    assert all(np.isclose(k, 4 / 3) for k in curvature_report(named["C4"]).edge.values())


def test_against_loop_oracle(test_graphs):
    for g in test_graphs[:15]:
        rep = curvature_report(g)
        for (u, v), k in rep.edge.items():
            assert np.isclose(k, oracle_kappa(g, u, v))


def test_node_curvature_sums_to_one(test_graphs):
    # Foster's identity gives sum_u p_u = n - (n - 1) = 1
    for g in test_graphs:
        assert np.isclose(curvature_report(g).node.sum(), 1)


def test_upper_and_forman_bounds_everywhere(test_graphs):
    for g in test_graphs:
        for b in curvature_report(g).bounds.values():
            assert b.upper and b.forman


def test_degree_lower_bound_on_fixtures(named):
    for g in named.values():
        assert all(b.lower for b in curvature_report(g).bounds.values())


# n = 8: edge (3, 7) has R = 6/11 and kappa = -31/6, below 4 - d_3 - d_7 = -5
COUNTEREXAMPLE = [(0, 3), (1, 3), (1, 6), (2, 7), (3, 4), (3, 5), (3, 7), (4, 7), (6, 7)]


def test_degree_lower_bound_counterexample():
    g = build_graph(8, COUNTEREXAMPLE)
    rep = curvature_report(g)
    assert np.isclose(rep.resistance[(3, 7)], 6 / 11)
    assert np.isclose(rep.edge[(3, 7)], -31 / 6)
    b = rep.bounds[(3, 7)]
    assert not b.lower and b.forman and b.upper


@pytest.mark.parametrize("seed", range(8))
def test_lower_bound_tight_on_trees(seed):
    t = random_tree(int(np.random.default_rng(seed).integers(2, 11)), seed)
    assert all(b.lower_tight for b in curvature_report(t).bounds.values())


def test_bridge_is_most_negative(named):
    rep = curvature_report(named["barbell6"])
    assert min(rep.edge, key=rep.edge.get) == (2, 3)


def test_weighted_graph_skips_bounds():
    g = build_graph(3, [(0, 1, 2.0), (1, 2, 1.0)])
    rep = curvature_report(g)
    assert rep.bounds == {}
    with pytest.raises(GraphError, match="unweighted"):
        curvature_bounds_check(g, rep)


def test_degenerate_resistance(named):
    g = named["K3"]
    with pytest.raises(GraphError, match="degenerate resistance"):
        edge_curvature(g, np.zeros(3), np.zeros((3, 3)))


def test_diffusion_curvature(named):
    g = named["C4"]
    T = g.adjacency * 0.25
    T[0, 1] = T[1, 0] = 0.0
    rep = curvature_on_diffusion(g, T)
    assert rep.edge[(0, 1)] is None
    assert np.allclose(rep.node, node_curvature(g, T))
    assert np.isclose(rep.edge[(1, 2)], 2 * (rep.node[1] + rep.node[2]) / 0.25)


def test_diffusion_validation(named):
    g = named["K3"]
    with pytest.raises(GraphError, match="does not match"):
        curvature_on_diffusion(g, np.zeros((2, 2)))
    bad = np.array([[0, 1, 0], [0, 0, 1], [0, 1, 0]], float)
    with pytest.raises(GraphError, match="symmetric"):
        curvature_on_diffusion(g, bad)
    with pytest.raises(GraphError, match="outside"):
        curvature_on_diffusion(named["P3"], np.ones((3, 3)) - np.eye(3))
