import numpy as np
import pytest

from graphrewire import autodiff as ad
from graphrewire.autodiff import Tape
from graphrewire.errors import GraphError
from graphrewire.gnn import (KINDS, ModelSpec, SyntheticConfig, TrainConfig, build_model, er_dataset,
                             experiment_synthetic, forward, mincut_pool, normalized_adjacency_with_loops, prepare,
                             sbm_dataset, stratified_split, train)
from graphrewire.graph import build_graph, gen_er


def small_data(n=12, seed=0):
    return sbm_dataset(n, 10, 14, seed)


def test_model_structure():
    base = build_model(ModelSpec("baseline"))
    assert not any(k.startswith(("ct.", "gap.")) for k in base.params.names())
    assert "conv1.Wself" not in base.params.names()
    ct = build_model(ModelSpec("ct"))
    assert {"ct.W1", "ct.W2"} <= set(ct.params.names())
    gap = build_model(ModelSpec("gap-ncut"))
    assert "gap.W1" in gap.params.names()
    with pytest.raises(GraphError):
        ModelSpec("gcn")


@pytest.mark.parametrize("kind, keys", [("ct", {"ct"}), ("gap-ncut", {"gap_cut", "gap_fiedler"}),
                                        ("baseline", set())])
def test_forward_emits_aux_losses(kind, keys):
    g = small_data()[0]
    model = build_model(ModelSpec(kind))
    pg = prepare(g, model.spec)
    t = Tape()
    out = forward(model, pg, t, t.bind(model.params))
    assert set(out.aux) == keys | {"pool_cut", "pool_ortho"}
    assert out.logits.shape == (1, 2)


def test_ct_loss_is_wired_into_total():
    g = small_data()[0]
    model = build_model(ModelSpec("ct"))
    pg = prepare(g, model.spec)
    t = Tape()
    with_aux = forward(model, pg, t, t.bind(model.params)).loss.item()
    t = Tape()
    without = forward(model, pg, t, t.bind(model.params), include_rewiring_loss=False).loss.item()
    assert with_aux != without


def test_rewired_diffusion_stays_on_support():
    g = small_data()[1]
    for kind in ("ct", "gap-rcut"):
        model = build_model(ModelSpec(kind))
        t = Tape()
        out = forward(model, prepare(g, model.spec), t, t.bind(model.params))
        assert np.all(out.T.value[g.adjacency == 0] == 0)


@pytest.mark.parametrize("kind", KINDS)
def test_every_parameter_gets_gradient(kind):
    data = small_data(4)
    model = build_model(ModelSpec(kind))
    total = {k: np.zeros_like(v) for k, v in model.params.values.items()}
    for g in data:
        t = Tape()
        bound = t.bind(model.params)
        for k, gk in ad.backward(forward(model, prepare(g, model.spec), t, bound).loss, bound).items():
            total[k] += np.abs(gk)
    dead = [k for k, v in total.items() if not v.any()]
    assert not dead


def test_mincut_pool_identity_and_uniform(named):
    g = named["barbell6"]
    t = Tape()
    X = t.const(np.arange(12.0).reshape(6, 2))
    out = mincut_pool(g.adjacency, X, t.const(np.eye(6)))
    assert np.allclose(out.A.value, g.adjacency) and np.allclose(out.X.value, X.value)
    out = mincut_pool(g.adjacency, X, t.const(np.full((6, 3), 1 / 3)))
    assert np.allclose(out.A.value, g.volume / 9)
    assert out.A.shape == (3, 3) and out.X.shape == (3, 2)


def test_mincut_pool_disconnected_triangles():
    g = build_graph(6, [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)])
    S = np.zeros((6, 2))
    S[:3, 0] = S[3:, 1] = 1
    t = Tape()
    assert np.isclose(mincut_pool(g.adjacency, t.const(np.ones((6, 1))), t.const(S)).loss_cut.item(), -1)


def test_normalized_adjacency_with_loops():
    A = build_graph(2, [(0, 1)]).adjacency
    assert np.allclose(normalized_adjacency_with_loops(A), 0.5)


def test_stratified_split():
    labels = [0] * 20 + [1] * 20
    tr, te = stratified_split(labels, 0.85, 0)
    assert len(set(tr) & set(te)) == 0 and len(tr) + len(te) == 40
    assert sum(labels[i] for i in te) == 3


def test_training_is_deterministic():
    data = small_data(8)
    cfg = TrainConfig(epochs=2, batch_size=4)
    a = train(build_model(ModelSpec("gap-rcut"), 1), data, cfg)
    b = train(build_model(ModelSpec("gap-rcut"), 1), data, cfg)
    assert a.to_dict() == b.to_dict()


def test_single_graph_memorisation():
    g = small_data(2)[1]
    model = build_model(ModelSpec("baseline"))
    idx = (np.array([0]), np.array([0]))
    met = train(model, [g], TrainConfig(epochs=200, lr=5e-3, batch_size=1), split=idx)
    assert met.train_accuracy[-1] == 1.0 and met.test_accuracy == 1.0


def test_unlabelled_graph_rejected():
    with pytest.raises(GraphError, match="no label"):
        prepare(gen_er(6, 0.5, 0), ModelSpec())


def test_datasets_alternate_labels():
    for maker in (sbm_dataset, er_dataset):
        data = maker(6, 20, 40, 0)
        assert [g.label for g in data] == [0, 1, 0, 1, 0, 1]
        assert all(20 <= g.n <= 40 for g in data)


def test_experiment_table_shape():
    cfg = SyntheticConfig(n_graphs=8, n_min=8, n_max=10, epochs=1)
    res = experiment_synthetic([0, 1], cfg)
    assert set(res["table"]) == {"SBM", "ER"}
    for rows in res["table"].values():
        assert set(rows) == set(KINDS)
        assert all(len(r["accuracies"]) == 2 for r in rows.values())
