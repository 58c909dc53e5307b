import itertools
from fractions import Fraction

import numpy as np
import pytest

from graphrewire.errors import GraphError
from graphrewire.graph import Graph, build_graph, gen_er, gen_sbm, laplacian
from graphrewire.spectral import (bounds_report, cheeger, cheeger_exact, cheeger_sweep, fiedler_exact,
                                  resistance_bound_check, resistance_eigensum, resistance_matrix, spectral_cte)


def grounded_resistance(g, u, v):
    """Oracle: ground node v, inject unit current at u, read the potential."""
    keep = [i for i in range(g.n) if i != v]
    L = laplacian(g)[np.ix_(keep, keep)]
    e = np.zeros(g.n - 1)
    e[keep.index(u)] = 1
    return np.linalg.solve(L, e)[keep.index(u)]


def brute_cheeger(g):
    A, d = g.adjacency, g.degrees
    best = np.inf
    for r in range(1, g.n):
        for S in itertools.combinations(range(g.n), r):
            m = np.zeros(g.n, bool)
            m[list(S)] = True
            cut = A[m][:, ~m].sum()
            best = min(best, cut / min(d[m].sum(), d[~m].sum()))
    return best


def test_resistance_grounded_oracle(test_graphs):
    for g in test_graphs[:25]:
        R = resistance_matrix(g).R
        for u, v in itertools.combinations(range(g.n), 2):
            assert abs(R[u, v] - grounded_resistance(g, u, v)) < 1e-9


def test_three_resistance_routes_agree(test_graphs):
    for g in test_graphs:
        R = resistance_matrix(g).R
        emb = spectral_cte(g)
        Z = emb.Z
        via_z = ((Z[:, :, None] - Z[:, None, :]) ** 2).sum(0) / emb.volume
        assert np.allclose(R, resistance_eigensum(g), atol=1e-9)
        assert np.allclose(R, via_z, atol=1e-9)
        assert np.allclose(R, resistance_eigensum(g, normalized=True), atol=1e-9)


def test_fixture_resistances(named):
    assert np.allclose(resistance_matrix(named["K3"]).R[0, 1], 2 / 3)
    C = resistance_matrix(named["C4"]).R
    assert np.isclose(C[0, 1], 3 / 4) and np.isclose(C[0, 2], 1)
    assert np.isclose(resistance_matrix(named["P3"]).R[0, 2], 2)
    assert np.isclose(resistance_matrix(named["barbell6"]).R[2, 3], 1)


def test_commute_time_scaling(named):
    res = resistance_matrix(named["C4"])
    assert np.allclose(res.commute_times, 8 * res.R)


def test_weighted_series_resistance():
    g = build_graph(3, [(0, 1, 2.0), (1, 2, 4.0)])
    assert np.isclose(resistance_matrix(g).R[0, 2], 0.5 + 0.25)


def test_disconnected_raises():
    with pytest.raises(GraphError, match="disconnected graph"):
        resistance_matrix(Graph(np.zeros((3, 3))))


def test_foster(test_graphs):
    for g in test_graphs:
        assert abs(resistance_matrix(g).edge_values(g).sum() - (g.n - 1)) < 1e-9


def test_fiedler_exact_p2(named):
    lam, f = fiedler_exact(named["P2"])
    assert np.isclose(lam, 2) and np.isclose(abs(f[0]), 1 / np.sqrt(2))


def test_lovasz_and_von_luxburg(test_graphs, named):
    for g in test_graphs:
        rep = bounds_report(g)
        assert rep.all_lovasz
        assert all(p.rhs_vonluxburg <= p.rhs_lovasz + 1e-12 for p in rep.pairs)
    k3 = bounds_report(named["K3"])
    p = k3.pairs[0]
    assert np.isclose(p.lhs, 1 / 3) and np.isclose(p.rhs_lovasz, 2 / 3)
    assert np.isclose(k3.spectral_gap, 1.5)


def test_lovasz_tight_on_p2(named):
    assert np.isclose(bounds_report(named["P2"]).max_ratio(), 1.0)


def test_cheeger_against_bruteforce(random_graphs, named):
    for g in list(named.values()) + [x for x in random_graphs if x.n <= 10][:10]:
        h, S = cheeger_exact(g)
        assert np.isclose(h, brute_cheeger(g))


def test_barbell_cheeger_is_one_seventh(named):
    h, S = cheeger_exact(named["barbell6"])
    assert Fraction(h).limit_denominator(100) == Fraction(1, 7)
    assert sorted(int(i) for i in S) in ([0, 1, 2], [3, 4, 5])


def test_cheeger_sweep_within_cheeger_inequality():
    g = gen_sbm((12, 12), 0.7, 0.05, seed=1)
    h_sweep = cheeger_sweep(g)
    lam, _ = fiedler_exact(g, normalized=True)
    assert lam / 2 - 1e-12 <= h_sweep <= np.sqrt(2 * lam) + 1e-12
    assert cheeger(g)[1] == "sweep"


def test_cheeger_exact_refuses_large():
    with pytest.raises(GraphError, match="cheeger_sweep"):
        cheeger_exact(gen_er(17, 0.5, 0))


def test_resistance_bound_diameter_pair_is_tight(random_graphs):
    for g in random_graphs[:10]:
        rb = resistance_bound_check(g, 0.25)
        u, v = rb.diameter_pair
        assert rb.holds_diameter[u, v]
        w = g.degrees ** -0.5
        assert np.isclose((w[u] + w[v]) / (0.25 * rb.c_diameter ** 2), rb.resistance_diameter)
        assert 0 <= rb.fraction_cheeger <= 1


def test_resistance_diameter_can_exceed_inverse_h_squared(named):
    # P3: end-to-end R = 2 while h = 1
    rb = resistance_bound_check(named["P3"])
    assert rb.h == 1 and rb.resistance_diameter == pytest.approx(2)
    assert not rb.diameter_holds


def test_resistance_bound_eps_validation(named):
    with pytest.raises(GraphError):
        resistance_bound_check(named["K3"], eps=0.7)
