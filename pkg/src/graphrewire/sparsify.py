"""Effective-resistance spectral sparsification: greedy and sampled variants."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BoundViolationError, GraphError
from .graph import Graph, incidence, is_connected, laplacian
from .linalg import laplacian_pinv_sqrt, psd_dominates, sym_eig


@dataclass(frozen=True)
class KeptEdge:
    u: int
    v: int
    resistance: float
    weight: float


@dataclass(frozen=True)
class SparsifyResult:
    subgraph: Graph
    kept_edges: list[KeptEdge]
    gamma: float
    accumulator_ok: bool
    method: str
    eps: float
    draws: int = 0  # sampler only

    @property
    def num_kept(self) -> int:
        return len(self.kept_edges)


def _check_eps(g: Graph, eps: float):
    if not is_connected(g.adjacency):
        raise GraphError("disconnected graph")
    lo = 1 / math.sqrt(g.n)
    if not (lo < eps <= 1):
        raise GraphError(f"eps must lie in (1/sqrt(n), 1] = ({lo:.4g}, 1], got {eps}")


def gamma_ratio(eps: float) -> float:
    return math.inf if eps >= 1 else (1 + eps) / (1 - eps)


def projected_incidence(g: Graph) -> tuple[list[tuple[int, int, float]], np.ndarray]:
    """Edges and the rows v_e = L^{+/2} b_e (weighted: b_e scaled by sqrt(w_e)).

    ||v_e||^2 equals w_e R_e, i.e. R_e on unit-weight edges.
    """
    if not is_connected(g.adjacency):
        raise GraphError("disconnected graph")
    V = incidence(g) @ laplacian_pinv_sqrt(laplacian(g))
    return g.edges(), V


def greedy_sparsify(g: Graph, eps: float, stop_at_rejection: bool = True) -> SparsifyResult:
    """Accept edges by descending resistance while sum v v^T stays below Gamma I.

    The first rejected edge ends the scan, as in the greedy procedure; with
    ``stop_at_rejection=False`` rejected edges are skipped instead.
    Accepted edges keep weight 1 (or their original weight).
    """
    _check_eps(g, eps)
    gamma = gamma_ratio(eps)
    edges, V = projected_incidence(g)
    norms = np.einsum("ij,ij->i", V, V)
    weights = np.array([w for _, _, w in edges])
    res = norms / weights
    order = sorted(range(len(edges)), key=lambda i: (-round(float(res[i]), 10), i))  # ties by edge index
    acc = np.zeros((g.n, g.n))
    bound = gamma * np.eye(g.n) if np.isfinite(gamma) else None
    kept: list[KeptEdge] = []
    A = np.zeros_like(g.adjacency)
    for i in order:
        cand = acc + np.outer(V[i], V[i])
        if bound is not None and not psd_dominates(bound, cand):
            if stop_at_rejection:
                break
            continue
        acc = cand
        u, v, w = edges[i]
        A[u, v] = A[v, u] = w
        kept.append(KeptEdge(u, v, float(res[i]), w))
    # every accepted state passed the Gamma I test, re-verify the final one
    ok = bound is None or psd_dominates(bound, acc)
    if not ok:
        raise BoundViolationError("greedy accumulator exceeds Gamma I")
    return SparsifyResult(Graph(A), kept, gamma, ok, "greedy", eps)


def sample_edges(g: Graph, eps: float, seed: int, draws: int | None = None) -> tuple[np.ndarray, np.ndarray, int]:
    """Draw counts per edge under q_e = w_e R_e / (n - 1); default T = ceil(n ln n / eps^2)."""
    _check_eps(g, eps)
    edges, V = projected_incidence(g)
    lev = np.einsum("ij,ij->i", V, V)
    q = lev / lev.sum()  # lev sums to n - 1 for a connected graph
    T = draws if draws is not None else math.ceil(g.n * math.log(g.n) / eps ** 2)
    counts = np.random.default_rng(seed).multinomial(T, q)
    return counts, q, T


def sample_sparsify(g: Graph, eps: float, seed: int, draws: int | None = None) -> SparsifyResult:
    """Resistance-proportional sampling with replacement; each draw adds w_e / (q_e T)."""
    counts, q, T = sample_edges(g, eps, seed, draws)
    edges = g.edges()
    A = np.zeros_like(g.adjacency)
    kept = []
    for i, (u, v, w) in enumerate(edges):
        if counts[i]:
            new_w = counts[i] * w / (q[i] * T)
            A[u, v] = A[v, u] = new_w
            kept.append(KeptEdge(u, v, float(q[i] * (g.n - 1) / w), float(new_w)))
    kept.sort(key=lambda e: -e.resistance)
    return SparsifyResult(Graph(A), kept, gamma_ratio(eps), True, "sample", eps, T)


@dataclass(frozen=True)
class SimilarityReport:
    eps: float
    ratios: np.ndarray  # eigenvector probes first, then random probes
    min_ratio: float
    max_ratio: float
    fraction_in_range: float


def spectral_similarity_report(g: Graph, g_sparse: Graph, eps: float = 0.5, probes: int = 20,
                               seed: int = 0) -> SimilarityReport:
    """x' L_sparse x / x' L x on the nontrivial eigenvectors of L and on random unit probes."""
    if g.n != g_sparse.n:
        raise GraphError(f"node-set mismatch: {g.n} vs {g_sparse.n}")
    L, Ls = laplacian(g), laplacian(g_sparse)
    _, F = sym_eig(L)
    X = [F[:, i] for i in range(1, g.n)]
    rng = np.random.default_rng(seed)
    for _ in range(probes):
        x = rng.standard_normal(g.n)
        x -= x.mean()
        X.append(x / np.linalg.norm(x))
    ratios = np.array([(x @ Ls @ x) / (x @ L @ x) for x in X])
    inside = (ratios >= 1 - eps) & (ratios <= 1 + eps)
    return SimilarityReport(eps, ratios, float(ratios.min()), float(ratios.max()), float(inside.mean()))
