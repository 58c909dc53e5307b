"""Resistance curvature of nodes and edges, its bounds, and curvature over a
learned diffusion matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GraphError
from .graph import Graph
from .spectral import resistance_matrix

DEGENERATE_R = 1e-12
DEGENERATE_T = 1e-9
BOUND_TOL = 1e-9


@dataclass(frozen=True)
class EdgeBound:
    lower: bool  # 4 - d_u - d_v <= kappa
    upper: bool  # kappa <= 2 / R
    forman: bool  # (4 - d_u - d_v) / R <= kappa
    lower_tight: bool


@dataclass(frozen=True)
class CurvatureReport:
    node: np.ndarray
    edge: dict[tuple[int, int], float | None]  # None marks unbounded curvature
    resistance: dict[tuple[int, int], float]
    bounds: dict[tuple[int, int], EdgeBound] | None = None

    def finite_edges(self) -> dict[tuple[int, int], float]:
        return {e: k for e, k in self.edge.items() if k is not None}


def node_curvature(g: Graph, R: np.ndarray) -> np.ndarray:
    """p_u = 1 - (1/2) sum over neighbours w of R_uw."""
    return 1.0 - 0.5 * (g.support * np.asarray(R)).sum(axis=1)


def edge_curvature(g: Graph, p: np.ndarray, R: np.ndarray) -> dict[tuple[int, int], float]:
    out = {}
    for u, v, _ in g.edges():
        r = R[u, v]
        if r < DEGENERATE_R:
            raise GraphError(f"degenerate resistance {r:.3e} on edge ({u}, {v})")
        out[(u, v)] = float(2 * (p[u] + p[v]) / r)
    return out


def curvature_report(g: Graph) -> CurvatureReport:
    """Node and edge curvature; bound flags only for unweighted graphs (empty otherwise)."""
    R = resistance_matrix(g).R
    p = node_curvature(g, R)
    kappa = edge_curvature(g, p, R)
    rep = CurvatureReport(p, dict(kappa), {(u, v): float(R[u, v]) for u, v, _ in g.edges()})
    bounds = curvature_bounds_check(g, rep) if g.is_unweighted() else {}
    return CurvatureReport(rep.node, rep.edge, rep.resistance, bounds)


def curvature_bounds_check(g: Graph, report: CurvatureReport) -> dict[tuple[int, int], EdgeBound]:
    """Per edge: 4 - d_u - d_v <= kappa <= 2/R and the Forman form (4 - d_u - d_v)/R <= kappa."""
    if not g.is_unweighted():
        raise GraphError("curvature bounds are stated for unweighted graphs")
    d = g.degrees
    flags = {}
    for (u, v), k in report.edge.items():
        if k is None:
            continue
        r = report.resistance[(u, v)]
        lo = 4 - d[u] - d[v]
        flags[(u, v)] = EdgeBound(
            lower=bool(lo <= k + BOUND_TOL),
            upper=bool(k <= 2 / r + BOUND_TOL),
            forman=bool(lo / r <= k + BOUND_TOL),
            lower_tight=bool(abs(k - lo) <= BOUND_TOL),
        )
    return flags


def curvature_on_diffusion(g: Graph, T: np.ndarray) -> CurvatureReport:
    """Curvature with T entries in place of resistances; T_uv < 1e-9 means unbounded."""
    T = np.asarray(T, dtype=float)
    if T.shape != g.adjacency.shape:
        raise GraphError(f"diffusion shape {T.shape} does not match graph ({g.n} nodes)")
    if np.any(T < 0) or not np.allclose(T, T.T, atol=1e-10):
        raise GraphError("diffusion matrix must be symmetric and nonnegative")
    if np.any((T > 0) & (g.adjacency == 0)):
        raise GraphError("diffusion matrix has weight outside the graph's edges")
    p = node_curvature(g, T)
    edge: dict[tuple[int, int], float | None] = {}
    res = {}
    for u, v, _ in g.edges():
        t = T[u, v]
        res[(u, v)] = float(t)
        edge[(u, v)] = None if t < DEGENERATE_T else float(2 * (p[u] + p[v]) / t)
    return CurvatureReport(p, edge, res)
