"""Commute-time embeddings, effective resistances, Fiedler data, Cheeger
constants and the resistance/spectral-gap bound diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundViolationError, DisconnectedGraphError, GraphError
from .graph import Graph, degree_view, is_connected, laplacian, normalized_laplacian
from .linalg import cdist, laplacian_pinv, sym_eig, zero_eigen_count

CHEEGER_EXACT_MAX_N = 16
BOUND_TOL = 1e-9


def _require_connected(g: Graph):
    if g.n < 2 or not is_connected(g.adjacency):
        raise DisconnectedGraphError()


@dataclass(frozen=True)
class CTEmbedding:
    Z: np.ndarray  # (n-1) x n, node embeddings are columns
    volume: float

    def node_vectors(self) -> np.ndarray:
        return self.Z.T


@dataclass(frozen=True)
class ResistanceMatrix:
    R: np.ndarray
    volume: float

    @property
    def commute_times(self) -> np.ndarray:
        return self.volume * self.R

    def edge_values(self, g: Graph) -> np.ndarray:
        return np.array([self.R[u, v] for u, v, _ in g.edges()])


def spectral_cte(g: Graph) -> CTEmbedding:
    """Z = sqrt(vol) Lambda^{-1/2} F^T over the non-zero Laplacian eigenpairs."""
    _require_connected(g)
    w, F = sym_eig(laplacian(g))
    if zero_eigen_count(w) != 1:
        raise DisconnectedGraphError()
    vol = g.volume
    Z = np.sqrt(vol) * (F[:, 1:] / np.sqrt(w[1:])).T
    return CTEmbedding(Z=Z, volume=vol)


def resistance_matrix(g: Graph) -> ResistanceMatrix:
    """R_uv = (e_u - e_v)^T L^+ (e_u - e_v) for every pair."""
    _require_connected(g)
    P = laplacian_pinv(laplacian(g))
    d = np.diag(P)
    R = d[:, None] + d[None, :] - 2 * P
    R = (R + R.T) / 2
    np.fill_diagonal(R, 0.0)
    return ResistanceMatrix(R=np.maximum(R, 0.0), volume=g.volume)


def resistance_eigensum(g: Graph, normalized: bool = False) -> np.ndarray:
    """Resistances as a sum over eigenpairs of L, or of the normalized Laplacian
    with eigenvectors rescaled by D^{-1/2}."""
    _require_connected(g)
    if normalized:
        w, G = sym_eig(normalized_laplacian(g))
        Y = G[:, 1:] / np.sqrt(g.degrees)[:, None]
    else:
        w, Y = sym_eig(laplacian(g))
        Y = Y[:, 1:]
    if zero_eigen_count(w) != 1:
        raise DisconnectedGraphError()
    return cdist(Y / np.sqrt(w[1:]), squared=True)


def fiedler_exact(g: Graph, normalized: bool = False) -> tuple[float, np.ndarray]:
    """Second-smallest eigenpair of L (or of the normalized Laplacian)."""
    _require_connected(g)
    M = normalized_laplacian(g) if normalized else laplacian(g)
    w, V = sym_eig(M)
    if zero_eigen_count(w) != 1:
        raise DisconnectedGraphError()
    return float(w[1]), V[:, 1].copy()


@dataclass(frozen=True)
class PairBound:
    u: int
    v: int
    lhs: float
    rhs_lovasz: float
    rhs_vonluxburg: float
    holds_lovasz: bool
    holds_vonluxburg: bool


@dataclass(frozen=True)
class BoundsReport:
    pairs: list[PairBound]
    spectral_gap: float  # lambda'_2 of the normalized Laplacian, used by the bounds
    laplacian_gap: float  # lambda_2 of L, reported alongside
    d_min: float
    gap_used: str = "normalized"

    @property
    def all_lovasz(self) -> bool:
        return all(p.holds_lovasz for p in self.pairs)

    def max_ratio(self) -> float:
        """Largest lhs / rhs_lovasz over pairs (raw, no regime threshold)."""
        return max((p.lhs / p.rhs_lovasz for p in self.pairs), default=0.0)


def bounds_report(g: Graph) -> BoundsReport:
    """Check |R_uv - (1/d_u + 1/d_v)| against the Lovasz and von Luxburg bounds.

    The Lovasz bound is a theorem, so a violated pair raises.
    """
    res = resistance_matrix(g)
    gap, _ = fiedler_exact(g, normalized=True)
    lam2, _ = fiedler_exact(g, normalized=False)
    dv = degree_view(g)
    d = dv.degrees
    rhs_l = (1.0 / gap) * (2.0 / dv.d_min)
    rhs_v = (1.0 / gap) * (2.0 / dv.d_min ** 2)
    pairs = []
    for u in range(g.n):
        for v in range(u + 1, g.n):
            lhs = abs(res.R[u, v] - (1 / d[u] + 1 / d[v]))
            pairs.append(PairBound(u, v, float(lhs), float(rhs_l), float(rhs_v),
                                   bool(lhs <= rhs_l + BOUND_TOL), bool(lhs <= rhs_v + BOUND_TOL)))
    report = BoundsReport(pairs, gap, lam2, dv.d_min)
    bad = [p for p in pairs if not p.holds_lovasz]
    if bad:
        p = bad[0]
        raise BoundViolationError(f"Lovasz bound violated at pair ({p.u}, {p.v}): {p.lhs} > {p.rhs_lovasz}")
    return report


def cut_conductance(g: Graph, mask: np.ndarray) -> float:
    """h_S = |boundary S| / min(vol S, vol S-bar) for a boolean node mask."""
    mask = np.asarray(mask, dtype=bool)
    A, d = g.adjacency, g.degrees
    cut = A[np.ix_(mask, ~mask)].sum()
    denom = min(d[mask].sum(), d[~mask].sum())
    return float(cut / denom) if denom > 0 else np.inf


def _subset_table(n: int) -> np.ndarray:
    """Boolean membership for every nonempty proper subset containing node 0."""
    codes = np.arange(1, 2 ** (n - 1)) * 2 + 1  # odd codes contain node 0
    codes = codes[codes < 2 ** n - 1]
    codes = np.concatenate([[1], codes]) if n > 1 else codes
    return ((codes[:, None] >> np.arange(n)) & 1).astype(bool)


def cheeger_exact(g: Graph) -> tuple[float, np.ndarray]:
    """Minimum conductance over all cuts, by exhaustive enumeration."""
    _require_connected(g)
    if g.n > CHEEGER_EXACT_MAX_N:
        raise GraphError(f"n={g.n} exceeds {CHEEGER_EXACT_MAX_N}; use cheeger_sweep")
    M = _subset_table(g.n)
    Mf = M.astype(float)
    A, d = g.adjacency, g.degrees
    cut = np.einsum("su,uv,sv->s", Mf, A, 1 - Mf)
    vol_s = Mf @ d
    h = cut / np.minimum(vol_s, d.sum() - vol_s)
    i = int(np.argmin(h))
    return float(h[i]), np.nonzero(M[i])[0]


def cheeger_sweep(g: Graph) -> float:
    """Best conductance among the n-1 prefix cuts of the normalized Fiedler order."""
    _, gvec = fiedler_exact(g, normalized=True)
    order = np.argsort(gvec / np.sqrt(g.degrees), kind="stable")
    best = np.inf
    mask = np.zeros(g.n, dtype=bool)
    for u in order[:-1]:
        mask[u] = True
        best = min(best, cut_conductance(g, mask))
    return float(best)


def cheeger(g: Graph) -> tuple[float, str]:
    if g.n <= CHEEGER_EXACT_MAX_N:
        return cheeger_exact(g)[0], "exact"
    return cheeger_sweep(g), "sweep"


@dataclass(frozen=True)
class ResistanceBoundReport:
    eps: float
    h: float
    cheeger_method: str
    c_cheeger: float
    c_diameter: float
    resistance_diameter: float
    diameter_pair: tuple[int, int]
    diameter_holds: bool  # max R <= 1/h^2
    holds_cheeger: np.ndarray = field(repr=False)  # per pair, bound with c_cheeger
    holds_diameter: np.ndarray = field(repr=False)  # per pair, bound with c_diameter

    @property
    def fraction_cheeger(self) -> float:
        return float(self.holds_cheeger[np.triu_indices_from(self.holds_cheeger, 1)].mean())

    @property
    def fraction_diameter(self) -> float:
        return float(self.holds_diameter[np.triu_indices_from(self.holds_diameter, 1)].mean())


def resistance_bound_check(g: Graph, eps: float = 0.25) -> ResistanceBoundReport:
    """Per-pair R_uv <= (d_u^{-2eps} + d_v^{-2eps}) / (eps c^2).

    Two choices of c are reported: the largest c with h_S >= c / vol(S)^{1/2-eps}
    over cuts with vol(S) <= vol/2 (exact enumeration for small graphs, sweep cuts
    otherwise), and the diameter-matching c that makes the bound tight on the
    resistance-diameter pair.
    """
    if not 0 < eps <= 0.5:
        raise GraphError(f"eps must be in (0, 1/2], got {eps}")
    res = resistance_matrix(g)
    R, d = res.R, g.degrees
    h, method = cheeger(g)
    vol = g.volume
    if method == "exact":
        M = _subset_table(g.n).astype(float)
    else:
        _, gvec = fiedler_exact(g, normalized=True)
        order = np.argsort(gvec / np.sqrt(d), kind="stable")
        M = np.tril(np.ones((g.n - 1, g.n)))[:, np.argsort(order)]
    cut = np.einsum("su,uv,sv->s", M, g.adjacency, 1 - M)
    vs = M @ d
    small = np.minimum(vs, vol - vs)
    c_cheeger = float(np.min(cut / small * small ** (0.5 - eps)))
    iu = np.unravel_index(int(np.argmax(R)), R.shape)
    u_star, v_star = int(min(iu)), int(max(iu))
    r_diam = float(R[u_star, v_star])
    w = d ** (-2 * eps)
    pair_w = w[:, None] + w[None, :]
    c_diam = float(np.sqrt(pair_w[u_star, v_star] / (r_diam * eps)))
    rhs_c = pair_w / (eps * c_cheeger ** 2)
    rhs_d = pair_w / (eps * c_diam ** 2)
    return ResistanceBoundReport(
        eps=eps, h=h, cheeger_method=method, c_cheeger=c_cheeger, c_diameter=c_diam,
        resistance_diameter=r_diam, diameter_pair=(u_star, v_star),
        diameter_holds=bool(r_diam <= 1 / h ** 2 + BOUND_TOL),
        holds_cheeger=R <= rhs_c + BOUND_TOL, holds_diameter=R <= rhs_d * (1 + 1e-12) + BOUND_TOL,
    )
