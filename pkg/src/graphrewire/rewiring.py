"""Commute-time (CT) and spectral-gap (GAP) rewiring layers.

Both layers map node features to a dense diffusion matrix supported on the
input edges. Losses and diffusion matrices are built on an autodiff tape so the
layers can be trained alone or inside a GNN.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import MLPConfig, ParameterSet, Tape, Var
from .errors import (CollapsedEmbeddingError, EigenvalueCrossingError, GraphError,
                     ShapeError, TrainingDivergedError)
from .features import node_features
from .graph import Graph, is_connected, laplacian, normalized_laplacian
from .linalg import sym_eig

COLLAPSE_TOL = 1e-12
CROSSING_TOL = 1e-6
RAYLEIGH_EPS = 1e-12
GAP_MODES = ("rcut", "ncut")


# ---------------------------------------------------------------- numpy reference

def fiedler_approx(S: np.ndarray) -> np.ndarray:
    """(S[:,0] - S[:,1]) / sqrt(n) for a 2-column soft assignment."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[1] != 2:
        raise ShapeError(f"fiedler_approx needs an n x 2 assignment, got {S.shape}")
    return (S[:, 0] - S[:, 1]) / np.sqrt(S.shape[0])


def grad_rcut(f: np.ndarray) -> np.ndarray:
    """Entry (u, v) = f_u^2 - f_u f_v. Object arrays (e.g. Fractions) stay exact."""
    f = np.asarray(f).reshape(-1)
    if f.dtype != object:
        f = f.astype(float)
    return (f * f)[:, None] - np.outer(f, f)


def _degree_terms(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = A.sum(axis=1)
    if np.any(d <= 0):
        raise GraphError(f"zero-degree node {int(np.argmin(d))}")
    return d, -0.5 * d ** -1.5


def grad_ncut(f: np.ndarray, A: np.ndarray) -> np.ndarray:
    """2 q d' 1^T + D^{-1/2} f f^T D^{-1/2} with q = f^T D^{1/2} A f, d'_u = -d_u^{-3/2}/2."""
    f = np.asarray(f, dtype=float).reshape(-1)
    A = np.asarray(A, dtype=float)
    d, dprime = _degree_terms(A)
    q = f @ (np.sqrt(d) * (A @ f))
    h = f / np.sqrt(d)
    return 2 * q * dprime[:, None] * np.ones((1, len(f))) + np.outer(h, h)


def symmetrize_pairs(G: np.ndarray) -> np.ndarray:
    """Sensitivity to a symmetric (u, v) weight change: G_uv + G_vu."""
    return G + G.T


def fd_gap_gradient(g: Graph, normalized: bool = False, h: float = 1e-5) -> np.ndarray:
    """Central differences of the exact lambda_2 w.r.t. each existing edge weight."""
    if not is_connected(g.adjacency):
        raise GraphError("disconnected graph")

    def lam2(A):
        M = normalized_laplacian(Graph(A)) if normalized else np.diag(A.sum(1)) - A
        return sym_eig(M).eigenvalues

    w = lam2(g.adjacency)
    if g.n > 2 and w[2] - w[1] < CROSSING_TOL:
        raise EigenvalueCrossingError(f"eigenvalue crossing: lambda3 - lambda2 = {w[2] - w[1]:.3e}")
    out = np.zeros((g.n, g.n))
    for u, v, _ in g.edges():
        A = np.array(g.adjacency)
        A[u, v] += h
        A[v, u] += h
        up = lam2(A)[1]
        A[u, v] -= 2 * h
        A[v, u] -= 2 * h
        dn = lam2(A)[1]
        out[u, v] = out[v, u] = (up - dn) / (2 * h)
    return out


# ---------------------------------------------------------------- tape losses

def ct_loss_terms(Z: Var, L: np.ndarray, D: np.ndarray, center: bool = True) -> tuple[Var, Var]:
    """Trace quotient Tr(Z'LZ)/Tr(Z'DZ) and the Gram orthogonality penalty.

    With ``center`` the columns of Z are first made D-orthogonal to the constant
    vector. Without it the constant embedding is a global minimiser (quotient 0),
    which erases every pairwise distance.
    """
    t = Z.tape
    if center:
        d = np.diag(D)
        Z = t.const(np.eye(len(d)) - np.outer(np.ones(len(d)), d) / d.sum()) @ Z
    den = ad.trace(Z.T @ (t.const(D) @ Z))
    if den.item() <= COLLAPSE_TOL:
        raise CollapsedEmbeddingError(f"collapsed embedding: Tr(Z'DZ) = {den.item():.3e}")
    quotient = ad.trace(Z.T @ (t.const(L) @ Z)) / den
    G = Z.T @ Z
    ortho = ad.frobenius_norm(G / ad.frobenius_norm(G) - t.const(np.eye(G.shape[0])))
    return quotient, ortho


def ct_loss(Z: Var, L: np.ndarray, D: np.ndarray, center: bool = True) -> Var:
    q, o = ct_loss_terms(Z, L, D, center)
    return q + o


def cut_loss_terms(S: Var, A: np.ndarray) -> tuple[Var, Var]:
    """-Tr(S'AS)/Tr(S'DS) and ||S'S/||S'S||_F - I_k/sqrt(k)||_F for k = S columns."""
    t = S.tape
    k = S.shape[1]
    D = np.diag(A.sum(axis=1))
    cut = -(ad.trace(S.T @ (t.const(A) @ S)) / ad.trace(S.T @ (t.const(D) @ S)))
    G = S.T @ S
    ortho = ad.frobenius_norm(G / ad.frobenius_norm(G) - t.const(np.eye(k) / np.sqrt(k)))
    return cut, ortho


def cut_loss(S: Var, A: np.ndarray) -> Var:
    c, o = cut_loss_terms(S, A)
    return c + o


def _ones_row(t: Tape, n: int) -> Var:
    return t.const(np.ones((1, n)))


def tape_grad_rcut(f: Var) -> Var:
    n = f.shape[0]
    return ad.hadamard(f, f) @ _ones_row(f.tape, n) - f @ f.T


def tape_grad_ncut(f: Var, A: np.ndarray) -> Var:
    t, n = f.tape, f.shape[0]
    d, dprime = _degree_terms(A)
    q = f.T @ (t.const(np.sqrt(d)[:, None] * A) @ f)
    first = ad.scale(t.const(2 * dprime[:, None] * np.ones((1, n))), q)
    h = t.const(np.diag(1 / np.sqrt(d))) @ f
    return first + h @ h.T


def rayleigh_quotient(T: Var, f: Var, mode: str, center: bool = True) -> Var:
    """f'L_T f / f'f (rcut) or f'L_T f / f'D_T f (ncut) for the graph weighted by T.

    ``center`` removes the trivial direction first (plain mean for rcut, the
    D_T-weighted mean for ncut), so the value never drops below lambda_2 of T
    unless f is exactly constant.
    """
    t = f.tape
    ones = t.const(np.ones((f.shape[0], 1)))
    dT = T @ ones
    if center:
        weight = ones if mode == "rcut" else dT
        mean = (weight.T @ f) / (ad.total(weight) + RAYLEIGH_EPS)
        f = f - ad.scale(ones, mean)
    # the ordered-pair sum visits each edge twice
    energy = ad.scale(ad.total(ad.hadamard(T, ad.cdist_sq(f))), 0.5)
    ff = ad.hadamard(f, f)
    den = ad.total(ff) if mode == "rcut" else ad.total(ad.hadamard(dT, ff))
    return energy / (den + RAYLEIGH_EPS)


# ---------------------------------------------------------------- layers

@dataclass(frozen=True)
class CTConfig:
    hidden: int = 32
    k: int = 32
    squared: bool = False
    center: bool = True
    n_probes: int = 8


@dataclass(frozen=True)
class GapConfig:
    hidden: int = 32
    mode: str = "rcut"
    mu: float = 0.5
    alpha: float = 1.0
    learn_mu: bool = False
    center: bool = True
    n_probes: int = 8

    def __post_init__(self):
        if self.mode not in GAP_MODES:
            raise GraphError(f"unknown GAP mode {self.mode!r}; expected rcut or ncut")
        if self.mu <= 0:
            raise GraphError(f"mu must be positive, got {self.mu}")


@dataclass
class CTLayerOutput:
    Z: Var
    R: Var
    T: Var
    loss: Optional[Var]
    quotient: Optional[Var]
    ortho: Optional[Var]
    squared: bool


@dataclass
class GapLayerOutput:
    S: Var
    f: Var
    grad: Var
    A_tilde: Var
    T: Var
    loss_cut: Var
    loss_fiedler: Var
    lambda_star: Var
    mu: Var
    mode: str

    @property
    def loss(self) -> Var:
        return self.loss_cut + self.loss_fiedler


def init_ct_params(cfg: CTConfig, in_dim: int, seed: int = 0, prefix: str = "ct.") -> ParameterSet:
    mlp = MLPConfig(in_dim, cfg.hidden, cfg.k, "tanh")
    return ParameterSet(ad.init_mlp(mlp, np.random.default_rng(seed), prefix))


def _softplus_inverse(y: float) -> float:
    return float(np.log(np.expm1(y)))


def init_gap_params(cfg: GapConfig, in_dim: int, seed: int = 0, prefix: str = "gap.") -> ParameterSet:
    mlp = MLPConfig(in_dim, cfg.hidden, 2, "softmax")
    values = ad.init_mlp(mlp, np.random.default_rng(seed), prefix)
    if cfg.learn_mu:
        values[f"{prefix}mu_raw"] = np.array([[_softplus_inverse(cfg.mu)]])
    return ParameterSet(values)


def ct_layer_forward(g: Graph, params: dict[str, Var], cfg: CTConfig, X: Var,
                     with_loss: bool = True, prefix: str = "ct.") -> CTLayerOutput:
    """Z = tanh(MLP(X)); T = R(Z) * A with R(Z) = cdist(Z)/vol (squared if configured)."""
    mlp = MLPConfig(X.shape[1], cfg.hidden, cfg.k, "tanh")
    Z = ad.mlp_forward(mlp, params, X, prefix)
    t = Z.tape
    dist = ad.cdist_sq(Z) if cfg.squared else ad.cdist(Z)
    R = ad.scale(dist, 1.0 / g.volume)
    T = ad.hadamard(R, t.const(g.adjacency))
    loss = quotient = ortho = None
    if with_loss:
        quotient, ortho = ct_loss_terms(Z, laplacian(g), np.diag(g.degrees), cfg.center)
        loss = quotient + ortho
    return CTLayerOutput(Z, R, T, loss, quotient, ortho, cfg.squared)


def gap_layer_forward(g: Graph, params: dict[str, Var], cfg: GapConfig, X: Var,
                      prefix: str = "gap.") -> GapLayerOutput:
    """S = softmax(MLP(X)); one gradient step A~ = relu(A - mu grad) shrinks the gap."""
    mlp = MLPConfig(X.shape[1], cfg.hidden, 2, "softmax")
    S = ad.mlp_forward(mlp, params, X, prefix)
    t = S.tape
    n = g.n
    f = S @ t.const(np.array([[1.0], [-1.0]]) / np.sqrt(n))
    A = g.adjacency
    grad = tape_grad_rcut(f) if cfg.mode == "rcut" else tape_grad_ncut(f, A)
    mu = ad.softplus(params[f"{prefix}mu_raw"]) if cfg.learn_mu else t.const(cfg.mu)
    Avar = t.const(A)
    A_tilde = ad.relu(Avar - ad.scale(grad, mu))
    masked = ad.hadamard(A_tilde, t.const(g.support))
    T = ad.scale(masked + masked.T, 0.5)
    lam = rayleigh_quotient(T, f, cfg.mode, cfg.center)
    fiedler = ad.frobenius_norm(A_tilde - Avar) + ad.scale(ad.hadamard(lam, lam), cfg.alpha)
    cut = cut_loss(S, A)
    return GapLayerOutput(S, f, grad, A_tilde, T, cut, fiedler, lam, mu, cfg.mode)


# ---------------------------------------------------------------- training

@dataclass(frozen=True)
class FitConfig:
    epochs: int = 60
    lr: float = 5e-4
    weight_decay: float = 1e-4
    batch_size: int = 32
    seed: int = 0


@dataclass
class TrainedLayer:
    kind: str  # "ct" or "gap"
    config: CTConfig | GapConfig
    params: ParameterSet
    in_dim: int
    history: list[float] = field(default_factory=list)

    def features(self, g: Graph, seed: int = 0) -> np.ndarray:
        X = node_features(g, self.config.n_probes, seed=seed)
        if X.shape[1] != self.in_dim:
            raise ShapeError(f"graph yields {X.shape[1]} feature columns, layer expects {self.in_dim}")
        return X

    def forward(self, g: Graph, seed: int = 0, with_loss: bool = True):
        tape = Tape()
        bound = tape.bind(self.params)
        X = tape.const(self.features(g, seed))
        if self.kind == "ct":
            return ct_layer_forward(g, bound, self.config, X, with_loss=with_loss)
        return gap_layer_forward(g, bound, self.config, X)

    def diffusion(self, g: Graph, seed: int = 0) -> np.ndarray:
        return self.forward(g, seed, with_loss=False).T.value.copy()


def _check_dataset(graphs: Sequence[Graph]):
    if not graphs:
        raise GraphError("empty training set")
    for i, g in enumerate(graphs):
        if not is_connected(g.adjacency):
            raise GraphError(f"disconnected graph at index {i}")


def _fit(layer: TrainedLayer, graphs: Sequence[Graph], fit: FitConfig) -> TrainedLayer:
    feats = [layer.features(g, seed=fit.seed + i) for i, g in enumerate(graphs)]
    rng = np.random.default_rng(fit.seed)
    params = layer.params
    for epoch in range(fit.epochs):
        order = rng.permutation(len(graphs))
        epoch_loss = 0.0
        for start in range(0, len(order), fit.batch_size):
            batch = order[start:start + fit.batch_size]
            acc = {k: np.zeros_like(v) for k, v in params.values.items()}
            for i in batch:
                tape = Tape()
                bound = tape.bind(params)
                X = tape.const(feats[i])
                if layer.kind == "ct":
                    loss = ct_layer_forward(graphs[i], bound, layer.config, X).loss
                else:
                    loss = gap_layer_forward(graphs[i], bound, layer.config, X).loss
                val = loss.item()
                if not np.isfinite(val):
                    raise TrainingDivergedError(f"non-finite loss at epoch {epoch + 1}")
                epoch_loss += val
                for k, gk in ad.backward(loss, bound).items():
                    acc[k] += gk / len(batch)
            params = ad.adam_step(params, acc, fit.lr, fit.weight_decay)
        layer.history.append(epoch_loss / len(graphs))
    layer.params = params
    return layer


def train_ct_embedder(graphs: Sequence[Graph], cfg: CTConfig = CTConfig(), fit: FitConfig = FitConfig()) -> TrainedLayer:
    """Minimise the mean CT loss over a dataset; history holds the per-epoch mean."""
    _check_dataset(graphs)
    in_dim = node_features(graphs[0], cfg.n_probes).shape[1]
    layer = TrainedLayer("ct", cfg, init_ct_params(cfg, in_dim, fit.seed), in_dim)
    return _fit(layer, graphs, fit)


def train_gap_layer(graphs: Sequence[Graph], cfg: GapConfig = GapConfig(), fit: FitConfig = FitConfig()) -> TrainedLayer:
    """Minimise the mean of L_Cut + L_Fiedler over a dataset."""
    _check_dataset(graphs)
    in_dim = node_features(graphs[0], cfg.n_probes).shape[1]
    layer = TrainedLayer("gap", cfg, init_gap_params(cfg, in_dim, fit.seed), in_dim)
    return _fit(layer, graphs, fit)
