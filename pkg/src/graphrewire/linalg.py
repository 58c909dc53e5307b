"""Dense symmetric eigensolver, Laplacian pseudo-inverse and distance helpers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DisconnectedGraphError, ShapeError

SYM_TOL = 1e-9
OFFDIAG_TOL = 1e-12
MAX_SWEEPS = 100
ZERO_EIG_REL = 1e-8


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # column i pairs with eigenvalue i

    def __iter__(self):
        yield self.eigenvalues
        yield self.eigenvectors


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Tournament schedule: n-1 rounds (n even) of n/2 disjoint index pairs."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        P, Q = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                P.append(min(a, b))
                Q.append(max(a, b))
        rounds.append((np.array(P, dtype=int), np.array(Q, dtype=int)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _fix_signs(V: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Flip each column so its first component above ``tol`` is positive."""
    V = V.copy()
    for j in range(V.shape[1]):
        nz = np.nonzero(np.abs(V[:, j]) > tol)[0]
        if nz.size and V[nz[0], j] < 0:
            V[:, j] = -V[:, j]
    return V


def sym_eig(M: np.ndarray) -> SpectralDecomposition:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Rotations are applied in round-robin order, n/2 disjoint pairs at a time,
    which keeps each round a handful of vectorised row/column updates.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"sym_eig needs a square matrix, got {M.shape}")
    if np.linalg.norm(M - M.T) > SYM_TOL:
        raise ShapeError("sym_eig input is not symmetric")
    n = M.shape[0]
    A = (M + M.T) / 2
    V = np.eye(n)
    tol = OFFDIAG_TOL * max(1.0, np.linalg.norm(A))
    rounds = _round_robin(n) if n > 1 else []
    for sweep in range(MAX_SWEEPS + 1):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off < tol:
            break
        if sweep == MAX_SWEEPS:
            raise ConvergenceError(f"Jacobi did not converge after {MAX_SWEEPS} sweeps (off-diagonal {off:.3e})")
        for P, Q in rounds:
            apq = A[P, Q]
            active = np.abs(apq) > 0
            if not active.any():
                continue
            P, Q, apq = P[active], Q[active], apq[active]
            theta = (A[Q, Q] - A[P, P]) / (2 * apq)
            t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
            t[theta == 0] = 1.0
            c = 1 / np.sqrt(t * t + 1)
            s = t * c
            AP, AQ = A[:, P].copy(), A[:, Q].copy()
            A[:, P] = c * AP - s * AQ
            A[:, Q] = s * AP + c * AQ
            AP, AQ = A[P, :].copy(), A[Q, :].copy()
            A[P, :] = c[:, None] * AP - s[:, None] * AQ
            A[Q, :] = s[:, None] * AP + c[:, None] * AQ
            A[P, Q] = 0.0
            A[Q, P] = 0.0
            VP, VQ = V[:, P].copy(), V[:, Q].copy()
            V[:, P] = c * VP - s * VQ
            V[:, Q] = s * VP + c * VQ
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return SpectralDecomposition(w[order], _fix_signs(V[:, order]))


def zero_eigen_count(eigenvalues: np.ndarray) -> int:
    scale = max(float(np.max(np.abs(eigenvalues))), 1e-300)
    return int(np.sum(np.abs(eigenvalues) < ZERO_EIG_REL * scale))


def _nonzero_pairs(decomp: SpectralDecomposition):
    w, V = decomp
    if zero_eigen_count(w) != 1:
        raise DisconnectedGraphError()
    return w[1:], V[:, 1:]


def laplacian_pinv(L: np.ndarray, decomp: SpectralDecomposition | None = None) -> np.ndarray:
    """Moore-Penrose inverse sum_{i>=2} f_i f_i^T / lambda_i of a connected Laplacian."""
    if decomp is None:
        decomp = sym_eig(L)
    w, F = _nonzero_pairs(decomp)
    P = (F / w) @ F.T
    return (P + P.T) / 2


def laplacian_pinv_sqrt(L: np.ndarray, decomp: SpectralDecomposition | None = None) -> np.ndarray:
    if decomp is None:
        decomp = sym_eig(L)
    w, F = _nonzero_pairs(decomp)
    P = (F / np.sqrt(w)) @ F.T
    return (P + P.T) / 2


def cdist(Z: np.ndarray, squared: bool = False) -> np.ndarray:
    """Pairwise Euclidean distances between the rows of ``Z``."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    diff = Z[:, None, :] - Z[None, :, :]
    D2 = np.einsum("uvk,uvk->uv", diff, diff)
    D2 = (D2 + D2.T) / 2
    np.fill_diagonal(D2, 0.0)
    return D2 if squared else np.sqrt(D2)


def psd_dominates(hi: np.ndarray, lo: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff ``hi - lo`` is positive semidefinite (min eigenvalue >= -tol)."""
    hi, lo = np.asarray(hi, float), np.asarray(lo, float)
    if hi.shape != lo.shape:
        raise ShapeError(f"psd_dominates shape mismatch {hi.shape} vs {lo.shape}")
    w, _ = sym_eig((hi - lo + (hi - lo).T) / 2)
    return bool(w[0] >= -tol)
