"""Dense undirected graphs: construction, Laplacians, incidence and generators."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import GraphError

MAX_RETRIES = 100


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable weighted simple graph stored as a dense symmetric adjacency.

    ``blocks`` carries generator block membership (SBM) so tests can use it as
    an oracle; it plays no role in any computation.
    """

    adjacency: np.ndarray
    features: Optional[np.ndarray] = None
    label: Optional[int] = None
    blocks: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        A = np.array(self.adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise GraphError(f"adjacency must be square, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise GraphError("adjacency has non-finite entries")
        if not np.array_equal(A, A.T):
            raise GraphError("adjacency is not symmetric")
        if np.any(np.diag(A) != 0):
            raise GraphError("self-loop on the diagonal")
        if np.any(A < 0):
            raise GraphError("negative edge weight")
        A.setflags(write=False)
        object.__setattr__(self, "adjacency", A)
        if self.features is not None:
            X = np.array(self.features, dtype=float)
            if X.ndim == 1:
                X = X[:, None]
            if X.shape[0] != A.shape[0]:
                raise GraphError(f"features have {X.shape[0]} rows for {A.shape[0]} nodes")
            X.setflags(write=False)
            object.__setattr__(self, "features", X)
        if self.blocks is not None:
            b = np.array(self.blocks, dtype=int)
            b.setflags(write=False)
            object.__setattr__(self, "blocks", b)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def volume(self) -> float:
        return float(self.adjacency.sum())

    @property
    def support(self) -> np.ndarray:
        """Binary edge mask."""
        return (self.adjacency > 0).astype(float)

    def edges(self) -> list[tuple[int, int, float]]:
        """Undirected edges ``(u, v, w)`` with ``u < v`` in lexicographic order."""
        iu, iv = np.nonzero(np.triu(self.adjacency, 1))
        return [(int(u), int(v), float(self.adjacency[u, v])) for u, v in zip(iu, iv)]

    @property
    def num_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.adjacency, 1)))

    def is_unweighted(self) -> bool:
        A = self.adjacency
        return bool(np.all((A == 0) | (A == 1)))

    def replace(self, **changes) -> "Graph":
        kw = dict(adjacency=self.adjacency, features=self.features, label=self.label, blocks=self.blocks)
        kw.update(changes)
        return Graph(**kw)


@dataclass(frozen=True)
class DegreeView:
    degrees: np.ndarray
    volume: float
    d_min: float


def degree_view(g: Graph) -> DegreeView:
    d = g.degrees
    pos = d[d > 0]
    return DegreeView(degrees=d, volume=float(d.sum()), d_min=float(pos.min()) if pos.size else 0.0)


def build_graph(n: int, edges: Iterable[Sequence], features=None, label=None) -> Graph:
    """Build a graph from ``(u, v[, weight])`` tuples; weight defaults to 1."""
    if n < 1:
        raise GraphError(f"node count must be positive, got {n}")
    A = np.zeros((n, n))
    seen = set()
    for e in edges:
        u, v = int(e[0]), int(e[1])
        w = float(e[2]) if len(e) > 2 else 1.0
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"out-of-range index in edge ({u}, {v}) for n={n}")
        if u == v:
            raise GraphError(f"self-loop at edge ({u}, {v})")
        if not (w > 0 and np.isfinite(w)):
            raise GraphError(f"non-positive weight {w} on edge ({u}, {v})")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphError(f"duplicate edge ({u}, {v})")
        seen.add(key)
        A[u, v] = A[v, u] = w
    return Graph(A, features=features, label=label)


def laplacian(g: Graph) -> np.ndarray:
    A = g.adjacency
    return np.diag(A.sum(axis=1)) - A


def normalized_laplacian(g: Graph) -> np.ndarray:
    d = g.degrees
    if np.any(d <= 0):
        raise GraphError(f"zero-degree node {int(np.argmin(d))}")
    s = 1.0 / np.sqrt(d)
    N = s[:, None] * g.adjacency * s[None, :]
    L = np.eye(g.n) - N
    return (L + L.T) / 2


def incidence(g: Graph) -> np.ndarray:
    """Signed incidence matrix with rows scaled by sqrt(weight), so B^T B == L."""
    edges = g.edges()
    B = np.zeros((len(edges), g.n))
    for i, (u, v, w) in enumerate(edges):
        r = np.sqrt(w)
        B[i, u] = r
        B[i, v] = -r
    return B


def is_connected(A: np.ndarray) -> bool:
    n = A.shape[0]
    if n == 0:
        return False
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = [0]
    while frontier:
        nbrs = np.nonzero(A[frontier].sum(axis=0) > 0)[0]
        new = nbrs[~seen[nbrs]]
        seen[new] = True
        frontier = new.tolist()
    return bool(seen.all())


def _sample_upper(rng: np.random.Generator, P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    U = rng.random((n, n))
    A = np.triu((U < P).astype(float), 1)
    return A + A.T


def gen_er(n: int, p: float, seed: int) -> Graph:
    """Connected Erdos-Renyi G(n, p), resampled until connected."""
    if not 0 < p <= 1:
        raise GraphError(f"edge probability must be in (0, 1], got {p}")
    rng = np.random.default_rng(seed)
    P = np.full((n, n), p)
    for _ in range(MAX_RETRIES):
        A = _sample_upper(rng, P)
        if is_connected(A):
            return Graph(A)
    raise GraphError(f"connectivity not achieved in {MAX_RETRIES} retries (n={n}, p={p})")


def gen_sbm(sizes: Sequence[int], p_intra: float, q_inter: float, seed: int,
            force_bridge: bool = False) -> Graph:
    """Connected two-or-more block SBM; ``blocks`` holds the membership.

    With ``force_bridge`` a single uniformly chosen inter-block edge is added
    whenever a draw produced none.
    """
    if not (0 < p_intra <= 1 and 0 <= q_inter < p_intra):
        raise GraphError(f"need 0 <= q_inter < p_intra <= 1, got p={p_intra}, q={q_inter}")
    blocks = np.repeat(np.arange(len(sizes)), sizes)
    same = blocks[:, None] == blocks[None, :]
    P = np.where(same, p_intra, q_inter)
    rng = np.random.default_rng(seed)
    for _ in range(MAX_RETRIES):
        A = _sample_upper(rng, P)
        if force_bridge and not np.any(A[~same]):
            u = rng.choice(np.nonzero(blocks == 0)[0])
            v = rng.choice(np.nonzero(blocks != 0)[0])
            A[u, v] = A[v, u] = 1.0
        if is_connected(A):
            return Graph(A, blocks=blocks)
    raise GraphError(f"connectivity not achieved in {MAX_RETRIES} retries (sizes={tuple(sizes)}, q={q_inter})")


_NAMED = {
    "K3": (3, [(0, 1), (0, 2), (1, 2)]),
    "P2": (2, [(0, 1)]),
    "P3": (3, [(0, 1), (1, 2)]),
    "C4": (4, [(0, 1), (1, 2), (2, 3), (0, 3)]),
    "barbell6": (6, [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)]),
}

NAMED_GRAPHS = tuple(_NAMED)


def gen_named(name: str) -> Graph:
    try:
        n, edges = _NAMED[name]
    except KeyError:
        raise GraphError(f"unknown graph name {name!r}; expected one of {', '.join(_NAMED)}") from None
    return build_graph(n, edges)


def complete_graph(n: int) -> Graph:
    return Graph(np.ones((n, n)) - np.eye(n))


def random_tree(n: int, seed: int) -> Graph:
    """Uniform random recursive tree: node i attaches to a random earlier node."""
    rng = np.random.default_rng(seed)
    return build_graph(n, [(i, int(rng.integers(i))) for i in range(1, n)])
