"""Graph classifiers with optional CT/GAP rewiring, MinCut pooling, training and
the synthetic SBM / Erdos-Renyi comparison."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ParameterSet, Tape, Var
from .errors import GraphError, ShapeError, TrainingDivergedError
from .features import node_features
from .graph import Graph, gen_er, gen_sbm
from .rewiring import (CTConfig, GapConfig, ct_layer_forward, cut_loss_terms,
                       gap_layer_forward, init_ct_params, init_gap_params)

KINDS = ("baseline", "ct", "gap-rcut", "gap-ncut")
MASS_EPS = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "baseline"
    in_dim: int = 10
    hidden: int = 32
    k_pool: int = 8
    n_classes: int = 2
    n_probes: int = 8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GraphError(f"unknown model kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if min(self.in_dim, self.hidden, self.k_pool, self.n_classes) < 1:
            raise ShapeError(f"model dimensions must be positive: {self}")

    @property
    def rewiring(self) -> Optional[str]:
        return None if self.kind == "baseline" else self.kind

    def ct_config(self) -> CTConfig:
        return CTConfig(hidden=self.hidden, k=self.hidden, n_probes=self.n_probes)

    def gap_config(self) -> GapConfig:
        return GapConfig(hidden=self.hidden, mode=self.kind.split("-")[1], n_probes=self.n_probes)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 5e-4
    weight_decay: float = 1e-4
    epochs: int = 60
    batch_size: int = 8
    seed: int = 0
    train_fraction: float = 0.85
    resample_probes: bool = True  # fresh diffusion probes every epoch; they carry no class signal

    def __post_init__(self):
        if not (self.lr > 0 and self.weight_decay >= 0 and self.epochs >= 1 and self.batch_size >= 1):
            raise GraphError(f"invalid training configuration {self}")
        if not 0 < self.train_fraction < 1:
            raise GraphError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


@dataclass
class Metrics:
    train_loss: list[float]
    train_accuracy: list[float]
    test_accuracy: float
    confusion: np.ndarray  # rows: true class, columns: predicted

    def to_dict(self) -> dict:
        return {"train_loss": self.train_loss, "train_accuracy": self.train_accuracy,
                "test_accuracy": self.test_accuracy, "confusion": self.confusion.tolist()}


@dataclass
class Model:
    spec: ModelSpec
    params: ParameterSet


def build_model(spec: ModelSpec, seed: int = 0) -> Model:
    """Linear -> [rewiring] -> Conv -> MinCutPool -> Conv -> mean readout -> MLP classifier."""
    rng = np.random.default_rng(seed)
    h, k = spec.hidden, spec.k_pool
    vals = {
        "lin.W": ad.xavier(rng, spec.in_dim, h), "lin.b": np.zeros((1, h)),
        "conv1.W": ad.xavier(rng, h, h), "conv1.b": np.zeros((1, h)),
        "pool.W": ad.xavier(rng, h, k), "pool.b": np.zeros((1, k)),
        "conv2.W": ad.xavier(rng, h, h), "conv2.Wself": ad.xavier(rng, h, h), "conv2.b": np.zeros((1, h)),
        "cls.W1": ad.xavier(rng, h, h), "cls.b1": np.zeros((1, h)),
        "cls.W2": ad.xavier(rng, h, spec.n_classes), "cls.b2": np.zeros((1, spec.n_classes)),
    }
    if spec.rewiring is not None:
        vals["conv1.Wself"] = ad.xavier(rng, h, h)
    params = ParameterSet(vals)
    sub_seed = int(rng.integers(2 ** 31))
    if spec.kind == "ct":
        params = params.merged(init_ct_params(spec.ct_config(), h, sub_seed))
    elif spec.rewiring is not None:
        params = params.merged(init_gap_params(spec.gap_config(), h, sub_seed))
    return Model(spec, params)


def gcn_conv(T: Var, X: Var, W: Var, b: Optional[Var] = None, W_self: Optional[Var] = None,
             activation: str = "relu", support: Optional[np.ndarray] = None) -> Var:
    """activation(T X W + X W_self + b); ``support`` enforces supp(T) within supp(A)."""
    if T.shape[0] != T.shape[1] or T.shape[1] != X.shape[0]:
        raise ShapeError(f"gcn_conv: T {T.shape} incompatible with X {X.shape}")
    if support is not None and np.any((T.value != 0) & (support == 0)):
        raise GraphError("gcn_conv: diffusion matrix has weight outside the adjacency support")
    out = T @ (X @ W)
    if W_self is not None:
        out = out + X @ W_self
    if b is not None:
        out = out + b
    if activation == "relu":
        return ad.relu(out)
    if activation == "tanh":
        return ad.tanh(out)
    if activation == "none":
        return out
    raise ShapeError(f"unknown activation {activation!r}")


@dataclass
class PoolOutput:
    A: Var
    X: Var
    loss_cut: Var
    loss_ortho: Var


def mincut_pool(A: np.ndarray, X: Var, S: Var) -> PoolOutput:
    """A' = S'AS, X' = S'X and the k-way cut/orthogonality auxiliary losses."""
    if S.shape[0] != X.shape[0] or A.shape != (S.shape[0], S.shape[0]):
        raise ShapeError(f"mincut_pool: A {A.shape}, X {X.shape}, S {S.shape} are inconsistent")
    t = S.tape
    A_pooled = S.T @ (t.const(A) @ S)
    cut, ortho = cut_loss_terms(S, A)
    return PoolOutput(A_pooled, S.T @ X, cut, ortho)


def normalized_adjacency_with_loops(A: np.ndarray) -> np.ndarray:
    Ah = A + np.eye(A.shape[0])
    s = 1 / np.sqrt(Ah.sum(axis=1))
    return s[:, None] * Ah * s[None, :]


@dataclass
class PreparedGraph:
    graph: Graph
    X: np.ndarray
    T_base: np.ndarray
    row_scale: np.ndarray  # vol / d_u broadcast over each row
    label: int


def prepare(g: Graph, spec: ModelSpec, seed: int = 0) -> PreparedGraph:
    X = node_features(g, spec.n_probes, seed=seed)
    if X.shape[1] != spec.in_dim:
        raise ShapeError(f"graph yields {X.shape[1]} feature columns, model expects {spec.in_dim}")
    if g.label is None:
        raise GraphError("graph has no label")
    row_scale = np.repeat((g.volume / g.degrees)[:, None], g.n, axis=1)
    return PreparedGraph(g, X, normalized_adjacency_with_loops(g.adjacency), row_scale, int(g.label))


@dataclass
class ForwardOutput:
    logits: Var
    loss: Var
    ce: Var
    aux: dict[str, Var] = field(default_factory=dict)
    T: Optional[Var] = None


def forward(model: Model, pg: PreparedGraph, tape: Tape, params: dict[str, Var],
            include_rewiring_loss: bool = True) -> ForwardOutput:
    spec = model.spec
    g = pg.graph
    H0 = ad.add(tape.const(pg.X) @ params["lin.W"], params["lin.b"])
    aux: dict[str, Var] = {}
    W_self = None
    if spec.kind == "baseline":
        T = tape.const(pg.T_base)
    else:
        if spec.kind == "ct":
            out = ct_layer_forward(g, params, spec.ct_config(), H0)
            aux["ct"] = out.loss
        else:
            out = gap_layer_forward(g, params, spec.gap_config(), H0)
            aux["gap_cut"], aux["gap_fiedler"] = out.loss_cut, out.loss_fiedler
        # rescale to the graph's edge mass, then row-normalise by the original degrees
        mass = ad.total(out.T) + MASS_EPS
        T = ad.hadamard(tape.const(pg.row_scale), out.T) / mass
        W_self = params["conv1.Wself"]
    H1 = gcn_conv(T, H0, params["conv1.W"], params["conv1.b"], W_self)
    S = ad.row_softmax(ad.add(H1 @ params["pool.W"], params["pool.b"]))
    pool = mincut_pool(g.adjacency, H1, S)
    aux["pool_cut"], aux["pool_ortho"] = pool.loss_cut, pool.loss_ortho
    k = spec.k_pool
    A2 = pool.A / (ad.total(pool.A) * (1.0 / (k * k)) + MASS_EPS)
    H2 = gcn_conv(A2, pool.X, params["conv2.W"], params["conv2.b"], params["conv2.Wself"])
    readout = tape.const(np.full((1, k), 1.0 / k)) @ H2
    hid = ad.relu(ad.add(readout @ params["cls.W1"], params["cls.b1"]))
    logits = ad.add(hid @ params["cls.W2"], params["cls.b2"])
    ce = ad.cross_entropy(logits, [pg.label])
    loss = ce
    for name, term in aux.items():
        if include_rewiring_loss or name.startswith("pool"):
            loss = loss + term
    return ForwardOutput(logits, loss, ce, aux, T)


def predict(model: Model, pg: PreparedGraph) -> int:
    tape = Tape()
    out = forward(model, pg, tape, tape.bind(model.params))
    return int(np.argmax(out.logits.value[0]))


def stratified_split(labels: Sequence[int], train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    tr, te = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.nonzero(labels == c)[0])
        cut = int(round(train_fraction * len(idx)))
        tr.extend(idx[:cut])
        te.extend(idx[cut:])
    return np.sort(np.array(tr, dtype=int)), np.sort(np.array(te, dtype=int))


def _accuracy(model: Model, pgs: Sequence[PreparedGraph], n_classes: int) -> tuple[float, np.ndarray]:
    conf = np.zeros((n_classes, n_classes), dtype=int)
    for pg in pgs:
        conf[pg.label, predict(model, pg)] += 1
    total = conf.sum()
    return (float(np.trace(conf) / total) if total else 0.0), conf


def train(model: Model, dataset: Sequence[Graph], cfg: TrainConfig = TrainConfig(),
          split: Optional[tuple[np.ndarray, np.ndarray]] = None) -> Metrics:
    """Mini-batch Adam on cross-entropy plus auxiliary losses; last-epoch test metrics."""
    spec = model.spec
    pgs = [prepare(g, spec, seed=cfg.seed + i) for i, g in enumerate(dataset)]
    if split is None:
        split = stratified_split([pg.label for pg in pgs], cfg.train_fraction, cfg.seed)
    train_idx, test_idx = split
    rng = np.random.default_rng(cfg.seed + 1)
    params = model.params
    losses, accs = [], []
    for epoch in range(cfg.epochs):
        order = rng.permutation(train_idx)
        if cfg.resample_probes and spec.n_probes > 0 and epoch > 0:
            for i in train_idx:
                X = node_features(pgs[i].graph, spec.n_probes, seed=[cfg.seed, epoch, int(i)])
                pgs[i] = replace(pgs[i], X=X)
        total, correct = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            acc = {k: np.zeros_like(v) for k, v in params.values.items()}
            for i in batch:
                tape = Tape()
                bound = tape.bind(params)
                out = forward(model, pgs[i], tape, bound)
                val = out.loss.item()
                if not np.isfinite(val):
                    raise TrainingDivergedError(f"non-finite loss at epoch {epoch + 1}")
                total += val
                correct += int(np.argmax(out.logits.value[0]) == pgs[i].label)
                for k, gk in ad.backward(out.loss, bound).items():
                    acc[k] += gk / len(batch)
            params = ad.adam_step(params, acc, cfg.lr, cfg.weight_decay)
            model.params = params
        losses.append(total / max(len(train_idx), 1))
        accs.append(correct / max(len(train_idx), 1))
    test_acc, conf = _accuracy(model, [pgs[i] for i in test_idx], spec.n_classes)
    return Metrics(losses, accs, test_acc, conf)


# ---------------------------------------------------------------- synthetic task

@dataclass(frozen=True)
class SyntheticConfig:
    n_graphs: int = 200
    n_min: int = 20
    n_max: int = 40
    epochs: int = 60
    batch_size: int = 8
    lr: float = 5e-4
    weight_decay: float = 1e-4
    kinds: tuple[str, ...] = KINDS


def sbm_dataset(n_graphs: int, n_min: int, n_max: int, seed: int) -> list[Graph]:
    """Class 0: p=0.8, q in [0.1, 0.15]; class 1: p=0.5, q in [0.01, 0.1]; two equal-ish blocks."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_graphs):
        label = i % 2
        n = int(rng.integers(n_min, n_max + 1))
        sizes = (n // 2, n - n // 2)
        p, q = (0.8, rng.uniform(0.1, 0.15)) if label == 0 else (0.5, rng.uniform(0.01, 0.1))
        g = gen_sbm(sizes, p, float(q), int(rng.integers(2 ** 31)), force_bridge=True)
        out.append(g.replace(label=label))
    return out


def er_dataset(n_graphs: int, n_min: int, n_max: int, seed: int) -> list[Graph]:
    """Class 0: p in [0.3, 0.5]; class 1: p in [0.4, 0.8]."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_graphs):
        label = i % 2
        n = int(rng.integers(n_min, n_max + 1))
        p = rng.uniform(0.3, 0.5) if label == 0 else rng.uniform(0.4, 0.8)
        out.append(gen_er(n, float(p), int(rng.integers(2 ** 31))).replace(label=label))
    return out


def experiment_synthetic(seeds: Sequence[int], cfg: SyntheticConfig = SyntheticConfig()) -> dict:
    """Test accuracy per dataset, model kind and seed, with mean and std."""
    table: dict = {}
    for ds_name, maker in (("SBM", sbm_dataset), ("ER", er_dataset)):
        rows = {}
        for kind in cfg.kinds:
            accs = []
            for seed in seeds:
                data = maker(cfg.n_graphs, cfg.n_min, cfg.n_max, seed)
                spec = ModelSpec(kind=kind, in_dim=node_features(data[0], 8).shape[1])
                model = build_model(spec, seed)
                tc = TrainConfig(cfg.lr, cfg.weight_decay, cfg.epochs, cfg.batch_size, seed)
                accs.append(train(model, data, tc).test_accuracy)
            rows[kind] = {"accuracies": accs, "mean": float(np.mean(accs)), "std": float(np.std(accs))}
        table[ds_name] = rows
    return {"config": asdict(cfg), "seeds": list(seeds), "table": table}
