"""Reverse-mode differentiation over dense matrices, plus MLP and Adam helpers.

Every value on a tape is a 2-D float array; scalars are 1x1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ShapeError

CDIST_CLAMP = 1e-12


class Tape:
    """Append-only record of operations; node ids are positions in ``nodes``."""

    def __init__(self):
        self.nodes: list[tuple[str, tuple[int, ...], np.ndarray, Callable | None]] = []
        self.params: dict[str, int] = {}

    def _push(self, kind: str, inputs: tuple["Var", ...], value: np.ndarray, vjp: Callable | None) -> "Var":
        for x in inputs:
            if x.tape is not self:
                raise ShapeError(f"{kind}: operand belongs to a different tape")
        value = np.asarray(value, dtype=float)
        if value.ndim != 2:
            raise ShapeError(f"{kind}: produced a {value.ndim}-d value")
        self.nodes.append((kind, tuple(x.id for x in inputs), value, vjp))
        return Var(self, len(self.nodes) - 1)

    def const(self, value) -> "Var":
        v = np.array(value, dtype=float)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        elif v.ndim == 1:
            v = v[:, None]
        return self._push("const", (), v, None)

    def param(self, name: str, value) -> "Var":
        if name in self.params:
            raise ShapeError(f"parameter {name!r} already bound on this tape")
        var = self.const(value)
        self.params[name] = var.id
        return var

    def bind(self, params: "ParameterSet | Mapping[str, np.ndarray]") -> dict[str, "Var"]:
        values = params.values if isinstance(params, ParameterSet) else params
        return {k: self.param(k, v) for k, v in values.items()}


class Var:
    __slots__ = ("tape", "id")
    __array_priority__ = 1000

    def __init__(self, tape: Tape, id: int):
        self.tape = tape
        self.id = id

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.id][2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def item(self) -> float:
        if self.shape != (1, 1):
            raise ShapeError(f"item() on non-scalar of shape {self.shape}")
        return float(self.value[0, 0])

    def _lift(self, other) -> "Var":
        return other if isinstance(other, Var) else self.tape.const(other)

    def __add__(self, other):
        return add(self, self._lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, self._lift(other))

    def __rsub__(self, other):
        return sub(self._lift(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        if isinstance(other, Var) and other.shape == (1, 1) and self.shape != (1, 1):
            return scale(self, other)
        return hadamard(self, self._lift(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, self._lift(other))

    def __rmatmul__(self, other):
        return matmul(self._lift(other), self)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, 1.0 / other)
        return scalar_div(self, self._lift(other))

    @property
    def T(self):
        return transpose(self)


def _same_shape(kind, a: Var, b: Var):
    if a.shape != b.shape:
        raise ShapeError(f"{kind}: shape mismatch {a.shape} vs {b.shape}")


def _scalar(kind, s: Var):
    if s.shape != (1, 1):
        raise ShapeError(f"{kind}: expected a 1x1 scalar, got {s.shape}")


def matmul(a: Var, b: Var) -> Var:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shape mismatch {a.shape} @ {b.shape}")
    A, B = a.value, b.value
    return a.tape._push("matmul", (a, b), A @ B, lambda g: (g @ B.T, A.T @ g))


def add(a: Var, b: Var) -> Var:
    """Elementwise sum; ``b`` may also be a 1 x d row broadcast over rows of ``a``."""
    if a.shape == b.shape:
        return a.tape._push("add", (a, b), a.value + b.value, lambda g: (g, g))
    if b.shape == (1, a.shape[1]):
        return a.tape._push("add", (a, b), a.value + b.value, lambda g: (g, g.sum(axis=0, keepdims=True)))
    raise ShapeError(f"add: shape mismatch {a.shape} vs {b.shape}")


def sub(a: Var, b: Var) -> Var:
    _same_shape("sub", a, b)
    return a.tape._push("sub", (a, b), a.value - b.value, lambda g: (g, -g))


def hadamard(a: Var, b: Var) -> Var:
    _same_shape("hadamard", a, b)
    A, B = a.value, b.value
    return a.tape._push("hadamard", (a, b), A * B, lambda g: (g * B, g * A))


def tanh(a: Var) -> Var:
    y = np.tanh(a.value)
    return a.tape._push("tanh", (a,), y, lambda g: (g * (1 - y * y),))


def relu(a: Var) -> Var:
    mask = (a.value > 0).astype(float)
    return a.tape._push("relu", (a,), a.value * mask, lambda g: (g * mask,))


def softplus(a: Var) -> Var:
    x = a.value
    y = np.logaddexp(0.0, x)
    sig = 0.5 * (1 + np.tanh(x / 2))
    return a.tape._push("softplus", (a,), y, lambda g: (g * sig,))


def row_softmax(a: Var) -> Var:
    x = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(x)
    s = e / e.sum(axis=1, keepdims=True)
    return a.tape._push("row_softmax", (a,), s, lambda g: (s * (g - (g * s).sum(axis=1, keepdims=True)),))


def trace(a: Var) -> Var:
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"trace: non-square operand {a.shape}")
    n = a.shape[0]
    return a.tape._push("trace", (a,), np.array([[np.trace(a.value)]]), lambda g: (g[0, 0] * np.eye(n),))


def frobenius_norm(a: Var) -> Var:
    """||a||_F with zero subgradient at the origin."""
    X = a.value
    nrm = float(np.sqrt(np.sum(X * X)))
    return a.tape._push("frobenius_norm", (a,), np.array([[nrm]]),
                        lambda g: (g[0, 0] * X / nrm if nrm > 0 else np.zeros_like(X),))


def scalar_div(a: Var, s: Var) -> Var:
    _scalar("scalar_div", s)
    X, c = a.value, float(s.value[0, 0])
    return a.tape._push("scalar_div", (a, s), X / c,
                        lambda g: (g / c, np.array([[-np.sum(g * X) / (c * c)]])))


def scale(a: Var, c) -> Var:
    """Multiply by a python float or a 1x1 Var."""
    if isinstance(c, Var):
        _scalar("scale", c)
        X, k = a.value, float(c.value[0, 0])
        return a.tape._push("scale", (a, c), k * X, lambda g: (k * g, np.array([[np.sum(g * X)]])))
    k = float(c)
    return a.tape._push("scale", (a,), k * a.value, lambda g: (k * g,))


def total(a: Var) -> Var:
    shape = a.shape
    return a.tape._push("sum", (a,), np.array([[a.value.sum()]]), lambda g: (np.full(shape, g[0, 0]),))


def transpose(a: Var) -> Var:
    return a.tape._push("transpose", (a,), a.value.T.copy(), lambda g: (g.T,))


def cdist_sq(a: Var) -> Var:
    """Squared Euclidean distances between rows."""
    Z = a.value
    diff = Z[:, None, :] - Z[None, :, :]
    D = np.einsum("uvk,uvk->uv", diff, diff)

    def vjp(g):
        Gs = g + g.T
        return (2 * (Gs.sum(axis=1, keepdims=True) * Z - Gs @ Z),)

    return a.tape._push("cdist_sq", (a,), D, vjp)


def cdist(a: Var) -> Var:
    """Euclidean distances between rows; coincident rows get a zero subgradient."""
    Z = a.value
    diff = Z[:, None, :] - Z[None, :, :]
    D = np.sqrt(np.einsum("uvk,uvk->uv", diff, diff))

    def vjp(g):
        safe = D > CDIST_CLAMP
        W = np.where(safe, g / np.where(safe, D, 1.0), 0.0)
        Ws = W + W.T
        return (Ws.sum(axis=1, keepdims=True) * Z - Ws @ Z,)

    return a.tape._push("cdist", (a,), D, vjp)


def cross_entropy(logits: Var, labels) -> Var:
    """Mean softmax cross-entropy over rows of ``logits`` against integer labels."""
    y = np.asarray(labels, dtype=int).reshape(-1)
    X = logits.value
    if y.size != X.shape[0]:
        raise ShapeError(f"cross_entropy: {X.shape[0]} rows vs {y.size} labels")
    x = X - X.max(axis=1, keepdims=True)
    logz = np.log(np.exp(x).sum(axis=1, keepdims=True))
    logp = x - logz
    rows = np.arange(y.size)
    loss = -logp[rows, y].mean()
    p = np.exp(logp)
    onehot = np.zeros_like(p)
    onehot[rows, y] = 1.0
    return logits.tape._push("cross_entropy", (logits,), np.array([[loss]]),
                             lambda g: (g[0, 0] * (p - onehot) / y.size,))


def backward(loss: Var, params: Mapping[str, Var] | None = None) -> dict[str, np.ndarray]:
    """Gradient of a scalar ``loss`` for every parameter bound on its tape."""
    if loss.shape != (1, 1):
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = loss.tape
    grads: list[np.ndarray | None] = [None] * (loss.id + 1)
    grads[loss.id] = np.ones((1, 1))
    for i in range(loss.id, -1, -1):
        g = grads[i]
        if g is None:
            continue
        _, inputs, _, vjp = tape.nodes[i]
        if vjp is None:
            continue
        for j, gj in zip(inputs, vjp(g)):
            grads[j] = gj if grads[j] is None else grads[j] + gj
    ids = {k: v.id for k, v in params.items()} if params is not None else tape.params
    out = {}
    for name, i in ids.items():
        g = grads[i] if i < len(grads) else None
        out[name] = np.zeros_like(tape.nodes[i][2]) if g is None else g
    return out


@dataclass
class ParameterSet:
    """Named parameter matrices with Adam moment accumulators."""

    values: dict[str, np.ndarray]
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        self.values = {k: np.array(x, dtype=float) for k, x in self.values.items()}
        for k, x in self.values.items():
            if x.ndim != 2:
                raise ShapeError(f"parameter {k!r} must be 2-d, got shape {x.shape}")
            self.m.setdefault(k, np.zeros_like(x))
            self.v.setdefault(k, np.zeros_like(x))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def names(self) -> list[str]:
        return list(self.values)

    def shapes(self) -> dict[str, tuple[int, int]]:
        return {k: x.shape for k, x in self.values.items()}

    def copy(self) -> "ParameterSet":
        return ParameterSet({k: x.copy() for k, x in self.values.items()},
                            {k: x.copy() for k, x in self.m.items()},
                            {k: x.copy() for k, x in self.v.items()}, self.step)

    def merged(self, other: "ParameterSet") -> "ParameterSet":
        clash = set(self.values) & set(other.values)
        if clash:
            raise ShapeError(f"duplicate parameter names {sorted(clash)}")
        return ParameterSet({**self.values, **other.values})


def adam_step(params: ParameterSet, grads: Mapping[str, np.ndarray], lr: float, weight_decay: float = 0.0,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> ParameterSet:
    """One Adam update; weight decay is decoupled and applied after the adaptive step."""
    out = params.copy()
    out.step += 1
    t = out.step
    for k, p in out.values.items():
        g = np.asarray(grads[k], dtype=float)
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {k!r} has shape {g.shape}, parameter has {p.shape}")
        out.m[k] = beta1 * out.m[k] + (1 - beta1) * g
        out.v[k] = beta2 * out.v[k] + (1 - beta2) * g * g
        mhat = out.m[k] / (1 - beta1 ** t)
        vhat = out.v[k] / (1 - beta2 ** t)
        p = p - lr * mhat / (np.sqrt(vhat) + eps)
        out.values[k] = p * (1 - lr * weight_decay)
    return out


def grad_check(f: Callable[[Tape, dict[str, Var]], Var], params: ParameterSet | Mapping[str, np.ndarray],
               h: float = 1e-5) -> float:
    """Max over entries of |a - n| / max(1e-8, |a| + |n|), with n from central differences."""
    values = params.values if isinstance(params, ParameterSet) else dict(params)
    values = {k: np.array(x, dtype=float) for k, x in values.items()}

    def evaluate(vals) -> float:
        tape = Tape()
        return f(tape, tape.bind(vals)).item()

    tape = Tape()
    bound = tape.bind(values)
    analytic = backward(f(tape, bound), bound)
    worst = 0.0
    for k, x in values.items():
        for idx in np.ndindex(x.shape):
            orig = x[idx]
            x[idx] = orig + h
            fp = evaluate(values)
            x[idx] = orig - h
            fm = evaluate(values)
            x[idx] = orig
            num = (fp - fm) / (2 * h)
            a = analytic[k][idx]
            worst = max(worst, abs(a - num) / max(1e-8, abs(a) + abs(num)))
    return worst


@dataclass(frozen=True)
class MLPConfig:
    in_dim: int
    hidden: int = 32
    out_dim: int = 32
    activation: str = "tanh"  # output head: tanh | softmax

    def __post_init__(self):
        if min(self.in_dim, self.hidden, self.out_dim) < 1:
            raise ShapeError(f"MLP dims must be >= 1, got {self}")
        if self.activation not in ("tanh", "softmax"):
            raise ShapeError(f"unknown MLP output activation {self.activation!r}")


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=(fan_in, fan_out))


def init_mlp(cfg: MLPConfig, rng: np.random.Generator, prefix: str = "") -> dict[str, np.ndarray]:
    return {
        f"{prefix}W1": xavier(rng, cfg.in_dim, cfg.hidden),
        f"{prefix}b1": np.zeros((1, cfg.hidden)),
        f"{prefix}W2": xavier(rng, cfg.hidden, cfg.out_dim),
        f"{prefix}b2": np.zeros((1, cfg.out_dim)),
    }


def mlp_forward(cfg: MLPConfig, params: Mapping[str, Var], X: Var, prefix: str = "") -> Var:
    if X.shape[1] != cfg.in_dim:
        raise ShapeError(f"mlp_forward: input has {X.shape[1]} columns, config expects {cfg.in_dim}")
    H = tanh(add(matmul(X, params[f"{prefix}W1"]), params[f"{prefix}b1"]))
    out = add(matmul(H, params[f"{prefix}W2"]), params[f"{prefix}b2"])
    return tanh(out) if cfg.activation == "tanh" else row_softmax(out)
