"""Edge-list and TU-style dataset readers, JSON reports and parameter checkpoints."""
from __future__ import annotations

import dataclasses
import json
import math
import sys
from pathlib import Path
from typing import Any, Mapping, TextIO

import numpy as np

from . import __version__
from .autodiff import ParameterSet
from .errors import DataIOError, FormatError, GraphError, ShapeError
from .graph import Graph

CHECKPOINT_FORMAT = "graphrewire-checkpoint"
CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------- edge lists

def _read_text(path: str | Path | TextIO) -> str:
    if hasattr(path, "read"):
        return path.read()
    if str(path) == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as e:
        raise DataIOError(f"cannot read {path}: {e.strerror or e}") from None


def _number(tok: str, lineno: int, what: str, kind=float):
    try:
        x = kind(tok)
    except ValueError:
        raise FormatError(f"bad {what} {tok!r} at line {lineno}") from None
    if kind is float and not math.isfinite(x):
        raise FormatError(f"non-finite {what} at line {lineno}")
    return x


def parse_edge_list(text: str) -> Graph:
    """Parse ``n N`` / ``u v [w]`` lines with an optional ``features F`` block.

    Blank lines and ``#`` comments are ignored; errors name the offending line.
    """
    lines = [(i + 1, ln.split("#", 1)[0].split()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, toks) for i, toks in lines if toks]
    if not lines or lines[0][1][0] != "n" or len(lines[0][1]) != 2:
        where = lines[0][0] if lines else 1
        raise FormatError(f"expected header 'n <count>' at line {where}")
    n = _number(lines[0][1][1], lines[0][0], "node count", int)
    if n < 1:
        raise FormatError(f"node count must be positive at line {lines[0][0]}")
    A = np.zeros((n, n))
    features = None
    pos = 1
    while pos < len(lines):
        lineno, toks = lines[pos]
        if toks[0] == "features":
            if len(toks) != 2:
                raise FormatError(f"expected 'features <F>' at line {lineno}")
            F = _number(toks[1], lineno, "feature count", int)
            rows = lines[pos + 1:pos + 1 + n]
            if len(rows) != n or len(lines) != pos + 1 + n:
                raise FormatError(f"feature block at line {lineno} must be followed by exactly {n} rows")
            features = np.zeros((n, F))
            for r, (ln, vals) in enumerate(rows):
                if len(vals) != F:
                    raise FormatError(f"expected {F} feature values at line {ln}, got {len(vals)}")
                features[r] = [_number(v, ln, "feature value") for v in vals]
            break
        if len(toks) not in (2, 3):
            raise FormatError(f"expected 'u v [weight]' at line {lineno}")
        u = _number(toks[0], lineno, "node index", int)
        v = _number(toks[1], lineno, "node index", int)
        w = _number(toks[2], lineno, "weight") if len(toks) == 3 else 1.0
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"out-of-range index at line {lineno}")
        if u == v:
            raise GraphError(f"self-loop at line {lineno}")
        if w <= 0:
            raise GraphError(f"non-positive weight at line {lineno}")
        if A[u, v] != 0:
            raise GraphError(f"duplicate edge at line {lineno}")
        A[u, v] = A[v, u] = w
        pos += 1
    return Graph(A, features=features)


def load_edge_list(path: str | Path | TextIO) -> Graph:
    return parse_edge_list(_read_text(path))


def format_edge_list(g: Graph) -> str:
    """Canonical text: weight omitted when 1, floats in shortest round-trip form."""
    out = [f"n {g.n}"]
    for u, v, w in g.edges():
        out.append(f"{u} {v}" if w == 1.0 else f"{u} {v} {w!r}")
    if g.features is not None:
        out.append(f"features {g.features.shape[1]}")
        out.extend(" ".join(repr(float(x)) for x in row) for row in g.features)
    return "\n".join(out) + "\n"


def save_edge_list(g: Graph, path: str | Path | TextIO) -> None:
    text = format_edge_list(g)
    if hasattr(path, "write"):
        path.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e.strerror or e}") from None


# ---------------------------------------------------------------- TU datasets

def _tu_file(directory: Path, suffix: str, required: bool = True) -> Path | None:
    hits = sorted(directory.glob(f"*_{suffix}.txt"))
    if not hits:
        if required:
            raise DataIOError(f"missing *_{suffix}.txt in {directory}")
        return None
    return hits[0]


def _int_rows(path: Path, width: int) -> list[tuple[int, list[int]]]:
    rows = []
    for i, ln in enumerate(path.read_text().splitlines()):
        if not ln.strip():
            continue
        toks = [t for t in ln.replace(",", " ").split()]
        if len(toks) != width:
            raise FormatError(f"{path.name}: expected {width} values at line {i + 1}")
        rows.append((i + 1, [_number(t, i + 1, "integer", int) for t in toks]))
    return rows


@dataclasses.dataclass(frozen=True)
class TUDataset:
    graphs: list[Graph]
    label_map: dict[int, int]  # original label -> class index


def load_tu_dataset(directory: str | Path) -> TUDataset:
    """Read DS_A / DS_graph_indicator / DS_graph_labels (1-indexed) into labelled graphs.

    Node attributes are used when DS_node_attributes.txt exists, otherwise the
    degree becomes the single feature column.
    """
    d = Path(directory)
    if not d.is_dir():
        raise DataIOError(f"not a directory: {d}")
    ind = [r[0] for _, r in _int_rows(_tu_file(d, "graph_indicator"), 1)]
    labels_raw = [r[0] for _, r in _int_rows(_tu_file(d, "graph_labels"), 1)]
    n_graphs = len(labels_raw)
    if not ind or min(ind) < 1 or max(ind) > n_graphs:
        raise FormatError(f"graph indicator ids must lie in 1..{n_graphs}")
    node_graph = np.array(ind) - 1
    members = [np.nonzero(node_graph == k)[0] for k in range(n_graphs)]
    local = np.zeros(len(ind), dtype=int)
    for idx in members:
        local[idx] = np.arange(len(idx))
    adj = [np.zeros((len(m), len(m))) for m in members]
    a_path = _tu_file(d, "A")
    for lineno, (u, v) in _int_rows(a_path, 2):
        if not (1 <= u <= len(ind) and 1 <= v <= len(ind)):
            raise FormatError(f"{a_path.name}: node id out of range at line {lineno}")
        gu, gv = node_graph[u - 1], node_graph[v - 1]
        if gu != gv:
            raise GraphError(f"{a_path.name}: edge crosses graphs {gu + 1} and {gv + 1} at line {lineno}")
        if u == v:
            raise GraphError(f"{a_path.name}: self-loop at line {lineno}")
        adj[gu][local[u - 1], local[v - 1]] = adj[gu][local[v - 1], local[u - 1]] = 1.0
    attr_path = _tu_file(d, "node_attributes", required=False)
    attrs = None
    if attr_path is not None:
        rows = [ln for ln in attr_path.read_text().splitlines() if ln.strip()]
        if len(rows) != len(ind):
            raise FormatError(f"{attr_path.name}: {len(rows)} rows for {len(ind)} nodes")
        attrs = np.array([[_number(t, i + 1, "attribute") for t in r.replace(",", " ").split()]
                          for i, r in enumerate(rows)])
    label_map = {lab: i for i, lab in enumerate(sorted(set(labels_raw)))}
    graphs = []
    for k, idx in enumerate(members):
        A = adj[k]
        feats = attrs[idx] if attrs is not None else A.sum(axis=1, keepdims=True)
        graphs.append(Graph(A, features=feats, label=label_map[labels_raw[k]]))
    return TUDataset(graphs, label_map)


# ---------------------------------------------------------------- JSON

def matrix(a) -> dict:
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": [_float(x) for x in a.reshape(-1)]}


def _float(x) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def to_jsonable(obj: Any) -> Any:
    """Plain JSON structure; arrays become {shape, data}, non-finite floats null."""
    if isinstance(obj, np.ndarray):
        if obj.dtype.kind in "iub":
            return {"shape": list(obj.shape), "data": [int(x) for x in obj.reshape(-1)]}
        return matrix(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _float(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any) -> str:
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False) + "\n"


def make_report(command: str, seed: int | None, config: Mapping, results: Any) -> dict:
    return {"command": command, "version": __version__, "seed": seed,
            "config": to_jsonable(config), "results": to_jsonable(results)}


MATRIX_SCHEMA = {
    "type": "object",
    "required": ["shape", "data"],
    "properties": {
        "shape": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "data": {"type": "array", "items": {"type": ["number", "null"]}},
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["command", "version", "seed", "config", "results"],
    "additionalProperties": False,
    "properties": {
        "command": {"type": "string"},
        "version": {"type": "string"},
        "seed": {"type": ["integer", "null"]},
        "config": {"type": "object"},
        "results": {"type": "object"},
    },
    "$defs": {"matrix": MATRIX_SCHEMA},
}

# per-command keys every results object must carry; matrices are checked against MATRIX_SCHEMA
RESULT_KEYS = {
    "embed": {"Z": "matrix", "R": "matrix", "method": "string"},
    "bounds": {"pairs": "array", "spectral_gap": "number", "cheeger": "object", "resistance_bound": "object"},
    "rewire": {"T": "matrix", "losses": "object"},
    "sparsify": {"kept_edges": "array", "adjacency": "matrix", "similarity": "object"},
    "curvature": {"node": "array", "edges": "array"},
    "train": {"history": "array", "checkpoint": "string"},
    "experiment": {"table": "object"},
}


def results_schema(command: str) -> dict:
    keys = RESULT_KEYS[command]
    props = {k: (MATRIX_SCHEMA if t == "matrix" else {"type": t}) for k, t in keys.items()}
    return {"type": "object", "required": list(keys), "properties": props}


# ---------------------------------------------------------------- checkpoints

def checkpoint_dict(kind: str, config: Mapping, params: ParameterSet, extra: Mapping | None = None) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "config": to_jsonable(config),
        "extra": to_jsonable(extra or {}),
        "params": {k: matrix(v) for k, v in params.values.items()},
    }


def save_checkpoint(path: str | Path, kind: str, config: Mapping, params: ParameterSet,
                    extra: Mapping | None = None) -> None:
    text = json.dumps(checkpoint_dict(kind, config, params, extra), indent=1, allow_nan=False) + "\n"
    try:
        Path(path).write_text(text)
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e.strerror or e}") from None


@dataclasses.dataclass(frozen=True)
class Checkpoint:
    kind: str
    config: dict
    extra: dict
    params: ParameterSet


def load_checkpoint(path: str | Path, expected_shapes: Mapping[str, tuple[int, int]] | None = None) -> Checkpoint:
    """Read a checkpoint; ``expected_shapes`` (if given) must match names and shapes exactly."""
    text = _read_text(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"checkpoint {path} is not valid JSON (truncated?): {e.msg} at line {e.lineno}") from None
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"{path} is not a {CHECKPOINT_FORMAT} file")
    for key in ("kind", "config", "params"):
        if key not in doc:
            raise FormatError(f"checkpoint {path} lacks field {key!r}")
    values = {}
    for name, m in doc["params"].items():
        try:
            shape = tuple(int(s) for s in m["shape"])
            data = np.array(m["data"], dtype=float)
        except (KeyError, TypeError, ValueError):
            raise FormatError(f"parameter {name!r} is malformed") from None
        if len(shape) != 2 or data.size != shape[0] * shape[1]:
            raise ShapeError(f"parameter {name!r}: payload of {data.size} values does not fit shape {shape}")
        values[name] = data.reshape(shape)
    if expected_shapes is not None:
        for name, shape in expected_shapes.items():
            if name not in values:
                raise ShapeError(f"parameter {name!r} missing from checkpoint (expected shape {tuple(shape)})")
            if values[name].shape != tuple(shape):
                raise ShapeError(f"parameter {name!r} has shape {values[name].shape}, expected {tuple(shape)}")
        extra_names = sorted(set(values) - set(expected_shapes))
        if extra_names:
            raise ShapeError(f"unexpected parameter {extra_names[0]!r} in checkpoint")
    return Checkpoint(doc["kind"], doc["config"], doc.get("extra", {}), ParameterSet(values))

