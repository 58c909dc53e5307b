"""Command-line interface: every subcommand prints a JSON report (or an edge list for gen)."""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .curvature import curvature_on_diffusion, curvature_report
from .errors import GraphError, RewireError
from .features import node_features
from .gnn import (KINDS, ModelSpec, SyntheticConfig, TrainConfig, build_model, er_dataset,
                  experiment_synthetic, sbm_dataset, train)
from .graph import Graph, gen_er, gen_named, gen_sbm
from .io import (dumps, format_edge_list, load_checkpoint, load_edge_list, load_tu_dataset,
                 make_report, save_checkpoint)
from .rewiring import (CTConfig, FitConfig, GapConfig, TrainedLayer, init_ct_params,
                       init_gap_params, train_ct_embedder, train_gap_layer)
from .sparsify import greedy_sparsify, sample_sparsify, spectral_similarity_report
from .spectral import (bounds_report, cheeger, resistance_bound_check, resistance_matrix,
                       spectral_cte)


class UsageError(Exception):
    pass


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _report(args, config: dict, results: dict):
    _emit(dumps(make_report(args.command, args.seed, config, results)), args.out)


def _graph(path: str) -> Graph:
    return load_edge_list(path)


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


# ---------------------------------------------------------------- layers from checkpoints

def _layer_config(kind: str, cfg: dict):
    cls = CTConfig if kind == "ct" else GapConfig
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(cfg) - names)
    if unknown:
        raise GraphError(f"unknown {kind} config key {unknown[0]!r}")
    return cls(**cfg)


def _expected_layer_shapes(kind: str, cfg, in_dim: int) -> dict:
    params = init_ct_params(cfg, in_dim) if kind == "ct" else init_gap_params(cfg, in_dim)
    return params.shapes()


def _load_layer(path: str, kind: str, overrides: dict | None = None) -> TrainedLayer:
    head = load_checkpoint(path)
    if head.kind != kind:
        # still validate shapes so the error names the first mismatching parameter
        cfg = _layer_config(kind, {})
        in_dim = int(head.extra.get("in_dim", 0)) or 1
        load_checkpoint(path, _expected_layer_shapes(kind, cfg, in_dim))
    cfg = _layer_config(kind, {**head.config, **(overrides or {})})
    in_dim = int(head.extra["in_dim"])
    ck = load_checkpoint(path, _expected_layer_shapes(kind, cfg, in_dim))
    return TrainedLayer(kind, cfg, ck.params, in_dim)


def _fresh_layer(kind: str, g: Graph, seed: int, overrides: dict) -> TrainedLayer:
    cfg = _layer_config(kind, overrides)
    in_dim = node_features(g, cfg.n_probes).shape[1]
    params = init_ct_params(cfg, in_dim, seed) if kind == "ct" else init_gap_params(cfg, in_dim, seed)
    return TrainedLayer(kind, cfg, params, in_dim)


# ---------------------------------------------------------------- commands

def cmd_gen(args):
    if args.family == "er":
        g = gen_er(args.n, args.p, args.seed)
    elif args.family == "sbm":
        g = gen_sbm(_ints(args.sizes), args.p, args.q, args.seed, force_bridge=args.force_bridge)
    else:
        if not args.name:
            raise UsageError("gen named needs a graph name")
        g = gen_named(args.name)
    _emit(format_edge_list(g), args.out)


def cmd_embed(args):
    g = _graph(args.graph)
    if args.learned:
        layer = _load_layer(args.learned, "ct", {"squared": args.squared})
        out = layer.forward(g, seed=args.seed, with_loss=False)
        results = {"method": "learned", "Z": out.Z.value, "R": out.R.value, "squared": args.squared}
    else:
        emb = spectral_cte(g)
        res = resistance_matrix(g)
        results = {"method": "spectral", "Z": emb.Z, "R": res.R, "CT": res.commute_times,
                   "volume": res.volume}
    _report(args, {"graph": args.graph, "learned": args.learned, "squared": args.squared}, results)


def cmd_bounds(args):
    g = _graph(args.graph)
    rep = bounds_report(g)
    h, method = cheeger(g)
    rb = resistance_bound_check(g, args.eps)
    iu = np.triu_indices(g.n, 1)
    results = {
        "pairs": [dataclasses.asdict(p) for p in rep.pairs],
        "spectral_gap": rep.spectral_gap,
        "laplacian_gap": rep.laplacian_gap,
        "gap_used": rep.gap_used,
        "d_min": rep.d_min,
        "all_lovasz": rep.all_lovasz,
        "max_ratio": rep.max_ratio(),
        "cheeger": {"h": h, "method": method},
        "resistance_bound": {
            "eps": rb.eps, "c_cheeger": rb.c_cheeger, "c_diameter": rb.c_diameter,
            "resistance_diameter": rb.resistance_diameter, "diameter_pair": list(rb.diameter_pair),
            "diameter_within_inverse_h_squared": rb.diameter_holds,
            "fraction_cheeger": rb.fraction_cheeger, "fraction_diameter": rb.fraction_diameter,
            "pairs_failing_cheeger": [[int(u), int(v)] for u, v in zip(*iu) if not rb.holds_cheeger[u, v]],
        },
    }
    _report(args, {"graph": args.graph, "eps": args.eps}, results)


def _overrides(args) -> dict:
    out = {}
    if args.layer == "gap":
        for key in ("mode", "mu", "alpha"):
            if getattr(args, key) is not None:
                out[key] = getattr(args, key)
    elif any(getattr(args, k) is not None for k in ("mode", "mu", "alpha")):
        raise UsageError("--mode, --mu and --alpha apply to the gap layer only")
    return out


def cmd_rewire(args):
    g = _graph(args.graph)
    ov = _overrides(args)
    layer = _load_layer(args.ckpt, args.layer, ov) if args.ckpt else _fresh_layer(args.layer, g, args.seed, ov)
    out = layer.forward(g, seed=args.seed)
    if args.layer == "ct":
        losses = {"ct": out.loss.item(), "quotient": out.quotient.item(), "orthogonality": out.ortho.item()}
        extra = {"Z": out.Z.value}
    else:
        losses = {"gap": out.loss.item(), "cut": out.loss_cut.item(), "fiedler": out.loss_fiedler.item(),
                  "lambda_star": out.lambda_star.item()}
        extra = {"S": out.S.value, "f2_approx": out.f.value[:, 0], "A_tilde": out.A_tilde.value,
                 "mu": out.mu.item()}
    config = {"graph": args.graph, "layer": args.layer, "ckpt": args.ckpt,
              "layer_config": dataclasses.asdict(layer.config)}
    _report(args, config, {"T": out.T.value, "losses": losses, **extra})


def cmd_sparsify(args):
    g = _graph(args.graph)
    if args.method == "greedy":
        res = greedy_sparsify(g, args.eps)
    else:
        res = sample_sparsify(g, args.eps, args.seed)
    sim = spectral_similarity_report(g, res.subgraph, args.eps, probes=args.probes, seed=args.seed)
    results = {
        "method": res.method, "gamma": res.gamma, "accumulator_ok": res.accumulator_ok, "draws": res.draws,
        "kept_edges": [dataclasses.asdict(e) for e in res.kept_edges],
        "adjacency": res.subgraph.adjacency,
        "similarity": {"min_ratio": sim.min_ratio, "max_ratio": sim.max_ratio,
                       "fraction_in_range": sim.fraction_in_range, "ratios": sim.ratios},
    }
    _report(args, {"graph": args.graph, "eps": args.eps, "method": args.method, "probes": args.probes}, results)


def _load_diffusion(path: str, n: int) -> np.ndarray:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise GraphError(f"cannot read diffusion matrix {path}: {e}") from None
    if "results" in doc:
        doc = doc["results"]["T"]
    try:
        T = np.array([np.nan if x is None else x for x in doc["data"]], dtype=float).reshape(doc["shape"])
    except (KeyError, TypeError, ValueError):
        raise GraphError(f"{path} holds no {n}x{n} matrix") from None
    return T


def cmd_curvature(args):
    g = _graph(args.graph)
    if args.diffusion:
        rep = curvature_on_diffusion(g, _load_diffusion(args.diffusion, g.n))
        bounds = {}
    else:
        rep = curvature_report(g)
        bounds = rep.bounds
    edges = []
    for (u, v), k in rep.edge.items():
        rec = {"u": u, "v": v, "kappa": k, "resistance": rep.resistance[(u, v)], "unbounded": k is None}
        if (u, v) in bounds:
            rec.update(dataclasses.asdict(bounds[(u, v)]))
        edges.append(rec)
    _report(args, {"graph": args.graph, "diffusion": args.diffusion}, {"node": rep.node.tolist(), "edges": edges})


def _dataset(spec: str, seed: int) -> list[Graph]:
    if Path(spec).is_dir():
        return load_tu_dataset(spec).graphs
    kind, _, count = spec.partition(":")
    try:
        n = int(count)
    except ValueError:
        raise UsageError(f"data spec must be a directory or <family>:<count>, got {spec!r}") from None
    rng = np.random.default_rng(seed)
    if kind == "er":
        return [gen_er(int(rng.integers(20, 41)), float(rng.uniform(0.3, 0.5)), int(rng.integers(2 ** 31)))
                for _ in range(n)]
    if kind == "sbm":
        return [gen_sbm((15, 15), 0.8, 0.05, int(rng.integers(2 ** 31))) for _ in range(n)]
    if kind == "task-sbm":
        return sbm_dataset(n, 20, 40, seed)
    if kind == "task-er":
        return er_dataset(n, 20, 40, seed)
    raise UsageError(f"unknown data family {kind!r}; expected er, sbm, task-sbm or task-er")


def _split_config(cfg: dict, *classes) -> list[dict]:
    parts, used = [], set()
    for cls in classes:
        names = {f.name for f in dataclasses.fields(cls)}
        parts.append({k: v for k, v in cfg.items() if k in names})
        used |= names
    unknown = sorted(set(cfg) - used)
    if unknown:
        raise GraphError(f"unknown config key {unknown[0]!r}")
    return parts


def _read_config(text: str | None) -> dict:
    if not text:
        return {}
    raw = Path(text).read_text() if Path(text).is_file() else text
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as e:
        raise UsageError(f"--config is neither a JSON file nor JSON text: {e.msg}") from None
    if not isinstance(cfg, dict):
        raise UsageError("--config must be a JSON object")
    return cfg


def cmd_train(args):
    cfg = _read_config(args.config)
    graphs = _dataset(args.data, args.seed)
    if args.target in ("ct", "gap"):
        layer_cls = CTConfig if args.target == "ct" else GapConfig
        layer_cfg, fit_cfg = _split_config(cfg, layer_cls, FitConfig)
        fit = FitConfig(**{**fit_cfg, "seed": args.seed})
        lc = layer_cls(**layer_cfg)
        trainer = train_ct_embedder if args.target == "ct" else train_gap_layer
        layer = trainer(graphs, lc, fit)
        save_checkpoint(args.ckpt, args.target, dataclasses.asdict(lc), layer.params, {"in_dim": layer.in_dim})
        results = {"history": layer.history, "checkpoint": args.ckpt, "graphs": len(graphs)}
        config = {"data": args.data, "layer": dataclasses.asdict(lc), "fit": dataclasses.asdict(fit)}
    else:
        spec_cfg, train_cfg = _split_config(cfg, ModelSpec, TrainConfig)
        if any(g.label is None for g in graphs):
            raise GraphError("gnn training needs labelled graphs (use a TU directory or task-sbm/task-er)")
        in_dim = node_features(graphs[0], spec_cfg.get("n_probes", 8)).shape[1]
        spec = ModelSpec(**{"in_dim": in_dim, **spec_cfg})
        tc = TrainConfig(**{**train_cfg, "seed": args.seed})
        model = build_model(spec, args.seed)
        metrics = train(model, graphs, tc)
        save_checkpoint(args.ckpt, "gnn", dataclasses.asdict(spec), model.params)
        results = {"history": metrics.train_loss, "checkpoint": args.ckpt, "metrics": metrics.to_dict()}
        config = {"data": args.data, "model": dataclasses.asdict(spec), "train": dataclasses.asdict(tc)}
    _report(args, config, results)


def cmd_experiment(args):
    seeds = _ints(args.seeds)
    if not seeds:
        raise UsageError("--seeds needs at least one seed")
    kinds = tuple(args.kinds.split(",")) if args.kinds else KINDS
    bad = [k for k in kinds if k not in KINDS]
    if bad:
        raise UsageError(f"unknown model kind {bad[0]!r}")
    cfg = SyntheticConfig(n_graphs=args.graphs, epochs=args.epochs, kinds=kinds)
    res = experiment_synthetic(seeds, cfg)
    args.seed = seeds[0]
    _report(args, {"suite": args.suite, **res["config"], "seeds": seeds}, {"table": res["table"]})


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graphrewire", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--out", help="write output here instead of stdout")
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("gen", help="generate a graph as an edge list")
    sp.add_argument("family", choices=["er", "sbm", "named"])
    sp.add_argument("name", nargs="?", help="graph name for 'named' (K3, P2, P3, C4, barbell6)")
    sp.add_argument("--n", type=int, default=20)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--q", type=float, default=0.05)
    sp.add_argument("--sizes", default="15,15")
    sp.add_argument("--force-bridge", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("embed", help="commute-time embedding and resistances")
    sp.add_argument("graph", help="edge-list file or - for stdin")
    sp.add_argument("--learned", help="CT-layer checkpoint; spectral embedding when absent")
    sp.add_argument("--squared", action="store_true", help="squared distances for learned R(Z)")
    common(sp)
    sp.set_defaults(func=cmd_embed)

    sp = sub.add_parser("bounds", help="Lovasz / von Luxburg bounds and Cheeger diagnostics")
    sp.add_argument("graph")
    sp.add_argument("--eps", type=float, default=0.25)
    common(sp)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("rewire", help="diffusion matrix from a CT or GAP layer")
    sp.add_argument("layer", choices=["ct", "gap"])
    sp.add_argument("graph")
    sp.add_argument("--ckpt", help="layer checkpoint; freshly initialised from --seed when absent")
    sp.add_argument("--mode", choices=["rcut", "ncut"])
    sp.add_argument("--mu", type=float)
    sp.add_argument("--alpha", type=float)
    common(sp)
    sp.set_defaults(func=cmd_rewire)

    sp = sub.add_parser("sparsify", help="resistance-based sparsification")
    sp.add_argument("graph")
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--method", choices=["greedy", "sample"], default="greedy")
    sp.add_argument("--probes", type=int, default=20)
    common(sp)
    sp.set_defaults(func=cmd_sparsify)

    sp = sub.add_parser("curvature", help="resistance curvature and its bounds")
    sp.add_argument("graph")
    sp.add_argument("--diffusion", help="JSON matrix or rewire report whose T replaces resistances")
    common(sp)
    sp.set_defaults(func=cmd_curvature)

    sp = sub.add_parser("train", help="train a CT layer, a GAP layer or a GNN")
    sp.add_argument("target", choices=["ct", "gap", "gnn"])
    sp.add_argument("--data", required=True, help="TU directory or er:N, sbm:N, task-sbm:N, task-er:N")
    sp.add_argument("--config", help="JSON file or inline JSON object")
    sp.add_argument("--ckpt", required=True, help="checkpoint output path")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("experiment", help="synthetic SBM / ER classification comparison")
    sp.add_argument("suite", choices=["synthetic"])
    sp.add_argument("--seeds", required=True, help="comma-separated seeds")
    sp.add_argument("--graphs", type=int, default=200)
    sp.add_argument("--epochs", type=int, default=60)
    sp.add_argument("--kinds", help="comma-separated subset of " + ",".join(KINDS))
    common(sp, seed=False)
    sp.set_defaults(func=cmd_experiment)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        args.func(args)
    except UsageError as e:
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return 2
    except (RewireError, TypeError) as e:
        print(str(e), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
