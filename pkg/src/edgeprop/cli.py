"""Command-line interface: ingest, embed, train, eval, diagnose, sweep.

Exit codes: 0 on success, 2 for input or validation problems, 3 for
numerical failures (non-convergence).  Every JSON document carries a
``schema_version`` field and every command is deterministic for a fixed
``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from . import io as eio
from .errors import NumericalError, ValidationError
from .metrics import evaluate_scores, make_split
from .propagation import combine_streams
from .spectral import spectral_report
from .training import (
    SvdCache,
    TrainConfig,
    build_propagators,
    predict_graph,
    train,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

_CONFIG_FLAGS = (
    ("alpha", float),
    ("beta", float),
    ("gamma", float),
    ("k", str),  # integer or "inf"
    ("hidden-dim", int),
    ("dropout", float),
    ("learning-rate", float),
    ("max-epochs", int),
    ("seed", int),
    ("mode", str),
    ("combinator", str),
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file")
    for name, typ in _CONFIG_FLAGS:
        parser.add_argument(f"--{name}", type=typ, default=None)


def _parse_k(raw) -> int | None:
    if raw is None or raw == "inf":
        return None
    return int(raw)


def _resolve_config(args: argparse.Namespace) -> TrainConfig:
    """Defaults, overridden by the config file, overridden by CLI flags."""
    data: dict = {}
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            data.update(json.load(fh))
    for name, _ in _CONFIG_FLAGS:
        attr = name.replace("-", "_")
        value = getattr(args, attr, None)
        if value is not None:
            data[attr] = value
    if "k" in data:
        data["k"] = _parse_k(data["k"])
    return eio.config_from_dict(data)


def _emit_json(payload: dict, out: Path | None) -> None:
    text = json.dumps(payload, indent=2)
    if out is None:
        print(text)
    else:
        Path(out).write_text(text + "\n", encoding="utf-8")


def cmd_ingest(args: argparse.Namespace) -> int:
    graph = eio.ingest(args.edges, args.attrs, args.labels, args.out)
    summary = {
        "schema_version": 1,
        "num_edges": graph.num_edges,
        "num_u": graph.num_u,
        "num_v": graph.num_v,
        "num_attrs": graph.num_attrs,
        "num_classes": graph.num_classes,
        "duplicate_edge_pairs": graph.duplicate_edge_count(),
        "bundle": str(args.out),
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_embed(args: argparse.Namespace) -> int:
    graph, _ = eio.load_bundle(args.bundle)
    config = _resolve_config(args)
    if config.k is not None and config.k > graph.num_edges:
        config = dataclasses.replace(config, k=graph.num_edges)
    propagators = build_propagators(graph, config)
    feats = graph.attrs
    if config.mode == "dual":
        matrix = combine_streams(
            propagators["u"].apply(feats), propagators["v"].apply(feats),
            config.gamma, config.combinator,
        )
    else:
        matrix = propagators["main"].apply(feats)
    eio.write_matrix(args.out, matrix)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    graph, _ = eio.load_bundle(args.bundle)
    config = _resolve_config(args)
    if config.k is not None and config.k > graph.num_edges:
        config = dataclasses.replace(config, k=graph.num_edges)
    split = make_split(graph, seed=config.seed)
    cache = SvdCache()
    result = train(graph, split, config, cache=cache)
    eio.save_checkpoint(args.out_dir, result.params, config, result.history)
    probs = predict_graph(
        graph, result.params, config,
        propagators=build_propagators(graph, config, cache=cache),
    )
    report = evaluate_scores(probs[split.test_idx], graph.labels[split.test_idx])
    payload = report.to_json_dict()
    payload["best_epoch"] = result.history["best_epoch"]
    payload["best_val_auc"] = result.history["best_val_auc"]
    payload["checkpoint"] = str(args.out_dir)
    _emit_json(payload, args.metrics_out)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    graph, _ = eio.load_bundle(args.bundle)
    params, config, _manifest = eio.load_checkpoint(args.checkpoint)
    if graph.labels is None:
        raise ValidationError("eval needs a labeled bundle")
    split = make_split(graph, seed=config.seed)
    probs = predict_graph(graph, params, config)
    report = evaluate_scores(probs[split.test_idx], graph.labels[split.test_idx])
    _emit_json(report.to_json_dict(), args.out)
    return EXIT_OK


def cmd_diagnose(args: argparse.Namespace) -> int:
    graph, _ = eio.load_bundle(args.bundle)
    config = _resolve_config(args)
    k = config.k if config.k is not None else graph.num_edges
    k = min(k, graph.num_edges)
    report = spectral_report(
        graph, alpha=config.alpha, beta=config.beta, k=k, seed=config.seed,
        oversample=config.svd_oversample, power_iters=config.svd_power_iters,
    )
    _emit_json(report.to_json_dict(), args.out)
    return EXIT_OK


_SWEEP_METHODS = {
    "single": ("single", "sum"),
    "none": ("none", "sum"),
    "dual-sum": ("dual", "sum"),
    "dual-max": ("dual", "max"),
    "dual-concat": ("dual", "concat"),
}


def cmd_sweep(args: argparse.Namespace) -> int:
    graph, _ = eio.load_bundle(args.bundle)
    base = _resolve_config(args)
    with open(args.sweep, "r", encoding="utf-8") as fh:
        sweep = json.load(fh)
    param = sweep.get("param")
    values = sweep.get("values", [])
    methods = sweep.get("methods", ["single"])
    if param not in ("alpha", "beta", "gamma", "k"):
        raise ValidationError(f"sweep param must be alpha/beta/gamma/k, got {param!r}")
    for method in methods:
        if method not in _SWEEP_METHODS:
            raise ValidationError(f"unknown sweep method {method!r}")
    split = make_split(graph, seed=base.seed)
    cache = SvdCache()
    rows = []
    for method in methods:
        mode, combinator = _SWEEP_METHODS[method]
        for value in values:
            patch: dict = {"mode": mode, "combinator": combinator}
            patch[param] = _parse_k(value) if param == "k" else float(value)
            config = dataclasses.replace(base, **patch)
            if config.k is not None and config.k > graph.num_edges:
                config = dataclasses.replace(config, k=graph.num_edges)
            result = train(graph, split, config, cache=cache)
            probs = predict_graph(
                graph, result.params, config,
                propagators=build_propagators(graph, config, cache=cache),
            )
            report = evaluate_scores(
                probs[split.test_idx], graph.labels[split.test_idx]
            )
            rows.append((method, param, value, report.ap, report.auc))

    def write_rows(fh) -> None:
        writer = csv.writer(fh)
        writer.writerow(["method", "param", "value", "ap", "auc"])
        writer.writerows(rows)

    if args.out is None:
        write_rows(sys.stdout)
    else:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            write_rows(fh)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgeprop",
        description="Edge representation learning on edge-attributed bipartite graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse raw files into a dataset bundle")
    p.add_argument("--edges", type=Path, required=True, help="TSV of u<TAB>v ids")
    p.add_argument("--attrs", type=Path, required=True, help="CSV or binary matrix")
    p.add_argument("--labels", type=Path, default=None,
                   help="per-edge class names, ';'-separated, blank = unlabeled")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("embed", help="write propagated edge features (no training)")
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("train", help="train and checkpoint a classifier")
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--metrics-out", type=Path, default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diagnose", help="spectral diagnostics of the edge walk")
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("sweep", help="train across a parameter grid, emit CSV")
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--sweep", type=Path, required=True,
                   help='JSON: {"param": "alpha", "values": [...], "methods": [...]}')
    p.add_argument("--out", type=Path, default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
