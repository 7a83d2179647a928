"""Command-line surface: explain, verify, bench, plot-data.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 numerical
failure (singular base point), 4 brute-force size guard.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bench as bench_mod
from . import engine, oracle, plotdata
from .errors import (
    ConfigError,
    InstanceError,
    ModelFormatError,
    OracleSizeError,
    SingularPointError,
    TreeInteractError,
)
from .poly import BANZHAF, SII
from .treemodel import load_ensemble_file, model_digest, precompute_edge_tables, predict

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_ORACLE_GUARD = 4


# -- input parsing -----------------------------------------------------------


def _parse_instance_line(line: str) -> list[float]:
    try:
        return [float(tok) for tok in line.split(",")]
    except ValueError as exc:
        raise InstanceError(f"cannot parse instance line {line!r}") from exc


def read_instances(path: str, model_names: list[str] | None):
    """Instances from a file: one per line, comma separated, optional header.

    A header (any non-numeric first line) names the columns; when the model
    also carries feature names the columns are reordered to the model's order.
    Returns (array, names).
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise InstanceError(f"no instances in {path}")
    header: list[str] | None = None
    try:
        _parse_instance_line(lines[0])
    except InstanceError:
        header = [tok.strip() for tok in lines[0].split(",")]
        lines = lines[1:]
        if not lines:
            raise InstanceError(f"no instances after header in {path}")
    rows = [_parse_instance_line(ln) for ln in lines]
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise InstanceError("instances differ in length")
    data = np.array(rows, dtype=float)
    names = header
    if header is not None and model_names is not None:
        if sorted(header) != sorted(model_names):
            raise InstanceError("instance header does not match the model's feature names")
        order = [header.index(name) for name in model_names]
        data = data[:, order]
        names = list(model_names)
    return data, names


def _load_model(path: str):
    try:
        return load_ensemble_file(path)
    except FileNotFoundError as exc:
        raise ModelFormatError(f"model file not found: {path}") from exc


def _collect_instances(args, ensemble):
    if getattr(args, "instance", None):
        values = _parse_instance_line(args.instance)
        data = np.array([values], dtype=float)
        names = ensemble.feature_names
    elif getattr(args, "instances", None):
        data, names = read_instances(args.instances, ensemble.feature_names)
        if names is None:
            names = ensemble.feature_names
    else:
        raise InstanceError("provide --instance or --instances")
    if data.shape[1] != ensemble.n_features:
        raise InstanceError(
            f"instances have {data.shape[1]} features, model expects {ensemble.n_features}"
        )
    return data, names


def _resolve_index(name: str):
    if name == SII:
        return SII
    if name == BANZHAF:
        return BANZHAF
    raise ConfigError(f"unknown index {name!r} (expected sii or banzhaf)")


# -- documents ---------------------------------------------------------------


def _score_entries(result) -> list[dict]:
    return [
        {"subset": list(sub), "score": result.scores[sub]}
        for sub in sorted(result.scores)
    ]


def build_document(
    ensemble,
    digest: str,
    x: np.ndarray,
    names,
    order: int | None,
    max_order: int | None,
    index_kind,
    edge_tables,
    timings: bool,
) -> dict:
    t0 = time.perf_counter()
    if max_order is not None:
        results = engine.explain_nsii(ensemble, x, max_order, edge_tables=edge_tables)
        label = "n-sii"
    else:
        results = [
            engine.explain_interactions(ensemble, x, order, index_kind, edge_tables=edge_tables)
        ]
        label = results[0].index_kind
    explain_s = time.perf_counter() - t0
    doc = {
        "schema_version": SCHEMA_VERSION,
        "model_digest": digest,
        "instance": {"values": [float(v) for v in x]},
        "index_kind": label,
        "orders": [r.order for r in results],
        "baseline": results[0].baseline,
        "prediction": results[0].prediction,
        "scores": {str(r.order): _score_entries(r) for r in results},
    }
    if names:
        doc["instance"]["feature_names"] = list(names)
    if max_order is not None:
        total = sum(r.score_sum() for r in results)
        doc["efficiency_residual"] = doc["prediction"] - doc["baseline"] - total
    if timings:
        doc["timing"] = {"explain_s": explain_s}
    return doc


def _emit(payload, args) -> None:
    text = json.dumps(payload, separators=(",", ":"), allow_nan=False)
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.write("\n")
    if getattr(args, "stdout", False) or not getattr(args, "out", None):
        sys.stdout.write(text + "\n")


# -- commands ----------------------------------------------------------------


def cmd_explain(args) -> int:
    ensemble = _load_model(args.model)
    data, names = _collect_instances(args, ensemble)
    if args.order is not None and args.max_order is not None:
        raise ConfigError("--order and --max-order are mutually exclusive")
    order = args.order if args.order is not None or args.max_order is not None else 1
    index_kind = _resolve_index(args.index)
    if args.max_order is not None and index_kind != SII:
        raise ConfigError("--max-order aggregation is defined for --index sii")
    digest = model_digest(ensemble)
    tables = [precompute_edge_tables(t) for t in ensemble.trees]

    def one(x):
        return build_document(
            ensemble, digest, x, names, order, args.max_order, index_kind, tables, args.timings
        )

    if args.threads > 1 and len(data) > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            docs = list(pool.map(one, data))
    else:
        docs = [one(x) for x in data]
    _emit(docs[0] if len(docs) == 1 else docs, args)
    return EXIT_OK


def verify_model(
    ensemble,
    instances: np.ndarray,
    orders: list[int],
    tolerance: float,
    abs_floor: float = 1e-12,
    engine_fn=None,
) -> dict:
    """Compare engine scores against brute-force enumeration.

    ``engine_fn(ensemble, x, order)`` defaults to the traversal engine; it is
    injectable so the harness itself can be shown to catch a broken engine.
    """
    n = ensemble.n_features
    if n - max(orders) > oracle.MAX_REMAINING:
        raise OracleSizeError(
            f"n - max(order) = {n - max(orders)} exceeds the cap of {oracle.MAX_REMAINING}"
        )
    tables = [precompute_edge_tables(t) for t in ensemble.trees]
    if engine_fn is None:
        def engine_fn(ens, x, order):
            return engine.explain_interactions(ens, x, order, edge_tables=tables)

    report = {"tolerance": tolerance, "orders": orders, "instances": [], "pass": True}
    for idx, x in enumerate(instances):
        ev = oracle.LeafEvaluator(ensemble, x)
        inst_report = {"index": idx, "orders": {}}
        for order in orders:
            result = engine_fn(ensemble, x, order)
            wfn = oracle.sii_weight_fn(n, order)
            worst = {"subset": None, "abs_dev": 0.0, "rel_dev": 0.0}
            ok = True
            for sub in itertools.combinations(range(n), order):
                expected = oracle.brute_interaction(ensemble, x, sub, wfn, evaluator=ev)
                got = result.scores.get(sub, 0.0)
                abs_dev = abs(got - expected)
                rel_dev = abs_dev / max(abs(expected), abs_floor)
                if abs_dev > worst["abs_dev"]:
                    worst = {"subset": list(sub), "abs_dev": abs_dev, "rel_dev": rel_dev}
                if abs_dev > max(tolerance * abs(expected), abs_floor):
                    ok = False
            inst_report["orders"][str(order)] = {
                "max_abs_dev": worst["abs_dev"],
                "max_rel_dev": worst["rel_dev"],
                "worst_subset": worst["subset"],
                "pass": ok,
            }
            if not ok:
                report["pass"] = False
        report["instances"].append(inst_report)
    return report


def cmd_verify(args) -> int:
    ensemble = _load_model(args.model)
    if args.instances:
        data, _ = read_instances(args.instances, ensemble.feature_names)
    else:
        rng = np.random.default_rng(args.seed)
        data = rng.uniform(0.0, 1.0, size=(args.random_instances, ensemble.n_features))
    orders = [int(tok) for tok in args.orders.split(",")]
    for order in orders:
        if not 1 <= order <= ensemble.n_features:
            raise ConfigError(f"order {order} out of range for this model")
    report = verify_model(ensemble, data, orders, args.tolerance)
    _emit(report, args)
    if not report["pass"]:
        for inst in report["instances"]:
            for order, entry in inst["orders"].items():
                if not entry["pass"]:
                    print(
                        f"instance {inst['index']} order {order}: deviation "
                        f"{entry['max_abs_dev']:.3e} at subset {entry['worst_subset']}",
                        file=sys.stderr,
                    )
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def cmd_bench(args) -> int:
    leaves = [int(tok) for tok in args.leaves.split(",")]
    orders = [int(tok) for tok in args.orders.split(",")]
    rows = bench_mod.run_bench(
        args.n_features, args.depth, leaves, orders, args.repetitions, args.seed
    )
    payload = {"rows": [r.as_dict() for r in rows]}
    if len(leaves) > 1:
        slopes = {}
        for order in orders:
            sub = [r for r in rows if r.order == order]
            slopes[str(order)] = bench_mod.fit_loglog_slope(
                [r.leaves for r in sub], [r.mean_s for r in sub]
            )
        payload["loglog_slope_vs_leaves"] = slopes
    _emit(payload, args)
    return EXIT_OK


def cmd_plotdata(args) -> int:
    try:
        with open(args.explanation, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"explanation file not found: {args.explanation}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed explanation document: {exc}") from exc
    if isinstance(doc, list):
        if not 0 <= args.instance_index < len(doc):
            raise ConfigError(f"--instance-index {args.instance_index} out of range")
        doc = doc[args.instance_index]
    payload = plotdata.build_payload(doc, args.kind)
    _emit(payload, args)
    return EXIT_OK


def cmd_predict(args) -> int:
    ensemble = _load_model(args.model)
    data, _ = _collect_instances(args, ensemble)
    values = [predict(ensemble, x) for x in data]
    _emit({"predictions": values}, args)
    return EXIT_OK


# -- wiring ------------------------------------------------------------------


def _add_io_flags(p) -> None:
    p.add_argument("--out", help="write the JSON document to this path")
    p.add_argument("--stdout", action="store_true", help="also print the document to stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treeinteract",
        description="Exact any-order Shapley interaction scores for tree ensembles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explain", help="explain instances of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--instance", help='one instance as "v1,v2,..."')
    p.add_argument("--instances", help="file with one instance per line")
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--max-order", type=int, default=None, dest="max_order")
    p.add_argument("--index", default=SII, choices=[SII, BANZHAF])
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--timings", action="store_true", help="include wall-clock timings")
    _add_io_flags(p)
    p.set_defaults(fn=cmd_explain)

    p = sub.add_parser("verify", help="compare engine scores against brute force")
    p.add_argument("--model", required=True)
    p.add_argument("--instances", help="file with one instance per line")
    p.add_argument("--random-instances", type=int, default=3, dest="random_instances")
    p.add_argument("--orders", default="1,2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-8)
    _add_io_flags(p)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("bench", help="time explanations on generated models")
    p.add_argument("--n-features", type=int, default=12, dest="n_features")
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--leaves", default="64,128,256")
    p.add_argument("--orders", default="2")
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    _add_io_flags(p)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("plot-data", help="derive plot payloads from an explanation")
    p.add_argument("--explanation", required=True)
    p.add_argument("--kind", required=True, choices=list(plotdata.KINDS))
    p.add_argument("--instance-index", type=int, default=0, dest="instance_index")
    _add_io_flags(p)
    p.set_defaults(fn=cmd_plotdata)

    p = sub.add_parser("predict", help="raw model outputs for instances")
    p.add_argument("--model", required=True)
    p.add_argument("--instance")
    p.add_argument("--instances")
    _add_io_flags(p)
    p.set_defaults(fn=cmd_predict)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except OracleSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE_GUARD
    except SingularPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ModelFormatError, InstanceError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TreeInteractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
