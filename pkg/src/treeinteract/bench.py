"""Benchmark harness: synthetic model generator, timing sweeps, slope fits.

The generator grows random binary trees to a target leaf count: split
features uniform over the feature range, thresholds uniform in [0, 1], the
sample mass of each split divided by a symmetric Beta(2, 2) draw, leaf values
standard normal.  Instances are sampled uniformly from [0, 1]^n so split
satisfaction is balanced.  Everything is driven by a seeded generator, so a
given configuration always produces the same model and instances.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import engine, oracle
from .errors import ConfigError
from .treemodel import Ensemble, load_ensemble, precompute_edge_tables


def generate_tree_doc(rng: np.random.Generator, n_features: int, depth: int, leaves: int) -> dict:
    """Grow one random tree document with at most ``leaves`` leaves."""
    if leaves < 1 or depth < 0 or n_features < 1:
        raise ConfigError("generator needs leaves >= 1, depth >= 0, n_features >= 1")
    left = [-1]
    right = [-1]
    feature = [-1]
    threshold = [0.0]
    count = [float(2 ** max(depth, 1) * 1000)]
    node_depth = [0]
    growable = [0] if depth > 0 else []
    n_leaves = 1
    while n_leaves < leaves and growable:
        pick = int(rng.integers(len(growable)))
        node = growable.pop(pick)
        share = float(rng.beta(2.0, 2.0))
        share = min(max(share, 0.05), 0.95)
        feature[node] = int(rng.integers(n_features))
        threshold[node] = float(rng.uniform(0.0, 1.0))
        for child_share in (share, 1.0 - share):
            left_id = len(left)
            left.append(-1)
            right.append(-1)
            feature.append(-1)
            threshold.append(0.0)
            count.append(count[node] * child_share)
            node_depth.append(node_depth[node] + 1)
            if node_depth[left_id] < depth:
                growable.append(left_id)
        right_id = len(left) - 1
        left[node] = right_id - 1
        right[node] = right_id
        n_leaves += 1
    value = [
        float(rng.standard_normal()) if left[i] < 0 else 0.0 for i in range(len(left))
    ]
    return {
        "left": left,
        "right": right,
        "feature": feature,
        "threshold": threshold,
        "count": count,
        "value": value,
    }


def generate_ensemble(
    seed: int, n_features: int, depth: int, leaves: int, n_trees: int = 1
) -> Ensemble:
    rng = np.random.default_rng(seed)
    doc = {
        "format_version": 1,
        "routing": "le-left",
        "n_features": n_features,
        "baseline_offset": 0.0,
        "output_kind": "regression-value",
        "trees": [generate_tree_doc(rng, n_features, depth, leaves) for _ in range(n_trees)],
    }
    return load_ensemble(doc)


def generate_instances(seed: int, n_features: int, count: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, size=(count, n_features))


@dataclass
class BenchRow:
    n_features: int
    depth: int
    leaves: int
    order: int
    repetitions: int
    mean_s: float
    std_s: float
    times_s: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "depth": self.depth,
            "leaves": self.leaves,
            "order": self.order,
            "repetitions": self.repetitions,
            "mean_s": self.mean_s,
            "std_s": self.std_s,
            "times_s": self.times_s,
        }


def time_call(fn, repetitions: int) -> tuple[float, float, list[float]]:
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    arr = np.array(times)
    return float(arr.mean()), float(arr.std()), times


def run_bench(
    n_features: int,
    depth: int,
    leaves_sweep: list[int],
    orders: list[int],
    repetitions: int = 10,
    seed: int = 0,
) -> list[BenchRow]:
    """Mean/std wall time of one explanation per (leaves, order) configuration."""
    rows = []
    for leaves in leaves_sweep:
        ensemble = generate_ensemble(seed, n_features, depth, leaves)
        x = generate_instances(seed + 1, n_features, 1)[0]
        tables = [precompute_edge_tables(t) for t in ensemble.trees]
        for order in orders:
            plan = engine.make_plan(ensemble, order, edge_tables=tables)
            engine.explain_interactions(ensemble, x, order, plan=plan)  # warm-up
            mean, std, times = time_call(
                lambda: engine.explain_interactions(ensemble, x, order, plan=plan),
                repetitions,
            )
            rows.append(BenchRow(n_features, depth, leaves, order, repetitions, mean, std, times))
    return rows


def fit_loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    xs = np.log(np.asarray(xs, dtype=float))
    ys = np.log(np.asarray(ys, dtype=float))
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)


def _oracle_all_orders(ensemble: Ensemble, x, max_order: int) -> dict:
    """Brute-force every subset of orders 1..max_order with a shared evaluator."""
    ev = oracle.LeafEvaluator(ensemble, x)
    out = {}
    n = ensemble.n_features
    for s in range(1, max_order + 1):
        wfn = oracle.sii_weight_fn(n, s)
        for sub in itertools.combinations(range(n), s):
            out[sub] = oracle.brute_interaction(ensemble, x, sub, wfn, evaluator=ev)
    return out


def oracle_scaling_curve(
    n_values: list[int],
    depth: int,
    max_order: int,
    leaves: int | None = None,
    seed: int = 0,
    repetitions: int = 3,
) -> dict:
    """Brute-force wall time as the enumerated feature count grows.

    The tree and instance are generated once for the smallest ``n`` and held
    fixed; only the coalition enumeration widens.  That isolates the
    exponential enumeration cost from structural noise (per-``n`` random trees
    would vary the per-prediction cost through their early-exit paths).
    """
    base_n = min(n_values)
    leaves = leaves if leaves is not None else 2**depth
    rng = np.random.default_rng(seed)
    tree = generate_tree_doc(rng, base_n, depth, leaves)
    x_base = generate_instances(seed + 1, base_n, 1)[0]
    cases = {}
    for n in sorted(n_values):
        doc = {
            "format_version": 1,
            "routing": "le-left",
            "n_features": n,
            "baseline_offset": 0.0,
            "output_kind": "regression-value",
            "trees": [tree],
        }
        ensemble = load_ensemble(doc)
        x = np.concatenate([x_base, np.full(n - base_n, 0.5)])
        cases[n] = (ensemble, x)
        _oracle_all_orders(ensemble, x, max_order)  # warm-up, not timed
    # Interleaved rounds so slow machine-state drift cannot masquerade as a
    # trend across n; the minimum over rounds strips additive noise.
    times = {n: math.inf for n in cases}
    for _ in range(repetitions):
        for n, (ensemble, x) in cases.items():
            t0 = time.perf_counter()
            _oracle_all_orders(ensemble, x, max_order)
            times[n] = min(times[n], time.perf_counter() - t0)
    ns = sorted(times)
    ratios = [times[ns[i + 1]] / times[ns[i]] for i in range(len(ns) - 1)]
    return {"times_s": times, "ratios": ratios}


def naive_comparison(
    n_features: int,
    depth: int,
    max_order: int,
    leaves: int | None = None,
    seed: int = 0,
    repetitions: int = 1,
) -> dict:
    """Wall time of the traversal engine vs. the memoized brute-force oracle.

    Both sides solve the same task: every interaction subset of orders
    1..max_order for one instance.  Reported times are medians over
    ``repetitions`` runs.
    """
    leaves = leaves if leaves is not None else 2**depth
    ensemble = generate_ensemble(seed, n_features, depth, leaves)
    x = generate_instances(seed + 1, n_features, 1)[0]
    tables = [precompute_edge_tables(t) for t in ensemble.trees]
    plans = [
        engine.make_plan(ensemble, s, edge_tables=tables)
        for s in range(1, max_order + 1)
    ]

    def run_engine():
        for s, plan in zip(range(1, max_order + 1), plans):
            engine.explain_interactions(ensemble, x, s, plan=plan)

    run_engine()  # warm-up
    engine_times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        run_engine()
        engine_times.append(time.perf_counter() - t0)
    oracle_times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        _oracle_all_orders(ensemble, x, max_order)
        oracle_times.append(time.perf_counter() - t0)
    engine_t = float(np.median(engine_times))
    oracle_t = float(np.median(oracle_times))
    return {
        "n_features": n_features,
        "depth": depth,
        "max_order": max_order,
        "leaves": leaves,
        "engine_s": engine_t,
        "oracle_s": oracle_t,
        "speedup": oracle_t / engine_t if engine_t > 0 else math.inf,
    }
