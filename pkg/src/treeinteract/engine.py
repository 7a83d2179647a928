"""Single-pass tree traversal computing interaction scores of any order.

For one explanation point the engine walks each tree once, maintaining in
multipoint-interpolation form:

* ``C`` — the running path polynomial: one factor ``(p_i + y)`` per distinct
  feature seen on the current path, where ``p_i`` is the product of inverse
  edge weights over that feature's splits so far, gated to zero once the
  instance fails one of them.  Re-encountering a feature replaces its factor
  (multiply by the new one, divide by the previous one).
* ``QP[S]`` — for every tracked subset ``S``, the product of the factors of
  the members of ``S`` seen so far (the divisor that removes them from the
  path polynomial).
* a scalar per (feature) ``p_i - 1`` from which the alternating coefficient
  sum of the subset's difference polynomial is formed as the running product
  ``prod_{j in S} (p_j - 1)``; it is exactly zero while any member is unseen,
  which is what lets updates be restricted to fully-observed subsets without
  changing any score.

Every value vector lives on one fixed grid of odd degree ``g`` (the subtree
polynomials are kept scaled to true degree ``g`` with ``(1+y)`` padding at the
leaves).  Scale invariance of the Shapley weighting makes the padding exact,
and an odd-degree Chebyshev grid contains neither ``-1`` nor ``0``, so every
divisor ``(p + y)`` with ``p = 0`` or ``p > 1`` is bounded away from zero and
the traversal cannot hit a singular base point.

Scores are accumulated per edge on the way back up: with ``G`` the combined
subtree polynomial of the edge's head,

    I[S] += prod(p_j - 1) * psi(G / QP[S])  -  (same at the state of the
            closest shallower edge splitting on a member of S)

summed over trees.  The correction factor is exactly zero when no such
shallower edge exists, so it can be applied unconditionally.
"""

from __future__ import annotations

import itertools
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ConfigError
from .poly import SII, CIIKind, shared_grid, shared_tables
from .treemodel import (
    EdgeTables,
    Ensemble,
    _check_instance,
    precompute_edge_tables,
    predict,
)

#: Scores whose magnitude falls below this are reported as exact 0.0 so the
#: dummy axiom stays bit-testable on aggregated output.
SCORE_FLOOR = 1e-13


@dataclass
class ExplainConfig:
    """What to compute: either a single interaction order or all orders up to
    ``max_order`` (aggregated), for a given index family."""

    order: int | None = None
    max_order: int | None = None
    index_kind: CIIKind = SII

    def __post_init__(self) -> None:
        if (self.order is None) == (self.max_order is None):
            raise ConfigError("specify exactly one of order / max_order")


@dataclass
class InteractionResult:
    """Scores of one interaction order for one instance."""

    order: int
    index_kind: str
    scores: dict[tuple[int, ...], float]
    baseline: float
    prediction: float

    def score_sum(self) -> float:
        return float(sum(self.scores.values()))


def subset_rank_colex(subset) -> int:
    """Colexicographic rank of a sorted index tuple; O(|subset|)."""
    return sum(math.comb(a, i + 1) for i, a in enumerate(subset))


def _odd(d: int) -> int:
    return d if d % 2 == 1 else d + 1


@dataclass
class _TreePlan:
    tree_index: int
    et: EdgeTables
    subsets: np.ndarray  # (m, s) member features per tracked subset
    granks: np.ndarray  # (m,) rank of each tracked subset in the global order
    rows_by_feature: dict[int, np.ndarray]


@dataclass
class _Plan:
    """Everything reusable across instances for one (ensemble, order, kind)."""

    n: int
    order: int
    grid_degree: int
    points: np.ndarray
    pow_rows: np.ndarray  # pow_rows[k] = (1 + y)^k on the grid
    wpsi: np.ndarray | None  # None when no path can realize the order
    trees: list[_TreePlan]
    baseline: float
    kind_label: str
    dense: bool
    n_subsets: int
    restrict_updates: bool = True


_PLAN_DENSE_LIMIT = 20


def _edge_tables(ensemble: Ensemble, cache: list[EdgeTables] | None) -> list[EdgeTables]:
    if cache is not None:
        return cache
    return [precompute_edge_tables(t) for t in ensemble.trees]


def _kind_label(kind: CIIKind) -> str:
    if isinstance(kind, str):
        return kind
    return "custom-cii"


def _build_plan(
    ensemble: Ensemble,
    order: int,
    kind: CIIKind,
    edge_tables: list[EdgeTables] | None = None,
    restrict_updates: bool = True,
) -> _Plan:
    n = ensemble.n_features
    if not 1 <= order <= n:
        raise ConfigError(f"interaction order {order} out of range 1..{n}")
    tables = _edge_tables(ensemble, edge_tables)
    max_path = max(et.max_path_features for et in tables)
    if kind == SII:
        # Scale invariance lets the grid hug the deepest path.
        g = _odd(max(max_path, 1))
    else:
        # General index weights are degree-bound to the feature count, so the
        # path polynomial is kept at (odd-adjusted) degree n throughout.
        g = _odd(n)
    grid = shared_grid(g)
    weights = shared_tables(g)
    if kind == SII:
        wpsi = weights.psi_padded(g, g - order) if order <= g else None
    else:
        wpsi = weights.cii_padded(kind, n, order, g)
    y = grid.points[g]
    pow_rows = grid.one_plus_matrix(g)
    tree_plans = []
    for idx, et in enumerate(tables):
        feats = sorted(et.features_used)
        if len(feats) < order:
            continue
        subsets = np.array(list(itertools.combinations(feats, order)), dtype=np.int64)
        granks = np.array([subset_rank_colex(s) for s in map(tuple, subsets)], dtype=np.int64)
        rows_by_feature = {
            f: np.nonzero((subsets == f).any(axis=1))[0] for f in feats
        }
        tree_plans.append(_TreePlan(idx, et, subsets, granks, rows_by_feature))
    baseline = ensemble.baseline_offset + sum(et.tree_baseline for et in tables)
    return _Plan(
        n=n,
        order=order,
        grid_degree=g,
        points=y,
        pow_rows=pow_rows,
        wpsi=wpsi,
        trees=tree_plans,
        baseline=baseline,
        kind_label=_kind_label(kind),
        dense=n <= _PLAN_DENSE_LIMIT,
        n_subsets=math.comb(n, order),
        restrict_updates=restrict_updates,
    )


def _traverse(tree, tplan: _TreePlan, plan: _Plan, x: np.ndarray) -> np.ndarray:
    """Run one depth-first pass; returns per-tracked-subset scores."""
    et = tplan.et
    s = plan.order
    y = plan.points
    g1 = plan.grid_degree + 1
    wpsi = plan.wpsi
    subsets = tplan.subsets
    rows_by_feature = tplan.rows_by_feature
    m = len(subsets)
    restrict = plan.restrict_updates

    scores = np.zeros(m)
    c_poly = np.ones(g1)
    qp = np.ones((m, g1))
    pm1 = np.zeros(plan.n)  # p_i - 1 for seen features, 0.0 otherwise
    seen_ct = np.zeros(m, dtype=np.int64)
    stacks: dict[int, list[float]] = {f: [] for f in rows_by_feature}
    distinct = 0

    sys.setrecursionlimit(max(sys.getrecursionlimit(), et.max_node_depth + 500))

    def visit(node: int) -> np.ndarray:
        nonlocal c_poly, distinct
        if tree.is_leaf(node):
            return c_poly * (et.leaf_r_empty[node] * plan.pow_rows[plan.grid_degree - distinct])
        feat = int(tree.feature[node])
        thr = tree.threshold[node]
        goes_left = x[feat] <= thr
        total = np.zeros(g1)
        stack = stacks[feat]
        rows = rows_by_feature[feat]
        for child, onpath in ((int(tree.left[node]), goes_left), (int(tree.right[node]), not goes_left)):
            first = not stack
            anc_p = 1.0 if first else stack[-1]
            alive = onpath and (first or anc_p > 0.0)
            p = et.p_raw[child] if alive else 0.0
            if not first and p == anc_p:
                # Instance already fell off this feature's splits higher up;
                # the edge changes nothing and contributes nothing.
                total += visit(child)
                continue
            saved_c = c_poly
            saved_qp = qp[rows]  # fancy indexing gathers a copy
            saved_pm1 = pm1[feat]
            factor = p + y
            if first:
                c_poly = c_poly * factor
                qp[rows] = saved_qp * factor
                seen_ct[rows] += 1
                distinct += 1
            else:
                ratio = factor / (anc_p + y)
                c_poly = c_poly * ratio
                qp[rows] = saved_qp * ratio
            pm1[feat] = p - 1.0
            stack.append(p)

            g_child = visit(child)
            total += g_child

            if restrict:
                mask = seen_ct[rows] == s
            else:
                mask = np.ones(len(rows), dtype=bool)
            if mask.any():
                act = rows[mask]
                members = subsets[act]
                factors = pm1[members]
                factors = np.where(members == feat, 1.0, factors)
                prod_wo = factors.prod(axis=1)
                k1 = prod_wo * (p - 1.0)
                weighted = g_child * wpsi
                # Row-wise reductions (not a matvec) so each subset's term is
                # bit-identical regardless of how many rows are active.
                scores[act] += k1 * (weighted / qp[act]).sum(axis=1)
                if not first:
                    k0 = prod_wo * (anc_p - 1.0)
                    scores[act] -= k0 * (weighted / saved_qp[mask]).sum(axis=1)

            stack.pop()
            pm1[feat] = saved_pm1
            if first:
                seen_ct[rows] -= 1
                distinct -= 1
            qp[rows] = saved_qp
            c_poly = saved_c
        return total

    visit(0)
    return scores


def _raw_interactions(
    ensemble: Ensemble,
    x: np.ndarray,
    order: int,
    kind: CIIKind,
    edge_tables: list[EdgeTables] | None = None,
    restrict_updates: bool = True,
    plan: _Plan | None = None,
):
    """Accumulated scores keyed by colex rank (dense array) or tuple (sparse)."""
    if plan is None:
        plan = _build_plan(ensemble, order, kind, edge_tables, restrict_updates)
    elif plan.order != order or plan.kind_label != _kind_label(kind):
        raise ConfigError(
            f"plan was built for order {plan.order} / {plan.kind_label}, "
            f"got order {order} / {_kind_label(kind)}"
        )
    if plan.dense:
        out = np.zeros(plan.n_subsets)
    else:
        out = {}
    if plan.wpsi is None:
        return plan, out  # order exceeds every path's feature count
    for tplan in plan.trees:
        local = _traverse(ensemble.trees[tplan.tree_index], tplan, plan, x)
        if plan.dense:
            np.add.at(out, tplan.granks, local)
        else:
            for sub, val in zip(map(tuple, tplan.subsets), local):
                out[sub] = out.get(sub, 0.0) + val
    return plan, out


def _floor(v: float) -> float:
    return 0.0 if abs(v) < SCORE_FLOOR else float(v)


def _package(
    plan: _Plan,
    raw,
    baseline: float,
    prediction: float,
    label: str | None = None,
    apply_floor: bool = True,
) -> InteractionResult:
    clamp = _floor if apply_floor else float
    scores: dict[tuple[int, ...], float] = {}
    if plan.dense:
        for sub in itertools.combinations(range(plan.n), plan.order):
            scores[sub] = clamp(raw[subset_rank_colex(sub)])
    else:
        for sub in sorted(raw):
            scores[sub] = clamp(raw[sub])
    return InteractionResult(
        order=plan.order,
        index_kind=label if label is not None else plan.kind_label,
        scores=scores,
        baseline=baseline,
        prediction=prediction,
    )


def make_plan(
    ensemble: Ensemble,
    order: int,
    index_kind: CIIKind = SII,
    edge_tables: list[EdgeTables] | None = None,
    restrict_updates: bool = True,
) -> _Plan:
    """Precompute the reusable traversal state for one (order, index) pair.

    Passing the plan back into :func:`explain_interactions` amortizes the
    initialization across many explanation points of the same model.
    """
    return _build_plan(ensemble, order, index_kind, edge_tables, restrict_updates)


def explain_interactions(
    ensemble: Ensemble,
    x,
    order: int,
    index_kind: CIIKind = SII,
    edge_tables: list[EdgeTables] | None = None,
    restrict_updates: bool = True,
    plan: _Plan | None = None,
) -> InteractionResult:
    """All interaction scores of one order for one instance."""
    x = _check_instance(x, ensemble.n_features)
    plan, raw = _raw_interactions(
        ensemble, x, order, index_kind, edge_tables, restrict_updates, plan
    )
    return _package(plan, raw, plan.baseline, predict(ensemble, x))


def explain_cii(
    ensemble: Ensemble,
    x,
    order: int,
    index_kind: CIIKind,
    edge_tables: list[EdgeTables] | None = None,
) -> InteractionResult:
    """Cardinal interaction index of one order (general weight families)."""
    return explain_interactions(ensemble, x, order, index_kind, edge_tables)


def explain_sv(ensemble: Ensemble, x, edge_tables: list[EdgeTables] | None = None) -> InteractionResult:
    """Attribution values per single feature (dedicated order-1 pass).

    Shares the path-polynomial maintenance of the general traversal but needs
    no per-subset state: the divisor for feature ``i`` is its own factor.
    """
    x = _check_instance(x, ensemble.n_features)
    n = ensemble.n_features
    tables = _edge_tables(ensemble, edge_tables)
    g = _odd(max(max(et.max_path_features for et in tables), 1))
    grid = shared_grid(g)
    weights = shared_tables(g)
    y = grid.points[g]
    wpsi = weights.psi_padded(g, g - 1)
    pow_rows = grid.one_plus_matrix(g)
    phi = np.zeros(n)
    for tree, et in zip(ensemble.trees, tables):
        sys.setrecursionlimit(max(sys.getrecursionlimit(), et.max_node_depth + 500))
        c_poly = np.ones(g + 1)
        stacks: dict[int, list[float]] = {f: [] for f in et.features_used}
        distinct = 0

        def visit(node: int) -> np.ndarray:
            nonlocal c_poly, distinct
            if tree.is_leaf(node):
                return c_poly * (et.leaf_r_empty[node] * pow_rows[g - distinct])
            feat = int(tree.feature[node])
            goes_left = x[feat] <= tree.threshold[node]
            total = np.zeros(g + 1)
            stack = stacks[feat]
            for child, onpath in (
                (int(tree.left[node]), goes_left),
                (int(tree.right[node]), not goes_left),
            ):
                first = not stack
                anc_p = 1.0 if first else stack[-1]
                alive = onpath and (first or anc_p > 0.0)
                p = et.p_raw[child] if alive else 0.0
                if not first and p == anc_p:
                    total += visit(child)
                    continue
                saved_c = c_poly
                if first:
                    c_poly = c_poly * (p + y)
                    distinct += 1
                else:
                    c_poly = c_poly * ((p + y) / (anc_p + y))
                stack.append(p)
                g_child = visit(child)
                total += g_child
                phi[feat] += (p - 1.0) * ((g_child / (p + y)) @ wpsi)
                if not first:
                    phi[feat] -= (anc_p - 1.0) * ((g_child / (anc_p + y)) @ wpsi)
                stack.pop()
                if first:
                    distinct -= 1
                c_poly = saved_c
            return total

        visit(0)
    baseline = ensemble.baseline_offset + sum(et.tree_baseline for et in tables)
    scores = {(i,): _floor(phi[i]) for i in range(n)}
    return InteractionResult(1, SII, scores, baseline, predict(ensemble, x))


@lru_cache(maxsize=None)
def _bernoulli(k: int) -> Fraction:
    """Bernoulli numbers, B(1) = -1/2 convention."""
    if k == 0:
        return Fraction(1)
    return Fraction(-1, k + 1) * sum(
        (math.comb(k + 1, j) * _bernoulli(j) for j in range(k)), Fraction(0)
    )


def nsii_aggregate(sii_results: list[InteractionResult]) -> list[InteractionResult]:
    """Aggregate per-order interaction scores into the unique efficient index.

    Input must be the orders 1..s0 in order.  Each score of order ``k`` pushes
    a Bernoulli-weighted share down to every contained subset, so the
    aggregate of all orders plus the baseline reproduces the prediction.
    """
    s0 = len(sii_results)
    for k, res in enumerate(sii_results, start=1):
        if res.order != k:
            raise ConfigError("aggregation expects consecutive orders 1..s0")
    out: list[dict[tuple[int, ...], float]] = [dict(r.scores) for r in sii_results]
    for k in range(2, s0 + 1):
        top = sii_results[k - 1].scores
        for sub, val in top.items():
            if val == 0.0:
                continue
            for s in range(1, k):
                bern = float(_bernoulli(k - s))
                if bern == 0.0:
                    continue
                layer = out[s - 1]
                for small in itertools.combinations(sub, s):
                    layer[small] = layer.get(small, 0.0) + bern * val
    results = []
    for k, res in enumerate(sii_results, start=1):
        scores = {sub: _floor(v) for sub, v in out[k - 1].items()}
        results.append(
            InteractionResult(k, "n-sii", scores, res.baseline, res.prediction)
        )
    return results


def explain_nsii(
    ensemble: Ensemble,
    x,
    max_order: int,
    edge_tables: list[EdgeTables] | None = None,
) -> list[InteractionResult]:
    """Interaction scores for all orders 1..max_order, aggregated efficiently."""
    x = _check_instance(x, ensemble.n_features)
    tables = _edge_tables(ensemble, edge_tables)
    prediction = predict(ensemble, x)
    per_order = []
    for order in range(1, max_order + 1):
        plan, raw = _raw_interactions(ensemble, x, order, SII, tables)
        per_order.append(
            _package(plan, raw, plan.baseline, prediction, apply_floor=False)
        )
    return nsii_aggregate(per_order)


def nsii_feature_distribution(
    results: list[InteractionResult],
) -> dict[int, list[tuple[int, float, float]]]:
    """Split every order-k score into k equal parts credited to its members.

    Returns, per feature, one (order, positive mass, negative mass) entry per
    order; summing all signed masses of a feature over a complete aggregation
    recovers its order-1 attribution.
    """
    n_features = max(
        (f for r in results for sub in r.scores for f in sub), default=-1
    ) + 1
    out = {i: [] for i in range(n_features)}
    for res in results:
        pos = np.zeros(n_features)
        neg = np.zeros(n_features)
        for sub, val in res.scores.items():
            share = val / res.order
            for f in sub:
                if share >= 0:
                    pos[f] += share
                else:
                    neg[f] += share
        for i in range(n_features):
            out[i].append((res.order, float(pos[i]), float(neg[i])))
    return out


def explain(ensemble: Ensemble, x, config: ExplainConfig):
    """Config-driven entry point: one result, or a list when aggregating."""
    if config.max_order is not None:
        if config.index_kind != SII:
            raise ConfigError("order aggregation is defined for the Shapley family only")
        return explain_nsii(ensemble, x, config.max_order)
    return explain_interactions(ensemble, x, config.order, config.index_kind)
