"""Exponential-time reference implementation by direct coalition enumeration.

Everything here works from the definitions: the restricted model evaluates
each leaf rule with unknown features marginalized by the recorded sample
fractions, and interaction scores are weighted sums of alternating-sign
discrete derivatives over all context coalitions.  It is deliberately simple
and independent of the traversal engine, serving both as the correctness
oracle in tests and as the naive baseline in benchmarks.

Coalitions are bitmasks over at most ``MAX_REMAINING`` = 24 enumerated
features; beyond that the enumeration is refused outright.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, OracleSizeError
from .poly import BANZHAF, SII, CIIKind, cii_weight
from .treemodel import Ensemble, _check_instance

MAX_REMAINING = 24


@dataclass
class Coalition:
    """A sorted set of feature indices."""

    members: tuple[int, ...]

    def __post_init__(self) -> None:
        members = tuple(sorted(self.members))
        if len(set(members)) != len(members):
            raise ConfigError("coalition contains duplicate features")
        if members and members[0] < 0:
            raise ConfigError("coalition contains negative feature indices")
        self.members = members

    def mask(self) -> int:
        return mask_of(self.members)


def mask_of(features) -> int:
    m = 0
    for f in features:
        m |= 1 << int(f)
    return m


class LeafEvaluator:
    """Per-(ensemble, instance) leaf tables with memoized restricted predictions.

    For every leaf the marginal factor of each path feature is precomputed:
    the product of inverse edge weights over that feature's splits, gated to
    zero unless the instance satisfies all of them.  A restricted prediction
    is then a sum over leaves of the empty-rule value times the factors of the
    active features, memoized by coalition bitmask because the same coalition
    recurs across interaction subsets.
    """

    def __init__(self, ensemble: Ensemble, x):
        x = _check_instance(x, ensemble.n_features)
        self.n = ensemble.n_features
        self.offset = ensemble.baseline_offset
        self.leaves: list[tuple[float, tuple[tuple[int, float], ...]]] = []
        for tree in ensemble.trees:
            # (node, weight product, per-feature (inverse-weight product, satisfied))
            stack: list[tuple[int, float, dict[int, tuple[float, bool]]]] = [(0, 1.0, {})]
            while stack:
                node, w_prod, facs = stack.pop()
                if tree.is_leaf(node):
                    r_empty = float(tree.value[node]) * w_prod
                    q = tuple(
                        (f, inv if ok else 0.0) for f, (inv, ok) in sorted(facs.items())
                    )
                    self.leaves.append((r_empty, q))
                    continue
                feat = int(tree.feature[node])
                thr = tree.threshold[node]
                goes_left = x[feat] <= thr
                for child, onpath in (
                    (int(tree.left[node]), goes_left),
                    (int(tree.right[node]), not goes_left),
                ):
                    w = tree.count[child] / tree.count[node]
                    inv, ok = facs.get(feat, (1.0, True))
                    child_facs = dict(facs)
                    child_facs[feat] = (inv / w, ok and onpath)
                    stack.append((child, w_prod * w, child_facs))
        self.memo: dict[int, float] = {}
        self.evaluations = 0

    def restricted(self, mask: int) -> float:
        """Model output when only the features in ``mask`` are known."""
        hit = self.memo.get(mask)
        if hit is not None:
            return hit
        self.evaluations += 1
        total = self.offset
        for r_empty, q in self.leaves:
            term = r_empty
            for f, qv in q:
                if (mask >> f) & 1:
                    term *= qv
                    if term == 0.0:
                        break
            total += term
        self.memo[mask] = total
        return total


def restricted_predict(ensemble: Ensemble, x, coalition, evaluator: LeafEvaluator | None = None) -> float:
    """Prediction at ``x`` with only the features of ``coalition`` known."""
    if evaluator is None:
        evaluator = LeafEvaluator(ensemble, x)
    members = coalition.members if isinstance(coalition, Coalition) else tuple(coalition)
    for f in members:
        if not 0 <= int(f) < evaluator.n:
            raise ConfigError(f"feature index {f} out of range")
    return evaluator.restricted(mask_of(members))


def s_derivative(ensemble: Ensemble, x, subset, context, evaluator: LeafEvaluator | None = None) -> float:
    """Alternating-sign inclusion-exclusion of the restricted model over ``subset``."""
    if evaluator is None:
        evaluator = LeafEvaluator(ensemble, x)
    s_members = tuple(sorted(subset))
    t_mask = mask_of(context)
    s_mask = mask_of(s_members)
    if t_mask & s_mask:
        raise ConfigError("subset and context coalition overlap")
    size = len(s_members)
    terms = []
    for bits in range(1 << size):
        l_mask = 0
        for i in range(size):
            if (bits >> i) & 1:
                l_mask |= 1 << s_members[i]
        sign = -1.0 if (size - bits.bit_count()) % 2 else 1.0
        terms.append(sign * evaluator.restricted(t_mask | l_mask))
    return math.fsum(terms)


def sii_weight_fn(n: int, s: int):
    return lambda t: cii_weight(SII, n, s, t)


def banzhaf_weight_fn(n: int, s: int):
    return lambda t: cii_weight(BANZHAF, n, s, t)


def brute_interaction(
    ensemble: Ensemble,
    x,
    subset,
    weight_fn,
    evaluator: LeafEvaluator | None = None,
    stats: dict | None = None,
    coalition_order=None,
) -> float:
    """Exact interaction score by full enumeration.

    Sums ``weight_fn(|T|)`` times the subset's discrete derivative over all
    2^(n-|S|) context coalitions ``T``.  ``math.fsum`` accumulation makes the
    result independent of enumeration order; ``coalition_order`` exists so
    tests can prove that.  Pass a shared ``evaluator`` to reuse restricted
    predictions across subsets of the same instance.
    """
    if evaluator is None:
        evaluator = LeafEvaluator(ensemble, x)
    n = evaluator.n
    s_members = tuple(sorted(subset))
    s = len(s_members)
    if s < 1 or s > n:
        raise ConfigError(f"interaction subset size {s} out of range 1..{n}")
    rest = [f for f in range(n) if f not in set(s_members)]
    if len(rest) > MAX_REMAINING:
        raise OracleSizeError(
            f"{len(rest)} remaining features exceed the enumeration cap of {MAX_REMAINING}"
        )
    # Precompute the 2^s inner sub-coalition masks and signs once.
    sub_masks = []
    for bits in range(1 << s):
        l_mask = 0
        for i in range(s):
            if (bits >> i) & 1:
                l_mask |= 1 << s_members[i]
        sign = -1.0 if (s - bits.bit_count()) % 2 else 1.0
        sub_masks.append((l_mask, sign))
    weights = [weight_fn(t) for t in range(len(rest) + 1)]
    if coalition_order is None:
        patterns = range(1 << len(rest))
    else:
        patterns = coalition_order
    n_coalitions = 0
    n_terms = 0
    restricted = evaluator.restricted
    rest_bits = [1 << f for f in rest]

    def terms():
        nonlocal n_coalitions, n_terms
        for bits in patterns:
            t_mask = 0
            b = bits
            i = 0
            while b:
                if b & 1:
                    t_mask |= rest_bits[i]
                b >>= 1
                i += 1
            w = weights[bits.bit_count()]
            n_coalitions += 1
            for l_mask, sign in sub_masks:
                n_terms += 1
                yield w * sign * restricted(t_mask | l_mask)

    total = math.fsum(terms())
    if stats is not None:
        stats["coalitions"] = stats.get("coalitions", 0) + n_coalitions
        stats["terms"] = stats.get("terms", 0) + n_terms
        stats["evaluations"] = evaluator.evaluations
    return total


def brute_sii(ensemble: Ensemble, x, subset, evaluator: LeafEvaluator | None = None) -> float:
    n = ensemble.n_features
    return brute_interaction(ensemble, x, subset, sii_weight_fn(n, len(tuple(subset))), evaluator)


def brute_cii(
    ensemble: Ensemble, x, subset, kind: CIIKind, evaluator: LeafEvaluator | None = None
) -> float:
    n = ensemble.n_features
    s = len(tuple(subset))
    return brute_interaction(
        ensemble, x, subset, lambda t: cii_weight(kind, n, s, t), evaluator
    )


def brute_sv(ensemble: Ensemble, x, evaluator: LeafEvaluator | None = None) -> np.ndarray:
    """All single-feature attributions at once (shared evaluator)."""
    if evaluator is None:
        evaluator = LeafEvaluator(ensemble, x)
    return np.array(
        [brute_sii(ensemble, x, (i,), evaluator) for i in range(ensemble.n_features)]
    )
