import itertools
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_small_ensemble
from treeinteract import bench, oracle
from treeinteract.engine import (
    _bernoulli,
    explain_nsii,
    explain_sv,
    nsii_aggregate,
    nsii_feature_distribution,
)
from treeinteract.errors import ConfigError
from treeinteract.engine import InteractionResult
from treeinteract.treemodel import predict


def test_bernoulli_numbers():
    assert _bernoulli(0) == 1
    assert _bernoulli(1) == Fraction(-1, 2)
    assert _bernoulli(2) == Fraction(1, 6)
    assert _bernoulli(3) == 0
    assert _bernoulli(4) == Fraction(-1, 30)


def mobius_transform(ens, x):
    """Inclusion-exclusion of restricted predictions: the additive decomposition."""
    n = ens.n_features
    ev = oracle.LeafEvaluator(ens, x)
    out = {}
    for size in range(1, n + 1):
        for sub in itertools.combinations(range(n), size):
            total = 0.0
            for k in range(size + 1):
                for inner in itertools.combinations(sub, k):
                    sign = (-1.0) ** (size - k)
                    total += sign * oracle.restricted_predict(ens, x, inner, ev)
            out[sub] = total
    return out


def test_order1_aggregation_is_shapley_value():
    rng = np.random.default_rng(101)
    for _ in range(4):
        ens, x = random_small_ensemble(rng)
        agg = explain_nsii(ens, x, 1)
        sv = explain_sv(ens, x)
        assert len(agg) == 1
        for sub in sv.scores:
            assert agg[0].scores[sub] == pytest.approx(sv.scores[sub], abs=1e-10)


def test_full_order_aggregation_recovers_mobius():
    rng = np.random.default_rng(103)
    for _ in range(3):
        n = int(rng.integers(3, 6))
        ens = bench.generate_ensemble(int(rng.integers(1 << 31)), n, 4, 12)
        x = bench.generate_instances(int(rng.integers(1 << 31)), n, 1)[0]
        results = explain_nsii(ens, x, n)
        mob = mobius_transform(ens, x)
        for res in results:
            for sub, val in res.scores.items():
                assert val == pytest.approx(mob[sub], abs=1e-9)
        total = sum(r.score_sum() for r in results)
        assert results[0].baseline + total == pytest.approx(predict(ens, x), abs=1e-9)


@pytest.mark.parametrize("s0", [1, 2, 3])
def test_efficiency_any_max_order(s0):
    rng = np.random.default_rng(107 + s0)
    for _ in range(4):
        ens, x = random_small_ensemble(rng, n_trees=2)
        if s0 > ens.n_features:
            continue
        results = explain_nsii(ens, x, s0)
        total = sum(r.score_sum() for r in results)
        assert abs(results[0].baseline + total - predict(ens, x)) <= 1e-8


def test_xor_interaction_absorbs_attribution(xor_ensemble):
    x = [0.25, 0.25]
    sv = explain_sv(xor_ensemble, x)
    assert sv.scores[(0,)] == pytest.approx(-0.25)
    assert sv.scores[(1,)] == pytest.approx(-0.25)
    results = explain_nsii(xor_ensemble, x, 2)
    order1, order2 = results
    # the pure interaction takes the whole effect; singles collapse to zero
    assert order2.scores[(0, 1)] == pytest.approx(-0.5)
    assert abs(order1.scores[(0,)]) <= 1e-12
    assert abs(order1.scores[(1,)]) <= 1e-12
    assert abs(order1.scores[(0,)]) <= abs(sv.scores[(0,)])
    total = order1.score_sum() + order2.score_sum()
    assert order1.baseline + total == pytest.approx(predict(xor_ensemble, x), abs=1e-9)
    # brute-force confirms the sign pattern
    assert oracle.s_derivative(xor_ensemble, x, (0, 1), ()) == pytest.approx(-0.5)


def test_aggregate_requires_consecutive_orders():
    fake = InteractionResult(2, "sii", {(0, 1): 1.0}, 0.0, 1.0)
    with pytest.raises(ConfigError):
        nsii_aggregate([fake])


def test_feature_distribution_splits_equally():
    r1 = InteractionResult(1, "n-sii", {(0,): 0.2, (1,): -0.1, (3,): 0.0}, 0.0, 0.0)
    r2 = InteractionResult(2, "n-sii", {(1, 3): 0.6, (0, 1): -0.4}, 0.0, 0.0)
    dist = nsii_feature_distribution([r1, r2])
    assert dist[1][1] == (2, 0.3, -0.2)
    assert dist[3][1] == (2, 0.3, 0.0)
    assert dist[0][0] == (1, 0.2, 0.0)


def test_feature_distribution_all_positive_has_empty_negative_stacks():
    r1 = InteractionResult(1, "n-sii", {(0,): 0.2, (1,): 0.4}, 0.0, 0.0)
    r2 = InteractionResult(2, "n-sii", {(0, 1): 0.6}, 0.0, 0.0)
    dist = nsii_feature_distribution([r1, r2])
    for feature in dist:
        assert all(neg == 0.0 for _, _, neg in dist[feature])


def test_feature_distribution_signed_sums_recover_sv():
    rng = np.random.default_rng(113)
    for _ in range(3):
        n = int(rng.integers(3, 6))
        ens = bench.generate_ensemble(int(rng.integers(1 << 31)), n, 4, 10)
        x = bench.generate_instances(int(rng.integers(1 << 31)), n, 1)[0]
        results = explain_nsii(ens, x, n)
        dist = nsii_feature_distribution(results)
        sv = explain_sv(ens, x)
        for i in range(n):
            signed = sum(pos + neg for _, pos, neg in dist[i])
            assert abs(signed - sv.scores[(i,)]) <= 1e-8
