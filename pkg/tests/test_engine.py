import itertools
import json
import math

import numpy as np
import pytest

from conftest import depth1_doc, random_small_ensemble
from treeinteract import bench, oracle
from treeinteract.engine import (
    ExplainConfig,
    explain,
    explain_cii,
    explain_interactions,
    explain_sv,
    make_plan,
    subset_rank_colex,
)
from treeinteract.errors import ConfigError, InstanceError
from treeinteract.poly import BANZHAF, SII
from treeinteract.treemodel import dump_ensemble, load_ensemble, predict


def test_subset_rank_colex_is_a_bijection():
    n, s = 8, 3
    ranks = [subset_rank_colex(c) for c in itertools.combinations(range(n), s)]
    assert sorted(ranks) == list(range(math.comb(n, s)))


# -- worked analytic case -------------------------------------------------------


def test_depth1_analytic_value(depth1_ensemble):
    x = [0.2, 0.9]
    hand = 0.5 * (1.0 - 0.0)  # right-branch weight times leaf difference
    eng = explain_interactions(depth1_ensemble, x, 1)
    sv = explain_sv(depth1_ensemble, x)
    brute = oracle.brute_sii(depth1_ensemble, x, (0,))
    assert eng.scores[(0,)] == hand == sv.scores[(0,)] == brute
    assert eng.scores[(1,)] == 0.0
    assert eng.baseline == pytest.approx(0.5)
    assert eng.prediction == pytest.approx(1.0)


def test_depth1_other_side(depth1_ensemble):
    eng = explain_interactions(depth1_ensemble, [0.9, 0.1], 1)
    assert eng.scores[(0,)] == pytest.approx(-0.5)


# -- axioms ---------------------------------------------------------------------


def test_dummy_axiom_exact_zero():
    rng = np.random.default_rng(3)
    for _ in range(5):
        ens, x = random_small_ensemble(rng)
        used = frozenset().union(
            *[frozenset(t.feature[t.feature >= 0].tolist()) for t in ens.trees]
        )
        absent = [i for i in range(ens.n_features) if i not in used]
        if not absent:
            continue
        for s in (1, 2):
            res = explain_interactions(ens, x, s)
            for sub, val in res.scores.items():
                if any(f in absent for f in sub):
                    assert val == 0.0


def test_symmetry_relabeling_bit_equal():
    ens = bench.generate_ensemble(123, 4, 4, 12)
    doc = json.loads(dump_ensemble(ens))
    swap = {0: 1, 1: 0, 2: 2, 3: 3}
    for tree in doc["trees"]:
        tree["feature"] = [swap[f] if f >= 0 else f for f in tree["feature"]]
    ens_swapped = load_ensemble(doc)
    x = bench.generate_instances(9, 4, 1)[0]
    x_swapped = x[[1, 0, 2, 3]]
    for s in (1, 2):
        a = explain_interactions(ens, x, s)
        b = explain_interactions(ens_swapped, x_swapped, s)
        for sub, val in a.scores.items():
            mapped = tuple(sorted(swap[f] for f in sub))
            assert b.scores[mapped] == val  # bit-equal, not approx


def test_linearity_over_ensemble():
    base = json.loads(dump_ensemble(bench.generate_ensemble(5, 5, 4, 12, n_trees=2)))
    singles = []
    for tree in base["trees"]:
        doc = dict(base)
        doc["trees"] = [tree]
        singles.append(load_ensemble(doc))
    pair = load_ensemble(base)
    x = bench.generate_instances(2, 5, 1)[0]
    for s in (1, 2):
        combined = explain_interactions(pair, x, s)
        parts = [explain_interactions(e, x, s) for e in singles]
        for sub in combined.scores:
            total = parts[0].scores[sub] + parts[1].scores[sub]
            assert abs(combined.scores[sub] - total) <= 1e-10


def test_update_restriction_changes_nothing():
    rng = np.random.default_rng(17)
    for _ in range(4):
        ens, x = random_small_ensemble(rng)
        for s in (1, 2, 3):
            if s > ens.n_features:
                continue
            restricted = explain_interactions(ens, x, s, restrict_updates=True)
            unrestricted = explain_interactions(ens, x, s, restrict_updates=False)
            assert restricted.scores == unrestricted.scores


# -- oracle agreement ------------------------------------------------------------


def test_matches_brute_force_on_random_trees():
    rng = np.random.default_rng(77)
    for _ in range(6):
        n = int(rng.integers(4, 8))
        ens = bench.generate_ensemble(int(rng.integers(1 << 31)), n, 5, 24)
        x = bench.generate_instances(int(rng.integers(1 << 31)), n, 1)[0]
        ev = oracle.LeafEvaluator(ens, x)
        for s in (1, 2, 3):
            res = explain_interactions(ens, x, s)
            wfn = oracle.sii_weight_fn(n, s)
            for sub in itertools.combinations(range(n), s):
                expect = oracle.brute_interaction(ens, x, sub, wfn, evaluator=ev)
                assert abs(res.scores[sub] - expect) <= max(1e-8 * abs(expect), 1e-12)


def test_order1_reduction_and_efficiency():
    rng = np.random.default_rng(29)
    for _ in range(6):
        ens, x = random_small_ensemble(rng, n_trees=2)
        sv = explain_sv(ens, x)
        s1 = explain_interactions(ens, x, 1)
        for sub in sv.scores:
            assert abs(sv.scores[sub] - s1.scores[sub]) <= 1e-10
        fx = predict(ens, x)
        assert abs(sv.baseline + sum(sv.scores.values()) - fx) <= 1e-9


def test_single_leaf_tree():
    doc = depth1_doc()
    doc["trees"] = [
        {
            "left": [-1],
            "right": [-1],
            "feature": [-1],
            "threshold": [0.0],
            "count": [10.0],
            "value": [3.25],
        }
    ]
    ens = load_ensemble(doc)
    res = explain_sv(ens, [0.1, 0.2])
    assert all(v == 0.0 for v in res.scores.values())
    assert res.baseline == pytest.approx(3.25)


# -- general index families -------------------------------------------------------


def test_cii_sii_kind_matches_dedicated_path():
    rng = np.random.default_rng(31)
    for _ in range(4):
        ens, x = random_small_ensemble(rng)
        n = ens.n_features

        def sii_weights(s, t, n=n):
            return 1.0 / ((n - s + 1) * math.comb(n - s, t))

        for s in (1, 2):
            a = explain_interactions(ens, x, s)
            b = explain_cii(ens, x, s, sii_weights)
            for sub in a.scores:
                assert abs(a.scores[sub] - b.scores[sub]) <= 1e-9


def test_banzhaf_depth1(depth1_ensemble):
    res = explain_cii(depth1_ensemble, [0.2, 0.9], 1, BANZHAF)
    expect = oracle.brute_cii(depth1_ensemble, [0.2, 0.9], (0,), BANZHAF)
    assert res.scores[(0,)] == pytest.approx(expect, abs=1e-12)
    assert res.scores[(0,)] == pytest.approx(0.5)


def test_banzhaf_order2_matches_brute():
    ens = bench.generate_ensemble(55, 5, 5, 24)
    x = bench.generate_instances(56, 5, 1)[0]
    res = explain_cii(ens, x, 2, BANZHAF)
    ev = oracle.LeafEvaluator(ens, x)
    for sub in itertools.combinations(range(5), 2):
        expect = oracle.brute_cii(ens, x, sub, BANZHAF, evaluator=ev)
        assert abs(res.scores[sub] - expect) <= 1e-8


# -- configuration ----------------------------------------------------------------


def test_explain_config_dispatch(depth1_ensemble):
    x = [0.2, 0.9]
    one = explain(depth1_ensemble, x, ExplainConfig(order=1))
    assert one.scores[(0,)] == 0.5
    many = explain(depth1_ensemble, x, ExplainConfig(max_order=2))
    assert [r.order for r in many] == [1, 2]
    with pytest.raises(ConfigError):
        ExplainConfig()
    with pytest.raises(ConfigError):
        ExplainConfig(order=1, max_order=2)
    with pytest.raises(ConfigError):
        explain(depth1_ensemble, x, ExplainConfig(max_order=2, index_kind=BANZHAF))


def test_order_out_of_range(depth1_ensemble):
    with pytest.raises(ConfigError):
        explain_interactions(depth1_ensemble, [0.1, 0.2], 0)
    with pytest.raises(ConfigError):
        explain_interactions(depth1_ensemble, [0.1, 0.2], 3)


def test_non_finite_instance_rejected(depth1_ensemble):
    with pytest.raises(InstanceError):
        explain_interactions(depth1_ensemble, [np.inf, 0.0], 1)


def test_order_above_any_path_is_all_zero(depth1_ensemble):
    res = explain_interactions(depth1_ensemble, [0.2, 0.9], 2)
    assert set(res.scores.values()) == {0.0}


def test_plan_reuse_is_bit_identical():
    ens = bench.generate_ensemble(71, 5, 4, 16)
    plan = make_plan(ens, 2)
    xs = bench.generate_instances(72, 5, 3)
    for x in xs:
        fresh = explain_interactions(ens, x, 2)
        reused = explain_interactions(ens, x, 2, plan=plan)
        assert fresh.scores == reused.scores


def test_sparse_mode_matches_dense():
    # above the dense cutoff the result keeps only subsets a tree can realize
    ens22 = bench.generate_ensemble(13, 22, 4, 12)
    x = bench.generate_instances(14, 22, 1)[0]
    sparse = explain_interactions(ens22, x, 2)
    doc = json.loads(dump_ensemble(ens22))
    doc["n_features"] = 20  # same trees, dense path
    dense = explain_interactions(load_ensemble(doc), x[:20], 2)
    for sub, val in sparse.scores.items():
        assert dense.scores[sub] == pytest.approx(val, abs=1e-12)
    for sub, val in dense.scores.items():
        if sub not in sparse.scores:
            assert val == 0.0
