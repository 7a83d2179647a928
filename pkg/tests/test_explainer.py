import numpy as np
import pytest

from conftest import depth1_doc
from treeinteract import (
    Ensemble,
    NotFittedError,
    TreeInteractionExplainer,
    load_ensemble,
)
from treeinteract.engine import explain_interactions
from treeinteract.errors import ConfigError
from treeinteract.treemodel import dump_ensemble


def test_params_round_trip():
    exp = TreeInteractionExplainer(order=2, index="banzhaf")
    params = exp.get_params()
    assert params == {"order": 2, "max_order": None, "index": "banzhaf"}
    clone = TreeInteractionExplainer(**params)
    assert clone.get_params() == params
    exp.set_params(order=3)
    assert exp.order == 3
    with pytest.raises(ConfigError):
        exp.set_params(bogus=1)


def test_requires_fit_first():
    exp = TreeInteractionExplainer()
    with pytest.raises(NotFittedError):
        exp.explain([0.1, 0.2])
    with pytest.raises(NotFittedError):
        exp.transform([[0.1, 0.2]])


def test_fit_accepts_path_dict_and_ensemble(tmp_path, demo_model_path):
    from_path = TreeInteractionExplainer().fit(demo_model_path)
    from_dict = TreeInteractionExplainer().fit(depth1_doc())
    ens = load_ensemble(depth1_doc())
    from_obj = TreeInteractionExplainer().fit(ens)
    for exp in (from_path, from_dict, from_obj):
        assert isinstance(exp.ensemble_, Ensemble)
        assert exp.n_features_ == 2
        res = exp.explain([0.2, 0.9])
        assert res.scores[(0,)] == 0.5
    json_text = dump_ensemble(ens)
    assert TreeInteractionExplainer().fit(json_text).n_features_ == 2


def test_fit_rejects_garbage():
    with pytest.raises(ConfigError):
        TreeInteractionExplainer().fit(12345)


def test_transform_matches_explain():
    exp = TreeInteractionExplainer(order=1).fit(depth1_doc())
    X = np.array([[0.2, 0.9], [0.9, 0.2], [0.5, 0.5]])
    M = exp.transform(X)
    assert M.shape == (3, 2)
    assert exp.subsets_ == [(0,), (1,)]
    for row, x in zip(M, X):
        res = explain_interactions(exp.ensemble_, x, 1)
        assert row.tolist() == [res.scores[(0,)], res.scores[(1,)]]


def test_transform_validates_width():
    exp = TreeInteractionExplainer().fit(depth1_doc())
    with pytest.raises(ConfigError):
        exp.transform(np.zeros((2, 3)))
    with pytest.raises(ConfigError):
        exp.transform(np.array([[np.nan, 0.0]]))


def test_predict_and_baseline():
    exp = TreeInteractionExplainer().fit(depth1_doc())
    got = exp.predict([[0.2, 0.0], [0.9, 0.0]])
    assert got.tolist() == [1.0, 0.0]
    res = exp.explain([0.2, 0.0])
    assert exp.baseline_ == res.baseline


def test_max_order_mode_returns_all_orders():
    exp = TreeInteractionExplainer(max_order=2).fit(depth1_doc())
    results = exp.explain([0.2, 0.9])
    assert [r.order for r in results] == [1, 2]
    assert results[0].index_kind == "n-sii"


def test_explain_values_agrees_with_generic_path():
    exp = TreeInteractionExplainer().fit(depth1_doc())
    sv = exp.explain_values([0.2, 0.9])
    s1 = exp.explain([0.2, 0.9])
    for sub in sv.scores:
        assert abs(sv.scores[sub] - s1.scores[sub]) <= 1e-10
