"""Convert fitted scikit-learn tree models into the interchange format.

Supported estimators:

* ``DecisionTreeRegressor`` / ``RandomForestRegressor`` / ``GradientBoostingRegressor``
* ``DecisionTreeClassifier`` / ``RandomForestClassifier`` (exported as the
  vote-share of one class, their additive raw output)
* ``GradientBoostingClassifier`` (binary: the log-odds margin; multiclass:
  one document per class via ``class_index``)

Per-node counts come from the library's recorded weighted sample counts, so
edge weights are exactly the training-data split fractions.  Forests average
their trees while the interchange format sums them, so forest leaf values are
pre-divided by the tree count.  ``baseline_offset`` is set so that the
document's summed output reproduces the library's raw output; for boosted
models it is recovered by probing the public raw-output API rather than
touching private initial estimators.

The roundtrip check re-predicts the document with a local routing loop (kept
independent of the consuming library on purpose) and compares against the
source model on random probes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

try:  # pragma: no cover - import guard exercised only without sklearn
    from sklearn.ensemble import (
        GradientBoostingClassifier,
        GradientBoostingRegressor,
        RandomForestClassifier,
        RandomForestRegressor,
    )
    from sklearn.tree import DecisionTreeClassifier, DecisionTreeRegressor
except ImportError as exc:  # pragma: no cover
    raise ImportError("treeinteract-exporter requires scikit-learn") from exc


class ExportError(ValueError):
    """The model cannot be exported (unfitted, unsupported, or inconsistent)."""


class RoundtripError(ExportError):
    """Exported document predictions deviate from the source model."""


@dataclass
class ExportReport:
    n_trees: int
    n_features: int
    output_kind: str
    max_deviation: float

    def as_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "n_features": self.n_features,
            "output_kind": self.output_kind,
            "max_deviation": self.max_deviation,
        }


def _require_fitted(model, attr: str) -> None:
    if not hasattr(model, attr):
        raise ExportError(
            f"{type(model).__name__} looks unfitted (missing {attr!r}); fit it first"
        )


def _tree_arrays(tree, leaf_value) -> dict:
    """One sklearn ``tree_`` structure as interchange arrays."""
    left = tree.children_left.astype(int)
    right = tree.children_right.astype(int)
    if np.any((left < 0) != (right < 0)):
        raise ExportError("tree is not strictly binary")
    is_leaf = left < 0
    counts = tree.weighted_n_node_samples.astype(float)
    values = [leaf_value(tree, i) if is_leaf[i] else 0.0 for i in range(tree.node_count)]
    return {
        "left": left.tolist(),
        "right": right.tolist(),
        "feature": np.where(is_leaf, -1, tree.feature).astype(int).tolist(),
        "threshold": np.where(is_leaf, 0.0, tree.threshold).astype(float).tolist(),
        "count": counts.tolist(),
        "value": [float(v) for v in values],
    }


def _regression_leaf(scale: float):
    def leaf_value(tree, i):
        return scale * float(tree.value[i, 0, 0])

    return leaf_value


def _class_share_leaf(class_index: int, scale: float):
    def leaf_value(tree, i):
        row = tree.value[i, 0, :]
        return scale * float(row[class_index] / row.sum())

    return leaf_value


def _default_class(model) -> int | None:
    n_classes = getattr(model, "n_classes_", None)
    if n_classes is None:
        return None
    return 1 if int(n_classes) == 2 else None


def _raw_output(model, X: np.ndarray, class_index: int | None = None) -> np.ndarray:
    """The additive raw output of the source model on X (public APIs only)."""
    if isinstance(model, (DecisionTreeRegressor, RandomForestRegressor, GradientBoostingRegressor)):
        return model.predict(X)
    cls = class_index if class_index is not None else _default_class(model)
    if isinstance(model, (DecisionTreeClassifier, RandomForestClassifier)):
        if cls is None:
            raise ExportError("multiclass models need an explicit class_index")
        return model.predict_proba(X)[:, cls]
    if isinstance(model, GradientBoostingClassifier):
        df = model.decision_function(X)
        if df.ndim == 1:
            return df
        if cls is None:
            raise ExportError("multiclass models need an explicit class_index")
        return df[:, cls]
    raise ExportError(f"unsupported estimator type {type(model).__name__}")


def build_document(model, feature_names=None, class_index: int | None = None) -> dict:
    """Interchange document for a fitted model (not yet written to disk)."""
    if isinstance(model, (DecisionTreeRegressor, RandomForestRegressor)):
        _require_fitted(model, "tree_" if isinstance(model, DecisionTreeRegressor) else "estimators_")
        if isinstance(model, DecisionTreeRegressor):
            trees = [_tree_arrays(model.tree_, _regression_leaf(1.0))]
        else:
            scale = 1.0 / len(model.estimators_)
            trees = [_tree_arrays(est.tree_, _regression_leaf(scale)) for est in model.estimators_]
        offset = 0.0
        kind = "regression-value"
        n_features = model.n_features_in_
    elif isinstance(model, (DecisionTreeClassifier, RandomForestClassifier)):
        _require_fitted(model, "tree_" if isinstance(model, DecisionTreeClassifier) else "estimators_")
        n_classes = int(model.n_classes_)
        cls = class_index if class_index is not None else (1 if n_classes == 2 else None)
        if cls is None:
            raise ExportError("multiclass models need an explicit class_index")
        if not 0 <= cls < n_classes:
            raise ExportError(f"class_index {cls} out of range for {n_classes} classes")
        if isinstance(model, DecisionTreeClassifier):
            trees = [_tree_arrays(model.tree_, _class_share_leaf(cls, 1.0))]
        else:
            scale = 1.0 / len(model.estimators_)
            trees = [_tree_arrays(est.tree_, _class_share_leaf(cls, scale)) for est in model.estimators_]
        offset = 0.0
        kind = "raw-margin"
        n_features = model.n_features_in_
    elif isinstance(model, (GradientBoostingRegressor, GradientBoostingClassifier)):
        _require_fitted(model, "estimators_")
        stages = model.estimators_
        if isinstance(model, GradientBoostingClassifier):
            n_classes = int(model.n_classes_)
            if n_classes == 2:
                col = 0
            else:
                if class_index is None:
                    raise ExportError("multiclass models need an explicit class_index")
                col = class_index
            kind = "raw-margin"
        else:
            col = 0
            kind = "regression-value"
        lr = float(model.learning_rate)
        trees = [_tree_arrays(stage[col].tree_, _regression_leaf(lr)) for stage in stages]
        offset = 0.0  # fixed below by probing the raw output
        n_features = model.n_features_in_
    else:
        raise ExportError(f"unsupported estimator type {type(model).__name__}")

    doc = {
        "format_version": 1,
        "routing": "le-left",
        "n_features": int(n_features),
        "baseline_offset": float(offset),
        "output_kind": kind,
        "trees": trees,
    }
    if feature_names is not None:
        names = [str(s) for s in feature_names]
        if len(names) != n_features:
            raise ExportError("feature_names length does not match the model")
        doc["feature_names"] = names

    if isinstance(model, (GradientBoostingRegressor, GradientBoostingClassifier)):
        # The initial raw prediction is constant for the default init; recover
        # it by differencing the public raw output against the exported trees.
        probes = np.zeros((4, n_features))
        probes[1:] = np.linspace(-1.0, 1.0, 3)[:, None]
        raw = _raw_output(model, probes, class_index)
        mine = np.array([predict_document(doc, x) for x in probes])
        offsets = raw - mine
        if np.ptp(offsets) > 1e-8 * max(1.0, float(np.abs(offsets).max())):
            raise ExportError(
                "cannot reconstruct a constant baseline offset; "
                "non-constant init estimators are not supported"
            )
        doc["baseline_offset"] = float(offsets.mean())
    return doc


def predict_document(doc: dict, x) -> float:
    """Route one instance through an interchange document (local reference)."""
    x = np.asarray(x, dtype=float)
    total = float(doc["baseline_offset"])
    for tree in doc["trees"]:
        node = 0
        while tree["left"][node] >= 0:
            if x[tree["feature"][node]] <= tree["threshold"][node]:
                node = tree["left"][node]
            else:
                node = tree["right"][node]
        total += tree["value"][node]
    return total


def _probe_matrix(model, n_probes: int, rng, probe_data=None) -> np.ndarray:
    n_features = int(model.n_features_in_)
    if probe_data is not None:
        probe_data = np.asarray(probe_data, dtype=float)
        lo = probe_data.min(axis=0)
        hi = probe_data.max(axis=0)
    else:
        lo = np.full(n_features, -3.0)
        hi = np.full(n_features, 3.0)
    return rng.uniform(lo, hi, size=(n_probes, n_features))


def roundtrip_check(
    model,
    exported_path,
    n_probes: int = 100,
    probe_data=None,
    seed: int = 0,
    class_index: int | None = None,
) -> ExportReport:
    """Max |source raw output - document output| over random probes.

    Raises :class:`RoundtripError` when the deviation exceeds 1e-6.
    """
    with open(exported_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    rng = np.random.default_rng(seed)
    probes = _probe_matrix(model, n_probes, rng, probe_data)
    source = _raw_output(model, probes, class_index)
    mine = np.array([predict_document(doc, x) for x in probes])
    deviation = float(np.max(np.abs(source - mine))) if n_probes else 0.0
    report = ExportReport(
        n_trees=len(doc["trees"]),
        n_features=int(doc["n_features"]),
        output_kind=doc["output_kind"],
        max_deviation=deviation,
    )
    if deviation > 1e-6:
        raise RoundtripError(
            f"prediction deviation {deviation:.3e} exceeds 1e-6 over {n_probes} probes"
        )
    return report


def export_model(
    model,
    output_path,
    feature_names=None,
    class_index: int | None = None,
    n_probes: int = 100,
    probe_data=None,
) -> ExportReport:
    """Write the interchange document and verify prediction equivalence."""
    doc = build_document(model, feature_names, class_index)
    text = json.dumps(doc, separators=(",", ":"), allow_nan=False)
    with open(output_path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")
    return roundtrip_check(model, output_path, n_probes, probe_data, class_index=class_index)
