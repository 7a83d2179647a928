"""Estimator-style facade so explanations compose with pipeline tooling.

``TreeInteractionExplainer`` follows the usual estimator conventions:
constructor arguments are stored verbatim, ``fit`` ingests a model and builds
the reusable state (validated ensemble, per-edge tables, traversal plans),
and fitted attributes carry a trailing underscore.  ``transform`` maps a
batch of instances to a dense score matrix, one column per feature subset.
"""

from __future__ import annotations

import itertools
import os

import numpy as np

from . import engine
from .engine import InteractionResult
from .errors import ConfigError, NotFittedError
from .poly import SII
from .treemodel import (
    Ensemble,
    load_ensemble,
    load_ensemble_file,
    model_digest,
    precompute_edge_tables,
    predict,
)


def coerce_model(model) -> Ensemble:
    """Accept an Ensemble, a parsed document, a JSON string/bytes, or a path."""
    if isinstance(model, Ensemble):
        return model
    if isinstance(model, dict):
        return load_ensemble(model)
    if isinstance(model, (str, bytes, os.PathLike)):
        if isinstance(model, (str, os.PathLike)) and os.path.exists(model):
            return load_ensemble_file(model)
        return load_ensemble(model)
    raise ConfigError(f"cannot interpret {type(model).__name__} as a model")


def check_instances(X, n_features: int) -> np.ndarray:
    """Validate a batch of instances into a (n_samples, n_features) float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ConfigError(
            f"expected instances with {n_features} features, got shape {X.shape}"
        )
    if not np.isfinite(X).all():
        raise ConfigError("instances contain non-finite values")
    return X


class TreeInteractionExplainer:
    """Computes exact interaction scores for single predictions of a tree ensemble.

    Parameters
    ----------
    order:
        Interaction order for ``explain`` / ``transform`` (ignored when
        ``max_order`` is set).
    max_order:
        When set, ``explain`` returns the aggregated efficient index for all
        orders ``1..max_order`` instead of a single order.
    index:
        ``"sii"`` (Shapley weights), ``"banzhaf"``, or a callable ``w(s, t)``.
    """

    def __init__(self, order: int = 1, max_order: int | None = None, index=SII):
        self.order = order
        self.max_order = max_order
        self.index = index

    # -- estimator plumbing -------------------------------------------------

    _param_names = ("order", "max_order", "index")

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names}

    def set_params(self, **params) -> "TreeInteractionExplainer":
        for name, value in params.items():
            if name not in self._param_names:
                raise ConfigError(f"unknown parameter {name!r}")
            setattr(self, name, value)
        return self

    def _require_fitted(self) -> None:
        if not hasattr(self, "ensemble_"):
            raise NotFittedError("call fit(model) before using the explainer")

    # -- fitting ------------------------------------------------------------

    def fit(self, model, y=None) -> "TreeInteractionExplainer":
        ensemble = coerce_model(model)
        self.ensemble_ = ensemble
        self.n_features_ = ensemble.n_features
        self.feature_names_ = ensemble.feature_names
        self.edge_tables_ = [precompute_edge_tables(t) for t in ensemble.trees]
        self.model_digest_ = model_digest(ensemble)
        self.baseline_ = ensemble.baseline_offset + sum(
            et.tree_baseline for et in self.edge_tables_
        )
        self._plan_cache = {}
        return self

    def _plan(self, order: int):
        key = (order, self.index if isinstance(self.index, str) else id(self.index))
        plan = self._plan_cache.get(key)
        if plan is None:
            plan = engine.make_plan(
                self.ensemble_, order, self.index, edge_tables=self.edge_tables_
            )
            self._plan_cache[key] = plan
        return plan

    # -- explanation --------------------------------------------------------

    def explain(self, x) -> InteractionResult | list[InteractionResult]:
        """Interaction scores for one instance (a list of results when
        ``max_order`` is set)."""
        self._require_fitted()
        if self.max_order is not None:
            return engine.explain_nsii(
                self.ensemble_, x, self.max_order, edge_tables=self.edge_tables_
            )
        return engine.explain_interactions(
            self.ensemble_, x, self.order, self.index, plan=self._plan(self.order)
        )

    def explain_values(self, x) -> InteractionResult:
        """Order-1 attributions via the dedicated single-feature pass."""
        self._require_fitted()
        return engine.explain_sv(self.ensemble_, x, edge_tables=self.edge_tables_)

    @property
    def subsets_(self) -> list[tuple[int, ...]]:
        """Column order of ``transform``: all order-``order`` subsets."""
        self._require_fitted()
        return list(itertools.combinations(range(self.n_features_), self.order))

    def transform(self, X) -> np.ndarray:
        """Score matrix for a batch: one row per instance, one column per subset."""
        self._require_fitted()
        X = check_instances(X, self.n_features_)
        subsets = self.subsets_
        plan = self._plan(self.order)
        out = np.empty((len(X), len(subsets)))
        for i, x in enumerate(X):
            res = engine.explain_interactions(
                self.ensemble_, x, self.order, self.index, plan=plan
            )
            out[i] = [res.scores[s] for s in subsets]
        return out

    def fit_transform(self, model, X) -> np.ndarray:
        return self.fit(model).transform(X)

    def predict(self, X) -> np.ndarray:
        """Raw outputs of the wrapped ensemble (handy for efficiency checks)."""
        self._require_fitted()
        X = check_instances(X, self.n_features_)
        return np.array([predict(self.ensemble_, x) for x in X])
