"""Exact any-order Shapley interaction scores for tree-ensemble predictions.

A single recursive pass per tree computes interaction scores of any order via
polynomial arithmetic in multipoint-interpolation form, with a brute-force
oracle for verification and benchmark tooling for scaling studies.
"""

from .engine import (
    ExplainConfig,
    InteractionResult,
    explain,
    explain_cii,
    explain_interactions,
    explain_nsii,
    explain_sv,
    nsii_aggregate,
    nsii_feature_distribution,
)
from .errors import (
    ConfigError,
    InstanceError,
    ModelFormatError,
    NotFittedError,
    OracleSizeError,
    SingularPointError,
    TreeInteractError,
)
from .explainer import TreeInteractionExplainer
from .poly import BANZHAF, SII
from .treemodel import (
    EdgeTables,
    Ensemble,
    TreeModel,
    dump_ensemble,
    load_ensemble,
    load_ensemble_file,
    model_digest,
    precompute_edge_tables,
    predict,
)

__version__ = "0.1.0"

__all__ = [
    "BANZHAF",
    "SII",
    "ConfigError",
    "EdgeTables",
    "Ensemble",
    "ExplainConfig",
    "InstanceError",
    "InteractionResult",
    "ModelFormatError",
    "NotFittedError",
    "OracleSizeError",
    "SingularPointError",
    "TreeInteractError",
    "TreeInteractionExplainer",
    "TreeModel",
    "dump_ensemble",
    "explain",
    "explain_cii",
    "explain_interactions",
    "explain_nsii",
    "explain_sv",
    "load_ensemble",
    "load_ensemble_file",
    "model_digest",
    "nsii_aggregate",
    "nsii_feature_distribution",
    "precompute_edge_tables",
    "predict",
]
