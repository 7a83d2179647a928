"""Export fitted scikit-learn tree models to the treeinteract interchange format."""

from .export import (
    ExportError,
    ExportReport,
    RoundtripError,
    build_document,
    export_model,
    predict_document,
    roundtrip_check,
)

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "ExportReport",
    "RoundtripError",
    "build_document",
    "export_model",
    "predict_document",
    "roundtrip_check",
]
