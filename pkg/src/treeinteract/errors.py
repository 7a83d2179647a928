"""Exception hierarchy shared across the package."""


class TreeInteractError(Exception):
    """Base class for all package errors."""


class ModelFormatError(TreeInteractError):
    """The model document is malformed or violates a structural invariant."""


class InstanceError(TreeInteractError):
    """An explanation instance is malformed (wrong length, non-finite values)."""


class ConfigError(TreeInteractError):
    """An explanation request is inconsistent (bad order, unknown index kind)."""


class SingularPointError(TreeInteractError):
    """Elementwise polynomial division hit a base point where the divisor is zero."""


class OracleSizeError(TreeInteractError):
    """Brute-force enumeration was requested beyond the supported coalition count."""


class NotFittedError(TreeInteractError):
    """The explainer was used before ``fit``."""
