"""Isochronous centers and the integrable 4D systems built on them."""
from .errors import DomainError, ExpressionError, IsocenterError, ModelValidationError, NumericalError
from .funcmodel import ForceModel, builtin_catalog, center_bound, model_from_expression, model_from_spec

__all__ = [
    "DomainError",
    "ExpressionError",
    "ForceModel",
    "IsocenterError",
    "ModelValidationError",
    "NumericalError",
    "builtin_catalog",
    "center_bound",
    "model_from_expression",
    "model_from_spec",
]
__version__ = "0.1.0"
