"""Takagi functions: certified evaluation, Littlewood roots, level sets and covering counts."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    UNDEFINED,
    EvalResult,
    Interval,
    TakagiParams,
    evaluate,
    evaluate_many,
    oscillation,
    partial_derivative,
    partial_sum,
    tail,
    tent,
    tent_sign,
)
from .exceptions import (  # noqa: E402
    ConstructionError,
    PrecisionBudgetError,
    TakagiError,
    ValidationError,
)
from .littlewood import CertifiedRoot, SignVector  # noqa: E402

__all__ = [
    "UNDEFINED",
    "CertifiedRoot",
    "ConstructionError",
    "EvalResult",
    "Interval",
    "PrecisionBudgetError",
    "SignVector",
    "TakagiError",
    "TakagiParams",
    "ValidationError",
    "evaluate",
    "evaluate_many",
    "oscillation",
    "partial_derivative",
    "partial_sum",
    "tail",
    "tent",
    "tent_sign",
]
