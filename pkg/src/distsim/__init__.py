"""Exact and Monte-Carlo tools for distributed source simulation without communication."""

from .distributions import (
    CapExceededError,
    ConditionalKernel,
    ProbabilityTable,
    entropy,
    gk_common_information,
    kl_divergence,
    maximal_correlation,
    mutual_information,
    total_variation,
    wyner_dsbs,
)
from .fourier import BooleanFunction, FourierSpectrum, wht

__version__ = "0.1.0"

__all__ = [
    "BooleanFunction",
    "CapExceededError",
    "ConditionalKernel",
    "FourierSpectrum",
    "ProbabilityTable",
    "entropy",
    "gk_common_information",
    "kl_divergence",
    "maximal_correlation",
    "mutual_information",
    "total_variation",
    "wht",
    "wyner_dsbs",
]
