"""Slow-fast averaging engine for finite-dimensional action-angle systems."""

from .catalog import CATALOG, load_system, rotating_ou, rotating_ou_averaged, twist_system
from .engine import (
    AveragedCoefficients,
    DefectEstimate,
    SlowPath,
    averaged_coefficients,
    coefficients_from_closed_form,
    coefficients_from_system,
    frequency_jacobian_det,
    khasminskii_defect,
    simulate_fast_slow,
    simulate_whitham,
    symmetric_sqrt,
)
from .quadrature import DEFAULT_QUAD, QuadratureConfig, haar_average, kronecker_time_average, partial_average
from .system import AveragingSystem

__all__ = [
    "AveragedCoefficients",
    "AveragingSystem",
    "CATALOG",
    "DEFAULT_QUAD",
    "DefectEstimate",
    "QuadratureConfig",
    "SlowPath",
    "averaged_coefficients",
    "coefficients_from_closed_form",
    "coefficients_from_system",
    "frequency_jacobian_det",
    "haar_average",
    "khasminskii_defect",
    "kronecker_time_average",
    "load_system",
    "partial_average",
    "rotating_ou",
    "rotating_ou_averaged",
    "simulate_fast_slow",
    "simulate_whitham",
    "symmetric_sqrt",
    "twist_system",
]
