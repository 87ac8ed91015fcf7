"""Desk-scale numerics for quantum fingerprints used as hashes under classical leakage."""

from .errors import (AuditViolation, DimensionError, InfeasibleParameters, NumericalError,
                     QHashLabError)
from .fingerprint import FingerprintScheme, build_hadamard, build_random_linear
from .states import CqState, JointDistribution, guess_prob_classical, guess_prob_quantum

__version__ = "0.1.0"

__all__ = [
    "AuditViolation", "DimensionError", "InfeasibleParameters", "NumericalError", "QHashLabError",
    "FingerprintScheme", "build_hadamard", "build_random_linear",
    "CqState", "JointDistribution", "guess_prob_classical", "guess_prob_quantum",
]
