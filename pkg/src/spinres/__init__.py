"""Multiscale construction of the spin-boson resonance near the excited level."""

from .model import DerivedConstants, ModelParams, ParameterError, derive_constants
from .multiscale import AuditFailure, MultiscaleResult, RunOptions, run_multiscale
from .oracle import count_inside, dense_spectrum, perturbative_resonance

__all__ = [
    "AuditFailure",
    "DerivedConstants",
    "ModelParams",
    "MultiscaleResult",
    "ParameterError",
    "RunOptions",
    "count_inside",
    "dense_spectrum",
    "derive_constants",
    "perturbative_resonance",
    "run_multiscale",
]

__version__ = "0.1.0"
