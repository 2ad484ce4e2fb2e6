"""Pseudomode representations of Gaussian open-system dynamics.

Bath correlation functions are fitted by complex exponentials, realized as
damped bosonic modes, and multi-time expectation values of the system are
computed from the resulting GKLS dynamics.  Brute-force unitary references
live in :mod:`pseudomodes.oracles`.
"""
__version__ = "0.1.0"

from .bath_models import CorrelationSeries, SpectralDensity, correlation_analytic, sample_correlation
from .exp_fitting import ExponentialSum, matrix_pencil_fit, to_pseudomodes
from .gkls_model import GKLSModel, Mode, PseudomodeParams, SystemModel
from .propagation import MultiTimeRequest, multitime_chain, multitime_gkls

__all__ = [
    "CorrelationSeries",
    "ExponentialSum",
    "GKLSModel",
    "Mode",
    "MultiTimeRequest",
    "PseudomodeParams",
    "SpectralDensity",
    "SystemModel",
    "correlation_analytic",
    "matrix_pencil_fit",
    "multitime_chain",
    "multitime_gkls",
    "sample_correlation",
    "to_pseudomodes",
]
