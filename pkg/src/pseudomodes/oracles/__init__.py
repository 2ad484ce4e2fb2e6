"""Brute-force references: discretized baths, unitary evolution, dilations."""
from .discretize import DiscretizedBath, discretize_spectral_density, flat_window
from .dilation import build_dilation, verify_lemma1, verify_lemma2
from .theorem import gaussian_dephasing_multitime, verify_theorem
from .unitary import UnitaryConfig, multitime_unitary, unitary_config

__all__ = [
    "DiscretizedBath",
    "UnitaryConfig",
    "build_dilation",
    "discretize_spectral_density",
    "flat_window",
    "gaussian_dephasing_multitime",
    "multitime_unitary",
    "unitary_config",
    "verify_lemma1",
    "verify_lemma2",
    "verify_theorem",
]
