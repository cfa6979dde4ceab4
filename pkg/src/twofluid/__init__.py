"""Pseudo-spectral two-fluid Euler-Maxwell solver with Besov-space diagnostics."""
__version__ = "0.1.0"

from .spectral_field import GridSpec, SpectralField
from .littlewood_paley import BesovSpec, TimeNormSpec, besov_norm, build_partition
from .model import PhysParams, SymState, make_initial_data
from .integrator import RunConfig, integrate, run

__all__ = [
    "BesovSpec",
    "GridSpec",
    "PhysParams",
    "RunConfig",
    "SpectralField",
    "SymState",
    "TimeNormSpec",
    "besov_norm",
    "build_partition",
    "integrate",
    "make_initial_data",
    "run",
]
