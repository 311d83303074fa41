"""Geometry, Brownian motion and harmonic functions on the solvable groups Sol(p, q)."""

__version__ = "0.1.0"

from solgeo.errors import ConfigError, DomainError, NonFiniteError, SolGeoError
from solgeo.geometry import SolParams, SolPoint, estimate_distance
from solgeo.sde import SimConfig, simulate, simulate_batch

__all__ = [
    "__version__",
    "ConfigError",
    "DomainError",
    "NonFiniteError",
    "SolGeoError",
    "SolParams",
    "SolPoint",
    "estimate_distance",
    "SimConfig",
    "simulate",
    "simulate_batch",
]
