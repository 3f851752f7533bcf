"""Coined quantum walk on a line: chirality dynamics, broken-link noise, memory witnesses."""
from importlib.metadata import PackageNotFoundError, version

from .core import (
    HADAMARD,
    MAXIMALLY_MIXED,
    NORTH,
    SOUTH,
    BlochVector,
    ChiralDensity,
    CoinAngles,
    CoinParams,
    DistanceSeries,
    LatticeSizeError,
    ResolutionError,
    bloch_from_angles,
    bloch_from_density,
    density_from_bloch,
    orthogonal_partner,
    trace_distance,
)
from .kspace import FREE, NoiseParams, evolve_k
from .nonmarkov import NonMarkovReport, distance_series, maximize_pairs, nmax_curve
from .walk import WalkerState, evolve, reduce_chirality

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = [
    "HADAMARD", "MAXIMALLY_MIXED", "NORTH", "SOUTH", "FREE",
    "BlochVector", "ChiralDensity", "CoinAngles", "CoinParams", "DistanceSeries",
    "NoiseParams", "NonMarkovReport", "WalkerState",
    "LatticeSizeError", "ResolutionError",
    "bloch_from_angles", "bloch_from_density", "density_from_bloch", "orthogonal_partner",
    "trace_distance", "evolve", "reduce_chirality", "evolve_k",
    "distance_series", "maximize_pairs", "nmax_curve",
]
