"""Coin-space value types, Bloch 4-vector algebra and the trace distance.

A coin (chirality) density matrix is written as ``r0*I + r1*sx + r2*sy + r3*sz``
so that, with ``q`` the upper-right element,

    pL = r0 + r3,   pR = r0 - r3,   q = r1 - 1j*r2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi
HADAMARD = math.pi / 4


class ResolutionError(RuntimeError):
    """A quadrature did not reach its requested accuracy."""


class LatticeSizeError(MemoryError):
    """A requested evolution needs more lattice sites than allowed."""


@dataclass(frozen=True)
class CoinAngles:
    """Point (gamma, phi) on the Bloch sphere; phi is wrapped into [0, 2pi)."""

    gamma: float
    phi: float = 0.0

    def __post_init__(self):
        gamma = float(self.gamma)
        if not (0.0 <= gamma <= math.pi):
            raise ValueError(f"gamma must lie in [0, pi], got {gamma!r}")
        phi = math.fmod(float(self.phi), TWO_PI)
        if phi < 0.0:
            phi += TWO_PI
        if phi >= TWO_PI:
            phi = 0.0
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "phi", phi)

    def spinor(self) -> np.ndarray:
        """Coin spinor ``(cos(gamma/2), exp(-i phi) sin(gamma/2))``."""
        return np.array([
            math.cos(self.gamma / 2),
            complex(math.cos(self.phi), -math.sin(self.phi)) * math.sin(self.gamma / 2),
        ])


NORTH = CoinAngles(0.0, 0.0)
SOUTH = CoinAngles(math.pi, 0.0)


@dataclass(frozen=True)
class CoinParams:
    """Coin bias; the effective coin is ``[[cos, sin], [sin, -cos]]``."""

    theta: float = HADAMARD

    def __post_init__(self):
        theta = float(self.theta)
        if not (0.0 <= theta <= math.pi / 2):
            raise ValueError(f"theta must lie in [0, pi/2], got {theta!r}")
        object.__setattr__(self, "theta", theta)

    @property
    def is_hadamard(self) -> bool:
        return abs(self.theta - HADAMARD) < 1e-15

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, s], [s, -c]])


@dataclass(frozen=True)
class BlochVector:
    r0: float
    r1: float
    r2: float
    r3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.r0, self.r1, self.r2, self.r3], dtype=float)

    @classmethod
    def from_array(cls, v) -> "BlochVector":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), float(v[1]), float(v[2]), float(v[3]))

    @property
    def radius(self) -> float:
        """Length of the (r1, r2, r3) part; 1/2 for a pure state."""
        return math.sqrt(self.r1**2 + self.r2**2 + self.r3**2)


@dataclass(frozen=True)
class ChiralDensity:
    """2x2 coin density matrix ``[[pL, q], [conj(q), pR]]``."""

    pL: float
    pR: float
    q: complex = field(default=0j)

    def __post_init__(self):
        object.__setattr__(self, "pL", float(self.pL))
        object.__setattr__(self, "pR", float(self.pR))
        object.__setattr__(self, "q", complex(self.q))

    def matrix(self) -> np.ndarray:
        return np.array([[self.pL, self.q], [self.q.conjugate(), self.pR]])

    @property
    def trace(self) -> float:
        return self.pL + self.pR

    @property
    def determinant(self) -> float:
        return self.pL * self.pR - abs(self.q) ** 2

    def is_valid(self, tol: float = 1e-12) -> bool:
        return (
            abs(self.trace - 1.0) <= tol
            and self.pL >= -tol
            and self.pR >= -tol
            and self.determinant >= -tol
        )


MAXIMALLY_MIXED = ChiralDensity(0.5, 0.5, 0j)


def bloch_from_angles(angles: CoinAngles) -> BlochVector:
    sg = math.sin(angles.gamma)
    return BlochVector(
        0.5,
        0.5 * math.cos(angles.phi) * sg,
        -0.5 * math.sin(angles.phi) * sg,
        0.5 * math.cos(angles.gamma),
    )


def density_from_bloch(r: BlochVector, tol: float = 1e-9) -> ChiralDensity:
    if abs(r.r0 - 0.5) > tol:
        raise ValueError(f"not a trace-one state: r0 = {r.r0!r}")
    return ChiralDensity(r.r0 + r.r3, r.r0 - r.r3, complex(r.r1, -r.r2))


def bloch_from_density(rho: ChiralDensity) -> BlochVector:
    return BlochVector(
        0.5 * (rho.pL + rho.pR),
        rho.q.real,
        -rho.q.imag,
        0.5 * (rho.pL - rho.pR),
    )


def densities_from_rows(rows) -> list[ChiralDensity]:
    """Convert an ``(n, 4)`` array of Bloch rows into ChiralDensity values."""
    return [density_from_bloch(BlochVector.from_array(r)) for r in np.atleast_2d(rows)]


def trace_distance(rho1: ChiralDensity, rho2: ChiralDensity) -> float:
    """Half the trace norm of the difference of two trace-one coin states.

    The difference is traceless and Hermitian, so its eigenvalues are
    ``+-sqrt(d**2 + |dq|**2)`` with ``d`` the population difference.
    """
    d = rho1.pL - rho2.pL
    dq = rho1.q - rho2.q
    return math.sqrt(d * d + dq.real * dq.real + dq.imag * dq.imag)


def row_distances(rows1, rows2) -> np.ndarray:
    """Vectorised :func:`trace_distance` for stacks of Bloch rows."""
    d = np.asarray(rows1, dtype=float) - np.asarray(rows2, dtype=float)
    return np.sqrt(d[..., 1] ** 2 + d[..., 2] ** 2 + (d[..., 0] + d[..., 3]) ** 2)


def orthogonal_partner(angles: CoinAngles) -> CoinAngles:
    return CoinAngles(math.pi - angles.gamma, angles.phi + math.pi)


@dataclass(frozen=True, eq=False)
class DistanceSeries:
    """Trace distance ``D(t)`` for ``t = 0..T``.

    Sampled series also carry standard errors for each value and for each
    forward increment ``D(t+1) - D(t)``.
    """

    values: np.ndarray
    stderr: np.ndarray | None = None
    increment_stderr: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("values must be a non-empty 1-D array")
        if np.any(v < -1e-12) or np.any(v > 1.0 + 1e-9):
            raise ValueError("trace distances must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def t_max(self) -> int:
        return len(self.values) - 1
