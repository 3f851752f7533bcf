"""Quasi-momentum superoperators for the coin Bloch vector.

The reduced coin state after ``t`` steps is the k-average of ``L_k**t`` applied
to the initial Bloch vector.  ``L_k`` keeps ``r0`` fixed and acts on
``(r1, r2, r3)`` through a 3x3 block ``M_k``, so everything below propagates
that block.  The k-average uses the midpoint rule on ``[-pi, pi)``; the
integrand is a trigonometric polynomial of degree ``2t`` in ``k``, which the
rule integrates exactly once ``nk > 2t``.

Only the Hadamard coin is covered here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import _kernels
from .core import (
    MAXIMALLY_MIXED,
    BlochVector,
    ChiralDensity,
    CoinAngles,
    CoinParams,
    ResolutionError,
    density_from_bloch,
)

RESOLUTION_TOL = 1e-9
DEGENERACY_TOL = 1e-8

_ASYM_A = 1.0 - 1.0 / math.sqrt(2.0)
_ASYM_B = math.sqrt(2.0) - 1.0


@dataclass(frozen=True)
class NoiseParams:
    """Per-step, per-link breaking probability."""

    p: float = 0.0

    def __post_init__(self):
        p = float(self.p)
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"p must lie in [0, 1], got {p!r}")
        object.__setattr__(self, "p", p)


FREE = NoiseParams(0.0)


@dataclass(frozen=True, eq=False)
class Superoperator:
    m: np.ndarray

    @property
    def block(self) -> np.ndarray:
        return self.m[1:, 1:]

    def __matmul__(self, r):
        if isinstance(r, BlochVector):
            return BlochVector.from_array(self.m @ r.as_array())
        return self.m @ np.asarray(r)


@dataclass(frozen=True, eq=False)
class Eigensystem:
    """Eigen-decomposition of the 3x3 block.

    ``eigenvectors[:, i]`` belongs to ``eigenvalues[i]``; vectors have unit
    2-norm.  Ordering: decreasing real part, ties by increasing imaginary part,
    so the free case reads ``1, exp(i(alpha+pi)), exp(-i(alpha+pi))``.
    ``alpha`` is only defined for the free walk and is ``nan`` otherwise.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    alpha: float
    near_degenerate: bool


class AsymptoticIntegrals(NamedTuple):
    v11_sq: float
    v21_sq: float
    v31_sq: float
    cross: float


def _require_hadamard(coin: CoinParams | None):
    if coin is not None and not coin.is_hadamard:
        raise ValueError("the k-space engine only covers the Hadamard coin (theta = pi/4)")


def quadrature_nodes(nk: int) -> np.ndarray:
    """Midpoint nodes ``-pi + (j + 1/2) 2pi/nk``."""
    if nk < 1:
        raise ValueError("nk must be positive")
    return -math.pi + (np.arange(nk) + 0.5) * (2.0 * math.pi / nk)


def default_nk(t: int) -> int:
    nk = max(256, 8 * int(t))
    return nk + (-nk) % 4


def _blocks(k: np.ndarray, p: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    q = (1.0 - p) ** 2
    e = q * np.sin(2 * k)
    f = q * np.cos(2 * k)
    g = p * (1.0 - p) * np.sin(k)
    h = p * (1.0 - p) * np.cos(k)
    m = np.zeros(k.shape + (3, 3))
    m[..., 0, 1] = e
    m[..., 0, 2] = f + p * p
    m[..., 1, 1] = p * p - f
    m[..., 1, 2] = e
    m[..., 2, 0] = 1.0 - 2.0 * p
    m[..., 2, 1] = -2.0 * g
    m[..., 2, 2] = -2.0 * h
    return m


def _embed(block: np.ndarray) -> np.ndarray:
    out = np.zeros(block.shape[:-2] + (4, 4))
    out[..., 0, 0] = 1.0
    out[..., 1:, 1:] = block
    return out


def build_free(k: float) -> Superoperator:
    s2, c2 = math.sin(2 * k), math.cos(2 * k)
    return Superoperator(np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, s2, c2],
        [0.0, 0.0, -c2, s2],
        [0.0, 1.0, 0.0, 0.0],
    ]))


def build_broken(k: float, noise: NoiseParams = FREE) -> Superoperator:
    return Superoperator(_embed(_blocks(np.float64(k), noise.p)))


@lru_cache(maxsize=64)
def _propagators(t_max: int, p: float, nk: int) -> np.ndarray:
    blocks = _blocks(quadrature_nodes(nk), p)
    out = _embed(_kernels.impl.propagator_mean(blocks, t_max))
    out.setflags(write=False)
    return out


def propagator_series(t_max: int, noise: NoiseParams = FREE, nk: int | None = None,
                      check: bool = True) -> np.ndarray:
    """k-averaged ``L_k**t`` for ``t = 0..t_max``, shape ``(t_max+1, 4, 4)``.

    With ``check`` the computation is repeated at ``2*nk`` nodes and a
    :class:`ResolutionError` is raised when any entry moves by more than
    ``RESOLUTION_TOL``.
    """
    if t_max < 0:
        raise ValueError("t_max must be non-negative")
    nk = default_nk(t_max) if nk is None else int(nk)
    props = _propagators(int(t_max), noise.p, nk)
    if check:
        finer = _propagators(int(t_max), noise.p, 2 * nk)
        err = float(np.max(np.abs(finer - props)))
        if err > RESOLUTION_TOL:
            raise ResolutionError(
                f"nk={nk} is too coarse for t={t_max}: doubling moved the result by {err:.2e}"
            )
    return props


def kspace_series(r0: BlochVector, t_max: int, noise: NoiseParams = FREE,
                  nk: int | None = None, check: bool = True) -> np.ndarray:
    """Reduced coin state at ``t = 0..t_max`` as ``(t_max+1, 4)`` Bloch rows."""
    return propagator_series(t_max, noise, nk, check) @ r0.as_array()


def evolve_k(r0: BlochVector, t: int, noise: NoiseParams = FREE, nk: int | None = None,
             check: bool = True) -> ChiralDensity:
    row = kspace_series(r0, t, noise, nk, check)[-1]
    return density_from_bloch(BlochVector.from_array(row))


def eigensystem(k: float, noise: NoiseParams = FREE) -> Eigensystem:
    block = _blocks(np.float64(k), noise.p)
    vals, vecs = np.linalg.eig(block)
    order = sorted(range(3), key=lambda i: (-round(vals[i].real, 12), vals[i].imag))
    vals = vals[order]
    vecs = vecs[:, order]
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    gaps = [abs(vals[i] - vals[j]) for i in range(3) for j in range(i + 1, 3)]
    alpha = math.acos(min(1.0, math.cos(k) ** 2)) if noise.p == 0.0 else math.nan
    return Eigensystem(vals, vecs, alpha, min(gaps) < DEGENERACY_TOL)


def free_eigenvectors(k) -> np.ndarray:
    """Closed-form free-walk eigenvectors, columns ``v1, v2, v3`` (unit 2-norm).

    Singular where ``sin 2k = 0``; midpoint nodes never land there when ``nk``
    is a multiple of 4.
    """
    k = np.asarray(k, dtype=float)
    s2, c2 = np.sin(2 * k), np.cos(2 * k)
    lam = np.exp(1j * (np.arccos(np.cos(k) ** 2) + np.pi))
    v = np.empty(k.shape + (3, 3), dtype=complex)
    pref = np.sqrt(2.0) * np.cos(k) / np.sqrt(3.0 + c2)
    v[..., 0, 0] = pref
    v[..., 1, 0] = pref * (1.0 - c2) / s2
    v[..., 2, 0] = pref
    for col, l in ((1, lam), (2, lam.conj())):
        v[..., 0, col] = l
        v[..., 1, col] = s2 / (l + c2)
        v[..., 2, col] = 1.0
        v[..., :, col] /= np.linalg.norm(v[..., :, col], axis=-1)[..., None]
    return v


def projector_integrals(nk: int = 256) -> np.ndarray:
    """``G[i, j]`` = k-average of ``v_i1 * conj(v_j1)`` for the unit eigenvector."""
    nk += (-nk) % 4
    v1 = free_eigenvectors(quadrature_nodes(nk))[..., :, 0]
    return np.einsum("ki,kj->ij", v1, v1.conj()) / nk


def asymptotic_integrals(nk: int = 256) -> AsymptoticIntegrals:
    """Squared-modulus integrals of the unit eigenvector and the odd cross terms.

    ``cross`` is the larger modulus of the ``v11 v21*`` and ``v21 v31*``
    integrals, both of which vanish.  ``v11 v31*`` does not vanish (``v11`` and
    ``v31`` coincide); see :func:`projector_integrals`.
    """
    g = projector_integrals(nk)
    return AsymptoticIntegrals(
        float(g[0, 0].real),
        float(g[1, 1].real),
        float(g[2, 2].real),
        float(max(abs(g[0, 1]), abs(g[1, 2]))),
    )


def asymptotic_projector(nk: int = 256) -> np.ndarray:
    """Long-time limit of the k-averaged ``L_k**t`` once oscillating terms drop out."""
    return _embed(projector_integrals(nk).real)


def asymptotic_free(angles: CoinAngles) -> ChiralDensity:
    """Long-time coin state of the free Hadamard walk."""
    cs = math.cos(angles.phi) * math.sin(angles.gamma) + math.cos(angles.gamma)
    pl = 0.5 * (1.0 + _ASYM_A * cs)
    q0 = 0.5 * _ASYM_A * complex(cs, math.sqrt(2.0) * math.sin(angles.phi) * math.sin(angles.gamma))
    return ChiralDensity(pl, 1.0 - pl, q0)


def asymptotic_broken(noise: NoiseParams) -> ChiralDensity:
    """Long-time coin state with broken links, ``0 < p < 1``: the identity over two."""
    if noise.p == 0.0:
        raise ValueError("p = 0 has a non-trivial limit; use asymptotic_free")
    if noise.p == 1.0:
        raise ValueError("p = 1 freezes the walker; the coin cycles and has no limit")
    return MAXIMALLY_MIXED


def asymptotic_distance(a1: CoinAngles, a2: CoinAngles) -> float:
    dq = asymptotic_free(a1).q - asymptotic_free(a2).q
    return math.sqrt(2.0 * dq.real**2 + dq.imag**2)


def stationarity_residual(rho: ChiralDensity, coin: CoinParams = CoinParams()) -> tuple[float, float]:
    """Residual of the fixed-point condition tying populations to ``Re q``."""
    tan = math.tan(coin.theta)
    if tan == 0.0:
        raise ValueError("theta = 0 has no stationarity condition")
    x = 2.0 * rho.q.real / tan
    return rho.pL - 0.5 * (1.0 + x), rho.pR - 0.5 * (1.0 - x)
