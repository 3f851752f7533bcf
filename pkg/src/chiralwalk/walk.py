"""Exact position-space evolution of the decoherence-free walk.

Amplitudes are stored densely over a window of sites.  A walk started from a
point source never leaves ``[-t, t]`` after ``t`` steps, so :func:`evolve`
allocates that window once and steps in place.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import (
    ChiralDensity,
    CoinAngles,
    CoinParams,
    LatticeSizeError,
)

#: Upper bound on the number of lattice sites :func:`evolve` will allocate.
MAX_SITES = 4_000_001


@dataclass(frozen=True, eq=False)
class WalkerState:
    """Spinor field ``(a_x, b_x)`` on sites ``origin_offset .. origin_offset+n-1``.

    ``amps[:, 0]`` holds the left-chirality amplitudes ``a_x`` and
    ``amps[:, 1]`` the right-chirality amplitudes ``b_x``.
    """

    origin_offset: int
    amps: np.ndarray

    @property
    def a(self) -> np.ndarray:
        return self.amps[:, 0]

    @property
    def b(self) -> np.ndarray:
        return self.amps[:, 1]

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.origin_offset, self.origin_offset + len(self.amps))

    def amplitude(self, x: int) -> tuple[complex, complex]:
        i = x - self.origin_offset
        if 0 <= i < len(self.amps):
            return complex(self.amps[i, 0]), complex(self.amps[i, 1])
        return 0j, 0j

    def norm(self) -> float:
        return float(np.sum(self.amps.real**2 + self.amps.imag**2))

    def support(self) -> tuple[int, int]:
        """Smallest and largest occupied site."""
        occ = np.flatnonzero(np.any(self.amps != 0, axis=1))
        if occ.size == 0:
            raise ValueError("empty state")
        return self.origin_offset + int(occ[0]), self.origin_offset + int(occ[-1])


@dataclass(frozen=True)
class GcdState:
    """Global chirality distribution plus the real part of the interference term."""

    pL: float
    pR: float
    q_re: float = math.nan


def initial_state(angles: CoinAngles) -> WalkerState:
    return WalkerState(0, angles.spinor().reshape(1, 2).astype(complex))


def step(state: WalkerState, coin: CoinParams = CoinParams()) -> WalkerState:
    """One application of the walk map; the window grows by one site per side."""
    n = len(state.amps)
    a = np.zeros(n + 2, dtype=complex)
    b = np.zeros(n + 2, dtype=complex)
    a[1:-1] = state.a
    b[1:-1] = state.b
    na = np.empty_like(a)
    nb = np.empty_like(b)
    _kernels.impl.free_step(a, b, math.cos(coin.theta), math.sin(coin.theta), na, nb)
    return WalkerState(state.origin_offset - 1, np.stack([na, nb], axis=1))


def _window(angles: CoinAngles, t_max: int, max_sites: int):
    n = 2 * t_max + 1
    if n > max_sites:
        raise LatticeSizeError(f"{n} sites needed for t={t_max}, limit is {max_sites}")
    a = np.zeros(n, dtype=complex)
    b = np.zeros(n, dtype=complex)
    a[t_max], b[t_max] = angles.spinor()
    return a, b


def evolve(angles: CoinAngles, coin: CoinParams = CoinParams(), t: int = 0,
           max_sites: int = MAX_SITES) -> WalkerState:
    """State after ``t`` steps from the point source, on the window ``[-t, t]``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    a, b = _window(angles, t, max_sites)
    na, nb = np.empty_like(a), np.empty_like(b)
    c, s = math.cos(coin.theta), math.sin(coin.theta)
    step_fn = _kernels.impl.free_step
    for _ in range(t):
        step_fn(a, b, c, s, na, nb)
        a, na = na, a
        b, nb = nb, b
    return WalkerState(-t, np.stack([a, b], axis=1))


def bloch_row(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Coin Bloch components ``(r0, r1, r2, r3)`` of the position-traced state.

    Works on the last axis, so ``(n_traj, n_sites)`` inputs give ``(n_traj, 4)``.
    """
    pl = np.sum(a.real**2 + a.imag**2, axis=-1)
    pr = np.sum(b.real**2 + b.imag**2, axis=-1)
    q = np.sum(a * b.conj(), axis=-1)
    return np.stack([0.5 * (pl + pr), q.real, -q.imag, 0.5 * (pl - pr)], axis=-1)


def reduce_chirality(state: WalkerState) -> ChiralDensity:
    a, b = state.a, state.b
    pl = float(np.sum(a.real**2 + a.imag**2))
    pr = float(np.sum(b.real**2 + b.imag**2))
    return ChiralDensity(pl, pr, complex(np.sum(a * b.conj())))


def chirality_series(angles: CoinAngles, coin: CoinParams = CoinParams(), t_max: int = 0,
                     max_sites: int = MAX_SITES) -> np.ndarray:
    """Reduced coin state at every step ``0..t_max`` as ``(t_max+1, 4)`` Bloch rows."""
    a, b = _window(angles, t_max, max_sites)
    na, nb = np.empty_like(a), np.empty_like(b)
    c, s = math.cos(coin.theta), math.sin(coin.theta)
    step_fn = _kernels.impl.free_step
    out = np.empty((t_max + 1, 4))
    out[0] = bloch_row(a, b)
    for t in range(1, t_max + 1):
        step_fn(a, b, c, s, na, nb)
        a, na = na, a
        b, nb = nb, b
        out[t] = bloch_row(a, b)
    return out


def gcd_step(g: GcdState, q_re: float | None = None, coin: CoinParams = CoinParams()) -> GcdState:
    """Advance the chirality populations by one step given ``Re Q`` at the current time.

    ``q_re`` defaults to ``g.q_re``.  The interference term at the next time is
    not determined by the map, so the result carries ``q_re = nan``.
    """
    if q_re is None:
        q_re = g.q_re
    c2 = math.cos(coin.theta) ** 2
    s2 = math.sin(coin.theta) ** 2
    drive = q_re * math.sin(2 * coin.theta)
    return GcdState(c2 * g.pL + s2 * g.pR + drive, s2 * g.pL + c2 * g.pR - drive)


def overlap(s1: WalkerState, s2: WalkerState) -> complex:
    """Inner product ``<s1|s2>`` of two full walker states."""
    lo = min(s1.origin_offset, s2.origin_offset)
    hi = max(s1.origin_offset + len(s1.amps), s2.origin_offset + len(s2.amps))
    v1 = np.zeros((hi - lo, 2), dtype=complex)
    v2 = np.zeros((hi - lo, 2), dtype=complex)
    v1[s1.origin_offset - lo: s1.origin_offset - lo + len(s1.amps)] = s1.amps
    v2[s2.origin_offset - lo: s2.origin_offset - lo + len(s2.amps)] = s2.amps
    return complex(np.vdot(v1, v2))


def full_state_distance(s1: WalkerState, s2: WalkerState) -> float:
    """Trace distance between two pure full states, ``sqrt(1 - |<s1|s2>|^2)``."""
    return math.sqrt(max(0.0, 1.0 - abs(overlap(s1, s2)) ** 2))
