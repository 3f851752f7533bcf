"""Trace-distance series, their positive increments, and the search over pairs.

The non-Markovianity witness used here is the sum of the strictly positive
forward differences of the coin-state trace distance between two initial
states, maximised over orthogonal pure pairs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    CoinAngles,
    CoinParams,
    DistanceSeries,
    NORTH,
    SOUTH,
    bloch_from_angles,
    orthogonal_partner,
    row_distances,
)
from .kspace import FREE, NoiseParams, kspace_series, propagator_series
from .walk import MAX_SITES, chirality_series

ENGINES = ("kspace", "position", "mc")
_ALIASES = {"exact-k": "kspace", "monte-carlo": "mc"}
TIE_TOL = 1e-12
MIN_GRID = (9, 16)


@dataclass(frozen=True, eq=False)
class NonMarkovReport:
    """Outcome of the witness for one pair (or the best pair of a search).

    ``landscape`` holds ``N(T)`` over the search grid when the report comes
    from :func:`maximize_pairs`; rows follow ``gammas``, columns ``phis``.
    """

    sigma: np.ndarray
    accumulated: np.ndarray
    n_final: float
    argmax_pair: tuple[CoinAngles, CoinAngles]
    distances: DistanceSeries
    landscape: np.ndarray | None = None
    gammas: np.ndarray | None = None
    phis: np.ndarray | None = None


def resolve_engine(engine: str) -> str:
    engine = _ALIASES.get(engine, engine)
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    return engine


def distance_series(a1: CoinAngles, a2: CoinAngles, coin: CoinParams = CoinParams(),
                    noise: NoiseParams = FREE, T: int = 1, engine: str = "kspace",
                    nk: int | None = None, n_traj: int = 1000, seed: int = 0,
                    rule: str = "uniform", max_sites: int = MAX_SITES) -> DistanceSeries:
    """Coin-state trace distance between two initial states, ``t = 0..T``.

    ``engine`` is ``"kspace"`` (exact, Hadamard coin), ``"position"`` (exact,
    decoherence-free only) or ``"mc"`` (trajectory average; both states share
    the same link realisations).
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    engine = resolve_engine(engine)
    if engine == "kspace":
        if not coin.is_hadamard:
            raise ValueError("the k-space engine only covers the Hadamard coin (theta = pi/4)")
        rows1 = kspace_series(bloch_from_angles(a1), T, noise, nk)
        rows2 = kspace_series(bloch_from_angles(a2), T, noise, nk)
    elif engine == "position":
        if noise.p != 0.0:
            raise ValueError("the position engine is decoherence-free; use kspace or mc for p > 0")
        rows1 = chirality_series(a1, coin, T, max_sites)
        rows2 = chirality_series(a2, coin, T, max_sites)
    else:
        from .mc import ensemble_chiral

        rows1 = ensemble_chiral(a1, coin, noise, T, n_traj, seed, rule).mean
        rows2 = ensemble_chiral(a2, coin, noise, T, n_traj, seed, rule).mean
    return DistanceSeries(row_distances(rows1, rows2))


def sigma_series(d) -> np.ndarray:
    """Forward differences ``D(t+1) - D(t)``."""
    v = d.values if isinstance(d, DistanceSeries) else np.asarray(d, dtype=float)
    if len(v) < 2:
        raise ValueError("need at least two distances")
    return v[1:] - v[:-1]


def accumulate(sigma) -> np.ndarray:
    """Running sum of strictly positive rates, starting from ``N(0) = 0``."""
    s = np.asarray(sigma, dtype=float)
    out = np.zeros(len(s) + 1)
    np.cumsum(np.where(s > 0.0, s, 0.0), out=out[1:])
    return out


def pair_report(a1: CoinAngles, a2: CoinAngles, coin: CoinParams = CoinParams(),
                noise: NoiseParams = FREE, T: int = 1, **engine_kw) -> NonMarkovReport:
    d = distance_series(a1, a2, coin, noise, T, **engine_kw)
    sigma = sigma_series(d)
    acc = accumulate(sigma)
    return NonMarkovReport(sigma, acc, float(acc[-1]), (a1, a2), d)


def search_grid(grid: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    n_gamma, n_phi = grid
    if n_gamma < MIN_GRID[0] or n_phi < MIN_GRID[1]:
        raise ValueError(f"grid must be at least {MIN_GRID}")
    return np.linspace(0.0, math.pi / 2, n_gamma), np.arange(n_phi) * (2.0 * math.pi / n_phi)


def _landscape_kspace(gammas, phis, noise, T, nk):
    props = propagator_series(T, noise, nk)[:, 1:, 1:]
    g, f = np.meshgrid(gammas, phis, indexing="ij")
    # the orthogonal partner has the opposite Bloch vector, so the difference is 2r
    diff = np.stack([np.cos(f) * np.sin(g), -np.sin(f) * np.sin(g), np.cos(g)], axis=-1)
    moved = np.einsum("tij,abj->abti", props, diff)
    d = np.sqrt(np.sum(moved * moved, axis=-1))
    return accumulate_rows(np.diff(d, axis=-1))


def accumulate_rows(sigma: np.ndarray) -> np.ndarray:
    """Final accumulated value along the last axis."""
    return np.sum(np.where(sigma > 0.0, sigma, 0.0), axis=-1)


def _argmax(landscape: np.ndarray) -> tuple[int, int]:
    best = np.max(landscape)
    flat = np.flatnonzero(landscape.ravel() >= best - TIE_TOL)[0]
    return np.unravel_index(flat, landscape.shape)


def maximize_pairs(coin: CoinParams = CoinParams(), noise: NoiseParams = FREE, T: int = 50,
                   grid: tuple[int, int] = (33, 64), nk: int | None = None) -> NonMarkovReport:
    """Grid search for the orthogonal pure pair with the largest ``N(T)``.

    Each grid point ``(gamma, phi)`` with ``gamma`` in ``[0, pi/2]`` is paired
    with its antipode.  Ties within ``TIE_TOL`` go to the smallest
    ``(gamma, phi)``.  The winning pair is re-run through
    :func:`pair_report`, so ``n_final`` is exactly its accumulated value.

    The Hadamard coin uses the k-space engine for any ``p``; other coins are
    only supported at ``p = 0`` through the position engine.
    """
    gammas, phis = search_grid(grid)
    if coin.is_hadamard:
        land = _landscape_kspace(gammas, phis, noise, T, nk)
        engine_kw = {"engine": "kspace", "nk": nk}
    elif noise.p == 0.0:
        land = np.empty((len(gammas), len(phis)))
        for i, g in enumerate(gammas):
            for j, f in enumerate(phis):
                a = CoinAngles(g, f)
                land[i, j] = pair_report(a, orthogonal_partner(a), coin, noise, T,
                                         engine="position").n_final
        engine_kw = {"engine": "position"}
    else:
        raise ValueError("p > 0 requires the Hadamard coin")
    i, j = _argmax(land)
    best = CoinAngles(gammas[i], phis[j])
    rep = pair_report(best, orthogonal_partner(best), coin, noise, T, **engine_kw)
    return NonMarkovReport(rep.sigma, rep.accumulated, rep.n_final, rep.argmax_pair,
                           rep.distances, land, gammas, phis)


def nmax_curve(p_values, coin: CoinParams = CoinParams(), T: int = 200,
               nk: int | None = None) -> list[tuple[float, float]]:
    """``N(T)`` for the pole pair at each breaking probability."""
    return [
        (float(p), pair_report(NORTH, SOUTH, coin, NoiseParams(p), T, nk=nk).n_final)
        for p in p_values
    ]


def reference_fit(p) -> np.ndarray:
    """Empirical fit ``7.32 / (1 + 150 p)`` for the pole-pair maximum at ``T = 200``."""
    return 7.32 / (1.0 + 150.0 * np.asarray(p, dtype=float))
