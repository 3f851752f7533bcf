"""Broken-link trajectories in position space and their ensemble averages.

Two microscopic rules are available.

``"uniform"`` (default)
    Each step draws one link pattern for the whole lattice: every link intact
    with probability ``(1-p)**2``, every link broken with probability ``p**2``,
    and with probability ``p(1-p)`` each either all right-hand or all left-hand
    links broken.  With both sides broken the walker stays put and its
    chirality is swapped.  With one side broken the component facing the
    broken side stays while the other hops; the two are then recombined by a
    balanced beam splitter whose sign depends on the broken side.  Every
    realisation is a translation-invariant unitary, and the ensemble average
    of the reduced coin state coincides with the k-space broken-link
    superoperator at every step (Hadamard coin).

``"local"``
    Every link is broken independently with probability ``p`` each step.  A
    mover whose link is broken stays on its site with its chirality flipped.
    This is the textbook per-link picture.  Its ensemble average matches the
    k-space superoperator at ``p = 0``, at ``p = 1`` and after one step, but
    not in general; :func:`exact_local_series` gives its exact average.

Randomness is drawn from one Philox stream per trajectory, keyed by
``SeedSequence(seed, spawn_key=(index,))``, so any trajectory can be
regenerated on its own and ensemble results do not depend on batching.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import _kernels
from .core import (
    BlochVector,
    ChiralDensity,
    CoinAngles,
    CoinParams,
    DistanceSeries,
    LatticeSizeError,
    density_from_bloch,
)
from .kspace import NoiseParams
from .walk import WalkerState, bloch_row

RULES = ("uniform", "local")
MIN_TRAJECTORIES = 100
FULL_STATE_MAX_T = 100
FULL_MEMORY_BUDGET = 256 * 2**20


class LinkEvent(IntEnum):
    INTACT = _kernels.EVENT_INTACT
    FROZEN = _kernels.EVENT_FROZEN
    RIGHT_BROKEN = _kernels.EVENT_RIGHT_BROKEN
    LEFT_BROKEN = _kernels.EVENT_LEFT_BROKEN


@dataclass(frozen=True, eq=False)
class LinkConfig:
    """Broken flags for links ``(x, x+1)`` with ``x = offset, offset+1, ...``.

    Links outside the stored range count as intact.
    """

    offset: int
    broken: np.ndarray

    def is_broken(self, x: int) -> bool:
        i = x - self.offset
        return bool(0 <= i < len(self.broken) and self.broken[i])

    @classmethod
    def all_intact(cls, lo: int, hi: int) -> "LinkConfig":
        return cls(lo, np.zeros(hi - lo, dtype=bool))

    @classmethod
    def all_broken(cls, lo: int, hi: int) -> "LinkConfig":
        return cls(lo, np.ones(hi - lo, dtype=bool))


@dataclass(frozen=True, eq=False)
class EnsembleEstimate:
    """Trajectory means of the coin Bloch rows, ``(T+1, 4)``, with standard errors."""

    mean: np.ndarray
    stderr: np.ndarray
    n_traj: int
    seed: int

    def density(self, t: int) -> ChiralDensity:
        return density_from_bloch(BlochVector.from_array(self.mean[t]))


def _check_rule(rule: str):
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}; expected one of {RULES}")


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def event_probabilities(p: float) -> np.ndarray:
    q = p * (1.0 - p)
    return np.array([(1.0 - p) ** 2, p * p, q, q])


def _events_from_uniforms(u: np.ndarray, p: float) -> np.ndarray:
    cum = np.cumsum(event_probabilities(p))
    cum[-1] = 1.0
    return np.searchsorted(cum, u, side="right").astype(np.int8)


def sample_event(rng: np.random.Generator, noise: NoiseParams) -> LinkEvent:
    return LinkEvent(int(_events_from_uniforms(rng.random(1), noise.p)[0]))


def sample_links(rng: np.random.Generator, noise: NoiseParams, t: int) -> LinkConfig:
    """Links that can matter on the step ``t -> t+1`` from a point source."""
    return LinkConfig(-t - 1, rng.random(2 * t + 2) < noise.p)


def _draw_trajectory(rng: np.random.Generator, p: float, t_max: int, rule: str):
    if rule == "uniform":
        return _events_from_uniforms(rng.random(t_max), p)
    u = rng.random((t_max + 1) ** 2 - 1) if t_max > 0 else np.empty(0)
    return u < p


def _cone_slices(t_max: int):
    """For step t (0-based) in a [-t_max, t_max] window: site slice and link offsets."""
    for t in range(t_max):
        lo = t_max - t - 1
        yield t, slice(lo, t_max + t + 2), t * t + 2 * t, 2 * t + 2


# ---------------------------------------------------------------------------
# single steps on WalkerState
# ---------------------------------------------------------------------------

def _padded(state: WalkerState):
    n = len(state.amps)
    a = np.zeros((1, n + 2), dtype=complex)
    b = np.zeros((1, n + 2), dtype=complex)
    a[0, 1:-1] = state.a
    b[0, 1:-1] = state.b
    return a, b


def step_broken(state: WalkerState, coin: CoinParams, links: LinkConfig) -> WalkerState:
    """Per-link rule: coin everywhere, then each mover crosses its link or stays flipped."""
    a, b = _padded(state)
    x0 = state.origin_offset - 1
    intact = np.array([[not links.is_broken(x0 + j) for j in range(a.shape[1] - 1)]])
    na, nb = np.empty_like(a), np.empty_like(b)
    _kernels.impl.local_step(a, b, intact, math.cos(coin.theta), math.sin(coin.theta), na, nb)
    return WalkerState(x0, np.stack([na[0], nb[0]], axis=1))


def step_uniform(state: WalkerState, coin: CoinParams, event: LinkEvent) -> WalkerState:
    """Uniform rule: apply one lattice-wide link pattern."""
    a, b = _padded(state)
    na, nb = np.empty_like(a), np.empty_like(b)
    _kernels.impl.uniform_step(a, b, np.array([int(event)], dtype=np.int8),
                               math.cos(coin.theta), math.sin(coin.theta), na, nb)
    return WalkerState(state.origin_offset - 1, np.stack([na[0], nb[0]], axis=1))


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

def run_trajectory(angles: CoinAngles, coin: CoinParams, noise: NoiseParams, t_max: int,
                   seed: int, index: int = 0, rule: str = "uniform") -> np.ndarray:
    """Reduced coin state along one realisation, ``(t_max+1, 4)`` Bloch rows.

    Uses the same ``[-t_max, t_max]`` window and step kernel as
    :func:`chiralwalk.walk.chirality_series`, so a realisation without any
    broken link reproduces it bit for bit.
    """
    _check_rule(rule)
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    draws = _draw_trajectory(trajectory_rng(seed, index), noise.p, t_max, rule)
    n = 2 * t_max + 1
    a = np.zeros(n, dtype=complex)
    b = np.zeros(n, dtype=complex)
    a[t_max], b[t_max] = angles.spinor()
    na, nb = np.empty_like(a), np.empty_like(b)
    c, s = math.cos(coin.theta), math.sin(coin.theta)
    k = _kernels.impl
    out = np.empty((t_max + 1, 4))
    out[0] = bloch_row(a, b)
    for t, _, off, nl in _cone_slices(t_max):
        if rule == "uniform":
            ev = draws[t]
            if ev == _kernels.EVENT_INTACT:
                k.free_step(a, b, c, s, na, nb)
            else:
                k.uniform_step(a[None], b[None], draws[t:t + 1], c, s, na[None], nb[None])
        else:
            broken = draws[off:off + nl]
            if not broken.any():
                k.free_step(a, b, c, s, na, nb)
            else:
                intact = np.ones(n - 1, dtype=bool)
                intact[t_max - t - 1: t_max + t + 1] = ~broken
                k.local_step(a, b, intact, c, s, na, nb)
        a, na = na, a
        b, nb = nb, b
        out[t + 1] = bloch_row(a, b)
    return out


def _batch_states(angles_list, coin, p, t_max, seed, indices, rule):
    """Evolve a batch of trajectories for each initial state with shared randomness.

    Yields ``(t, states)`` for ``t = 0..t_max`` where ``states`` is a list of
    ``(a, b)`` pairs (one per initial angle) restricted to sites ``[-t, t]``.
    """
    n = 2 * t_max + 1
    nb_traj = len(indices)
    draws = [_draw_trajectory(trajectory_rng(seed, int(i)), p, t_max, rule) for i in indices]
    draws = np.stack(draws) if draws else np.empty((0, t_max))
    c, s = math.cos(coin.theta), math.sin(coin.theta)
    k = _kernels.impl
    bufs = []
    for angles in angles_list:
        a = np.zeros((nb_traj, n), dtype=complex)
        b = np.zeros((nb_traj, n), dtype=complex)
        sp = angles.spinor()
        a[:, t_max], b[:, t_max] = sp[0], sp[1]
        bufs.append([a, b, np.zeros_like(a), np.zeros_like(b)])
    yield 0, [(buf[0][:, t_max:t_max + 1], buf[1][:, t_max:t_max + 1]) for buf in bufs]
    for t, sl, off, nl in _cone_slices(t_max):
        if rule == "local":
            intact = ~draws[:, off:off + nl]
        for buf in bufs:
            a, b, na, nb = buf
            if rule == "uniform":
                k.uniform_step(a[:, sl], b[:, sl], draws[:, t], c, s, na[:, sl], nb[:, sl])
            else:
                k.local_step(a[:, sl], b[:, sl], intact, c, s, na[:, sl], nb[:, sl])
            buf[:] = [na, nb, a, b]
        cur = slice(t_max - t - 1, t_max + t + 2)
        yield t + 1, [(buf[0][:, cur], buf[1][:, cur]) for buf in bufs]


def _batches(n_traj: int, batch_size: int):
    for lo in range(0, n_traj, batch_size):
        yield np.arange(lo, min(n_traj, lo + batch_size))


def ensemble_chiral(angles: CoinAngles, coin: CoinParams, noise: NoiseParams, t_max: int,
                    n_traj: int, seed: int, rule: str = "uniform",
                    batch_size: int = 2048) -> EnsembleEstimate:
    """Trajectory-averaged coin Bloch rows with componentwise standard errors."""
    _check_rule(rule)
    if n_traj < MIN_TRAJECTORIES:
        raise ValueError(f"n_traj must be at least {MIN_TRAJECTORIES}")
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    shift = None
    s1 = np.zeros((t_max + 1, 4))
    s2 = np.zeros((t_max + 1, 4))
    for idx in _batches(n_traj, batch_size):
        for t, [(a, b)] in _batch_states([angles], coin, noise.p, t_max, seed, idx, rule):
            rows = bloch_row(a, b)
            if shift is None:
                shift = np.empty((t_max + 1, 4))
            if idx[0] == 0:
                shift[t] = rows[0]
            dev = rows - shift[t]
            s1[t] += dev.sum(axis=0)
            s2[t] += (dev * dev).sum(axis=0)
    mean = shift + s1 / n_traj
    var = np.maximum(s2 - s1 * s1 / n_traj, 0.0) / (n_traj - 1)
    return EnsembleEstimate(mean, np.sqrt(var / n_traj), n_traj, seed)


# ---------------------------------------------------------------------------
# full (position x coin) density matrices
# ---------------------------------------------------------------------------

def _flat(a, b):
    return np.stack([a, b], axis=-1).reshape(a.shape[0], -1)


def _time_chunks(t_max: int, n_groups: int, budget: int):
    chunk, used = [], 0
    for t in range(t_max + 1):
        cost = n_groups * (2 * (2 * t + 1)) ** 2 * 16
        if chunk and used + cost > budget:
            yield chunk
            chunk, used = [], 0
        chunk.append(t)
        used += cost
    if chunk:
        yield chunk


def _half_trace_norm(h: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(h))))


def ensemble_full_density(angles: CoinAngles, coin: CoinParams, noise: NoiseParams, t_max: int,
                          n_traj: int, seed: int, rule: str = "uniform",
                          batch_size: int = 1024) -> np.ndarray:
    """Trajectory-averaged full density matrix at ``t_max`` on sites ``[-t_max, t_max]``.

    Basis order is ``(site, chirality)`` with chirality fastest.
    """
    _check_rule(rule)
    if t_max > FULL_STATE_MAX_T:
        raise LatticeSizeError(f"full density matrices are capped at t <= {FULL_STATE_MAX_T}")
    m = 2 * (2 * t_max + 1)
    acc = np.zeros((m, m), dtype=complex)
    for idx in _batches(n_traj, batch_size):
        for t, [(a, b)] in _batch_states([angles], coin, noise.p, t_max, seed, idx, rule):
            if t == t_max:
                psi = _flat(a, b)
                acc += psi.T @ psi.conj()
    return acc / n_traj


def ensemble_full_distance(a1: CoinAngles, a2: CoinAngles, coin: CoinParams, noise: NoiseParams,
                           t_max: int, n_traj: int, seed: int, rule: str = "uniform",
                           n_groups: int = 10, batch_size: int = 1024,
                           memory_budget: int = FULL_MEMORY_BUDGET) -> DistanceSeries:
    """Trace distance between the ensemble-averaged full density matrices.

    Both initial states see the same link realisations.  Standard errors are
    delete-one-group jackknife estimates over ``n_groups`` contiguous blocks of
    trajectories, for the distances and for their step-to-step increments.
    Time is processed in chunks sized to ``memory_budget``; trajectories are
    regenerated for each chunk from their seeds.
    """
    _check_rule(rule)
    if t_max > FULL_STATE_MAX_T:
        raise LatticeSizeError(f"full density matrices are capped at t <= {FULL_STATE_MAX_T}")
    if n_traj < MIN_TRAJECTORIES:
        raise ValueError(f"n_traj must be at least {MIN_TRAJECTORIES}")
    groups = np.arange(n_traj) * n_groups // n_traj
    group_sizes = np.bincount(groups, minlength=n_groups)
    values = np.empty(t_max + 1)
    jack = np.empty((n_groups, t_max + 1))
    for chunk in _time_chunks(t_max, n_groups, memory_budget):
        acc = {t: np.zeros((n_groups, 2 * (2 * t + 1), 2 * (2 * t + 1)), dtype=complex)
               for t in chunk}
        last = chunk[-1]
        for idx in _batches(n_traj, batch_size):
            gidx = groups[idx]
            for t, [(x1, y1), (x2, y2)] in _batch_states([a1, a2], coin, noise.p, last, seed,
                                                         idx, rule):
                if t not in acc:
                    continue
                p1, p2 = _flat(x1, y1), _flat(x2, y2)
                for g in np.unique(gidx):
                    rows = gidx == g
                    acc[t][g] += p1[rows].T @ p1[rows].conj() - p2[rows].T @ p2[rows].conj()
        for t in chunk:
            total = acc[t].sum(axis=0)
            values[t] = _half_trace_norm(total / n_traj)
            for g in range(n_groups):
                jack[g, t] = _half_trace_norm((total - acc[t][g]) / (n_traj - group_sizes[g]))
    scale = (n_groups - 1) / n_groups
    stderr = np.sqrt(scale * np.sum((jack - jack.mean(axis=0)) ** 2, axis=0))
    inc = np.diff(jack, axis=1)
    inc_stderr = np.sqrt(scale * np.sum((inc - inc.mean(axis=0)) ** 2, axis=0))
    return DistanceSeries(values, stderr, inc_stderr)


# ---------------------------------------------------------------------------
# exact ensemble averages (oracles)
# ---------------------------------------------------------------------------

def _uniform_apply_rows(x: np.ndarray, code: int, c: float, s: float) -> np.ndarray:
    """Apply one uniform-rule step unitary to every row of ``x`` (rows are flat states)."""
    n_rows = x.shape[0]
    a = np.ascontiguousarray(x[:, 0::2])
    b = np.ascontiguousarray(x[:, 1::2])
    na, nb = np.empty_like(a), np.empty_like(b)
    _kernels.impl.uniform_step(a, b, np.full(n_rows, code, dtype=np.int8), c, s, na, nb)
    return _flat(na, nb)


def _uniform_channel(rho: np.ndarray, p: float, c: float, s: float) -> np.ndarray:
    out = np.zeros_like(rho)
    for code, w in enumerate(event_probabilities(p)):
        if w == 0.0:
            continue
        left = _uniform_apply_rows(rho.T, code, c, s).T
        out += w * _uniform_apply_rows(left.conj(), code, c, s).conj()
    return out


def _coin_trace(rho: np.ndarray) -> np.ndarray:
    m = rho.shape[0] // 2
    return np.einsum("iaib->ab", rho.reshape(m, 2, m, 2))


def _row_from_coin(chi: np.ndarray) -> np.ndarray:
    return np.array([
        0.5 * (chi[0, 0].real + chi[1, 1].real),
        chi[0, 1].real,
        -chi[0, 1].imag,
        0.5 * (chi[0, 0].real - chi[1, 1].real),
    ])


def _point_density(angles: CoinAngles, t_max: int) -> np.ndarray:
    psi = np.zeros((2 * t_max + 1, 2), dtype=complex)
    psi[t_max] = angles.spinor()
    psi = psi.reshape(-1)
    return np.outer(psi, psi.conj())


def exact_uniform_series(angles: CoinAngles, coin: CoinParams, noise: NoiseParams,
                         t_max: int) -> np.ndarray:
    """Exact uniform-rule ensemble average of the coin state, ``(t_max+1, 4)`` rows."""
    if t_max > FULL_STATE_MAX_T:
        raise LatticeSizeError(f"full density matrices are capped at t <= {FULL_STATE_MAX_T}")
    c, s = math.cos(coin.theta), math.sin(coin.theta)
    rho = _point_density(angles, t_max)
    out = np.empty((t_max + 1, 4))
    out[0] = _row_from_coin(_coin_trace(rho))
    for t in range(1, t_max + 1):
        rho = _uniform_channel(rho, noise.p, c, s)
        out[t] = _row_from_coin(_coin_trace(rho))
    return out


def exact_full_distance(a1: CoinAngles, a2: CoinAngles, coin: CoinParams, noise: NoiseParams,
                        t_max: int) -> DistanceSeries:
    """Exact full-state trace distance under the uniform rule (no sampling)."""
    if t_max > FULL_STATE_MAX_T:
        raise LatticeSizeError(f"full density matrices are capped at t <= {FULL_STATE_MAX_T}")
    c, s = math.cos(coin.theta), math.sin(coin.theta)
    delta = _point_density(a1, t_max) - _point_density(a2, t_max)
    values = np.empty(t_max + 1)
    values[0] = _half_trace_norm(delta)
    for t in range(1, t_max + 1):
        delta = _uniform_channel(delta, noise.p, c, s)
        lo = 2 * (t_max - t)
        hi = 2 * (t_max + t + 1)
        values[t] = _half_trace_norm(delta[lo:hi, lo:hi])
    return DistanceSeries(values)


def exact_local_series(angles: CoinAngles, coin: CoinParams, noise: NoiseParams,
                       t_max: int) -> np.ndarray:
    """Exact per-link-rule ensemble average of the coin state, ``(t_max+1, 4)`` rows.

    Tracks ``C_d = sum_x rho[(x+d, s), (x, s')]``, which the translation-invariant
    averaged channel maps linearly onto itself.  Two movers share a link, and so
    see correlated link states, when both are the same chirality at ``d = 0``,
    or a left-mover sits one site right of a right-mover.
    """
    p = noise.p
    kc = coin.matrix()
    big = 2 * t_max + 4
    nd = 2 * big + 1
    d = np.arange(nd) - big
    cmat = np.zeros((nd, 2, 2), dtype=complex)
    sp = angles.spinor()
    cmat[big] = np.outer(sp, sp.conj())
    # (move, new chirality) for intact / broken, indexed by chirality 0=L, 1=R
    moves = {(0, True): (-1, 0), (1, True): (1, 1), (0, False): (0, 1), (1, False): (0, 0)}
    shared = {(0, 0): d == 0, (1, 1): d == 0, (0, 1): d == 1, (1, 0): d == -1}
    out = np.empty((t_max + 1, 4))
    out[0] = _row_from_coin(cmat[big])
    for t in range(1, t_max + 1):
        cmat = np.einsum("ab,dbc,ec->dae", kc, cmat, kc)
        new = np.zeros_like(cmat)
        for s1 in (0, 1):
            for s2 in (0, 1):
                corr = shared[(s1, s2)]
                weights = {
                    (True, True): np.where(corr, 1.0 - p, (1.0 - p) ** 2),
                    (False, False): np.where(corr, p, p * p),
                    (True, False): np.where(corr, 0.0, p * (1.0 - p)),
                    (False, True): np.where(corr, 0.0, p * (1.0 - p)),
                }
                src = cmat[:, s1, s2]
                for (i1, i2), w in weights.items():
                    m1, n1 = moves[(s1, i1)]
                    m2, n2 = moves[(s2, i2)]
                    shift = m1 - m2
                    contrib = w * src
                    if shift >= 0:
                        new[shift:, n1, n2] += contrib[:nd - shift]
                    else:
                        new[:shift, n1, n2] += contrib[-shift:]
        cmat = new
        out[t] = _row_from_coin(cmat[big])
    return out
