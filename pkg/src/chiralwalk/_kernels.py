"""Hot inner loops, each available as a numba kernel and as a plain numpy twin.

The active backend is picked once at import: numba when it imports cleanly,
unless ``CHIRALWALK_DISABLE_NUMBA`` is set to a truthy value.  Both backends
expose the same callables with the same in-place conventions, so callers only
ever touch :data:`impl`.

Array conventions
-----------------
Walker amplitudes live in two complex arrays ``a`` (left chirality) and ``b``
(right chirality) indexed by lattice site along the last axis.  Batched
kernels take ``(n_traj, n_sites)`` arrays.  Kernels never wrap around: the
caller must size the lattice window so the causal cone fits inside it.

Uniform-rule event codes (one per trajectory per step):

    0  all links intact          normal shift
    1  all links broken          stay, chirality swapped
    2  right-hand links broken   right-movers stay, left-movers hop, then mix
    3  left-hand links broken    left-movers stay, right-movers hop, then mix
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

DISABLE_ENV = "CHIRALWALK_DISABLE_NUMBA"

EVENT_INTACT = 0
EVENT_FROZEN = 1
EVENT_RIGHT_BROKEN = 2
EVENT_LEFT_BROKEN = 3

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


# ----------------------------------------------------------------------------
# numpy backend
# ----------------------------------------------------------------------------

def _free_step_np(a, b, c, s, out_a, out_b):
    out_a[..., :-1] = c * a[..., 1:] + s * b[..., 1:]
    out_a[..., -1] = 0.0
    out_b[..., 1:] = s * a[..., :-1] - c * b[..., :-1]
    out_b[..., 0] = 0.0


def _uniform_step_np(a, b, events, c, s, out_a, out_b):
    cl = c * a + s * b
    cr = s * a - c * b
    for code in range(4):
        rows = np.flatnonzero(events == code)
        if rows.size == 0:
            continue
        if code == EVENT_INTACT:
            ar, br = a[rows], b[rows]
            na = np.zeros_like(ar)
            nb = np.zeros_like(br)
            na[:, :-1] = c * ar[:, 1:] + s * br[:, 1:]
            nb[:, 1:] = s * ar[:, :-1] - c * br[:, :-1]
        elif code == EVENT_FROZEN:
            na = cr[rows]
            nb = cl[rows]
        elif code == EVENT_RIGHT_BROKEN:
            hop = np.zeros_like(cl[rows])
            hop[:, :-1] = cl[rows, 1:]
            stay = cr[rows]
            na = (hop - stay) * _INV_SQRT2
            nb = (hop + stay) * _INV_SQRT2
        else:
            hop = np.zeros_like(cr[rows])
            hop[:, 1:] = cr[rows, :-1]
            stay = cl[rows]
            na = (stay - hop) * _INV_SQRT2
            nb = -(stay + hop) * _INV_SQRT2
        out_a[rows] = na
        out_b[rows] = nb


def _local_step_np(a, b, intact, c, s, out_a, out_b):
    # intact[..., j] is the link between window sites j and j+1
    cl = c * a + s * b
    cr = s * a - c * b
    out_a[..., :-1] = np.where(intact, cl[..., 1:], cr[..., :-1])
    out_a[..., -1] = 0.0
    out_b[..., 1:] = np.where(intact, cr[..., :-1], cl[..., 1:])
    out_b[..., 0] = 0.0


def _propagator_mean_np(m, t_max):
    nk = m.shape[0]
    out = np.empty((t_max + 1, 3, 3))
    p = np.broadcast_to(np.eye(3), (nk, 3, 3)).copy()
    out[0] = np.eye(3)
    for t in range(1, t_max + 1):
        p = np.matmul(m, p)
        out[t] = p.mean(axis=0)
    return out


NUMPY = SimpleNamespace(
    name="numpy",
    free_step=_free_step_np,
    uniform_step=_uniform_step_np,
    local_step=_local_step_np,
    propagator_mean=_propagator_mean_np,
)


# ----------------------------------------------------------------------------
# numba backend
# ----------------------------------------------------------------------------

def _build_numba():
    import numba

    njit = numba.njit(cache=True, nogil=True)

    @njit
    def free_step_1d(a, b, c, s, out_a, out_b):
        n = a.shape[0]
        for j in range(n - 1):
            out_a[j] = c * a[j + 1] + s * b[j + 1]
        out_a[n - 1] = 0.0
        out_b[0] = 0.0
        for j in range(1, n):
            out_b[j] = s * a[j - 1] - c * b[j - 1]

    @njit
    def free_step_2d(a, b, c, s, out_a, out_b):
        for i in range(a.shape[0]):
            free_step_1d(a[i], b[i], c, s, out_a[i], out_b[i])

    def free_step(a, b, c, s, out_a, out_b):
        if a.ndim == 1:
            free_step_1d(a, b, c, s, out_a, out_b)
        else:
            free_step_2d(a, b, c, s, out_a, out_b)

    @njit
    def uniform_step(a, b, events, c, s, out_a, out_b):
        n_traj, n = a.shape
        r = _INV_SQRT2
        for i in range(n_traj):
            ev = events[i]
            if ev == 0:
                for j in range(n - 1):
                    out_a[i, j] = c * a[i, j + 1] + s * b[i, j + 1]
                out_a[i, n - 1] = 0.0
                out_b[i, 0] = 0.0
                for j in range(1, n):
                    out_b[i, j] = s * a[i, j - 1] - c * b[i, j - 1]
            elif ev == 1:
                for j in range(n):
                    out_a[i, j] = s * a[i, j] - c * b[i, j]
                    out_b[i, j] = c * a[i, j] + s * b[i, j]
            elif ev == 2:
                for j in range(n):
                    stay = s * a[i, j] - c * b[i, j]
                    if j + 1 < n:
                        hop = c * a[i, j + 1] + s * b[i, j + 1]
                    else:
                        hop = 0.0j
                    out_a[i, j] = (hop - stay) * r
                    out_b[i, j] = (hop + stay) * r
            else:
                for j in range(n):
                    stay = c * a[i, j] + s * b[i, j]
                    if j >= 1:
                        hop = s * a[i, j - 1] - c * b[i, j - 1]
                    else:
                        hop = 0.0j
                    out_a[i, j] = (stay - hop) * r
                    out_b[i, j] = -(stay + hop) * r

    @njit
    def local_step_2d(a, b, intact, c, s, out_a, out_b):
        n_traj, n = a.shape
        for i in range(n_traj):
            for j in range(n - 1):
                if intact[i, j]:
                    out_a[i, j] = c * a[i, j + 1] + s * b[i, j + 1]
                    out_b[i, j + 1] = s * a[i, j] - c * b[i, j]
                else:
                    out_a[i, j] = s * a[i, j] - c * b[i, j]
                    out_b[i, j + 1] = c * a[i, j + 1] + s * b[i, j + 1]
            out_a[i, n - 1] = 0.0
            out_b[i, 0] = 0.0

    def local_step(a, b, intact, c, s, out_a, out_b):
        if a.ndim == 1:
            local_step_2d(a[None], b[None], intact[None], c, s, out_a[None], out_b[None])
        else:
            local_step_2d(a, b, intact, c, s, out_a, out_b)

    @njit
    def propagator_mean(m, t_max):
        nk = m.shape[0]
        acc = np.zeros((t_max + 1, 3, 3))
        p = np.empty((3, 3))
        q = np.empty((3, 3))
        for k in range(nk):
            for i in range(3):
                for j in range(3):
                    p[i, j] = 1.0 if i == j else 0.0
            for t in range(1, t_max + 1):
                for i in range(3):
                    for j in range(3):
                        q[i, j] = m[k, i, 0] * p[0, j] + m[k, i, 1] * p[1, j] + m[k, i, 2] * p[2, j]
                for i in range(3):
                    for j in range(3):
                        p[i, j] = q[i, j]
                        acc[t, i, j] += q[i, j]
        for t in range(1, t_max + 1):
            for i in range(3):
                for j in range(3):
                    acc[t, i, j] /= nk
        for i in range(3):
            acc[0, i, i] = 1.0
        return acc

    return SimpleNamespace(
        name="numba",
        free_step=free_step,
        uniform_step=uniform_step,
        local_step=local_step,
        propagator_mean=propagator_mean,
    )


def _numba_requested():
    return os.environ.get(DISABLE_ENV, "").strip().lower() in ("", "0", "false", "no")


try:
    NUMBA = _build_numba()
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA = None

impl = NUMBA if (NUMBA is not None and _numba_requested()) else NUMPY


def select(name: str) -> SimpleNamespace:
    """Switch the active backend (``"numba"`` or ``"numpy"``) and return it."""
    global impl
    if name == "numba":
        if NUMBA is None:
            raise RuntimeError("numba backend is unavailable")
        impl = NUMBA
    elif name == "numpy":
        impl = NUMPY
    else:
        raise ValueError(f"unknown backend {name!r}")
    return impl
