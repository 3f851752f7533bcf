import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chiralwalk.core import (
    MAXIMALLY_MIXED,
    NORTH,
    SOUTH,
    BlochVector,
    ChiralDensity,
    CoinAngles,
    CoinParams,
    DistanceSeries,
    bloch_from_angles,
    bloch_from_density,
    density_from_bloch,
    densities_from_rows,
    orthogonal_partner,
    row_distances,
    trace_distance,
)

gammas = st.floats(0, math.pi)
phis = st.floats(-10, 10)
angles = st.builds(CoinAngles, gammas, phis)


def test_angle_validation():
    with pytest.raises(ValueError):
        CoinAngles(-0.1)
    with pytest.raises(ValueError):
        CoinAngles(3.2)
    with pytest.raises(ValueError):
        CoinParams(2.0)
    assert CoinAngles(1.0, -math.pi / 2).phi == pytest.approx(1.5 * math.pi)
    assert CoinAngles(1.0, 2 * math.pi).phi == 0.0


def test_coin_matrix_is_unitary_and_hermitian():
    for theta in (0.0, 0.3, math.pi / 4, math.pi / 2):
        k = CoinParams(theta).matrix()
        assert np.allclose(k @ k, np.eye(2))
        assert np.allclose(k, k.T)
    assert CoinParams().is_hadamard
    assert not CoinParams(0.3).is_hadamard


@given(angles)
def test_spinor_matches_bloch_vector(a):
    psi = a.spinor()
    assert np.linalg.norm(psi) == pytest.approx(1.0)
    rho = np.outer(psi, psi.conj())
    r = bloch_from_angles(a)
    assert r.r0 == 0.5
    assert r.radius == pytest.approx(0.5)
    d = density_from_bloch(r)
    assert np.allclose(d.matrix(), rho, atol=1e-12)


@given(angles)
def test_bloch_density_round_trip(a):
    r = bloch_from_angles(a)
    back = bloch_from_density(density_from_bloch(r))
    assert np.allclose(back.as_array(), r.as_array(), atol=1e-15)


def test_density_from_bloch_rejects_wrong_trace():
    with pytest.raises(ValueError):
        density_from_bloch(BlochVector(0.4, 0, 0, 0))


def test_density_validity():
    assert MAXIMALLY_MIXED.is_valid()
    assert ChiralDensity(1, 0, 0).is_valid()
    assert not ChiralDensity(0.5, 0.5, 0.6).is_valid()
    assert not ChiralDensity(0.7, 0.7, 0).is_valid()


def test_poles():
    assert np.allclose(NORTH.spinor(), [1, 0])
    assert np.allclose(SOUTH.spinor(), [0, 1])
    assert trace_distance(density_from_bloch(bloch_from_angles(NORTH)),
                          density_from_bloch(bloch_from_angles(SOUTH))) == pytest.approx(1.0)


@given(angles)
def test_orthogonal_partner_is_antipodal(a):
    b = orthogonal_partner(a)
    assert abs(np.vdot(a.spinor(), b.spinor())) < 1e-12
    ra, rb = bloch_from_angles(a), bloch_from_angles(b)
    assert trace_distance(density_from_bloch(ra), density_from_bloch(rb)) == pytest.approx(1.0)


def _rand_state(rng):
    v = rng.normal(size=3)
    v *= 0.5 * rng.uniform() / np.linalg.norm(v)
    return density_from_bloch(BlochVector(0.5, *v))


def test_trace_distance_matches_eigenvalues():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x, y = _rand_state(rng), _rand_state(rng)
        ev = np.linalg.eigvalsh(x.matrix() - y.matrix())
        assert trace_distance(x, y) == pytest.approx(0.5 * np.abs(ev).sum(), abs=1e-14)


@given(angles, angles, angles)
def test_trace_distance_is_a_metric(a, b, c):
    x, y, z = (density_from_bloch(bloch_from_angles(s)) for s in (a, b, c))
    assert trace_distance(x, x) == 0.0
    assert trace_distance(x, y) == pytest.approx(trace_distance(y, x))
    assert 0.0 <= trace_distance(x, y) <= 1.0 + 1e-12
    assert trace_distance(x, z) <= trace_distance(x, y) + trace_distance(y, z) + 1e-12


def test_row_distances_vectorised():
    rng = np.random.default_rng(1)
    states = [_rand_state(rng) for _ in range(10)]
    rows = np.array([bloch_from_density(s).as_array() for s in states])
    d = row_distances(rows[:5], rows[5:])
    for i in range(5):
        assert d[i] == pytest.approx(trace_distance(states[i], states[5 + i]), abs=1e-15)
    assert len(densities_from_rows(rows)) == 10


def test_distance_series_validation():
    assert DistanceSeries([1.0, 0.5]).t_max == 1
    with pytest.raises(ValueError):
        DistanceSeries([1.5])
    with pytest.raises(ValueError):
        DistanceSeries([])
