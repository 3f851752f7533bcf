import math

import numpy as np
import pytest

from chiralwalk import kspace, mc, walk
from chiralwalk.core import NORTH, SOUTH, CoinAngles, CoinParams, LatticeSizeError, bloch_from_angles
from chiralwalk.kspace import FREE, NoiseParams

H = CoinParams()
A = CoinAngles(1.1, 0.7)


def test_all_intact_step_is_free_step():
    s = walk.evolve(A, H, 4)
    got = mc.step_broken(s, H, mc.LinkConfig.all_intact(-10, 10))
    want = walk.step(s, H)
    assert got.origin_offset == want.origin_offset
    assert np.allclose(got.amps, want.amps, atol=1e-15)
    assert np.array_equal(mc.step_uniform(s, H, mc.LinkEvent.INTACT).amps, want.amps)


def test_all_broken_step_stays_and_swaps():
    s = walk.initial_state(NORTH)
    out = mc.step_broken(s, H, mc.LinkConfig.all_broken(-3, 3))
    r = 1 / math.sqrt(2)
    # coin sends |L> to (|L> + |R>)/sqrt2; both movers are blocked and flip
    assert out.amplitude(0) == pytest.approx((r, r))
    assert out.norm() == pytest.approx(1.0)
    assert out.support() == (0, 0)
    frozen = mc.step_uniform(s, H, mc.LinkEvent.FROZEN)
    assert np.allclose(frozen.amps, out.amps)


def test_link_config_lookup():
    cfg = mc.LinkConfig(-2, np.array([True, False, True]))
    assert cfg.is_broken(-2) and not cfg.is_broken(-1) and cfg.is_broken(0)
    assert not cfg.is_broken(7)


@pytest.mark.parametrize("rule", mc.RULES)
def test_norm_for_random_configurations(rule):
    rng = np.random.default_rng(0)
    for _ in range(1000):
        s = walk.evolve(CoinAngles(rng.uniform(0, math.pi), rng.uniform(0, 6)), H, int(rng.integers(0, 6)))
        if rule == "local":
            out = mc.step_broken(s, H, mc.LinkConfig(-7, rng.random(14) < rng.uniform()))
        else:
            out = mc.step_uniform(s, H, mc.LinkEvent(int(rng.integers(4))))
        assert abs(out.norm() - 1) < 1e-12


def test_event_sampling():
    assert np.allclose(mc.event_probabilities(0.3).sum(), 1.0)
    rng = np.random.default_rng(5)
    assert mc.sample_event(rng, FREE) == mc.LinkEvent.INTACT
    assert mc.sample_event(rng, NoiseParams(1.0)) == mc.LinkEvent.FROZEN
    links = mc.sample_links(rng, NoiseParams(0.5), 3)
    assert links.offset == -4 and len(links.broken) == 8


@pytest.mark.parametrize("rule", mc.RULES)
def test_trajectory_bit_matches_free_walk(rule):
    for seed in (0, 9):
        assert np.array_equal(mc.run_trajectory(A, H, FREE, 40, seed, rule=rule),
                              walk.chirality_series(A, H, 40))


@pytest.mark.parametrize("rule", mc.RULES)
def test_trajectory_is_deterministic(rule):
    x = mc.run_trajectory(A, H, NoiseParams(0.3), 30, 4, index=2, rule=rule)
    y = mc.run_trajectory(A, H, NoiseParams(0.3), 30, 4, index=2, rule=rule)
    z = mc.run_trajectory(A, H, NoiseParams(0.3), 30, 4, index=3, rule=rule)
    assert np.array_equal(x, y)
    assert not np.array_equal(x, z)


@pytest.mark.parametrize("rule", mc.RULES)
def test_frozen_walker_at_p_one(rule):
    rows = mc.run_trajectory(A, H, NoiseParams(1.0), 10, 1, rule=rule)
    assert np.allclose(rows[:, 0], 0.5)
    ens = mc.ensemble_full_density(A, H, NoiseParams(1.0), 6, 100, 1, rule=rule)
    diag = np.real(np.diag(ens)).reshape(-1, 2).sum(axis=1)
    assert diag[6] == pytest.approx(1.0)


def test_ensemble_without_noise_is_exact():
    est = mc.ensemble_chiral(A, H, FREE, 40, 150, seed=1, batch_size=64)
    assert np.all(est.stderr == 0)
    assert np.max(np.abs(est.mean - walk.chirality_series(A, H, 40))) < 1e-14
    assert est.density(40).is_valid(1e-12)


@pytest.mark.parametrize("rule", mc.RULES)
def test_ensemble_matches_individual_trajectories(rule):
    noise = NoiseParams(0.25)
    est = mc.ensemble_chiral(A, H, noise, 12, 100, seed=3, rule=rule, batch_size=33)
    mean = np.mean([mc.run_trajectory(A, H, noise, 12, 3, i, rule) for i in range(100)], axis=0)
    assert np.max(np.abs(est.mean - mean)) < 1e-14


def test_ensemble_preconditions():
    with pytest.raises(ValueError):
        mc.ensemble_chiral(A, H, FREE, 5, 50, 0)
    with pytest.raises(ValueError):
        mc.ensemble_chiral(A, H, FREE, 5, 100, 0, rule="bogus")


def test_stderr_scaling():
    noise = NoiseParams(0.1)
    small = mc.ensemble_chiral(A, H, noise, 20, 500, seed=8).stderr[20, 1:]
    big = mc.ensemble_chiral(A, H, noise, 20, 2000, seed=9).stderr[20, 1:]
    ratio = small / big
    assert np.all((ratio > 1.0) & (ratio < 4.0))


def test_partial_trace_linearity():
    noise = NoiseParams(0.2)
    full = mc.ensemble_full_density(A, H, noise, 15, 200, seed=2)
    m = full.shape[0] // 2
    chi = np.einsum("iaib->ab", full.reshape(m, 2, m, 2))
    mean = mc.ensemble_chiral(A, H, noise, 15, 200, seed=2).mean[15]
    assert chi[0, 0].real - chi[1, 1].real == pytest.approx(2 * mean[3], abs=1e-12)
    assert chi[0, 1] == pytest.approx(complex(mean[1], -mean[2]), abs=1e-12)
    assert np.trace(full).real == pytest.approx(1.0, abs=1e-12)


def _z_scores(est, exact):
    return np.abs(est.mean - exact) / np.maximum(est.stderr, 1e-300) * (np.abs(est.mean - exact) > 1e-12)


@pytest.mark.slow
def test_statistical_sweep_against_superoperator():
    excursions = 0
    for p in (0.02, 0.1, 0.3):
        noise = NoiseParams(p)
        est = mc.ensemble_chiral(A, H, noise, 100, 4000, seed=int(p * 1000))
        exact = kspace.kspace_series(bloch_from_angles(A), 100, noise)
        for t in (10, 50, 100):
            z = _z_scores(est, exact)[t]
            assert np.all(z <= 4)
            excursions += int(np.sum(z > 3))
    assert excursions <= 1


@pytest.mark.slow
def test_long_time_ensemble_is_maximally_mixed():
    est = mc.ensemble_chiral(A, H, NoiseParams(0.1), 300, 20000, seed=30)
    dev = np.abs(est.mean[300] - [0.5, 0, 0, 0])
    assert np.all(dev <= 3 * est.stderr[300] + 1e-12)


def test_local_rule_matches_its_exact_average():
    noise = NoiseParams(0.2)
    est = mc.ensemble_chiral(A, H, noise, 20, 6000, seed=4, rule="local")
    exact = mc.exact_local_series(A, H, noise, 20)
    assert np.all(_z_scores(est, exact)[[5, 10, 20]] <= 4)


def test_local_rule_departs_from_superoperator():
    noise = NoiseParams(0.05)
    loc = mc.exact_local_series(A, H, noise, 50)
    ks = kspace.kspace_series(bloch_from_angles(A), 50, noise)
    assert np.max(np.abs(loc - ks)) > 1e-3
    assert np.allclose(mc.exact_local_series(A, H, FREE, 30), walk.chirality_series(A, H, 30), atol=1e-13)


def test_exact_full_distance_contracts():
    for p in (0.05, 0.3):
        d = mc.exact_full_distance(NORTH, SOUTH, H, NoiseParams(p), 40).values
        assert d[0] == pytest.approx(1.0)
        assert np.all(np.diff(d) <= 1e-12)
    free = mc.exact_full_distance(NORTH, SOUTH, H, FREE, 30).values
    assert np.allclose(free, 1.0, atol=1e-12)


def test_full_distance_ordering_in_p():
    lo = mc.ensemble_full_distance(NORTH, SOUTH, H, NoiseParams(0.05), 50, 400, seed=1)
    hi = mc.ensemble_full_distance(NORTH, SOUTH, H, NoiseParams(0.3), 50, 400, seed=1)
    assert hi.values[50] < lo.values[50]


def test_full_distance_without_noise_is_one():
    d = mc.ensemble_full_distance(CoinAngles(0.4, 1.0), CoinAngles(math.pi - 0.4, 1.0 + math.pi),
                                  H, FREE, 25, 100, seed=0)
    assert np.allclose(d.values, 1.0, atol=1e-12)
    assert np.allclose(d.stderr, 0.0, atol=1e-10)


def test_full_distance_memory_chunking_is_invisible():
    kw = dict(t_max=20, n_traj=200, seed=6)
    a = mc.ensemble_full_distance(NORTH, SOUTH, H, NoiseParams(0.1), **kw)
    b = mc.ensemble_full_distance(NORTH, SOUTH, H, NoiseParams(0.1), memory_budget=200_000, **kw)
    assert np.allclose(a.values, b.values, atol=1e-13)
    assert np.allclose(a.stderr, b.stderr, atol=1e-13)


def test_full_state_cap():
    with pytest.raises(LatticeSizeError):
        mc.ensemble_full_distance(NORTH, SOUTH, H, FREE, 101, 100, 0)
    with pytest.raises(LatticeSizeError):
        mc.exact_full_distance(NORTH, SOUTH, H, FREE, 101)
