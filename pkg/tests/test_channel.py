"""Channel generators vs their physics oracles.

The Jakes autocorrelation oracle is scipy's Bessel J0 — an independent
route from the sum-of-sinusoids construction under test. Doppler values in
the frozen tests come straight from v * f_c / c with the exact speed of
light.
"""

from __future__ import annotations

import numpy as np
import pytest
from scipy.special import j0
from scipy.stats import mannwhitneyu

from lnn.channel import (BeamformingScenario, PredictionScenario,
                         beamforming_channel_sequence, doppler_frequency,
                         jakes_sequence, prediction_csi, random_walk,
                         steering_vector)


# ---------------------------------------------------------------------------
# doppler_frequency

def test_doppler_zero_speed():
    assert doppler_frequency(0.0, 6e9) == 0.0


def test_doppler_frozen_values():
    # 2 * 6e9 / 299792458 and 30 * 28e9 / 299792458
    assert abs(doppler_frequency(2.0, 6e9) - 40.02769) < 1e-4
    assert abs(doppler_frequency(30.0, 28e9) - 2801.938) < 1e-2


def test_doppler_negative_rejected():
    with pytest.raises(ValueError):
        doppler_frequency(-1.0, 6e9)


# ---------------------------------------------------------------------------
# random_walk

def test_walk_zero_speed_stays_put():
    pos = random_walk(50, 0.0, 1e-3, seed=3)
    assert np.all(pos == 0.0)


def test_walk_step_length_exact():
    pos = random_walk(200, 2.0, 1e-3, seed=5)
    d = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    assert np.max(np.abs(d - 2.0 * 1e-3)) < 1e-12


def test_walk_deterministic():
    a = random_walk(100, 1.5, 0.01, seed=11)
    b = random_walk(100, 1.5, 0.01, seed=11)
    assert np.array_equal(a, b)


def test_walk_needs_a_step():
    with pytest.raises(ValueError):
        random_walk(0, 1.0, 1e-3, seed=0)


# ---------------------------------------------------------------------------
# jakes_sequence

def test_jakes_zero_doppler_constant():
    g = jakes_sequence(0.0, 20, 1e-3, shape=(3,), seed=2)
    assert np.max(np.abs(g - g[0])) == 0.0


def test_jakes_unit_power():
    # 2000 coefficients x 50 steps = 1e5 samples
    g = jakes_sequence(40.0, 50, 1e-3, shape=(2000,), seed=7)
    power = np.mean(np.abs(g) ** 2)
    assert abs(power - 1.0) < 0.02


def test_jakes_autocorrelation_matches_bessel():
    fd, dt = 40.0277, 1e-3
    n_steps, n_coef = 80, 1500   # > 1e5 samples
    g = jakes_sequence(fd, n_steps, dt, shape=(n_coef,), seed=13)
    for lag in range(1, 51):
        est = np.mean(g[lag:] * np.conj(g[:-lag])).real
        ref = j0(2 * np.pi * fd * lag * dt)
        assert abs(est - ref) < 0.02, f"lag {lag}: {est:.4f} vs {ref:.4f}"


def test_jakes_deterministic():
    a = jakes_sequence(40.0, 30, 1e-3, shape=(4,), seed=21)
    b = jakes_sequence(40.0, 30, 1e-3, shape=(4,), seed=21)
    assert np.array_equal(a, b)


# ---------------------------------------------------------------------------
# steering_vector

def test_steering_broadside_all_ones():
    v = steering_vector(8, 0.5, 0.0)
    assert np.max(np.abs(v - 1.0)) == 0.0


def test_steering_unit_modulus():
    v = steering_vector(16, 0.5, 0.7)
    assert np.max(np.abs(np.abs(v) - 1.0)) < 1e-15


def test_steering_endfire_two_element():
    v = steering_vector(2, 0.5, np.pi / 2)
    assert abs(v[0] - 1.0) < 1e-12 and abs(v[1] + 1.0) < 1e-12


# ---------------------------------------------------------------------------
# beamforming channel

@pytest.fixture(scope="module")
def bf_seq():
    return beamforming_channel_sequence(BeamformingScenario(seed=5))


def test_bf_shapes_and_length(bf_seq):
    assert len(bf_seq) == 1800
    assert bf_seq.channels.shape == (1800, 4, 2, 64)
    assert np.array_equal(np.unique(bf_seq.phase_index), [0, 1, 2])


def test_bf_power_normalization(bf_seq):
    # E ||H_k||_F^2 = N_r * M = 128
    p = np.mean(np.sum(np.abs(bf_seq.channels) ** 2, axis=(2, 3)))
    assert abs(p - 128.0) / 128.0 < 0.05


def test_bf_per_phase_autocorrelation(bf_seq):
    sc = bf_seq.scenario
    start = 0
    for (speed, steps), _ in zip(sc.phases, range(3)):
        fd = doppler_frequency(speed, sc.carrier_hz)
        g = bf_seq.gains[start:start + steps]        # (steps, K, P)
        flat = g.reshape(steps, -1)
        for lag in range(1, 21):
            est = np.mean(flat[lag:] * np.conj(flat[:-lag])).real
            ref = j0(2 * np.pi * fd * lag * sc.sample_interval_s)
            assert abs(est - ref) < 0.05, (speed, lag, est, ref)
        start += steps


def test_bf_gain_continuity_at_boundaries(bf_seq):
    # step changes across each boundary vs within the entered phase;
    # a re-draw would be flagged at the 1% level instantly
    diffs = np.abs(np.diff(bf_seq.gains, axis=0)).reshape(1799, -1)
    boundaries = [700, 1300]
    spans = [(700, 1300), (1300, 1800)]
    for b, (lo, hi) in zip(boundaries, spans):
        at_boundary = diffs[b - 1]
        within = diffs[lo:hi - 1].ravel()
        stat = mannwhitneyu(at_boundary, within, alternative="two-sided")
        assert stat.pvalue > 0.01, f"boundary {b}: p={stat.pvalue:.4f}"


def test_bf_deterministic():
    a = beamforming_channel_sequence(BeamformingScenario(seed=9))
    b = beamforming_channel_sequence(BeamformingScenario(seed=9))
    assert np.array_equal(a.channels, b.channels)


def test_bf_invariants_enforced():
    with pytest.raises(ValueError):
        BeamformingScenario(phases=((6.0, 700), (15.0, 600))).validate()
    with pytest.raises(ValueError):
        BeamformingScenario(n_bs_antennas=4).validate()
    with pytest.raises(ValueError):
        BeamformingScenario(noise_power=0.0).validate()


# ---------------------------------------------------------------------------
# prediction scenario

def test_prediction_scenario_csi_shape():
    sc = PredictionScenario(n_steps=500, seed=4)
    csi = prediction_csi(sc)
    assert csi.shape == (500, 1, 4)
    assert abs(np.mean(np.abs(csi) ** 2) - 1.0) < 0.1


def test_prediction_scenario_guards():
    with pytest.raises(ValueError):
        PredictionScenario(speed_mps=-1.0).validate()
    with pytest.raises(ValueError):
        # normalized Doppler 0.1 cap: 2 m/s at 6 GHz needs dt < 2.5 ms
        PredictionScenario(sample_interval_s=5e-3).validate()
