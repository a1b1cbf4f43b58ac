"""Synthetic wireless channels for the two case studies.

Fading follows the Jakes model: each coefficient is a sum of N sinusoids
with random arrival angles and phases, giving a unit-power complex process
with autocorrelation J0(2 pi f_D tau). The beamforming channel is geometric:
fixed path angles per episode, per-path gains evolving as Jakes processes
whose Doppler follows the three-phase velocity schedule. Gains advance by
accumulating per-sinusoid phase increments, so a velocity change at a phase
boundary never re-draws the process — the trajectory stays continuous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact

N_SINUSOIDS = 64          # jakes_sequence
# The beamformer tests average over only K * n_paths = 12 gain processes, so
# each process carries many more sinusoids to pin its own autocorrelation to
# the Jakes spectrum.
N_PATH_SINUSOIDS = 512

__all__ = [
    "SPEED_OF_LIGHT", "PredictionScenario", "BeamformingScenario",
    "ChannelSequence", "doppler_frequency", "random_walk", "jakes_sequence",
    "steering_vector", "beamforming_channel_sequence", "prediction_csi",
]


@dataclass
class PredictionScenario:
    carrier_hz: float = 6e9
    n_bs_antennas: int = 4
    n_users: int = 1
    n_user_antennas: int = 1
    antenna_spacing: float = 0.5   # wavelengths
    speed_mps: float = 2.0
    sample_interval_s: float = 1e-3
    n_steps: int = 20000
    seed: int = 0

    def validate(self):
        for name in ("carrier_hz", "n_bs_antennas", "n_users",
                     "n_user_antennas", "antenna_spacing", "speed_mps",
                     "sample_interval_s", "n_steps"):
            v = getattr(self, name)
            if v is None or v <= 0:
                raise ValueError(f"{name} must be positive, got {v}")
        fd = doppler_frequency(self.speed_mps, self.carrier_hz)
        if fd * self.sample_interval_s >= 0.1:
            raise ValueError(
                f"normalized Doppler {fd * self.sample_interval_s:.3f} >= 0.1; "
                "shorten the sample interval")

    def doppler_hz(self):
        return doppler_frequency(self.speed_mps, self.carrier_hz)


@dataclass
class BeamformingScenario:
    carrier_hz: float = 28e9
    n_bs_antennas: int = 64
    n_users: int = 4
    n_user_antennas: int = 2
    antenna_spacing: float = 0.5
    phases: tuple = ((6.0, 700), (15.0, 600), (30.0, 500))
    sample_interval_s: float = 0.5e-3
    n_paths: int = 3
    power_budget: float = 1.0
    # mean per-user SNR (P/K) * M / sigma^2 = 10 dB at the defaults
    noise_power: float = 1.6
    seed: int = 0

    def validate(self):
        for name in ("carrier_hz", "n_bs_antennas", "n_users",
                     "n_user_antennas", "antenna_spacing",
                     "sample_interval_s", "n_paths", "power_budget",
                     "noise_power"):
            v = getattr(self, name)
            if v is None or v <= 0:
                raise ValueError(f"{name} must be positive, got {v}")
        if sum(steps for _, steps in self.phases) != 1800:
            raise ValueError("phase step counts must sum to 1800")
        if any(speed <= 0 or steps <= 0 for speed, steps in self.phases):
            raise ValueError("phase speeds and step counts must be positive")
        if self.n_bs_antennas < self.n_users * self.n_user_antennas:
            raise ValueError("need M >= K * N_r for the stream layout")

    @property
    def n_steps(self):
        return sum(steps for _, steps in self.phases)


def doppler_frequency(speed_mps, carrier_hz) -> float:
    if speed_mps < 0 or carrier_hz < 0:
        raise ValueError("speed and carrier must be non-negative")
    return speed_mps * carrier_hz / SPEED_OF_LIGHT


def random_walk(n_steps, speed_mps, dt, seed) -> np.ndarray:
    """2-D positions, meters, starting at the origin; (n_steps, 2)."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=n_steps - 1)
    steps = speed_mps * dt * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    pos = np.zeros((n_steps, 2))
    if n_steps > 1:
        np.cumsum(steps, axis=0, out=pos[1:])
    return pos


def jakes_sequence(doppler_hz, n_steps, dt, shape=(), seed=0) -> np.ndarray:
    """Independent unit-power Jakes processes; complex128 (n_steps, *shape)."""
    if doppler_hz < 0:
        raise ValueError("doppler_hz must be >= 0")
    rng = np.random.default_rng(seed)
    size = int(np.prod(shape)) if shape else 1
    n = N_SINUSOIDS
    alpha = rng.uniform(0.0, 2.0 * np.pi, size=(size, n))
    phi = rng.uniform(0.0, 2.0 * np.pi, size=(size, n))
    omega = 2.0 * np.pi * doppler_hz * np.cos(alpha)   # rad/s per sinusoid

    out = np.empty((n_steps, size), dtype=np.complex128)
    scale = 1.0 / math.sqrt(n)
    block = max(1, int(2e6) // max(size * n, 1))
    for start in range(0, n_steps, block):
        stop = min(start + block, n_steps)
        t = (np.arange(start, stop) * dt)[:, None, None]
        arg = t * omega[None, :, :] + phi[None, :, :]
        out[start:stop] = np.exp(1j * arg).sum(axis=2) * scale
    return out.reshape((n_steps,) + tuple(shape))


def steering_vector(m, spacing_wavelengths, angle_rad) -> np.ndarray:
    if m < 1:
        raise ValueError("array size must be >= 1")
    phase = 2.0 * np.pi * spacing_wavelengths * np.sin(angle_rad)
    return np.exp(1j * phase * np.arange(m))


@dataclass
class ChannelSequence:
    """Per-step channel sets plus the underlying path gains.

    channels[t, k] is user k's N_r x M matrix at step t; phase_index[t] is
    the active schedule phase; gains[t, k, p] the path-gain processes the
    continuity and autocorrelation checks look at.
    """

    channels: np.ndarray
    gains: np.ndarray
    phase_index: np.ndarray
    scenario: BeamformingScenario

    def __len__(self):
        return self.channels.shape[0]


def beamforming_channel_sequence(sc: BeamformingScenario) -> ChannelSequence:
    sc.validate()
    rng = np.random.default_rng(sc.seed)
    k_users, n_r, m, p_paths = (sc.n_users, sc.n_user_antennas,
                                sc.n_bs_antennas, sc.n_paths)
    n_steps = sc.n_steps

    # episode geometry: fixed departure/arrival angles per (user, path)
    aod = rng.uniform(-np.pi / 2, np.pi / 2, size=(k_users, p_paths))
    aoa = rng.uniform(-np.pi / 2, np.pi / 2, size=(k_users, p_paths))
    outer = np.empty((k_users, p_paths, n_r, m), dtype=np.complex128)
    for k in range(k_users):
        for p in range(p_paths):
            a_rx = steering_vector(n_r, sc.antenna_spacing, aoa[k, p])
            a_tx = steering_vector(m, sc.antenna_spacing, aod[k, p])
            outer[k, p] = np.outer(a_rx, a_tx.conj())

    # sinusoid banks for every (user, path) gain process
    n_sin = N_PATH_SINUSOIDS
    cos_alpha = np.cos(rng.uniform(0, 2 * np.pi, size=(k_users, p_paths, n_sin)))
    psi = rng.uniform(0, 2 * np.pi, size=(k_users, p_paths, n_sin))

    phase_index = np.empty(n_steps, dtype=np.int64)
    pos = 0
    for idx, (_, steps) in enumerate(sc.phases):
        phase_index[pos:pos + steps] = idx
        pos += steps
    dopplers = [doppler_frequency(speed, sc.carrier_hz) for speed, _ in sc.phases]

    gains = np.empty((n_steps, k_users, p_paths), dtype=np.complex128)
    scale = 1.0 / math.sqrt(n_sin)
    for t in range(n_steps):
        if t > 0:
            # the increment into step t uses the Doppler active at t
            w = 2.0 * np.pi * dopplers[phase_index[t]]
            psi = psi + w * cos_alpha * sc.sample_interval_s
        gains[t] = np.exp(1j * psi).sum(axis=2) * scale

    channels = np.einsum("tkp,kprm->tkrm", gains, outer) / math.sqrt(p_paths)
    return ChannelSequence(channels=channels, gains=gains,
                           phase_index=phase_index, scenario=sc)


def prediction_csi(sc: PredictionScenario) -> np.ndarray:
    """CSI tensor (n_steps, n_user_antennas, n_bs_antennas) for the
    single-user prediction scenario."""
    sc.validate()
    return jakes_sequence(sc.doppler_hz(), sc.n_steps, sc.sample_interval_s,
                          shape=(sc.n_user_antennas, sc.n_bs_antennas),
                          seed=sc.seed)
