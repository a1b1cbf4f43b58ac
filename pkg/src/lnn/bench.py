"""Latency benchmark: step and unrolled-forward timings across cell kinds.

All timings use the monotonic perf_counter clock. Every measurement runs 10
warm-up trials that are discarded, then n_trials timed trials; the report
carries mean, stdev, and median (medians resist scheduler noise). Training
wall-clock is measured end to end on a small CSI prediction task and
reported as seconds per epoch.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .cells import make_cell, unroll
from .channel import PredictionScenario, prediction_csi
from .prediction import PredictorHyper, make_windows, train_predictor

__all__ = ["TimingStats", "LatencyReport", "time_trials", "bench_latency",
           "report_rows", "BENCH_KINDS", "UNROLL_STEPS"]

# "ltc" is the fused solver at its 6-unfold default; "ltc-fused1" is the
# same solver forced to a single unfold, the cheapest integrator here
BENCH_KINDS = ("cfc", "ltc", "ltc-rk4", "gru", "ltc-fused1")
UNROLL_STEPS = 20
WARMUP_TRIALS = 10


@dataclass(frozen=True)
class TimingStats:
    mean_us: float
    std_us: float
    median_us: float


@dataclass(frozen=True)
class LatencyReport:
    kind: str
    units: int
    step: TimingStats
    unroll20: TimingStats
    train_s_per_epoch: float | None = None


def time_trials(fn, n_trials: int, warmup: int = WARMUP_TRIALS) -> TimingStats:
    """Time fn() n_trials times after discarding warmup runs; microseconds."""
    if n_trials < 30:
        raise ValueError(f"n_trials must be >= 30, got {n_trials}")
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(n_trials):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1e6)
    return TimingStats(mean_us=statistics.fmean(samples),
                       std_us=statistics.stdev(samples),
                       median_us=statistics.median(samples))


def _build(kind: str, units: int, n_feats: int, seed: int):
    if kind == "ltc-fused1":
        return make_cell("ltc", n_feats, units, n_feats, seed=seed, unfolds=1)
    return make_cell(kind, n_feats, units, n_feats, seed=seed)


def _train_seconds_per_epoch(kind: str, units: int, seed: int) -> float:
    sc = PredictionScenario(n_steps=400, seed=seed)
    csi = prediction_csi(sc)
    ds = make_windows(csi)
    n_feats = ds.featurizer.n_features
    cell = _build(kind, units, n_feats, seed)
    hyper = PredictorHyper(epochs=2, steps_per_epoch=10, batch=16, patience=99)
    t0 = time.perf_counter()
    train_predictor(cell, ds, hyper=hyper, seed=seed)
    return (time.perf_counter() - t0) / hyper.epochs


def bench_latency(units: int = 32, n_trials: int = 50, seed: int = 0,
                  time_training: bool = True,
                  kinds=BENCH_KINDS) -> list[LatencyReport]:
    """Latency report per cell kind at an equal unit count.

    Inference timings run without a tape (constants, no gradient bookkeeping)
    on a batch of one, the deployment shape for a per-interval predictor.
    """
    if n_trials < 30:
        raise ValueError(f"n_trials must be >= 30, got {n_trials}")
    n_feats = 8
    rng = np.random.default_rng(seed)
    reports = []
    for kind in kinds:
        cell = _build(kind, units, n_feats, seed)
        bd = cell.bind(None)
        h0 = Tensor(cell.zero_state(1))
        x = Tensor(rng.normal(size=(n_feats, 1)))
        xs = [Tensor(rng.normal(size=(n_feats, 1))) for _ in range(UNROLL_STEPS)]
        dts = [1.0] * UNROLL_STEPS

        step_stats = time_trials(lambda: cell.step(bd, h0, x, 1.0), n_trials)
        unroll_stats = time_trials(lambda: unroll(cell, bd, h0, xs, dts),
                                   n_trials)
        train_s = None
        if time_training:
            train_s = _train_seconds_per_epoch(kind, units, seed)
        reports.append(LatencyReport(kind=kind, units=units, step=step_stats,
                                     unroll20=unroll_stats,
                                     train_s_per_epoch=train_s))
    return reports


def report_rows(reports: list[LatencyReport]) -> list[dict]:
    """Flatten reports for CSV emission."""
    rows = []
    for r in reports:
        rows.append({
            "kind": r.kind,
            "units": r.units,
            "step_us_mean": r.step.mean_us,
            "step_us_std": r.step.std_us,
            "step_us_median": r.step.median_us,
            "unroll20_us_mean": r.unroll20.mean_us,
            "unroll20_us_std": r.unroll20.std_us,
            "unroll20_us_median": r.unroll20.median_us,
            "train_s_per_epoch": ("" if r.train_s_per_epoch is None
                                  else r.train_s_per_epoch),
        })
    return rows
