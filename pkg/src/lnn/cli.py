"""Command line front end.

    lnn <gen|train-predict|eval-predict|run-bf|bench|plot>
        --config <path> [--seed N] [--out DIR]

Every run writes a JSON manifest beside its outputs before doing any work
(status "running", then "ok" or "failed"), so a crashed run is visible from
its artifacts alone. Given the same config and seed, every output byte is
reproducible except the manifest timestamps and measured benchmark times.

LNN_THREADS caps the BLAS thread pools; it must take effect before numpy
loads, which is why this module sets the environment at import time and the
package __init__ stays free of numpy imports.
"""

from __future__ import annotations

import os


def _cap_threads():
    n = os.environ.get("LNN_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS",
                    "VECLIB_MAXIMUM_THREADS"):
            os.environ.setdefault(var, n)


_cap_threads()

import argparse                                              # noqa: E402
import csv                                                   # noqa: E402
import json                                                  # noqa: E402
import sys                                                   # noqa: E402
from datetime import datetime, timezone                     # noqa: E402
from pathlib import Path                                     # noqa: E402

import numpy as np                                           # noqa: E402

from . import __version__                                    # noqa: E402
from .beamforming import run_glnn_experiment, summarize_trace  # noqa: E402
from .bench import bench_latency, report_rows                # noqa: E402
from .cells import make_cell                                 # noqa: E402
from .channel import beamforming_channel_sequence, prediction_csi  # noqa: E402
from .config import (ExperimentConfig, config_hash, parse_config,  # noqa: E402
                     scenario_hash)
from .persist import (load_checkpoint, save_checkpoint,      # noqa: E402
                      save_dataset)
from .prediction import (baseline_predict, evaluate_mse,     # noqa: E402
                         make_windows, train_predictor)
from .svgplot import render_plot                             # noqa: E402
from .wiring import WiringConfig, apply_masks, build_wiring  # noqa: E402

COMMANDS = ("gen", "train-predict", "eval-predict", "run-bf", "bench", "plot")

MSE_CSV = "mse_vs_horizon.csv"
SE_TRACE_CSV = "se_trace.csv"
SE_SUMMARY_CSV = "se_summary.csv"
BF_REPORT_JSON = "bf_report.json"
BENCH_CSV = "bench.csv"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_manifest(out_dir: Path, command: str, cfg, status: str,
                    started: str, finished: str | None = None):
    data = {
        "command": command,
        "config_sha256": config_hash(cfg),
        "seed": cfg.run.seed,
        "status": status,
        "started_at": started,
        "finished_at": finished,
        "versions": {"python": ".".join(map(str, sys.version_info[:3])),
                     "numpy": np.__version__, "lnn": __version__},
    }
    path = out_dir / f"manifest_{command}.json"
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _predict_dataset(cfg: ExperimentConfig):
    sc = cfg.prediction_scenario()
    csi = prediction_csi(sc)
    return make_windows(csi, l_h=cfg.train.l_history, l_p=cfg.train.l_predict,
                        train_fraction=cfg.train.train_fraction)


def _build_predictor(cfg: ExperimentConfig, kind: str, n_feats: int):
    m = cfg.model
    cell = make_cell(kind, n_feats, m.units, n_feats, seed=cfg.run.seed,
                     unfolds=m.unfolds)
    wiring = None
    if m.ncp and kind != "gru":
        wcfg = WiringConfig(n_sensory=n_feats, n_inter=m.n_inter,
                            n_command=m.n_command, n_motor=m.n_motor,
                            fanout_sensory=m.fanout_sensory,
                            fanout_inter=m.fanout_inter,
                            fanin_motor=m.fanin_motor,
                            n_command_recurrent=m.n_command_recurrent,
                            seed=cfg.run.seed)
        wiring = build_wiring(wcfg)
        apply_masks(wiring, cell)
    return cell, wiring


def _checkpoint_path(out_dir: Path, kind: str) -> Path:
    return out_dir / f"predictor_{kind}.ckpt"


def cmd_gen(cfg: ExperimentConfig, out_dir: Path):
    if cfg.run.task == "predict":
        sc = cfg.prediction_scenario()
        payload = prediction_csi(sc)
        name = "csi.bin"
    else:
        sc = cfg.beamforming_scenario()
        payload = beamforming_channel_sequence(sc).channels
        name = "channels.bin"
    save_dataset(out_dir / name, payload, seed=cfg.run.seed)
    print(f"wrote {out_dir / name} shape {payload.shape}")


def cmd_train_predict(cfg: ExperimentConfig, out_dir: Path):
    ds = _predict_dataset(cfg)
    n_feats = ds.featurizer.n_features
    hyper = cfg.train.hyper()
    kinds = [cfg.model.kind]
    if cfg.model.kind != "gru":
        kinds.append("gru")
    for kind in kinds:
        cell, wiring = _build_predictor(cfg, kind, n_feats)
        cell, curve = train_predictor(cell, ds, hyper=hyper, seed=cfg.run.seed)
        path = _checkpoint_path(out_dir, kind)
        save_checkpoint(path, cell, wiring=wiring)
        last = curve["val"][-1] if curve["val"] else float("nan")
        print(f"wrote {path} ({len(curve['train'])} epochs, "
              f"final val loss {last:.6g})")


def cmd_eval_predict(cfg: ExperimentConfig, out_dir: Path):
    ds = _predict_dataset(cfg)
    sc_hash = scenario_hash(cfg)
    seed = cfg.run.seed
    reports = []
    kinds = [cfg.model.kind]
    if cfg.model.kind != "gru":
        kinds.append("gru")
    for kind in kinds:
        path = _checkpoint_path(out_dir, kind)
        if not path.exists():
            raise FileNotFoundError(
                f"{path} not found; run train-predict first")
        cell, _ = load_checkpoint(path)
        reports.append(evaluate_mse(cell, ds, scheme=kind, seed=seed,
                                    scenario_hash=sc_hash,
                                    dt=cfg.train.dt_per_step))
    for scheme in ("naive_hold", "ar_ls"):
        preds = baseline_predict(scheme, ds, seed=seed)
        reports.append(evaluate_mse(preds, ds, scheme=scheme, seed=seed,
                                    scenario_hash=sc_hash))
    rows = []
    for rep in reports:
        for h, value in enumerate(rep.mse, start=1):
            rows.append([rep.scheme, h, float(value), seed, sc_hash])
    _write_csv(out_dir / MSE_CSV, ["scheme", "horizon", "mse", "seed",
                                   "scenario_hash"], rows)
    print(f"wrote {out_dir / MSE_CSV} ({len(rows)} rows)")


def cmd_run_bf(cfg: ExperimentConfig, out_dir: Path):
    sc = cfg.beamforming_scenario()
    trace = run_glnn_experiment(sc, cfg.glnn, seed=cfg.run.seed)
    rows = []
    for scheme in sorted(trace.se):
        arr = trace.se[scheme]
        for t in range(len(arr)):
            rows.append([t, int(trace.phase_index[t]), scheme,
                         float(arr[t]), cfg.run.seed])
    _write_csv(out_dir / SE_TRACE_CSV,
               ["step", "phase", "scheme", "se_bits_per_s_hz", "seed"], rows)

    report = summarize_trace(trace)
    phase_keys = [k for k in report["rows"][0] if k.startswith("phase")]
    header = ["scheme", "overall"] + phase_keys
    _write_csv(out_dir / SE_SUMMARY_CSV, header,
               [[row["scheme"], row["overall"]] + [row[k] for k in phase_keys]
                for row in report["rows"]])
    (out_dir / BF_REPORT_JSON).write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out_dir / SE_TRACE_CSV} ({len(rows)} rows)")
    if "tail_ratio" in report:
        lead = report["first_lead_step"]
        print(f"glnn tail-mean SE is {report['tail_ratio']:.4f} x wmmse; "
              + ("glnn surpasses wmmse over the tail window"
                 if report["surpasses_wmmse"] else
                 "glnn does not surpass wmmse over the tail window")
              + (f" (first cumulative lead at step {lead})"
                 if lead >= 0 else ""))


def cmd_bench(cfg: ExperimentConfig, out_dir: Path):
    reports = bench_latency(units=cfg.bench.units,
                            n_trials=cfg.bench.n_trials,
                            seed=cfg.run.seed,
                            time_training=cfg.bench.time_training)
    rows = report_rows(reports)
    header = list(rows[0])
    _write_csv(out_dir / BENCH_CSV, header,
               [[row[k] for k in header] for row in rows])
    for row in rows:
        print(f"{row['kind']:11s} step {row['step_us_median']:9.1f} us  "
              f"20-step {row['unroll20_us_median']:10.1f} us")
    print(f"wrote {out_dir / BENCH_CSV}")


def cmd_plot(cfg: ExperimentConfig, out_dir: Path):
    if cfg.run.task == "predict":
        src, kind = out_dir / MSE_CSV, "mse_vs_horizon"
    else:
        src, kind = out_dir / SE_TRACE_CSV, "se_vs_time"
    if not src.exists():
        raise FileNotFoundError(f"{src} not found; run the matching "
                                "eval command first")
    out = src.with_suffix(".svg")
    render_plot(src, kind, out)
    print(f"wrote {out}")


_DISPATCH = {
    "gen": cmd_gen,
    "train-predict": cmd_train_predict,
    "eval-predict": cmd_eval_predict,
    "run-bf": cmd_run_bf,
    "bench": cmd_bench,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lnn",
        description="continuous-time network benchmarks: CSI prediction "
                    "and online beamforming")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", default=None,
                        help="INI config path (defaults apply when omitted)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override [run] seed")
    parser.add_argument("--out", default=None,
                        help="override [run] out_dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is None:
            cfg = ExperimentConfig()
        else:
            cfg = parse_config(Path(args.config).read_text())
        if args.seed is not None:
            cfg.run.seed = args.seed
        if args.out is not None:
            cfg.run.out_dir = args.out
        cfg.validate()
    except (OSError, ValueError) as exc:
        print(f"lnn: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(cfg.run.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = _now()
    _write_manifest(out_dir, args.command, cfg, "running", started)
    try:
        _DISPATCH[args.command](cfg, out_dir)
    except Exception as exc:
        _write_manifest(out_dir, args.command, cfg, "failed", started, _now())
        print(f"lnn: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    _write_manifest(out_dir, args.command, cfg, "ok", started, _now())
    return 0


if __name__ == "__main__":
    sys.exit(main())
