"""End-to-end CLI runs on small configs: artifacts, manifests, reruns."""

import json
import subprocess
import sys

import pytest

from lnn.cli import main
from lnn.persist import load_dataset

PREDICT_INI = """\
[run]
task = predict
seed = 0

[prediction]
n_steps = 400

[model]
kind = ltc
units = 8

[train]
epochs = 1
steps_per_epoch = 2
batch = 8
"""

BF_INI = """\
[run]
task = beamform
seed = 0

[beamforming]
n_bs_antennas = 4
n_users = 2
n_user_antennas = 1
phases = 3:900,9:900

[glnn]
n_inner = 1
sensory_dim = 8
"""


def run_cli(args):
    return main(list(args))


def manifest(out_dir, command):
    return json.loads((out_dir / f"manifest_{command}.json").read_text())


@pytest.fixture(scope="module")
def predict_run(tmp_path_factory):
    """One trained-and-evaluated predict pipeline shared by several tests."""
    root = tmp_path_factory.mktemp("predict")
    cfg = root / "cfg.ini"
    cfg.write_text(PREDICT_INI)
    out = root / "out"
    for command in ("gen", "train-predict", "eval-predict", "plot"):
        code = run_cli([command, "--config", str(cfg), "--out", str(out)])
        assert code == 0, command
    return cfg, out


def test_gen_dataset_loadable(predict_run):
    _, out = predict_run
    csi, seed = load_dataset(out / "csi.bin")
    assert seed == 0
    assert csi.shape == (400, 1, 4)  # (steps, users, antennas)
    assert manifest(out, "gen")["status"] == "ok"


def test_train_writes_both_checkpoints(predict_run):
    _, out = predict_run
    assert (out / "predictor_ltc.ckpt").exists()
    assert (out / "predictor_gru.ckpt").exists()
    assert manifest(out, "train-predict")["status"] == "ok"


def test_eval_csv_five_rows_per_scheme(predict_run):
    _, out = predict_run
    lines = (out / "mse_vs_horizon.csv").read_text().strip().splitlines()
    assert lines[0].rstrip("\r") == "scheme,horizon,mse,seed,scenario_hash"
    body = [ln.rstrip("\r") for ln in lines[1:]]
    assert len(body) == 4 * 5
    schemes = {ln.split(",")[0] for ln in body}
    assert schemes == {"ltc", "gru", "naive_hold", "ar_ls"}
    for scheme in schemes:
        horizons = [int(ln.split(",")[1]) for ln in body
                    if ln.split(",")[0] == scheme]
        assert horizons == [1, 2, 3, 4, 5]


def test_csv_uses_crlf_line_endings(predict_run):
    _, out = predict_run
    raw = (out / "mse_vs_horizon.csv").read_bytes()
    assert b"\r\n" in raw


def test_plot_svg_written(predict_run):
    _, out = predict_run
    svg = (out / "mse_vs_horizon.svg").read_text()
    assert svg.count("<polyline") == 4
    assert manifest(out, "plot")["status"] == "ok"


def test_manifest_fields(predict_run):
    _, out = predict_run
    m = manifest(out, "eval-predict")
    assert m["command"] == "eval-predict"
    assert m["seed"] == 0
    assert len(m["config_sha256"]) == 64
    assert set(m["versions"]) == {"python", "numpy", "lnn"}
    assert m["started_at"] <= m["finished_at"]


def test_eval_rerun_byte_identical(predict_run):
    cfg, out = predict_run
    before = (out / "mse_vs_horizon.csv").read_bytes()
    assert run_cli(["eval-predict", "--config", str(cfg),
                    "--out", str(out)]) == 0
    assert (out / "mse_vs_horizon.csv").read_bytes() == before


def test_seed_override_changes_hash(predict_run, tmp_path):
    cfg, out = predict_run
    base_hash = (out / "mse_vs_horizon.csv").read_text().splitlines()[1].split(",")[-1]
    out2 = tmp_path / "seeded"
    assert run_cli(["train-predict", "--config", str(cfg), "--seed", "1",
                    "--out", str(out2)]) == 0
    assert run_cli(["eval-predict", "--config", str(cfg), "--seed", "1",
                    "--out", str(out2)]) == 0
    seeded = (out2 / "mse_vs_horizon.csv").read_text().splitlines()[1]
    assert seeded.split(",")[-1] != base_hash
    assert seeded.split(",")[3] == "1"


def test_bad_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[prediction]\nvelocity = 2\n")
    code = run_cli(["gen", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "velocity" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_missing_config_file_exits_2(tmp_path, capsys):
    code = run_cli(["gen", "--config", str(tmp_path / "nope.ini")])
    assert code == 2
    assert "lnn:" in capsys.readouterr().err


def test_eval_without_checkpoints_fails_with_manifest(tmp_path, capsys):
    cfg = tmp_path / "cfg.ini"
    cfg.write_text(PREDICT_INI)
    out = tmp_path / "out"
    code = run_cli(["eval-predict", "--config", str(cfg), "--out", str(out)])
    assert code == 1
    assert "train-predict" in capsys.readouterr().err
    assert manifest(out, "eval-predict")["status"] == "failed"


def test_plot_without_csv_fails(tmp_path, capsys):
    out = tmp_path / "out"
    code = run_cli(["plot", "--out", str(out)])
    assert code == 1
    assert manifest(out, "plot")["status"] == "failed"


def test_unknown_command_exits_2():
    with pytest.raises(SystemExit) as exc:
        run_cli(["dance"])
    assert exc.value.code == 2


def test_bench_command(tmp_path):
    cfg = tmp_path / "cfg.ini"
    cfg.write_text("[bench]\nn_trials = 30\nunits = 4\ntime_training = false\n")
    out = tmp_path / "out"
    assert run_cli(["bench", "--config", str(cfg), "--out", str(out)]) == 0
    lines = (out / "bench.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 5  # header + one row per benched kind
    assert lines[0].rstrip("\r").startswith("kind,units,step_us_mean")


def test_run_bf_trace_and_summary(tmp_path):
    cfg = tmp_path / "cfg.ini"
    cfg.write_text(BF_INI)
    out = tmp_path / "out"
    assert run_cli(["run-bf", "--config", str(cfg), "--out", str(out)]) == 0

    lines = (out / "se_trace.csv").read_text().strip().splitlines()
    assert lines[0].rstrip("\r") == "step,phase,scheme,se_bits_per_s_hz,seed"
    body = [ln.rstrip("\r").split(",") for ln in lines[1:]]
    assert len(body) == 4 * 1800
    per_scheme = {}
    for row in body:
        per_scheme.setdefault(row[2], []).append(row)
    assert set(per_scheme) == {"glnn", "wmmse", "mrt", "zf"}
    for scheme, rows in per_scheme.items():
        assert len(rows) == 1800, scheme
    phase_of = {int(r[0]): int(r[1]) for r in per_scheme["glnn"]}
    assert phase_of[899] == 0 and phase_of[900] == 1

    summary = (out / "se_summary.csv").read_text().strip().splitlines()
    assert summary[0].rstrip("\r") == "scheme,overall,phase0,phase1"
    assert len(summary) == 1 + 4

    report = json.loads((out / "bf_report.json").read_text())
    assert "tail_ratio" in report
    assert isinstance(report["surpasses_wmmse"], bool)

    assert run_cli(["plot", "--config", str(cfg), "--out", str(out)]) == 0
    svg = (out / "se_trace.svg").read_text()
    assert 'data-step="900"' in svg
    assert svg.count("<polyline") == 4


def test_lnn_threads_caps_blas_env():
    code = ("import lnn.cli, os; "
            "print(os.environ['OMP_NUM_THREADS'], "
            "os.environ['OPENBLAS_NUM_THREADS'])")
    proc = subprocess.run([sys.executable, "-c", code],
                          env={"PATH": "/usr/bin:/bin", "LNN_THREADS": "3"},
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.split() == ["3", "3"]


def test_console_entry_point_help():
    proc = subprocess.run([sys.executable, "-m", "lnn.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for command in ("gen", "train-predict", "eval-predict", "run-bf",
                    "bench", "plot"):
        assert command in proc.stdout
