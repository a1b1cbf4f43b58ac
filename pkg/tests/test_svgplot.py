"""SVG rendering: polylines per scheme, markers, schema and empty-file errors."""

import re

import pytest

from lnn.svgplot import render_plot

MSE_HEADER = "scheme,horizon,mse,seed,scenario_hash\n"
SE_HEADER = "step,phase,scheme,se_bits_per_s_hz,seed\n"


def write_mse_csv(path, schemes=("ltc", "naive_hold")):
    lines = [MSE_HEADER]
    for s in schemes:
        for h in range(1, 6):
            lines.append(f"{s},{h},{0.01 * h},0,abc\n")
    path.write_text("".join(lines))
    return path


def write_se_csv(path, n_steps=1800, boundaries=(700, 1300)):
    lines = [SE_HEADER]
    for scheme in ("glnn", "wmmse"):
        for t in range(n_steps):
            phase = sum(t >= b for b in boundaries)
            lines.append(f"{t},{phase},{scheme},{10.0 + (t % 7) * 0.1},0\n")
    path.write_text("".join(lines))
    return path


def test_mse_plot_two_schemes_five_points(tmp_path):
    csv_p = write_mse_csv(tmp_path / "mse.csv")
    out = tmp_path / "mse.svg"
    render_plot(csv_p, "mse_vs_horizon", out)
    svg = out.read_text()
    polylines = re.findall(r'<polyline[^>]*points="([^"]+)"', svg)
    assert len(polylines) == 2
    for pts in polylines:
        assert len(pts.split()) == 5
    assert 'data-scheme="ltc"' in svg
    assert 'data-scheme="naive_hold"' in svg


def test_mse_plot_axis_labels_and_legend(tmp_path):
    csv_p = write_mse_csv(tmp_path / "mse.csv")
    out = tmp_path / "mse.svg"
    render_plot(csv_p, "mse_vs_horizon", out)
    svg = out.read_text()
    assert "prediction horizon (steps)" in svg
    assert "MSE" in svg
    assert ">ltc</text>" in svg
    assert ">naive_hold</text>" in svg


def test_se_plot_phase_markers(tmp_path):
    csv_p = write_se_csv(tmp_path / "se.csv")
    out = tmp_path / "se.svg"
    render_plot(csv_p, "se_vs_time", out)
    svg = out.read_text()
    assert 'data-step="700"' in svg
    assert 'data-step="1300"' in svg
    assert svg.count("phase-marker") == 2
    assert "sum SE (bits/s/Hz)" in svg


def test_se_plot_polyline_per_scheme(tmp_path):
    csv_p = write_se_csv(tmp_path / "se.csv", n_steps=100, boundaries=(40,))
    out = tmp_path / "se.svg"
    render_plot(csv_p, "se_vs_time", out)
    svg = out.read_text()
    assert svg.count("<polyline") == 2
    assert 'data-step="40"' in svg


def test_svg_is_standalone(tmp_path):
    csv_p = write_mse_csv(tmp_path / "mse.csv")
    out = tmp_path / "mse.svg"
    render_plot(csv_p, "mse_vs_horizon", out)
    svg = out.read_text()
    assert svg.startswith("<svg")
    assert svg.rstrip().endswith("</svg>")
    assert 'xmlns="http://www.w3.org/2000/svg"' in svg
    assert "href" not in svg  # no external references


def test_deterministic_bytes(tmp_path):
    csv_p = write_mse_csv(tmp_path / "mse.csv")
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    render_plot(csv_p, "mse_vs_horizon", a)
    render_plot(csv_p, "mse_vs_horizon", b)
    assert a.read_bytes() == b.read_bytes()


def test_empty_csv_errors_without_file(tmp_path):
    csv_p = tmp_path / "empty.csv"
    csv_p.write_text("")
    out = tmp_path / "o.svg"
    with pytest.raises(ValueError, match="empty"):
        render_plot(csv_p, "mse_vs_horizon", out)
    assert not out.exists()


def test_header_only_csv_errors_without_file(tmp_path):
    csv_p = tmp_path / "h.csv"
    csv_p.write_text(MSE_HEADER)
    out = tmp_path / "o.svg"
    with pytest.raises(ValueError, match="empty"):
        render_plot(csv_p, "mse_vs_horizon", out)
    assert not out.exists()


def test_schema_mismatch_names_missing_columns(tmp_path):
    csv_p = write_mse_csv(tmp_path / "mse.csv")
    out = tmp_path / "o.svg"
    with pytest.raises(ValueError, match="se_bits_per_s_hz"):
        render_plot(csv_p, "se_vs_time", out)
    assert not out.exists()


def test_unknown_kind_rejected(tmp_path):
    csv_p = write_mse_csv(tmp_path / "mse.csv")
    with pytest.raises(ValueError, match="kind"):
        render_plot(csv_p, "histogram", tmp_path / "o.svg")


def test_non_numeric_value_rejected(tmp_path):
    csv_p = tmp_path / "bad.csv"
    csv_p.write_text(MSE_HEADER + "ltc,one,0.1,0,abc\n")
    out = tmp_path / "o.svg"
    with pytest.raises(ValueError, match="non-numeric"):
        render_plot(csv_p, "mse_vs_horizon", out)
    assert not out.exists()
