"""Hand-rolled SVG line plots for the two result CSVs.

No imaging dependency: the output is a standalone SVG document with one
polyline per scheme, labeled axes, a legend, and (for the time plot)
vertical markers where the velocity phase changes. Every failure mode
raises before any file is opened, so a bad CSV never leaves a partial plot
behind. Output bytes are a pure function of the CSV content.
"""

from __future__ import annotations

import csv

__all__ = ["render_plot", "PLOT_KINDS"]

PLOT_KINDS = ("mse_vs_horizon", "se_vs_time")

_SCHEMAS = {
    "mse_vs_horizon": {"scheme", "horizon", "mse"},
    "se_vs_time": {"step", "phase", "scheme", "se_bits_per_s_hz"},
}

_AXES = {
    "mse_vs_horizon": ("prediction horizon (steps)", "MSE"),
    "se_vs_time": ("time step", "sum SE (bits/s/Hz)"),
}

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
            "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")

# plot box in pixels; legend sits in the right margin
_W, _H = 640, 420
_L, _R, _T, _B = 70, 160, 30, 50


def _read_rows(csv_path, kind):
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{csv_path}: empty CSV, nothing to plot")
        have = set(reader.fieldnames)
        need = _SCHEMAS[kind]
        if not need <= have:
            missing = ", ".join(sorted(need - have))
            raise ValueError(
                f"{csv_path}: CSV schema does not match {kind} "
                f"(missing columns: {missing})")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{csv_path}: empty CSV, nothing to plot")
    return rows


def _series(rows, kind):
    """scheme -> list of (x, y) sorted by x; plus phase-change steps."""
    xcol, ycol = (("horizon", "mse") if kind == "mse_vs_horizon"
                  else ("step", "se_bits_per_s_hz"))
    by_scheme: dict[str, list] = {}
    for row in rows:
        try:
            x = float(row[xcol])
            y = float(row[ycol])
        except (TypeError, ValueError):
            raise ValueError(
                f"non-numeric {xcol}/{ycol} value in row {row!r}") from None
        by_scheme.setdefault(row["scheme"], []).append((x, y))
    for pts in by_scheme.values():
        pts.sort()

    markers = []
    if kind == "se_vs_time":
        first = min(by_scheme)
        seen = {}
        for row in rows:
            if row["scheme"] != first:
                continue
            seen[int(row["step"])] = row["phase"]
        prev = None
        for step in sorted(seen):
            if prev is not None and seen[step] != prev:
                markers.append(step)
            prev = seen[step]
    return by_scheme, markers


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _fmt(v) -> str:
    return f"{v:g}"


def render_plot(csv_path, kind, out_path):
    """Render a result CSV to a standalone SVG file."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}, expected {PLOT_KINDS}")
    rows = _read_rows(csv_path, kind)
    by_scheme, markers = _series(rows, kind)

    xs = [x for pts in by_scheme.values() for x, _ in pts]
    ys = [y for pts in by_scheme.values() for _, y in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    pad = 0.05 * (y_hi - y_lo) or max(abs(y_hi), 1.0) * 0.05
    y_lo, y_hi = y_lo - pad, y_hi + pad

    plot_w = _W - _L - _R
    plot_h = _H - _T - _B

    def px(x):
        return _L + plot_w * (x - x_lo) / (x_hi - x_lo)

    def py(y):
        return _T + plot_h * (1.0 - (y - y_lo) / (y_hi - y_lo))

    xlabel, ylabel = _AXES[kind]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_L}" y="{_T}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#333"/>',
    ]

    for tx in _ticks(x_lo, x_hi):
        x = px(tx)
        parts.append(f'<line x1="{x:.2f}" y1="{_T + plot_h}" x2="{x:.2f}" '
                     f'y2="{_T + plot_h + 5}" stroke="#333"/>')
        parts.append(f'<text x="{x:.2f}" y="{_T + plot_h + 18}" '
                     f'text-anchor="middle">{_fmt(tx)}</text>')
    for ty in _ticks(y_lo, y_hi):
        y = py(ty)
        parts.append(f'<line x1="{_L - 5}" y1="{y:.2f}" x2="{_L}" '
                     f'y2="{y:.2f}" stroke="#333"/>')
        parts.append(f'<text x="{_L - 8}" y="{y + 4:.2f}" '
                     f'text-anchor="end">{_fmt(ty)}</text>')

    parts.append(f'<text x="{_L + plot_w / 2:.2f}" y="{_H - 12}" '
                 f'text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="16" y="{_T + plot_h / 2:.2f}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {_T + plot_h / 2:.2f})">'
                 f'{ylabel}</text>')

    for step in markers:
        x = px(step)
        parts.append(f'<line class="phase-marker" data-step="{step}" '
                     f'x1="{x:.2f}" y1="{_T}" x2="{x:.2f}" '
                     f'y2="{_T + plot_h}" stroke="#999" '
                     'stroke-dasharray="4 3"/>')

    legend_x = _L + plot_w + 16
    for i, scheme in enumerate(sorted(by_scheme)):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in by_scheme[scheme])
        parts.append(f'<polyline data-scheme="{scheme}" points="{pts}" '
                     f'fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = _T + 14 + 18 * i
        parts.append(f'<line x1="{legend_x}" y1="{ly - 4}" '
                     f'x2="{legend_x + 22}" y2="{ly - 4}" stroke="{color}" '
                     'stroke-width="1.5"/>')
        parts.append(f'<text x="{legend_x + 28}" y="{ly}">{scheme}</text>')

    parts.append("</svg>")
    svg = "\n".join(parts) + "\n"
    with open(out_path, "w") as fh:
        fh.write(svg)
    return out_path
