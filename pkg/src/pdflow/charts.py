"""Minimal static SVG line charts.

Charts are rendered from the emitted CSV files only, never from in-memory
state, so toggling them cannot perturb the numeric artifacts.  No plotting
dependency: the SVG is assembled directly (polyline per series, decade ticks
on log axes).
"""

from __future__ import annotations

import math
from pathlib import Path

__all__ = ["render_line_chart", "read_csv_columns", "write_run_charts", "write_compare_charts"]

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 70, 20, 34, 52
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def read_csv_columns(path) -> dict[str, list[float]]:
    lines = Path(path).read_text().strip().splitlines()
    names = lines[0].split(",")
    cols: dict[str, list[float]] = {n: [] for n in names}
    for line in lines[1:]:
        for name, cell in zip(names, line.split(",")):
            cols[name].append(float(cell))
    return cols


def _ticks_linear(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-12 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks or [lo, hi]


def _ticks_log(lo, hi):
    ticks = []
    d = math.floor(math.log10(lo))
    while 10.0**d <= hi * (1 + 1e-12):
        if 10.0**d >= lo * (1 - 1e-12):
            ticks.append(10.0**d)
        d += 1
    return ticks or [lo, hi]


def _fmt_tick(v):
    if v == 0.0:
        return "0"
    e = math.log10(abs(v))
    if abs(e) >= 4:
        return f"{v:.0e}"
    return f"{v:g}"


def render_line_chart(series, title="", xlabel="", ylabel="",
                      xlog=False, ylog=False) -> str:
    """series: iterable of (label, xs, ys).  Returns SVG text."""
    pts = []
    for _, xs, ys in series:
        for x, y in zip(xs, ys):
            if math.isfinite(x) and math.isfinite(y):
                if (xlog and x <= 0.0) or (ylog and y <= 0.0):
                    continue
                pts.append((x, y))
    if not pts:
        pts = [(1.0, 1.0), (2.0, 2.0)]
    xs_all = [p[0] for p in pts]
    ys_all = [p[1] for p in pts]
    xlo, xhi = min(xs_all), max(xs_all)
    ylo, yhi = min(ys_all), max(ys_all)
    if xlo == xhi:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if ylo == yhi:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    if not ylog:
        pad = 0.05 * (yhi - ylo)
        ylo, yhi = ylo - pad, yhi + pad

    def sx(x):
        if xlog:
            f = (math.log10(x) - math.log10(xlo)) / (math.log10(xhi) - math.log10(xlo))
        else:
            f = (x - xlo) / (xhi - xlo)
        return _ML + f * (_W - _ML - _MR)

    def sy(y):
        if ylog:
            f = (math.log10(y) - math.log10(ylo)) / (math.log10(yhi) - math.log10(ylo))
        else:
            f = (y - ylo) / (yhi - ylo)
        return _H - _MB - f * (_H - _MT - _MB)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]
    xticks = _ticks_log(xlo, xhi) if xlog else _ticks_linear(xlo, xhi)
    yticks = _ticks_log(ylo, yhi) if ylog else _ticks_linear(ylo, yhi)
    for tv in xticks:
        px = sx(tv)
        out.append(f'<line x1="{px:.1f}" y1="{_MT}" x2="{px:.1f}" y2="{_H - _MB}" '
                   'stroke="#dddddd" stroke-width="1"/>')
        out.append(f'<text x="{px:.1f}" y="{_H - _MB + 16}" text-anchor="middle">{_fmt_tick(tv)}</text>')
    for tv in yticks:
        py = sy(tv)
        out.append(f'<line x1="{_ML}" y1="{py:.1f}" x2="{_W - _MR}" y2="{py:.1f}" '
                   'stroke="#dddddd" stroke-width="1"/>')
        out.append(f'<text x="{_ML - 6}" y="{py + 4:.1f}" text-anchor="end">{_fmt_tick(tv)}</text>')
    out.append(f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" height="{_H - _MT - _MB}" '
               'fill="none" stroke="#333333"/>')
    out.append(f'<text x="{_W / 2:.1f}" y="{_H - 12}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{_H / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {_H / 2:.1f})">{ylabel}</text>')

    legend_y = _MT + 14
    for i, (label, xs, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        coords = []
        for x, y in zip(xs, ys):
            if not (math.isfinite(x) and math.isfinite(y)):
                continue
            if (xlog and x <= 0.0) or (ylog and y <= 0.0):
                continue
            coords.append(f"{sx(x):.2f},{sy(y):.2f}")
        if coords:
            out.append(f'<polyline points="{" ".join(coords)}" fill="none" '
                       f'stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<line x1="{_W - _MR - 150}" y1="{legend_y}" x2="{_W - _MR - 126}" '
                   f'y2="{legend_y}" stroke="{color}" stroke-width="3"/>')
        out.append(f'<text x="{_W - _MR - 120}" y="{legend_y + 4}">{label}</text>')
        legend_y += 16
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_run_charts(out_dir) -> list[str]:
    """Render the standard charts for one run directory from its CSVs."""
    out_dir = Path(out_dir)
    chart_dir = out_dir / "charts"
    chart_dir.mkdir(exist_ok=True)
    written = []

    mcols = read_csv_columns(out_dir / "metrics.csv")
    t = mcols["t"]
    rate_series = [
        ("lag_gap", t, mcols["lag_gap"]),
        ("phi_err", t, mcols["phi_err"]),
        ("feas", t, mcols["feas"]),
        ("minnorm_dist", t, mcols["minnorm_dist"]),
    ]
    (chart_dir / "metrics_loglog.svg").write_text(render_line_chart(
        rate_series, title="convergence metrics", xlabel="t", ylabel="value",
        xlog=True, ylog=True))
    written.append("charts/metrics_loglog.svg")

    energy_series = [("E", t, mcols["E"]), ("Etilde", t, mcols["Etilde"])]
    if any(math.isfinite(v) for v in mcols["Ehat"]):
        energy_series.append(("Ehat", t, mcols["Ehat"]))
    (chart_dir / "energy_loglog.svg").write_text(render_line_chart(
        energy_series, title="Lyapunov energies", xlabel="t", ylabel="energy",
        xlog=True, ylog=True))
    written.append("charts/energy_loglog.svg")

    (chart_dir / "corrected.svg").write_text(render_line_chart(
        [("corrected", t, mcols["corrected"])],
        title="descent-corrected energy", xlabel="t", ylabel="value", xlog=True))
    written.append("charts/corrected.svg")

    tcols = read_csv_columns(out_dir / "trajectory.csv")
    tt = tcols["t"]
    state_series = [
        (name, tt, vals) for name, vals in tcols.items()
        if name.startswith(("x_", "y_"))
    ]
    (chart_dir / "trajectory.svg").write_text(render_line_chart(
        state_series, title="primal trajectory", xlabel="t", ylabel="coordinate"))
    written.append("charts/trajectory.svg")
    return written


def write_compare_charts(out_dir, names) -> list[str]:
    """Overlay phi_err and feas across the member run directories."""
    out_dir = Path(out_dir)
    chart_dir = out_dir / "charts"
    chart_dir.mkdir(exist_ok=True)
    phi_series, feas_series = [], []
    for name in names:
        cols = read_csv_columns(out_dir / name / "metrics.csv")
        phi_series.append((name, cols["t"], cols["phi_err"]))
        feas_series.append((name, cols["t"], cols["feas"]))
    (chart_dir / "compare_phi_err.svg").write_text(render_line_chart(
        phi_series, title="objective error", xlabel="t", ylabel="|Phi - Phi*|",
        xlog=True, ylog=True))
    (chart_dir / "compare_feas.svg").write_text(render_line_chart(
        feas_series, title="feasibility measure", xlabel="t", ylabel="|Ax+By-b|",
        xlog=True, ylog=True))
    return ["charts/compare_phi_err.svg", "charts/compare_feas.svg"]
