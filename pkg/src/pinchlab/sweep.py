"""Parameter sweeps: one analysis per value, CSV table and SVG line charts."""

from __future__ import annotations

import csv
import io
import logging
import math
from pathlib import Path

from .pinch import AnalysisError, analyze
from .shapes import ShapeError, from_descriptor, generate, to_descriptor

logger = logging.getLogger(__name__)

COLUMNS = (
    "value",
    "lambda1",
    "k_pr",
    "pinching_deficit_rel",
    "hm_residual",
    "einstein_dev",
    "tau_2q",
    "h2_dev",
    "theta_hat",
    "cmc_eps",
    "scal_eps",
    "lemma_gap",
    "notes",
)

CHART_GROUPS = {
    "spectral": ("lambda1", "k_pr"),
    "deficits": ("pinching_deficit_rel", "hm_residual"),
    "deviations": ("einstein_dev", "tau_2q", "h2_dev", "theta_hat"),
    "cmc": ("cmc_eps", "scal_eps", "lemma_gap"),
}


def report_row(value, report):
    r = report.provenance["config"]["r"]
    order = report.deficits.orders[r]
    return {
        "value": value,
        "lambda1": report.spectral.lambda1,
        "k_pr": order.k_pr,
        "pinching_deficit_rel": order.pinching_deficit_rel,
        "hm_residual": report.deficits.hm_residual[r],
        "einstein_dev": report.einstein_dev,
        "tau_2q": report.tau_norm_2q,
        "h2_dev": report.h2_minus_k_q,
        "theta_hat": math.nan if report.theta_hat is None else report.theta_hat,
        "cmc_eps": report.cmc_eps,
        "scal_eps": report.scal_eps,
        "lemma_gap": report.lemma_gap,
        "notes": "; ".join(report.notes),
    }


def _failed_row(value, message):
    row = {c: math.nan for c in COLUMNS}
    row["value"] = value
    row["notes"] = message
    return row


def run_sweep(spec):
    """Analyse every value of ``spec.param``; failures become NaN rows."""
    rows = []
    for value in spec.values:
        params = dict(spec.params)
        resolution = spec.resolution
        if spec.param == "resolution":
            resolution = int(value)
        else:
            params[spec.param] = value
        desc = {"kind": spec.kind, "params": params, "resolution": resolution}
        try:
            shape, res = from_descriptor(desc)
            mesh = generate(shape, res)
            report = analyze(mesh, spec.config, {"shape": to_descriptor(shape, res)})
        except (ShapeError, AnalysisError) as exc:
            logger.warning("sweep row %s=%g failed: %s", spec.param, value, exc)
            rows.append(_failed_row(value, f"failed: {exc}"))
            continue
        rows.append(report_row(value, report))
    return rows


def _cell(x):
    if isinstance(x, str):
        return x
    x = float(x)
    return "nan" if math.isnan(x) else format(x, ".9g")


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow([_cell(row[c]) for c in COLUMNS])
    return buf.getvalue()


def read_csv(text):
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for rec in reader:
        out.append({c: (rec[c] if c == "notes" else float(rec[c])) for c in COLUMNS})
    return out


# ---------------------------------------------------------------- SVG

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
_W, _H = 560, 340
_ML, _MR, _MT, _MB = 70, 150, 30, 45


def _num(x):
    return format(x, ".4g")


def line_chart(rows, columns, title, xlabel="value"):
    """Static SVG line chart; a pure function of the table values."""
    xs = [float(r["value"]) for r in rows]
    series = {c: [float(r[c]) for r in rows] for c in columns}
    finite = [y for ys in series.values() for y in ys if math.isfinite(y)]
    ylo, yhi = (min(finite), max(finite)) if finite else (0.0, 1.0)
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    xlo, xhi = min(xs), max(xs)
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def px(x):
        return _ML + (x - xlo) / (xhi - xlo) * pw

    def py(y):
        return _MT + (yhi - y) / (yhi - ylo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_ML}" y="18" font-size="13">{title}</text>',
        f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{_ML}" y="{_H - 25}" text-anchor="middle">{_num(xlo)}</text>',
        f'<text x="{_ML + pw}" y="{_H - 25}" text-anchor="middle">{_num(xhi)}</text>',
        f'<text x="{_ML + pw / 2:.2f}" y="{_H - 8}" text-anchor="middle">{xlabel}</text>',
        f'<text x="{_ML - 6}" y="{_MT + 4}" text-anchor="end">{_num(yhi)}</text>',
        f'<text x="{_ML - 6}" y="{_MT + ph}" text-anchor="end">{_num(ylo)}</text>',
    ]
    for k, col in enumerate(columns):
        color = _COLORS[k % len(_COLORS)]
        segment = []
        segments = []
        for x, y in zip(xs, series[col]):
            if math.isfinite(y):
                segment.append(f"{px(x):.2f},{py(y):.2f}")
            elif segment:
                segments.append(segment)
                segment = []
        if segment:
            segments.append(segment)
        for seg in segments:
            out.append(
                f'<polyline points="{" ".join(seg)}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
            for pt in seg:
                cx, cy = pt.split(",")
                out.append(f'<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>')
        ly = _MT + 14 + 16 * k
        out.append(
            f'<line x1="{_W - _MR + 10}" y1="{ly - 4}" x2="{_W - _MR + 30}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        out.append(f'<text x="{_W - _MR + 35}" y="{ly}">{col}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_outputs(rows, csv_path, xlabel="value"):
    """Write the CSV and one SVG per column group; returns the SVG paths."""
    csv_path = Path(csv_path)
    text = rows_to_csv(rows)
    csv_path.write_text(text, encoding="utf-8")
    table = read_csv(text)
    paths = []
    for group, cols in CHART_GROUPS.items():
        p = csv_path.with_name(f"{csv_path.stem}.{group}.svg")
        p.write_text(line_chart(table, cols, group, xlabel), encoding="utf-8")
        paths.append(p)
    return paths
