"""CSV logs, SVG line plots and reproducibility digests."""

from __future__ import annotations

import hashlib
import io
from xml.sax.saxutils import escape

import numpy as np

from ..geometry import boundary
from .simulate import TrajectoryLog

TIMING_COLUMNS = ("qp_time_s", "assemble_time_s")


def _fmt(v) -> str:
    return format(float(v), ".12g")


def log_header(n_x: int, n_u: int) -> list[str]:
    return (
        ["t"]
        + [f"x{i + 1}" for i in range(n_x)]
        + ["b"]
        + [f"ud{i + 1}" for i in range(n_u)]
        + [f"u{i + 1}" for i in range(n_u)]
        + ["modified", "active_count", "d_sampled", "d_oracle", *TIMING_COLUMNS]
    )


def log_rows(log: TrajectoryLog, include_timing: bool = True):
    for k in range(len(log)):
        row = [_fmt(log.t[k])]
        row += [_fmt(v) for v in log.x[k]]
        row.append(_fmt(log.b[k]))
        row += [_fmt(v) for v in log.u_d[k]]
        row += [_fmt(v) for v in log.u[k]]
        row += [str(int(log.modified[k])), str(int(log.active_count[k])), _fmt(log.d_sampled[k]), _fmt(log.d_oracle[k])]
        if include_timing:
            row += [_fmt(log.qp_time[k]), _fmt(log.assemble_time[k])]
        yield row


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def log_to_csv(log: TrajectoryLog) -> str:
    return _csv_text(log_header(log.x.shape[1], log.u.shape[1]), log_rows(log))


def report_to_csv(report) -> str:
    header = ["n_samples", "epsilon", "settled_distance", "mean_qp_time_s", "mean_filter_time_s"]
    rows = ([str(r.n_samples), _fmt(r.epsilon), _fmt(r.settled_distance), _fmt(r.mean_qp_time), _fmt(r.mean_filter_time)] for r in report.rows)
    return _csv_text(header, rows)


def emit_csv(obj, path) -> None:
    """Write a trajectory log or a trade-off report as CSV (LF line endings)."""
    text = log_to_csv(obj) if isinstance(obj, TrajectoryLog) else report_to_csv(obj)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def log_digest(log: TrajectoryLog) -> str:
    """SHA-256 of the CSV content without the timing columns."""
    header = log_header(log.x.shape[1], log.u.shape[1])[: -len(TIMING_COLUMNS)]
    text = _csv_text(header, log_rows(log, include_timing=False))
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# SVG

PANEL_W, PANEL_H, PAD = 520, 220, 40
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return out_lo + (np.asarray(values, dtype=float) - lo) / span * (out_hi - out_lo)


def _polyline(xs, ys, color, cls, dashed=False):
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, ys) if np.isfinite(a) and np.isfinite(b))
    dash = ' stroke-dasharray="4 3"' if dashed else ""
    return f'<polyline class="{cls}" fill="none" stroke="{color}" stroke-width="1.2"{dash} points="{pts}"/>'


def _time_panel(y0, t, series, title, zero_line=False):
    """``series`` is a list of (values, color, class, dashed)."""
    out = [f'<g transform="translate(0,{y0})">', f'<text x="{PAD}" y="16" font-size="13">{escape(title)}</text>']
    allv = np.concatenate([np.asarray(s[0], dtype=float).ravel() for s in series]) if series else np.zeros(1)
    allv = allv[np.isfinite(allv)]
    lo, hi = (float(allv.min()), float(allv.max())) if allv.size else (0.0, 1.0)
    if zero_line:
        lo = min(lo, 0.0)
    t0, t1 = (float(t[0]), float(t[-1])) if len(t) else (0.0, 1.0)
    xs = _scale(t, t0, t1, PAD, PANEL_W - 10)
    box = f'<rect x="{PAD}" y="24" width="{PANEL_W - 10 - PAD}" height="{PANEL_H - 48}" fill="none" stroke="#999"/>'
    out.append(box)
    if zero_line:
        yz = _scale([0.0], lo, hi, PANEL_H - 24, 24)[0]
        out.append(f'<line x1="{PAD}" x2="{PANEL_W - 10}" y1="{yz:.2f}" y2="{yz:.2f}" stroke="#444" stroke-dasharray="2 2"/>')
    for values, color, cls, dashed in series:
        out.append(_polyline(xs, _scale(values, lo, hi, PANEL_H - 24, 24), color, cls, dashed))
    out.append(f'<text x="{PAD}" y="{PANEL_H - 6}" font-size="10">t: {t0:.4g} to {t1:.4g} s; range {lo:.4g} to {hi:.4g}</text>')
    out.append("</g>")
    return out


def _overhead_panel(y0, log, world):
    size = 2 * PANEL_H
    out = [f'<g transform="translate(0,{y0})">', f'<text x="{PAD}" y="16" font-size="13">trajectory (overhead)</text>']
    pos = log.x[:, :2]
    if world is not None:
        lo = np.asarray(world.config.workspace["min"], dtype=float)
        hi = np.asarray(world.config.workspace["max"], dtype=float)
    else:
        lo, hi = pos.min(axis=0) - 0.5, pos.max(axis=0) + 0.5
    span = float(max(hi - lo))

    def tx(p):
        p = np.asarray(p, dtype=float)
        return PAD + (p[:, 0] - lo[0]) / span * (size - 34), 24 + (hi[1] - p[:, 1]) / span * (size - 34)

    if world is not None:
        for ob in world.obstacle_specs:
            chain = boundary(ob.shape)
            pts = chain.points_at(np.linspace(0.0, chain.length, 400, endpoint=False))
            xs, ys = tx(np.vstack([pts, pts[:1]]))
            out.append(_polyline(xs, ys, "#555", "workspace" if ob.enclosing else "obstacle"))
    xs, ys = tx(pos)
    out.append(_polyline(xs, ys, COLORS[0], "trajectory"))
    out.append("</g>")
    return out


def emit_svg_plot(log: TrajectoryLog, path, world=None) -> None:
    """Barrier value, inputs (filtered solid, nominal dashed) and overhead trajectory."""
    n_u = log.u.shape[1]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{2 * PANEL_H + 2 * PANEL_H + 10}">']
    parts += _time_panel(0, log.t, [(log.b, COLORS[0], "barrier", False)], "barrier value b (m^2)", zero_line=True)
    series = []
    for i in range(n_u):
        color = COLORS[i % len(COLORS)]
        series.append((log.u[:, i], color, "filtered", False))
        series.append((log.u_d[:, i], color, "nominal", True))
    parts += _time_panel(PANEL_H, log.t, series, "inputs: filtered (solid), nominal (dashed)")
    parts += _overhead_panel(2 * PANEL_H, log, world)
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
