"""Deterministic SVG convergence plots (no plotting dependencies).

The output bytes are a pure function of the traces: fixed geometry,
fixed palette, fixed number formatting.  y is rel_error on a log scale;
x is iterations, cumulative megabytes or simulated time.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import EmptyTraces, UnknownKind
from .traces import Trace

X_AXES = ("iters", "mbytes", "time")

_WIDTH, _HEIGHT = 880.0, 540.0
_LEFT, _RIGHT, _TOP, _BOTTOM = 80.0, 250.0, 40.0, 60.0
_PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#e377c2",
    "#17becf",
)
_FLOOR = 1e-16

_X_LABEL = {"iters": "iteration", "mbytes": "communicated MB", "time": "simulated time (ms)"}


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _x_values(trace: Trace, x_axis: str) -> np.ndarray:
    if x_axis == "iters":
        return trace.iters.astype(float)
    if x_axis == "mbytes":
        return trace.bits_cum / 8e6
    if x_axis == "time":
        return trace.time_ms.astype(float)
    raise UnknownKind(f"x_axis must be one of {X_AXES}, got {x_axis!r}")


def _tick_label(value: float) -> str:
    if value == 0:
        return "0"
    if 0.01 <= abs(value) < 10000:
        text = f"{value:.4g}"
    else:
        text = f"{value:.2e}"
    return text


def emit_svg_plot(traces: list[Trace], x_axis: str, path: str | Path) -> bytes:
    """Write an SVG comparing rel_error curves; returns the bytes."""
    traces = [t for t in traces if len(t) > 0]
    if not traces:
        raise EmptyTraces("no non-empty traces to plot")
    if x_axis not in X_AXES:
        raise UnknownKind(f"x_axis must be one of {X_AXES}, got {x_axis!r}")

    xs = [_x_values(t, x_axis) for t in traces]
    ys = [np.maximum(t.rel_error, _FLOOR) for t in traces]
    x_lo = min(float(x.min()) for x in xs)
    x_hi = max(float(x.max()) for x in xs)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    y_lo = np.floor(np.log10(min(float(y.min()) for y in ys)))
    y_hi = np.ceil(np.log10(max(float(y.max()) for y in ys)))
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    plot_w = _WIDTH - _LEFT - _RIGHT
    plot_h = _HEIGHT - _TOP - _BOTTOM

    def to_px(x: float, logy: float) -> tuple[float, float]:
        px = _LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w
        py = _TOP + (y_hi - logy) / (y_hi - y_lo) * plot_h
        return px, py

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH:.0f}" '
        f'height="{_HEIGHT:.0f}" viewBox="0 0 {_WIDTH:.0f} {_HEIGHT:.0f}">',
        f'<rect width="{_WIDTH:.0f}" height="{_HEIGHT:.0f}" fill="white"/>',
        f'<rect x="{_fmt(_LEFT)}" y="{_fmt(_TOP)}" width="{_fmt(plot_w)}" '
        f'height="{_fmt(plot_h)}" fill="none" stroke="black"/>',
    ]

    # y grid: one line per decade
    decade = y_lo
    while decade <= y_hi:
        _, py = to_px(x_lo, decade)
        parts.append(
            f'<line x1="{_fmt(_LEFT)}" y1="{_fmt(py)}" x2="{_fmt(_LEFT + plot_w)}" '
            f'y2="{_fmt(py)}" stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{_fmt(_LEFT - 8)}" y="{_fmt(py + 4)}" text-anchor="end" '
            f'font-family="monospace" font-size="12">1e{int(decade)}</text>'
        )
        decade += 1.0

    for i in range(5):
        xv = x_lo + (x_hi - x_lo) * i / 4
        px, _ = to_px(xv, y_lo)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{_fmt(_TOP + plot_h)}" x2="{_fmt(px)}" '
            f'y2="{_fmt(_TOP + plot_h + 5)}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_fmt(px)}" y="{_fmt(_TOP + plot_h + 20)}" text-anchor="middle" '
            f'font-family="monospace" font-size="12">{_tick_label(xv)}</text>'
        )

    parts.append(
        f'<text x="{_fmt(_LEFT + plot_w / 2)}" y="{_fmt(_HEIGHT - 15)}" '
        f'text-anchor="middle" font-family="monospace" font-size="13">'
        f"{_X_LABEL[x_axis]}</text>"
    )
    parts.append(
        f'<text x="20" y="{_fmt(_TOP + plot_h / 2)}" text-anchor="middle" '
        f'font-family="monospace" font-size="13" '
        f'transform="rotate(-90 20 {_fmt(_TOP + plot_h / 2)})">rel_error</text>'
    )

    for idx, (x_arr, y_arr, trace) in enumerate(zip(xs, ys, traces)):
        color = _PALETTE[idx % len(_PALETTE)]
        points = " ".join(
            f"{_fmt(to_px(float(xv), float(np.log10(yv)))[0])},"
            f"{_fmt(to_px(float(xv), float(np.log10(yv)))[1])}"
            for xv, yv in zip(x_arr, y_arr)
        )
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        label = trace.meta.get("label") or trace.meta.get("method") or f"trace {idx}"
        ly = _TOP + 16 + 18 * idx
        lx = _WIDTH - _RIGHT + 16
        parts.append(
            f'<line x1="{_fmt(lx)}" y1="{_fmt(ly - 4)}" x2="{_fmt(lx + 24)}" '
            f'y2="{_fmt(ly - 4)}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_fmt(lx + 30)}" y="{_fmt(ly)}" font-family="monospace" '
            f'font-size="12">{label}</text>'
        )

    parts.append("</svg>")
    data = "\n".join(parts).encode("utf-8")
    Path(path).write_bytes(data)
    return data
