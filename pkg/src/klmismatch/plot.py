"""Standalone SVG scatter of simulation points with bound curves on top."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 20, 55
CURVE_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


@dataclass(frozen=True)
class Frame:
    """Affine map from data coordinates to SVG pixels."""

    x_max: float
    y_max: float

    def px(self, x: float) -> float:
        return MARGIN_L + x / self.x_max * (WIDTH - MARGIN_L - MARGIN_R)

    def py(self, y: float) -> float:
        return HEIGHT - MARGIN_B - y / self.y_max * (HEIGHT - MARGIN_T - MARGIN_B)


def _nice_ticks(top: float, count: int = 5) -> list[float]:
    raw = top / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    return [k * step for k in range(int(top / step + 1e-9) + 1)]


def render_svg(
    points: tuple[np.ndarray, np.ndarray],
    curves: Sequence[tuple[str, np.ndarray, np.ndarray]],
    units: str = "nats",
    y_max: float | None = None,
) -> str:
    """Render points ``(delta_q, kl)`` and named ``(label, delta, value)`` curves.

    Infinite divergences are omitted and counted in the annotation, as are
    finite points above ``y_max`` (default: 1.25 times the largest curve value).
    """
    px_d, px_k = (np.asarray(a, dtype=np.float64) for a in points)
    finite = np.isfinite(px_k)
    n_inf = int((~finite).sum())
    if y_max is None:
        tops = [float(np.max(v)) for _, _, v in curves if len(v)]
        if tops:
            y_max = 1.25 * max(tops)
        elif finite.any():
            y_max = float(np.max(px_k[finite]))
        else:
            y_max = 1.0
    y_max = y_max if y_max > 0 else 1.0
    fr = Frame(1.0, y_max)
    shown = finite & (px_k <= y_max)
    n_clip = int((finite & ~shown).sum())

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    x0, x1 = fr.px(0), fr.px(1)
    y0, y1 = fr.py(0), fr.py(y_max)
    out.append(
        f'<g id="axes" stroke="black" stroke-width="1">'
        f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y0:.2f}"/>'
        f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x0:.2f}" y2="{y1:.2f}"/></g>'
    )
    ticks = ['<g id="ticks" font-family="sans-serif" font-size="11">']
    for v in _nice_ticks(1.0):
        x = fr.px(v)
        ticks.append(
            f'<line x1="{x:.2f}" y1="{y0:.2f}" x2="{x:.2f}" y2="{y0 + 4:.2f}" stroke="black"/>'
            f'<text x="{x:.2f}" y="{y0 + 16:.2f}" text-anchor="middle">{v:g}</text>'
        )
    for v in _nice_ticks(y_max):
        y = fr.py(v)
        ticks.append(
            f'<line x1="{x0 - 4:.2f}" y1="{y:.2f}" x2="{x0:.2f}" y2="{y:.2f}" stroke="black"/>'
            f'<text x="{x0 - 7:.2f}" y="{y + 4:.2f}" text-anchor="end">{v:.3g}</text>'
        )
    ticks.append("</g>")
    out.extend(ticks)
    out.append(
        f'<text id="xlabel" x="{(x0 + x1) / 2:.2f}" y="{HEIGHT - 15}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">delta_q</text>'
    )
    out.append(
        f'<text id="ylabel" x="18" y="{(y0 + y1) / 2:.2f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {(y0 + y1) / 2:.2f})">KL divergence ({escape(units)})</text>'
    )

    out.append('<g id="points" fill="#999999" stroke="none">')
    for d, k in zip(px_d[shown].tolist(), px_k[shown].tolist()):
        out.append(f'<circle cx="{fr.px(d):.2f}" cy="{fr.py(k):.2f}" r="1.5"/>')
    out.append("</g>")

    legend = ['<g id="legend" font-family="sans-serif" font-size="12">']
    for i, (label, d, v) in enumerate(curves):
        colour = CURVE_COLOURS[i % len(CURVE_COLOURS)]
        pts = " ".join(
            f"{fr.px(a):.2f},{fr.py(min(b, y_max)):.2f}" for a, b in zip(d.tolist(), v.tolist())
        )
        out.append(
            f'<polyline class="curve" data-label="{escape(label)}" points="{pts}" '
            f'fill="none" stroke="{colour}" stroke-width="1.5"/>'
        )
        ly = MARGIN_T + 14 + 16 * i
        lx = MARGIN_L + 12
        legend.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{colour}" stroke-width="2"/>'
            f'<text x="{lx + 26}" y="{ly}">{escape(label)}</text>'
        )
    legend.append("</g>")
    out.extend(legend)

    note = f"{int(shown.sum())} points"
    if n_inf:
        note += f", {n_inf} with infinite KL omitted"
    if n_clip:
        note += f", {n_clip} above plot range"
    out.append(
        f'<text id="annotation" x="{x1:.2f}" y="{MARGIN_T + 14}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">{escape(note)}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
