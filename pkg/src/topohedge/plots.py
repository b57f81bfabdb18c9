"""Minimal SVG output for PnL histograms and rolling trade-size curves."""

from __future__ import annotations

import json
from xml.sax.saxutils import escape

WIDTH, HEIGHT, PAD = 640, 400, 40


def _f(x: float) -> str:
    return f"{x:.3f}"


def _frame(title: str, body: list[str], meta: dict) -> str:
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<title>{escape(title)}</title>",
        f"<metadata>{escape(json.dumps(meta))}</metadata>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{PAD}" y1="{HEIGHT - PAD}" x2="{WIDTH - PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        *body,
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def histogram_svg(lefts, rights, counts, title: str = "Hedging error") -> str:
    if not counts:
        raise ValueError("histogram has no bins")
    lo, hi = min(lefts), max(rights)
    span = (hi - lo) or 1.0
    top = max(counts) or 1
    sx = (WIDTH - 2 * PAD) / span
    sy = (HEIGHT - 2 * PAD) / top
    bars = []
    for a, b, c in zip(lefts, rights, counts):
        h = c * sy
        bars.append(
            f'<rect class="bar" x="{_f(PAD + (a - lo) * sx)}" y="{_f(HEIGHT - PAD - h)}" '
            f'width="{_f((b - a) * sx)}" height="{_f(h)}" fill="steelblue"/>'
        )
    bars.append(f'<text x="{PAD}" y="{HEIGHT - 10}" font-size="12">{lo:.4g}</text>')
    bars.append(f'<text x="{WIDTH - PAD}" y="{HEIGHT - 10}" font-size="12" text-anchor="end">{hi:.4g}</text>')
    return _frame(title, bars, {"bins": len(counts), "range": [lo, hi], "max_count": top})


def curve_svg(values, title: str = "Rolling average trade size") -> str:
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("curve has no points")
    lo, hi = min(vals), max(vals)
    span = (hi - lo) or 1.0
    sx = (WIDTH - 2 * PAD) / max(len(vals) - 1, 1)
    sy = (HEIGHT - 2 * PAD) / span
    pts = " ".join(
        f"{'M' if i == 0 else 'L'}{_f(PAD + i * sx)},{_f(HEIGHT - PAD - (v - lo) * sy)}"
        for i, v in enumerate(vals)
    )
    body = [f'<path class="curve" d="{pts}" fill="none" stroke="firebrick"/>']
    return _frame(title, body, {"values": vals})
