"""Self-contained SVG line charts (no plotting dependency).

Fixed 1000 x 700 viewBox, linear axes, one polyline per series; None
values break the polyline so missing data is visibly a gap rather than an
interpolated segment.  Output is a deterministic function of the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

__all__ = ["Series", "render_line_chart"]

WIDTH = 1000
HEIGHT = 700
MARGIN_LEFT = 80
MARGIN_RIGHT = 200
MARGIN_TOP = 60
MARGIN_BOTTOM = 70

PALETTE = [
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#ff7f0e",
    "#9467bd",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
]


@dataclass(frozen=True)
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float | None]


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
    )


def _ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    return [lo + span * i / count for i in range(count + 1)]


def render_line_chart(
    series: Sequence[Series],
    title: str,
    x_label: str,
    y_label: str,
) -> str:
    xs = [v for s in series for v in s.x]
    ys = [v for s in series for v in s.y if v is not None]
    if not xs:
        raise ValueError("nothing to plot: no x values")
    x_lo, x_hi = min(xs), max(xs)
    if ys:
        y_lo, y_hi = min(ys), max(ys)
    else:
        y_lo, y_hi = -1.0, 1.0
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(x: float) -> float:
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * plot_h

    out: list[str] = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">'
    )
    out.append('<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>')
    out.append(
        f'<text x="{WIDTH / 2:.1f}" y="30" text-anchor="middle" font-size="20" '
        f'font-family="Helvetica">{_escape(title)}</text>'
    )

    for tick in _ticks(y_lo, y_hi):
        y = py(tick)
        out.append(
            f'<line x1="{MARGIN_LEFT}" y1="{y:.2f}" x2="{WIDTH - MARGIN_RIGHT}" y2="{y:.2f}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{MARGIN_LEFT - 8}" y="{y + 4:.2f}" text-anchor="end" font-size="12" '
            f'font-family="Helvetica">{tick:.3g}</text>'
        )
    for tick in _ticks(x_lo, x_hi):
        x = px(tick)
        out.append(
            f'<line x1="{x:.2f}" y1="{HEIGHT - MARGIN_BOTTOM}" x2="{x:.2f}" '
            f'y2="{HEIGHT - MARGIN_BOTTOM + 6}" stroke="#000000" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{x:.2f}" y="{HEIGHT - MARGIN_BOTTOM + 22}" text-anchor="middle" '
            f'font-size="12" font-family="Helvetica">{tick:.3g}</text>'
        )

    # Axes frame.
    out.append(
        f'<line x1="{MARGIN_LEFT}" y1="{HEIGHT - MARGIN_BOTTOM}" x2="{WIDTH - MARGIN_RIGHT}" '
        f'y2="{HEIGHT - MARGIN_BOTTOM}" stroke="#000000" stroke-width="1.5"/>'
    )
    out.append(
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" '
        f'y2="{HEIGHT - MARGIN_BOTTOM}" stroke="#000000" stroke-width="1.5"/>'
    )
    out.append(
        f'<text x="{MARGIN_LEFT + plot_w / 2:.1f}" y="{HEIGHT - 20}" text-anchor="middle" '
        f'font-size="14" font-family="Helvetica">{_escape(x_label)}</text>'
    )
    out.append(
        f'<text x="22" y="{MARGIN_TOP + plot_h / 2:.1f}" text-anchor="middle" font-size="14" '
        f'font-family="Helvetica" transform="rotate(-90 22 {MARGIN_TOP + plot_h / 2:.1f})">'
        f"{_escape(y_label)}</text>"
    )

    legend_x = WIDTH - MARGIN_RIGHT + 16
    legend_y = MARGIN_TOP + 10
    for idx, s in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        # Split at None values: each contiguous run becomes its own polyline.
        run: list[str] = []
        for xv, yv in zip(s.x, s.y):
            if yv is None:
                if len(run) >= 2:
                    out.append(
                        f'<polyline fill="none" stroke="{color}" stroke-width="2" '
                        f'points="{" ".join(run)}"/>'
                    )
                run = []
                continue
            run.append(f"{px(xv):.2f},{py(yv):.2f}")
        if len(run) >= 2:
            out.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="2" '
                f'points="{" ".join(run)}"/>'
            )
        ly = legend_y + idx * 24
        out.append(
            f'<line x1="{legend_x}" y1="{ly}" x2="{legend_x + 24}" y2="{ly}" '
            f'stroke="{color}" stroke-width="3"/>'
        )
        out.append(
            f'<text x="{legend_x + 30}" y="{ly + 4}" text-anchor="start" font-size="13" '
            f'font-family="Helvetica">{_escape(s.label)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
