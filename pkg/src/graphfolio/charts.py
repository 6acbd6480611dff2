"""Standalone SVG line charts for equity-curve comparison (no renderer deps)."""

from __future__ import annotations

from datetime import date

from .backtest import EquityCurve

_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
    "#98df8a", "#ff9896", "#c5b0d5",
)

_WIDTH, _HEIGHT = 960, 480
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 190, 40, 50


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** int(f"{raw:e}".split("e")[1])
    for mult in (1, 2, 5, 10):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = step * (int(lo / step) + (0 if lo % step == 0 else 1))
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(v)
        v += step
    return ticks


def render_curves_svg(curves: list[EquityCurve], title: str = "Equity curves") -> str:
    """Multi-line chart of portfolio value over time, one line per strategy."""
    if not curves:
        raise ValueError("no curves to render")
    all_dates = [d for c in curves for d in c.dates]
    x_lo, x_hi = min(all_dates).toordinal(), max(all_dates).toordinal()
    y_lo = min(float(c.values.min()) for c in curves)
    y_hi = max(float(c.values.max()) for c in curves)
    if x_hi == x_lo:
        x_hi += 1
    if y_hi == y_lo:
        y_hi += 1.0

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def sx(d: date) -> float:
        return _MARGIN_L + plot_w * (d.toordinal() - x_lo) / (x_hi - x_lo)

    def sy(v: float) -> float:
        return _MARGIN_T + plot_h * (1.0 - (v - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_MARGIN_L}" y="24" font-size="16">{title}</text>',
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#333"/>',
    ]

    for v in _nice_ticks(y_lo, y_hi):
        y = sy(v)
        parts.append(
            f'<line x1="{_MARGIN_L}" y1="{y:.2f}" x2="{_MARGIN_L + plot_w}" '
            f'y2="{y:.2f}" stroke="#ddd"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 8}" y="{y + 4:.2f}" text-anchor="end">{v:g}</text>'
        )

    years = sorted({d.year for d in all_dates})
    for y in years:
        d = date(y, 1, 1)
        if x_lo <= d.toordinal() <= x_hi:
            x = sx(d)
            parts.append(
                f'<line x1="{x:.2f}" y1="{_MARGIN_T}" x2="{x:.2f}" '
                f'y2="{_MARGIN_T + plot_h}" stroke="#eee"/>'
            )
            parts.append(
                f'<text x="{x:.2f}" y="{_MARGIN_T + plot_h + 18}" '
                f'text-anchor="middle">{y}</text>'
            )

    for i, curve in enumerate(curves):
        color = _PALETTE[i % len(_PALETTE)]
        points = " ".join(
            f"{sx(d):.2f},{sy(float(v)):.2f}" for d, v in zip(curve.dates, curve.values)
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'
        )
        ly = _MARGIN_T + 16 * i
        lx = _MARGIN_L + plot_w + 12
        parts.append(
            f'<line x1="{lx}" y1="{ly + 6}" x2="{lx + 18}" y2="{ly + 6}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(f'<text x="{lx + 24}" y="{ly + 10}">{curve.strategy_tag}</text>')

    parts.append("</svg>")
    return "\n".join(parts)
