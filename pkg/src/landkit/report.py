"""Deterministic SVG rendering of correlation reports.

Grouped bar charts: one panel per (split design, K), metric groups on
the x axis, one bar per model. Every printed number is produced by the
same formatter as the CSV writer, so the two artifacts can never
disagree. Output bytes are a pure function of the report rows.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

from .metrics import LandscapeMetrics, format_value
from .stats import CorrelationRow

_PALETTE = (
    "#4878d0",
    "#ee854a",
    "#6acc64",
    "#d65f5f",
    "#956cb4",
    "#8c613c",
    "#dc7ec0",
    "#797979",
)

_BAR_W = 20
_BAR_GAP = 3
_GROUP_GAP = 26
_MARGIN_L = 56
_MARGIN_R = 16
_MARGIN_T = 34
_MARGIN_B = 58
_PLOT_H = 170.0


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def render_report_svg(rows: Sequence[CorrelationRow]) -> str:
    """Render correlation rows to a standalone SVG document."""
    if not rows:
        raise ValueError("report is empty")
    panels = sorted({(r.split_design, r.k) for r in rows})
    models = sorted({r.model_name for r in rows})
    metrics = [
        m for m in LandscapeMetrics.METRIC_NAMES
        if any(r.metric_name == m for r in rows)
    ]
    cell = {
        (r.split_design, r.k, r.metric_name, r.model_name): r for r in rows
    }

    group_w = len(models) * (_BAR_W + _BAR_GAP) - _BAR_GAP
    panel_w = _MARGIN_L + len(metrics) * (group_w + _GROUP_GAP) + _MARGIN_R
    panel_h = _MARGIN_T + _PLOT_H + _MARGIN_B
    legend_h = 22 + 16 * len(models)
    width = panel_w
    height = panel_h * len(panels) + legend_h

    def y_of(v: float) -> float:
        # bicor in [-1, 1] maps to the plot band, +1 at the top
        return _MARGIN_T + (1.0 - v) * _PLOT_H / 2.0

    out: list[str] = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height:.0f}" font-family="sans-serif" font-size="10">'
    )
    out.append(f'<rect width="{width}" height="{height:.0f}" fill="white"/>')

    for pi, (design, k) in enumerate(panels):
        top = pi * panel_h
        out.append(
            f'<text x="{_MARGIN_L}" y="{top + 16:.1f}" font-size="12" '
            f'font-weight="bold">{_esc(design)} / K={k}</text>'
        )
        for tick in (-1.0, -0.5, 0.0, 0.5, 1.0):
            yy = top + y_of(tick)
            out.append(
                f'<line x1="{_MARGIN_L}" y1="{yy:.2f}" x2="{panel_w - _MARGIN_R}" '
                f'y2="{yy:.2f}" stroke="#dddddd" stroke-width="1"/>'
            )
            out.append(
                f'<text x="{_MARGIN_L - 6}" y="{yy + 3:.2f}" '
                f'text-anchor="end">{tick:g}</text>'
            )
        zero_y = top + y_of(0.0)
        for gi, metric in enumerate(metrics):
            gx = _MARGIN_L + gi * (group_w + _GROUP_GAP)
            out.append(
                f'<text x="{gx + group_w / 2:.2f}" y="{top + panel_h - 34:.1f}" '
                f'text-anchor="middle">{_esc(metric)}</text>'
            )
            for mi, model in enumerate(models):
                bx = gx + mi * (_BAR_W + _BAR_GAP)
                row = cell.get((design, k, metric, model))
                color = _PALETTE[mi % len(_PALETTE)]
                if row is None:
                    continue
                label = format_value(row.bicor)
                if row.bicor is None:
                    out.append(
                        f'<rect x="{bx:.2f}" y="{top + y_of(1.0):.2f}" '
                        f'width="{_BAR_W}" height="{_PLOT_H:.2f}" fill="none" '
                        f'stroke="{color}" stroke-dasharray="3,2"/>'
                    )
                    out.append(
                        f'<text x="{bx + _BAR_W / 2:.2f}" y="{zero_y - 4:.2f}" '
                        f'text-anchor="middle" fill="{color}">NA</text>'
                    )
                    continue
                by = top + y_of(max(row.bicor, 0.0))
                bh = abs(row.bicor) * _PLOT_H / 2.0
                out.append(
                    f'<rect x="{bx:.2f}" y="{by:.2f}" width="{_BAR_W}" '
                    f'height="{bh:.2f}" fill="{color}"/>'
                )
                ly = by - 3 if row.bicor >= 0 else by + bh + 9
                out.append(
                    f'<text x="{bx + _BAR_W / 2:.2f}" y="{ly:.2f}" '
                    f'text-anchor="middle" font-size="6">{_esc(label)}</text>'
                )
        out.append(
            f'<line x1="{_MARGIN_L}" y1="{zero_y:.2f}" x2="{panel_w - _MARGIN_R}" '
            f'y2="{zero_y:.2f}" stroke="#333333" stroke-width="1"/>'
        )

    ly0 = panel_h * len(panels) + 14
    out.append(f'<text x="{_MARGIN_L}" y="{ly0:.1f}" font-weight="bold">models</text>')
    for mi, model in enumerate(models):
        yy = ly0 + 14 + mi * 16
        color = _PALETTE[mi % len(_PALETTE)]
        out.append(
            f'<rect x="{_MARGIN_L}" y="{yy - 9:.1f}" width="10" height="10" '
            f'fill="{color}"/>'
        )
        out.append(f'<text x="{_MARGIN_L + 16}" y="{yy:.1f}">{_esc(model)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_report_svg(rows: Sequence[CorrelationRow], path: str | Path) -> None:
    Path(path).write_text(render_report_svg(rows))
