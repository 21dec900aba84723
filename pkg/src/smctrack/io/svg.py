"""Tiny static SVG bar chart, enough for a metrics report."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Union
from xml.sax.saxutils import escape


def bar_chart_svg(values: Mapping[str, float], title: str = "", width: int = 480,
                  bar_height: int = 22, gap: int = 8) -> str:
    labels = list(values)
    label_w, value_w, top = 80, 70, 30 if title else 10
    plot_w = width - label_w - value_w
    lo = min(0.0, *values.values()) if values else 0.0
    hi = max(1.0, *values.values()) if values else 1.0
    span = hi - lo
    height = top + len(labels) * (bar_height + gap) + gap

    def xpos(v):
        return label_w + plot_w * (v - lo) / span

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="12">'
    ]
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle">{escape(title)}</text>')
    zero = xpos(0.0)
    for k, label in enumerate(labels):
        v = float(values[label])
        y = top + gap + k * (bar_height + gap)
        x0, x1 = sorted((zero, xpos(v)))
        out.append(f'<text x="{label_w - 6}" y="{y + bar_height * 0.7:.1f}" text-anchor="end">{escape(label)}</text>')
        out.append(f'<rect x="{x0:.2f}" y="{y}" width="{max(x1 - x0, 0.5):.2f}" height="{bar_height}" '
                   f'fill="{"#4a7ab5" if v >= 0 else "#c0504d"}"/>')
        out.append(f'<text x="{width - value_w + 6}" y="{y + bar_height * 0.7:.1f}">{v:.4g}</text>')
    out.append(f'<line x1="{zero:.2f}" y1="{top}" x2="{zero:.2f}" y2="{height - gap / 2}" stroke="#333"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_bar_chart(values: Mapping[str, float], path: Union[str, Path], title: str = "") -> None:
    Path(path).write_text(bar_chart_svg(values, title))
