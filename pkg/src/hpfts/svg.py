"""Schematic SVG line charts with CSV twins of the plotted numbers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 960, 540
MARGIN = dict(left=80, right=30, top=50, bottom=60)

# 12-step chronological ramp, red (oldest) through violet (newest)
RAMP = (
    "#d7191c", "#e8532f", "#f48d43", "#fdbf6f", "#f7e78a", "#d3ec95",
    "#a6d96a", "#66bd63", "#35a3a0", "#3a7dc0", "#5a4fb0", "#7b2a94",
)
GREY = "#9a9a9a"


def ramp_color(i: int, n: int) -> str:
    if n <= 1:
        return RAMP[-1]
    return RAMP[round(i * (len(RAMP) - 1) / (n - 1))]


@dataclass
class Series:
    name: str
    x: np.ndarray
    y: np.ndarray
    color: str = "#000000"
    dashed: bool = False


@dataclass
class Band:
    name: str
    x: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    color: str = "#cccccc"


@dataclass
class Chart:
    title: str
    xlabel: str = ""
    ylabel: str = ""
    series: list[Series] = field(default_factory=list)
    bands: list[Band] = field(default_factory=list)

    def line(self, name, x, y, color="#000000", dashed=False):
        self.series.append(Series(name, np.asarray(x, float), np.asarray(y, float), color, dashed))

    def band(self, name, x, lower, upper, color="#cccccc"):
        self.bands.append(Band(name, np.asarray(x, float), np.asarray(lower, float), np.asarray(upper, float), color))

    def _limits(self):
        xs = [s.x for s in self.series] + [b.x for b in self.bands]
        ys = [s.y for s in self.series] + [b.lower for b in self.bands] + [b.upper for b in self.bands]
        x = np.concatenate(xs) if xs else np.zeros(1)
        y = np.concatenate(ys) if ys else np.zeros(1)
        x, y = x[np.isfinite(x)], y[np.isfinite(y)]
        x0, x1 = float(x.min()), float(x.max())
        y0, y1 = float(y.min()), float(y.max())
        if x1 == x0:
            x0, x1 = x0 - 1, x1 + 1
        if y1 == y0:
            pad = abs(y0) * 0.05 or 1.0
            y0, y1 = y0 - pad, y1 + pad
        return x0, x1, y0, y1

    def to_svg(self) -> str:
        x0, x1, y0, y1 = self._limits()
        L, R, T, Bm = MARGIN["left"], WIDTH - MARGIN["right"], MARGIN["top"], HEIGHT - MARGIN["bottom"]

        def px(v):
            return L + (v - x0) / (x1 - x0) * (R - L)

        def py(v):
            return Bm - (v - y0) / (y1 - y0) * (Bm - T)

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
            f'<text x="{WIDTH / 2:.1f}" y="28" text-anchor="middle" font-family="sans-serif" font-size="18">{escape(self.title)}</text>',
            f'<line x1="{L}" y1="{Bm}" x2="{R}" y2="{Bm}" stroke="#000"/>',
            f'<line x1="{L}" y1="{T}" x2="{L}" y2="{Bm}" stroke="#000"/>',
        ]
        for v in np.linspace(x0, x1, 6):
            out.append(f'<text x="{px(v):.1f}" y="{Bm + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{v:.4g}</text>')
        for v in np.linspace(y0, y1, 6):
            out.append(f'<text x="{L - 6}" y="{py(v) + 4:.1f}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.4g}</text>')
        out.append(f'<text x="{(L + R) / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle" font-family="sans-serif" font-size="13">{escape(self.xlabel)}</text>')
        out.append(f'<text x="18" y="{(T + Bm) / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {(T + Bm) / 2:.1f})">{escape(self.ylabel)}</text>')
        for b in self.bands:
            ok = np.isfinite(b.lower) & np.isfinite(b.upper)
            if not ok.any():
                continue
            pts = [f"{px(x):.2f},{py(v):.2f}" for x, v in zip(b.x[ok], b.upper[ok])]
            pts += [f"{px(x):.2f},{py(v):.2f}" for x, v in zip(b.x[ok][::-1], b.lower[ok][::-1])]
            out.append(f'<polygon points="{" ".join(pts)}" fill="{b.color}" fill-opacity="0.6" stroke="none"/>')
        for s in self.series:
            ok = np.isfinite(s.y)
            pts = " ".join(f"{px(x):.2f},{py(v):.2f}" for x, v in zip(s.x[ok], s.y[ok]))
            dash = ' stroke-dasharray="6,4"' if s.dashed else ""
            out.append(f'<polyline points="{pts}" fill="none" stroke="{s.color}" stroke-width="1.5"{dash}/>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        lines = ["series,x,y"]
        for b in self.bands:
            for x, lo, hi in zip(b.x, b.lower, b.upper):
                lines.append(f"{b.name}:lower,{float(x)!r},{float(lo)!r}")
                lines.append(f"{b.name}:upper,{float(x)!r},{float(hi)!r}")
        for s in self.series:
            for x, v in zip(s.x, s.y):
                lines.append(f"{s.name},{float(x)!r},{float(v)!r}")
        return "\n".join(lines) + "\n"

    def save(self, stem) -> None:
        """Write ``<stem>.svg`` and its twin ``<stem>.csv``."""
        from pathlib import Path

        stem = Path(stem)
        stem.with_suffix(".svg").write_text(self.to_svg())
        stem.with_suffix(".csv").write_text(self.to_csv())


def rainbow(title: str, x, curves: Sequence, labels: Sequence[str], history=None, history_labels=()) -> Chart:
    """One line per year; optional grey history drawn first."""
    ch = Chart(title, "age", "")
    if history is not None:
        for lab, c in zip(history_labels, history):
            ch.line(lab, x, c, GREY)
    n = len(curves)
    for i, (lab, c) in enumerate(zip(labels, curves)):
        ch.line(lab, x, c, ramp_color(i, n))
    return ch
