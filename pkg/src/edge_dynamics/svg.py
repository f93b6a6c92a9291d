"""Minimal SVG line and scatter charts with an optional log vertical axis."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

LOG_FLOOR = 1e-300
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * k / (count - 1) for k in range(count)]


def _label(v: float) -> str:
    return f"{v:.3g}"


class Chart:
    def __init__(self, title: str = "", xlabel: str = "", ylabel: str = "",
                 width: int = 640, height: int = 400, log_y: bool = False):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.width, self.height, self.log_y = width, height, log_y
        self.series: list[tuple[str, np.ndarray, np.ndarray, str]] = []
        self.clipped = 0

    def _prep_y(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if not self.log_y:
            return y
        low = ~(y > LOG_FLOOR) & np.isfinite(y)
        self.clipped += int(low.sum())
        return np.log10(np.where(low, LOG_FLOOR, y))

    def line(self, x, y, label: str = "") -> "Chart":
        self.series.append(("line", np.asarray(x, dtype=float), self._prep_y(y), label))
        return self

    def scatter(self, x, y, label: str = "") -> "Chart":
        self.series.append(("scatter", np.asarray(x, dtype=float), self._prep_y(y), label))
        return self

    def _bounds(self):
        xs = np.concatenate([s[1] for s in self.series]) if self.series else np.zeros(1)
        ys = np.concatenate([s[2] for s in self.series]) if self.series else np.zeros(1)
        ok = np.isfinite(xs) & np.isfinite(ys)
        if not ok.any():
            return 0.0, 1.0, 0.0, 1.0
        x0, x1 = float(xs[ok].min()), float(xs[ok].max())
        y0, y1 = float(ys[ok].min()), float(ys[ok].max())
        if x1 == x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        return x0, x1, y0, y1

    def render(self) -> str:
        W, H = self.width, self.height
        ml, mr, mt, mb = 70, 20, 30, 50
        pw, ph = W - ml - mr, H - mt - mb
        x0, x1, y0, y1 = self._bounds()

        def px(x):
            return ml + (x - x0) / (x1 - x0) * pw

        def py(y):
            return mt + ph - (y - y0) / (y1 - y0) * ph

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
               f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
               f'<rect width="{W}" height="{H}" fill="white"/>',
               f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
        for t in _ticks(x0, x1):
            out.append(f'<line x1="{px(t):.2f}" y1="{mt + ph}" x2="{px(t):.2f}" y2="{mt + ph + 4}" stroke="black"/>')
            out.append(f'<text x="{px(t):.2f}" y="{mt + ph + 16}" text-anchor="middle">{_label(t)}</text>')
        for t in _ticks(y0, y1):
            lab = f"1e{t:.1f}" if self.log_y else _label(t)
            out.append(f'<line x1="{ml - 4}" y1="{py(t):.2f}" x2="{ml}" y2="{py(t):.2f}" stroke="black"/>')
            out.append(f'<text x="{ml - 6}" y="{py(t) + 4:.2f}" text-anchor="end">{lab}</text>')
        out.append(f'<text x="{ml + pw / 2}" y="{H - 10}" text-anchor="middle">{escape(self.xlabel)}</text>')
        ylab = self.ylabel + (" (log10)" if self.log_y else "")
        out.append(f'<text x="14" y="{mt + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {mt + ph / 2})">{escape(ylab)}</text>')
        out.append(f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="13">{escape(self.title)}</text>')
        for k, (kind, x, y, label) in enumerate(self.series):
            color = PALETTE[k % len(PALETTE)]
            ok = np.isfinite(x) & np.isfinite(y)
            if kind == "line":
                # break the polyline at non-finite points
                seg: list[str] = []
                for xi, yi, good in zip(x, y, ok):
                    if good:
                        seg.append(f"{px(xi):.2f},{py(yi):.2f}")
                    elif seg:
                        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{" ".join(seg)}"/>')
                        seg = []
                if seg:
                    out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{" ".join(seg)}"/>')
            else:
                # points closer than half a pixel are drawn once
                cells = np.unique(np.round(2 * np.column_stack([px(x[ok]), py(y[ok])])) / 2, axis=0)
                for cx, cy in cells:
                    out.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="0.6" fill="{color}"/>')
            if label:
                ly = mt + 14 + 14 * k
                out.append(f'<text x="{ml + pw - 6}" y="{ly}" text-anchor="end" fill="{color}">{escape(label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render())
        return path


def log_clip_count(values) -> int:
    v = np.asarray(values, dtype=float)
    return int(np.count_nonzero(~(v > LOG_FLOOR) & np.isfinite(v)))

