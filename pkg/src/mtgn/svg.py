"""Tiny dependency-free SVG emitters for scatter, polyline and line plots.

Markers are drawn with a fixed radius of ``MARKER_RADIUS`` px and every plot
pads its data range by ``PAD_FRACTION`` on each side.
"""

from html import escape

import numpy as np

WIDTH = 480
HEIGHT = 480
MARGIN = 40
MARKER_RADIUS = 1.8
PAD_FRACTION = 0.05


class _Frame:
    def __init__(self, xs, ys, width, height, logy=False):
        self.width, self.height, self.logy = width, height, logy
        xs = np.concatenate([np.ravel(x) for x in xs])
        ys = np.concatenate([np.ravel(y) for y in ys])
        if logy:
            ys = np.log10(ys[ys > 0]) if np.any(ys > 0) else np.zeros(1)
        self.x0, self.x1 = self._padded(xs)
        self.y0, self.y1 = self._padded(ys)

    @staticmethod
    def _padded(v):
        lo, hi = float(np.min(v)), float(np.max(v))
        if hi == lo:
            lo, hi = lo - 1.0, hi + 1.0
        pad = PAD_FRACTION * (hi - lo)
        return lo - pad, hi + pad

    def px(self, x):
        return MARGIN + (np.asarray(x) - self.x0) / (self.x1 - self.x0) * (self.width - 2 * MARGIN)

    def py(self, y):
        y = np.asarray(y, dtype=float)
        if self.logy:
            y = np.log10(np.maximum(y, 1e-300))
        return self.height - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (self.height - 2 * MARGIN)

    def axes(self, title, xlabel, ylabel):
        w, h = self.width, self.height
        ylo = f"1e{self.y0:.1f}" if self.logy else f"{self.y0:.3g}"
        yhi = f"1e{self.y1:.1f}" if self.logy else f"{self.y1:.3g}"
        return [
            f'<rect x="{MARGIN}" y="{MARGIN}" width="{w - 2 * MARGIN}" height="{h - 2 * MARGIN}" '
            'fill="none" stroke="#444" stroke-width="0.8"/>',
            f'<text x="{w / 2}" y="{MARGIN - 14}" text-anchor="middle" font-size="13">{escape(title)}</text>',
            f'<text x="{w / 2}" y="{h - 8}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>',
            f'<text x="12" y="{h / 2}" text-anchor="middle" font-size="11" '
            f'transform="rotate(-90 12 {h / 2})">{escape(ylabel)}</text>',
            f'<text x="{MARGIN}" y="{h - MARGIN + 14}" font-size="9">{self.x0:.3g}</text>',
            f'<text x="{w - MARGIN}" y="{h - MARGIN + 14}" font-size="9" text-anchor="end">{self.x1:.3g}</text>',
            f'<text x="{MARGIN - 4}" y="{h - MARGIN}" font-size="9" text-anchor="end">{ylo}</text>',
            f'<text x="{MARGIN - 4}" y="{MARGIN + 8}" font-size="9" text-anchor="end">{yhi}</text>',
        ]


def _doc(width, height, body):
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">'
    )
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>"]) + "\n"


def scatter(series, title="", xlabel="x0", ylabel="x1", width=WIDTH, height=HEIGHT):
    """``series`` is a list of ``(points, colour, label)``; points are n x 2."""
    fr = _Frame([p[:, 0] for p, _, _ in series], [p[:, 1] for p, _, _ in series], width, height)
    body = fr.axes(title, xlabel, ylabel)
    for k, (pts, colour, label) in enumerate(series):
        body.append(f'<g fill="{colour}" fill-opacity="0.7"><title>{escape(label)}</title>')
        body.extend(
            f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{MARKER_RADIUS}"/>'
            for x, y in zip(fr.px(pts[:, 0]), fr.py(pts[:, 1]))
        )
        body.append("</g>")
        body.append(
            f'<text x="{width - MARGIN - 4}" y="{MARGIN + 14 + 13 * k}" text-anchor="end" '
            f'font-size="10" fill="{colour}">{escape(label)}</text>'
        )
    return _doc(width, height, body)


def lines(series, title="", xlabel="", ylabel="", logy=False, marks=(), width=WIDTH + 160, height=HEIGHT - 120):
    """``series`` is a list of ``(x, y, colour, label)``; ``marks`` are x positions drawn as dashed rules."""
    fr = _Frame([s[0] for s in series], [s[1] for s in series], width, height, logy=logy)
    body = fr.axes(title, xlabel, ylabel)
    for xm in marks:
        x = float(fr.px(xm))
        body.append(
            f'<line x1="{x:.2f}" y1="{MARGIN}" x2="{x:.2f}" y2="{height - MARGIN}" '
            'stroke="#bbb" stroke-dasharray="3,3" stroke-width="0.6"/>'
        )
    for k, (x, y, colour, label) in enumerate(series):
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(fr.px(x), fr.py(y)))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.2"/>')
        body.append(
            f'<text x="{width - MARGIN - 4}" y="{MARGIN + 14 + 13 * k}" text-anchor="end" '
            f'font-size="10" fill="{colour}">{escape(label)}</text>'
        )
    return _doc(width, height, body)
