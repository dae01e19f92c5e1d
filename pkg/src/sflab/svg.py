"""Minimal SVG output: polylines, circles, and labels on a fixed canvas.

Only what the diagnostic figures need.  Output is a pure function of
the input floats, with fixed numeric formatting, so repeated runs write
identical bytes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

Array = np.ndarray

_PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
)


def palette(i: int) -> str:
    return _PALETTE[i % len(_PALETTE)]


@dataclass
class SvgScene:
    """World-coordinate drawing surface rendered to an SVG string."""

    size: int = 640
    margin: int = 40
    title: str = ""
    _shapes: list[tuple] = field(default_factory=list)
    _bounds: list[float] = field(default_factory=lambda: [math.inf, -math.inf, math.inf, -math.inf])

    def _touch(self, xs, ys) -> None:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.size == 0:
            return
        self._bounds[0] = min(self._bounds[0], float(np.min(xs)))
        self._bounds[1] = max(self._bounds[1], float(np.max(xs)))
        self._bounds[2] = min(self._bounds[2], float(np.min(ys)))
        self._bounds[3] = max(self._bounds[3], float(np.max(ys)))

    def polyline(self, points: Array, color: str = "#1f77b4", width: float = 1.2, label: str | None = None) -> None:
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or len(points) == 0:
            return
        self._touch(points[:, 0], points[:, 1])
        self._shapes.append(("polyline", points.copy(), color, width, label))

    def circle(self, center: tuple[float, float], radius: float, color: str = "#404040", width: float = 1.0) -> None:
        self._touch(
            [center[0] - radius, center[0] + radius],
            [center[1] - radius, center[1] + radius],
        )
        self._shapes.append(("circle", (float(center[0]), float(center[1]), float(radius)), color, width, None))

    def dot(self, point: tuple[float, float], color: str = "#000000", radius: float = 2.5) -> None:
        self._touch([point[0]], [point[1]])
        self._shapes.append(("dot", (float(point[0]), float(point[1]), float(radius)), color, 0.0, None))

    def label(self, point: tuple[float, float], text: str, color: str = "#202020") -> None:
        self._touch([point[0]], [point[1]])
        self._shapes.append(("label", (float(point[0]), float(point[1])), color, 0.0, text))

    def _transform(self):
        x_lo, x_hi, y_lo, y_hi = self._bounds
        if not math.isfinite(x_lo):
            x_lo, x_hi, y_lo, y_hi = -1.0, 1.0, -1.0, 1.0
        span = max(x_hi - x_lo, y_hi - y_lo, 1e-12)
        inner = self.size - 2 * self.margin
        scale = inner / span
        cx = 0.5 * (x_lo + x_hi)
        cy = 0.5 * (y_lo + y_hi)
        half = self.size / 2.0

        def to_px(x: float, y: float) -> tuple[float, float]:
            return (half + (x - cx) * scale, half - (y - cy) * scale)

        return to_px, scale

    def to_string(self) -> str:
        to_px, scale = self._transform()
        out: list[str] = []
        out.append(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.size}"'
            f' height="{self.size}" viewBox="0 0 {self.size} {self.size}">'
        )
        out.append(f'<rect width="{self.size}" height="{self.size}" fill="#ffffff"/>')
        if self.title:
            out.append(
                f'<text x="{self.margin}" y="24" font-family="monospace"'
                f' font-size="14" fill="#202020">{_escape(self.title)}</text>'
            )
        legend_row = 0
        for kind, data, color, width, label in self._shapes:
            if kind == "polyline":
                pts = " ".join(
                    "{0:.2f},{1:.2f}".format(*to_px(x, y)) for x, y in data
                )
                out.append(
                    f'<polyline points="{pts}" fill="none" stroke="{color}"'
                    f' stroke-width="{width:.2f}"/>'
                )
                if label:
                    out.append(_legend(self.size, legend_row, color, label))
                    legend_row += 1
            elif kind == "circle":
                x, y, radius = data
                px, py = to_px(x, y)
                out.append(
                    f'<circle cx="{px:.2f}" cy="{py:.2f}" r="{radius * scale:.2f}"'
                    f' fill="none" stroke="{color}" stroke-width="{width:.2f}"/>'
                )
            elif kind == "dot":
                x, y, radius = data
                px, py = to_px(x, y)
                out.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="{radius:.2f}" fill="{color}"/>')
            elif kind == "label":
                px, py = to_px(*data)
                out.append(
                    f'<text x="{px:.2f}" y="{py:.2f}" font-family="monospace"'
                    f' font-size="11" fill="{color}">{_escape(label)}</text>'
                )
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _legend(size: int, row: int, color: str, label: str) -> str:
    y = 40 + 16 * row
    x = size - 200
    return (
        f'<rect x="{x}" y="{y - 9}" width="10" height="10" fill="{color}"/>'
        f'<text x="{x + 16}" y="{y}" font-family="monospace" font-size="11"'
        f' fill="#202020">{_escape(label)}</text>'
    )


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )
