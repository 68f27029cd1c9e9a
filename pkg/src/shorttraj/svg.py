"""Minimal SVG writer for critical-graph figures.

Points are complex numbers in the plane; the figure maps a square window onto a
fixed pixel canvas with the imaginary axis pointing up. Output depends only on the
input data, so repeated runs give identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

CANVAS = 800


def _num(x: float) -> str:
    return f"{x:.3f}"


@dataclass
class Window:
    center: complex
    half_width: float

    @classmethod
    def around(cls, points, margin: float = 0.35) -> "Window":
        pts = np.asarray(list(points), dtype=complex)
        lo = complex(pts.real.min(), pts.imag.min())
        hi = complex(pts.real.max(), pts.imag.max())
        half = max(hi.real - lo.real, hi.imag - lo.imag) / 2
        return cls((lo + hi) / 2, max(half * (1 + margin), 0.5))

    def contains(self, z: complex) -> bool:
        d = z - self.center
        return abs(d.real) <= self.half_width and abs(d.imag) <= self.half_width


@dataclass
class Figure:
    window: Window
    title: str = ""
    elements: list[str] = field(default_factory=list)

    def _xy(self, z: complex) -> tuple[float, float]:
        k = CANVAS / (2 * self.window.half_width)
        d = complex(z) - self.window.center
        return CANVAS / 2 + k * d.real, CANVAS / 2 - k * d.imag

    def path(self, points: np.ndarray, color: str, width: float = 1.5, ident: str | None = None,
             closed: bool = False) -> None:
        """One <path> element; far-away samples are clamped to a band around the canvas."""
        pts = np.asarray(points, dtype=complex)
        cmds = []
        for i, z in enumerate(pts):
            x, y = self._xy(complex(z))
            x = min(max(x, -CANVAS), 2 * CANVAS)
            y = min(max(y, -CANVAS), 2 * CANVAS)
            cmds.append(("M" if i == 0 else "L") + _num(x) + " " + _num(y))
        if closed:
            cmds.append("Z")
        attr = f' id="{escape(ident)}"' if ident else ""
        self.elements.append(f'<path{attr} d="{" ".join(cmds)}" fill="none" stroke="{color}" '
                             f'stroke-width="{width}"/>')

    def polyline(self, points: np.ndarray, color: str, width: float = 1.5, closed: bool = False) -> None:
        pts = [self._xy(complex(z)) for z in np.asarray(points, dtype=complex)]
        if closed and pts:
            pts.append(pts[0])
        coords = " ".join(f"{_num(x)},{_num(y)}" for x, y in pts)
        self.elements.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="{width}"/>')

    def dot(self, z: complex, color: str, radius: float = 4.0) -> None:
        x, y = self._xy(z)
        self.elements.append(f'<circle cx="{_num(x)}" cy="{_num(y)}" r="{radius}" fill="{color}"/>')

    def cross(self, z: complex, color: str = "black", size: float = 6.0) -> None:
        x, y = self._xy(z)
        for dx, dy in ((size, size), (size, -size)):
            self.elements.append(f'<line x1="{_num(x - dx)}" y1="{_num(y - dy)}" x2="{_num(x + dx)}" '
                                 f'y2="{_num(y + dy)}" stroke="{color}" stroke-width="2"/>')

    def label(self, z: complex, text: str, size: int = 14) -> None:
        x, y = self._xy(z)
        self.elements.append(f'<text x="{_num(x + 6)}" y="{_num(y - 6)}" font-size="{size}" '
                             f'font-family="sans-serif">{escape(text)}</text>')

    def render(self) -> str:
        head = (f'<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{CANVAS}" height="{CANVAS}" '
                f'viewBox="0 0 {CANVAS} {CANVAS}">\n')
        body = [f'<rect x="0" y="0" width="{CANVAS}" height="{CANVAS}" fill="white"/>']
        if self.title:
            body.append(f'<title>{escape(self.title)}</title>')
        body.extend(self.elements)
        return head + "\n".join(body) + "\n</svg>\n"

    def save(self, filename) -> None:
        with open(filename, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.render())
