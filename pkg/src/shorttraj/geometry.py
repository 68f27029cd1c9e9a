"""Polylines in the complex plane and the plane-geometry helpers built on them."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PathPolyline:
    """An oriented discretized arc: ordered complex points.

    ``closed`` marks a loop; the closing chord from the last point back to the
    first is implied and never stored twice.
    """

    points: np.ndarray
    closed: bool = False
    _cumlen: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=complex).ravel())
        if pts.size == 0:
            raise ValueError("empty polyline")
        if self.closed and pts.size > 1 and pts[0] == pts[-1]:
            pts = pts[:-1]
        object.__setattr__(self, "points", pts)
        steps = np.abs(np.diff(pts)) if pts.size > 1 else np.zeros(0)
        object.__setattr__(self, "_cumlen", np.concatenate(([0.0], np.cumsum(steps))))

    def __len__(self) -> int:
        return int(self.points.size)

    @property
    def start(self) -> complex:
        return complex(self.points[0])

    @property
    def end(self) -> complex:
        return complex(self.points[0] if self.closed else self.points[-1])

    @property
    def cumulative_length(self) -> np.ndarray:
        return self._cumlen

    @property
    def length(self) -> float:
        total = float(self._cumlen[-1])
        if self.closed and len(self) > 1:
            total += abs(complex(self.points[0] - self.points[-1]))
        return total

    def loop_points(self) -> np.ndarray:
        """Vertices with the first repeated at the end when closed."""
        if self.closed:
            return np.append(self.points, self.points[0])
        return self.points

    def reversed(self) -> "PathPolyline":
        return PathPolyline(self.points[::-1].copy(), self.closed)

    def concat(self, other: "PathPolyline") -> "PathPolyline":
        """Join two open polylines; a shared junction point is kept once."""
        if self.closed or other.closed:
            raise ValueError("cannot concatenate closed polylines")
        tail = other.points
        if tail[0] == self.points[-1]:
            tail = tail[1:]
        return PathPolyline(np.concatenate((self.points, tail)))

    def close(self) -> "PathPolyline":
        return PathPolyline(self.points.copy(), closed=True)

    @classmethod
    def segment(cls, z0: complex, z1: complex, n: int = 1) -> "PathPolyline":
        pts = z0 + (z1 - z0) * np.linspace(0.0, 1.0, n + 1)
        pts[0], pts[-1] = z0, z1
        return cls(pts)

    @classmethod
    def through(cls, *waypoints: complex, per_leg: int = 1) -> "PathPolyline":
        pts = [complex(waypoints[0])]
        for z0, z1 in zip(waypoints[:-1], waypoints[1:]):
            for t in np.linspace(0.0, 1.0, per_leg + 1)[1:]:
                pts.append(z0 + (z1 - z0) * t)
            pts[-1] = complex(z1)
        return cls(np.array(pts))

    @classmethod
    def circle(cls, center: complex, radius: float, n: int = 256, clockwise: bool = False) -> "PathPolyline":
        t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        if clockwise:
            t = -t
        return cls(center + radius * np.exp(1j * t), closed=True)


def winding_number(loop: PathPolyline | np.ndarray, p: complex) -> int:
    """Winding number of a closed polyline around ``p``.

    Each chord subtends an angle in (-pi, pi) seen from ``p``, so summing the
    principal arguments of consecutive ratios is exact for polylines.
    """
    pts = loop.loop_points() if isinstance(loop, PathPolyline) else np.append(loop, loop[0])
    rel = pts - p
    if np.any(rel == 0):
        raise ValueError(f"loop passes through {p}")
    total = float(np.sum(np.angle(rel[1:] / rel[:-1])))
    return int(round(total / (2 * math.pi)))


def point_segment_distance(z: np.ndarray | complex, p0: complex, p1: complex) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    d = p1 - p0
    norm2 = abs(d) ** 2
    if norm2 == 0:
        return np.abs(z - p0)
    t = np.clip(((z - p0) * np.conj(d)).real / norm2, 0.0, 1.0)
    return np.abs(z - (p0 + t * d))


def distance_to_polyline(z: np.ndarray | complex, poly: PathPolyline) -> np.ndarray:
    """Exact Euclidean distance from each point of ``z`` to the polyline."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    pts = poly.loop_points()
    if pts.size == 1:
        return np.abs(z - pts[0])
    p0 = pts[:-1][None, :]
    d = (pts[1:] - pts[:-1])[None, :]
    zz = z[:, None]
    len2 = np.abs(d) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(len2 > 0, ((zz - p0) * np.conj(d)).real / len2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.min(np.abs(zz - (p0 + t * d)), axis=1)


def hausdorff_distance(p: PathPolyline, q: PathPolyline) -> float:
    return float(max(distance_to_polyline(p.points, q).max(), distance_to_polyline(q.points, p).max()))


def segment_hits_polyline(z0: complex, z1: complex, poly: PathPolyline, margin: float = 0.0) -> bool:
    """True if segment [z0, z1] properly crosses ``poly`` or passes within ``margin`` of it."""
    pts = poly.loop_points()
    q0, q1 = pts[:-1], pts[1:]

    def orient(p, q, r):
        return (np.conj(q - p) * (r - p)).imag

    d1 = orient(q0, q1, z0)
    d2 = orient(q0, q1, z1)
    d3 = orient(z0, z1, q0)
    d4 = orient(z0, z1, q1)
    crossing = (d1 * d2 < 0) & (d3 * d4 < 0)
    if np.any(crossing):
        return True
    if margin > 0:
        samples = z0 + (z1 - z0) * np.linspace(0.0, 1.0, 64)
        if np.min(distance_to_polyline(samples, poly)) < margin:
            return True
    return False


def left_normal(z0: complex, z1: complex) -> complex:
    d = z1 - z0
    return 1j * d / abs(d)


def unit(z: complex) -> complex:
    return z / abs(z)


def polar(r: float, theta: float) -> complex:
    return cmath.rect(r, theta)
