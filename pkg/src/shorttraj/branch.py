"""A continuously continued square root of phi(z) = lambda^2 (z - a)(z - b)."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .geometry import PathPolyline, distance_to_polyline, point_segment_distance, segment_hits_polyline
from .qdiff import QDParams

TOL_BRANCH = 1e-11
MAX_BISECT = 60


class BranchError(RuntimeError):
    def __init__(self, message: str, location: complex | None = None):
        super().__init__(message)
        self.location = location


@dataclass(frozen=True)
class BranchState:
    z: complex
    s: complex


def r_safe_default(p: QDParams) -> float:
    return 1e-3 * p.scale


def far_radius(p: QDParams) -> float:
    return 4.0 * max(abs(p.a), abs(p.b), 1.0) + p.scale


def nearest_root(value: complex, ref: complex) -> complex:
    """The root of ``value`` closest in angle to ``ref``."""
    s = cmath.sqrt(value)
    return s if (s * ref.conjugate()).real >= 0 else -s


def root_at_infinity(p: QDParams, z: complex) -> BranchState:
    """Branch value at a far point, normalized by sqrt(phi(z)) ~ lambda*z."""
    z = complex(z)
    reach = 2.0 * max(abs(p.a), abs(p.b), 1.0)
    if abs(z) < reach:
        raise BranchError(f"|z| = {abs(z):.3g} is inside the normalization radius {reach:.3g}", z)
    s = nearest_root(p.phi(z), p.lam * z)
    return BranchState(z, s)


def _check_clear(p: QDParams, z0: complex, z1: complex, r_safe: float, guard=None) -> None:
    for c in (p.critical_points if guard is None else guard):
        if float(point_segment_distance(c, z0, z1)) < r_safe:
            raise BranchError(f"path passes within {r_safe:.3g} of critical point {c}", c)


def _advance(p: QDParams, z0: complex, s0: complex, z1: complex) -> complex:
    """Continue s0 at z0 to z1 along the chord, bisecting until arg(phi) turns < pi/2 per piece."""
    stack = [z1]
    z, s = z0, s0
    depth = 0
    while stack:
        target = stack[-1]
        f = p.phi(target)
        ratio = f / (s * s) if s != 0 else 1.0
        if abs(cmath.phase(ratio)) < math.pi / 2:
            s = nearest_root(f, s)
            z = target
            stack.pop()
        else:
            depth += 1
            if depth > MAX_BISECT * 8:
                raise BranchError("branch continuation failed to resolve step", target)
            stack.append(0.5 * (z + target))
    return s


def continue_samples(p: QDParams, start: BranchState, points: np.ndarray, r_safe: float | None = None,
                     guard: tuple[complex, ...] | None = None) -> np.ndarray:
    """Branch values at every point of ``points`` (points[0] must be start.z).

    ``guard`` lists the points the path must keep ``r_safe`` away from; the default
    is all four critical points, ``()`` disables the check.
    """
    r_safe = r_safe_default(p) if r_safe is None else r_safe
    pts = np.asarray(points, dtype=complex)
    if abs(pts[0] - start.z) > 1e-12 * max(1.0, abs(start.z)):
        raise BranchError("path does not start at the given state", complex(pts[0]))
    out = np.empty(pts.size, dtype=complex)
    s = start.s
    out[0] = s
    z = complex(pts[0])
    for k in range(1, pts.size):
        z1 = complex(pts[k])
        _check_clear(p, z, z1, r_safe, guard)
        s = _advance(p, z, s, z1)
        out[k] = s
        z = z1
    return out


def continue_along(p: QDParams, start: BranchState, path: PathPolyline, r_safe: float | None = None) -> BranchState:
    pts = path.loop_points()
    values = continue_samples(p, start, pts, r_safe)
    return BranchState(complex(pts[-1]), complex(values[-1]))


def branch_at(p: QDParams, point: complex, cut: PathPolyline | None = None, r_safe: float | None = None) -> BranchState:
    """Value at ``point`` of the branch normalized at infinity and single-valued off ``cut``.

    The value is continued inward along a straight ray that avoids the cut and the
    zeros; several directions are tried. The poles are regular points of the square
    root, so ``point`` may be -1 or 1.
    """
    r_safe = r_safe_default(p) if r_safe is None else r_safe
    far = far_radius(p) + abs(point)
    base = 0.0
    if cut is not None:
        # start with the direction pointing away from the cut
        nearest = cut.points[int(np.argmin(np.abs(cut.points - point)))]
        if nearest != point:
            base = cmath.phase(point - nearest)
    for k in range(48):
        theta = base + (k + 1) // 2 * (math.pi / 24) * (1 if k % 2 else -1)
        z_far = point + far * cmath.exp(1j * theta)
        if any(float(point_segment_distance(c, point, z_far)) < r_safe for c in p.zeros):
            continue
        if cut is not None and segment_hits_polyline(point, z_far, cut):
            continue
        start = root_at_infinity(p, z_far)
        ray = z_far + (point - z_far) * np.linspace(0.0, 1.0, 65)
        values = continue_samples(p, start, ray, r_safe, guard=p.zeros)
        return BranchState(complex(point), complex(values[-1]))
    raise BranchError("no clear ray from infinity reaches the point", point)


def side_values(p: QDParams, arc: PathPolyline, offset: float | None = None,
                r_safe: float | None = None) -> tuple[list[BranchState], list[BranchState]]:
    """Boundary values of the branch cut along ``arc`` on its + (left) and - (right) sides.

    Values are reported at interior arc samples away from the endpoints. Each is the
    root of phi at the sample nearest to the continuation along the parallel at
    distance ``offset``; the same sign must come out at ``offset/2``.
    """
    r_safe = r_safe_default(p) if r_safe is None else r_safe
    offset = 1e-4 * p.scale if offset is None else offset
    pts = arc.points
    if pts.size < 2:
        raise BranchError("arc needs at least two points")
    keep_from = max(4.0 * r_safe, 10.0 * offset)
    idx = [k for k in range(1, pts.size - 1)
           if abs(pts[k] - pts[0]) > keep_from and abs(pts[k] - pts[-1]) > keep_from]
    if not idx and pts.size == 2:
        mid = 0.5 * (pts[0] + pts[1])
        arc = PathPolyline(np.array([pts[0], mid, pts[1]]))
        pts = arc.points
        idx = [1]
    if not idx:
        raise BranchError("arc has no interior samples away from its endpoints")
    samples = pts[idx]
    normals = []
    for k in idx:
        d = pts[min(k + 1, pts.size - 1)] - pts[max(k - 1, 0)]
        normals.append(1j * d / abs(d))
    normals = np.array(normals)

    def boundary(sign: float, h: float) -> np.ndarray:
        par = samples + sign * h * normals
        if np.min(distance_to_polyline(par, arc)) < 0.5 * h:
            raise BranchError("offset too large: parallel curve meets the arc", complex(par[0]))
        mids = 0.5 * (par[1:] + par[:-1])
        if mids.size and np.min(distance_to_polyline(mids, arc)) < 0.25 * h:
            raise BranchError("parallel curve cuts across the arc; resample the arc more finely")
        start = branch_at(p, complex(par[0]), arc, r_safe)
        vals = continue_samples(p, start, par, r_safe=0.5 * h, guard=p.zeros)
        return np.array([nearest_root(p.phi(complex(t)), complex(v)) for t, v in zip(samples, vals)])

    out = []
    for sign in (1.0, -1.0):
        coarse = boundary(sign, offset)
        fine = boundary(sign, offset / 2)
        if np.any(np.abs(coarse - fine) > 1e-6 * (1 + np.abs(fine))):
            raise BranchError("boundary values change sign between offset and offset/2; offset too large")
        out.append([BranchState(complex(t), complex(v)) for t, v in zip(samples, fine)])
    return out[0], out[1]
