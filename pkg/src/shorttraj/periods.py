"""Periods of sqrt(phi(t)) / (t^2 - 1) dt along arcs and loops, homotopy-class matching,
and the Teichmuller angle identity for polygons bounded by trajectories.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .branch import BranchError, BranchState, _advance, branch_at, nearest_root, r_safe_default
from .geometry import PathPolyline, distance_to_polyline, point_segment_distance, winding_number
from .qdiff import SIGN_PAIRS, QDParams, class_label, period_values

TOL_PERIOD = 1e-7
GAUSS_ORDER = 8
_GX, _GW = np.polynomial.legendre.leggauss(GAUSS_ORDER)


class PeriodError(RuntimeError):
    def __init__(self, message: str, location: complex | None = None):
        super().__init__(message)
        self.location = location


@dataclass
class PeriodReport:
    value: complex
    est_error: float
    matched_class: str | None = None
    sign: int | None = None
    pair: tuple[int, int] | None = None
    winding: tuple[int, int] | None = None
    jacobi_value: complex | None = None
    expected: complex | None = None
    sign_resolved: bool = False
    diagnostics: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "value": [self.value.real, self.value.imag],
            "est_error": self.est_error,
            "class": self.matched_class,
            "sign": self.sign,
            "winding": list(self.winding) if self.winding is not None else None,
        }
        if self.jacobi_value is not None:
            out["jacobi_value"] = [self.jacobi_value.real, self.jacobi_value.imag]
        if self.diagnostics:
            out["diagnostics"] = list(self.diagnostics)
        return out


def jacobi_normalized(p: QDParams, value: complex) -> complex | None:
    """Period of sqrt(R_AB) with sqrt(R_AB) ~ (A+B+2) z, i.e. sqrt(R_AB) = -i sqrt(phi)."""
    return None if p.origin is None else -1j * value


# --------------------------------------------------------------------------- panels


@dataclass
class _Panel:
    z0: complex
    z1: complex
    singular: int = 0  # +1: singular at z0, -1: singular at z1


def _split_plain(z0: complex, z1: complex, sing: list[complex], out: list[_Panel], ratio: float = 0.5) -> None:
    stack = [(z0, z1)]
    while stack:
        u, v = stack.pop()
        length = abs(v - u)
        dist = min(float(point_segment_distance(c, u, v)) for c in sing) if sing else math.inf
        if length <= ratio * dist or length < 1e-14:
            out.append(_Panel(u, v))
        else:
            m = 0.5 * (u + v)
            stack.append((m, v))
            stack.append((u, m))


def _build_panels(p: QDParams, pts: np.ndarray, singular_ends: bool | tuple[bool, bool]) -> list[_Panel]:
    """Panels along the polyline; ``singular_ends`` marks first/last points that are zeros."""
    lead_sing, trail_sing = (singular_ends, singular_ends) if isinstance(singular_ends, bool) else singular_ends
    sing = [-1.0 + 0j, 1.0 + 0j, *p.zeros]
    panels: list[_Panel] = []
    n = pts.size - 1
    for k in range(n):
        z0, z1 = complex(pts[k]), complex(pts[k + 1])
        if z0 == z1:
            continue
        length = abs(z1 - z0)
        unit_dir = (z1 - z0) / length
        lead = trail = 0.0
        if lead_sing and k == 0:
            reach = 0.5 * min(abs(c - z0) for c in p.critical_points if c != z0)
            lead = min(length, reach)
        if trail_sing and k == n - 1:
            reach = 0.5 * min(abs(c - z1) for c in p.critical_points if c != z1)
            trail = min(reach, length - lead)
        if lead and trail and lead + trail >= length:
            lead = trail = 0.5 * length
        a0 = z0 + lead * unit_dir
        b0 = z1 - trail * unit_dir
        if lead:
            panels.append(_Panel(z0, a0, singular=1))
        if abs(b0 - a0) > 1e-15 * length:
            _split_plain(a0, b0, sing, panels)
        if trail:
            panels.append(_Panel(b0, z1, singular=-1))
    return panels


def _panel_nodes(panel: _Panel, xs: np.ndarray) -> np.ndarray:
    """Points t(x) in arc order for reference nodes x in (0, 1)."""
    d = panel.z1 - panel.z0
    if panel.singular == 1:
        return panel.z0 + d * xs * xs
    if panel.singular == -1:
        u = 1.0 - xs  # distance parameter from the singular end, decreasing along the arc
        return panel.z1 - d * u * u
    return panel.z0 + d * xs


def _panel_jacobian(panel: _Panel, xs: np.ndarray) -> np.ndarray:
    d = panel.z1 - panel.z0
    if panel.singular == 1:
        return 2 * d * xs
    if panel.singular == -1:
        return 2 * d * (1.0 - xs)
    return np.full(xs.shape, d, dtype=complex)


def _rule(split: bool) -> tuple[np.ndarray, np.ndarray]:
    x = (_GX + 1) / 2
    w = _GW / 2
    if not split:
        return x, w
    return np.concatenate((x / 2, 0.5 + x / 2)), np.concatenate((w / 2, w / 2))


@dataclass
class _Sweep:
    coarse: complex
    fine: complex
    nodes: np.ndarray  # quadrature nodes in arc order
    values: np.ndarray  # branch of sqrt(phi) at the nodes
    plain: np.ndarray  # node lies in a regular panel
    tangents: np.ndarray


def _sweep(p: QDParams, panels: list[_Panel], s_start: complex | None, z_start: complex) -> _Sweep:
    """Integrate with the panel rule and with every panel halved, in one ordered branch sweep."""
    xc, wc = _rule(False)
    xf, wf = _rule(True)
    xs_all = np.concatenate((xc, xf))
    order = np.argsort(xs_all, kind="stable")
    xs = xs_all[order]
    w_coarse = np.concatenate((wc, np.zeros(xf.size)))[order]
    w_fine = np.concatenate((np.zeros(xc.size), wf))[order]
    coarse = fine = 0j
    z_prev, s_prev = z_start, s_start
    nodes, values, plain, tangents = [], [], [], []
    for panel in panels:
        ts = _panel_nodes(panel, xs)
        jac = _panel_jacobian(panel, xs)
        integrand = np.empty(xs.size, dtype=complex)
        d = panel.z1 - panel.z0
        for i in range(xs.size):
            t = complex(ts[i])
            if panel.singular:
                # s = u * sqrt(h(u)); h stays away from zero up to the endpoint
                end = panel.z0 if panel.singular == 1 else panel.z1
                other = p.b if abs(end - p.a) < abs(end - p.b) else p.a
                u = xs[i] if panel.singular == 1 else 1.0 - xs[i]
                dd = d if panel.singular == 1 else -d
                h = p.lam * p.lam * dd * (end - other + dd * u * u)
                root = cmath.sqrt(h) if s_prev is None else nearest_root(h, s_prev / u)
                s = u * root
            elif s_prev is None:
                s = cmath.sqrt(p.phi(t))
            else:
                s = _advance(p, z_prev, s_prev, t)
            integrand[i] = s / (t * t - 1) * complex(jac[i])
            z_prev, s_prev = t, s
            nodes.append(t)
            values.append(s)
            plain.append(panel.singular == 0)
            tangents.append(d)
        coarse += complex(np.dot(w_coarse, integrand))
        fine += complex(np.dot(w_fine, integrand))
    return _Sweep(coarse, fine, np.array(nodes), np.array(values), np.array(plain), np.array(tangents))


def path_integral(p: QDParams, pts: np.ndarray, s_start: complex | None = None,
                  singular_ends: tuple[bool, bool] = (False, False)) -> tuple[complex, float, complex]:
    """Integral of s/(t^2 - 1) along the polyline with s continued from ``s_start``
    (for a singular start, s_start only fixes the sign of u*sqrt(h)).

    Returns (value, error estimate, branch value at the last node).
    """
    pts = np.asarray(pts, dtype=complex)
    panels = _build_panels(p, pts, singular_ends)
    if not panels:
        return 0j, 0.0, s_start if s_start is not None else 0j
    z_start = complex(pts[0])
    ref = s_start
    if singular_ends[0] and s_start is not None:
        # the sweep compares s_prev/u with sqrt(h); seed it with a value of the right phase at u = 1
        panel = panels[0]
        d = panel.z1 - panel.z0
        other = p.b if abs(panel.z0 - p.a) < abs(panel.z0 - p.b) else p.a
        root = nearest_root(p.lam * p.lam * d * (panel.z0 - other + d), s_start)
        ref = root
    sweep = _sweep(p, panels, ref, z_start)
    return sweep.fine, abs(sweep.fine - sweep.coarse), complex(sweep.values[-1])


def _check_poles(p: QDParams, pts: np.ndarray, r_safe: float, closed: bool = False) -> None:
    poly = PathPolyline(pts, closed=closed)
    for c in (-1.0, 1.0):
        if float(distance_to_polyline(c, poly)[0]) < r_safe:
            raise PeriodError(f"path passes within {r_safe:.3g} of the pole {c:+g}", complex(c))


def _plus_side_sign(p: QDParams, arc: PathPolyline, sweep: _Sweep, r_safe: float) -> int | None:
    """+1 if the swept branch is the + side boundary value of the branch cut along ``arc``."""
    if not np.any(sweep.plain):
        return None
    crit = np.stack([np.abs(sweep.nodes - c) for c in p.critical_points]).min(axis=0)
    crit = np.where(sweep.plain, crit, -1.0)
    for k in np.argsort(-crit)[:5]:
        if crit[k] < 4 * r_safe:
            break
        t = complex(sweep.nodes[k])
        normal = 1j * sweep.tangents[k] / abs(sweep.tangents[k])
        try:
            near = [nearest_root(p.phi(t), branch_at(p, t + h * normal, arc, r_safe).s)
                    for h in (1e-4 * p.scale, 0.5e-4 * p.scale)]
        except BranchError:
            continue
        if abs(near[0] - near[1]) > 1e-8 * (1 + abs(near[0])):
            continue
        return 1 if (near[1] * complex(sweep.values[k]).conjugate()).real >= 0 else -1
    return None


def arc_period(p: QDParams, arc: PathPolyline, endpoint_singular: bool = True, r_safe: float | None = None,
               resolve_sign: bool = True) -> PeriodReport:
    """Integral of (sqrt phi)_+ / (t^2 - 1) along ``arc``.

    With ``endpoint_singular`` the arc runs from one zero to the other and the
    square-root endpoint behaviour is removed by t = endpoint + d*u^2. The + side
    is the left of the arc; its sign comes from continuing the branch normalized by
    sqrt(phi) ~ lambda*z in from infinity without crossing the arc.

    The + side is always the left of the arc oriented from a to b, so an arc from b
    to a gives the negated value of its reversal.
    """
    r_safe = r_safe_default(p) if r_safe is None else r_safe
    if arc.closed:
        raise PeriodError("arc_period needs an open arc; use loop_period")
    pts = arc.points
    if endpoint_singular and {complex(pts[0]), complex(pts[-1])} != {p.a, p.b}:
        raise PeriodError("singular-endpoint arcs must join a and b exactly", complex(pts[0]))
    if endpoint_singular and complex(pts[0]) == p.b:
        report = arc_period(p, arc.reversed(), endpoint_singular, r_safe, resolve_sign)
        report.value = -report.value
        report.jacobi_value = jacobi_normalized(p, report.value)
        return report
    _check_poles(p, pts, r_safe)
    interior = pts[1:-1] if endpoint_singular else pts
    for c in p.zeros:
        if interior.size and np.min(np.abs(interior - c)) == 0:
            raise PeriodError("arc passes through a zero", c)
    sweep = _sweep(p, _build_panels(p, pts, endpoint_singular), None, complex(pts[0]))
    report = PeriodReport(value=sweep.fine, est_error=abs(sweep.fine - sweep.coarse))
    if resolve_sign:
        sign = _plus_side_sign(p, arc, sweep, r_safe)
        if sign is None:
            report.diagnostics.append("+ side not resolved; overall sign is arbitrary")
        else:
            report.value *= sign
            report.sign_resolved = True
    report.jacobi_value = jacobi_normalized(p, report.value)
    return report


# --------------------------------------------------------------------------- loops


@dataclass
class LoopReport(PeriodReport):
    start: BranchState | None = None
    winding_zeros: tuple[int, int] | None = None


def loop_windings(p: QDParams, loop: PathPolyline) -> dict[str, int]:
    return {
        "-1": winding_number(loop, -1.0),
        "+1": winding_number(loop, 1.0),
        "a": winding_number(loop, p.a),
        "b": winding_number(loop, p.b),
    }


def loop_period(p: QDParams, loop: PathPolyline, start: BranchState | None = None,
                r_safe: float | None = None) -> LoopReport:
    """Closed-contour integral of sqrt(phi)/(t^2 - 1), branch continued from ``start``."""
    r_safe = r_safe_default(p) if r_safe is None else r_safe
    if not loop.closed:
        raise PeriodError("loop_period needs a closed polyline")
    pts = loop.loop_points()
    _check_poles(p, pts, r_safe)
    for c in p.zeros:
        if float(distance_to_polyline(c, loop)[0]) < r_safe:
            raise PeriodError(f"loop passes within {r_safe:.3g} of the zero {c}", c)
    w = loop_windings(p, loop)
    if (w["a"] + w["b"]) % 2:
        raise PeriodError("loop separates the zeros; the square root is not single-valued on it")
    z0 = complex(pts[0])
    s0 = cmath.sqrt(p.phi(z0)) if start is None else start.s
    if start is not None and abs(start.z - z0) > 1e-12 * max(1.0, abs(z0)):
        raise PeriodError("start state is not at the first loop point", start.z)
    sweep = _sweep(p, _build_panels(p, pts, False), s0, z0)
    s_back = _advance(p, complex(sweep.nodes[-1]), complex(sweep.values[-1]), z0)
    if abs(s_back - s0) > 1e-8 * (1 + abs(s0)):
        raise PeriodError("branch did not return to its start value around the loop", z0)
    return LoopReport(
        value=sweep.fine,
        est_error=abs(sweep.fine - sweep.coarse),
        winding=(w["-1"], w["+1"]),
        start=BranchState(z0, s0),
        winding_zeros=(w["a"], w["b"]),
    )


def _integrand_residues(p: QDParams, s_minus1: complex, s_plus1: complex) -> tuple[complex, complex]:
    return -s_minus1 / 2, s_plus1 / 2


def loop_residue_value(p: QDParams, loop: PathPolyline, start: BranchState) -> complex:
    """Residue-theorem value of the loop integral, for convex loops.

    Independent of the quadrature: branch values at the poles come from straight
    continuation off the loop, never from the contour sweep.
    """
    pts = loop.points
    w = loop_windings(p, loop)
    # branch value at every loop vertex (vertex spacing is fine enough for continuation)
    vals = [start.s]
    z_prev = start.z
    for z in pts[1:]:
        vals.append(_advance(p, z_prev, vals[-1], complex(z)))
        z_prev = complex(z)
    vals = np.array(vals)

    def continued_to(target: complex, k: int) -> complex:
        return _advance(p, complex(pts[k]), complex(vals[k]), target)

    centroid = complex(np.mean(pts))
    if w["a"] == 0 and w["b"] == 0:
        total = 0j
        for pole, wp in ((-1.0, w["-1"]), (1.0, w["+1"])):
            if wp:
                k = int(np.argmin(np.abs(pts - pole)))
                s_pole = continued_to(pole, k)
                total += wp * (s_pole / 2 if pole > 0 else -s_pole / 2)
        return 2j * math.pi * total
    if w["a"] != w["b"]:
        raise PeriodError("oracle needs a loop around both zeros or neither")
    orient = w["a"]
    # exterior sum: poles outside the loop plus infinity
    k_far = int(np.argmax(np.abs(pts - centroid)))
    direction = (pts[k_far] - centroid) / abs(pts[k_far] - centroid)
    far = complex(pts[k_far]) + direction * (10 * p.scale + 10 * abs(pts[k_far]))
    s_far = continued_to(far, k_far)
    sigma = 1 if (s_far * (p.lam * far).conjugate()).real >= 0 else -1
    total = -sigma * p.lam
    for pole, wp in ((-1.0, w["-1"]), (1.0, w["+1"])):
        if wp == 0:
            k = int(np.argmin(np.abs(pts - pole)))
            s_pole = continued_to(pole, k)
            total += s_pole / 2 if pole > 0 else -s_pole / 2
    return -2j * math.pi * orient * total


# --------------------------------------------------------------------------- classes


def reference_arc(p: QDParams, clearance: float | None = None) -> PathPolyline:
    """Straight a -> b when it clears the poles, otherwise a two-leg detour.

    The default clearance is 0.1*scale, shrunk to half the zero-pole gap when a
    zero sits closer to a pole than that.
    """
    if clearance is None:
        gap = min(abs(z - c) for z in p.zeros for c in (-1.0, 1.0))
        clearance = min(0.1 * p.scale, 0.5 * gap)

    def clear(poly: PathPolyline) -> bool:
        return float(np.min(distance_to_polyline(np.array([-1.0, 1.0]), poly))) >= clearance

    straight = PathPolyline.segment(p.a, p.b)
    if clear(straight):
        return straight
    mid = 0.5 * (p.a + p.b)
    normal = 1j * (p.b - p.a) / abs(p.b - p.a)
    for h in (0.25, -0.25, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 4.0, -4.0):
        bent = PathPolyline(np.array([p.a, mid + h * (abs(p.b - p.a) + 1) * normal, p.b]))
        if clear(bent):
            return bent
    raise PeriodError("no admissible reference arc found")


def reference_pair(p: QDParams, ref: PathPolyline) -> tuple[int, int]:
    """Sign pair of the reference arc: sqrt(phi)(1) = s1*lam*X and sqrt(phi)(-1) = -s2*lam*Y
    in the branch cut along ``ref`` and normalized at infinity."""
    x = cmath.sqrt((1 - p.a) * (1 - p.b))
    y = cmath.sqrt((1 + p.a) * (1 + p.b))
    s_plus = branch_at(p, 1.0 + 0j, ref).s
    s_minus = branch_at(p, -1.0 + 0j, ref).s
    s1 = 1 if abs(s_plus - p.lam * x) <= abs(s_plus + p.lam * x) else -1
    s2 = -1 if abs(s_minus - p.lam * y) <= abs(s_minus + p.lam * y) else 1
    return s1, s2


def classify_arc(p: QDParams, arc: PathPolyline, reference: PathPolyline | None = None,
                 tol: float = TOL_PERIOD) -> PeriodReport:
    """Period of an a -> b arc matched, up to sign, to one of the four class values.

    The class is predicted from the reference arc's class and the parity of the
    windings of arc + reversed(reference) around +1 and -1, then confirmed against
    the quadrature value.
    """
    ref = reference_arc(p) if reference is None else reference
    report = arc_period(p, arc)
    if complex(arc.points[0]) != complex(ref.points[0]):
        ref = ref.reversed()
    loop = arc.concat(ref.reversed()).close()
    w_minus, w_plus = winding_number(loop, -1.0), winding_number(loop, 1.0)
    report.winding = (w_minus, w_plus)
    s1, s2 = reference_pair(p, ref)
    # flipping the arc's orientation swaps + and - sides: same pair, opposite sign
    pair = (s1 * (-1) ** (w_plus % 2), s2 * (-1) ** (w_minus % 2))
    values = period_values(p)
    v = values[pair]
    sign = 1 if abs(report.value - v) <= abs(report.value + v) else -1
    bound = max(tol * (1 + abs(v)), 3 * report.est_error)
    if abs(report.value - sign * v) <= bound:
        report.pair, report.sign, report.expected = pair, sign, sign * v
        report.matched_class = class_label(p, pair)
    else:
        report.diagnostics.append(
            f"winding-predicted class {class_label(p, pair)} misses by {abs(report.value - sign * v):.3g}")
        for other in SIGN_PAIRS:
            vo = values[other]
            so = 1 if abs(report.value - vo) <= abs(report.value + vo) else -1
            if abs(report.value - so * vo) <= max(tol * (1 + abs(vo)), 3 * report.est_error):
                report.diagnostics.append(f"value matches class {class_label(p, other)}")
    report.jacobi_value = jacobi_normalized(p, report.value)
    return report


# --------------------------------------------------------------------------- Teichmuller


@dataclass(frozen=True)
class QDPolygon:
    """Corners as (multiplicity, interior angle); ``interior`` lists multiplicities of
    critical points strictly inside (1 for a zero, -2 for a double pole)."""

    corners: tuple[tuple[int, float], ...]
    interior: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        for n, theta in self.corners:
            if n not in (-2, 0, 1):
                raise ValueError(f"corner multiplicity {n} not in {{-2, 0, 1}}")
            if not 0.0 <= theta <= 2 * math.pi:
                raise ValueError(f"interior angle {theta} outside [0, 2 pi]")
        for n in self.interior:
            if n not in (-2, 1):
                raise ValueError(f"interior multiplicity {n} not in {{-2, 1}}")


def teich_check(poly: QDPolygon, tol: float = 1e-12) -> tuple[float, float, bool]:
    lhs = sum(1 - theta * (n + 2) / (2 * math.pi) for n, theta in poly.corners)
    rhs = 2 + sum(poly.interior)
    return lhs, float(rhs), abs(lhs - rhs) < tol
