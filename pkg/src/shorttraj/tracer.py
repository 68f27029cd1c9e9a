"""Horizontal trajectories of lambda^2 (z-a)(z-b)/(z^2-1)^2 dz^2 and the critical graph.

A trajectory is a level curve Im w = const of w(z) = int sqrt(phi)/(t^2-1) dt. We
integrate the unit-speed field dz/ds = conj(sigma)/|sigma|, sigma = sqrt(phi)/(z^2-1),
with an embedded Dormand-Prince 5(4) pair and project every accepted point back
onto the level set, so the invariant never drifts.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .branch import nearest_root
from .geometry import PathPolyline, hausdorff_distance, winding_number
from .periods import PeriodError, PeriodReport, classify_arc, path_integral, reference_arc
from .qdiff import PoleType, QDParams, classify_poles, property_p, residues

_GL5_X, _GL5_W = np.polynomial.legendre.leggauss(5)
_GL5_X = (_GL5_X + 1) / 2
_GL5_W = _GL5_W / 2

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))


class TracerError(RuntimeError):
    def __init__(self, message: str, location: complex | None = None):
        super().__init__(message)
        self.location = location


class Fate(str, Enum):
    TO_POLE_MINUS1 = "ToPoleMinus1"
    TO_POLE_PLUS1 = "ToPolePlus1"
    TO_INFINITY = "ToInfinity"
    TO_OTHER_ZERO = "ToOtherZero"
    CLOSED_LOOP = "ClosedLoop"
    TRUNCATED = "Truncated"


class Topology(str, Enum):
    ONE_SHORT_TWO_INFINITE = "OneShortTwoInfinite"
    TWO_SHORT_JORDAN_CURVE = "TwoShortJordanCurve"
    REAL_LOOPS_PLUS_SEGMENT = "RealLoopsPlusSegment"
    REAL_LOOPS_COMMON_EDGE = "RealLoopsCommonEdge"
    NO_SHORT = "NoShort"
    OTHER = "Other"


@dataclass(frozen=True)
class StepLimits:
    """Tolerances are relative to the local distance to the nearest critical point;
    radii are relative to the parameter scale."""

    max_steps: int = 1_000_000
    max_arclength: float = 1e3
    rtol: float = 1e-9
    max_step_ratio: float = 0.2
    eps_launch: float = 1e-6
    r_pole: float = 1e-3
    delta_short: float = 1e-2
    gap_accept: float = 1e-6
    delta_loop: float = 1e-4
    r_inf: float = 50.0

    def tightened(self, factor: float = 10.0) -> "StepLimits":
        return replace(self, rtol=self.rtol / factor, eps_launch=self.eps_launch / factor,
                       max_step_ratio=self.max_step_ratio / 2)


@dataclass(frozen=True)
class LaunchSpec:
    zero: complex
    directions: tuple[float, float, float]


@dataclass
class TrajectoryRecord:
    origin: str  # "a", "b" or "regular"
    angle_index: int
    polyline: PathPolyline
    fate: Fate
    terminal_gap: float
    arclength: float
    est_error: float = 0.0
    closest_approach: float = math.inf  # to the other zero, over the whole trace
    im_drift: float = 0.0  # largest |Im w - target| seen before projection
    steps: int = 0
    diagnostics: list[str] = field(default_factory=list)

    @property
    def terminal(self) -> complex:
        return self.polyline.end

    def to_dict(self) -> dict:
        return {
            "origin": self.origin,
            "angle_index": self.angle_index,
            "fate": self.fate.value,
            "arclength": self.arclength,
            "terminal_gap": self.terminal_gap,
            "n_points": len(self.polyline),
        }


@dataclass
class ShortTrajectory:
    polyline: PathPolyline
    period: PeriodReport | None
    sources: tuple[int, int | None]  # indices into CriticalGraph.trajectories

    @property
    def matched_class(self) -> str | None:
        return None if self.period is None else self.period.matched_class

    def to_dict(self) -> dict:
        out = {"class": self.matched_class, "n_points": len(self.polyline)}
        out["period"] = None if self.period is None else [self.period.value.real, self.period.value.imag]
        return out


@dataclass
class LoopRecord:
    """A closed trajectory: either a critical loop from a zero back to itself, or a
    regular member of the loop family around a Circle-type pole."""

    kind: str  # "critical" or "family"
    polyline: PathPolyline
    zero: str | None
    winding_minus1: int
    winding_plus1: int
    sources: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "zero": self.zero,
            "winding": [self.winding_minus1, self.winding_plus1],
            "n_points": len(self.polyline),
        }


@dataclass
class CriticalGraph:
    params: QDParams
    trajectories: list[TrajectoryRecord]
    shorts: list[ShortTrajectory]
    loops: list[LoopRecord]
    topology: Topology
    property_p_satisfied: bool
    inconsistencies: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    retried: bool = False

    def fates(self) -> list[Fate]:
        return [t.fate for t in self.trajectories]

    def to_dict(self) -> dict:
        return {
            "trajectories": [t.to_dict() for t in self.trajectories],
            "shorts": [s.to_dict() for s in self.shorts],
            "loops": [lp.to_dict() for lp in self.loops],
            "topology": self.topology.value,
            "inconsistencies": list(self.inconsistencies),
            "warnings": list(self.warnings),
        }


# --------------------------------------------------------------------------- launch


def launch_directions(p: QDParams, zero: complex) -> LaunchSpec:
    zero = complex(zero)
    if zero not in p.zeros:
        raise TracerError("launch point is not a zero of phi", zero)
    dq = p.dQ(zero)
    if abs(dq) <= 1e-14 * max(1.0, abs(p.lam) ** 2):
        raise TracerError("Q'(zero) vanishes: the zero is not simple", zero)
    base = -cmath.phase(dq) / 3
    return LaunchSpec(zero, tuple(base + 2 * math.pi * k / 3 for k in range(3)))  # type: ignore[arg-type]


# --------------------------------------------------------------------------- local geometry


@dataclass(frozen=True)
class _PoleExit:
    """Exit circle of a pole inside which trajectories are certified to converge."""

    center: complex | None  # None for infinity
    radius: float
    sqrt_res: complex  # root of the residue; sigma ~ sqrt_res/(z - p) (or ~ sqrt_res/z at infinity)
    certified: bool
    circle: bool


def _local_factor(p: QDParams, z: complex, center: complex | None) -> complex:
    """(z - p)*sigma(z) for a finite pole, z*sigma(z) at infinity, up to sign."""
    s = cmath.sqrt(p.phi(z))
    return s * ((z - center) if center is not None else z) / (z * z - 1)


def _pole_exit(p: QDParams, center: complex | None, res: complex, kind: PoleType, base_radius: float,
               far: float) -> _PoleExit:
    """Exit circle past which a trajectory heading for the pole is certified to reach it.

    Near the pole w = r*log(z - p) + psi(z) with r a root of the residue and psi
    analytic at the pole (at infinity w = r*log z + psi). Along a trajectory Im w is
    constant and Re w increases, so log|z - p| = (Re(conj(r)) Re w + const - Re(conj(r) psi)) / |r|^2.
    With eps = max |(z - p) sigma / r - 1| < 1/2 on a circle of radius rho, Schwarz's
    lemma gives |psi - psi(p)| <= |r| eps inside it; a trajectory with Re r < 0 (for
    infinity Re r > 0) that is deeper than rho*exp(-2 eps - 0.1) can never leave again
    and converges to the pole.
    """
    sq = cmath.sqrt(res)
    circle = kind == PoleType.CIRCLE
    theta = np.linspace(0.0, 2 * math.pi, 64, endpoint=False)
    if circle:
        return _PoleExit(center, base_radius, sq, False, True)
    if center is None:
        start = 2.0 * max(abs(p.a), abs(p.b), 1.0)
        radii = [start * 1.25 ** k for k in range(80)]
    else:
        others = [c for c in p.critical_points if c != center]
        rho = 0.5 * min(abs(center - c) for c in others)
        radii = [rho * 0.8 ** k for k in range(80)]
    for r in radii:
        z = (0j if center is None else center) + r * np.exp(1j * theta)
        f = np.array([_local_factor(p, complex(zz), center) for zz in z])
        f = np.where((f * np.conj(sq)).real >= 0, f, -f)
        eps = float(np.max(np.abs(f / sq - 1)))
        if eps < 0.5:
            factor = math.exp(2 * eps + 0.1)
            exit_r = r * factor if center is None else r / factor
            if center is None:
                if exit_r <= far:
                    return _PoleExit(center, exit_r, sq, True, False)
                break
            return _PoleExit(center, max(exit_r, base_radius), sq, True, False)
        if center is not None and r < base_radius:
            break
    # no certificate: fall back on the plain radius
    return _PoleExit(center, far if center is None else base_radius, sq, False, False)


def _heading_in(fld: "_Field", st: "_State", center: complex | None, ex: _PoleExit) -> bool:
    """Sign test on Re r for the branch the trace is following (see _pole_exit)."""
    f = fld.sigma(st.z, st.s)[0] * (st.z - center if center is not None else st.z)
    r = ex.sqrt_res if (f * ex.sqrt_res.conjugate()).real >= 0 else -ex.sqrt_res
    return r.real < 0 if center is not None else r.real > 0


@dataclass
class _Field:
    """Everything the stepper needs that depends only on the parameters and limits."""

    p: QDParams
    limits: StepLimits
    scale: float
    exits: dict[str, _PoleExit]

    @classmethod
    def build(cls, p: QDParams, limits: StepLimits) -> "_Field":
        scale = p.scale
        kinds = classify_poles(residues(p))
        res = residues(p)
        exits = {
            "-1": _pole_exit(p, -1.0 + 0j, res.res_minus1, kinds[0], limits.r_pole * scale, 0.0),
            "+1": _pole_exit(p, 1.0 + 0j, res.res_plus1, kinds[1], limits.r_pole * scale, 0.0),
            "inf": _pole_exit(p, None, res.res_inf, kinds[2], limits.r_inf * scale, 1e3 * limits.r_inf * scale),
        }
        return cls(p, limits, scale, exits)

    def sigma(self, z: complex, s_ref: complex) -> tuple[complex, complex]:
        s = nearest_root(self.p.phi(z), s_ref)
        return s / (z * z - 1), s

    def velocity(self, z: complex, s_ref: complex) -> tuple[complex, complex]:
        sig, s = self.sigma(z, s_ref)
        return sig.conjugate() / abs(sig), s

    def dist(self, z: complex) -> float:
        return min(abs(z - c) for c in self.p.critical_points)


# --------------------------------------------------------------------------- stepping


def _rk_step(fld: _Field, z: complex, s: complex, k1: complex, h: float) -> tuple[complex, complex, float, complex]:
    ks = [k1]
    for i in range(1, 7):
        zi = z + h * sum(a * k for a, k in zip(_A[i], ks))
        ki, _ = fld.velocity(zi, s)
        ks.append(ki)
    z_new = z + h * sum(b * k for b, k in zip(_B5, ks))
    err = abs(h * sum(e * k for e, k in zip(_E, ks)))
    k_new, s_new = fld.velocity(z_new, s)
    return z_new, s_new, err, k_new


def _chord_integral(fld: _Field, z0: complex, s0: complex, z1: complex) -> complex:
    d = z1 - z0
    total = 0j
    s = s0
    for x, w in zip(_GL5_X, _GL5_W):
        t = z0 + d * x
        sig, s = fld.sigma(t, s)
        total += w * sig
    return total * d


def _project(fld: _Field, z: complex, s: complex, im_excess: float, d: float) -> tuple[complex, complex, float]:
    """Move z across the level set by -i*delta/sigma (one Newton step on Im w)."""
    sig, s = fld.sigma(z, s)
    dz = -1j * im_excess / sig
    if abs(dz) > 0.05 * d:
        return z, s, 0.0
    z_new = z + dz
    _, s_new = fld.sigma(z_new, s)
    return z_new, s_new, abs(dz)


@dataclass
class _State:
    z: complex
    s: complex
    k: complex
    w: complex
    arclength: float


def _advance(fld: _Field, st: _State, h: float, target_im: float) -> _State:
    """One accepted step of length h from st, with projection; error control done by caller."""
    z1, s1, _, _ = _rk_step(fld, st.z, st.s, st.k, h)
    return _finish(fld, st, z1, s1, target_im)


def _finish(fld: _Field, st: _State, z1: complex, s1: complex, target_im: float) -> _State:
    w1 = st.w + _chord_integral(fld, st.z, st.s, z1)
    d1 = fld.dist(z1)
    excess = w1.imag - target_im
    if excess != 0.0:
        z2, s2, moved = _project(fld, z1, s1, excess, d1)
        if moved:
            w1 = st.w + _chord_integral(fld, st.z, st.s, z2)
            z1, s1 = z2, s2
    k1, s1 = fld.velocity(z1, s1)
    return _State(z1, s1, k1, w1, st.arclength + abs(z1 - st.z))


def _locate(fld: _Field, st: _State, h: float, g, target_im: float) -> _State:
    """Secant search on the step size for the root of g between st (g>0) and a step h (g<=0)."""
    lo, hi = 0.0, h
    g_lo = g(st.z)
    g_hi = g(_advance(fld, st, h, target_im).z)
    best = None
    for _ in range(30):
        if g_hi == g_lo:
            break
        mid = hi - g_hi * (hi - lo) / (g_hi - g_lo)
        if not (min(lo, hi) < mid < max(lo, hi)):
            mid = 0.5 * (lo + hi)
        cand = _advance(fld, st, mid, target_im)
        gm = g(cand.z)
        best = cand
        if abs(gm) <= 1e-13 * fld.scale:
            break
        if gm > 0:
            lo, g_lo = mid, gm
        else:
            hi, g_hi = mid, gm
        if abs(hi - lo) <= 1e-15 * max(h, 1e-300):
            break
    return best if best is not None else _advance(fld, st, h, target_im)


def _densify(fld: _Field, a: _State, b: _State, target_im: float, sag_tol: float) -> list[complex]:
    """Points strictly between a and b on the trajectory, spaced so the chords deviate
    from the curve by less than ``sag_tol``: cubic Hermite guesses projected onto the level set."""
    h = abs(b.z - a.z)
    sag = h * abs(b.k - a.k) / 8
    if sag <= sag_tol:
        return []
    m = min(int(math.ceil(math.sqrt(sag / sag_tol))), 32)
    out = []
    for j in range(1, m):
        t = j / m
        h00, h10 = 2 * t**3 - 3 * t**2 + 1, t**3 - 2 * t**2 + t
        h01, h11 = -2 * t**3 + 3 * t**2, t**3 - t**2
        q = h00 * a.z + h10 * h * a.k + h01 * b.z + h11 * h * b.k
        s = a.s
        for _ in range(2):
            w = a.w + _chord_integral(fld, a.z, a.s, q)
            sig, s = fld.sigma(q, s)
            q = q - 1j * (w.imag - target_im) / sig
        out.append(q)
    return out


# --------------------------------------------------------------------------- trace


def _initial_state(fld: _Field, start: complex, direction: complex, zero: complex | None) -> _State:
    """State at the start point, with w anchored at ``zero`` (w = 0 there) or at ``start``."""
    p = fld.p
    s = complex(cmath.sqrt(p.phi(start)))
    sig = s / (start * start - 1)
    # orient the branch so the field points along the requested direction
    if (sig.conjugate() * direction.conjugate()).real < 0:
        s = -s
    w0 = 0j
    if zero is not None:
        w0, _, s_end = path_integral(p, np.array([zero, start]), s, (True, False))
        if (s_end * s.conjugate()).real < 0:
            w0 = -w0
    k, s = fld.velocity(start, s)
    return _State(complex(start), s, k, w0, 0.0)


def trace(p: QDParams, start: complex, direction: complex, limits: StepLimits | None = None,
          zero: str | None = None, angle_index: int = -1, _field: _Field | None = None) -> TrajectoryRecord:
    """Follow the trajectory through ``start`` in ``direction``.

    ``zero`` names the zero ("a" or "b") the launch point was offset from; the record
    then includes that zero as its first point and the level is Im w = 0 with w
    anchored at the zero. For regular starts the level is the one through ``start``
    and a return to ``start`` is reported as ClosedLoop.
    """
    limits = limits or StepLimits()
    fld = _field or _Field.build(p, limits)
    scale = fld.scale
    start = complex(start)
    direction = complex(direction) / abs(direction)
    own = {"a": p.a, "b": p.b}.get(zero) if zero else None
    other = {"a": p.b, "b": p.a}.get(zero) if zero else None
    st = _initial_state(fld, start, direction, own)
    target = 0.0
    pts = [own, st.z] if own is not None else [st.z]
    sag_tol = 1e-5 * scale

    def push(a: _State, b: _State) -> None:
        pts.extend(_densify(fld, a, b, target, sag_tol))
        pts.append(b.z)
    gap_accept = limits.gap_accept * scale
    arm_own = limits.delta_short * scale
    own_armed = False
    loop_armed = False
    closest = math.inf
    est_error = 0.0
    im_drift = 0.0
    h = min(limits.max_step_ratio * fld.dist(st.z), 0.01 * scale)
    rec_fate, rec_gap = Fate.TRUNCATED, math.inf
    diags: list[str] = []
    steps = 0
    exits = fld.exits
    max_len = limits.max_arclength * scale

    def pole_g(center: complex, radius: float):
        return lambda z: abs(z - center) - radius

    while True:
        if steps >= limits.max_steps or st.arclength >= max_len:
            diags.append("step or arclength limit reached")
            rec_fate, rec_gap = Fate.TRUNCATED, math.inf
            break
        d = fld.dist(st.z)
        h_max = limits.max_step_ratio * d
        h = min(h, h_max)
        if h < 1e-14 * scale:
            raise TracerError("step size underflow", st.z)
        tol = limits.rtol * d
        z1, s1, err, _ = _rk_step(fld, st.z, st.s, st.k, h)
        if err > tol:
            h *= max(0.2, 0.9 * (tol / err) ** 0.2)
            continue
        steps += 1
        new = _finish(fld, st, z1, s1, target)
        im_drift = max(im_drift, abs((st.w + _chord_integral(fld, st.z, st.s, z1)).imag - target))
        est_error += err
        h_next = h * min(5.0, 0.9 * (tol / max(err, 1e-300)) ** 0.2)

        # events, checked on the step st -> new
        event = None
        for key, center in (("-1", -1.0 + 0j), ("+1", 1.0 + 0j)):
            ex = exits[key]
            if abs(new.z - center) < ex.radius <= abs(st.z - center):
                if not ex.certified or ex.circle or _heading_in(fld, new, center, ex):
                    event = ("pole", key, ex)
        ex_inf = exits["inf"]
        if event is None and not ex_inf.circle and abs(st.z) < ex_inf.radius <= abs(new.z):
            if not ex_inf.certified or _heading_in(fld, new, None, ex_inf):
                event = ("inf", "inf", ex_inf)
        if event is None and own is None and loop_armed:
            g_prev = ((st.z - start) * direction.conjugate()).real
            g_new = ((new.z - start) * direction.conjugate()).real
            if g_prev < 0 <= g_new and abs(new.z - start) < 10 * limits.delta_loop * scale + h:
                event = ("loop", None, None)

        if event is not None:
            kind, key, ex = event
            if kind == "pole":
                center = -1.0 + 0j if key == "-1" else 1.0 + 0j
                hit = _locate(fld, st, h, pole_g(center, ex.radius), target)
                push(st, hit)
                st = hit
                if ex.circle:
                    diags.append(f"entered the disk of the Circle-type pole {key}")
                    rec_fate, rec_gap = Fate.TRUNCATED, abs(hit.z - center)
                else:
                    if not ex.certified:
                        diags.append(f"pole {key} reached at r_pole without certificate")
                    rec_fate = Fate.TO_POLE_MINUS1 if key == "-1" else Fate.TO_POLE_PLUS1
                    rec_gap = abs(hit.z - center)
                break
            if kind == "inf":
                hit = _locate(fld, st, h, lambda z: ex.radius - abs(z), target)
                push(st, hit)
                st = hit
                if not ex.certified:
                    diags.append("left the infinity radius without certificate")
                rec_fate, rec_gap = Fate.TO_INFINITY, 1.0 / abs(hit.z)
                break
            if kind == "loop":
                hit = _locate(fld, st, h, lambda z: -((z - start) * direction.conjugate()).real, target)
                align = (hit.k * direction.conjugate()).real
                gap = abs(hit.z - start)
                if align > 0.999 and gap < limits.delta_loop * scale:
                    push(st, hit)
                    st = hit
                    rec_fate, rec_gap = Fate.CLOSED_LOOP, gap
                    break
                loop_armed = True

        push(st, new)
        st = new
        h = h_next
        if own is not None:
            d_own = abs(st.z - own)
            d_other = abs(st.z - other)
            closest = min(closest, d_other)
            if d_other < gap_accept:
                pts.append(other)
                rec_fate, rec_gap = Fate.TO_OTHER_ZERO, d_other
                break
            if not own_armed and d_own > arm_own:
                own_armed = True
            if own_armed and d_own < gap_accept:
                pts.append(own)
                rec_fate, rec_gap = Fate.CLOSED_LOOP, d_own
                break
        elif not loop_armed and abs(st.z - start) > 10 * limits.delta_loop * scale:
            loop_armed = True

    poly = PathPolyline(np.array(pts, dtype=complex))
    record = TrajectoryRecord(
        origin=zero or "regular",
        angle_index=angle_index,
        polyline=poly,
        fate=rec_fate,
        terminal_gap=rec_gap,
        arclength=poly.length,
        est_error=est_error + (rec_gap if rec_fate in (Fate.TO_OTHER_ZERO, Fate.CLOSED_LOOP) else 0.0),
        closest_approach=closest,
        im_drift=im_drift,
        steps=steps,
        diagnostics=diags,
    )
    return record


def trace_critical(p: QDParams, zero: str, k: int, limits: StepLimits | None = None,
                   _field: _Field | None = None) -> TrajectoryRecord:
    limits = limits or StepLimits()
    z0 = p.a if zero == "a" else p.b
    theta = launch_directions(p, z0).directions[k]
    e = cmath.exp(1j * theta)
    return trace(p, z0 + limits.eps_launch * p.scale * e, e, limits, zero=zero, angle_index=k, _field=_field)


# --------------------------------------------------------------------------- invariant


def im_invariant(p: QDParams, record: TrajectoryRecord) -> float:
    """Largest |Im int sigma| from the start to any polyline vertex, by the periods quadrature."""
    pts = record.polyline.points
    singular = record.origin in ("a", "b")
    start_zero = singular
    end_zero = record.fate in (Fate.TO_OTHER_ZERO,) or (record.fate == Fate.CLOSED_LOOP and singular)
    worst = 0.0
    total = 0j
    s = None
    # integrate vertex by vertex so every partial sum is checked
    n = pts.size
    for k in range(n - 1):
        seg = pts[k:k + 2]
        ends = (start_zero and k == 0, end_zero and k == n - 2)
        val, _, s_new = path_integral(p, seg, s, ends)
        total += val
        s = s_new
        worst = max(worst, abs(total.imag))
    return worst


# --------------------------------------------------------------------------- graph


def refine_short(p: QDParams, forward: TrajectoryRecord, backward: TrajectoryRecord,
                 delta_match: float | None = None) -> PathPolyline:
    """Merge a trace a -> b with a trace b -> a into one polyline from a to b."""
    delta_match = 1e-3 * p.scale if delta_match is None else delta_match
    if forward.fate != Fate.TO_OTHER_ZERO or backward.fate != Fate.TO_OTHER_ZERO:
        raise TracerError("refine_short needs two ToOtherZero traces")
    f = forward.polyline if forward.origin == "a" else forward.polyline.reversed()
    b = backward.polyline.reversed() if backward.origin == "b" else backward.polyline
    dist = hausdorff_distance(f, b)
    if dist >= delta_match:
        raise TracerError(f"traces are not one trajectory (Hausdorff distance {dist:.3g})")
    half = 0.5 * f.length
    fk = np.searchsorted(f.cumulative_length, half)
    head = f.points[:max(fk, 1)]
    # continue with the backward trace from its point nearest to the join
    bk = int(np.argmin(np.abs(b.points - head[-1])))
    tail = b.points[bk:]
    if tail.size and abs(tail[0] - head[-1]) == 0:
        tail = tail[1:]
    pts = np.concatenate((head, tail))
    pts[0], pts[-1] = p.a, p.b
    return PathPolyline(pts)


def _short_from_single(p: QDParams, rec: TrajectoryRecord) -> PathPolyline:
    poly = rec.polyline if rec.origin == "a" else rec.polyline.reversed()
    pts = poly.points.copy()
    pts[0], pts[-1] = p.a, p.b
    return PathPolyline(pts)


def _self_loop_windings(poly: PathPolyline) -> tuple[int, int]:
    loop = PathPolyline(poly.points[:-1], closed=True) if poly.points[0] == poly.points[-1] else poly.close()
    return winding_number(loop, -1.0), winding_number(loop, 1.0)


def _loop_family(p: QDParams, fld: _Field, limits: StepLimits) -> list[LoopRecord]:
    out = []
    for key, center in (("-1", -1.0 + 0j), ("+1", 1.0 + 0j)):
        if not fld.exits[key].circle:
            continue
        others = [c for c in p.critical_points if c != center]
        r = 0.1 * min(abs(center - c) for c in others)
        start = center + r * 1j
        sig, _ = fld.sigma(start, cmath.sqrt(p.phi(start)))
        direction = sig.conjugate() / abs(sig)
        lim = replace(limits, max_arclength=min(limits.max_arclength, 100.0))
        try:
            rec = trace(p, start, direction, lim, _field=fld)
        except TracerError:
            continue
        if rec.fate == Fate.CLOSED_LOOP:
            wm, wp = _self_loop_windings(rec.polyline)
            out.append(LoopRecord("family", rec.polyline, None, wm, wp))
    return out


def _classify_topology(p: QDParams, traces: list[TrajectoryRecord], shorts: list[ShortTrajectory],
                       self_loops: list[LoopRecord]) -> Topology:
    n = len(shorts)
    if n == 3:
        return Topology.REAL_LOOPS_COMMON_EDGE
    if n == 2:
        curve = shorts[0].polyline.concat(shorts[1].polyline.reversed()).close()
        try:
            wm, wp = abs(winding_number(curve, -1.0)), abs(winding_number(curve, 1.0))
        except ValueError:
            return Topology.OTHER
        return Topology.TWO_SHORT_JORDAN_CURVE if (wm, wp) == (1, 1) else Topology.OTHER
    if n == 1:
        if len(self_loops) >= 2:
            return Topology.REAL_LOOPS_PLUS_SEGMENT
        infinite = [t for t in traces if t.fate in (Fate.TO_POLE_MINUS1, Fate.TO_POLE_PLUS1, Fate.TO_INFINITY)]
        if len(infinite) >= 2 and not any(t.fate == Fate.TRUNCATED for t in traces):
            return Topology.ONE_SHORT_TWO_INFINITE
        return Topology.OTHER
    if n == 0:
        return Topology.NO_SHORT
    return Topology.OTHER


def _trace_all(p: QDParams, limits: StepLimits, workers: int | None) -> tuple[_Field, list[TrajectoryRecord]]:
    fld = _Field.build(p, limits)
    jobs = [(z, k) for z in ("a", "b") for k in range(3)]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(lambda job: trace_critical(p, job[0], job[1], limits, fld), jobs))
    else:
        traces = [trace_critical(p, z, k, limits, fld) for z, k in jobs]
    return fld, traces


def _assemble(p: QDParams, fld: _Field, traces: list[TrajectoryRecord], limits: StepLimits) -> CriticalGraph:
    scale = p.scale
    delta_match = 1e-3 * scale
    warnings: list[str] = []
    inconsistencies: list[str] = []
    for i, t in enumerate(traces):
        if t.fate == Fate.TRUNCATED:
            warnings.append(f"trajectory {i} ({t.origin}, k={t.angle_index}) truncated: {'; '.join(t.diagnostics)}")
        elif t.diagnostics:
            warnings.append(f"trajectory {i}: {'; '.join(t.diagnostics)}")

    hits_a = [i for i, t in enumerate(traces) if t.origin == "a" and t.fate == Fate.TO_OTHER_ZERO]
    hits_b = [i for i, t in enumerate(traces) if t.origin == "b" and t.fate == Fate.TO_OTHER_ZERO]
    candidates = []
    for i in hits_a:
        fa = traces[i].polyline
        for j in hits_b:
            fb = traces[j].polyline.reversed()
            candidates.append((hausdorff_distance(fa, fb), i, j))
    candidates.sort()
    used_a, used_b = set(), set()
    pairs: list[tuple[int, int | None]] = []
    for dist, i, j in candidates:
        if i in used_a or j in used_b or dist >= delta_match:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append((i, j))
    for i in hits_a + hits_b:
        if i not in used_a and i not in used_b:
            pairs.append((i, None))
            warnings.append(f"trajectory {i} reaches the other zero without a matching partner trace")

    ref = None
    try:
        ref = reference_arc(p)
    except PeriodError as exc:
        warnings.append(f"no reference arc: {exc}")
    shorts: list[ShortTrajectory] = []
    for i, j in pairs:
        if j is not None:
            fwd, bwd = (traces[i], traces[j]) if traces[i].origin == "a" else (traces[j], traces[i])
            poly = refine_short(p, fwd, bwd, delta_match)
        else:
            poly = _short_from_single(p, traces[i])
        period = None
        if ref is not None:
            try:
                period = classify_arc(p, poly, ref)
            except (PeriodError, RuntimeError) as exc:
                warnings.append(f"short period failed: {exc}")
        shorts.append(ShortTrajectory(poly, period, (i, j)))
    # deduplicate single-trace shorts that duplicate a paired one
    shorts.sort(key=lambda s: s.sources[1] is None)
    kept: list[ShortTrajectory] = []
    for s in shorts:
        if any(hausdorff_distance(s.polyline, k.polyline) < delta_match for k in kept):
            continue
        kept.append(s)
    shorts = kept

    self_loops: list[LoopRecord] = []
    done = set()
    for i, t in enumerate(traces):
        if t.fate != Fate.CLOSED_LOOP or i in done:
            continue
        partner = None
        for j, u in enumerate(traces):
            if j != i and j not in done and u.origin == t.origin and u.fate == Fate.CLOSED_LOOP:
                if hausdorff_distance(t.polyline, u.polyline.reversed()) < delta_match:
                    partner = j
                    break
        done.add(i)
        if partner is not None:
            done.add(partner)
        wm, wp = _self_loop_windings(t.polyline)
        self_loops.append(LoopRecord("critical", t.polyline, t.origin, wm, wp,
                                     (i,) if partner is None else (i, partner)))
    loops = self_loops + _loop_family(p, fld, limits)

    pp = property_p(p)
    if bool(shorts) != pp.satisfied:
        inconsistencies.append(
            f"{len(shorts)} short trajectories found but Property P is {'satisfied' if pp.satisfied else 'not satisfied'}")
    classes = [s.period.pair for s in shorts if s.period is not None and s.period.pair is not None]
    if len(set(classes)) != len(classes):
        inconsistencies.append("two short trajectories share a homotopy class")
    for s in shorts:
        if s.period is not None and s.matched_class is None:
            inconsistencies.append("short trajectory period matches no class")
        elif s.period is not None and abs(s.period.value.imag) > 1e-6 * (1 + abs(s.period.value)):
            inconsistencies.append(f"short trajectory period {s.period.value:.6g} is not real")
    for t in traces:
        if t.fate == Fate.TRUNCATED and any("Circle-type" in d for d in t.diagnostics):
            inconsistencies.append("a critical trajectory entered a Circle-type pole")
    topology = _classify_topology(p, traces, shorts, self_loops)
    return CriticalGraph(p, traces, shorts, loops, topology, pp.satisfied, inconsistencies, warnings)


def build_graph(p: QDParams, limits: StepLimits | None = None, workers: int | None = None,
                retry: bool = True) -> CriticalGraph:
    """Trace the six critical trajectories and assemble the critical graph.

    When the traced shorts disagree with Property P, or a trace misses the other
    zero by less than delta_short, everything is retraced once with tightened
    tolerances and the second result is kept.
    """
    limits = limits or StepLimits()
    fld, traces = _trace_all(p, limits, workers)
    graph = _assemble(p, fld, traces, limits)
    near_miss = any(t.fate != Fate.TO_OTHER_ZERO and t.closest_approach < limits.delta_short * p.scale
                    for t in traces)
    if retry and (graph.inconsistencies or near_miss):
        tight = limits.tightened()
        fld2, traces2 = _trace_all(p, tight, workers)
        graph = _assemble(p, fld2, traces2, tight)
        graph.retried = True
    return graph
