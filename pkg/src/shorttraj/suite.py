"""Seeded invariant checks shared by the ``verify`` command and the tests.

Each check draws its own cases from a numpy generator, so a (check, seed) pair is
reproducible on its own. A failing check lists the offending parameters.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import jacobi, qdiff, tracer
from .geometry import PathPolyline, distance_to_polyline, winding_number
from .periods import PeriodError, classify_arc, loop_period, loop_residue_value, reference_arc


@dataclass
class CheckResult:
    name: str
    cases: int
    worst: float
    tol: float
    failures: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.cases > 0 and not self.failures

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<24} cases={self.cases:<4} worst={self.worst:.3e} tol={self.tol:.1e}"


def _cz(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def random_AB(rng: np.random.Generator, radius: float = 5.0, margin: float = 0.05) -> tuple[complex, complex]:
    """A pair in the disk of the given radius away from A+B+1 = 0 and A+B+2 = 0."""
    while True:
        r = radius * np.sqrt(rng.uniform(size=2))
        t = rng.uniform(0, 2 * math.pi, size=2)
        A, B = (complex(cmath.rect(r[k], t[k])) for k in range(2))
        if abs(A + B + 1) < margin or abs(A + B + 2) < margin:
            continue
        try:
            qdiff.from_jacobi(A, B)
        except qdiff.ParameterError:
            continue
        return A, B


def _rel(x: complex, y: complex, scale: float) -> float:
    return abs(x - y) / max(scale, 1e-300)


def check_identities(seed: int = 0, count: int = 100, tol: float = 1e-10) -> CheckResult:
    rng = np.random.default_rng(seed)
    res = CheckResult("identities", 0, 0.0, tol)
    for _ in range(count):
        A, B = random_AB(rng)
        s = A + B + 2
        zp, zm = qdiff.jacobi_zeros(A, B)
        errs = []
        for z in (zp, zm):
            size = abs(s * s * z * z) + abs(2 * (A * A - B * B) * z) + abs((A - B) ** 2) + abs(4 * (A + B + 1))
            errs.append(abs(qdiff.R_AB(A, B, z)) / size)
        errs.append(_rel(qdiff.R_AB(A, B, 1), 4 * A * A, abs(4 * A * A)))
        errs.append(_rel(qdiff.R_AB(A, B, -1), 4 * B * B, abs(4 * B * B)))
        errs.append(_rel(s * s * (zp - 1) * (zm - 1), 4 * A * A, abs(4 * A * A)))
        errs.append(_rel(s * s * (zp + 1) * (zm + 1), 4 * B * B, abs(4 * B * B)))
        worst = max(errs)
        res.cases += 1
        res.worst = max(res.worst, worst)
        if worst > tol:
            res.failures.append({"A": _cz(A), "B": _cz(B), "error": worst})
    return res


def _random_triple(rng: np.random.Generator) -> qdiff.QDParams:
    while True:
        a, b = (complex(*rng.uniform(-2, 2, size=2)) for _ in range(2))
        lam = complex(*rng.uniform(-2, 2, size=2))
        try:
            p = qdiff.validate(a, b, lam)
        except qdiff.ParameterError:
            continue
        if min(abs(z - c) for z in p.zeros for c in (-1, 1)) > 0.1 and abs(a - b) > 0.1:
            return p


def random_loop(rng: np.random.Generator, p: qdiff.QDParams, clearance: float = 0.05) -> PathPolyline | None:
    """A random circle, ellipse or rounded triangle that keeps clear of the critical points
    and does not separate the two zeros."""
    center = complex(*rng.uniform(-2.5, 2.5, size=2))
    radius = rng.uniform(0.3, 4.0)
    n = 400
    t = np.linspace(0, 2 * math.pi, n, endpoint=False)
    kind = rng.integers(3)
    if kind == 0:
        shape = np.exp(1j * t)
    elif kind == 1:
        shape = np.cos(t) + 1j * rng.uniform(0.4, 1.0) * np.sin(t)
    else:
        shape = np.exp(1j * t) * (1 + 0.15 * np.cos(3 * t))
    pts = center + radius * shape * cmath.exp(1j * rng.uniform(0, math.pi))
    if rng.integers(2):
        pts = pts[::-1]
    loop = PathPolyline(pts, closed=True)
    crit = np.array(p.critical_points)
    if float(np.min(distance_to_polyline(crit, loop))) < clearance * p.scale:
        return None
    if winding_number(loop, p.a) != winding_number(loop, p.b):
        return None
    return loop


def check_residue_oracle(seed: int = 0, count: int = 20, tol: float = 1e-8) -> CheckResult:
    rng = np.random.default_rng(seed)
    res = CheckResult("residue_oracle", 0, 0.0, tol)
    while res.cases < count:
        p = _random_triple(rng)
        loop = random_loop(rng, p)
        if loop is None:
            continue
        try:
            rep = loop_period(p, loop)
            ref = loop_residue_value(p, loop, rep.start)
        except PeriodError as exc:
            res.failures.append({"params": p.to_dict(), "error": str(exc)})
            res.cases += 1
            continue
        err = abs(rep.value - ref) / (1 + abs(ref))
        res.cases += 1
        res.worst = max(res.worst, err)
        if err > tol:
            res.failures.append({"params": p.to_dict(), "value": _cz(rep.value), "oracle": _cz(ref)})
    return res


def waypoint_arc(p: qdiff.QDParams, w: complex, clearance: float = 0.02) -> PathPolyline | None:
    """The simple two-segment arc a -> w -> b, or None when it passes close to a pole
    or runs back through a zero."""
    arc = PathPolyline.through(p.a, w, p.b, per_leg=32)
    poles = np.array([-1.0 + 0j, 1.0 + 0j])
    if float(np.min(distance_to_polyline(poles, arc))) < clearance * p.scale:
        return None
    inner = PathPolyline(arc.points[1:-1])
    if float(np.min(distance_to_polyline(np.array(p.zeros), inner))) < clearance * p.scale:
        return None
    # both legs must leave their zero: a degenerate corner would fold the arc back
    for z0, z1 in ((p.a, w), (p.b, w)):
        if abs(z1 - z0) < clearance * p.scale:
            return None
    return arc


def check_period_classes(seed: int = 0, count: int = 8, tol: float = 1e-7) -> CheckResult:
    """Simple arcs from a to b in all four winding archetypes relative to the reference
    arc carry one of the four class values."""
    rng = np.random.default_rng(seed)
    res = CheckResult("period_classes", 0, 0.0, tol)
    per_archetype: dict[tuple[int, int], int] = {pair: 0 for pair in ((0, 0), (0, 1), (1, 0), (1, 1))}
    tries = 0
    while min(per_archetype.values()) < count and tries < 400 * count:
        tries += 1
        A, B = random_AB(rng, radius=3.0, margin=0.2)
        p = qdiff.from_jacobi(A, B)
        if min(abs(z - c) for z in p.zeros for c in (-1, 1)) < 0.1 or abs(p.a - p.b) < 0.1:
            continue
        try:
            ref = reference_arc(p)
        except PeriodError:
            continue
        mid = 0.5 * (p.a + p.b)
        w = mid + 2 * p.scale * complex(*rng.uniform(-1, 1, size=2))
        arc = waypoint_arc(p, w)
        if arc is None:
            continue
        loop = arc.concat(ref.reversed()).close()
        parity = (winding_number(loop, -1.0) % 2, winding_number(loop, 1.0) % 2)
        if per_archetype[parity] >= count:
            continue
        try:
            rep = classify_arc(p, arc, reference=ref, tol=tol)
        except PeriodError:
            continue
        per_archetype[parity] += 1
        res.cases += 1
        if rep.matched_class is None:
            res.failures.append({"A": _cz(A), "B": _cz(B), "waypoint": _cz(w), "archetype": list(parity),
                                 "diagnostics": rep.diagnostics})
            continue
        v = qdiff.period_values(p)[rep.pair]
        res.worst = max(res.worst, abs(rep.value - rep.sign * v) / (1 + abs(v)))
    missing = [list(k) for k, v in per_archetype.items() if v < count]
    if missing:
        res.failures.append({"incomplete_archetypes": missing})
    return res


def check_jacobi(seed: int = 0, count: int = 6, tol_root: float = jacobi.TOL_POLY) -> CheckResult:
    """Root certificate, dual Cauchy formula, far-field law and the Rodrigues cross-check."""
    rng = np.random.default_rng(seed)
    res = CheckResult("jacobi", 0, 0.0, tol_root)
    degrees = (3, 8, 16, 32, 64, 5)
    for i in range(count):
        A, B = random_AB(rng, radius=2.0, margin=0.2)
        n = degrees[i % len(degrees)]
        case = {"A": _cz(A), "B": _cz(B), "n": n}
        try:
            spec = jacobi.build(n, n * A, n * B)
            rs = jacobi.roots(spec, tol=tol_root)
        except jacobi.JacobiError as exc:
            res.cases += 1
            res.failures.append({**case, "error": str(exc)})
            continue
        res.cases += 1
        res.worst = max(res.worst, rs.residual)
        problems = []
        if rs.residual_norm > 1e-8:
            problems.append(f"|P(root)|/|c| = {rs.residual_norm:.3g}")
        rmax = float(np.max(np.abs(rs.roots))) if rs.degree else 1.0
        for z in (rmax * 0.7 + 0.31j, 2.3 * rmax * cmath.exp(1j * rng.uniform(0, 6.28))):
            try:
                c1, c2 = jacobi.cauchy(rs, z), jacobi.cauchy_from_coeffs(spec, z)
            except jacobi.JacobiError:
                continue
            if abs(c1 - c2) > 1e-9 * abs(c2):
                problems.append(f"dual Cauchy mismatch {abs(c1 - c2) / abs(c2):.3g} at {z}")
        for z in (4 * rmax, -4.5j * rmax, 7 * rmax * cmath.exp(0.7j)):
            bound = 2 * rmax / abs(z)
            if abs(z * jacobi.cauchy(rs, z) - 1) > bound:
                problems.append(f"far-field law fails at {z}")
        if n <= 6:
            for z in (0.3 + 0.2j, -0.5 + 1j, 2.0, 1.5j, -2 - 0.5j):
                want = jacobi.rodrigues(n, n * A, n * B, z)
                if abs(spec(z) - want) > 1e-6 * max(1.0, abs(want)):
                    problems.append(f"Rodrigues mismatch at {z}")
        if problems:
            res.failures.append({**case, "problems": problems})
    return res


def check_property_p(seed: int = 0, count: int = 6) -> CheckResult:
    """Analytic Property P against short detection in the traced critical graph."""
    rng = np.random.default_rng(seed)
    res = CheckResult("property_p", 0, 0.0, 0.0)
    for i in range(count):
        p = property_p_case(rng, i)
        g = tracer.build_graph(p)
        pp = qdiff.property_p(p)
        res.cases += 1
        if pp.satisfied != bool(g.shorts) or g.inconsistencies:
            res.failures.append({"params": p.to_dict(), "analytic": pp.satisfied, "shorts": len(g.shorts),
                                 "inconsistencies": g.inconsistencies})
    return res


def property_p_case(rng: np.random.Generator, i: int) -> qdiff.QDParams:
    """Even cases are built to satisfy Property P through a random class, odd cases are generic."""
    while True:
        a, b = (complex(*rng.uniform(-2, 2, size=2)) for _ in range(2))
        if i % 2 == 0:
            pair = qdiff.SIGN_PAIRS[int(rng.integers(4))]
            r = float(rng.uniform(0.5, 3.0)) * (1 if rng.integers(2) else -1)
            try:
                lam = qdiff.lambda_for_class(a, b, pair, r)
            except qdiff.ParameterError:
                continue
        else:
            lam = complex(*rng.uniform(-2, 2, size=2))
        try:
            p = qdiff.validate(a, b, lam)
            qdiff.classify_poles(qdiff.residues(p))
        except qdiff.ParameterError:
            continue
        if min(abs(z - c) for z in p.zeros for c in (-1, 1)) > 0.05 and abs(a - b) > 0.05:
            return p


def run_all(seed: int = 0, tol_root: float = jacobi.TOL_POLY, graphs: int = 6) -> list[CheckResult]:
    return [
        check_identities(seed),
        check_residue_oracle(seed),
        check_period_classes(seed),
        check_jacobi(seed, tol_root=tol_root),
        check_property_p(seed, graphs),
    ]
