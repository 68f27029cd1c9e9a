"""Acceptance criteria 1 to 11, each at its stated tolerance and time budget.

Every test records a one-line verdict that is printed in the terminal summary.
"""
import math
import time
from contextlib import contextmanager
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE, GRAPH_CASES, case_graph
from shorttraj import jacobi, qdiff, tracer
from shorttraj.geometry import winding_number
from shorttraj.periods import QDPolygon, arc_period, path_integral, teich_check
from shorttraj.suite import check_identities, check_period_classes, check_property_p, check_residue_oracle
from shorttraj.tracer import Fate, StepLimits, Topology

ONE_SHORT = (1 + 0.1j, -1 + 0.1j)
JORDAN = (1 + 0.1j, -1 - 0.1j)


@contextmanager
def criterion(k: int, budget: float | None = None):
    """Time the body, enforce the budget and record PASS/FAIL for the summary."""
    state = {"detail": ""}
    t0 = time.perf_counter()
    ok = False
    try:
        yield state
        elapsed = time.perf_counter() - t0
        if budget is not None:
            assert elapsed < budget, f"took {elapsed:.1f}s, budget {budget}s"
        ok = True
    finally:
        elapsed = time.perf_counter() - t0
        ACCEPTANCE[k] = (ok, f"{state['detail']} ({elapsed:.2f}s)".strip())
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'} {state['detail']}")


def test_criterion_01_identities():
    with criterion(1, 1.0) as c:
        r = check_identities(seed=1, count=100, tol=1e-10)
        c["detail"] = f"100 pairs, worst rel {r.worst:.1e}"
        assert r.passed and r.cases == 100, r.failures


def test_criterion_02_residue_oracle():
    with criterion(2, 5.0) as c:
        r = check_residue_oracle(seed=2, count=20, tol=1e-8)
        c["detail"] = f"20 loops, worst {r.worst:.1e}"
        assert r.passed and r.cases == 20, r.failures


def test_criterion_03_period_classes():
    with criterion(3, 10.0) as c:
        r = check_period_classes(seed=3, count=5, tol=1e-7)
        c["detail"] = f"{r.cases} arcs over 4 winding archetypes, worst {r.worst:.1e}"
        assert r.passed and r.cases == 20, r.failures


def test_criterion_04_dichotomy():
    with criterion(4, 30.0) as c:
        g1 = tracer.build_graph(qdiff.from_jacobi(*ONE_SHORT))
        assert len(g1.shorts) == 1
        gaps = [t.terminal_gap for t in g1.trajectories if t.fate == Fate.TO_OTHER_ZERO]
        assert gaps and max(gaps) < 1e-6 * g1.params.scale
        g2 = tracer.build_graph(qdiff.from_jacobi(*JORDAN))
        assert len(g2.shorts) == 2
        s0, s1 = g2.shorts
        curve = s0.polyline.concat(s1.polyline.reversed()).close()
        w = (winding_number(curve, -1.0), winding_number(curve, 1.0))
        assert tuple(map(abs, w)) == (1, 1)
        assert s0.matched_class != s1.matched_class and None not in (s0.matched_class, s1.matched_class)
        c["detail"] = (f"one short (gap {max(gaps) / g1.params.scale:.1e} scale); two shorts, winding {w}, "
                       f"classes {s0.matched_class} / {s1.matched_class}")


def test_criterion_05_real_cases():
    with criterion(5, 30.0) as c:
        g = tracer.build_graph(qdiff.from_jacobi(2, 3))
        (short,) = g.shorts
        s2 = 24 * math.sqrt(2)
        ends = sorted([short.polyline.start.real, short.polyline.end.real])
        assert ends == pytest.approx([(5 - s2) / 49, (5 + s2) / 49], abs=1e-12)
        imax = float(np.max(np.abs(short.polyline.points.imag)))
        assert imax < 1e-8
        around = {(abs(lp.winding_minus1), abs(lp.winding_plus1)) for lp in g.loops}
        assert {(1, 0), (0, 1)} <= around
        g2 = tracer.build_graph(qdiff.from_jacobi(-2, 3))
        assert g2.topology == Topology.REAL_LOOPS_COMMON_EDGE
        c["detail"] = f"segment max|Im| {imax:.1e}, loops around -1 and 1; A=-2 gives {g2.topology.value}"


def test_criterion_06_loop_family_case():
    with criterion(6, 30.0) as c:
        g = tracer.build_graph(qdiff.from_jacobi(-1.1 + 0.1j, 1))
        assert len(g.shorts) == 1
        family = [lp for lp in g.loops if abs(lp.winding_minus1) == 1 and lp.winding_plus1 == 0]
        assert family
        fates = {t.fate for t in g.trajectories}
        assert {Fate.TO_POLE_PLUS1, Fate.TO_INFINITY} <= fates
        c["detail"] = f"one short, {len(family)} loops around -1, fates {sorted(f.value for f in fates)}"


def test_criterion_07_normalization():
    with criterion(7) as c:
        g = case_graph("one_short")
        rep = arc_period(g.params, g.shorts[0].polyline)
        mass = abs(rep.jacobi_value / (2j * math.pi))
        c["detail"] = f"|period/(2 pi i)| = {mass:.12f}"
        assert abs(mass - 1) < 1e-6


def test_criterion_08_existence_iff_property_p():
    with criterion(8, 300.0) as c:
        r = check_property_p(seed=2024, count=50)
        c["detail"] = f"{r.cases} triples, {len(r.failures)} disagreements"
        assert r.cases == 50 and r.passed, r.failures


def test_criterion_09_jacobi_trend():
    with criterion(9, 60.0) as c:
        A, B = ONE_SHORT
        g = case_graph("one_short")
        mean, resid = [], []
        for n in (16, 32, 64):
            cmp = jacobi.compare(A, B, n, g)
            mean.append(cmp.mean_dist)
            rs = jacobi.roots(jacobi.build(n, n * A, n * B))
            resid.append(jacobi.quadratic_residual(A, B, 3, jacobi.cauchy(rs, 3)))
        c["detail"] = ("mean dist " + " > ".join(f"{x:.4f}" for x in mean)
                       + "; residual " + " > ".join(f"{x:.2e}" for x in resid))
        assert mean[0] > mean[1] > mean[2]
        assert resid[0] > resid[1] > resid[2]


def test_criterion_10_teichmuller():
    with criterion(10) as c:
        two = teich_check(QDPolygon(((1, 2 * math.pi / 3), (1, 2 * math.pi / 3))))
        pole = teich_check(QDPolygon(((1, 2 * math.pi / 3),), (-2,)))
        c["detail"] = f"two trajectories {two[0]:g} vs {two[1]:g}; loop around pole {pole[0]:g} vs {pole[1]:g}"
        assert two[0] == pytest.approx(0, abs=1e-15) and two[1] == 2 and not two[2]
        assert pole[0] == pytest.approx(0, abs=1e-15) and pole[1] == 0 and pole[2]


def _drift(p, pts, ends):
    """Largest |Im| of the running integral of sigma from the first vertex."""
    total, worst, s = 0j, 0.0, None
    n = len(pts)
    for k in range(n - 1):
        val, _, s = path_integral(p, pts[k:k + 2], s, (ends[0] and k == 0, ends[1] and k == n - 2))
        total += val
        worst = max(worst, abs(total.imag))
    return worst


def _arclength(pts):
    return float(np.sum(np.abs(np.diff(pts))))


def test_criterion_11_hygiene():
    with criterion(11) as c:
        worst_ratio, polylines, halving = 0.0, 0, 0.0
        for name in GRAPH_CASES:
            g = case_graph(name)
            tol = 1e-7 * g.params.scale
            for rec in g.trajectories:
                drift = tracer.im_invariant(g.params, rec)
                worst_ratio = max(worst_ratio, drift / (tol * (1 + rec.arclength)))
                polylines += 1
            for s in g.shorts:
                pts = s.polyline.points
                worst_ratio = max(worst_ratio, _drift(g.params, pts, (True, True)) / (tol * (1 + _arclength(pts))))
                polylines += 1
            for lp in g.loops:
                pts = lp.polyline.points
                zero = lp.kind == "critical"
                worst_ratio = max(worst_ratio, _drift(g.params, pts, (zero, zero)) / (tol * (1 + _arclength(pts))))
                polylines += 1
        finite = (Fate.TO_OTHER_ZERO, Fate.TO_POLE_PLUS1, Fate.TO_POLE_MINUS1, Fate.CLOSED_LOOP)
        lim = StepLimits()
        half = replace(lim, rtol=lim.rtol / 2)
        for name in ("one_short", "jordan", "loop_family"):
            p = qdiff.from_jacobi(*GRAPH_CASES[name])
            for origin in ("a", "b"):
                for k in range(3):
                    r1 = tracer.trace_critical(p, origin, k, lim)
                    r2 = tracer.trace_critical(p, origin, k, half)
                    assert r1.fate == r2.fate
                    if r1.fate in finite:
                        bound = 10 * max(r1.est_error, 1e-12) * max(1.0, abs(r1.terminal))
                        halving = max(halving, abs(r1.terminal - r2.terminal) / bound)
        c["detail"] = (f"{polylines} polylines, worst Im drift {worst_ratio:.1e} of budget; "
                       f"step halving {halving:.1e} of budget")
        assert worst_ratio <= 1.0
        assert halving <= 1.0
