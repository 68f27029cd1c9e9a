import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shorttraj import qdiff
from shorttraj.branch import (
    BranchError,
    BranchState,
    branch_at,
    continue_along,
    continue_samples,
    root_at_infinity,
    side_values,
)
from shorttraj.geometry import PathPolyline

P23 = qdiff.validate(2, 3, 1)


def test_root_at_infinity_expansion():
    z = 1e6
    s = root_at_infinity(P23, z).s
    # sqrt((z-2)(z-3)) = z - 5/2 - 1/(8z) + ...
    assert abs(s - (z - 2.5 - 1 / (8 * z))) < 1e-8
    neg = root_at_infinity(qdiff.validate(2, 3, -1), z).s
    assert neg == pytest.approx(-s)
    assert s * s == pytest.approx(P23.phi(z), rel=1e-14)


def test_root_at_infinity_too_close():
    with pytest.raises(BranchError):
        root_at_infinity(P23, 3.5)


def _loop_around(center, radius, start_angle=0.3, n=200):
    t = start_angle + np.linspace(0, 2 * np.pi, n + 1)
    return PathPolyline(center + radius * np.exp(1j * t))


def test_monodromy_one_zero_flips():
    p = qdiff.validate(0.5 + 0.5j, -0.5 - 0.5j, 1.2 - 0.3j)
    path = _loop_around(p.a, 0.3)
    z0 = path.start
    start = BranchState(z0, cmath.sqrt(p.phi(z0)))
    end = continue_along(p, start, path)
    assert end.s == pytest.approx(-start.s, rel=1e-12)


def test_monodromy_both_zeros_preserved():
    p = qdiff.validate(0.5 + 0.5j, -0.5 - 0.5j, 1.2 - 0.3j)
    path = _loop_around(0, 3.0)
    start = BranchState(path.start, cmath.sqrt(p.phi(path.start)))
    assert continue_along(p, start, path).s == pytest.approx(start.s, rel=1e-12)


def test_continuation_matches_dense_oracle():
    p = qdiff.validate(0.2 + 1.5j, -0.7 - 1.1j, 0.5 + 2j)
    z0, z1 = -2.5 + 0.3j, 2.5 - 0.2j
    start = BranchState(z0, cmath.sqrt(p.phi(z0)))
    coarse = continue_along(p, start, PathPolyline.segment(z0, z1, 8)).s
    dense = start.s
    pts = z0 + (z1 - z0) * np.linspace(0, 1, 801)
    for z in pts[1:]:
        r = cmath.sqrt(p.phi(z))
        dense = r if abs(r - dense) <= abs(r + dense) else -r
    assert coarse == pytest.approx(dense, rel=1e-14)


def test_continuation_refuses_critical_points():
    with pytest.raises(BranchError):
        continue_samples(P23, BranchState(0j, cmath.sqrt(P23.phi(0))), np.array([0, 2.0000001 + 0j]))


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=60, deadline=None)
def test_continued_values_square_to_phi(x, y):
    p = qdiff.validate(0.3 - 0.4j, -1.6 + 0.2j, 0.8 + 0.6j)
    target = complex(x, y)
    if min(abs(target - c) for c in p.critical_points) < 0.05:
        return
    st_ = branch_at(p, target)
    assert abs(st_.s ** 2 - p.phi(target)) <= 1e-11 * (1 + abs(p.phi(target)))


def test_step_halving_stability():
    p = qdiff.validate(0.3 - 0.4j, -1.6 + 0.2j, 0.8 + 0.6j)
    path = PathPolyline.through(-3 - 2j, 2 + 2.5j, 3 - 1j, per_leg=10)
    start = BranchState(path.start, cmath.sqrt(p.phi(path.start)))
    fine = PathPolyline.through(-3 - 2j, 2 + 2.5j, 3 - 1j, per_leg=20)
    a = continue_along(p, start, path).s
    b = continue_along(p, start, fine).s
    assert abs(a - b) <= 1e-12 * abs(b)


def test_side_values_straight_arc():
    arc = PathPolyline.segment(2, 3, 4)
    plus, minus = side_values(P23, arc)
    mid = [k for k, st_ in enumerate(plus) if abs(st_.z - 2.5) < 1e-12]
    assert mid
    sp, sm = plus[mid[0]].s, minus[mid[0]].s
    assert abs(sp) == pytest.approx(0.5)
    assert sp == pytest.approx(-sm)
    for u, v in zip(plus, minus):
        assert abs(u.s + v.s) <= 1e-11 * (1 + abs(u.s))


def test_side_values_reversal_swaps():
    p = qdiff.validate(0.5 + 0.5j, -0.5 - 0.5j, 1.2 - 0.3j)
    arc = PathPolyline.segment(p.a, p.b, 6)
    plus, minus = side_values(p, arc)
    rplus, rminus = side_values(p, arc.reversed())
    by_z = {round(s.z.real, 12) + 1j * round(s.z.imag, 12): s.s for s in minus}
    for s in rplus:
        key = round(s.z.real, 12) + 1j * round(s.z.imag, 12)
        assert s.s == pytest.approx(by_z[key])
