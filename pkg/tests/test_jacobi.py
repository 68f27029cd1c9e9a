import cmath
import math
from dataclasses import replace

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shorttraj import jacobi
from shorttraj.jacobi import JacobiError

cplx = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)
A1, B1 = 1 + 0.1j, -1 + 0.1j

# frozen from this implementation, cross-checked against mpmath.polyroots
FROZEN_TREND = {
    16: (0.04770295056476405, 7.048753228284799e-4),
    32: (0.024423436082500756, 3.490246591355589e-4),
}


def test_build_degree_zero():
    spec = jacobi.build(0, 0.3j, 2)
    assert spec.coeffs.tolist() == [1]


def test_build_degree_one():
    al, be = 0.7 - 0.2j, -1.3 + 2j
    spec = jacobi.build(1, al, be)
    assert spec.coeffs == pytest.approx([(al - be) / 2, (al + be + 2) / 2])


def test_build_legendre():
    assert jacobi.build(2, 0, 0).coeffs == pytest.approx([-0.5, 0, 1.5])


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_build_against_rodrigues(n):
    al, be = 0.4 + 0.3j, -0.2 + 1.1j
    spec = jacobi.build(n, al, be)
    for z in (0.3 + 0.2j, -0.5 + 1j, 2.0, 1.5j, -2 - 0.5j):
        want = jacobi.rodrigues(n, al, be, z)
        assert abs(spec(z) - want) <= 1e-6 * max(1.0, abs(want))


@pytest.mark.parametrize("n", [8, 24, 64])
def test_build_against_mpmath(n):
    al, be = n * A1, n * B1
    spec = jacobi.build(n, al, be)
    with mpmath.workdps(spec.dps):
        for z in (0.3 + 0.2j, 3, -1.7 + 2j):
            got = mpmath.polyval(list(spec.mp_coeffs[::-1]), mpmath.mpc(z))
            want = mpmath.jacobi(n, mpmath.mpc(al), mpmath.mpc(be), mpmath.mpc(z))
            assert abs(got / want - 1) < 1e-20


def test_leading_coefficient():
    n, al, be = 7, 0.5 + 1j, -2.2
    spec = jacobi.build(n, al, be)
    assert spec.coeffs[-1] == pytest.approx(jacobi.leading_coefficient(n, al, be), rel=1e-12)


def test_degree_drop_flagged():
    # n + alpha + beta + 1 = -1 kills every coefficient above z^1
    spec = jacobi.build(3, -2.5 + 1j, -2.5 - 1j)
    assert spec.degree_dropped and spec.effective_degree == 1
    rs = jacobi.roots(spec)
    assert rs.degree == 1
    with mpmath.workdps(30):
        val = mpmath.jacobi(3, mpmath.mpc(-2.5, 1), mpmath.mpc(-2.5, -1), mpmath.mpc(rs.roots[0]))
    assert abs(val) < 1e-10


def test_roots_degree_one():
    n, A, B = 1, 0.3 + 0.2j, 1.5 - 0.4j
    al, be = n * A, n * B
    rs = jacobi.roots(jacobi.build(n, al, be))
    assert rs.roots[0] == pytest.approx((be - al) / (al + be + 2))


def test_roots_legendre_two():
    rs = jacobi.roots(jacobi.build(2, 0, 0))
    assert sorted(rs.roots.real) == pytest.approx([-1 / math.sqrt(3), 1 / math.sqrt(3)])


def test_roots_empty():
    assert jacobi.roots(jacobi.build(0, 1, 1)).degree == 0


@given(cplx, cplx)
@settings(max_examples=20, deadline=None)
def test_roots_conjugate_parameters(A, B):
    n = 6
    try:
        rs = jacobi.roots(jacobi.build(n, n * A, n * B))
        rc = jacobi.roots(jacobi.build(n, n * A.conjugate(), n * B.conjugate()))
    except JacobiError:
        return
    if rs.degree == 0:
        return
    d = np.abs(np.conj(rs.roots)[:, None] - rc.roots[None, :]).min(axis=1)
    assert np.all(d <= 1e-8 * (1 + np.abs(rs.roots)))


@pytest.mark.parametrize("n", [16, 40])
def test_roots_against_mpmath_polyroots(n):
    spec = jacobi.build(n, n * A1, n * B1)
    rs = jacobi.roots(spec)
    with mpmath.workdps(spec.dps):
        ref = mpmath.polyroots(list(spec.mp_coeffs[::-1]), maxsteps=400, extraprec=4 * spec.dps)
    ref = np.array([complex(r) for r in ref])
    d = np.abs(rs.roots[:, None] - ref[None, :]).min(axis=1)
    assert np.max(d) < 1e-12
    assert rs.residual <= jacobi.TOL_POLY and rs.residual_norm <= 1e-8


def test_roots_certificate_n128():
    rs = jacobi.roots(jacobi.build(128, 128 * A1, 128 * B1))
    assert rs.degree == 128 and rs.residual_norm <= 1e-8


def test_unreachable_tolerance_raises():
    with pytest.raises(JacobiError, match="certificate"):
        jacobi.roots(jacobi.build(8, 8 * A1, 8 * B1), tol=1e-30)


def test_cauchy_single_root():
    rs = jacobi.roots(jacobi.build(1, 0.5, 0.25))
    z = 2 + 1j
    assert jacobi.cauchy(rs, z) == pytest.approx(1 / (z - rs.roots[0]))
    with pytest.raises(JacobiError):
        jacobi.cauchy(rs, complex(rs.roots[0]))


def test_cauchy_far_field():
    rs = jacobi.roots(jacobi.build(20, 20 * A1, 20 * B1))
    rmax = float(np.max(np.abs(rs.roots)))
    for z in (4 * rmax, 1e6j):
        assert abs(z * jacobi.cauchy(rs, z) - 1) <= 2 * rmax / abs(z)


@given(cplx, cplx, st.floats(0, 2 * math.pi))
@settings(max_examples=25, deadline=None)
def test_cauchy_dual_formula(A, B, t):
    n = 8
    try:
        spec = jacobi.build(n, n * A, n * B)
        rs = jacobi.roots(spec)
    except JacobiError:
        return
    if rs.degree == 0:
        return
    z = (1.5 + float(np.max(np.abs(rs.roots)))) * cmath.exp(1j * t)
    c1 = jacobi.cauchy(rs, z)
    c2 = jacobi.cauchy_from_coeffs(spec, z) * spec.n / spec.effective_degree
    assert abs(c1 - c2) <= 1e-9 * abs(c2)


def test_quadratic_residual_exact_root():
    A, B, z = 0.3 + 0.5j, -1.2 + 0.1j, 2 - 1j
    qa, qb, qc = 1 - z * z, -((A + B) * z + A - B), A + B + 1
    c = (-qb + cmath.sqrt(qb * qb - 4 * qa * qc)) / (2 * qa)
    assert jacobi.quadratic_residual(A, B, z, c) < 1e-14


def test_real_parameters_roots_in_interval():
    n = 10
    rs = jacobi.roots(jacobi.build(n, 2 * n, 3 * n))
    assert np.all(np.abs(rs.roots.imag) < 1e-10)
    assert np.all(np.abs(rs.roots.real) < 1)


def test_compare_mass_and_trend(graphs):
    g = graphs("one_short")
    out = {n: jacobi.compare(A1, B1, n, g) for n in (16, 32, 64)}
    assert abs(abs(out[16].mass_check) - 1) < 1e-6
    assert out[64].mean_dist < out[32].mean_dist < out[16].mean_dist
    for n, (mean, resid) in FROZEN_TREND.items():
        assert out[n].mean_dist == pytest.approx(mean, rel=1e-3)
        rs = jacobi.roots(jacobi.build(n, n * A1, n * B1))
        assert jacobi.quadratic_residual(A1, B1, 3, jacobi.cauchy(rs, 3)) == pytest.approx(resid, rel=1e-9)
    d = out[32].to_dict()
    assert set(d) >= {"mean_dist", "max_dist", "outliers", "mass_check", "cauchy_residuals"}


def test_compare_without_short_raises(graphs):
    g = replace(graphs("one_short"), shorts=[])
    with pytest.raises(JacobiError):
        jacobi.compare(A1, B1, 8, g)
