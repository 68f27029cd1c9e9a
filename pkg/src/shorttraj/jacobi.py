"""Jacobi polynomials P_n^(alpha, beta) with complex parameters, their zeros, and the
comparison of the zero distribution with the short trajectory of the quadratic differential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
import mpmath
import numpy as np

from .geometry import distance_to_polyline
from .periods import PeriodError, arc_period
from .qdiff import QDParams

TOL_POLY = 1e-8
MAX_ITER = 500
NEWTON_POLISH = 3
MAX_DPS = 4000


class JacobiError(RuntimeError):
    pass


@dataclass(frozen=True)
class PolySpec:
    """Monomial coefficients in ascending order; ``mp_coeffs`` keeps them at ``dps`` digits."""

    n: int
    alpha: complex
    beta: complex
    coeffs: np.ndarray
    mp_coeffs: tuple
    dps: int
    effective_degree: int
    degree_dropped: bool

    def __call__(self, z: complex) -> complex:
        return complex(np.polynomial.polynomial.polyval(z, self.coeffs))

    def derivative(self, z: complex) -> complex:
        return complex(np.polynomial.polynomial.polyval(z, np.polynomial.polynomial.polyder(self.coeffs)))


def _binom(gamma, k: int):
    """gamma (gamma - 1) ... (gamma - k + 1) / k! for complex gamma."""
    out = mpmath.mpf(1)
    for j in range(k):
        out = out * (gamma - j) / (j + 1)
    return out


def _expand(n: int, alpha, beta) -> list:
    """Monomial coefficients of 2^-n sum_k C(n+alpha, n-k) C(n+beta, k) (z-1)^k (z+1)^(n-k)."""
    weights = [_binom(n + alpha, n - k) * _binom(n + beta, k) for k in range(n + 1)]
    # (z+1)^m coefficients for every m, built incrementally
    h = [weights[n]]
    for k in range(n - 1, -1, -1):
        m = n - k
        # h <- h * (z - 1)
        shifted = [mpmath.mpf(0)] + h
        for j in range(len(h)):
            shifted[j] -= h[j]
        h = shifted
        # + weights[k] * (z + 1)^m
        for j in range(m + 1):
            h[j] += weights[k] * mpmath.binomial(m, j)
    scale = mpmath.mpf(2) ** -n
    return [c * scale for c in h]


def leading_coefficient(n: int, alpha: complex, beta: complex) -> complex:
    """2^-n C(2n + alpha + beta, n)."""
    with mpmath.workdps(30):
        return complex(mpmath.mpf(2) ** -n * _binom(mpmath.mpc(2 * n + alpha + beta), n))


def _degree(n: int, alpha: complex, beta: complex) -> int:
    """Exact degree: the z^k coefficient carries the factor prod_{j<k} (n+alpha+beta+1+j)."""
    g = n + alpha + beta + 1
    for j in range(n):
        if abs(g + j) <= 1e-13 * max(1.0, abs(g)):
            return j
    return n


def build(n: int, alpha: complex, beta: complex, dps: int | None = None) -> PolySpec:
    """Exact expansion of the defining sum.

    The sum cancels heavily for complex parameters and the coefficients span many
    orders of magnitude, so it is evaluated at a working precision that is raised
    until two runs ten digits apart agree to 1e-20 relative in every coefficient.
    """
    if n < 0:
        raise ValueError("degree must be non-negative")
    alpha, beta = complex(alpha), complex(beta)
    eff = _degree(n, alpha, beta)
    dps = dps or 30 + n // 2
    while True:
        with mpmath.workdps(dps):
            lo = _expand(n, mpmath.mpc(alpha), mpmath.mpc(beta))
        with mpmath.workdps(dps + 10):
            hi = _expand(n, mpmath.mpc(alpha), mpmath.mpc(beta))
            diff = max((abs(x - y) / abs(y) for x, y in zip(lo[: eff + 1], hi[: eff + 1]) if y != 0),
                       default=mpmath.mpf(0))
        if diff < mpmath.mpf(10) ** -20:
            break
        dps *= 2
        if dps > MAX_DPS:
            raise JacobiError(f"coefficient expansion for n={n} not resolved at {MAX_DPS} digits")
    hi = hi[: eff + 1] + [mpmath.mpc(0)] * (n - eff)
    coeffs = np.array([complex(c) for c in hi])
    return PolySpec(n, alpha, beta, coeffs, tuple(hi), dps + 10, eff, eff < n)


@dataclass
class RootSet:
    roots: np.ndarray
    residual: float  # largest final Newton step relative to max(1, |root|)
    residual_norm: float  # max |P(root)| / max |c_k|
    method_report: dict = field(default_factory=dict)
    spec: PolySpec | None = None

    @property
    def degree(self) -> int:
        return int(self.roots.size)


def _initial_guesses(c: np.ndarray) -> np.ndarray:
    """Starting points on circles whose radii come from the upper convex hull of
    (k, log|c_k|); each hull edge contributes as many points as its width."""
    n = c.size - 1
    mag = np.abs(c)
    logs = np.where(mag > 0, np.log(np.where(mag > 0, mag, 1.0)), -np.inf)
    hull: list[int] = []
    for k in range(n + 1):
        if not np.isfinite(logs[k]):
            continue
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            # drop j if it lies on or below the segment from i to k
            if (logs[j] - logs[i]) * (k - i) <= (logs[k] - logs[i]) * (j - i):
                hull.pop()
            else:
                break
        hull.append(k)
    z = []
    for i, j in zip(hull[:-1], hull[1:]):
        width = j - i
        radius = math.exp((logs[i] - logs[j]) / width)
        phase = 2 * math.pi * np.arange(width) / width + 2 * math.pi * i / n + 0.4
        z.extend(radius * np.exp(1j * phase))
    return np.array(z, dtype=complex)


def _to_mpfr(x: mpmath.mpf):
    """Exact conversion through mantissa and exponent."""
    sign, man, exp, _ = x._mpf_
    if not man:
        return gmpy2.mpfr(0)
    v = gmpy2.mul_2exp(gmpy2.mpfr(man), exp)
    return -v if sign else v


def _re(c):
    return c.real if isinstance(c, mpmath.mpc) else mpmath.mpf(c)


def _im(c):
    return c.imag if isinstance(c, mpmath.mpc) else mpmath.mpf(0)


class _MPPoly:
    """Horner evaluation of P/P' at a fixed binary precision (gmpy2)."""

    def __init__(self, mp_coeffs, dps: int):
        self.prec = int(dps * 3.33) + 16
        self.ctx = gmpy2.context(precision=self.prec)
        with gmpy2.context(self.ctx):
            self.rev = [gmpy2.mpc(_to_mpfr(_re(c)), _to_mpfr(_im(c))) for c in mp_coeffs[::-1]]

    def ratio(self, z: complex) -> complex:
        """P(z)/P'(z)."""
        with gmpy2.context(self.ctx):
            x = gmpy2.mpc(z)
            p = self.rev[0]
            dp = gmpy2.mpc(0)
            for c in self.rev[1:]:
                dp = dp * x + p
                p = p * x + c
            return complex(p / dp)

    def newton(self, z, steps: int):
        with gmpy2.context(self.ctx):
            x = gmpy2.mpc(z)
            for _ in range(steps):
                p = self.rev[0]
                dp = gmpy2.mpc(0)
                for c in self.rev[1:]:
                    dp = dp * x + p
                    p = p * x + c
                if dp == 0:
                    break
                x = x - p / dp
            # the certificate refers to the double-precision value handed back
            x = gmpy2.mpc(complex(x))
            p = self.rev[0]
            dp = gmpy2.mpc(0)
            for c in self.rev[1:]:
                dp = dp * x + p
                p = p * x + c
            step = abs(p / dp) if dp != 0 else gmpy2.mpfr("inf")
            return complex(x), float(step), float(abs(p))


def _aberth(poly: _MPPoly, z: np.ndarray, tol: float = 1e-14) -> tuple[np.ndarray, int, bool]:
    """Simultaneous Aberth-Ehrlich iteration; Newton ratios at extended precision,
    the pairwise repulsion sums in double."""
    n = z.size
    active = np.ones(n, dtype=bool)
    for it in range(1, MAX_ITER + 1):
        idx = np.flatnonzero(active)
        ratio = np.array([poly.ratio(complex(z[i])) for i in idx])
        diff = z[idx, None] - z[None, :]
        diff[np.arange(idx.size), idx] = 1.0
        inv = 1.0 / diff
        inv[np.arange(idx.size), idx] = 0.0
        with np.errstate(all="ignore"):
            step = ratio / (1.0 - ratio * inv.sum(axis=1))
        step = np.where(np.isfinite(step), step, 0.0)
        z[idx] = z[idx] - step
        active[idx] = np.abs(step) > tol * np.maximum(1.0, np.abs(z[idx]))
        if not active.any():
            return z, it, True
    return z, MAX_ITER, False


def roots(spec: PolySpec, tol: float = TOL_POLY) -> RootSet:
    """All zeros by Aberth iteration, then Newton polishing at the working precision of
    the coefficients.

    Double-precision evaluation of P is useless here: near its zeros P is many orders
    of magnitude below its coefficients, in the monomial basis and in the three-term
    recurrence alike. Each returned root is certified by the size of one further
    Newton step taken from its double-precision value.
    """
    deg = spec.effective_degree
    if deg < 1:
        return RootSet(np.zeros(0, dtype=complex), 0.0, 0.0, {"iterations": 0, "converged": True}, spec)
    poly = _MPPoly(spec.mp_coeffs[: deg + 1], spec.dps)
    z0 = _initial_guesses(spec.coeffs[: deg + 1])
    z, iters, converged = _aberth(poly, z0.copy())
    big = float(np.max(np.abs(spec.coeffs[: deg + 1])))
    polished, steps, values = [], [], []
    for r in z:
        x, step, pv = poly.newton(complex(r), NEWTON_POLISH)
        polished.append(x)
        steps.append(step / max(1.0, abs(x)))
        values.append(pv / big)
    out = np.array(polished)
    worst = float(max(steps))
    report = {"iterations": iters, "converged": converged, "precision_bits": poly.prec,
              "newton_steps": NEWTON_POLISH}
    if not converged or worst > tol:
        raise JacobiError(f"root certificate {worst:.3g} (tolerance {tol:g}) after {iters} iterations")
    if out.size > 1:
        gap = np.abs(out[:, None] - out[None, :]) + np.eye(out.size)
        if float(gap.min()) < 1e-10:
            raise JacobiError("two roots coincide after polishing")
    return RootSet(out, worst, float(max(values)), report, spec)


def cauchy(rs: RootSet, z: complex) -> complex:
    """(1/n) sum 1/(z - root)."""
    if rs.degree == 0:
        raise JacobiError("empty root set")
    gap = float(np.min(np.abs(z - rs.roots)))
    if gap < 1e-12:
        raise JacobiError(f"z = {z} is within {gap:.1e} of a root")
    return complex(np.mean(1.0 / (z - rs.roots)))


def cauchy_from_coeffs(spec: PolySpec, z: complex) -> complex:
    """P'(z) / (n P(z)) at the working precision of the spec."""
    mpc = spec.mp_coeffs[: spec.effective_degree + 1]
    with mpmath.workdps(spec.dps):
        x = mpmath.mpc(z)
        p = mpmath.polyval(mpc[::-1], x)
        dp = mpmath.polyval([k * mpc[k] for k in range(len(mpc) - 1, 0, -1)], x)
        return complex(dp / (spec.effective_degree * p))


def quadratic_residual(A: complex, B: complex, z: complex, c: complex) -> float:
    return abs((1 - z * z) * c * c - ((A + B) * z + A - B) * c + A + B + 1)


def rodrigues(n: int, alpha: complex, beta: complex, z: complex) -> complex:
    """The Rodrigues formula by numerical differentiation (independent check of build)."""
    with mpmath.workdps(40):
        a, b, x = mpmath.mpc(alpha), mpmath.mpc(beta), mpmath.mpc(z)

        def f(t):
            return (t - 1) ** (n + a) * (t + 1) ** (n + b)

        d = mpmath.diff(f, x, n) if n else f(x)
        return complex(d / (2 ** n * mpmath.factorial(n)) * (x - 1) ** (-a) * (x + 1) ** (-b))


@dataclass
class MeasureComparison:
    n: int
    mean_dist: float
    max_dist: float
    outliers: int
    mass_check: complex | None
    cauchy_residuals: list[tuple[complex, float]]
    roots: np.ndarray

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean_dist": self.mean_dist,
            "max_dist": self.max_dist,
            "outliers": self.outliers,
            "mass_check": None if self.mass_check is None else [self.mass_check.real, self.mass_check.imag],
            "mass_modulus": None if self.mass_check is None else abs(self.mass_check),
            "cauchy_residuals": [[z.real, z.imag, r] for z, r in self.cauchy_residuals],
        }


def compare(A: complex, B: complex, n: int, graph, ring: int = 16) -> MeasureComparison:
    """Distances from the zeros of P_n^(nA, nB) to the short trajectories of ``graph``."""
    p: QDParams = graph.params
    if not graph.shorts:
        raise JacobiError("the critical graph has no short trajectory")
    rs = roots(build(n, n * A, n * B))
    if rs.degree:
        d = np.min([distance_to_polyline(rs.roots, s.polyline) for s in graph.shorts], axis=0)
        mean, worst = float(np.mean(d)), float(np.max(d))
        outliers = int(np.sum(d > 3 * mean)) if mean > 0 else 0
    else:
        mean = worst = math.nan
        outliers = 0
    mass = None
    short = graph.shorts[0]
    try:
        rep = short.period if short.period is not None else arc_period(p, short.polyline)
        jv = rep.jacobi_value if rep.jacobi_value is not None else -1j * rep.value
        mass = jv / (2j * math.pi)
    except PeriodError:
        pass
    samples = []
    if rs.degree:
        radius = 3.0 * max(1.0, float(np.max(np.abs(rs.roots))))
        for t in np.linspace(0.0, 2 * math.pi, ring, endpoint=False):
            z = radius * complex(math.cos(t), math.sin(t))
            samples.append((z, quadratic_residual(A, B, z, cauchy(rs, z))))
    return MeasureComparison(n, mean, worst, outliers, mass, samples, rs.roots)
