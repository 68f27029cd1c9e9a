"""Closed-form quantities of the quadratic differential

    lambda^2 (z - a)(z - b) / (z^2 - 1)^2 dz^2

together with its Jacobi parametrization a, b = zeta_+/-(A, B), lambda = i(A + B + 2).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

TOL_ROOT = 1e-10
TOL_COINCIDE = 1e-12
TOL_P = 1e-8
TOL_IMAG = 1e-9

SIGN_PAIRS: tuple[tuple[int, int], ...] = ((1, 1), (1, -1), (-1, 1), (-1, -1))
JACOBI_LABELS = ("1", "A+1", "B+1", "A+B+1")


class ParameterError(ValueError):
    """Parameters violate the admissibility conditions; ``code`` names the failure."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class QDParams:
    a: complex
    b: complex
    lam: complex
    origin: tuple[complex, complex] | None = None

    @property
    def A(self) -> complex | None:
        return None if self.origin is None else self.origin[0]

    @property
    def B(self) -> complex | None:
        return None if self.origin is None else self.origin[1]

    @property
    def zeros(self) -> tuple[complex, complex]:
        return (self.a, self.b)

    @property
    def critical_points(self) -> tuple[complex, ...]:
        return (self.a, self.b, -1.0 + 0j, 1.0 + 0j)

    @property
    def scale(self) -> float:
        """Largest pairwise distance among a, b, -1, 1 (at least 2)."""
        pts = self.critical_points
        return max(abs(p - q) for i, p in enumerate(pts) for q in pts[i + 1:])

    def phi(self, z: complex) -> complex:
        return self.lam * self.lam * (z - self.a) * (z - self.b)

    def Q(self, z: complex) -> complex:
        w = z * z - 1
        return self.lam * self.lam * (z - self.a) * (z - self.b) / (w * w)

    def dQ(self, z: complex) -> complex:
        w = z * z - 1
        lam2 = self.lam * self.lam
        num = (2 * z - self.a - self.b) * w - 4 * z * (z - self.a) * (z - self.b)
        return lam2 * num / (w * w * w)

    def conjugate(self) -> "QDParams":
        origin = None
        if self.origin is not None:
            origin = (self.origin[0].conjugate(), self.origin[1].conjugate())
        return QDParams(self.a.conjugate(), self.b.conjugate(), self.lam.conjugate(), origin)

    def swapped(self) -> "QDParams":
        return QDParams(self.b, self.a, self.lam)

    def to_dict(self) -> dict:
        out = {"a": _cjson(self.a), "b": _cjson(self.b), "lambda": _cjson(self.lam)}
        if self.origin is not None:
            out["A"] = _cjson(self.origin[0])
            out["B"] = _cjson(self.origin[1])
        return out


def _cjson(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def validate(a: complex, b: complex, lam: complex, tol: float = TOL_COINCIDE) -> QDParams:
    a, b, lam = complex(a), complex(b), complex(lam)
    for name, z in (("a", a), ("b", b), ("lambda", lam)):
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            raise ParameterError("non_finite", f"{name} is not finite: {z}")
    if abs(lam) <= tol:
        raise ParameterError("lambda_zero", "lambda must be nonzero")
    if abs(a - b) <= tol * max(1.0, abs(a), abs(b)):
        raise ParameterError("coincident_zeros", f"zeros coincide: a = b = {a}")
    for name, z in (("a", a), ("b", b)):
        for pole in (-1.0, 1.0):
            if abs(z - pole) <= tol:
                raise ParameterError("zero_on_pole", f"zero {name} = {z} coincides with pole {pole:+g}")
    return QDParams(a, b, lam)


def R_AB(A: complex, B: complex, z: complex) -> complex:
    s = A + B + 2
    return s * s * z * z + 2 * (A * A - B * B) * z + (A - B) ** 2 - 4 * (A + B + 1)


def jacobi_zeros(A: complex, B: complex) -> tuple[complex, complex]:
    s = A + B + 2
    root = cmath.sqrt((A + 1) * (B + 1) * (A + B + 1))
    base = -A * A + B * B
    return (base + 4 * root) / (s * s), (base - 4 * root) / (s * s)


def from_jacobi(A: complex, B: complex, tol: float = TOL_COINCIDE) -> QDParams:
    A, B = complex(A), complex(B)
    if abs(A + B + 1) <= tol:
        raise ParameterError("degenerate_sum_plus_1", "A + B + 1 = 0 is excluded")
    if abs(A + B + 2) <= tol:
        raise ParameterError("degenerate_sum_plus_2", "A + B + 2 = 0 is excluded")
    zp, zm = jacobi_zeros(A, B)
    try:
        p = validate(zp, zm, 1j * (A + B + 2), tol)
    except ParameterError as exc:
        raise ParameterError(exc.code, f"(A, B) = ({A}, {B}): {exc}") from exc
    return QDParams(p.a, p.b, p.lam, (A, B))


@dataclass(frozen=True)
class ResidueSet:
    """Coefficients of (z - p)^-2 in the local expansions at -1, +1 and infinity."""

    res_minus1: complex
    res_plus1: complex
    res_inf: complex

    def as_tuple(self) -> tuple[complex, complex, complex]:
        return (self.res_minus1, self.res_plus1, self.res_inf)


def residues(p: QDParams) -> ResidueSet:
    lam2 = p.lam * p.lam
    # (z + 1)^2 -> 4 at z = 1 and (z - 1)^2 -> 4 at z = -1
    return ResidueSet(
        res_minus1=lam2 * (1 + p.a) * (1 + p.b) / 4,
        res_plus1=lam2 * (1 - p.a) * (1 - p.b) / 4,
        res_inf=lam2,
    )


class PoleType(str, Enum):
    CIRCLE = "Circle"
    RADIAL = "Radial"
    LOG_SPIRAL = "LogSpiral"


def classify_pole(res: complex, tol_root: float = TOL_ROOT) -> PoleType:
    if abs(res) <= tol_root:
        raise ParameterError("zero_residue", f"residue {res} vanishes: pole is not a double pole")
    if abs(res.imag) > TOL_IMAG * (1 + abs(res)):
        return PoleType.LOG_SPIRAL
    return PoleType.CIRCLE if res.real < 0 else PoleType.RADIAL


def classify_poles(r: ResidueSet) -> tuple[PoleType, PoleType, PoleType]:
    """Pole types at -1, +1 and infinity."""
    return tuple(classify_pole(x) for x in r.as_tuple())  # type: ignore[return-value]


def period_values(p: QDParams) -> dict[tuple[int, int], complex]:
    """The four numbers i*pi*(lambda/2)*(s1*sqrt((1-a)(1-b)) + s2*sqrt((1+a)(1+b)) - 2)."""
    x = cmath.sqrt((1 - p.a) * (1 - p.b))
    y = cmath.sqrt((1 + p.a) * (1 + p.b))
    pref = 1j * math.pi * p.lam / 2
    return {(s1, s2): pref * (s1 * x + s2 * y - 2) for s1, s2 in SIGN_PAIRS}


def _sign_of(value: complex, target: complex) -> int:
    return 1 if abs(value - target) <= abs(value + target) else -1


def jacobi_class_table(p: QDParams) -> dict[tuple[int, int], tuple[str, complex]]:
    """Map each sign pair to its label in {1, A+1, B+1, A+B+1} and to the multiplier c
    with period value = 2*pi*c exactly (sign included).

    The labelling is algebraic, so it stays a bijection when two labels share a value
    (for example A + B = 0, where 1 and A+B+1 coincide).
    """
    if p.origin is None:
        raise ValueError("parameters carry no Jacobi origin")
    A, B = p.origin
    s = A + B + 2
    e1 = _sign_of(s * cmath.sqrt((1 - p.a) * (1 - p.b)), 2 * A)
    e2 = _sign_of(s * cmath.sqrt((1 + p.a) * (1 + p.b)), 2 * B)
    values = {(1, 1): ("1", 1 + 0j), (-1, 1): ("A+1", A + 1), (1, -1): ("B+1", B + 1), (-1, -1): ("A+B+1", A + B + 1)}
    return {(s1, s2): values[(s1 * e1, s2 * e2)] for s1, s2 in SIGN_PAIRS}


def pair_label(pair: tuple[int, int]) -> str:
    return "(" + ",".join("+" if s > 0 else "-" for s in pair) + ")"


def class_label(p: QDParams, pair: tuple[int, int]) -> str:
    if p.origin is not None:
        return jacobi_class_table(p)[pair][0]
    return pair_label(pair)


@dataclass(frozen=True)
class PropertyPReport:
    values: dict[tuple[int, int], complex]
    im_parts: dict[tuple[int, int], float]
    satisfied: bool
    satisfied_classes: tuple[tuple[int, int], ...]
    labels: dict[tuple[int, int], str]
    tol: float

    @property
    def satisfied_labels(self) -> list[str]:
        return [self.labels[c] for c in self.satisfied_classes]

    def to_dict(self) -> dict:
        return {
            "values": [_cjson(self.values[c]) for c in SIGN_PAIRS],
            "im_parts": [self.im_parts[c] for c in SIGN_PAIRS],
            "labels": [self.labels[c] for c in SIGN_PAIRS],
            "satisfied": self.satisfied,
            "classes": self.satisfied_labels,
        }


def property_p(p: QDParams, tol: float = TOL_P) -> PropertyPReport:
    values = period_values(p)
    im_parts = {c: v.imag for c, v in values.items()}
    ok = tuple(c for c in SIGN_PAIRS if abs(values[c].imag) <= tol * (1 + abs(values[c])))
    labels = {c: class_label(p, c) for c in SIGN_PAIRS}
    return PropertyPReport(values, im_parts, bool(ok), ok, labels, tol)


def lambda_for_class(a: complex, b: complex, pair: tuple[int, int], r: float) -> complex:
    """Lambda for which the value of ``pair`` is the real number pi*r/2.

    Any such lambda satisfies Property P through that class.
    """
    x = cmath.sqrt((1 - a) * (1 - b))
    y = cmath.sqrt((1 + a) * (1 + b))
    k = pair[0] * x + pair[1] * y - 2
    if k == 0:
        raise ParameterError("degenerate_class", "class bracket vanishes")
    return r / (1j * k)
