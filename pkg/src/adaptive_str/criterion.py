"""Polynomial stabilizability test.

For growth exponents ``b_1 > ... > b_n > 0`` with ``b_1 > 1`` the test asks
whether

    P(x) = x^(n+1) - b_1 x^n + sum_{i=1}^{n-1} (b_i - b_{i+1}) x^(n-i) + b_n

is strictly positive on the open interval ``(1, b_1)``.

Positivity is certified by adaptive bisection with a derivative bound: on
``[lo, hi]`` with midpoint ``m`` and half-width ``w``, ``P(m) - err > w B'``
proves ``P > 0`` there, where ``B' = sum i |c_i| r^(i-1)`` bounds ``|P'|`` for
``r = max(|lo|, |hi|)`` and ``err`` bounds the rounding of Horner's rule.

Near a double root that first-order test needs a number of pieces inversely
proportional to the distance from the root, so the second-order Taylor bound
``P(m) - |P'(m)| w - B'' w^2 / 2 > 0`` is tried as well; either one is a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

from .errors import ValidationError

DEFAULT_TOL = 1e-12
_MAX_DEPTH = 200
_EPS = 2.0 ** -53


@dataclass(frozen=True)
class StabilityPolynomial:
    """Coefficients in descending degree; ``exact`` holds the same values as
    rationals (differences of the exponents are formed exactly)."""

    coeffs: tuple[float, ...]
    exact: tuple[Fraction, ...]
    interval: tuple[float, float]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def in_scope(self) -> bool:
        return self.interval[1] > self.interval[0]

    def __call__(self, x: float) -> float:
        return horner(self.coeffs, x)

    def eval_exact(self, x) -> Fraction:
        return horner_exact(self.exact, Fraction(x))


@dataclass(frozen=True)
class Satisfied:
    intervals: int = 0
    kind = "Satisfied"


@dataclass(frozen=True)
class Violated:
    witness: float
    value: float
    kind = "Violated"


@dataclass(frozen=True)
class Indeterminate:
    interval: tuple[float, float]
    value: float
    kind = "Indeterminate"


@dataclass(frozen=True)
class OutOfScope:
    reason: str
    kind = "OutOfScope"


CriterionVerdict = Union[Satisfied, Violated, Indeterminate, OutOfScope]


def verdict_to_dict(v: CriterionVerdict) -> dict:
    d = {"verdict": v.kind}
    if isinstance(v, Violated):
        d.update(witness=v.witness, value=v.value)
    elif isinstance(v, Indeterminate):
        d.update(interval=list(v.interval), value=v.value)
    elif isinstance(v, OutOfScope):
        d.update(reason=v.reason)
    return d


def horner(coeffs: Sequence[float], x: float) -> float:
    acc = 0.0
    for c in coeffs:
        acc = acc * x + c
    return acc


def horner_exact(coeffs: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in coeffs:
        acc = acc * x + c
    return acc


def _horner_error(coeffs: Sequence[float], x: float) -> float:
    # |fl(P(x)) - P(x)| <= gamma_{2d} * sum |c_i| |x|^i
    d = len(coeffs) - 1
    mag = horner([abs(c) for c in coeffs], abs(x))
    return 2.0 * (2 * d + 1) * _EPS * mag


def _deriv_bound(coeffs: Sequence[float], r: float) -> float:
    d = len(coeffs) - 1
    return sum((d - k) * abs(c) * r ** (d - k - 1) for k, c in enumerate(coeffs[:-1]))


def _deriv_coeffs(coeffs: Sequence[float]) -> list[float]:
    d = len(coeffs) - 1
    return [(d - k) * c for k, c in enumerate(coeffs[:-1])] or [0.0]


def build_stability_polynomial(b: Sequence[float]) -> StabilityPolynomial:
    """Coefficients ``[1, -b_1, b_1 - b_2, ..., b_{n-1} - b_n, b_n]``."""
    b = [float(v) for v in b]
    if not b:
        raise ValidationError("exponent list is empty")
    for v in b:
        if not math.isfinite(v) or v <= 0:
            raise ValidationError("exponents must be positive and finite")
    for x, y in zip(b, b[1:]):
        if not x > y:
            raise ValidationError("exponents must be strictly decreasing")
    fb = [Fraction(v) for v in b]
    exact = [Fraction(1), -fb[0]]
    exact += [fb[i] - fb[i + 1] for i in range(len(b) - 1)]
    exact.append(fb[-1])
    return StabilityPolynomial(
        coeffs=tuple(float(c) for c in exact),
        exact=tuple(exact),
        interval=(1.0, b[0]),
    )


def _tangent_check(coeffs, exact, lo, hi, a, b):
    """Near a double root the samples only approach zero. Follow Newton on
    P' from [lo, hi] to the nearby critical point (staying inside (a, b)) and
    evaluate P there exactly."""
    d = len(coeffs) - 1
    dcoeffs = [(d - k) * c for k, c in enumerate(coeffs[:-1])]
    ddcoeffs = [(d - 1 - k) * c for k, c in enumerate(dcoeffs[:-1])]
    x = 0.5 * (lo + hi)
    for _ in range(8):
        dd = horner(ddcoeffs, x)
        if dd == 0:
            break
        nx = x - horner(dcoeffs, x) / dd
        if not a < nx < b:
            break
        if nx == x:
            break
        x = nx
    cands = {x, math.nextafter(x, -math.inf), math.nextafter(x, math.inf), lo, hi, 0.5 * (lo + hi)}
    best = None
    for c in sorted(cands):
        if not a < c < b:
            continue
        v = horner_exact(exact, Fraction(c))
        if best is None or v < best[1]:
            best = (c, v)
    return best


def check_positive_on_open_interval(
    p: Union[StabilityPolynomial, Sequence[float]],
    a: float,
    b: float,
    tol: float = DEFAULT_TOL,
) -> CriterionVerdict:
    """Decide ``P > 0`` on ``(a, b)``.

    Returns Satisfied when every piece is certified, Violated with a witness
    whose exact value is ``<= 0``, or Indeterminate with the piece where
    ``|P| < tol`` could not be resolved.
    """
    if not a < b:
        raise ValidationError("need a < b")
    if not tol > 0:
        raise ValidationError("tol must be positive")
    if isinstance(p, StabilityPolynomial):
        coeffs, exact = list(p.coeffs), list(p.exact)
    else:
        coeffs = [float(c) for c in p]
        if not coeffs:
            raise ValidationError("empty coefficient list")
        exact = [Fraction(c) for c in coeffs]

    dcoeffs = _deriv_coeffs(coeffs)
    count = 0
    stack = [(float(a), float(b), 0)]
    while stack:
        lo, hi, depth = stack.pop()
        count += 1
        m = 0.5 * (lo + hi)
        w = 0.5 * (hi - lo)
        v = horner(coeffs, m)
        err = _horner_error(coeffs, m)
        if v - err <= 0.0:
            ex = horner_exact(exact, Fraction(m))
            if ex <= 0:
                return Violated(witness=m, value=float(ex))
        r = max(abs(lo), abs(hi))
        if v - err > w * _deriv_bound(coeffs, r):
            continue
        dv = abs(horner(dcoeffs, m)) + _horner_error(dcoeffs, m)
        if v - err - dv * w - 0.5 * w * w * _deriv_bound(dcoeffs, r) > 0.0:
            continue
        if hi - lo < tol or depth >= _MAX_DEPTH:
            if abs(v) < tol or depth >= _MAX_DEPTH:
                x, ex = _tangent_check(coeffs, exact, lo, hi, a, b)
                if ex <= 0:
                    return Violated(witness=x, value=float(ex))
                return Indeterminate(interval=(lo, hi), value=v)
        # right half first on the stack so the left half is explored first
        stack.append((m, hi, depth + 1))
        stack.append((lo, m, depth + 1))
    return Satisfied(intervals=count)


def is_stabilizable(b: Sequence[float], tol: float = DEFAULT_TOL) -> CriterionVerdict:
    """Run the polynomial test on growth exponents ``b``.

    OutOfScope when the hypotheses fail (``b_1 <= 1``, non-positive or not
    strictly decreasing exponents); the test makes no claim then.
    """
    b = [float(v) for v in b]
    if not b:
        raise ValidationError("exponent list is empty")
    if any(not math.isfinite(v) for v in b):
        raise ValidationError("exponents must be finite")
    if b[0] <= 1:
        return OutOfScope("b_1 <= 1: the test requires b_1 > 1")
    if any(v <= 0 for v in b):
        return OutOfScope("exponents must be positive")
    if any(not x > y for x, y in zip(b, b[1:])):
        return OutOfScope("exponents must be strictly decreasing")
    poly = build_stability_polynomial(b)
    return check_positive_on_open_interval(poly, 1.0, b[0], tol)
