"""Extended-magnitude real numbers.

An :class:`ExtendedReal` stores ``sign``, ``level`` and ``mag``. The value it
represents is ``sign * exp^level(mag)``, where ``exp^level`` is ``level``-fold
iterated exponentiation:

* level 0: ``|v| = mag`` with ``mag <= 1e300``
* level 1: ``|v| = exp(mag)`` with ``ln(1e300) < mag <= 1e300``
* level 2: ``|v| = exp(exp(mag))`` with the same bounds on ``mag``
* level SAT: magnitude beyond level 2; ordered above every finite value and
  absorbing under add/mul/pow/exp.

A single cut point ``LN_BIG = ln(1e300)`` separates consecutive levels, so
every value has exactly one encoding and comparison is lexicographic on
``(level, mag)``. Small magnitudes are not extended: anything that underflows
a double becomes zero.
"""

from __future__ import annotations

import enum
import math
from typing import Union

from ..errors import DirectionLostError, DomainError, SaturationError

BIG = 1e300
LN_BIG = math.log(BIG)
LEVEL_SAT = 3
MAX_LEVEL = 2
# exp(d) underflows to zero below this
_EXP_UNDERFLOW = -746.0

Number = Union["ExtendedReal", float, int]


class ExtendedReal:
    """Immutable sign/level/magnitude scalar. Construct with :func:`ext` or
    :meth:`from_parts`; the raw constructor assumes canonical input."""

    __slots__ = ("sign", "level", "mag")

    def __init__(self, sign: int, level: int, mag: float):
        object.__setattr__(self, "sign", sign)
        object.__setattr__(self, "level", level)
        object.__setattr__(self, "mag", mag)

    def __setattr__(self, name, value):
        raise AttributeError("ExtendedReal is immutable")

    # -- construction -----------------------------------------------------

    @staticmethod
    def from_parts(sign: int, level: int, mag: float) -> "ExtendedReal":
        """Build and normalize; ``mag`` must be a nonnegative non-NaN float."""
        return _make(sign, level, mag)

    @staticmethod
    def from_signed(level: int, signed_mag: float) -> "ExtendedReal":
        """Inverse of :meth:`signed_mag`, used by columnar storage."""
        if level == LEVEL_SAT:
            return SAT_POS if signed_mag >= 0 else SAT_NEG
        if signed_mag == 0.0:
            return ZERO
        return _make(1 if signed_mag > 0 else -1, level, abs(signed_mag))

    # -- inspection -------------------------------------------------------

    @property
    def is_sat(self) -> bool:
        return self.level == LEVEL_SAT

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    @property
    def signed_mag(self) -> float:
        return self.sign * self.mag if self.level != LEVEL_SAT else float(self.sign)

    def __float__(self) -> float:
        if self.level == 0:
            return self.sign * self.mag
        return self.sign * math.inf

    def __bool__(self) -> bool:
        return self.sign != 0

    def __repr__(self) -> str:
        if self.level == LEVEL_SAT:
            return f"ExtendedReal({'-' if self.sign < 0 else '+'}SAT)"
        return f"ExtendedReal(sign={self.sign}, level={self.level}, mag={self.mag!r})"

    def __str__(self) -> str:
        return format_ext(self)

    def __eq__(self, other) -> bool:
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self.sign, self.level, self.mag) == (other.sign, other.level, other.mag)

    def __hash__(self) -> int:
        return hash((self.sign, self.level, self.mag))

    # -- operators --------------------------------------------------------

    def __neg__(self):
        return ext_neg(self)

    def __abs__(self):
        return ext_abs(self)

    def __add__(self, other):
        other = _coerce(other)
        return NotImplemented if other is NotImplemented else ext_add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        return NotImplemented if other is NotImplemented else ext_add(self, ext_neg(other))

    def __rsub__(self, other):
        other = _coerce(other)
        return NotImplemented if other is NotImplemented else ext_add(other, ext_neg(self))

    def __mul__(self, other):
        other = _coerce(other)
        return NotImplemented if other is NotImplemented else ext_mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        return NotImplemented if other is NotImplemented else ext_div(self, other)

    def __rtruediv__(self, other):
        other = _coerce(other)
        return NotImplemented if other is NotImplemented else ext_div(other, self)

    def __lt__(self, other):
        other = _coerce(other)
        return NotImplemented if other is NotImplemented else ext_cmp(self, other) < 0

    def __le__(self, other):
        other = _coerce(other)
        return NotImplemented if other is NotImplemented else ext_cmp(self, other) <= 0

    def __gt__(self, other):
        other = _coerce(other)
        return NotImplemented if other is NotImplemented else ext_cmp(self, other) > 0

    def __ge__(self, other):
        other = _coerce(other)
        return NotImplemented if other is NotImplemented else ext_cmp(self, other) >= 0


def _make(sign: int, level: int, mag: float) -> ExtendedReal:
    if sign == 0 or (mag == 0.0 and level == 0):
        return ZERO
    if level >= LEVEL_SAT or mag == math.inf:
        return SAT_POS if sign > 0 else SAT_NEG
    while True:
        if level == 0:
            if mag > BIG:
                level, mag = 1, math.log(mag)
                continue
            break
        if mag <= LN_BIG:
            level, mag = level - 1, math.exp(mag)
            if level == 0 and mag == 0.0:
                return ZERO
            continue
        if mag > BIG:
            level, mag = level + 1, math.log(mag)
            if level > MAX_LEVEL:
                return SAT_POS if sign > 0 else SAT_NEG
            continue
        break
    return ExtendedReal(sign, level, mag)


ZERO = ExtendedReal(0, 0, 0.0)
ONE = ExtendedReal(1, 0, 1.0)
SAT_POS = ExtendedReal(1, LEVEL_SAT, math.inf)
SAT_NEG = ExtendedReal(-1, LEVEL_SAT, math.inf)


def ext(value: Number) -> ExtendedReal:
    """Convert a float or int to canonical form. NaN and infinities are
    rejected: saturation must be produced by arithmetic, not smuggled in."""
    if isinstance(value, ExtendedReal):
        return value
    v = float(value)
    if math.isnan(v):
        raise DomainError("NaN is not an ExtendedReal")
    if math.isinf(v):
        raise DomainError("infinite input; use SAT_POS/SAT_NEG explicitly")
    if v == 0.0:
        return ZERO
    return _make(1 if v > 0 else -1, 0, abs(v))


def _coerce(value):
    if isinstance(value, ExtendedReal):
        return value
    if isinstance(value, (int, float)):
        return ext(value)
    return NotImplemented


def _with_sign(a: ExtendedReal, sign: int) -> ExtendedReal:
    if a.sign == 0 or a.sign == sign:
        return a
    if a.level == LEVEL_SAT:
        return SAT_POS if sign > 0 else SAT_NEG
    return ExtendedReal(sign, a.level, a.mag)


def ext_neg(a: ExtendedReal) -> ExtendedReal:
    return _with_sign(a, -a.sign) if a.sign else a


def ext_abs(a: ExtendedReal) -> ExtendedReal:
    return _with_sign(a, 1) if a.sign else a


def cmp_abs(a: ExtendedReal, b: ExtendedReal) -> int:
    ka = (a.level, a.mag) if a.sign else (-1, 0.0)
    kb = (b.level, b.mag) if b.sign else (-1, 0.0)
    return (ka > kb) - (ka < kb)


def ext_cmp(a: ExtendedReal, b: ExtendedReal) -> int:
    """Three-way comparison, -1/0/+1."""
    if a.sign != b.sign:
        return (a.sign > b.sign) - (a.sign < b.sign)
    c = cmp_abs(a, b)
    return c if a.sign >= 0 else -c


def ln_abs(a: ExtendedReal) -> ExtendedReal:
    """``ln|a|`` for nonzero ``a``; one level lower than ``a``."""
    if a.sign == 0:
        raise DomainError("ln of zero")
    if a.level == LEVEL_SAT:
        return SAT_POS
    if a.level == 0:
        return ext(math.log(a.mag))
    return ExtendedReal(1, a.level - 1, a.mag)


def ext_exp(a: ExtendedReal) -> ExtendedReal:
    if a.sign == 0:
        return ONE
    if a.level == LEVEL_SAT:
        return SAT_POS if a.sign > 0 else ZERO
    if a.sign < 0:
        if a.level > 0:
            return ZERO
        v = math.exp(-a.mag)
        return ExtendedReal(1, 0, v) if v > 0.0 else ZERO
    if a.level == 0:
        if a.mag > LN_BIG:
            return ExtendedReal(1, 1, a.mag)
        return ExtendedReal(1, 0, math.exp(a.mag))
    if a.level == 1:
        return ExtendedReal(1, 2, a.mag)
    return SAT_POS


def ext_ln(a: ExtendedReal) -> ExtendedReal:
    if a.sign <= 0:
        raise DomainError("ln of a nonpositive value")
    return ln_abs(a)


def ext_add(a: ExtendedReal, b: ExtendedReal) -> ExtendedReal:
    if a.sign == 0:
        return b
    if b.sign == 0:
        return a
    if a.level == 0 and b.level == 0:
        s = a.sign * a.mag + b.sign * b.mag
        if s == 0.0:
            return ZERO
        return _make(1 if s > 0 else -1, 0, abs(s))
    if a.level == LEVEL_SAT or b.level == LEVEL_SAT:
        if a.level == LEVEL_SAT and b.level == LEVEL_SAT and a.sign != b.sign:
            raise SaturationError("SAT - SAT is indeterminate")
        return a if a.level == LEVEL_SAT else b
    if cmp_abs(a, b) >= 0:
        big, small = a, b
    else:
        big, small = b, a
    lb = ln_abs(big)
    d = ext_add(ln_abs(small), ext_neg(lb))
    if d.level > 0:
        return big
    dv = d.sign * d.mag
    if dv < _EXP_UNDERFLOW:
        return big
    if big.sign == small.sign:
        corr = math.log1p(math.exp(dv))
    else:
        if dv >= 0.0:
            return ZERO
        # log(1 - e^dv) without cancellation when dv is near 0
        corr = math.log(-math.expm1(dv))
    return _with_sign(ext_exp(ext_add(lb, ext(corr))), big.sign)


def ext_mul(a: ExtendedReal, b: ExtendedReal) -> ExtendedReal:
    # zero annihilates SAT: SAT stands for a finite value too large to store
    if a.sign == 0 or b.sign == 0:
        return ZERO
    sign = a.sign * b.sign
    if a.level == LEVEL_SAT or b.level == LEVEL_SAT:
        return SAT_POS if sign > 0 else SAT_NEG
    if a.level == 0 and b.level == 0:
        p = a.mag * b.mag
        if p != math.inf:
            return _make(sign, 0, p)
        return _make(sign, 1, math.log(a.mag) + math.log(b.mag))
    return _with_sign(ext_exp(ext_add(ln_abs(a), ln_abs(b))), sign)


def ext_div(a: ExtendedReal, b: ExtendedReal) -> ExtendedReal:
    if b.sign == 0:
        raise DomainError("division by zero")
    if a.sign == 0:
        return ZERO
    sign = a.sign * b.sign
    if b.level == LEVEL_SAT:
        if a.level == LEVEL_SAT:
            raise SaturationError("SAT / SAT is indeterminate")
        return ZERO
    if a.level == LEVEL_SAT:
        return SAT_POS if sign > 0 else SAT_NEG
    if a.level == 0 and b.level == 0:
        q = a.mag / b.mag
        if q != math.inf:
            return _make(sign, 0, q)
    return _with_sign(ext_exp(ext_add(ln_abs(a), ext_neg(ln_abs(b)))), sign)


def ext_pow(a: ExtendedReal, p: float) -> ExtendedReal:
    """``a ** p`` for a finite real exponent. Negative bases need an integer
    exponent."""
    p = float(p)
    if math.isnan(p) or math.isinf(p):
        raise DomainError("exponent must be finite")
    if p == 0.0:
        return ONE
    if a.sign == 0:
        if p < 0:
            raise DomainError("zero raised to a negative power")
        return ZERO
    sign = 1
    if a.sign < 0:
        if not p.is_integer():
            raise DomainError("negative base with non-integer exponent")
        sign = -1 if int(p) % 2 else 1
    if a.level == LEVEL_SAT:
        return (SAT_POS if sign > 0 else SAT_NEG) if p > 0 else ZERO
    if a.level == 0:
        try:
            v = math.pow(a.mag, p)
        except OverflowError:
            v = math.inf
        if v != math.inf:
            return _make(sign, 0, v)
    return _with_sign(ext_exp(ext_mul(ext(p), ln_abs(a))), sign)


def ext_sqrt(a: ExtendedReal) -> ExtendedReal:
    if a.sign < 0:
        raise DomainError("sqrt of a negative value")
    return ext_pow(a, 0.5)


class OpKind(enum.Enum):
    ADD = "add"
    MUL = "mul"
    POW_CONST = "pow"
    EXP = "exp"
    LN = "ln"
    NEG = "neg"
    CMP = "cmp"


def ext_apply(kind: OpKind | str, a: Number, b: Number | None = None):
    """Dispatch a single operation by name; CMP returns -1/0/+1."""
    if not isinstance(kind, OpKind):
        kind = OpKind[kind] if kind in OpKind.__members__ else OpKind(kind)
    a = ext(a)
    if kind is OpKind.ADD:
        return ext_add(a, ext(b))
    if kind is OpKind.MUL:
        return ext_mul(a, ext(b))
    if kind is OpKind.POW_CONST:
        if isinstance(b, ExtendedReal):
            if b.level != 0:
                raise DomainError("exponent must be a finite real")
            b = float(b)
        return ext_pow(a, b)
    if kind is OpKind.EXP:
        return ext_exp(a)
    if kind is OpKind.LN:
        return ext_ln(a)
    if kind is OpKind.NEG:
        return ext_neg(a)
    return ext_cmp(a, ext(b))


def ext_max_abs(values) -> ExtendedReal:
    best = ZERO
    for v in values:
        if cmp_abs(v, best) > 0:
            best = v
    return ext_abs(best)


def ext_norm(values) -> tuple[ExtendedReal, list[float]]:
    """Euclidean norm and unit direction of a vector of ExtendedReals.

    The direction is computed from ratios to the largest component, so it is
    available whenever at least one component is below SAT. A vector with
    more than one SAT component has no direction and raises DirectionLostError.
    """
    values = [ext(v) for v in values]
    m = ext_max_abs(values)
    if m.sign == 0:
        return ZERO, [0.0] * len(values)
    if m.level == LEVEL_SAT:
        sats = [v for v in values if v.level == LEVEL_SAT]
        if len(sats) > 1:
            raise DirectionLostError("relative size of saturated components is unknown")
        return SAT_POS, [float(v.sign) if v.level == LEVEL_SAT else 0.0 for v in values]
    ratios = [float(ext_div(v, m)) for v in values]
    scale = math.sqrt(math.fsum(r * r for r in ratios))
    return ext_mul(m, ext(scale)), [r / scale for r in ratios]


def ext_dot(coeffs, values) -> ExtendedReal:
    """``sum(c_i * v_i)`` with float coefficients and ExtendedReal values.

    When every value is level 0 and nothing overflows this is the plain
    left-to-right double sum (the compiled simulation kernel rounds the same
    way); otherwise terms are accumulated largest-magnitude first.
    """
    values = [ext(v) for v in values]
    if all(v.level == 0 for v in values):
        acc = 0.0
        for c, v in zip(coeffs, values):
            acc += float(c) * (v.sign * v.mag)
        if math.isfinite(acc) and abs(acc) <= BIG:
            return ext(acc)
    terms = [ext_mul(ext(c), ext(v)) for c, v in zip(coeffs, values)]
    terms.sort(key=lambda t: (t.level, t.mag) if t.sign else (-1, 0.0), reverse=True)
    acc = ZERO
    for t in terms:
        acc = ext_add(acc, t)
    return acc


def format_ext(a: ExtendedReal) -> str:
    """Text form used in CSV/JSON: plain decimal for level 0,
    ``E<level>:<mag>`` otherwise, ``SAT`` for saturation."""
    if a.level == 0:
        return repr(a.sign * a.mag) if a.sign else "0.0"
    prefix = "-" if a.sign < 0 else ""
    if a.level == LEVEL_SAT:
        return prefix + "SAT"
    return f"{prefix}E{a.level}:{a.mag!r}"


def parse_ext(text: str) -> ExtendedReal:
    text = text.strip()
    sign = 1
    body = text
    if body.startswith("-") and (body[1:2] == "E" or body[1:] == "SAT"):
        sign, body = -1, body[1:]
    if body == "SAT":
        return SAT_POS if sign > 0 else SAT_NEG
    if body.startswith("E"):
        level_s, mag_s = body[1:].split(":", 1)
        return _make(sign, int(level_s), float(mag_s))
    return ext(float(text))
