"""Compiled scalar helpers used by generated basis code.

Float helpers never raise: anything undefined becomes NaN and overflow becomes
inf, and the caller falls back to the ExtendedReal interpreter when it sees a
non-finite value.

The ``tl_*`` helpers implement a compensated number ``m + s * exp(l)``: a
double ``m`` plus a tail stored as sign ``s`` and log-magnitude ``l``. The
tail keeps contributions that would be absorbed by rounding (``1 + 1e-400``)
so the sign of ``||phi||^2 - L^2`` can be decided on the boundary of S_L.
"""

from __future__ import annotations

import math

from numba import njit

TRIG_LIMIT = 2.0 ** 52
NEG_INF = -math.inf
_SPLIT = 134217729.0
# tails below exp(-36) * |m| are under half an ulp of m
_FOLD_GAP = 36.0
_LOG_TINY = -700.0


# -- float path ---------------------------------------------------------------


@njit(cache=True)
def f_mul(a, b):
    # zero times an overflowed factor is zero
    if (a == 0.0 and b == b) or (b == 0.0 and a == a):
        return 0.0
    return a * b


@njit(cache=True)
def f_div(a, b):
    if b == 0.0:
        return math.nan
    return a / b


@njit(cache=True)
def f_pow(a, p):
    if a == 0.0:
        if p < 0.0:
            return math.nan
        return 0.0
    if a < 0.0 and p != math.floor(p):
        return math.nan
    if a != a:
        return math.nan
    la = math.log(abs(a)) * p
    if la > 709.0:
        r = math.inf
    else:
        r = math.pow(abs(a), p)
    if a < 0.0 and (p % 2.0) != 0.0:
        return -r
    return r


@njit(cache=True)
def f_exp(a):
    if a > 709.7:
        return math.inf
    return math.exp(a)


@njit(cache=True)
def f_ln(a):
    if not a > 0.0:
        return math.nan
    return math.log(a)


@njit(cache=True)
def f_sin(a):
    if not abs(a) < TRIG_LIMIT:
        return math.nan
    return math.sin(a)


@njit(cache=True)
def f_cos(a):
    if not abs(a) < TRIG_LIMIT:
        return math.nan
    return math.cos(a)


@njit(cache=True)
def f_ind(v, op, c):
    """``op``: 0 '<', 1 '<=', 2 '>', 3 '>='."""
    if v != v:
        return math.nan
    if op == 0:
        ok = v < c
    elif op == 1:
        ok = v <= c
    elif op == 2:
        ok = v > c
    else:
        ok = v >= c
    return 1.0 if ok else 0.0


# -- compensated path ------------------------------------------------------------


@njit(cache=True)
def _sgn(v):
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


@njit(cache=True)
def _log_abs(v):
    if v == 0.0:
        return NEG_INF
    return math.log(abs(v))


@njit(cache=True)
def slse(s1, l1, s2, l2):
    """Signed log-sum-exp: ``(s, l)`` with ``s e^l = s1 e^l1 + s2 e^l2``."""
    if s2 == 0.0 or l2 == NEG_INF:
        return s1, l1
    if s1 == 0.0 or l1 == NEG_INF:
        return s2, l2
    if l1 < l2:
        s1, l1, s2, l2 = s2, l2, s1, l1
    if l2 - l1 < -40.0:
        return s1, l1
    d = math.exp(l2 - l1)
    if s1 == s2:
        return s1, l1 + math.log1p(d)
    if d >= 1.0:
        return 0.0, NEG_INF
    return s1, l1 + math.log1p(-d)


@njit(cache=True)
def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


@njit(cache=True)
def _split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


@njit(cache=True)
def two_prod(a, b):
    p = a * b
    if abs(a) > 1e150 or abs(b) > 1e150 or not math.isfinite(p):
        return p, 0.0
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


@njit(cache=True)
def tl_norm(m, s, l):
    """Fold a tail that has become comparable to ulp(m) back into m."""
    if s == 0.0 or l == NEG_INF or not math.isfinite(m):
        return m, 0.0, NEG_INF
    if l < _LOG_TINY:
        return m, s, l
    if m != 0.0 and l < _log_abs(m) - _FOLD_GAP:
        return m, s, l
    t = s * math.exp(l)
    m2, err = two_sum(m, t)
    return m2, _sgn(err), _log_abs(err)


@njit(cache=True)
def tl_add(am, as_, al, bm, bs, bl):
    m, err = two_sum(am, bm)
    s, l = slse(as_, al, bs, bl)
    s, l = slse(s, l, _sgn(err), _log_abs(err))
    return tl_norm(m, s, l)


@njit(cache=True)
def tl_neg(am, as_, al):
    return -am, -as_, al


@njit(cache=True)
def tl_mul(am, as_, al, bm, bs, bl):
    if am == 0.0 and as_ == 0.0:
        return 0.0, 0.0, NEG_INF
    if bm == 0.0 and bs == 0.0:
        return 0.0, 0.0, NEG_INF
    p = am * bm
    s = 0.0
    l = NEG_INF
    if am != 0.0 and bm != 0.0 and abs(p) < 1e-290:
        # product underflows: keep it entirely in the tail
        s, l = _sgn(am) * _sgn(bm), _log_abs(am) + _log_abs(bm)
        p = 0.0
    else:
        p, err = two_prod(am, bm)
        s, l = _sgn(err), _log_abs(err)
    s, l = slse(s, l, _sgn(am) * bs, _log_abs(am) + bl)
    s, l = slse(s, l, _sgn(bm) * as_, _log_abs(bm) + al)
    s, l = slse(s, l, as_ * bs, al + bl)
    return tl_norm(p, s, l)


@njit(cache=True)
def tl_div(am, as_, al, bm, bs, bl):
    if bm == 0.0:
        return math.nan, 0.0, NEG_INF
    q = am / bm
    hi, lo = two_prod(q, bm)
    r = (am - hi) - lo
    lb = _log_abs(bm)
    sb = _sgn(bm)
    s, l = _sgn(r) * sb, _log_abs(r) - lb
    s, l = slse(s, l, as_ * sb, al - lb)
    s, l = slse(s, l, -_sgn(q) * bs * sb, _log_abs(q) + bl - lb)
    return tl_norm(q, s, l)


@njit(cache=True)
def tl_exp(am, as_, al):
    if am > 709.7:
        return math.inf, 0.0, NEG_INF
    t = 0.0
    if as_ != 0.0 and al > _LOG_TINY:
        t = as_ * math.exp(al)
    if am + t < _LOG_TINY:
        return 0.0, 1.0, am + t
    e = math.exp(am)
    return tl_norm(e, as_, am + al)


@njit(cache=True)
def tl_ln(am, as_, al):
    if am == 0.0:
        if as_ > 0.0:
            return al, 0.0, NEG_INF
        return math.nan, 0.0, NEG_INF
    if am < 0.0:
        return math.nan, 0.0, NEG_INF
    return tl_norm(math.log(am), as_, al - math.log(am))


@njit(cache=True)
def tl_abs(am, as_, al):
    if am > 0.0:
        return am, as_, al
    if am < 0.0:
        return -am, -as_, al
    return 0.0, abs(as_), al


@njit(cache=True)
def tl_sin(am, as_, al):
    if not abs(am) < TRIG_LIMIT:
        return math.nan, 0.0, NEG_INF
    c = math.cos(am)
    return tl_norm(math.sin(am), _sgn(c) * as_, _log_abs(c) + al)


@njit(cache=True)
def tl_cos(am, as_, al):
    if not abs(am) < TRIG_LIMIT:
        return math.nan, 0.0, NEG_INF
    sn = math.sin(am)
    return tl_norm(math.cos(am), -_sgn(sn) * as_, _log_abs(sn) + al)


@njit(cache=True)
def tl_pow(am, as_, al, p):
    if am == 0.0:
        if as_ == 0.0:
            if p < 0.0:
                return math.nan, 0.0, NEG_INF
            return 0.0, 0.0, NEG_INF
        if as_ < 0.0 and p != math.floor(p):
            return math.nan, 0.0, NEG_INF
        s = 1.0
        if as_ < 0.0 and (p % 2.0) != 0.0:
            s = -1.0
        return 0.0, s, p * al
    m = f_pow(am, p)
    if m != m:
        return m, 0.0, NEG_INF
    # d/dm m^p = p m^(p-1)
    sgn_d = _sgn(p) * _sgn(m) * _sgn(am)
    ld = _log_abs(p) + (p - 1.0) * _log_abs(am)
    return tl_norm(m, sgn_d * as_, ld + al)


@njit(cache=True)
def tl_ind(am, as_, al, op, c):
    if am != am:
        return math.nan, 0.0, NEG_INF
    if am > c:
        d = 1.0
    elif am < c:
        d = -1.0
    else:
        d = as_
    if op == 0:
        ok = d < 0.0
    elif op == 1:
        ok = d <= 0.0
    elif op == 2:
        ok = d > 0.0
    else:
        ok = d >= 0.0
    return (1.0 if ok else 0.0), 0.0, NEG_INF
