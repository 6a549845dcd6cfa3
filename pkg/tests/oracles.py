"""Independent reference implementations used only by the tests.

Each oracle recomputes a quantity by a different route than the package:
arbitrary precision instead of doubles, characteristic polynomials instead of
rotations, plain Python integers instead of compiled code.
"""

from __future__ import annotations

import math
import random

import gmpy2
import mpmath

from adaptive_str.numerics.extended import BIG, LEVEL_SAT, LN_BIG, ExtendedReal

ORACLE_PREC = 4096

# -- ExtendedReal in 4096-bit arithmetic ---------------------------------------------
#
# A nonzero value v is held as (s, t, X): s = sign(v) and L = ln|v| = t * e^X
# with t in {-1, 0, 1}. X is an MPFR float at 4096 bits, so every level-0..2
# value (level 2 has X = mag up to 1e300) fits with room to spare and no step
# ever exponentiates a huge number.

ORACLE_ZERO = (0, 0, None)
ORACLE_OVER = "overflow"  # beyond every representable level (e^e^e^...)
_NEGLIGIBLE = 5000.0  # e^-5000 is far below 2^-4096


def oracle_context():
    return gmpy2.context(gmpy2.get_context(), precision=ORACLE_PREC,
                         emax=gmpy2.get_emax_max(), emin=gmpy2.get_emin_min())


def _mp(v) -> "gmpy2.mpfr":
    return gmpy2.mpfr(v)


def _real(t, X):
    """t * e^X as an MPFR float; only for moderate X."""
    return 0 if t == 0 else t * gmpy2.exp(X)


def _from_real(v):
    """(t, X) of a real v."""
    if v == 0:
        return 0, None
    return (1 if v > 0 else -1), gmpy2.log(abs(v))


def _cmp_tx(a, b) -> int:
    (ta, Xa), (tb, Xb) = a, b
    if ta != tb:
        return (ta > tb) - (ta < tb)
    if ta == 0:
        return 0
    c = (Xa > Xb) - (Xa < Xb)
    return c * ta


def _add_tx(a, b):
    """Sum of two reals given as (t, X)."""
    (ta, Xa), (tb, Xb) = a, b
    if ta == 0:
        return b
    if tb == 0:
        return a
    if Xb > Xa:
        (ta, Xa), (tb, Xb) = (tb, Xb), (ta, Xa)
    d = Xb - Xa
    if d < -_NEGLIGIBLE:
        return ta, Xa
    if ta == tb:
        return ta, Xa + gmpy2.log1p(gmpy2.exp(d))
    if d == 0:
        return 0, None
    return ta, Xa + gmpy2.log(-gmpy2.expm1(d))


def oracle_of(x: ExtendedReal):
    """Oracle form of a finite ExtendedReal."""
    assert x.level != LEVEL_SAT
    if x.sign == 0:
        return ORACLE_ZERO
    m = _mp(x.mag)
    if x.level == 0:
        t, X = _from_real(gmpy2.log(m))
        return x.sign, t, X
    if x.level == 1:
        return x.sign, 1, gmpy2.log(m)
    return x.sign, 1, m


def oracle_op(kind: str, a: ExtendedReal, b=None):
    """Reference result in oracle form, ORACLE_OVER, or an int for CMP."""
    with oracle_context():
        sa, ta, Xa = oracle_of(a)
        if kind == "neg":
            return -sa, ta, Xa
        if kind == "cmp":
            sb, tb, Xb = oracle_of(b)
            if sa != sb:
                return (sa > sb) - (sa < sb)
            if sa == 0:
                return 0
            return sa * _cmp_tx((ta, Xa), (tb, Xb))
        if kind == "mul":
            sb, tb, Xb = oracle_of(b)
            if sa == 0 or sb == 0:
                return ORACLE_ZERO
            return (sa * sb,) + _add_tx((ta, Xa), (tb, Xb))
        if kind == "pow":
            p = float(b)
            if sa == 0:
                return ORACLE_ZERO
            sign = -1 if sa < 0 and int(p) % 2 else 1
            if p == 0 or ta == 0:
                return sign, 0, None
            return sign, ta * (1 if p > 0 else -1), Xa + gmpy2.log(abs(_mp(p)))
        if kind == "exp":
            if sa == 0:
                return 1, 0, None
            if ta > 0 and Xa > 1e6:
                # |a| > e^e^1e6: e^a is past level 2 or below every double
                return ORACLE_OVER if sa > 0 else ORACLE_ZERO
            la = _real(ta, Xa)  # ln|a|
            return (1, sa, la)
        if kind == "ln":
            assert sa > 0
            if ta == 0:
                return ORACLE_ZERO
            return (ta,) + _from_real(Xa)
        if kind == "add":
            sb, tb, Xb = oracle_of(b)
            if sb == 0:
                return sa, ta, Xa
            if sa == 0:
                return sb, tb, Xb
            if _cmp_tx((ta, Xa), (tb, Xb)) < 0:
                (sa, ta, Xa), (sb, tb, Xb) = (sb, tb, Xb), (sa, ta, Xa)
            # ln|a + b| = La + ln|1 +- e^D| with D = Lb - La <= 0
            tD, XD = _add_tx((tb, Xb), (-ta, Xa))
            if tD == 0:
                if sa != sb:
                    return ORACLE_ZERO
                return (sa,) + _add_tx((ta, Xa), _from_real(gmpy2.log(_mp(2))))
            if XD > gmpy2.log(_mp(_NEGLIGIBLE)):
                return sa, ta, Xa
            d = -gmpy2.exp(XD)
            c = gmpy2.log1p(gmpy2.exp(d)) if sa == sb else gmpy2.log(-gmpy2.expm1(d))
            return (sa,) + _add_tx((ta, Xa), _from_real(c))
        raise ValueError(kind)


def agrees(result: ExtendedReal, ref, rel: float = 1e-12) -> bool:
    """Compare at the level of the result: the value itself for level 0
    (with an absolute floor at the bottom of the double range), ln|v| for
    level 1 and ln ln|v| for level 2."""
    if ref == ORACLE_OVER:
        return result.level == LEVEL_SAT and result.sign > 0
    s, t, X = ref
    if s == 0:
        return result.sign == 0
    with oracle_context():
        if result.level == LEVEL_SAT:
            return result.sign == s and t > 0 and X > BIG * (1 - rel)
        if result.sign == 0:
            # underflow below the double range
            return t < 0 and X > gmpy2.log(_mp(-math.log(1e-290)))
        if result.sign != s:
            return False
        m = _mp(result.mag)
        if result.level == 0:
            if t > 0 and X > gmpy2.log(_mp(800.0)):
                return False
            v = gmpy2.exp(_real(t, X)) if t and X < 10 else (_mp(1) if t == 0 else _mp(0))
            return abs(m - v) <= rel * v + _mp(1e-300)
        if t <= 0:
            return False
        if result.level == 1:
            if X > 1000:
                return False
            L = gmpy2.exp(X)
            return abs(m - L) <= rel * L
        return abs(m - X) <= rel * X


def oracle_float(ref) -> float:
    """Double nearest the oracle value (level-0 range only)."""
    s, t, X = ref
    if s == 0:
        return 0.0
    with oracle_context():
        return float(s * gmpy2.exp(_real(t, X)))


def random_ext(rng: random.Random, max_level: int = 2, signed: bool = True) -> ExtendedReal:
    """Random canonical ExtendedReal spread over all levels."""
    sign = rng.choice((-1, 1)) if signed else 1
    u = rng.random()
    if u < 0.05:
        return ExtendedReal.from_parts(0, 0, 0.0)
    level = 0 if u < 0.55 or max_level == 0 else (1 if u < 0.85 or max_level == 1 else 2)
    if level == 0:
        if rng.random() < 0.5:
            mag = 10.0 ** rng.uniform(-150, 150)
        else:
            mag = 10.0 ** rng.uniform(-300, 300)
        return ExtendedReal.from_parts(sign, 0, mag)
    if rng.random() < 0.7:
        mag = rng.uniform(LN_BIG * 1.0000001, 5000.0)
    else:
        mag = 10.0 ** rng.uniform(math.log10(LN_BIG) + 1e-6, 300)
    return ExtendedReal.from_parts(sign, level, mag)


def random_op_args(rng: random.Random, kind: str):
    """Operands for one random operation, within each operation's domain."""
    if kind == "exp":
        return random_ext(rng, max_level=1), None
    if kind == "ln":
        a = random_ext(rng, signed=False)
        while a.sign == 0:
            a = random_ext(rng, signed=False)
        return a, None
    a = random_ext(rng)
    if kind == "pow":
        if a.sign < 0:
            return a, float(rng.randint(-4, 4))
        p = rng.uniform(-3, 3)
        return a, abs(p) if a.sign == 0 else p
    if kind == "neg":
        return a, None
    return a, random_ext(rng)


# -- eigenvalues through the characteristic polynomial ------------------------------


def charpoly(a, dps: int = 60):
    """Coefficients (highest degree first) of det(lambda I - a) by the
    Faddeev-LeVerrier recursion in high precision."""
    with mpmath.workdps(dps):
        n = len(a)
        A = mpmath.matrix([[mpmath.mpf(float(a[i][j])) for j in range(n)] for i in range(n)])
        coeffs = [mpmath.mpf(1)]
        M = mpmath.zeros(n, n)
        c = mpmath.mpf(1)
        for k in range(1, n + 1):
            M = A * M + c * mpmath.eye(n)
            AM = A * M
            c = -sum(AM[i, i] for i in range(n)) / k
            coeffs.append(c)
        return coeffs


def _polyval(c, x):
    acc = mpmath.mpf(0)
    for v in c:
        acc = acc * x + v
    return acc


def _polyrem(num, den):
    num = list(num)
    while len(num) >= len(den):
        q = num[0] / den[0]
        for i in range(len(den)):
            num[i] -= q * den[i]
        num.pop(0)
    while num and abs(num[0]) == 0:
        num.pop(0)
    return num


def sturm_chain(c):
    n = len(c) - 1
    d = [c[i] * (n - i) for i in range(n)]
    chain = [c, d]
    while len(chain[-1]) > 1:
        r = _polyrem(chain[-2], chain[-1])
        if not r:
            break
        chain.append([-v for v in r])
    return chain


def _sign_changes(chain, x) -> int:
    signs = []
    for p in chain:
        v = _polyval(p, x)
        if v != 0:
            signs.append(v > 0)
    return sum(1 for s, t in zip(signs, signs[1:]) if s != t)


def eigenvalues_charpoly(a, tol: float = 1e-12, dps: int = 60) -> list[float]:
    """All eigenvalues of a symmetric matrix, ascending, by Sturm-sequence
    bisection on the characteristic polynomial."""
    n = len(a)
    with mpmath.workdps(dps):
        c = charpoly(a, dps)
        chain = sturm_chain(c)
        radius = max(sum(abs(float(a[i][j])) for j in range(n)) for i in range(n)) + 1.0
        lo0, hi0 = mpmath.mpf(-radius), mpmath.mpf(radius)

        def count_below(x):
            return _sign_changes(chain, lo0) - _sign_changes(chain, x)

        out = []
        stack = [(lo0, hi0, 0, n)]
        width = tol * radius
        while stack:
            lo, hi, clo, chi = stack.pop()
            if chi - clo == 0:
                continue
            if hi - lo < width:
                out.extend([float((lo + hi) / 2)] * (chi - clo))
                continue
            mid = (lo + hi) / 2
            cm = count_below(mid)
            stack.append((lo, mid, clo, cm))
            stack.append((mid, hi, cm, chi))
        return sorted(out)


# -- xoshiro256** in plain integers --------------------------------------------------

_MASK = (1 << 64) - 1


def ref_splitmix64(x: int):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return x, z ^ (z >> 31)


class RefXoshiro:
    def __init__(self, seed: int, stream_id: int):
        x = (seed ^ ((stream_id * 0x9E3779B97F4A7C15) & _MASK)) & _MASK
        self.s = []
        for _ in range(4):
            x, z = ref_splitmix64(x)
            self.s.append(z)

    def next_u64(self) -> int:
        s = self.s
        rotl = lambda v, k: ((v << k) | (v >> (64 - k))) & _MASK
        result = (rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def normal(self) -> float:
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


# -- scripted scalar closed loop -----------------------------------------------------


def scripted_scalar_loop(theta, theta0, sigma, y0, f, T, noise=None):
    """The scalar recursion written out directly: y_{t+1} = theta f(y_t) + u_t + w,
    u_t = -theta_hat f(y_t), followed by the scalar Kalman update. Works in
    whatever number type the arguments carry (floats or mpmath mpf)."""
    th, p, y = theta0, theta0 * 0 + 1, y0
    ys, ths = [], []
    for t in range(T):
        phi = f(y)
        u = -th * phi
        w = 0.0 if noise is None else noise[t]
        y_next = theta * phi + u + w
        denom = sigma * sigma + p * phi * phi
        th = th + p * phi * (y_next - u - th * phi) / denom
        p = p - p * p * phi * phi / denom
        ys.append(y_next)
        ths.append(th)
        y = y_next
    return ys, ths
