"""Compile a basis into numba functions.

Two straight-line functions are generated from the expression trees:

* ``phi(x, out)`` fills ``out`` with the double-precision basis values,
  producing NaN/inf instead of raising;
* ``norm2_minus(x, c)`` returns the sign (-1, 0, +1) of ``||phi(x)||^2 - c``
  using compensated main+log-tail arithmetic, or 2 if undecidable.

The float code follows the same operation order as the ExtendedReal
interpreter, so the two agree wherever both are finite.
"""

from __future__ import annotations

import math
from functools import lru_cache

from numba import njit

from . import _jit
from .expr import (
    Abs,
    Add,
    Const,
    Cos,
    Div,
    Exp,
    Expr,
    Indicator,
    Ln,
    Mul,
    Neg,
    Pow,
    Sin,
    Sub,
    Var,
)

_CMP_CODE = {"<": 0, "<=": 1, ">": 2, ">=": 3}


class _Emitter:
    def __init__(self):
        self.lines: list[str] = []
        self.k = 0
        # structurally equal subtrees are computed once
        self.memo: dict[Expr, str] = {}

    def tmp(self) -> str:
        self.k += 1
        return f"t{self.k}"


def _emit_float(e: Expr, em: _Emitter) -> str:
    if e in em.memo:
        return em.memo[e]
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Neg):
        a = _emit_float(e.arg, em)
        expr = f"-{a}"
    elif isinstance(e, (Add, Sub)):
        a = _emit_float(e.left, em)
        b = _emit_float(e.right, em)
        expr = f"{a} {'+' if isinstance(e, Add) else '-'} {b}"
    elif isinstance(e, Mul):
        expr = f"f_mul({_emit_float(e.left, em)}, {_emit_float(e.right, em)})"
    elif isinstance(e, Div):
        expr = f"f_div({_emit_float(e.left, em)}, {_emit_float(e.right, em)})"
    elif isinstance(e, Pow):
        expr = f"f_pow({_emit_float(e.base, em)}, {e.exponent!r})"
    elif isinstance(e, (Sin, Cos, Exp, Ln)):
        expr = f"f_{e.fname}({_emit_float(e.arg, em)})"
    elif isinstance(e, Abs):
        expr = f"abs({_emit_float(e.arg, em)})"
    elif isinstance(e, Indicator):
        expr = f"f_ind({_emit_float(e.arg, em)}, {_CMP_CODE[e.op]}, {e.threshold!r})"
    else:
        raise TypeError(f"not an expression node: {e!r}")
    t = em.tmp()
    em.lines.append(f"    {t} = {expr}")
    em.memo[e] = t
    return t


def _emit_tl(e: Expr, em: _Emitter) -> str:
    """Returns the name prefix ``t`` of a triple ``(t_m, t_s, t_l)``."""
    if e in em.memo:
        return em.memo[e]
    if isinstance(e, Var):
        t = em.tmp()
        em.lines.append(f"    {t}_m, {t}_s, {t}_l = x, 0.0, NEG_INF")
        em.memo[e] = t
        return t
    if isinstance(e, Const):
        t = em.tmp()
        em.lines.append(f"    {t}_m, {t}_s, {t}_l = {e.value!r}, 0.0, NEG_INF")
        return t

    def tri(name):
        return f"{name}_m, {name}_s, {name}_l"

    if isinstance(e, Neg):
        call = f"tl_neg({tri(_emit_tl(e.arg, em))})"
    elif isinstance(e, Add):
        call = f"tl_add({tri(_emit_tl(e.left, em))}, {tri(_emit_tl(e.right, em))})"
    elif isinstance(e, Sub):
        a = _emit_tl(e.left, em)
        b = _emit_tl(e.right, em)
        call = f"tl_add({tri(a)}, -{b}_m, -{b}_s, {b}_l)"
    elif isinstance(e, Mul):
        call = f"tl_mul({tri(_emit_tl(e.left, em))}, {tri(_emit_tl(e.right, em))})"
    elif isinstance(e, Div):
        call = f"tl_div({tri(_emit_tl(e.left, em))}, {tri(_emit_tl(e.right, em))})"
    elif isinstance(e, Pow):
        call = f"tl_pow({tri(_emit_tl(e.base, em))}, {e.exponent!r})"
    elif isinstance(e, (Sin, Cos, Exp, Ln, Abs)):
        call = f"tl_{e.fname}({tri(_emit_tl(e.arg, em))})"
    elif isinstance(e, Indicator):
        call = f"tl_ind({tri(_emit_tl(e.arg, em))}, {_CMP_CODE[e.op]}, {e.threshold!r})"
    else:
        raise TypeError(f"not an expression node: {e!r}")
    t = em.tmp()
    em.lines.append(f"    {t}_m, {t}_s, {t}_l = {call}")
    em.memo[e] = t
    return t


def float_source(exprs: tuple[Expr, ...]) -> str:
    em = _Emitter()
    for j, e in enumerate(exprs):
        r = _emit_float(e, em)
        em.lines.append(f"    out[{j}] = {r}")
    return "def phi(x, out):\n" + "\n".join(em.lines) + "\n"


def tl_source(exprs: tuple[Expr, ...]) -> str:
    em = _Emitter()
    acc = None
    for e in exprs:
        r = _emit_tl(e, em)
        sq = em.tmp()
        em.lines.append(f"    {sq}_m, {sq}_s, {sq}_l = tl_mul({r}_m, {r}_s, {r}_l, {r}_m, {r}_s, {r}_l)")
        if acc is None:
            acc = sq
        else:
            nxt = em.tmp()
            em.lines.append(
                f"    {nxt}_m, {nxt}_s, {nxt}_l = tl_add({acc}_m, {acc}_s, {acc}_l, {sq}_m, {sq}_s, {sq}_l)"
            )
            acc = nxt
    em.lines.append(f"    d_m, d_s, d_l = tl_add({acc}_m, {acc}_s, {acc}_l, -c, 0.0, NEG_INF)")
    em.lines.append("    if d_m != d_m:")
    em.lines.append("        return 2")
    em.lines.append("    if d_m > 0.0 or (d_m == 0.0 and d_s > 0.0):")
    em.lines.append("        return 1")
    em.lines.append("    if d_m < 0.0 or (d_m == 0.0 and d_s < 0.0):")
    em.lines.append("        return -1")
    em.lines.append("    return 0")
    return "def norm2_minus(x, c):\n" + "\n".join(em.lines) + "\n"


def _namespace() -> dict:
    ns = {name: getattr(_jit, name) for name in dir(_jit) if name.startswith(("f_", "tl_"))}
    ns["NEG_INF"] = -math.inf
    ns["math"] = math
    return ns


class CompiledBasis:
    """Numba-compiled evaluators for one tuple of expressions."""

    def __init__(self, exprs: tuple[Expr, ...]):
        self.exprs = tuple(exprs)
        self.n = len(self.exprs)
        ns = _namespace()
        self.phi_source = float_source(self.exprs)
        self.tl_source = tl_source(self.exprs)
        exec(compile(self.phi_source, "<basis-phi>", "exec"), ns)
        exec(compile(self.tl_source, "<basis-norm2>", "exec"), ns)
        self.phi = njit(ns["phi"])
        self.norm2_minus = njit(ns["norm2_minus"])
        self.in_sl = _make_in_sl(self.phi, self.norm2_minus, self.n)


def _make_in_sl(phi, norm2_minus, n):
    @njit
    def in_sl(x, L2, buf):
        """1 if ``||phi(x)||^2 <= L2``, 0 if not, -1 if undecidable in
        doubles. ``buf`` is scratch of length n."""
        phi(x, buf)
        s = 0.0
        for j in range(n):
            s += buf[j] * buf[j]
        if s != s:
            return -1
        if s == math.inf:
            return 0
        # only near-ties need the compensated evaluation
        if abs(s - L2) > 1e-9 * max(s, L2):
            return 1 if s <= L2 else 0
        r = norm2_minus(x, L2)
        if r == 2:
            return -1
        return 1 if r <= 0 else 0

    return in_sl


@lru_cache(maxsize=32)
def compile_basis(exprs: tuple[Expr, ...]) -> CompiledBasis:
    return CompiledBasis(exprs)
