"""Evaluation of basis expressions.

:func:`eval_expr_ext` is the reference interpreter over ExtendedReal values; it
is exact in ordering across all levels and is used by the simulator whenever
the compiled float path cannot represent a step. :func:`eval_expr_float` is a
plain double evaluator used as an independent check of the interpreter.
"""

from __future__ import annotations

import math
from typing import Optional

from ..errors import DomainError, PrecisionError, UnsupportedError
from ..numerics.extended import (
    ONE,
    ZERO,
    ExtendedReal,
    ext,
    ext_abs,
    ext_add,
    ext_cmp,
    ext_div,
    ext_exp,
    ext_ln,
    ext_mul,
    ext_neg,
    ext_pow,
)
from ..numerics.rng import RngState
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

# beyond this, reduction of a double modulo 2 pi carries no information
TRIG_EXACT_LIMIT = 2.0 ** 52
TWO_PI = 2.0 * math.pi


class SurrogateContext:
    """Per-evaluation surrogate state.

    One phase is drawn per distinct trig argument, so ``sin(x)`` and ``cos(x)``
    in the same basis see the same phase.
    """

    __slots__ = ("rng", "enabled", "phases", "fired")

    def __init__(self, rng: Optional[RngState], enabled: bool):
        self.rng = rng
        self.enabled = enabled
        self.phases: dict[Expr, float] = {}
        self.fired = False

    def phase(self, arg: Expr) -> float:
        if not self.enabled:
            raise PrecisionError("trigonometric argument beyond 2^52 with surrogate policy OFF")
        if self.rng is None:
            raise PrecisionError("surrogate phase requested without a random stream")
        self.fired = True
        psi = self.phases.get(arg)
        if psi is None:
            psi = TWO_PI * self.rng.uniform()
            self.phases[arg] = psi
        return psi


def _trig(node: Expr, v: ExtendedReal, ctx: SurrogateContext) -> ExtendedReal:
    fn = math.sin if isinstance(node, Sin) else math.cos
    if v.level == 0 and v.mag < TRIG_EXACT_LIMIT:
        return ext(fn(float(v)))
    return ext(fn(ctx.phase(node.arg)))


def eval_expr_ext(node: Expr, x: ExtendedReal, ctx: SurrogateContext) -> ExtendedReal:
    if isinstance(node, Var):
        return x
    if isinstance(node, Const):
        return ext(node.value)
    if isinstance(node, Neg):
        return ext_neg(eval_expr_ext(node.arg, x, ctx))
    if isinstance(node, Add):
        return ext_add(eval_expr_ext(node.left, x, ctx), eval_expr_ext(node.right, x, ctx))
    if isinstance(node, Sub):
        return ext_add(eval_expr_ext(node.left, x, ctx), ext_neg(eval_expr_ext(node.right, x, ctx)))
    if isinstance(node, Mul):
        return ext_mul(eval_expr_ext(node.left, x, ctx), eval_expr_ext(node.right, x, ctx))
    if isinstance(node, Div):
        return ext_div(eval_expr_ext(node.left, x, ctx), eval_expr_ext(node.right, x, ctx))
    if isinstance(node, Pow):
        return ext_pow(eval_expr_ext(node.base, x, ctx), node.exponent)
    if isinstance(node, (Sin, Cos)):
        return _trig(node, eval_expr_ext(node.arg, x, ctx), ctx)
    if isinstance(node, Exp):
        return ext_exp(eval_expr_ext(node.arg, x, ctx))
    if isinstance(node, Ln):
        return ext_ln(eval_expr_ext(node.arg, x, ctx))
    if isinstance(node, Abs):
        return ext_abs(eval_expr_ext(node.arg, x, ctx))
    if isinstance(node, Indicator):
        v = eval_expr_ext(node.arg, x, ctx)
        c = ext_cmp(v, ext(node.threshold))
        ok = {"<": c < 0, "<=": c <= 0, ">": c > 0, ">=": c >= 0}[node.op]
        return ONE if ok else ZERO
    raise TypeError(f"not an expression node: {node!r}")


def eval_expr_float(node: Expr, x: float) -> float:
    """Plain double evaluation; raises DomainError where the math is
    undefined and OverflowError where a double overflows."""
    if isinstance(node, Var):
        return x
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Neg):
        return -eval_expr_float(node.arg, x)
    if isinstance(node, Add):
        return eval_expr_float(node.left, x) + eval_expr_float(node.right, x)
    if isinstance(node, Sub):
        return eval_expr_float(node.left, x) - eval_expr_float(node.right, x)
    if isinstance(node, Mul):
        return eval_expr_float(node.left, x) * eval_expr_float(node.right, x)
    if isinstance(node, Div):
        d = eval_expr_float(node.right, x)
        if d == 0:
            raise DomainError("division by zero")
        return eval_expr_float(node.left, x) / d
    if isinstance(node, Pow):
        b = eval_expr_float(node.base, x)
        if b < 0 and not node.exponent.is_integer():
            raise DomainError("negative base with non-integer exponent")
        if b == 0 and node.exponent < 0:
            raise DomainError("zero raised to a negative power")
        return math.pow(b, node.exponent)
    if isinstance(node, Sin):
        return math.sin(eval_expr_float(node.arg, x))
    if isinstance(node, Cos):
        return math.cos(eval_expr_float(node.arg, x))
    if isinstance(node, Exp):
        return math.exp(eval_expr_float(node.arg, x))
    if isinstance(node, Ln):
        v = eval_expr_float(node.arg, x)
        if v <= 0:
            raise DomainError("ln of a nonpositive value")
        return math.log(v)
    if isinstance(node, Abs):
        return abs(eval_expr_float(node.arg, x))
    if isinstance(node, Indicator):
        return 1.0 if node.holds(eval_expr_float(node.arg, x)) else 0.0
    raise TypeError(f"not an expression node: {node!r}")


def indicator_asymptotic_probability(e: Expr) -> float:
    """Fraction of a period on which ``ind(sin(x) <op> c)`` or
    ``ind(cos(x) <op> c)`` holds. Equals ``(pi - 2 asin c) / (2 pi)`` for
    ``sin(x) > c``; strict and non-strict comparisons agree (the boundary has
    measure zero) and cos is a shifted sin."""
    if not isinstance(e, Indicator) or not isinstance(e.arg, (Sin, Cos)) or not isinstance(e.arg.arg, Var):
        raise UnsupportedError("expected ind(sin(x) <op> c) or ind(cos(x) <op> c)")
    c = e.threshold
    if c >= 1.0:
        above = 0.0
    elif c <= -1.0:
        above = 1.0
    else:
        above = (math.pi - 2.0 * math.asin(c)) / TWO_PI
    return above if e.op in (">", ">=") else 1.0 - above
