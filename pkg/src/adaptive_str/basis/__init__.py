"""Basis functions: expression language, evaluation and S_L density."""

from .evaluate import indicator_asymptotic_probability
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
from .parser import parse_expr, pretty_print
from .spec import BasisSpec, SurrogatePolicy, eval_basis, validate_exponents


def estimate_density(*args, **kwargs):
    from .density import estimate_density as _estimate

    return _estimate(*args, **kwargs)
