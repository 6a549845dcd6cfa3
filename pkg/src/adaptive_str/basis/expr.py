"""Expression tree for scalar basis functions of one variable ``x``.

Nodes are frozen dataclasses. Each carries a source ``span`` (start, end byte
offsets) that does not take part in equality or hashing, so a parsed tree and
a hand-built tree compare equal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Tuple

Span = Optional[Tuple[int, int]]

CMP_OPS = ("<", "<=", ">", ">=")
FUNC_NAMES = ("sin", "cos", "exp", "ln", "abs")


@dataclass(frozen=True)
class Expr:
    def children(self) -> tuple["Expr", ...]:
        return ()

    def walk(self) -> Iterator["Expr"]:
        yield self
        for c in self.children():
            yield from c.walk()


@dataclass(frozen=True)
class Const(Expr):
    """Nonnegative finite constant; negative values are ``Neg(Const)``."""

    value: float
    name: Optional[str] = None
    span: Span = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v) or v < 0:
            raise ValueError("Const value must be finite and nonnegative")
        if self.name not in (None, "pi") or (self.name == "pi" and v != math.pi):
            raise ValueError("the only named constant is pi")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class Var(Expr):
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr
    span: Span = field(default=None, compare=False, repr=False)

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class _Binary(Expr):
    left: Expr
    right: Expr
    span: Span = field(default=None, compare=False, repr=False)

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Add(_Binary):
    pass


@dataclass(frozen=True)
class Sub(_Binary):
    pass


@dataclass(frozen=True)
class Mul(_Binary):
    pass


@dataclass(frozen=True)
class Div(_Binary):
    pass


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: float
    span: Span = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        e = float(self.exponent)
        if not math.isfinite(e):
            raise ValueError("Pow exponent must be finite")
        object.__setattr__(self, "exponent", e)

    def children(self):
        return (self.base,)


@dataclass(frozen=True)
class _Func(Expr):
    arg: Expr
    span: Span = field(default=None, compare=False, repr=False)
    fname = ""

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Sin(_Func):
    fname = "sin"


@dataclass(frozen=True)
class Cos(_Func):
    fname = "cos"


@dataclass(frozen=True)
class Exp(_Func):
    fname = "exp"


@dataclass(frozen=True)
class Ln(_Func):
    fname = "ln"


@dataclass(frozen=True)
class Abs(_Func):
    fname = "abs"


FUNCS = {cls.fname: cls for cls in (Sin, Cos, Exp, Ln, Abs)}


@dataclass(frozen=True)
class Indicator(Expr):
    """``1`` if ``arg <op> threshold`` else ``0``."""

    arg: Expr
    op: str
    threshold: float
    span: Span = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.op not in CMP_OPS:
            raise ValueError(f"unknown comparison {self.op!r}")
        t = float(self.threshold)
        if not math.isfinite(t):
            raise ValueError("indicator threshold must be finite")
        object.__setattr__(self, "threshold", t)

    def children(self):
        return (self.arg,)

    def holds(self, v: float) -> bool:
        t = self.threshold
        if self.op == "<":
            return v < t
        if self.op == "<=":
            return v <= t
        if self.op == ">":
            return v > t
        return v >= t


def X() -> Var:
    return Var()


def has_trig(e: Expr) -> bool:
    return any(isinstance(n, (Sin, Cos)) for n in e.walk())
