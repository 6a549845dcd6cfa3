"""Recursive-descent parser and printer for the basis expression language.

Grammar (whitespace is insignificant)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' exponent)?
    exponent:= ['-'] number | ['-'] 'pi' | '(' constant expr ')' | power-exponent chain
    atom    := number | 'pi' | 'x' | func '(' expr ')'
             | 'ind' '(' expr cmp ['-'] number ')' | '(' expr ')'
    func    := 'sin' | 'cos' | 'exp' | 'ln' | 'abs'
    cmp     := '<' | '<=' | '>' | '>='

Binding strength is ``^`` > unary minus > ``* /`` > ``+ -``, so ``-x^2`` is
``-(x^2)``. ``^`` is right associative; because exponents are constants,
``x^2^3`` folds to ``x^8``.
"""

from __future__ import annotations

import math
import re

from ..errors import ExprSyntaxError, NonConstantExponentError, UnknownIdentifierError
from .expr import (
    CMP_OPS,
    FUNCS,
    Add,
    Const,
    Div,
    Expr,
    Indicator,
    Mul,
    Neg,
    Pow,
    Sub,
    Var,
    _Func,
)

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op><=|>=|[-+*/^()<>]))"
)


class _Tok:
    __slots__ = ("kind", "text", "pos", "end")

    def __init__(self, kind, text, pos, end):
        self.kind = kind
        self.text = text
        self.pos = pos
        self.end = end

    def __repr__(self):
        return f"{self.kind}:{self.text}@{self.pos}"


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    i = 0
    n = len(src)
    while True:
        while i < n and src[i].isspace():
            i += 1
        if i >= n:
            break
        m = _TOKEN.match(src, i)
        if m is None or m.end() == i:
            raise ExprSyntaxError(f"unexpected character {src[i]!r}", i, src)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), start, m.end()))
        i = m.end()
    toks.append(_Tok("eof", "", n, n))
    return toks


def _describe(tok: _Tok) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.text)


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.kind == "op" and self.tok.text == text

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            raise ExprSyntaxError(f"expected {text!r}, found {_describe(self.tok)}", self.tok.pos, self.src)
        return self.advance()

    def error(self, what: str):
        raise ExprSyntaxError(f"expected {what}, found {_describe(self.tok)}", self.tok.pos, self.src)

    # -- grammar ----------------------------------------------------------

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "eof":
            self.error("operator or end of input")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            right = self.term()
            node = Add if op == "+" else Sub
            left = node(left, right, span=(left.span[0], right.span[1]))
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.at("*") or self.at("/"):
            op = self.advance().text
            right = self.unary()
            node = Mul if op == "*" else Div
            left = node(left, right, span=(left.span[0], right.span[1]))
        return left

    def unary(self) -> Expr:
        if self.at("-"):
            start = self.advance().pos
            arg = self.unary()
            return Neg(arg, span=(start, arg.span[1]))
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if not self.at("^"):
            return base
        self.advance()
        e, end = self.exponent()
        return Pow(base, e, span=(base.span[0], end))

    def exponent(self) -> tuple[float, int]:
        """Constant exponent, folding a right-associative ``^`` chain."""
        tok = self.tok
        sign = 1.0
        if self.at("-"):
            self.advance()
            sign = -1.0
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            value, end = float(tok.text), tok.end
        elif tok.kind == "id" and tok.text == "pi":
            self.advance()
            value, end = math.pi, tok.end
        elif self.at("("):
            start = self.advance().pos
            inner = self.expr()
            close = self.expect(")")
            value = _constant_value(inner)
            if value is None:
                raise NonConstantExponentError("exponent must be a constant", start, self.src)
            end = close.end
        elif tok.kind == "eof" or tok.kind == "op":
            self.error("constant exponent")
        else:
            raise NonConstantExponentError("exponent must be a constant", tok.pos, self.src)
        if self.at("^"):
            self.advance()
            rest, end = self.exponent()
            value = value ** rest
        value *= sign
        if not math.isfinite(value):
            raise ExprSyntaxError("exponent is not finite", tok.pos, self.src)
        return value, end

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            value = float(tok.text)
            if not math.isfinite(value):
                raise ExprSyntaxError("number out of range", tok.pos, self.src)
            return Const(value, span=(tok.pos, tok.end))
        if tok.kind == "id":
            self.advance()
            name = tok.text
            if name == "x":
                return Var(span=(tok.pos, tok.end))
            if name == "pi":
                return Const(math.pi, "pi", span=(tok.pos, tok.end))
            if name in FUNCS:
                self.expect("(")
                arg = self.expr()
                close = self.expect(")")
                return FUNCS[name](arg, span=(tok.pos, close.end))
            if name == "ind":
                return self.indicator(tok)
            raise UnknownIdentifierError(f"unknown identifier {name!r}", tok.pos, self.src)
        if self.at("("):
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        self.error("number, 'x', function or '('")

    def indicator(self, name_tok: _Tok) -> Expr:
        self.expect("(")
        arg = self.expr()
        if not (self.tok.kind == "op" and self.tok.text in CMP_OPS):
            self.error("comparison operator")
        op = self.advance().text
        sign = 1.0
        if self.at("-"):
            self.advance()
            sign = -1.0
        tok = self.tok
        if tok.kind != "num":
            self.error("number")
        self.advance()
        close = self.expect(")")
        return Indicator(arg, op, sign * float(tok.text), span=(name_tok.pos, close.end))


def _constant_value(e: Expr) -> float | None:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Neg):
        v = _constant_value(e.arg)
        return None if v is None else -v
    return None


def parse_expr(source: str) -> Expr:
    """Parse one basis function. Raises ExprSyntaxError,
    UnknownIdentifierError or NonConstantExponentError with a byte offset."""
    return _Parser(source).parse()


# -- printing ---------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def format_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _prec(e: Expr) -> int:
    if isinstance(e, (Add, Sub)):
        return _PREC_ADD
    if isinstance(e, (Mul, Div)):
        return _PREC_MUL
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ATOM


def _wrap(e: Expr, min_prec: int) -> str:
    s = pretty_print(e)
    return f"({s})" if _prec(e) < min_prec else s


def pretty_print(e: Expr) -> str:
    """Canonical text; ``parse_expr(pretty_print(e)) == e``."""
    if isinstance(e, Const):
        return e.name if e.name else format_number(e.value)
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Neg):
        inner = _wrap(e.arg, _PREC_NEG)
        return "-" + inner
    if isinstance(e, (Add, Sub)):
        op = " + " if isinstance(e, Add) else " - "
        return _wrap(e.left, _PREC_ADD) + op + _wrap(e.right, _PREC_MUL)
    if isinstance(e, (Mul, Div)):
        op = "*" if isinstance(e, Mul) else "/"
        return _wrap(e.left, _PREC_MUL) + op + _wrap(e.right, _PREC_NEG)
    if isinstance(e, Pow):
        return _wrap(e.base, _PREC_ATOM) + "^" + format_number(e.exponent)
    if isinstance(e, _Func):
        return f"{e.fname}({pretty_print(e.arg)})"
    if isinstance(e, Indicator):
        return f"ind({pretty_print(e.arg)} {e.op} {format_number(e.threshold)})"
    raise TypeError(f"not an expression node: {e!r}")
