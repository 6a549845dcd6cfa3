"""Basis specification: the regressor phi = (f_1, ..., f_n) plus metadata."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import ValidationError
from ..numerics.extended import ExtendedReal, ext
from ..numerics.rng import RngState
from .evaluate import SurrogateContext, eval_expr_ext, eval_expr_float
from .expr import Expr, has_trig
from .parser import parse_expr, pretty_print

log = logging.getLogger(__name__)

GRAM_THRESHOLD = 1e-8


class SurrogatePolicy(str, enum.Enum):
    OFF = "OFF"
    EQUIDISTRIBUTION = "EQUIDISTRIBUTION"


@dataclass(frozen=True)
class BasisSpec:
    exprs: tuple[Expr, ...]
    declared_exponents: Optional[tuple[float, ...]] = None
    declared_bound: Optional[float] = None
    surrogate_policy: SurrogatePolicy = SurrogatePolicy.OFF
    _compiled: list = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        exprs = tuple(parse_expr(e) if isinstance(e, str) else e for e in self.exprs)
        object.__setattr__(self, "exprs", exprs)
        if len(exprs) < 1:
            raise ValidationError("a basis needs at least one function")
        object.__setattr__(self, "surrogate_policy", SurrogatePolicy(self.surrogate_policy))
        if self.declared_exponents is not None:
            b = tuple(float(v) for v in self.declared_exponents)
            validate_exponents(b)
            if len(b) != len(exprs):
                raise ValidationError(f"expected {len(exprs)} exponents, got {len(b)}")
            object.__setattr__(self, "declared_exponents", b)
        if self.declared_bound is not None:
            L = float(self.declared_bound)
            if not (L > 0 and math.isfinite(L)):
                raise ValidationError("declared_bound must be positive and finite")
            object.__setattr__(self, "declared_bound", L)

    @classmethod
    def from_strings(cls, sources: Sequence[str], **kw) -> "BasisSpec":
        return cls(tuple(parse_expr(s) for s in sources), **kw)

    @property
    def n(self) -> int:
        return len(self.exprs)

    @property
    def sources(self) -> list[str]:
        return [pretty_print(e) for e in self.exprs]

    @property
    def has_trig(self) -> bool:
        return any(has_trig(e) for e in self.exprs)

    @property
    def compiled(self):
        if not self._compiled:
            from .codegen import compile_basis

            self._compiled.append(compile_basis(self.exprs))
        return self._compiled[0]

    def with_policy(self, policy) -> "BasisSpec":
        return BasisSpec(self.exprs, self.declared_exponents, self.declared_bound, SurrogatePolicy(policy))

    def eval_float(self, x: float) -> np.ndarray:
        return np.array([eval_expr_float(e, x) for e in self.exprs])

    def gram_check(self, lo: float = -5.0, hi: float = 5.0, points: int = 201) -> float:
        """Normalized Gram determinant of the f_j on a sample grid. A value
        below 1e-8 suggests the functions are linearly dependent; this only
        logs a warning and returns the determinant."""
        xs = np.linspace(lo, hi, points)
        F = np.empty((points, self.n))
        buf = np.empty(self.n)
        for i, x in enumerate(xs):
            self.compiled.phi(x, buf)
            F[i] = buf
        F = np.where(np.isfinite(F), F, 0.0)
        norms = np.linalg.norm(F, axis=0)
        if np.any(norms == 0):
            det = 0.0
        else:
            G = (F / norms).T @ (F / norms)
            det = float(np.linalg.det(G))
        if det < GRAM_THRESHOLD:
            log.warning("basis functions look linearly dependent on [%g, %g] (Gram det %.3g)", lo, hi, det)
        return det

    def growth_constant(self, xs=None) -> float:
        """Smallest C with ``||phi(x)|| <= C (1 + |x|^b1)`` over the sample
        points; requires declared exponents."""
        if self.declared_exponents is None:
            raise ValidationError("growth check needs declared exponents")
        b1 = self.declared_exponents[0]
        if xs is None:
            xs = np.concatenate([-np.logspace(-3, 6, 400), [0.0], np.logspace(-3, 6, 400)])
        buf = np.empty(self.n)
        worst = 0.0
        for x in xs:
            self.compiled.phi(float(x), buf)
            worst = max(worst, float(np.linalg.norm(buf)) / (1.0 + abs(x) ** b1))
        return worst


def validate_exponents(b: Sequence[float]) -> None:
    if len(b) == 0:
        raise ValidationError("exponent list is empty")
    for v in b:
        if not math.isfinite(v) or v <= 0:
            raise ValidationError("exponents must be positive and finite")
    for a, c in zip(b, b[1:]):
        if not a > c:
            raise ValidationError("exponents must be strictly decreasing")


def eval_basis(spec: BasisSpec, x, rng: Optional[RngState] = None) -> tuple[list[ExtendedReal], bool]:
    """Evaluate phi(x) in ExtendedReal arithmetic. Returns the values and
    whether an equidistribution surrogate replaced any sin/cos."""
    x = ext(x)
    ctx = SurrogateContext(rng, spec.surrogate_policy is SurrogatePolicy.EQUIDISTRIBUTION)
    values = [eval_expr_ext(e, x, ctx) for e in spec.exprs]
    return values, ctx.fired
