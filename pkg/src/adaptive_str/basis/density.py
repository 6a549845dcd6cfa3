"""Grid estimate of the density of S_L = {x : ||phi(x)|| <= L}.

Midpoint rule on cells ``[k h, (k+1) h]`` anchored at 0 on both sides; the
value for each ``l`` is ``h * #{midpoints in S_L with |x| <= l} / l``. Ladder
rungs are snapped to multiples of ``h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from ..errors import DomainError, PrecisionError, ValidationError
from .evaluate import TRIG_EXACT_LIMIT
from .spec import BasisSpec


@dataclass(frozen=True)
class DensityEstimate:
    L: float
    h: float
    ladder: tuple[float, ...]
    values: tuple[float, ...]
    values_2l: tuple[float, ...]
    density: float
    refinement_delta: float | None = None
    refined_values: tuple[float, ...] | None = field(default=None, repr=False)

    def table(self) -> list[dict]:
        rows = []
        for i, l in enumerate(self.ladder):
            row = {"l": l, "density": self.values[i], "density_2l": self.values_2l[i]}
            if self.refined_values is not None:
                row["density_half_h"] = self.refined_values[i]
            rows.append(row)
        return rows

    def to_csv(self) -> str:
        """Ladder table as CSV: ``l,density,density_2l[,density_half_h]``."""
        rows = self.table()
        cols = list(rows[0]) if rows else ["l", "density", "density_2l"]
        lines = [",".join(cols)]
        for r in rows:
            lines.append(",".join(repr(float(r[c])) for c in cols))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "h": self.h,
            "density": self.density,
            "refinement_delta": self.refinement_delta,
            "ladder": self.table(),
        }


def default_ladder(l_max: float, points: int = 13) -> list[float]:
    if l_max <= 10:
        return [float(l_max)]
    return [float(v) for v in np.geomspace(10.0, l_max, points)]


@lru_cache(maxsize=32)
def _counter(in_sl, n):
    @njit
    def count(h, kmax, L2):
        """Counts of S_L midpoints per ladder rung. ``kmax[j]`` is the number
        of cells per side inside ``[-l_j, l_j]``. Returns (counts, bad) where
        bad is the first midpoint that could not be classified (or nan)."""
        m = kmax.shape[0]
        counts = np.zeros(m, dtype=np.int64)
        buf = np.empty(n)
        j = 0
        acc = 0
        top = kmax[m - 1]
        for k in range(top):
            while j < m and k >= kmax[j]:
                counts[j] = acc
                j += 1
            x = (k + 0.5) * h
            r = in_sl(x, L2, buf)
            if r < 0:
                return counts, x
            acc += r
            r = in_sl(-x, L2, buf)
            if r < 0:
                return counts, -x
            acc += r
        while j < m:
            counts[j] = acc
            j += 1
        return counts, math.nan

    return count


def _values(spec: BasisSpec, L: float, ladder: np.ndarray, h: float) -> np.ndarray:
    cb = spec.compiled
    kmax = np.rint(ladder / h).astype(np.int64)
    counts, bad = _counter(cb.in_sl, cb.n)(h, kmax, L * L)
    if not math.isnan(bad):
        raise DomainError(f"basis is not evaluable at x = {bad!r}")
    return counts * h / ladder


def estimate_density(
    spec: BasisSpec,
    L: float,
    l_ladder=None,
    h: float = 1e-3,
    l_max: float = 1e4,
    refine: bool = True,
) -> DensityEstimate:
    """Estimate ``l(S_L & [-l, l]) / l`` over a ladder of ``l``.

    The reported density is the minimum over the upper half of the ladder.
    With ``refine`` the grid is also evaluated at ``h/2`` and the largest
    change is reported as ``refinement_delta``.
    """
    if not (L > 0 and math.isfinite(L)):
        raise ValidationError("L must be positive")
    if not h > 0:
        raise ValidationError("h must be positive")
    ladder = np.array(default_ladder(l_max) if l_ladder is None else l_ladder, dtype=float)
    if ladder.size == 0 or np.any(ladder <= 0) or np.any(np.diff(ladder) <= 0):
        raise ValidationError("ladder must be positive and increasing")
    # rungs sit on cell boundaries so every counted cell lies inside [-l, l]
    ladder = np.unique(np.maximum(np.rint(ladder / h), 1.0)) * h
    if spec.has_trig and ladder[-1] >= TRIG_EXACT_LIMIT:
        raise PrecisionError("grid reaches trigonometric arguments beyond 2^52")
    vals = _values(spec, L, ladder, h)
    tail = vals[len(vals) // 2:]
    refined = None
    delta = None
    if refine:
        refined = _values(spec, L, ladder, h / 2)
        delta = float(np.max(np.abs(refined - vals)))
    return DensityEstimate(
        L=float(L),
        h=float(h),
        ladder=tuple(float(v) for v in ladder),
        values=tuple(float(v) for v in vals),
        values_2l=tuple(float(v) / 2 for v in vals),
        density=float(np.min(tail)),
        refinement_delta=delta,
        refined_values=None if refined is None else tuple(float(v) for v in refined),
    )
