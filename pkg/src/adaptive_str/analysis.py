"""Statistics of closed-loop trajectories and their ensemble summaries.

Every per-run statistic is computed from the full-resolution record arrays
of a :class:`~adaptive_str.simulator.Trajectory`. Values that exceed double
range are carried in ExtendedReal and reported as ``inf`` together with a
saturation flag; such runs are left out of ensemble quantiles and counted in
the divergence rate instead.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .numerics.extended import (
    ExtendedReal,
    ext,
    ext_abs,
    ext_add,
    ext_cmp,
    ext_div,
    ext_mul,
    format_ext,
)
from .simulator import FLAG_IN_SL, FLAG_SAT, Trajectory

DEFAULT_T0 = 10
MIN_FIT_POINTS = 10
FIT_POINTS = 60
RECOVERY_SIGMAS = 6.0
# |y| above this makes y^2 overflow; such runs take the ExtendedReal path
_SQ_SAFE = 1e150


# -- per-run statistics --------------------------------------------------------------


def _y_values(traj) -> tuple[list[ExtendedReal] | None, np.ndarray | None, bool]:
    """(ExtendedReal list or None, float array or None, saturated)."""
    if isinstance(traj, Trajectory):
        n = traj.length
        sat = bool(traj.diverged or np.any(traj.y_lvl[:n] == 3))
        if np.all(traj.y_lvl[:n] == 0) and np.all(np.abs(traj.y_mag[:n]) < _SQ_SAFE):
            return None, traj.y_mag[:n].astype(float), sat
        return [traj.y(k) for k in range(n)], None, sat
    vals = list(traj)
    if all(not isinstance(v, ExtendedReal) for v in vals):
        arr = np.asarray(vals, dtype=float)
        if np.all(np.abs(arr) < _SQ_SAFE):
            return None, arr, False
    ev = [ext(v) for v in vals]
    return ev, None, any(v.level == 3 for v in ev)


def running_mean_sq(traj) -> tuple[np.ndarray, bool]:
    """(1/t) sum_{i<=t} y_i^2 for t = 1..T as doubles (inf past double range)."""
    ev, arr, sat = _y_values(traj)
    if arr is not None:
        t = np.arange(1, arr.shape[0] + 1)
        return np.cumsum(arr * arr) / t, sat
    out = np.empty(len(ev))
    acc = ext(0.0)
    for k, v in enumerate(ev):
        acc = ext_add(acc, ext_mul(v, v))
        out[k] = float(ext_div(acc, ext(k + 1)))
    return out, sat


def stability_statistic(traj, t0: int = DEFAULT_T0) -> tuple[ExtendedReal, bool]:
    """``sup_{t0 <= t <= T} (1/t) sum_{i<=t} y_i^2`` and a flag set when the
    run is SAT-contaminated."""
    if t0 < 1:
        raise ValidationError("t0 must be at least 1")
    ev, arr, sat = _y_values(traj)
    if arr is not None:
        n = arr.shape[0]
        if n < t0:
            return ext(0.0), sat
        means = np.cumsum(arr * arr) / np.arange(1, n + 1)
        return ext(float(np.max(means[t0 - 1:]))), sat
    acc = ext(0.0)
    best = ext(0.0)
    for k, v in enumerate(ev):
        acc = ext_add(acc, ext_mul(v, v))
        if k + 1 >= t0:
            m = ext_div(acc, ext(k + 1))
            if ext_cmp(m, best) > 0:
                best = m
    return best, sat


def optimality_gap(traj, sigma: Optional[float] = None) -> float:
    """``|(1/T) sum y_t^2 - sigma^2|``; inf when the mean is beyond doubles."""
    if sigma is None:
        sigma = traj.sigma
    ev, arr, _ = _y_values(traj)
    if arr is not None:
        if arr.shape[0] == 0:
            return math.nan
        return abs(float(np.sum(arr * arr)) / arr.shape[0] - sigma * sigma)
    acc = ext(0.0)
    for v in ev:
        acc = ext_add(acc, ext_mul(v, v))
    m = float(ext_div(acc, ext(len(ev))))
    return abs(m - sigma * sigma)


def final_err(traj: Trajectory) -> float:
    """``||theta - theta_hat_T||^2``."""
    if traj.length == 0:
        return traj.initial_err_sq
    return float(traj.err_sq[traj.length - 1])


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    points: int


def log_spaced_indices(t_lo: float, t_hi: float, points: int = FIT_POINTS) -> np.ndarray:
    """Distinct integers approximately log-spaced in [t_lo, t_hi]."""
    if not (t_lo >= 1 and t_hi > t_lo):
        raise ValidationError("rate window must satisfy 1 <= t_lo < t_hi")
    ts = np.unique(np.round(np.geomspace(t_lo, t_hi, points)).astype(np.int64))
    return ts[(ts >= t_lo) & (ts <= t_hi)]


def rate_fit(t, e, window: Sequence[float] | None = None, points: int = FIT_POINTS) -> RateFit:
    """OLS of ``log e`` on ``log t`` over log-spaced samples in ``window``.

    ``t`` must be increasing integers. All-zero errors in the window give the
    sentinel slope ``-inf``; fewer than 10 usable points raise
    ValidationError.
    """
    t = np.asarray(t, dtype=np.int64)
    e = np.asarray(e, dtype=float)
    if t.shape != e.shape or t.ndim != 1:
        raise ValidationError("t and e must be 1-d of equal length")
    if t.shape[0] == 0:
        raise ValidationError("empty series")
    lo, hi = (float(t[0]), float(t[-1])) if window is None else (float(window[0]), float(window[1]))
    hi = min(hi, float(t[-1]))
    lo = max(lo, float(t[0]))
    ts = log_spaced_indices(lo, hi, points)
    idx = np.searchsorted(t, ts)
    ok = idx < t.shape[0]
    idx, ts = idx[ok], ts[ok]
    idx = np.unique(idx[t[idx] == ts])
    ev = e[idx]
    if ev.shape[0] and np.all(ev == 0.0):
        return RateFit(-math.inf, -math.inf, math.nan, int(ev.shape[0]))
    keep = (ev > 0.0) & np.isfinite(ev)
    idx = idx[keep]
    if idx.shape[0] < MIN_FIT_POINTS:
        raise ValidationError(f"only {idx.shape[0]} points in the fit window; need {MIN_FIT_POINTS}")
    x = np.log(t[idx].astype(float))
    y = np.log(e[idx])
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    syy = float(np.sum((y - ym) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / syy if syy > 0 else 1.0
    return RateFit(slope, intercept, r2, int(idx.shape[0]))


@dataclass(frozen=True)
class ExcursionStats:
    count: int
    lengths: tuple[int, ...]
    length_q10: float
    length_q50: float
    length_q90: float
    last_open_time: Optional[int]
    open_at_end: bool


def _abs_above(traj, threshold: float) -> np.ndarray:
    if isinstance(traj, Trajectory):
        n = traj.length
        return (traj.y_lvl[:n] != 0) | (np.abs(traj.y_mag[:n]) > threshold)
    out = []
    for v in traj:
        v = ext(v)
        out.append(v.level != 0 or v.mag > threshold)
    return np.asarray(out, dtype=bool)


def excursion_stats(traj, threshold: float | None = None) -> ExcursionStats:
    """Maximal runs of consecutive steps with ``|y_t| > threshold``.

    Lengths are counted in steps and only for excursions that closed; an
    excursion still open at the end of the record (including one ended by
    divergence) sets ``open_at_end``. Times are 1-based.
    """
    if threshold is None:
        threshold = traj.excursion_threshold
    if not threshold > 0:
        raise ValidationError("threshold must be positive")
    above = _abs_above(traj, threshold)
    lengths = []
    count = 0
    last_open = None
    start = None
    for k, a in enumerate(above):
        if a and start is None:
            start = k
            count += 1
            last_open = k + 1
        elif not a and start is not None:
            lengths.append(k - start)
            start = None
    # a run ended by saturation finishes on a SAT record, so it is still open
    open_at_end = start is not None
    q = _quantiles(lengths) if lengths else (math.nan, math.nan, math.nan)
    return ExcursionStats(count, tuple(lengths), q[0], q[1], q[2], last_open, open_at_end)


def sl_fraction(traj: Trajectory) -> float:
    """Fraction of steps whose regressor point lay in S_L."""
    n = traj.length
    if n == 0:
        return math.nan
    return float(np.count_nonzero(traj.flags[:n] & FLAG_IN_SL)) / n


def lambda_ratio(traj: Trajectory) -> float:
    n = traj.length
    if n == 0:
        return math.nan
    return float(traj.lambda_min[n - 1]) / n


def lambda_monotone(traj: Trajectory) -> bool:
    lam = traj.lambda_min[: traj.length]
    return bool(np.all(lam[1:] >= lam[:-1]))


def log_bound_fraction(traj: Trajectory) -> float:
    """Fraction of t with ``|y_t| > sigma_{t-1} log t``."""
    n = traj.length
    if n == 0:
        return math.nan
    t = np.arange(1, n + 1, dtype=float)
    lvl_y = traj.y_lvl[:n]
    lvl_s = traj.sig_lvl[:n]
    y = np.abs(traj.y_mag[:n])
    s = traj.sig_mag[:n]
    both0 = (lvl_y == 0) & (lvl_s == 0)
    over = np.zeros(n, dtype=bool)
    over[both0] = y[both0] > s[both0] * np.log(t[both0])
    rest = np.nonzero(~both0)[0]
    for k in rest:
        bound = ext_mul(traj.sigma_t(k), ext(math.log(k + 1)))
        over[k] = ext_cmp(ext_abs(traj.y(k)), bound) > 0
    return float(np.count_nonzero(over)) / n


def recovery_check(traj: Trajectory, L: float | None = None, sigma: float | None = None,
                   k_sigma: float = RECOVERY_SIGMAS) -> tuple[int, int]:
    """At every step taken from a point in S_L check
    ``|y_{t+1}| <= ||theta_err_t|| L + k_sigma sigma``. Returns
    (checked, violations)."""
    L = traj.declared_bound if L is None else L
    sigma = traj.sigma if sigma is None else sigma
    if L is None:
        return 0, 0
    n = traj.length
    checked = violations = 0
    for k in np.nonzero(traj.flags[:n] & FLAG_IN_SL)[0]:
        if traj.flags[k] & FLAG_SAT:
            continue
        err_prev = traj.err_sq[k - 1] if k > 0 else traj.initial_err_sq
        bound = math.sqrt(err_prev) * L + k_sigma * sigma
        checked += 1
        if traj.y_lvl[k] != 0 or abs(traj.y_mag[k]) > bound:
            violations += 1
    return checked, violations


def innovation_moments(traj: Trajectory) -> tuple[float, float]:
    """Mean and variance of ``y_{t+1} / sigma_t`` over level-0 records."""
    n = traj.length
    ok = (traj.y_lvl[:n] == 0) & (traj.sig_lvl[:n] == 0)
    z = traj.y_mag[:n][ok] / traj.sig_mag[:n][ok]
    if z.shape[0] == 0:
        return math.nan, math.nan
    return float(z.mean()), float(z.var())


# -- reports ---------------------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, (np.floating,)):
        return _jsonable(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


@dataclass
class RunReport:
    seed: int
    horizon: int
    length: int
    sigma: float
    theta_true: list
    stability_stat: float
    stability_stat_text: str
    stability_stat_all: float
    saturated: bool
    optimality_gap: float
    final_err: float
    err_log_scaled: float
    err_sqrt_scaled: float
    rate_slope: Optional[float]
    rate_intercept: Optional[float]
    rate_r2: Optional[float]
    lambda_ratio: float
    lambda_monotone: bool
    sl_fraction: Optional[float]
    log_bound_fraction: float
    excursion_count: int
    excursion_lengths: list
    excursion_median_length: float
    last_excursion_time: Optional[int]
    excursions_closed: bool
    recovery_checked: int
    recovery_violations: int
    diverged: bool
    divergence_time: Optional[int]
    divergence_reason: Optional[str]
    pd_repairs: int

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def default_rate_window(T: int) -> tuple[float, float]:
    return (min(1000.0, max(1.0, T / 100.0)), float(T))


def analyze(traj: Trajectory, t0: int = DEFAULT_T0, rate_window: Sequence[float] | None = None,
            threshold: float | None = None, recovery_sigmas: float = RECOVERY_SIGMAS) -> RunReport:
    n = traj.length
    stat, sat = stability_statistic(traj, t0)
    stat_all, _ = stability_statistic(traj, 1)
    fe = final_err(traj)
    T = max(n, 1)
    slope = intercept = r2 = None
    if n >= 2 and not traj.diverged:
        win = default_rate_window(n) if rate_window is None else rate_window
        try:
            fit = rate_fit(np.arange(1, n + 1), traj.err_sq[:n], win)
            slope, intercept, r2 = fit.slope, fit.intercept, fit.r2
        except ValidationError:
            pass
    ex = excursion_stats(traj, threshold)
    checked, viol = recovery_check(traj, k_sigma=recovery_sigmas)
    return RunReport(
        seed=int(traj.seed),
        horizon=int(traj.horizon),
        length=int(n),
        sigma=float(traj.sigma),
        theta_true=[float(v) for v in traj.theta_true],
        stability_stat=float(stat),
        stability_stat_text=format_ext(stat),
        stability_stat_all=float(stat_all),
        saturated=bool(sat),
        optimality_gap=optimality_gap(traj),
        final_err=fe,
        err_log_scaled=fe * T / math.log(T) if T > 1 else math.nan,
        err_sqrt_scaled=fe * math.sqrt(T),
        rate_slope=slope,
        rate_intercept=intercept,
        rate_r2=r2,
        lambda_ratio=lambda_ratio(traj),
        lambda_monotone=lambda_monotone(traj),
        sl_fraction=sl_fraction(traj) if traj.declared_bound is not None else None,
        log_bound_fraction=log_bound_fraction(traj),
        excursion_count=ex.count,
        excursion_lengths=list(ex.lengths),
        excursion_median_length=ex.length_q50,
        last_excursion_time=ex.last_open_time,
        excursions_closed=not ex.open_at_end,
        recovery_checked=checked,
        recovery_violations=viol,
        diverged=bool(traj.diverged),
        divergence_time=traj.divergence_time,
        divergence_reason=traj.divergence_reason,
        pd_repairs=int(traj.pd_repairs),
    )


QUANTILE_FIELDS = (
    "stability_stat",
    "stability_stat_all",
    "optimality_gap",
    "final_err",
    "err_log_scaled",
    "err_sqrt_scaled",
    "rate_slope",
    "lambda_ratio",
    "sl_fraction",
    "log_bound_fraction",
    "excursion_count",
    "excursion_median_length",
)


def _quantiles(values: Sequence[float], probs=(0.1, 0.5, 0.9)) -> tuple[float, ...]:
    """Linear-interpolation quantiles of already comparable values."""
    v = sorted(values)
    out = []
    for p in probs:
        pos = p * (len(v) - 1)
        lo = int(math.floor(pos))
        hi = min(lo + 1, len(v) - 1)
        frac = pos - lo
        if frac == 0.0 or v[lo] == v[hi]:
            out.append(float(v[lo]))
        else:
            out.append(float(v[lo] + (v[hi] - v[lo]) * frac))
    return tuple(out)


def seeded_quantiles(pairs: Sequence[tuple[float, int]], probs=(0.1, 0.5, 0.9)) -> tuple[float, ...]:
    """Quantiles of ``(value, seed)`` pairs sorted by value with the seed as
    tiebreak, so the result does not depend on input order."""
    ordered = sorted(pairs, key=lambda p: (p[0], p[1]))
    return _quantiles([p[0] for p in ordered], probs)


@dataclass
class EnsembleReport:
    runs: int
    seeds: list
    divergence_rate: float
    saturated_runs: int
    excursions_closed_rate: float
    lambda_monotone_all: bool
    recovery_checked: int
    recovery_violations: int
    pooled_excursion_count: int
    pooled_excursion_length_q10: float
    pooled_excursion_length_q50: float
    pooled_excursion_length_q90: float
    quantiles: dict
    reports: list = field(default_factory=list)

    def median(self, name: str) -> float:
        return self.quantiles[name]["q50"]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reports"] = [r.to_dict() for r in self.reports]
        return _jsonable(d)

    def to_json(self) -> str:
        return dumps(self.to_dict())


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, separators=(",", ": ")) + "\n"


def aggregate(reports: Sequence[RunReport]) -> EnsembleReport:
    if not reports:
        raise ValidationError("aggregate needs at least one report")
    reports = sorted(reports, key=lambda r: r.seed)
    clean = [r for r in reports if not r.saturated]
    quant = {}
    for name in QUANTILE_FIELDS:
        pairs = []
        for r in clean:
            v = getattr(r, name)
            if v is None or (isinstance(v, float) and math.isnan(v)):
                continue
            pairs.append((float(v), r.seed))
        if pairs:
            q10, q50, q90 = seeded_quantiles(pairs)
        else:
            q10 = q50 = q90 = math.nan
        quant[name] = {"q10": q10, "q50": q50, "q90": q90, "count": len(pairs)}
    lengths = [ln for r in reports for ln in r.excursion_lengths]
    pq = _quantiles(lengths) if lengths else (math.nan, math.nan, math.nan)
    n = len(reports)
    return EnsembleReport(
        runs=n,
        seeds=[r.seed for r in reports],
        divergence_rate=sum(1 for r in reports if r.diverged or r.saturated) / n,
        saturated_runs=n - len(clean),
        excursions_closed_rate=sum(1 for r in reports if r.excursions_closed) / n,
        lambda_monotone_all=all(r.lambda_monotone for r in reports),
        recovery_checked=sum(r.recovery_checked for r in reports),
        recovery_violations=sum(r.recovery_violations for r in reports),
        pooled_excursion_count=len(lengths),
        pooled_excursion_length_q10=pq[0],
        pooled_excursion_length_q50=pq[1],
        pooled_excursion_length_q90=pq[2],
        quantiles=quant,
        reports=list(reports),
    )
