"""Closed-loop rollout of y_{t+1} = theta^T phi(y_t) + u_t + w_{t+1} under the
certainty-equivalence control u_t = -theta_hat_t^T phi(y_t).

Steps where every quantity fits in a double run in a numba kernel; any step
with a huge or non-finite regressor, a trigonometric argument beyond 2^52, or
an output beyond level 0 is taken by the ExtendedReal reference step
:func:`closed_loop_step`. Both paths use the same summation order and the same
compiled Kalman update, so a step gives the same bits whichever path runs it.

The output is formed as ``(theta - theta_hat)^T phi + w``, which equals
``theta^T phi + u + w`` exactly because ``u + theta_hat^T phi = 0``.
"""

from __future__ import annotations

import enum
import io
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .basis.evaluate import TRIG_EXACT_LIMIT
from .basis.spec import BasisSpec, SurrogatePolicy, eval_basis
from .errors import (
    AdaptiveSTRError,
    ConsistencyError,
    DirectionLostError,
    DomainError,
    PrecisionError,
    SaturationError,
    ValidationError,
)
from .estimator import EstimatorState, init_estimator, ls_update, refresh_lambda
from .numerics.extended import (
    LEVEL_SAT,
    ExtendedReal,
    ext,
    ext_add,
    ext_div,
    ext_dot,
    ext_neg,
    ext_norm,
    format_ext,
)
from .numerics.linalg import NORMALIZED_THRESHOLD, PD_FLOOR, kalman_std_update, pd_repair, spectrum_bounds
from .numerics.rng import (
    STREAM_NOISE,
    STREAM_SURROGATE,
    STREAM_THETA,
    RngState,
    next_standard_normal,
)

log = logging.getLogger(__name__)

FLAG_EXCURSION = 1
FLAG_SURROGATE = 2
FLAG_NORMALIZED = 4
FLAG_SAT = 8
FLAG_IN_SL = 16
FLAG_PD_REPAIR = 32

CSV_HEADER = "t,y,u,sigma_t,lambda_min,err_sq,flags"


class NoiseMode(str, enum.Enum):
    GAUSSIAN = "GAUSSIAN"
    ZERO = "ZERO"


class ThetaMode(str, enum.Enum):
    SAMPLED = "sampled"
    FIXED = "fixed"


@dataclass(frozen=True)
class SystemInstance:
    basis: BasisSpec
    sigma: float
    theta_true: np.ndarray
    theta0: np.ndarray
    y0: float = 0.0
    seed: Optional[int] = None
    mode: ThetaMode = ThetaMode.SAMPLED

    @property
    def n(self) -> int:
        return self.basis.n


@dataclass(frozen=True)
class SimConfig:
    horizon: int
    seed: int = 0
    surrogate_policy: Optional[SurrogatePolicy] = None
    excursion_threshold: float = 1e6
    record_cadence: int = 1
    noise_mode: NoiseMode = NoiseMode.GAUSSIAN
    lambda_cadence: Optional[int] = None

    def __post_init__(self):
        if int(self.horizon) < 1:
            raise ValidationError("horizon must be at least 1")
        if not self.excursion_threshold > 0:
            raise ValidationError("excursion_threshold must be positive")
        if int(self.record_cadence) < 1:
            raise ValidationError("record_cadence must be at least 1")
        object.__setattr__(self, "noise_mode", NoiseMode(self.noise_mode))
        if self.surrogate_policy is not None:
            object.__setattr__(self, "surrogate_policy", SurrogatePolicy(self.surrogate_policy))


def sample_instance(spec: BasisSpec, theta0, sigma: float, y0=0.0, seed: int = 0,
                    mode: ThetaMode | str = ThetaMode.SAMPLED, theta=None) -> SystemInstance:
    """theta_true = theta0 + z with z standard normal from the theta stream
    (sampled mode), or the given ``theta`` (fixed mode)."""
    mode = ThetaMode(mode)
    theta0 = np.array(theta0, dtype=float).reshape(-1)
    if theta0.shape[0] != spec.n:
        raise ValidationError(f"theta0 must have length {spec.n}")
    if not (sigma > 0 and math.isfinite(sigma)):
        raise ValidationError("sigma must be positive")
    if mode is ThetaMode.FIXED:
        if theta is None:
            raise ValidationError("fixed mode needs theta")
        theta_true = np.array(theta, dtype=float).reshape(-1)
        if theta_true.shape[0] != spec.n:
            raise ValidationError(f"theta must have length {spec.n}")
    else:
        theta_true = theta0 + RngState(seed, STREAM_THETA).normals(spec.n)
    return SystemInstance(spec, float(sigma), theta_true, theta0, y0, seed, mode)


def ce_control(theta_hat, phi) -> ExtendedReal:
    """u = -theta_hat^T phi."""
    return ext_neg(ext_dot(theta_hat, phi))


@dataclass
class Trajectory:
    """Columnar per-step records. Row k describes the step y_k -> y_{k+1}
    and is reported at time t = k + 1: y is y_t, u and sigma_t are the
    control and conditional std used to produce it, lambda_min and err_sq
    refer to the estimate after absorbing y_t, and the S_L flag refers to
    y_{t-1} (the point whose regressor was used)."""

    theta_true: np.ndarray
    theta0: np.ndarray
    sigma: float
    seed: int
    instance_seed: Optional[int]
    y0: ExtendedReal
    horizon: int
    excursion_threshold: float
    declared_bound: Optional[float]
    y_mag: np.ndarray
    y_lvl: np.ndarray
    u_mag: np.ndarray
    u_lvl: np.ndarray
    sig_mag: np.ndarray
    sig_lvl: np.ndarray
    innov_mag: np.ndarray
    innov_lvl: np.ndarray
    lambda_min: np.ndarray
    lambda_raw: np.ndarray
    err_sq: np.ndarray
    flags: np.ndarray
    length: int = 0
    diverged: bool = False
    divergence_time: Optional[int] = None
    divergence_reason: Optional[str] = None
    pd_repairs: int = 0
    final_theta_hat: Optional[np.ndarray] = None
    final_logdet: object = 0.0
    initial_err_sq: float = 0.0

    @classmethod
    def allocate(cls, T: int, **meta) -> "Trajectory":
        return cls(
            y_mag=np.zeros(T), y_lvl=np.zeros(T, np.int8),
            u_mag=np.zeros(T), u_lvl=np.zeros(T, np.int8),
            sig_mag=np.zeros(T), sig_lvl=np.zeros(T, np.int8),
            innov_mag=np.zeros(T), innov_lvl=np.zeros(T, np.int8),
            lambda_min=np.zeros(T), lambda_raw=np.full(T, np.nan),
            err_sq=np.zeros(T), flags=np.zeros(T, np.int16),
            horizon=T, **meta,
        )

    def __len__(self) -> int:
        return self.length

    def trim(self) -> "Trajectory":
        return self

    @property
    def t(self) -> np.ndarray:
        return np.arange(1, self.length + 1)

    def _get(self, mag, lvl, k) -> ExtendedReal:
        return ExtendedReal.from_signed(int(lvl[k]), float(mag[k]))

    def y(self, k: int) -> ExtendedReal:
        """y_{k+1}."""
        return self._get(self.y_mag, self.y_lvl, k)

    def u(self, k: int) -> ExtendedReal:
        return self._get(self.u_mag, self.u_lvl, k)

    def sigma_t(self, k: int) -> ExtendedReal:
        return self._get(self.sig_mag, self.sig_lvl, k)

    def innovation(self, k: int) -> ExtendedReal:
        return self._get(self.innov_mag, self.innov_lvl, k)

    @property
    def y_float(self) -> np.ndarray:
        """y as doubles (+-inf beyond level 0)."""
        y = self.y_mag[: self.length].copy()
        big = self.y_lvl[: self.length] != 0
        y[big] = np.sign(y[big]) * np.inf
        return y

    @property
    def level0(self) -> bool:
        n = self.length
        return bool(np.all(self.y_lvl[:n] == 0))

    def write_csv(self, fh, cadence: int = 1) -> None:
        """Header ``t,y,u,sigma_t,lambda_min,err_sq,flags``; values beyond
        double range are written ``E<level>:<mag>`` (``SAT`` when saturated)."""
        fh.write(CSV_HEADER + "\n")
        n = self.length
        for k in range(n):
            if (k + 1) % cadence and k != n - 1:
                continue
            fh.write(
                f"{k + 1},{format_ext(self.y(k))},{format_ext(self.u(k))},{format_ext(self.sigma_t(k))},"
                f"{float(self.lambda_min[k])!r},{float(self.err_sq[k])!r},{int(self.flags[k])}\n"
            )

    def to_csv(self, cadence: int = 1) -> str:
        buf = io.StringIO()
        self.write_csv(buf, cadence)
        return buf.getvalue()


def _store(arr_mag, arr_lvl, k, v: ExtendedReal):
    arr_mag[k] = v.signed_mag
    arr_lvl[k] = v.level


@njit(cache=True)
def sq_dist(a, b):
    """``||a - b||^2`` summed left to right (shared by both step paths)."""
    acc = 0.0
    for j in range(a.shape[0]):
        d = a[j] - b[j]
        acc += d * d
    return acc


# -- compiled fast path ------------------------------------------------------------


@lru_cache(maxsize=16)
def _make_kernel(phi, in_sl, n: int, has_trig: bool, has_bound: bool):
    trig_limit = TRIG_EXACT_LIMIT
    norm_limit = NORMALIZED_THRESHOLD
    big = 1e299

    @njit
    def kernel(k, T, y, theta, theta_hat, P, logdet, lam, sigma, noise_on, rng, L2,
               thresh, cadence, t_est, y_mag, u_mag, sig_mag, innov_mag, lam_arr, lam_raw,
               err_arr, flags):
        """Run level-0 steps from k until T or until a step needs the
        ExtendedReal path. Returns (k, y, logdet, lam, t_est, repairs)."""
        buf = np.empty(n)
        buf2 = np.empty(n)
        sigma2 = sigma * sigma
        repairs = 0
        while k < T:
            if has_trig and not abs(y) < trig_limit:
                break
            phi(y, buf)
            nrm2 = 0.0
            ok = True
            for j in range(n):
                v = buf[j]
                if not math.isfinite(v):
                    ok = False
                nrm2 += v * v
            if not ok or not nrm2 <= norm_limit * norm_limit:
                break
            flag = 0
            if has_bound:
                r = in_sl(y, L2, buf2)
                if r < 0:
                    break
                if r == 1:
                    flag |= 16
            d = 0.0
            e = 0.0
            for j in range(n):
                d += theta_hat[j] * buf[j]
                e += (theta[j] - theta_hat[j]) * buf[j]
            if not (math.isfinite(d) and math.isfinite(e)) or abs(e) > big or abs(d) > big:
                break
            u = -d
            z = next_standard_normal(rng)
            w = sigma * z if noise_on else 0.0
            y_next = e + w
            innov = y_next - (u + d)
            s = kalman_std_update(theta_hat, P, buf, innov, sigma2)
            logdet += math.log1p(s / sigma2)
            t_est += 1
            raw = math.nan
            if cadence <= 1 or t_est % cadence == 0 or k == T - 1:
                lo, hi = spectrum_bounds(P)
                if not lo > 0.0:
                    pd_repair(P, 1e-14)
                    repairs += 1
                    flag |= 32
                    lo, hi = spectrum_bounds(P)
                raw = 1.0 / hi
                if raw > lam:
                    lam = raw
            err = sq_dist(theta, theta_hat)
            if abs(y_next) > thresh:
                flag |= 1
            y_mag[k] = y_next
            u_mag[k] = u
            sig_mag[k] = math.sqrt(sigma2 + s)
            innov_mag[k] = innov
            lam_arr[k] = lam
            lam_raw[k] = raw
            err_arr[k] = err
            flags[k] = flag
            y = y_next
            k += 1
        return k, y, logdet, lam, t_est, repairs

    return kernel


# -- reference step -----------------------------------------------------------------


@dataclass
class StepRecord:
    y_next: ExtendedReal
    u: ExtendedReal
    sigma_t: ExtendedReal
    innovation: ExtendedReal
    lambda_min: float
    lambda_raw: float
    err_sq: float
    flags: int


class _Streams:
    __slots__ = ("noise", "surrogate")

    def __init__(self, seed: int):
        self.noise = RngState(seed, STREAM_NOISE)
        self.surrogate = RngState(seed, STREAM_SURROGATE)


def _in_sl_ext(spec: BasisSpec, y: ExtendedReal, phis) -> bool:
    L = spec.declared_bound
    if y.level == 0 and (not spec.has_trig or y.mag < TRIG_EXACT_LIMIT):
        buf = np.empty(spec.n)
        r = spec.compiled.in_sl(float(y), L * L, buf)
        if r >= 0:
            return r == 1
    rho, _ = ext_norm(phis)
    return rho <= ext(L)


def closed_loop_step(instance: SystemInstance, est: EstimatorState, y_t, streams: _Streams,
                     noise_on: bool = True, threshold: float = 1e6,
                     spec: Optional[BasisSpec] = None, force_lambda: bool = False):
    """One closed-loop step in ExtendedReal arithmetic.

    Returns ``(y_{t+1}, est, record)``; ``est`` is updated in place. Raises
    DirectionLostError / SaturationError / PrecisionError / DomainError when
    the step cannot be carried out.
    """
    spec = instance.basis if spec is None else spec
    y_t = ext(y_t)
    phis, fired = eval_basis(spec, y_t, streams.surrogate)
    if any(v.level == LEVEL_SAT for v in phis):
        raise SaturationError("regressor saturated")
    flags = FLAG_SURROGATE if fired else 0
    if spec.declared_bound is not None and _in_sl_ext(spec, y_t, phis):
        flags |= FLAG_IN_SL
    u = ce_control(est.theta_hat, phis)
    theta_err = instance.theta_true - est.theta_hat
    e = ext_dot(theta_err, phis)
    z = next_standard_normal(streams.noise.state)
    w = instance.sigma * z if noise_on else 0.0
    y_next = ext_add(e, ext(w))
    if y_next.level == LEVEL_SAT:
        raise SaturationError("output saturated")
    # y / rho = theta_err^T d + w / rho, known exactly here even when y is not
    rho, direction = ext_norm(phis)
    ratio = None
    if rho.sign != 0:
        ratio = 0.0
        for j in range(len(direction)):
            ratio += theta_err[j] * direction[j]
        ratio += float(ext_div(ext(w), rho))
    est, diag = ls_update(est, phis, y_next, u, inplace=True, force_lambda=force_lambda,
                          innov_ratio=ratio)
    if diag.used_normalized_path:
        flags |= FLAG_NORMALIZED
    if diag.pd_repaired:
        flags |= FLAG_PD_REPAIR
    if y_next.level > 0 or y_next.mag > threshold:
        flags |= FLAG_EXCURSION
    rec = StepRecord(y_next, u, diag.sigma_t, diag.innovation, est.lambda_min, diag.lambda_raw,
                     sq_dist(instance.theta_true, est.theta_hat), flags)
    return y_next, est, rec


_DIVERGENCE_ERRORS = (
    SaturationError,
    DirectionLostError,
    PrecisionError,
    DomainError,
    ConsistencyError,
)


def _reason(exc: Exception) -> str:
    names = {
        SaturationError: "saturation",
        DirectionLostError: "direction_lost",
        PrecisionError: "precision",
        DomainError: "domain",
        ConsistencyError: "consistency",
    }
    for cls, name in names.items():
        if isinstance(exc, cls):
            return name
    return "error"


def rollout(instance: SystemInstance, config: SimConfig, use_kernel: bool = True) -> Trajectory:
    """Simulate ``config.horizon`` steps. Divergence (saturation, lost
    direction, precision or domain failure) ends the run and is recorded on
    the trajectory instead of being raised."""
    spec = instance.basis
    if config.surrogate_policy is not None:
        spec = spec.with_policy(config.surrogate_policy)
    T = int(config.horizon)
    noise_on = config.noise_mode is NoiseMode.GAUSSIAN
    est = init_estimator(instance.theta0, instance.n, instance.sigma, config.lambda_cadence)
    streams = _Streams(config.seed)
    y0 = ext(instance.y0)
    traj = Trajectory.allocate(
        T,
        theta_true=instance.theta_true.copy(), theta0=instance.theta0.copy(), sigma=instance.sigma,
        seed=config.seed, instance_seed=instance.seed, y0=y0,
        excursion_threshold=float(config.excursion_threshold), declared_bound=spec.declared_bound,
        initial_err_sq=sq_dist(instance.theta_true, instance.theta0),
    )
    kernel = None
    if use_kernel:
        cb = spec.compiled
        kernel = _make_kernel(cb.phi, cb.in_sl, cb.n, spec.has_trig, spec.declared_bound is not None)
    L2 = spec.declared_bound ** 2 if spec.declared_bound is not None else 0.0
    thresh = float(config.excursion_threshold)
    theta = np.ascontiguousarray(instance.theta_true, dtype=float)

    y = y0
    k = 0
    while k < T:
        if kernel is not None and y.level == 0:
            logdet_in = est.logdet_pinv if isinstance(est.logdet_pinv, float) else 0.0
            k, yf, logdet_out, lam, t_est, reps = kernel(
                k, T, float(y), theta, est.theta_hat, est.p, logdet_in, est.lambda_min, est.sigma,
                noise_on, streams.noise.state, L2, thresh, est.lambda_cadence, est.t,
                traj.y_mag, traj.u_mag, traj.sig_mag, traj.innov_mag, traj.lambda_min,
                traj.lambda_raw, traj.err_sq, traj.flags,
            )
            if isinstance(est.logdet_pinv, float):
                est.logdet_pinv = logdet_out
            else:
                est.logdet_pinv = ext_add(est.logdet_pinv, ext(logdet_out))
            est.lambda_min = lam
            est.t = t_est
            if reps:
                log.info("P lost positive definiteness %d time(s); repaired", reps)
                est.repairs += reps
            y = ext(yf)
            if k >= T:
                break
        try:
            y_next, est, rec = closed_loop_step(
                instance, est, y, streams, noise_on, thresh, spec, force_lambda=(k == T - 1)
            )
        except _DIVERGENCE_ERRORS as exc:
            traj.diverged = True
            traj.divergence_time = k + 1
            traj.divergence_reason = _reason(exc)
            if isinstance(exc, SaturationError) and k < T:
                traj.y_mag[k] = 1.0
                traj.y_lvl[k] = LEVEL_SAT
                traj.flags[k] = FLAG_SAT | FLAG_EXCURSION
                traj.lambda_min[k] = est.lambda_min
                traj.err_sq[k] = traj.err_sq[k - 1] if k > 0 else traj.initial_err_sq
                k += 1
            break
        _store(traj.y_mag, traj.y_lvl, k, rec.y_next)
        _store(traj.u_mag, traj.u_lvl, k, rec.u)
        _store(traj.sig_mag, traj.sig_lvl, k, rec.sigma_t)
        _store(traj.innov_mag, traj.innov_lvl, k, rec.innovation)
        traj.lambda_min[k] = rec.lambda_min
        traj.lambda_raw[k] = rec.lambda_raw
        traj.err_sq[k] = rec.err_sq
        traj.flags[k] = rec.flags
        y = y_next
        k += 1
    traj.length = k
    traj.pd_repairs = est.repairs
    traj.final_theta_hat = est.theta_hat.copy()
    traj.final_logdet = est.logdet_pinv
    return traj
