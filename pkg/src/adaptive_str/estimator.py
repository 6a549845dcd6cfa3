"""Recursive least squares (Kalman filter) for theta with P_0 = I.

Standard update for ``||phi|| <= 1e100``::

    P+     = P - P phi phi^T P / (sigma^2 + phi^T P phi)
    theta+ = theta + P phi * innov / (sigma^2 + phi^T P phi)

For larger regressors the same update is written in the unit direction
``d = phi / rho`` so that only ratios of huge numbers are formed::

    P+     = P - P d d^T P / (sigma^2 / rho^2 + s),       s = d^T P d
    theta+ = theta + P d * (innov / rho) / (sigma^2 / rho^2 + s)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ConsistencyError, DirectionLostError, ValidationError
from .numerics.extended import (
    LEVEL_SAT,
    ExtendedReal,
    ext,
    ext_add,
    ext_div,
    ext_dot,
    ext_mul,
    ext_neg,
    ext_norm,
    ext_sqrt,
)
from .numerics.linalg import (
    NORMALIZED_THRESHOLD,
    PD_FLOOR,
    kalman_std_update,
    ldl_inverse,
    ldl_solve,
    logdet_rank_one_update,
    add_logdet,
    pd_repair,
    rank_one_apply,
    spectrum_bounds,
)

log = logging.getLogger(__name__)

Logdet = Union[float, ExtendedReal]
LAMBDA_EVERY_STEP_MAX_N = 8
LAMBDA_CADENCE = 16


@dataclass
class EstimatorState:
    theta_hat: np.ndarray
    p: np.ndarray
    logdet_pinv: Logdet
    t: int
    lambda_min: float
    sigma: float
    repairs: int = 0
    lambda_cadence: int = field(default=1)

    @property
    def n(self) -> int:
        return self.theta_hat.shape[0]

    def copy(self) -> "EstimatorState":
        return EstimatorState(
            self.theta_hat.copy(), self.p.copy(), self.logdet_pinv, self.t,
            self.lambda_min, self.sigma, self.repairs, self.lambda_cadence,
        )


@dataclass
class UpdateDiagnostics:
    sigma_t: ExtendedReal
    innovation: ExtendedReal
    normalized_gain: np.ndarray
    used_normalized_path: bool
    surrogate_flag: bool = False
    pd_repaired: bool = False
    lambda_raw: float = math.nan


def default_lambda_cadence(n: int) -> int:
    return 1 if n <= LAMBDA_EVERY_STEP_MAX_N else LAMBDA_CADENCE


def init_estimator(theta0: Sequence[float], n: int | None = None, sigma: float = 1.0,
                   lambda_cadence: int | None = None) -> EstimatorState:
    theta0 = np.array(theta0, dtype=float).reshape(-1)
    if n is None:
        n = theta0.shape[0]
    if n < 1 or theta0.shape[0] != n:
        raise ValidationError(f"theta0 must have length n = {n}")
    if not (sigma > 0 and math.isfinite(sigma)):
        raise ValidationError("sigma must be positive")
    if not np.all(np.isfinite(theta0)):
        raise ValidationError("theta0 must be finite")
    cad = default_lambda_cadence(n) if lambda_cadence is None else int(lambda_cadence)
    return EstimatorState(theta0.copy(), np.eye(n), 0.0, 0, 1.0, float(sigma), 0, cad)


def _as_ext_vector(phi) -> list[ExtendedReal]:
    return [ext(v) for v in phi]


def refresh_lambda(state: EstimatorState) -> tuple[float, bool]:
    """Recompute lambda_min(P^{-1}) = 1 / lambda_max(P), repairing P when it
    has lost positive definiteness. Returns (raw value, repaired)."""
    lo, hi = spectrum_bounds(state.p)
    repaired = False
    if not lo > 0.0:
        log.info("P lost positive definiteness (min eigenvalue %.3g); repairing", lo)
        if not pd_repair(state.p, PD_FLOOR):
            raise ConsistencyError("positive-definiteness repair failed")
        state.repairs += 1
        repaired = True
        lo, hi = spectrum_bounds(state.p)
    raw = 1.0 / hi
    # lambda_min(P^{-1}) is nondecreasing (Weyl); rounding can only blur it
    state.lambda_min = max(state.lambda_min, raw)
    return raw, repaired


def ls_update(state: EstimatorState, phi, y_next, u, inplace: bool = False,
              force_lambda: bool = False, innov_ratio: float | None = None
              ) -> tuple[EstimatorState, UpdateDiagnostics]:
    """One Kalman/least-squares step with observation ``y_next`` after
    control ``u`` and regressor ``phi``.

    ``innov_ratio`` optionally supplies ``innov / ||phi||`` for the
    normalized path. Beyond level 1 an ExtendedReal keeps only sign and
    order, so a caller that knows the ratio exactly (the simulator does)
    should pass it instead of having it recovered from two rounded values.
    """
    st = state if inplace else state.copy()
    phis = _as_ext_vector(phi)
    if len(phis) != st.n:
        raise ValidationError(f"phi must have length {st.n}")
    sigma2 = st.sigma * st.sigma
    y_next = ext(y_next)
    u = ext(u)
    pred = ext_add(u, ext_dot(st.theta_hat, phis))
    innov = ext_add(y_next, ext_neg(pred))
    rho, direction = ext_norm(phis)
    if rho.level == LEVEL_SAT:
        raise DirectionLostError("saturated regressor: the update ratio is unknown")

    if rho.sign == 0:
        st.t += 1
        diag = UpdateDiagnostics(ext(st.sigma), innov, np.zeros(st.n), False)
        return st, diag

    normalized = not (rho.level == 0 and rho.mag <= NORMALIZED_THRESHOLD and innov.level == 0)
    if not normalized:
        phi_f = np.array([float(v) for v in phis])
        p_old = st.p.copy()
        s = kalman_std_update(st.theta_hat, st.p, phi_f, float(innov), sigma2)
        if s < 0.0:
            raise ConsistencyError("negative quadratic form phi^T P phi")
        st.logdet_pinv = add_logdet(st.logdet_pinv, math.log1p(s / sigma2))
        sig_t = ext(math.sqrt(sigma2 + s))
        gain = p_old @ phi_f / (sigma2 + s)
    else:
        d = np.array(direction)
        pd_ = st.p @ d
        s = float(d @ pd_)
        if not s > 0.0:
            raise ConsistencyError("nonpositive quadratic form along the regressor direction")
        st.logdet_pinv = logdet_rank_one_update(st.logdet_pinv, st.p, phis, st.sigma)
        q = float(ext_div(ext(sigma2), ext_mul(rho, rho)))
        c = 1.0 / (q + s)
        if innov_ratio is None:
            ratio = ext_div(innov, rho)
            if ratio.level != 0:
                raise ConsistencyError("innovation is not O(||phi||); update undefined")
            innov_ratio = float(ratio)
        elif not math.isfinite(innov_ratio):
            raise ConsistencyError("innovation ratio is not finite")
        g = innov_ratio * c
        rank_one_apply(st.theta_hat, st.p, pd_, c, g)
        sig_t = ext_sqrt(ext_add(ext(sigma2), ext_mul(ext_mul(rho, rho), ext(s))))
        gain = pd_ * c
    if not np.all(np.isfinite(st.theta_hat)):
        raise ConsistencyError("parameter estimate is no longer finite")
    st.t += 1
    raw = math.nan
    repaired = False
    if force_lambda or st.lambda_cadence <= 1 or st.t % st.lambda_cadence == 0:
        raw, repaired = refresh_lambda(st)
    diag = UpdateDiagnostics(sig_t, innov, gain, normalized, False, repaired, raw)
    return st, diag


def conditional_std(state: EstimatorState, phi) -> ExtendedReal:
    """``sqrt(sigma^2 + phi^T P phi)``, the conditional std of the next output."""
    phis = _as_ext_vector(phi)
    rho, direction = ext_norm(phis)
    sigma2 = state.sigma * state.sigma
    if rho.sign == 0:
        return ext(state.sigma)
    d = np.array(direction)
    s = float(d @ state.p @ d)
    return ext_sqrt(ext_add(ext(sigma2), ext_mul(ext_mul(rho, rho), ext(s))))


def batch_posterior_oracle(theta0, sigma: float, history) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and covariance of theta from a whole history of
    ``(phi_i, y_{i+1}, u_i)`` triples, by LDL factorization of
    ``I + sigma^-2 sum phi phi^T``."""
    theta0 = np.array(theta0, dtype=float)
    n = theta0.shape[0]
    info = np.eye(n)
    rhs = theta0.copy()
    for phi, y, u in history:
        phi = np.array([float(v) for v in phi], dtype=float)
        info += np.outer(phi, phi) / sigma ** 2
        rhs += phi * (float(y) - float(u)) / sigma ** 2
    return ldl_solve(info, rhs), ldl_inverse(info)
