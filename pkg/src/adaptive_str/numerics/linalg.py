"""Small dense symmetric linear algebra (n <= 16).

Everything the closed-loop kernel touches is compiled with numba and also
callable from Python, so the kernel and the Python reference path run the
same arithmetic.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..errors import ConsistencyError, DomainError, ValidationError
from .extended import ExtendedReal, ext, ext_add, ext_mul, ext_norm, ln_abs

MAX_DIM = 16
JACOBI_MAX_SWEEPS = 64
JACOBI_REL_TOL = 1e-14
PD_FLOOR = 1e-14


@njit(cache=True)
def jacobi_eigh(a):
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    Returns ``(eigenvalues, V)`` with ``a = V diag(eigenvalues) V^T``.
    Stops when the off-diagonal Frobenius norm drops below
    ``1e-14 * ||a||_F`` or after 64 sweeps.
    """
    n = a.shape[0]
    A = a.copy()
    V = np.eye(n)
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += A[i, j] * A[i, j]
    fro = math.sqrt(fro)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * A[i, j] * A[i, j]
        if math.sqrt(off) <= JACOBI_REL_TOL * fro:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                app = A[p, p]
                aqq = A[q, q]
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
                for r in range(n):
                    if r != p and r != q:
                        arp = A[r, p]
                        arq = A[r, q]
                        A[r, p] = c * arp - s * arq
                        A[p, r] = A[r, p]
                        A[r, q] = c * arq + s * arp
                        A[q, r] = A[r, q]
                for r in range(n):
                    vrp = V[r, p]
                    vrq = V[r, q]
                    V[r, p] = c * vrp - s * vrq
                    V[r, q] = s * vrp + c * vrq
    w = np.empty(n)
    for i in range(n):
        w[i] = A[i, i]
    return w, V


@njit(cache=True)
def spectrum_bounds(a):
    """``(min eigenvalue, max eigenvalue)`` of a symmetric matrix."""
    w, _ = jacobi_eigh(a)
    return w.min(), w.max()


def _check_sym(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    if not 1 <= m.shape[0] <= MAX_DIM:
        raise ValidationError(f"dimension must be in [1, {MAX_DIM}]")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix has non-finite entries")
    scale = np.max(np.abs(m)) if m.size else 0.0
    if np.max(np.abs(m - m.T)) > 1e-12 * max(scale, 1.0):
        raise ValidationError("matrix is not symmetric")
    return m


def as_sym_matrix(m) -> np.ndarray:
    """Validate and return an exactly symmetric copy."""
    m = _check_sym(m)
    return 0.5 * (m + m.T)


def eigenvalues(m) -> np.ndarray:
    w, _ = jacobi_eigh(as_sym_matrix(m))
    return np.sort(w)


def min_eigenvalue(m) -> float:
    """Smallest eigenvalue of a symmetric matrix via cyclic Jacobi."""
    w, _ = jacobi_eigh(as_sym_matrix(m))
    return float(w.min())


@njit(cache=True)
def pd_repair(P, floor):
    """Symmetrize ``P`` in place and lift eigenvalues below ``floor``.
    Returns False if the result is still not finite."""
    n = P.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            v = 0.5 * (P[i, j] + P[j, i])
            P[i, j] = v
            P[j, i] = v
    w, V = jacobi_eigh(P)
    for k in range(n):
        if not (w[k] >= floor):
            w[k] = floor
    for i in range(n):
        for j in range(i, n):
            acc = 0.0
            for k in range(n):
                acc += V[i, k] * w[k] * V[j, k]
            P[i, j] = acc
            P[j, i] = acc
    for i in range(n):
        for j in range(n):
            if not math.isfinite(P[i, j]):
                return False
    return True


@njit(cache=True)
def kalman_std_update(theta_hat, P, phi, innov, sigma2):
    """Plain least-squares/Kalman update, in place; returns ``phi^T P phi``.

        P     <- P - (P phi)(P phi)^T / (sigma^2 + phi^T P phi)
        theta <- theta + P phi * innov / (sigma^2 + phi^T P phi)
    """
    n = P.shape[0]
    Pphi = np.empty(n)
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += P[i, j] * phi[j]
        Pphi[i] = acc
    s = 0.0
    for i in range(n):
        s += phi[i] * Pphi[i]
    if s <= 0.0:
        return s
    d = sigma2 + s
    g = innov / d
    for i in range(n):
        theta_hat[i] += Pphi[i] * g
    for i in range(n):
        for j in range(i, n):
            v = P[i, j] - Pphi[i] * Pphi[j] / d
            P[i, j] = v
            P[j, i] = v
    return s


@njit(cache=True)
def rank_one_apply(theta_hat, P, Pd, c, g):
    """``P <- P - c (Pd)(Pd)^T`` and ``theta <- theta + Pd * g``, in place."""
    n = P.shape[0]
    for i in range(n):
        theta_hat[i] += Pd[i] * g
    for i in range(n):
        for j in range(i, n):
            v = P[i, j] - c * Pd[i] * Pd[j]
            P[i, j] = v
            P[j, i] = v


# -- LDL^T (test oracles and batch determinant) ------------------------------


def ldl_factor(a) -> tuple[np.ndarray, np.ndarray]:
    """Unpivoted ``a = L D L^T`` for a symmetric positive definite matrix."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    L = np.eye(n)
    d = np.zeros(n)
    for j in range(n):
        d[j] = a[j, j] - np.dot(L[j, :j] ** 2, d[:j])
        if not d[j] > 0.0:
            raise ConsistencyError("matrix is not positive definite")
        for i in range(j + 1, n):
            L[i, j] = (a[i, j] - np.dot(L[i, :j] * L[j, :j], d[:j])) / d[j]
    return L, d


def ldl_solve(a, b) -> np.ndarray:
    L, d = ldl_factor(a)
    z = np.array(b, dtype=float)
    n = len(z)
    for i in range(n):
        z[i] -= np.dot(L[i, :i], z[:i])
    z /= d
    for i in reversed(range(n)):
        z[i] -= np.dot(L[i + 1:, i], z[i + 1:])
    return z


def ldl_logdet(a) -> float:
    _, d = ldl_factor(a)
    return float(np.sum(np.log(d)))


def ldl_inverse(a) -> np.ndarray:
    n = np.asarray(a).shape[0]
    return np.column_stack([ldl_solve(a, e) for e in np.eye(n)])


# -- log-determinant recursion ---------------------------------------------------

NORMALIZED_THRESHOLD = 1e100


def quad_form(p: np.ndarray, v) -> float:
    v = np.asarray(v, dtype=float)
    return float(v @ p @ v)


def logdet_rank_one_update(current_logdet, p, phi, sigma: float):
    """``log|P^{-1} + phi phi^T / sigma^2|`` from ``log|P^{-1}|``.

    Uses ``log|P_+^{-1}| = log|P^{-1}| + log(1 + phi^T P phi / sigma^2)``. For
    regressors beyond 1e100 the increment is ``2 log rho + log(s/sigma^2) +
    log1p(sigma^2 / (rho^2 s))`` with ``s`` the quadratic form of the unit
    direction, so nothing overflows. The result is a float when it fits and an
    ExtendedReal otherwise.
    """
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    p = np.asarray(p, dtype=float)
    sigma2 = sigma * sigma
    phis = [ext(v) for v in phi]
    rho, direction = ext_norm(phis)
    if rho.sign == 0:
        return current_logdet
    if rho.level == 0 and rho.mag <= NORMALIZED_THRESHOLD:
        q = quad_form(p, [float(v) for v in phis])
        if q < 0.0:
            raise ConsistencyError("negative quadratic form phi^T P phi")
        incr: float | ExtendedReal = math.log1p(q / sigma2)
    else:
        s = quad_form(p, direction)
        if not s > 0.0:
            raise ConsistencyError("nonpositive quadratic form along the regressor direction")
        two_log_rho = ext_mul(ext(2.0), ln_abs(rho))
        tail = math.log(s / sigma2)
        rho2s = ext_mul(ext_mul(rho, rho), ext(s))
        if rho2s.level == 0:
            tail += math.log1p(sigma2 / rho2s.mag)
        incr = ext_add(two_log_rho, ext(tail))
    return add_logdet(current_logdet, incr)


def add_logdet(a, b):
    """Sum of two log-determinants kept as float while representable."""
    if isinstance(a, ExtendedReal) or isinstance(b, ExtendedReal):
        r = ext_add(ext(a), ext(b))
        return float(r) if r.level == 0 else r
    return a + b
