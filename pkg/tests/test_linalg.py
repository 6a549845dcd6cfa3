from __future__ import annotations

import math

import numpy as np
import pytest

from adaptive_str.errors import ConsistencyError, DomainError, ValidationError
from adaptive_str.numerics.extended import ExtendedReal, ext
from adaptive_str.numerics.linalg import (
    eigenvalues,
    ldl_inverse,
    ldl_logdet,
    ldl_solve,
    logdet_rank_one_update,
    min_eigenvalue,
    pd_repair,
    spectrum_bounds,
)

from oracles import eigenvalues_charpoly


def rotation(n, p, q, angle):
    g = np.eye(n)
    c, s = math.cos(angle), math.sin(angle)
    g[p, p] = g[q, q] = c
    g[p, q], g[q, p] = -s, s
    return g


def random_orthogonal(rng, n):
    q = np.eye(n)
    for _ in range(3 * n * n):
        i, j = rng.choice(n, size=2, replace=False)
        q = q @ rotation(n, i, j, rng.uniform(0, 2 * math.pi))
    return q


def test_identity_and_diagonal():
    assert min_eigenvalue(np.eye(2)) == 1.0
    assert min_eigenvalue(np.diag([2.0, 5.0])) == 2.0


def test_random_4x4_against_charpoly():
    rng = np.random.default_rng(4)
    for _ in range(20):
        a = rng.normal(size=(4, 4))
        a = a + a.T
        ref = eigenvalues_charpoly(a)
        assert eigenvalues(a) == pytest.approx(ref, abs=1e-8)
        assert min_eigenvalue(a) == pytest.approx(ref[0], abs=1e-10 * (1 + np.linalg.norm(a)))


def test_rotated_diagonal():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(2, 17))
        d = rng.uniform(-10, 10, size=n)
        q = random_orthogonal(rng, n)
        a = q @ np.diag(d) @ q.T
        a = 0.5 * (a + a.T)
        assert min_eigenvalue(a) == pytest.approx(d.min(), abs=1e-8)


def test_spectrum_bounds():
    lo, hi = spectrum_bounds(np.diag([3.0, -1.0, 7.0]))
    assert (lo, hi) == (-1.0, 7.0)


def test_rejects_bad_matrices():
    with pytest.raises(DomainError):
        min_eigenvalue(np.array([[1.0, np.nan], [np.nan, 1.0]]))
    with pytest.raises(ValidationError):
        min_eigenvalue(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValidationError):
        min_eigenvalue(np.ones((2, 3)))


def test_ldl_helpers():
    rng = np.random.default_rng(6)
    for _ in range(50):
        n = int(rng.integers(1, 7))
        m = rng.normal(size=(n, n))
        a = m @ m.T + np.eye(n)
        b = rng.normal(size=n)
        assert ldl_solve(a, b) == pytest.approx(np.linalg.solve(a, b), rel=1e-10, abs=1e-12)
        assert ldl_logdet(a) == pytest.approx(np.linalg.slogdet(a)[1], rel=1e-12)
        assert ldl_inverse(a) == pytest.approx(np.linalg.inv(a), rel=1e-9, abs=1e-12)
    with pytest.raises(ConsistencyError):
        ldl_logdet(np.diag([1.0, -1.0]))


def test_pd_repair_lifts_negative_eigenvalue():
    P = np.array([[1.0, 0.0], [0.0, -1e-3]])
    assert pd_repair(P, 1e-14)
    assert min_eigenvalue(P) == pytest.approx(1e-14, abs=1e-20)
    assert P[0, 0] == pytest.approx(1.0)


# -- log-determinant recursion -------------------------------------------------------


def test_logdet_zero_regressor():
    assert logdet_rank_one_update(0.7, np.eye(2), [0.0, 0.0], 1.0) == 0.7


def test_logdet_hand_example():
    assert logdet_rank_one_update(0.0, np.eye(2), [1.0, 0.0], 1.0) == pytest.approx(math.log(2.0), rel=1e-15)


def test_logdet_200_steps_against_batch():
    rng = np.random.default_rng(7)
    n, sigma = 3, 0.7
    info = np.eye(n)
    logdet = 0.0
    for _ in range(200):
        phi = rng.normal(size=n) * 3.0
        P = np.linalg.inv(info)
        logdet = logdet_rank_one_update(logdet, P, phi, sigma)
        info += np.outer(phi, phi) / sigma**2
    assert logdet == pytest.approx(ldl_logdet(info), rel=1e-8)


def test_logdet_huge_regressor():
    # rho = e^1000 along e_1, P = I, sigma = 1: increment = 2000 + O(e^-2000)
    phi = [ExtendedReal.from_parts(1, 1, 1000.0), ext(0.0)]
    r = logdet_rank_one_update(0.0, np.eye(2), phi, 1.0)
    assert float(r) == pytest.approx(2000.0, rel=1e-14)
    # the normalized branch meets the standard one just above the switch point
    rho = 1e101
    a = logdet_rank_one_update(0.0, np.eye(2), [rho, 0.0], 1.0)
    assert a == pytest.approx(2 * math.log(rho), rel=1e-14)


def test_logdet_nonpositive_form():
    with pytest.raises(ConsistencyError):
        logdet_rank_one_update(0.0, -np.eye(2), [1e200, 0.0], 1.0)
