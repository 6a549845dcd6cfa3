from __future__ import annotations

import random
import time
from fractions import Fraction

import pytest
import sympy

from adaptive_str.criterion import (
    Indeterminate,
    OutOfScope,
    Satisfied,
    Violated,
    build_stability_polynomial,
    check_positive_on_open_interval,
    horner_exact,
    is_stabilizable,
    verdict_to_dict,
)
from adaptive_str.errors import ValidationError


def sympy_positive(b) -> bool:
    """Exact oracle: P has no real root in [1, b_1] (P(1) = 1 and P(b_1) > 0)."""
    x = sympy.Symbol("x")
    fb = [sympy.Rational(Fraction(v)) for v in b]
    coeffs = [1, -fb[0]] + [fb[i] - fb[i + 1] for i in range(len(fb) - 1)] + [fb[-1]]
    p = sympy.Poly(coeffs, x)
    return p.count_roots(1, fb[0]) == 0


def random_exponents(rng: random.Random):
    n = rng.randint(1, 5)
    b1 = rng.uniform(1.05, 8.0)
    rest = sorted((rng.uniform(0.01, b1) for _ in range(n - 1)), reverse=True)
    b = [b1] + rest
    if any(not x > y for x, y in zip(b, b[1:])):
        return None
    return b


# -- polynomial construction -------------------------------------------------------


def test_example1_polynomial():
    p = build_stability_polynomial([2, 1])
    assert p.coeffs == (1.0, -2.0, 1.0, 1.0)
    assert p.interval == (1.0, 2.0)


def test_scalar_polynomial():
    assert build_stability_polynomial([4]).coeffs == (1.0, -4.0, 4.0)


def test_p_at_one_and_b1():
    rng = random.Random(1)
    for _ in range(500):
        b = random_exponents(rng)
        if b is None:
            continue
        p = build_stability_polynomial(b)
        assert p.eval_exact(1) == 1
        fb = [Fraction(v) for v in b]
        n = len(b)
        direct = sum((fb[i] - fb[i + 1]) * fb[0] ** (n - 1 - i) for i in range(n - 1)) + fb[-1]
        assert p.eval_exact(fb[0]) == direct > 0


def test_build_validation():
    for bad in ([], [1, 2], [2, 2], [2, -1], [float("inf")]):
        with pytest.raises(ValidationError):
            build_stability_polynomial(bad)


# -- positivity check ----------------------------------------------------------------


def test_double_root_is_violated():
    v = check_positive_on_open_interval([1, -4, 4], 1, 4)
    assert isinstance(v, Violated)
    assert v.witness == pytest.approx(2.0, abs=1e-6)
    assert v.value <= 0


def test_example1_positive():
    assert isinstance(check_positive_on_open_interval([1, -2, 1, 1], 1, 2), Satisfied)


def test_constant_positive():
    assert isinstance(check_positive_on_open_interval([1.0], -3, 3), Satisfied)


def test_check_validation():
    with pytest.raises(ValidationError):
        check_positive_on_open_interval([1.0], 2, 1)
    with pytest.raises(ValidationError):
        check_positive_on_open_interval([1.0], 0, 1, tol=0)


# -- is_stabilizable -------------------------------------------------------------------


@pytest.mark.parametrize("b1", [1.01, 1.5, 2, 3, 3.9, 3.99, 4, 4.01, 4.5, 6])
def test_scalar_law(b1):
    v = is_stabilizable([b1])
    if b1 < 4:
        assert isinstance(v, Satisfied)
    else:
        assert isinstance(v, Violated)
        assert horner_exact(build_stability_polynomial([b1]).exact, Fraction(v.witness)) <= 0


def test_example1_satisfied():
    assert isinstance(is_stabilizable([2, 1]), Satisfied)


def test_out_of_scope():
    assert isinstance(is_stabilizable([0.5]), OutOfScope)
    assert isinstance(is_stabilizable([1.0]), OutOfScope)
    assert isinstance(is_stabilizable([3, 3]), OutOfScope)
    assert isinstance(is_stabilizable([3, -1]), OutOfScope)
    with pytest.raises(ValidationError):
        is_stabilizable([])


def test_against_exact_root_count():
    rng = random.Random(7)
    checked = 0
    while checked < 300:
        b = random_exponents(rng)
        if b is None:
            continue
        v = is_stabilizable(b)
        assert not isinstance(v, Indeterminate), b
        assert isinstance(v, Satisfied) == sympy_positive(b), b
        if isinstance(v, Violated):
            assert build_stability_polynomial(b).eval_exact(v.witness) <= 0
            assert 1 < v.witness < b[0]
        checked += 1


def test_verdict_stable_under_tol():
    rng = random.Random(8)
    checked = 0
    while checked < 100:
        b = random_exponents(rng)
        if b is None:
            continue
        p = build_stability_polynomial(b)
        grid = [1 + (b[0] - 1) * k / 4000 for k in range(1, 4000)]
        if min(abs(p(x)) for x in grid) <= 1e-6:
            continue
        kinds = {is_stabilizable(b, tol).kind for tol in (1e-14, 1e-12, 1e-10, 1e-8)}
        assert len(kinds) == 1, b
        checked += 1


def test_runtime_per_case():
    for b in ([1.5], [3.99], [4.0], [6.0], [2, 1]):
        t = time.perf_counter()
        is_stabilizable(b)
        assert time.perf_counter() - t < 0.01


def test_verdict_dict():
    assert verdict_to_dict(is_stabilizable([2, 1])) == {"verdict": "Satisfied"}
    d = verdict_to_dict(is_stabilizable([4]))
    assert d["verdict"] == "Violated" and d["witness"] == pytest.approx(2.0, abs=1e-6)
    assert verdict_to_dict(is_stabilizable([0.5]))["verdict"] == "OutOfScope"
