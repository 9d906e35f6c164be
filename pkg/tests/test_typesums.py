import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from pnq.errors import CapacityError, DomainError, StateError
from pnq.idealmach import build_principal_index
from pnq.quadfield import field_invariants
from pnq.typesums import (
    ProductWeight,
    SigmaInstance,
    chi_infinity,
    chi_infinity_array,
    coefficient_source,
    coprime_count_bruteforce,
    coprime_count_closed_form,
    headline_sum,
    main_term_sum,
    predicted_main_term,
    sigma_bruteforce,
    sigma_formula,
    support_index,
    type_i_sum,
    type_ii_sum,
    unit_group_order_bruteforce,
    unit_group_order_formula,
    weight_by_name,
)


def one(xs):
    return np.ones(np.shape(xs))


def zero(xs):
    return np.zeros(np.shape(xs))


def lattice_sum_brute(n, X, ell):
    """Direct double loop over ``x^2 + n y^2 <= X`` with sympy primality."""
    total = 0j
    for y in range(-math.isqrt(X // n), math.isqrt(X // n) + 1):
        for x in range(-math.isqrt(X), math.isqrt(X) + 1):
            v = x * x + n * y * y
            if v > X or not (sympy.isprime(abs(x)) and sympy.isprime(abs(y)) and sympy.isprime(v)):
                continue
            z = complex(x, y * math.sqrt(n))
            total += (z / abs(z)) ** ell * math.log(abs(x)) * math.log(abs(y))
    return total


def test_chi_infinity_examples(gauss):
    assert chi_infinity(3, -2, gauss, 0) == 1
    assert chi_infinity(1, 1, gauss, 4) == pytest.approx(complex(-7, -24) / 25)
    for ell in range(-3, 5):
        assert chi_infinity(-2, -5, gauss, ell) == pytest.approx((-1) ** ell * chi_infinity(2, 5, gauss, ell))
    with pytest.raises(DomainError):
        chi_infinity(0, 0, gauss, 1)
    xs, ys = np.array([1, -3, 4]), np.array([2, 1, -1])
    assert np.allclose(chi_infinity_array(xs, ys, 4, 3), [chi_infinity(int(a), int(b), gauss, 3) for a, b in zip(xs, ys)])


def test_headline_small_example(gauss):
    assert headline_sum(gauss, 50, 0) == pytest.approx(4 * math.log(5) * math.log(2))


@pytest.mark.parametrize("n", [4, 6, 10])
@pytest.mark.parametrize("ell", [0, 1, 2, 3])
def test_headline_matches_double_loop(n, ell):
    inv = field_invariants(n)
    got = headline_sum(inv, 3000, ell)
    want = lattice_sum_brute(n, 3000, ell)
    assert got.real == pytest.approx(want.real, abs=1e-9 * max(1, abs(want)))
    assert got.imag == pytest.approx(want.imag, abs=1e-9 * max(1, abs(want)))


def test_headline_symmetries(gauss):
    for ell in (1, 3, 5):
        assert headline_sum(gauss, 20000, ell) == 0
    for ell in (2, 4):
        assert headline_sum(gauss, 20000, -ell) == pytest.approx(headline_sum(gauss, 20000, ell).conjugate())


def test_headline_thread_invariance(gauss):
    assert headline_sum(gauss, 200_000, 2, threads=1) == headline_sum(gauss, 200_000, 2, threads=3)


def test_headline_guard(gauss):
    with pytest.raises(CapacityError):
        headline_sum(gauss, 10**11, 0)


def test_main_term_cases(gauss):
    assert main_term_sum(gauss, 20000, 1) == 0
    assert main_term_sum(gauss, 20000, 3) == 0
    assert main_term_sum(gauss, 20000, -2) == pytest.approx(main_term_sum(gauss, 20000, 2).conjugate())
    assert predicted_main_term(gauss, 100, kappa=1.0) == pytest.approx(math.pi * 100 / 2)


def test_weights_by_name():
    xs = np.arange(-10, 11)
    assert weight_by_name("lambda_prime", 100)(np.array([-7]))[0] == pytest.approx(math.log(7))
    assert weight_by_name("von_mangoldt", 100)(np.array([8]))[0] == pytest.approx(math.log(2))
    assert np.all(weight_by_name("one", 100)(xs) == 1)
    with pytest.raises(DomainError):
        weight_by_name("nope", 100)


def test_type_i_basics(gauss):
    X = 2000
    w0 = ProductWeight(zero, zero, 0, gauss)
    idx = build_principal_index(gauss, X)
    assert type_i_sum(w0, 10, X, idx)["value"] == 0
    w1 = ProductWeight(one, one, 0, gauss)
    assert type_i_sum(w1, X + 1, X, idx)["value"] == 0
    with pytest.raises(StateError):
        type_i_sum(w1, 10, X, None)
    with pytest.raises(StateError):
        type_i_sum(w1, 10, 2 * X, idx)


def test_type_i_monotone_for_nonnegative_weights(gauss):
    w1 = ProductWeight(one, one, 0, gauss)
    idx = build_principal_index(gauss, 4000)
    vals = [type_i_sum(w1, 20, X, idx)["value"] for X in (500, 1000, 2000, 4000)]
    assert vals == sorted(vals)


def test_support_index_matches_full_index(gauss):
    lp = weight_by_name("lambda_prime", 3000)
    w = ProductWeight(lp, lp, 2, gauss)
    full = build_principal_index(gauss, 3000)
    small = support_index(w, 3000)
    a = type_i_sum(w, 30, 3000, full)
    b = type_i_sum(w, 30, 3000, small)
    assert a["value"] == pytest.approx(b["value"], rel=1e-12)


def test_type_ii_zero_weight(gauss):
    idx = build_principal_index(gauss, 1000)
    w0 = ProductWeight(zero, zero, 0, gauss)
    c = coefficient_source("random", 3)
    assert type_ii_sum(w0, 10, 1000, c, c, idx) == 0


def test_type_ii_against_gaussian_divisor_loop(gauss):
    """alpha = beta = 1 and w = 1 x 1: every generator x + 2yi counts its ideal divisors of norm in [L, 2L)."""
    X, L = 10**4, 10
    idx = build_principal_index(gauss, X)
    w = ProductWeight(one, one, 0, gauss)
    c = coefficient_source("constant")
    got = type_ii_sum(w, L, X, c, c, idx)
    betas = [(a, b) for a in range(-5, 6) for b in range(-5, 6) if L <= a * a + b * b < 2 * L]
    brute = 0
    for y in range(-math.isqrt(X // 4), math.isqrt(X // 4) + 1):
        for x in range(-math.isqrt(X), math.isqrt(X) + 1):
            if x * x + 4 * y * y > X or (x == 0 and y == 0):
                continue
            re, im = x, 2 * y
            for a, b in betas:
                nb = a * a + b * b
                # (re + im i) / (a + b i) is a Gaussian integer iff both parts of (re + im i)(a - b i) divide by nb
                if (re * a + im * b) % nb == 0 and (im * a - re * b) % nb == 0:
                    brute += 1
    assert brute % 4 == 0
    assert got == pytest.approx(brute // 4)


def test_coefficient_sources(gauss):
    idx = build_principal_index(gauss, 200)
    ideals = list(idx.ideals.values())
    r1, r2 = coefficient_source("random", 5), coefficient_source("random", 5)
    assert all(r1(a) == r2(a) and abs(abs(r1(a)) - 1) < 1e-12 for a in ideals)
    mob = coefficient_source("mobius")
    assert all(mob(a) in (-1, 0, 1) for a in ideals)
    with pytest.raises(DomainError):
        coefficient_source("nope")


def test_sigma_worked_example(gauss):
    inst = SigmaInstance(gauss, frozenset(), frozenset())
    assert sigma_formula(inst) == 2
    count, units, sigma = sigma_bruteforce(inst)
    assert (count, units, sigma) == (16, 32, 2)


def test_sigma_lemma_zero_cases(gauss):
    inst = SigmaInstance(gauss, frozenset({2}), frozenset())
    assert sigma_formula(inst) == 0 and sigma_bruteforce(inst)[2] == 0
    both = SigmaInstance(gauss, frozenset({3}), frozenset({3}))
    assert sigma_formula(both) == 0 and sigma_bruteforce(both)[2] == 0


@given(
    st.sampled_from([4, 6, 10, 12]),
    st.sets(st.sampled_from([2, 3, 5, 7]), max_size=2),
    st.sets(st.sampled_from([3, 5, 7]), max_size=1),
)
def test_sigma_routes_agree(n, S1, S2):
    inst = SigmaInstance(field_invariants(n), frozenset(S1), frozenset(S2))
    if inst.D > 20_000:
        return
    assert sigma_formula(inst) == sigma_bruteforce(inst)[2]
    assert unit_group_order_formula(inst) == unit_group_order_bruteforce(inst)
    if not (inst.S1 & inst.S2 or inst.S1 & inst.T):
        assert coprime_count_closed_form(inst) == coprime_count_bruteforce(inst)


def test_sigma_needs_even_n():
    with pytest.raises(DomainError):
        SigmaInstance(field_invariants(5), frozenset(), frozenset())
