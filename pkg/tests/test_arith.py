import math

import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from pnq.arith import (
    divisor_count_array,
    divisor_moment_report,
    factorize,
    is_prime_64,
    lambda_prime,
    lambda_prime_array,
    mobius_array,
    primes_up_to,
    sieve_primes,
    tau_mu,
    von_mangoldt,
    von_mangoldt_array,
)
from pnq.errors import CapacityError, DomainError


def test_small_sieves():
    assert primes_up_to(10).tolist() == [2, 3, 5, 7]
    assert len(primes_up_to(100)) == 25
    assert sieve_primes(10**6).count() == 78498


def test_segment_size_does_not_change_result():
    a = sieve_primes(300_000, segment_bytes=4096).primes(2, 300_000)
    b = sieve_primes(300_000).primes(2, 300_000)
    assert np.array_equal(a, b)


def test_sieve_limit_guard():
    with pytest.raises((CapacityError, DomainError)):
        sieve_primes(-1)


@pytest.mark.parametrize("m, expected", [(1, False), (2, True), (4294967311, True), (10**12 + 39, True), (561, False)])
def test_primality_examples(m, expected):
    assert is_prime_64(m) is expected


@given(st.integers(min_value=0, max_value=2**64 - 1))
def test_primality_matches_sympy(m):
    assert is_prime_64(m) == sympy.isprime(m)


@given(st.integers(min_value=1, max_value=10**12))
def test_factorize_roundtrip(m):
    f = factorize(m)
    assert math.prod(p**e for p, e in f.items()) == m
    assert f == sympy.factorint(m)


def test_lambda_examples():
    assert lambda_prime(-7) == pytest.approx(math.log(7))
    assert lambda_prime(9) == 0.0
    assert lambda_prime(0) == 0.0
    assert von_mangoldt(8) == pytest.approx(math.log(2))
    assert von_mangoldt(-5) == pytest.approx(math.log(5))
    assert von_mangoldt(6) == 0.0


def test_lambda_arrays_match_pointwise():
    xs = range(-300, 301)
    assert np.allclose(lambda_prime_array(-300, 300), [lambda_prime(x) for x in xs])
    assert np.allclose(von_mangoldt_array(-300, 300), [von_mangoldt(x) for x in xs])


def test_tau_mu_examples():
    assert tau_mu(12) == (6, 0)
    assert tau_mu(30) == (8, -1)
    assert tau_mu(1) == (1, 1)
    with pytest.raises(DomainError):
        tau_mu(0)


def test_tau_mu_arrays_agree_with_sympy():
    tau = divisor_count_array(500)
    mu = mobius_array(500)
    for x in range(1, 501):
        assert tau[x] == sympy.divisor_count(x)
        assert mu[x] == sympy.mobius(x)
        assert tau_mu(x) == (tau[x], mu[x])


def test_divisor_moment():
    s, ratio = divisor_moment_report(16, 1)
    assert s == 100
    s2, r2 = divisor_moment_report(1000, 2)
    assert r2 > 0 and math.isfinite(r2)
    _, r4 = divisor_moment_report(2000, 2)
    assert 0.5 <= r4 / r2 <= 2.0
