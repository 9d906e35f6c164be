import cmath
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pnq.errors import DomainError
from pnq.largesieve import (
    SieveSystem,
    check_spacing,
    farey_check,
    farey_fractions,
    farey_spacing,
    polynomial_zero_set,
    prop_c1_check,
    random_sieve_system,
    random_spaced_points,
    rankin_lower_bound_check,
    sieve_bound,
    sifted_count,
    torus_distance,
    trig_poly,
)


def trig_direct(a, theta):
    a = np.asarray(a)
    theta = np.atleast_1d(theta)
    total = 0j
    for idx in itertools.product(range(a.shape[0]), repeat=a.ndim):
        m = [i + 1 for i in idx]
        total += a[idx] * cmath.exp(2j * math.pi * sum(t * mi for t, mi in zip(theta, m)))
    return total


@given(st.integers(min_value=0, max_value=2**32), st.sampled_from([1, 2]))
def test_trig_poly_matches_direct(seed, k):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(1, 9))
    a = rng.normal(size=(N,) * k) + 1j * rng.normal(size=(N,) * k)
    th = tuple(rng.random(k).tolist())
    assert trig_poly(a, th) == pytest.approx(trig_direct(a, th), abs=1e-9)


def test_trig_poly_examples():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(5, 5))
    assert trig_poly(a, (0.0, 0.0)) == pytest.approx(a.sum())
    unit = np.zeros((5, 5))
    unit[2, 3] = 1
    for th in rng.random((10, 2)):
        assert abs(trig_poly(unit, tuple(th))) == pytest.approx(1.0)
    assert abs(trig_poly(np.ones(7), (0.5,))) <= 1 + 1e-12


def test_spacing():
    assert torus_distance((Fraction(1, 10),), (Fraction(9, 10),)) == Fraction(1, 5)
    check_spacing([(Fraction(0),), (Fraction(1, 2),)], Fraction(1, 2))
    with pytest.raises(DomainError):
        check_spacing([(0.1, 0.2), (0.15, 0.25)], 0.1)


def test_prop_c1_examples():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(6, 6))
    lhs, rhs, ok = prop_c1_check(a, [(0.3, 0.7)], 0.5)
    assert ok and lhs <= a.size * np.sum(a**2)
    pts = random_spaced_points(rng, 100, 0.05, 2)
    assert len(pts) > 50
    assert prop_c1_check(a, pts, 0.05)[2]
    assert prop_c1_check(np.zeros((6, 6)), pts, 0.05)[0] == 0


def test_farey():
    assert farey_fractions(3) == [0, Fraction(1, 2), Fraction(1, 3), Fraction(2, 3)]
    assert farey_spacing(5) >= Fraction(1, 25)
    rng = np.random.default_rng(2)
    a = rng.normal(size=(100, 100)) + 1j * rng.normal(size=(100, 100))
    assert farey_check(a, 10)[2]
    a1 = rng.normal(size=(9, 9))
    lhs, rhs, ok = farey_check(a1, 1)
    assert lhs == pytest.approx(abs(a1.sum()) ** 2) and ok
    spike = np.zeros((16, 16))
    spike[3, 5] = 1
    lhs, _, ok = farey_check(spike, 4)
    assert lhs == pytest.approx(len(farey_fractions(4)) ** 2) and ok
    with pytest.raises(DomainError):
        farey_check(a1, 4)


def test_farey_product_form_matches_point_loop():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(16, 16))
    fr = farey_fractions(4)
    brute = sum(abs(trig_poly(a, (float(x), float(y)))) ** 2 for x in fr for y in fr)
    assert farey_check(a, 4)[0] == pytest.approx(brute, rel=1e-10)


def test_polynomial_zero_set_counts():
    p, n = 7, 4
    zs = polynomial_zero_set(p, n, [(1, 2), (3, 1)])
    brute = {
        (u, v)
        for u in range(p)
        for v in range(p)
        if (u * u + n * v * v) * (u + 2 * v) * (3 * u + v) % p == 0
    }
    assert zs == frozenset(brute)


def test_h_and_bound_examples():
    empty = SieveSystem(2, 20, {})
    bound, table = sieve_bound(empty)
    assert table == {1: 1} and bound == 40**2
    assert sifted_count(empty) == 41**2
    half = SieveSystem(1, 50, {2: frozenset({(0,)})})
    assert half.h(2) == 1
    with pytest.raises(DomainError):
        SieveSystem(1, 10, {3: frozenset({(0,), (1,), (2,)})})


def test_sifted_count_matches_loop():
    sys = SieveSystem(2, 12, {3: frozenset({(0, 0), (1, 2)}), 5: polynomial_zero_set(5, 4, [])})
    brute = sum(
        1
        for x in range(-12, 13)
        for y in range(-12, 13)
        if all((x % p, y % p) not in res for p, res in sys.omega.items())
    )
    assert sifted_count(sys) == brute


@given(st.integers(min_value=0, max_value=2**32))
def test_sifted_count_under_sharp_product_bound(seed):
    sys = random_sieve_system(np.random.default_rng(seed))
    _, table = sieve_bound(sys)
    Q = math.isqrt(sys.N)
    # 1D sharp large sieve on each axis of the (2N+1)-point box, Farey order Q.
    sharp = Fraction((2 * sys.N + Q * Q) ** sys.k) / sum(table.values())
    assert sifted_count(sys) <= sharp


def test_rankin_examples():
    triv = rankin_lower_bound_check(SieveSystem(1, 10**6, {}))
    assert triv["status"] == "pass" and triv["lhs"] == 1 and triv["rhs"] == 0.5
    omega = {p: frozenset((r,) for r in range(4)) for p in (5, 7, 11)}
    rep = rankin_lower_bound_check(SieveSystem(1, 10**6, omega))
    assert rep["condition"] and rep["status"] == "pass"
    heavy = {p: frozenset((r,) for r in range(p - 1)) for p in (3, 5, 7, 11, 13)}
    assert rankin_lower_bound_check(SieveSystem(1, 100, heavy))["status"] == "inconclusive"


def test_json_roundtrip():
    doc = {"k": 2, "N": 30, "omega": [{"p": 3, "residues": [[0, 0], [1, 1]]}, {"p": 5, "poly": {"n": 4, "lines": [[1, 1]]}}]}
    sys = SieveSystem.from_json(doc)
    assert SieveSystem.from_json(sys.to_json()).omega == sys.omega
