import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from pnq.errors import DomainError
from pnq.quadfield import (
    Splitting,
    compose_forms,
    field_invariants,
    ideal_count,
    ideal_count_direct,
    kronecker,
    l_one_chi,
    prime_ideal_reciprocal_sum,
    principal_form,
    reduce_form,
    reduced_forms,
    rep_count,
    rep_count_array,
    splitting_type,
)


def test_invariants_examples():
    g = field_invariants(4)
    assert (g.n_star, g.r, g.omega, g.delta, g.unit_count, g.class_number) == (1, 2, 1, -4, 4, 1)
    e = field_invariants(12)
    assert (e.n_star, e.r, e.omega, e.delta, e.unit_count) == (3, 2, Fraction(1, 2), -3, 6)
    f = field_invariants(5)
    assert f.delta == -20 and f.class_number == 2
    assert sorted(tuple(x) for x in f.forms) == [(1, 0, 5), (2, 2, 3)]


def test_kronecker_examples():
    assert kronecker(-4, 5) == 1
    assert kronecker(-4, 2) == 0
    assert kronecker(-20, 3) == 1


@given(st.integers(min_value=1, max_value=300), st.integers(min_value=3, max_value=999).filter(lambda m: m % 2))
def test_kronecker_matches_jacobi_on_odd_moduli(n, m):
    assert kronecker(-4 * n, m) == sympy.jacobi_symbol(-4 * n, m)


def test_splitting_examples(gauss):
    assert splitting_type(gauss, 5) == Splitting.SPLIT
    assert splitting_type(gauss, 3) == Splitting.INERT
    assert splitting_type(gauss, 2) == Splitting.RAMIFIED
    with pytest.raises(DomainError):
        splitting_type(gauss, 9)


def test_class_number_formula():
    assert abs(l_one_chi(field_invariants(4)) - math.pi / 4) <= 1e-12
    assert l_one_chi(field_invariants(5)) == pytest.approx(math.pi / math.sqrt(5), rel=1e-14)


def test_class_numbers_against_form_count():
    for d in range(3, 201):
        for delta in (-d,):
            if delta % 4 not in (0, 1):
                continue
            forms = reduced_forms(delta)
            brute = sum(
                1
                for a in range(1, d + 1)
                for b in range(-a + 1, a + 1)
                if (b * b - delta) % (4 * a) == 0
                and (c := (b * b - delta) // (4 * a)) >= a
                and math.gcd(math.gcd(a, b), c) == 1
                and not (b < 0 and (a == c))
            )
            assert len(forms) == brute


def test_composition_is_a_group():
    for d in range(3, 201):
        delta = -d
        if delta % 4 not in (0, 1):
            continue
        forms = [tuple(f) for f in reduced_forms(delta)]
        e = tuple(principal_form(delta))
        for f in forms:
            assert tuple(compose_forms(f, e)) == f
            inv = tuple(reduce_form((f[0], -f[1], f[2])))
            assert tuple(compose_forms(f, inv)) == e
            for g in forms:
                assert tuple(compose_forms(f, g)) in forms


def test_rep_count():
    g = field_invariants(4)
    assert rep_count(g, 5) == 4
    assert rep_count(g, 3) == 0
    arr = rep_count_array(4, 2000)
    assert all(arr[t] == rep_count(g, t) for t in range(1, 2001))


def test_ideal_count_examples(gauss):
    assert ideal_count(gauss, 5)[0] == 5
    assert ideal_count(gauss, 1)[0] == 1


@given(st.sampled_from([3, 4, 5, 6, 7, 10, 12, 22]), st.integers(min_value=1, max_value=5000))
def test_ideal_count_routes_agree(n, X):
    inv = field_invariants(n)
    assert ideal_count(inv, X)[0] == ideal_count_direct(inv, X)


def test_prime_ideal_reciprocal_sum(gauss):
    assert prime_ideal_reciprocal_sum(gauss, 5) == pytest.approx(0.9)
    assert prime_ideal_reciprocal_sum(gauss, 2) == pytest.approx(0.5)


def test_chi_array_matches_scalar():
    inv = field_invariants(10)
    ms = np.arange(1, 400)
    assert inv.chi_array(ms).tolist() == [kronecker(inv.delta, int(m)) for m in ms]
