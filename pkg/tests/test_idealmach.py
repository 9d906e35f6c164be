import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pnq.errors import DomainError
from pnq.idealmach import (
    IdealTable,
    UpSet,
    buchstab_check,
    build_principal_index,
    conjugate_ideal,
    dfi_decomposition,
    enumerate_prime_ideals,
    factor_generator,
    lambda_K,
    load_principal_index,
    principal_index_cached,
    psi_prime_sum,
    save_principal_index,
    tags_above,
    weighted_sum_S,
)
from pnq.quadfield import Splitting, field_invariants, ideal_count


def test_prime_ideal_stream(gauss):
    tags = enumerate_prime_ideals(gauss, 10)
    assert [(t.p, t.norm, t.kind) for t in tags] == [
        (2, 2, Splitting.RAMIFIED),
        (5, 5, Splitting.SPLIT),
        (5, 5, Splitting.SPLIT),
        (3, 9, Splitting.INERT),
    ]
    assert enumerate_prime_ideals(gauss, 1) == []
    keys = [t.key for t in enumerate_prime_ideals(field_invariants(5), 500)]
    assert keys == sorted(keys) and len(set(keys)) == len(keys)


def test_norm_five_generators(gauss):
    idx = build_principal_index(gauss, 5)
    norm5 = [k for k in idx.entries if idx.ideals[k].norm == 5]
    assert len(norm5) == 2
    assert all(len(idx.ideals[k].factors) == 1 for k in norm5)
    gens = sorted(g for k in norm5 for g in idx.generators(k))
    assert gens == [(-1, -1), (-1, 1), (1, -1), (1, 1)]


@pytest.mark.parametrize("n", [4, 5, 6, 10, 12, 14])
def test_factorization_conserves_norm_and_is_principal(n):
    inv = field_invariants(n)
    for x in range(-30, 31):
        for y in range(-8, 9):
            if x == 0 and y == 0:
                continue
            a = factor_generator(inv, x, y)
            assert a.norm == x * x + n * y * y
            assert a.class_index(inv) == 0
            assert conjugate_ideal(inv, a) == factor_generator(inv, x, -y)


def test_lambda_K_examples(gauss):
    idx = build_principal_index(gauss, 10)
    ideals = list(idx.ideals.values())
    by_norm = {}
    for a in ideals:
        by_norm.setdefault(a.norm, []).append(a)
    assert lambda_K(by_norm[9][0]) == pytest.approx(math.log(9))
    assert lambda_K(by_norm[5][0]) == pytest.approx(math.log(5))
    assert all(lambda_K(a) == 0 for a in by_norm.get(10, []) if len(a.factors) == 2)


def test_table_counts_match_ideal_count():
    for n in (4, 5, 6, 10):
        inv = field_invariants(n)
        table = IdealTable(inv, 3000)
        for X in (1, 2, 17, 500, 3000):
            assert int(np.sum(table.norms <= X)) == ideal_count(inv, X)[0]


def test_weighted_sum_examples(gauss):
    table = IdealTable(gauss, 10)
    assert weighted_sum_S(table, None, UpSet.from_norm(3), lambda a: 1) == 4
    assert weighted_sum_S(table, None, UpSet.from_norm(11), lambda a: 1) == 1
    big = IdealTable(gauss, 2000)
    assert weighted_sum_S(big, None, UpSet.from_norm(0), lambda a: 1) == ideal_count(gauss, 2000)[0]


def test_buchstab_identities(gauss):
    table = IdealTable(gauss, 10**4)
    rng = np.random.default_rng(7)
    w = rng.normal(size=len(table)) + 1j * rng.normal(size=len(table))
    rep = buchstab_check(gauss, 10**4, 20, 50, w, table)
    assert rep.passed
    flat = buchstab_check(gauss, 10**4, 50, 50, w, table)
    assert flat.middle == 0 and flat.passed
    zero = buchstab_check(gauss, 10**4, 20, 50, np.zeros(len(table)), table)
    assert zero.lhs == 0 and zero.rhs == 0


def test_dfi_pipeline_on_zero_and_random_weights(gauss):
    X = 5000
    table = IdealTable(gauss, X)
    zero = dfi_decomposition(gauss, X, np.zeros(len(table)), table=table)
    assert zero.type_i_lhs == 0 and zero.large_p_term == 0
    rng = np.random.default_rng(3)
    w = np.exp(2j * np.pi * rng.random(len(table)))
    assert dfi_decomposition(gauss, X, w, table=table).passed


@pytest.mark.parametrize("n", [4, 5, 14])
def test_psi_sum_matches_table(n):
    inv = field_invariants(n)
    X = 4000
    table = IdealTable(inv, X)
    for chi, values in enumerate(inv.character_table):
        brute = sum(lambda_K(table.ideal(j)) * values[table.ideal(j).class_index(inv)] for j in range(1, len(table)))
        assert psi_prime_sum(inv, X, chi) == pytest.approx(brute, rel=1e-12, abs=1e-9)


def test_cache_roundtrip_and_corruption(tmp_path, gauss):
    path = tmp_path / "idx.bin"
    fresh = principal_index_cached(gauss, 400, path)
    assert path.exists()
    again = load_principal_index(gauss, 400, path)
    assert again is not None and again.entries == fresh.entries
    assert load_principal_index(gauss, 401, path) is None
    raw = bytearray(path.read_bytes())
    raw[-5] ^= 0xFF
    path.write_bytes(bytes(raw))
    assert load_principal_index(gauss, 400, path) is None
    rebuilt = principal_index_cached(gauss, 400, path)
    assert rebuilt.entries == fresh.entries
    assert load_principal_index(gauss, 400, path) is not None
    path.write_bytes(b"junk")
    assert principal_index_cached(gauss, 400, path).entries == fresh.entries


@given(st.sampled_from([4, 5, 6, 10]), st.integers(min_value=2, max_value=400))
def test_tags_above_cover_prime(n, p):
    from sympy import isprime

    if not isprime(p):
        return
    inv = field_invariants(n)
    tags = tags_above(inv, p)
    assert sum(t.norm for t in tags) in (p, 2 * p, p * p)
    assert math.prod(t.norm for t in tags) * (1 if tags[0].kind != Splitting.RAMIFIED else p) == p * p
