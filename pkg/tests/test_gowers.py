import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pnq.errors import CapacityError, DomainError
from pnq.gowers import (
    ArithFunction,
    GraphSystem,
    SymmetricMeasure,
    concat_experiment,
    concatenation_schedule,
    conv_power,
    convolve,
    convolve_direct,
    difference,
    difference_pair,
    gp_evaluate,
    gp_inner_product,
    gp_monotonicity_check,
    gp_norm_power,
    graph_duplicate,
    graph_measures,
    l2_norm_sq,
    lemma52_chain,
    lemma54_experiment,
    schedule_graph,
    uk_norm_normalized,
    uk_norm_power,
    uniform_multiset,
)
from pnq.oracles import u2_literal, u3_literal, uk_nested


def gp_literal(f: ArithFunction, N: int, mus) -> complex:
    """Definition of the Gowers-Peluse norm power, summed term by term."""
    atoms = [m.atoms() for m in mus]
    k = len(mus)
    reach = max(int(math.ceil(m.max_abs_offset())) for m in mus)
    total = 0j

    def at(q: Fraction) -> complex:
        return f(int(q)) if q.denominator == 1 else 0j

    for x in range(f.lo - 2 * reach - 1, f.hi + 2 * reach + 1):
        for hs in itertools.product(*atoms):
            for hps in itertools.product(*atoms):
                w = math.prod(a[1] for a in hs) * math.prod(a[1] for a in hps)
                term = 1 + 0j
                for om in itertools.product((0, 1), repeat=k):
                    pt = x + sum(hp[0] if o else h[0] for o, h, hp in zip(om, hs, hps))
                    v = at(Fraction(pt))
                    term *= np.conj(v) if sum(om) % 2 else v
                total += w * term
    return total / N


def small_functions(max_len=10):
    return st.lists(
        st.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False), min_size=1, max_size=max_len
    ).map(lambda vs: ArithFunction(-len(vs) // 2, np.array(vs)))


def small_measures(reach=4, halves=True):
    dens = [1, 2] if halves else [1]

    @st.composite
    def build(draw):
        den = draw(st.sampled_from(dens))
        pos = draw(st.lists(st.integers(min_value=0, max_value=reach * den), min_size=1, max_size=3))
        S = []
        for p in pos:
            S += [Fraction(p, den), Fraction(-p, den)]
        return uniform_multiset(S)

    return build()


def test_difference_basics():
    f = ArithFunction(0, np.array([1, 2j, -1, 0.5]))
    assert np.allclose(difference(f, 0).values, np.abs(f.values) ** 2)
    assert not difference(f, Fraction(1, 2)).values.any()
    g = difference_pair(f, 1, 3)
    assert g(0) == pytest.approx(f(1) * np.conj(f(3)))


def test_uk_examples():
    atom = ArithFunction(5, np.array([1.0]))
    for k in (2, 3, 4):
        assert uk_norm_power(atom, k) == pytest.approx(1.0)
    assert uk_norm_power(ArithFunction.indicator(1, 4), 2) == pytest.approx(44.0)
    for N in (1, 7, 40):
        assert uk_norm_normalized(ArithFunction.interval(N), 2, N) == pytest.approx(1.0, abs=1e-12)
        assert uk_norm_normalized(ArithFunction.interval(N), 3, N) == pytest.approx(1.0, abs=1e-12)


@given(small_functions(14))
def test_u2_u3_against_literal_sums(f):
    v = f.values
    assert uk_norm_power(f, 2) == pytest.approx(u2_literal(v).real, rel=1e-9, abs=1e-9)
    assert uk_norm_power(f, 3) == pytest.approx(u3_literal(v).real, rel=1e-9, abs=1e-9)
    assert uk_norm_power(f, 3) == pytest.approx(uk_nested(v, 3), rel=1e-9, abs=1e-9)


@given(st.integers(min_value=1, max_value=60), st.integers(min_value=0, max_value=2**31))
def test_normalized_norm_bounded(N, seed):
    rng = np.random.default_rng(seed)
    f = ArithFunction(1, np.exp(2j * np.pi * rng.random(N)) * (rng.random(N) < 0.8))
    assert uk_norm_normalized(f, 2, N) <= 1 + 1e-9


def test_uk_guard():
    with pytest.raises(CapacityError):
        uk_norm_power(ArithFunction(0, np.ones(1 << 15)), 3)


def test_measure_algebra():
    u = uniform_multiset([-1, 1])
    c = convolve(u, u)
    assert dict(c.atoms()) == {-2: 0.25, 0: 0.5, 2: 0.25}
    assert l2_norm_sq(c) == pytest.approx(0.375)
    assert dict(conv_power(u, 2).atoms()) == dict(c.atoms())
    with pytest.raises(DomainError):
        uniform_multiset([])
    with pytest.raises(DomainError):
        SymmetricMeasure.from_atoms({1: 1.0})


@given(small_measures(), small_measures())
def test_fft_convolution_matches_direct(mu, nu):
    a, b = convolve(mu, nu), convolve_direct(mu, nu)
    assert a.den == b.den
    assert np.allclose(a.masses, b.masses, atol=1e-15)


def test_gp_with_point_masses():
    f = ArithFunction(-3, np.array([1, -1j, 0.5, 1, 0.3j, -0.7, 1]))
    N = 4
    assert gp_norm_power(f, N, [SymmetricMeasure.delta0()]) == pytest.approx(np.sum(np.abs(f.values) ** 2) / N)


@given(small_functions(7), st.lists(small_measures(3), min_size=1, max_size=2))
def test_gp_norm_against_definition(f, mus):
    N = 5
    got = gp_evaluate(f, N, mus)
    want = gp_literal(f, N, mus)
    assert abs(want.imag) <= 1e-9 * max(1.0, abs(want))
    assert got.pair_value == pytest.approx(want.real, rel=1e-9, abs=1e-9)
    assert got.pair_value >= 0


def test_gp_budget_and_sampling():
    rng = np.random.default_rng(0)
    f = ArithFunction(0, np.exp(2j * np.pi * rng.random(200)))
    mus = [SymmetricMeasure.uniform_interval(100)] * 3
    with pytest.raises(CapacityError):
        gp_evaluate(f, 200, mus, budget=1e4)
    with pytest.raises(DomainError):
        gp_evaluate(f, 200, mus, budget=1e4, sampling=True)
    e = gp_evaluate(f, 200, mus, budget=1e4, sampling=True, seed=1, samples=200)
    assert e.sampled and e.stderr is not None


def test_inner_product_cases():
    rng = np.random.default_rng(1)
    f = ArithFunction(-4, np.exp(2j * np.pi * rng.random(9)))
    mus = [uniform_multiset([-1, 1, 3, -3]), uniform_multiset([0, 2, -2])]
    inner, prod, ok = gp_inner_product([f] * 4, 6, mus)
    assert inner.real == pytest.approx(prod**1, rel=1e-9) and ok
    zero = ArithFunction.zero()
    inner, _, ok = gp_inner_product([f, f, zero, f], 6, mus)
    assert inner == 0 and ok


@given(
    st.lists(small_functions(6), min_size=4, max_size=4),
    st.lists(small_measures(3), min_size=2, max_size=2),
)
def test_gowers_cauchy_schwarz(fs, mus):
    assert gp_inner_product(fs, 6, mus)[2]


def test_monotonicity_cases():
    N = 6
    f = ArithFunction.indicator(-N, N)
    mus = [SymmetricMeasure.uniform_interval(N)] * 3
    for k in (1, 2, 3):
        lhs, rhs, ok = gp_monotonicity_check(f, N, mus, k)
        assert ok and lhs > 1.2 * rhs
    assert gp_monotonicity_check(ArithFunction.zero(), N, mus, 2)[2]
    with pytest.raises(DomainError):
        gp_monotonicity_check(f, N, [uniform_multiset([Fraction(1, 2), Fraction(-1, 2)])], 1)
    with pytest.raises(DomainError):
        gp_monotonicity_check(ArithFunction(0, np.array([2.0])), N, mus, 1)


@given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=2, max_value=3))
def test_monotonicity_random(seed, k):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(4, 12))
    f = ArithFunction(-N, rng.choice([-1.0, 1.0], size=2 * N + 1))
    mus = [uniform_multiset(sum(([h, -h] for h in rng.integers(0, N + 1, size=2).tolist()), [])) for _ in range(k)]
    assert gp_monotonicity_check(f, N, mus, k)[2]


def test_lemma52_cases():
    N = 15
    f = ArithFunction.indicator(-N, N)
    mu = SymmetricMeasure.uniform_interval(N)
    T = N * l2_norm_sq(mu)
    rep = lemma52_chain(f, N, mu, T)
    assert rep.passed and rep.u2_power > 1.2 * rep.bound
    rng = np.random.default_rng(4)
    signs = ArithFunction(-N, rng.choice([-1.0, 1.0], size=2 * N + 1))
    assert lemma52_chain(signs, N, mu, T).passed
    assert lemma52_chain(ArithFunction.zero(), N, mu, T).passed
    with pytest.raises(DomainError):
        lemma52_chain(f, N, mu, T / 2)


@given(st.integers(min_value=0, max_value=2**32))
def test_lemma52_random(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(6, 30))
    f = ArithFunction(-N, np.exp(2j * np.pi * rng.random(2 * N + 1)) * (rng.random(2 * N + 1) < 0.9))
    hs = rng.integers(0, N + 1, size=int(rng.integers(1, 4))).tolist()
    mu = uniform_multiset(sum(([h, -h] for h in hs), []))
    rep = lemma52_chain(f, N, mu, N * l2_norm_sq(mu))
    assert rep.passed
    assert rep.weighted_corr >= rep.delta * N - 1e-9 * max(1, rep.delta * N)


def test_lemma54_examples():
    N = 400
    ones = ArithFunction.indicator(-N, N)
    rep = lemma54_experiment(ones, N, 1, 1, 1, (-200, 200), (-200, 200), 0.5)
    assert rep["constraints_ok"] and rep["hypothesis_holds"]
    assert rep["hypothesis_value"] == 401**2
    rng = np.random.default_rng(2)
    signs = ArithFunction(-N, rng.choice([-1.0, 1.0], size=2 * N + 1))
    rep2 = lemma54_experiment(signs, N, 1, 1, 1, (-200, 200), (-200, 200), 0.5)
    assert not rep2["hypothesis_holds"]
    wave = ArithFunction(-N, np.cos(2 * np.pi * np.arange(-N, N + 1) / 7))
    assert lemma54_experiment(wave, N, 1, 1, 1, (0, 10), (0, 10), 0.5)["u2_normalized"] > 0.3


def test_graph_duplicate_example():
    G = graph_duplicate(GraphSystem.vertex_complete(1), 1, 1)
    assert G.t == 2 and G.V == (frozenset(),) and G.E == (frozenset({(1, 2)}),)
    with pytest.raises(DomainError):
        graph_duplicate(G, 1, 1)


@pytest.mark.parametrize("s", [1, 2, 3])
def test_schedule_ends_edge_complete(s):
    sched = concatenation_schedule(s)
    for t, (G, _) in enumerate(sched, start=1):
        assert G == schedule_graph(s, t)
    assert sched[-1][0] == GraphSystem.edge_complete(s, 2**s)


def test_concat_experiment():
    N = 6
    rng = np.random.default_rng(5)
    f = ArithFunction(-N, np.exp(2j * np.pi * rng.random(2 * N + 1)))
    d = SymmetricMeasure.delta0()
    rep = concat_experiment(f, N, [[d, d]])
    assert rep["graph_matches_direct"]
    fam = [[uniform_multiset([-1, 1])], [uniform_multiset([-2, 0, 2])]]
    rep = concat_experiment(f, N, fam)
    assert rep["graph_matches_direct"]
    direct = [gp_norm_power(f, N, [convolve(a[0], b[0])]) for a in fam for b in fam]
    assert rep["rhs_mean"] == pytest.approx(sum(direct) / 4)
    measures = graph_measures(graph_duplicate(GraphSystem.vertex_complete(1), 1, 1), fam, (0, 1))
    assert len(measures) == 1


def test_function_csv_roundtrip(tmp_path):
    f = ArithFunction(-2, np.array([1, 0, 2j, -1.5]))
    f.to_csv(tmp_path / "f.csv")
    g = ArithFunction.from_csv(tmp_path / "f.csv")
    assert np.allclose(g.trimmed().values, f.trimmed().values) and g.trimmed().lo == f.trimmed().lo
    mu = uniform_multiset([Fraction(1, 2), Fraction(-1, 2), 0])
    mu.to_csv(tmp_path / "m.csv")
    assert SymmetricMeasure.from_csv(tmp_path / "m.csv").atoms() == mu.atoms()
