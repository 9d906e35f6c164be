"""The twelve acceptance criteria as callable checks with measured values."""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .arith import divisor_count_array, lambda_prime_array
from .constants import kappa_direct, kappa_regularized
from .cramer import CramerParams, lambda_cramer_array
from .errors import DomainError
from .gowers import (
    ArithFunction,
    SymmetricMeasure,
    gp_inner_product,
    gp_monotonicity_check,
    l2_norm_sq,
    lemma52_chain,
    uk_norm_normalized,
    uk_norm_power,
)
from .idealmach import IdealTable, buchstab_check, psi_prime_sum
from .largesieve import (
    SieveSystem,
    farey_check,
    prop_c1_check,
    random_sieve_system,
    random_spaced_points,
    rankin_lower_bound_check,
    sieve_bound,
    sifted_count,
)
from .oracles import u2_literal, uk_nested
from .quadfield import field_invariants, ideal_count, l_one_chi, rep_count_array
from .typesums import (
    SigmaInstance,
    coprime_count_bruteforce,
    coprime_count_closed_form,
    headline_ratio,
    headline_sum,
    main_term_ratio,
    main_term_sum,
    sigma_bruteforce,
    sigma_formula,
    unit_group_order_formula,
)

KAPPA_NS = (4, 6, 10, 12, 16, 22)
DEFAULT_SEED = 20240601


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    runtime_s: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number:2d}: {self.title} ({self.runtime_s:.1f}s)"

    def as_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed, "measured": self.measured}


@lru_cache(maxsize=None)
def kappa_value(n: int) -> float:
    return kappa_regularized(field_invariants(n), tol=1e-8).value


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


# ---------------------------------------------------------------- 1


def criterion_kappa(ns=KAPPA_NS, threads: int = 1, seed: int = DEFAULT_SEED) -> CriterionResult:
    rows = []
    ok = True
    for n in ns:
        inv = field_invariants(n)
        t0 = time.perf_counter()
        d = kappa_direct(inv, 10**7).value
        r = kappa_value(n)
        a = kappa_regularized(inv, 10**7).value
        b = kappa_regularized(inv, 2 * 10**7).value
        secs = time.perf_counter() - t0
        row = {"n": n, "direct": d, "regularized": r, "route_diff": abs(d - r), "cauchy_increment": abs(a - b)}
        row["pass"] = row["route_diff"] <= 1e-3 and row["cauchy_increment"] <= 1e-8 and secs <= 120
        ok &= row["pass"]
        rows.append(row)
    return CriterionResult(1, "kappa dual route and tail increments", ok, {"rows": rows})


# ---------------------------------------------------------------- 2


def criterion_class_number(threads: int = 1, seed: int = DEFAULT_SEED) -> CriterionResult:
    val = l_one_chi(field_invariants(4))
    err = abs(val - math.pi / 4)
    return CriterionResult(2, "class number formula gives L(1, chi_-4) = pi/4", err <= 1e-12, {"value": val, "error": err})


# ---------------------------------------------------------------- 3


def criterion_buchstab(threads: int = 1, seed: int = DEFAULT_SEED, count: int = 50) -> CriterionResult:
    inv = field_invariants(4)
    table = IdealTable(inv, 10**4)
    rng = np.random.default_rng([seed, 3])
    worst = [0.0, 0.0]
    ok = True
    for _ in range(count):
        w = rng.normal(size=len(table)) + 1j * rng.normal(size=len(table))
        rep = buchstab_check(inv, 10**4, 20, 50, w, table)
        worst = [max(worst[0], rep.two_buchs_residual), max(worst[1], rep.sieved_sum_residual)]
        ok &= rep.passed
    return CriterionResult(
        3,
        "Buchstab and sieved-sum identities",
        ok,
        {"weights": count, "max_two_step_residual": worst[0], "max_sieved_sum_residual": worst[1]},
    )


# ---------------------------------------------------------------- 4


def sigma_instances(ns=(4, 6, 10, 12), primes=(2, 3, 5, 7)):
    subsets = [frozenset(c) for r in range(len(primes) + 1) for c in itertools.combinations(primes, r)]
    for n in ns:
        inv = field_invariants(n)
        for S1 in subsets:
            for S2 in subsets:
                inst = SigmaInstance(inv, S1, S2)
                if inst.D <= 10**6:
                    yield inst


def criterion_sigma(threads: int = 1, seed: int = DEFAULT_SEED) -> CriterionResult:
    checked = mismatches = count_mismatch = units_mismatch = 0
    worked = None
    for inst in sigma_instances():
        count, units, brute = sigma_bruteforce(inst)
        checked += 1
        if brute != sigma_formula(inst):
            mismatches += 1
        if units != unit_group_order_formula(inst):
            units_mismatch += 1
        if not (inst.S1 & inst.S2 or inst.S1 & inst.T) and count != coprime_count_closed_form(inst):
            count_mismatch += 1
        if inst.inv.n == 4 and not inst.S1 and not inst.S2:
            worked = {"sigma": str(brute), "count": count, "units": units}
    ok = (
        mismatches == 0
        and count_mismatch == 0
        and units_mismatch == 0
        and worked == {"sigma": "2", "count": 16, "units": 32}
    )
    return CriterionResult(
        4,
        "local density formula equals brute force",
        ok,
        {
            "instances": checked,
            "sigma_mismatches": mismatches,
            "count_mismatches": count_mismatch,
            "unit_group_mismatches": units_mismatch,
            "worked_case": worked,
        },
    )


# ---------------------------------------------------------------- 5


def criterion_gowers(threads: int = 1, seed: int = DEFAULT_SEED, count: int = 200) -> CriterionResult:
    rng = np.random.default_rng([seed, 5])
    worst2 = worst3 = 0.0
    for _ in range(count):
        L = int(rng.integers(1, 129))
        v = rng.normal(size=L) + 1j * rng.normal(size=L)
        f = ArithFunction(int(rng.integers(-200, 200)), v)
        worst2 = max(worst2, _rel(uk_norm_power(f, 2, threads), u2_literal(v).real))
        worst3 = max(worst3, _rel(uk_norm_power(f, 3, threads), uk_nested(v, 3)))
    ind = uk_norm_power(ArithFunction.interval(4), 2)
    ok = worst2 <= 1e-9 and worst3 <= 1e-9 and abs(ind - 44) <= 1e-9 and abs(u2_literal(np.ones(4)) - 44) <= 1e-9
    return CriterionResult(
        5,
        "fast U^2/U^3 equal direct sums",
        ok,
        {"functions": count, "max_rel_u2": worst2, "max_rel_u3": worst3, "indicator_4_u2": ind},
    )


# ---------------------------------------------------------------- 6


def random_measure(rng: np.random.Generator, reach: int) -> SymmetricMeasure:
    """Uniform on a random symmetric multiset, offsets in ``(1/2) Z`` or ``Z`` with ``|h| <= reach``."""
    den = int(rng.choice([1, 2]))
    size = int(rng.integers(1, 4))
    pos = rng.integers(0, reach * den + 1, size=size)
    S = []
    for p in pos.tolist():
        S.extend([p / den, -p / den])
    return SymmetricMeasure.from_atoms({h: S.count(h) / len(S) for h in set(S)}, den if den > 1 else None)


def random_bounded_function(rng: np.random.Generator, N: int) -> ArithFunction:
    kind = int(rng.integers(0, 3))
    size = 2 * N + 1
    if kind == 0:
        vals = np.exp(2j * np.pi * rng.random(size))
    elif kind == 1:
        vals = rng.choice([-1.0, 1.0], size=size)
    else:
        vals = (rng.random(size) < rng.random()).astype(float)
    vals = vals * (rng.random(size) < 0.9)
    return ArithFunction(-N, vals)


def _suite_gcs(rng, count):
    worst, bad = 0.0, 0
    for _ in range(count):
        k = int(rng.integers(1, 4))
        N = int(rng.integers(6, 20))
        mus = [random_measure(rng, N // 2) for _ in range(k)]
        fs = [ArithFunction(-N, rng.normal(size=2 * N + 1) + 1j * rng.normal(size=2 * N + 1)) for _ in range(2**k)]
        inner, prod, ok = gp_inner_product(fs, N, mus)
        bad += not ok
        worst = max(worst, abs(inner) / prod if prod else 0.0)
    return {"instances": count, "violations": bad, "max_ratio": worst}


def _suite_monotone(rng, count):
    bad, margin = 0, math.inf
    for _ in range(count):
        k = int(rng.integers(1, 4))
        N = int(rng.integers(6, 24))
        f = random_bounded_function(rng, N)
        mus = [random_measure(rng, N) for _ in range(k)]
        while not mus[-1].is_integral():
            mus[-1] = random_measure(rng, N)
        lhs, rhs, ok = gp_monotonicity_check(f, N, mus, k)
        bad += not ok
        if rhs > 0:
            margin = min(margin, lhs / rhs)
    return {"instances": count, "violations": bad, "min_ratio": margin if math.isfinite(margin) else None}


def _suite_lemma52(rng, count):
    bad = 0
    for _ in range(count):
        N = int(rng.integers(8, 40))
        f = random_bounded_function(rng, N)
        mu = random_measure(rng, N)
        while not mu.is_integral():
            mu = random_measure(rng, N)
        T = N * l2_norm_sq(mu) * float(rng.uniform(1.0, 3.0))
        bad += not lemma52_chain(f, N, mu, T).passed
    return {"instances": count, "violations": bad}


def _suite_prop_c1(rng, count):
    bad, worst = 0, 0.0
    for i in range(count):
        k = 1 + i % 2
        N = int(rng.integers(2, 40 if k == 1 else 16))
        delta = float(rng.uniform(0.02, 0.3))
        pts = random_spaced_points(rng, int(rng.integers(1, 80)), delta, k)
        a = rng.normal(size=(N,) * k) + 1j * rng.normal(size=(N,) * k)
        lhs, rhs, ok = prop_c1_check(a, pts, delta)
        bad += not ok
        worst = max(worst, lhs / rhs)
    return {"instances": count, "violations": bad, "max_ratio": worst}


def _suite_farey(rng, count):
    bad, worst = 0, 0.0
    for i in range(count):
        k = 1 + i % 2
        N = int(rng.integers(4, 400 if k == 1 else 100))
        Q = int(rng.integers(1, math.isqrt(N) + 1))
        a = rng.normal(size=(N,) * k) + 1j * rng.normal(size=(N,) * k)
        lhs, rhs, ok = farey_check(a, Q)
        bad += not ok
        worst = max(worst, lhs / rhs)
    return {"instances": count, "violations": bad, "max_ratio": worst}


def _suite_sieve(rng, count):
    bad, worst, cases = 0, math.inf, []
    for _ in range(count):
        sys = random_sieve_system(rng)
        bound, _ = sieve_bound(sys)
        c = sifted_count(sys)
        if bound < c:
            bad += 1
            cases.append({"N": sys.N, "W": sys.W, "bound": float(bound), "count": c})
        worst = min(worst, float(bound) / c if c else math.inf)
    return {"instances": count, "violations": bad, "min_bound_over_count": worst, "violating": cases[:5]}


def _suite_rankin(rng, count):
    bad = conclusive = drawn = 0
    while conclusive < count and drawn < 20 * count:
        drawn += 1
        N = int(10 ** rng.uniform(4, 8))
        W = int(rng.integers(3, 60))
        omega = {}
        for p in [q for q in range(2, W + 1) if all(q % r for r in range(2, q))]:
            size = int(rng.integers(0, p + 1))
            if size:
                flat = rng.choice(p * p, size=size, replace=False)
                omega[p] = frozenset((int(f) // p, int(f) % p) for f in flat)
        rep = rankin_lower_bound_check(SieveSystem(2, N, omega))
        if rep["status"] != "inconclusive":
            conclusive += 1
            bad += rep["status"] == "fail"
    return {"instances": conclusive, "drawn": drawn, "violations": bad}


def criterion_inequalities(threads: int = 1, seed: int = DEFAULT_SEED, count: int = 50) -> CriterionResult:
    suites: dict[str, Callable] = {
        "gowers_cauchy_schwarz": _suite_gcs,
        "monotonicity": _suite_monotone,
        "u2_chain": _suite_lemma52,
        "trig_large_sieve": _suite_prop_c1,
        "farey_large_sieve": _suite_farey,
        "sifted_count_bound": _suite_sieve,
        "rankin_lower_bound": _suite_rankin,
    }
    out = {}
    for i, (name, fn) in enumerate(suites.items()):
        out[name] = fn(np.random.default_rng([seed, 6, i]), count)
    ok = all(v["violations"] == 0 and v["instances"] >= count for v in out.values())
    return CriterionResult(6, "inequality suites", ok, out)


# ---------------------------------------------------------------- 7, 8


def criterion_headline(threads: int = 1, seed: int = DEFAULT_SEED, X_lo: int = 10**6, X_hi: int = 10**8) -> CriterionResult:
    inv = field_invariants(4)
    k = kappa_value(4)
    ratios = {}
    zeros = {}
    v_hi = None
    for X in (X_lo, X_hi):
        v = headline_sum(inv, X, 0, threads=threads)
        ratios[X] = headline_ratio(inv, X, v, k)
        if X == X_hi:
            v_hi = v
        for ell in (1, 3):
            z = headline_sum(inv, X, ell, threads=threads)
            zeros[f"{ell}@{X}"] = [z.real, z.imag]
    v2 = headline_sum(inv, X_hi, 2, threads=threads)
    band = 0.6 <= ratios[X_hi] <= 1.4
    trend = abs(ratios[X_hi] - 1) < abs(ratios[X_lo] - 1)
    exact_zero = all(z == [0.0, 0.0] for z in zeros.values())
    small2 = abs(v2) <= 0.3 * abs(v_hi.real)
    return CriterionResult(
        7,
        "headline ratio band, trend, odd and second frequencies",
        band and trend and exact_zero and small2,
        {
            "ratio_low": ratios[X_lo],
            "ratio_high": ratios[X_hi],
            "band": band,
            "trend": trend,
            "odd_values": zeros,
            "odd_exact_zero": exact_zero,
            "ell2_over_ell0": abs(v2) / abs(v_hi.real),
            "ell2_small": small2,
        },
    )


def criterion_main_term(threads: int = 1, seed: int = DEFAULT_SEED, X_lo: int = 10**6, X_hi: int = 10**8) -> CriterionResult:
    inv = field_invariants(4)
    k = kappa_value(4)
    ratios = {X: main_term_ratio(inv, X, main_term_sum(inv, X, 0, threads), k) for X in (X_lo, X_hi)}
    odd = main_term_sum(inv, X_lo, 1, threads)
    band = 0.6 <= ratios[X_hi] <= 1.4
    trend = abs(ratios[X_hi] - 1) < abs(ratios[X_lo] - 1)
    return CriterionResult(
        8,
        "main term ratio band and trend",
        band and trend and odd == 0,
        {"ratio_low": ratios[X_lo], "ratio_high": ratios[X_hi], "band": band, "trend": trend},
    )


# ---------------------------------------------------------------- 9


def cramer_gap_norm(N: int, threads: int = 1) -> float:
    """``||(Lambda' - Lambda_Cramer) 1_[N]||_{U^2[N]}`` with the Cramer level taken at scale ``N``."""
    xs = np.arange(1, N + 1, dtype=np.int64)
    v = lambda_prime_array(1, N) - lambda_cramer_array(xs, CramerParams.from_scale(N))
    return uk_norm_normalized(ArithFunction(1, v), 2, N, threads)


def criterion_cramer_trend(threads: int = 1, seed: int = DEFAULT_SEED) -> CriterionResult:
    small, large = cramer_gap_norm(2**12, threads), cramer_gap_norm(2**17, threads)
    return CriterionResult(9, "U^2 distance to the Cramer model decreases", large < small, {"N_4096": small, "N_131072": large})


# ---------------------------------------------------------------- 10


def criterion_prime_ideals(threads: int = 1, seed: int = DEFAULT_SEED, X: int = 10**7) -> CriterionResult:
    principal = psi_prime_sum(field_invariants(4), X, 0).real / X
    inv5 = field_invariants(5)
    twisted = abs(psi_prime_sum(inv5, X, 1)) / X
    ok = 0.9 <= principal <= 1.1 and twisted <= 0.2
    return CriterionResult(
        10, "prime ideal theorem desk check", ok, {"principal_over_X": principal, "nonprincipal_over_X": twisted}
    )


# ---------------------------------------------------------------- 11


def criterion_arith_lemmas(threads: int = 1, seed: int = DEFAULT_SEED, T: int = 10**6) -> CriterionResult:
    tau = divisor_count_array(T)
    worst = 0.0
    bad = 0
    for n in range(1, 31):
        r = rep_count_array(n, T)
        bad += int(np.count_nonzero(r[1:] > 6 * tau[1:]))
        worst = max(worst, float(np.max(r[1:] / tau[1:])))
    mism = 0
    for n in (4, 5, 6, 10, 12):
        inv = field_invariants(n)
        norms = IdealTable(inv, 10**4).norms
        cum = np.searchsorted(norms, np.arange(1, 10**4 + 1), side="right")
        for X in range(1, 10**4 + 1):
            mism += ideal_count(inv, X)[0] != int(cum[X - 1])
    return CriterionResult(
        11,
        "representation bound and ideal count routes",
        bad == 0 and mism == 0,
        {"rep_violations": bad, "max_rep_over_tau": worst, "ideal_count_mismatches": mism},
    )


# ---------------------------------------------------------------- 12


DETERMINISM_COMMANDS = [
    ["kappa", "--n", "4", "--method", "regularized", "--prime-limit", "1000000"],
    ["count", "--n", "4", "--X", "1000000", "--ell", "0"],
    ["count", "--n", "4", "--X", "1000000", "--ell", "2"],
    ["mainterm", "--n", "4", "--X", "100000", "--ell", "0"],
    ["gowers", "--k", "3", "--random", "96"],
    ["gpnorm", "--N", "16", "--random", "33", "--measure=-1:0.25,0:0.5,1:0.25", "--measure=-0.5:0.5,0.5:0.5"],
    ["buchstab", "--n", "4", "--X", "2000", "--u", "10", "--z", "20", "--trials", "3"],
    ["typesum", "--kind", "I", "--n", "4", "--X", "10000", "--L", "100"],
    ["typesum", "--kind", "II", "--n", "4", "--X", "10000", "--L", "30", "--alpha", "random", "--beta", "random"],
    ["sigma", "--n", "6", "--s1", "5", "--s2", "7"],
    ["largesieve", "--random", "--check", "all"],
    ["idealstats", "--n", "5", "--X", "100000"],
    ["cramer", "--X", "100000000"],
]

VOLATILE_FIELDS = ("runtime_ms", "threads")


def canonical(doc: dict) -> str:
    stable = {k: v for k, v in doc.items() if k not in VOLATILE_FIELDS}
    return json.dumps(stable, sort_keys=True, allow_nan=False)


def criterion_determinism(threads: int = 1, seed: int = DEFAULT_SEED, commands=None) -> CriterionResult:
    from .cli import run_command

    differing = []
    for argv in commands or DETERMINISM_COMMANDS:
        outs = {canonical(run_command(argv + ["--threads", str(t), "--seed", str(seed)])[1]) for t in (1, 4, 8)}
        if len(outs) != 1:
            differing.append(" ".join(argv))
    count = len(commands or DETERMINISM_COMMANDS)
    return CriterionResult(
        12, "reports identical across 1, 4, 8 threads", not differing, {"commands": count, "differing": differing}
    )


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: criterion_kappa,
    2: criterion_class_number,
    3: criterion_buchstab,
    4: criterion_sigma,
    5: criterion_gowers,
    6: criterion_inequalities,
    7: criterion_headline,
    8: criterion_main_term,
    9: criterion_cramer_trend,
    10: criterion_prime_ideals,
    11: criterion_arith_lemmas,
    12: criterion_determinism,
}


def run_criterion(number: int, threads: int = 1, seed: int = DEFAULT_SEED) -> CriterionResult:
    if number not in CRITERIA:
        raise DomainError(f"no criterion {number}")
    t0 = time.perf_counter()
    res = CRITERIA[number](threads=threads, seed=seed)
    res.runtime_s = time.perf_counter() - t0
    return res


def run_suite(numbers=None, threads: int = 1, seed: int = DEFAULT_SEED, echo: Callable[[str], None] | None = None):
    out = []
    for n in numbers or sorted(CRITERIA):
        res = run_criterion(n, threads, seed)
        if echo:
            echo(res.line())
        out.append(res)
    return out
