"""The singular constant kappa_n, by a direct Euler product and by a regularized one.

The direct product over ``p <= P`` converges only conditionally. Dividing each
factor by the local factor of ``L(1, chi_delta)`` leaves ``g(p) = 1 + O(1/p^2)``,
so ``kappa_n = prod_p g(p) / L(1, chi_delta)`` converges absolutely and its
truncation error has an explicit bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .arith import MAX_SIEVE_LIMIT, cached_table, sieve_primes
from .errors import CapacityError, DomainError
from .quadfield import FieldInvariants, kronecker, l_one_chi

# |log g(p)| <= TAIL_C / p^2 for every p >= TAIL_P0 (checked by `regularization_check`).
TAIL_C = 3.5
TAIL_P0 = 100
# sum_{p > P} 1/p^2 <= ROSSER_C / (P log P), from pi(t) < 1.25506 t / log t.
ROSSER_C = 2.51012
MAX_REGULARIZED_P = 1_000_000_000
_CHUNK = 1 << 21


@dataclass(frozen=True)
class KappaResult:
    n: int
    value: float
    route: str
    prime_limit: int
    tail_bound: float
    partial_trace: tuple[tuple[int, float], ...] | None = None

    def as_dict(self) -> dict:
        d = {
            "n": self.n,
            "route": self.route,
            "P": self.prime_limit,
            "value": self.value,
            "tail_bound": self.tail_bound,
        }
        if self.partial_trace is not None:
            d["trace"] = [list(t) for t in self.partial_trace]
        return d


def _check_n(inv: FieldInvariants) -> None:
    if inv.n % 6 not in (0, 4):
        raise DomainError("kappa_n is only defined here for n = 0 or 4 mod 6")


def euler_factor(inv: FieldInvariants, p: int) -> Fraction:
    """The local factor: ``p(p-3)/(p-1)^2`` when ``p`` splits and ``p`` does not divide ``2n``, else ``p/(p-1)``."""
    if (2 * inv.n) % p and kronecker(-inv.n, p) == 1:
        return Fraction(p * (p - 3), (p - 1) ** 2)
    return Fraction(p, p - 1)


def regularized_factor(inv: FieldInvariants, p: int) -> Fraction:
    """``g(p) = f(p) / (1 - (delta|p)/p)``, exact."""
    return euler_factor(inv, p) / (1 - Fraction(kronecker(inv.delta, p), p))


def regularized_closed_form(inv: FieldInvariants, p: int) -> Fraction:
    """Closed forms of ``g(p)`` away from ``2n``; the literal quotient at ``p | 2n``."""
    if (2 * inv.n) % p == 0:
        return regularized_factor(inv, p)
    chi = kronecker(inv.delta, p)
    if chi == 1:
        return Fraction(p * p * (p - 3), (p - 1) ** 3)
    if chi == -1:
        return Fraction(p * p, p * p - 1)
    raise AssertionError("ramified primes divide 2n")


def _log_factors(inv: FieldInvariants, ps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``log f(p)`` and ``log g(p)`` for an array of primes."""
    pf = ps.astype(np.float64)
    chi = inv.chi_array(ps)
    exc = (2 * inv.n) % ps == 0
    split = (chi == 1) & ~exc
    inert = (chi == -1) & ~exc
    log_f = -np.log1p(-1.0 / pf)
    log_f[split] = np.log1p(-3.0 / pf[split]) - 2.0 * np.log1p(-1.0 / pf[split])
    log_g = log_f - np.log1p(-chi / pf)
    # Closed forms are better conditioned than the quotient for large p.
    log_g[split] = np.log1p(-3.0 / pf[split]) - 3.0 * np.log1p(-1.0 / pf[split])
    log_g[inert] = -np.log1p(-1.0 / (pf[inert] * pf[inert]))
    return log_f, log_g


def _prime_chunks(lo: int, hi: int, top: int | None = None):
    top = max(hi, 2) if top is None else top
    table = cached_table(top) if top <= 2 * 10**8 else sieve_primes(top)
    start = lo
    while start <= hi:
        stop = min(start + _CHUNK * 8, hi)
        ps = table.primes(start, stop)
        if ps.size:
            yield ps
        start = stop + 1


def _sum_log(inv: FieldInvariants, lo: int, hi: int, which: int, top: int | None = None) -> float:
    parts = [float(np.sum(_log_factors(inv, ps)[which])) for ps in _prime_chunks(lo, hi, top)]
    return math.fsum(parts)


def kappa_direct(inv: FieldInvariants, P: int, trace_points: int = 8) -> KappaResult:
    """Partial products of the conditionally convergent Euler product, log-averaged over ``[P/2, P]``.

    The average of ``log prod_{p <= t} f(p)`` against ``dt / t`` is taken exactly
    from the step function; ``tail_bound`` is the spread of partial products
    over the window.
    """
    _check_n(inv)
    P = int(P)
    if P < 100:
        raise DomainError("prime limit must be at least 100")
    half = P // 2
    base = _sum_log(inv, 2, half, 0, P)
    ps = np.concatenate(list(_prime_chunks(half + 1, P, P)) or [np.zeros(0, dtype=np.int64)])
    log_f, _ = _log_factors(inv, ps)
    levels = base + np.concatenate([[0.0], np.cumsum(log_f)])
    edges = np.concatenate([[P / 2], ps.astype(np.float64), [float(P)]])
    widths = np.log(edges[1:] / edges[:-1])
    avg = math.fsum((levels * widths).tolist()) / math.log(2.0)
    vals = np.exp(levels)
    trace_idx = np.unique(np.linspace(0, len(levels) - 1, trace_points).astype(int))
    trace = tuple((int(edges[i]) if i else half, float(vals[i])) for i in trace_idx)
    return KappaResult(inv.n, math.exp(avg), "direct", P, float(vals.max() - vals.min()), trace)


def regularized_tail_bound(value: float, P: int) -> float:
    eps = TAIL_C * ROSSER_C / (P * math.log(P))
    return value * math.expm1(eps)


def kappa_regularized(
    inv: FieldInvariants, P: int | None = None, tol: float = 1e-8, trace: bool = False
) -> KappaResult:
    """``prod_{p <= P} g(p) / L(1, chi_delta)`` with a proven truncation bound.

    With ``P`` omitted the limit is chosen as the smallest power-of-two
    multiple of ``10^6`` whose bound meets ``tol``.
    """
    _check_n(inv)
    L1 = l_one_chi(inv)
    if P is None:
        P = 1_000_000
        rough = math.exp(_sum_log(inv, 2, 1000, 1)) / L1
        while regularized_tail_bound(1.01 * rough, P) > tol:
            P *= 2
            if P > MAX_REGULARIZED_P:
                raise CapacityError(f"tolerance {tol} needs a prime limit above {MAX_REGULARIZED_P}")
    P = int(P)
    if P < TAIL_P0 or P > min(MAX_REGULARIZED_P, MAX_SIEVE_LIMIT):
        raise CapacityError(f"prime limit {P} outside [{TAIL_P0}, {MAX_REGULARIZED_P}]")
    pts = []
    total = 0.0
    lo = 2
    cuts = [P // 8, P // 4, P // 2, P] if trace else [P]
    for c in cuts:
        if c < lo:
            continue
        total += _sum_log(inv, lo, c, 1, P)
        lo = c + 1
        pts.append((c, math.exp(total) / L1))
    value = math.exp(total) / L1
    return KappaResult(
        inv.n,
        value,
        "regularized",
        P,
        regularized_tail_bound(value, P),
        tuple(pts) if trace else None,
    )


def regularization_check(inv: FieldInvariants, pmax: int = 100_000) -> dict:
    """Numerical side of the regularization: ``max p^2 |log g(p)|`` over ``TAIL_P0 <= p <= pmax``,
    and exact agreement of the closed forms with the quotient for ``p < 1000``."""
    ps = cached_table(max(pmax, 2)).primes(TAIL_P0, pmax)
    _, log_g = _log_factors(inv, ps)
    worst = float(np.max(np.abs(log_g) * ps.astype(np.float64) ** 2)) if ps.size else 0.0
    exact = all(
        regularized_closed_form(inv, int(p)) == regularized_factor(inv, int(p))
        for p in cached_table(1000).primes()
    )
    return {"max_scaled_log_g": worst, "tail_constant": TAIL_C, "closed_forms_exact": exact}
