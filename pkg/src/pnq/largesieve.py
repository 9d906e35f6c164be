"""Multi-dimensional large sieve inequalities and the sifted-set bound they imply."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .arith import is_prime_64, primes_up_to
from .errors import DomainError

SPACING_TOL = 1e-12
SIFT_GUARD = 1000

Point = tuple


def _phases(thetas: np.ndarray, N: int) -> np.ndarray:
    """``e(theta * m)`` for ``m = 1..N``; rows indexed by theta."""
    m = np.arange(1, N + 1, dtype=np.float64)
    return np.exp(2j * np.pi * np.outer(np.asarray(thetas, dtype=np.float64), m))


def trig_poly(a: np.ndarray, theta: Sequence[float] | float) -> complex:
    """``S(theta) = sum_{m in [N]^k} a_m e(theta . m)`` for ``a`` of shape ``(N,)*k``, ``k`` in ``{1, 2}``."""
    return complex(trig_poly_many(a, [theta])[0])


def trig_poly_many(a: np.ndarray, thetas: Sequence) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    k, N = a.ndim, a.shape[0]
    if k not in (1, 2) or any(s != N for s in a.shape):
        raise DomainError("coefficients must be an N or N x N array")
    th = np.array([[float(c) for c in np.atleast_1d(t)] for t in thetas], dtype=np.float64)
    if th.shape[1] != k:
        raise DomainError("point dimension does not match coefficients")
    e1 = _phases(th[:, 0], N)
    if k == 1:
        return e1 @ a
    e2 = _phases(th[:, 1], N)
    return np.einsum("rj,rj->r", e1 @ a, e2)


def _torus_gap(u, v) -> Fraction | float:
    d = u - v
    d = d - math.floor(d)
    return min(d, 1 - d)


def torus_distance(p: Point, q: Point) -> Fraction | float:
    """``l^infinity`` distance on ``(R/Z)^k``; exact when both points hold Fractions."""
    return max(_torus_gap(u, v) for u, v in zip(p, q))


def _as_points(points: Iterable) -> list[tuple]:
    return [tuple(np.atleast_1d(p).tolist()) if not isinstance(p, tuple) else p for p in points]


def check_spacing(points: Sequence[Point], delta) -> None:
    """Raise DomainError unless the points are pairwise ``delta``-separated."""
    pts = _as_points(points)
    exact = all(isinstance(c, (int, Fraction)) for p in pts for c in p) and isinstance(delta, (int, Fraction))
    for i in range(len(pts)):
        for j in range(i):
            d = torus_distance(pts[i], pts[j])
            if (d < delta) if exact else (float(d) < float(delta) - SPACING_TOL):
                raise DomainError(f"points {j} and {i} are {float(d):.3g} apart, below spacing {float(delta):.3g}")


def coefficient_norm_sq(a: np.ndarray) -> float:
    return float(np.sum(np.abs(a) ** 2))


def prop_c1_check(a: np.ndarray, points: Sequence[Point], delta) -> tuple[float, float, bool]:
    """``sum_j |S(theta_j)|^2 <= (N^(1/2) + delta^(-1/2))^(2k) ||a||^2`` for ``delta``-spaced points."""
    pts = _as_points(points)
    check_spacing(pts, delta)
    a = np.asarray(a, dtype=np.complex128)
    k, N = a.ndim, a.shape[0]
    vals = trig_poly_many(a, pts) if pts else np.zeros(0)
    lhs = math.fsum((np.abs(vals) ** 2).tolist())
    rhs = (math.sqrt(N) + 1 / math.sqrt(float(delta))) ** (2 * k) * coefficient_norm_sq(a)
    return lhs, rhs, lhs <= rhs


def farey_fractions(Q: int) -> list[Fraction]:
    """``a/q`` with ``1 <= q <= Q``, ``0 <= a < q``, ``gcd(a, q) = 1``."""
    return [Fraction(r, q) for q in range(1, Q + 1) for r in range(q) if math.gcd(r, q) == 1]


def farey_spacing(Q: int) -> Fraction:
    """Minimal torus gap between distinct Farey fractions of order ``Q`` (at least ``1/Q^2``)."""
    fr = sorted(farey_fractions(Q))
    if len(fr) < 2:
        return Fraction(1)
    gaps = [b - a for a, b in zip(fr, fr[1:])] + [1 - fr[-1]]
    return min(gaps)


def farey_check(a: np.ndarray, Q: int) -> tuple[float, float, bool]:
    """``sum over Farey points (a_i/q_i), q_i <= Q, of |S|^2 <= (2N)^k ||a||^2``; needs ``Q <= N^(1/2)``."""
    a = np.asarray(a, dtype=np.complex128)
    k, N = a.ndim, a.shape[0]
    if Q < 1 or Q * Q > N:
        raise DomainError("need 1 <= Q <= N^(1/2)")
    fr = np.array([float(f) for f in farey_fractions(Q)])
    F = _phases(fr, N)
    # The point set is a product, so the sum factors through matrix products.
    if k == 1:
        vals = F @ a
    else:
        vals = F @ a @ F.T
    lhs = math.fsum((np.abs(vals) ** 2).ravel().tolist())
    rhs = float((2 * N) ** k) * coefficient_norm_sq(a)
    return lhs, rhs, lhs <= rhs


def random_spaced_points(rng: np.random.Generator, count: int, delta: float, k: int, tries: int = 50) -> list[Point]:
    """Greedy rejection sampling of up to ``count`` points that are ``delta``-separated on the torus."""
    pts: list[np.ndarray] = []
    for _ in range(count * tries):
        if len(pts) >= count:
            break
        c = rng.random(k)
        if all(np.max(np.minimum(np.abs(c - p) % 1, 1 - np.abs(c - p) % 1)) >= delta for p in pts):
            pts.append(c)
    return [tuple(float(x) for x in p) for p in pts]


# ---------------------------------------------------------------- arithmetic sieve


def polynomial_zero_set(p: int, n: int, lines: Sequence[tuple[int, int]]) -> frozenset:
    """Residues ``(u, v)`` mod ``p`` with ``(u^2 + n v^2) prod (a u + b v) = 0`` mod ``p``."""
    u = np.arange(p)[:, None]
    v = np.arange(p)[None, :]
    val = (u * u + n * v * v) % p
    for a, b in lines:
        val = (val * ((a * u + b * v) % p)) % p
    us, vs = np.nonzero(val == 0)
    return frozenset(zip(us.tolist(), vs.tolist()))


@dataclass(frozen=True)
class SieveSystem:
    """Forbidden residue sets ``omega[p]`` in ``(Z/p)^k``; primes absent from ``omega`` sieve nothing."""

    k: int
    N: int
    omega: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.k not in (1, 2):
            raise DomainError("dimension must be 1 or 2")
        if self.N < 1:
            raise DomainError("N must be positive")
        for p, res in self.omega.items():
            if not is_prime_64(p):
                raise DomainError(f"{p} is not prime")
            for r in res:
                if len(r) != self.k or any(not 0 <= c < p for c in r):
                    raise DomainError(f"residue {r} is not in (Z/{p})^{self.k}")
            if len(res) >= p**self.k:
                raise DomainError(f"Omega_{p} is everything (density 1)")

    @property
    def W(self) -> int:
        return max((p for p, r in self.omega.items() if r), default=1)

    def alpha(self, p: int) -> Fraction:
        return Fraction(len(self.omega.get(p, ())), p**self.k)

    def h(self, q: int) -> Fraction:
        """The multiplicative function with ``h(p) = alpha_p / (1 - alpha_p)``, on squarefree ``q``."""
        out = Fraction(1)
        m = q
        for p in primes_up_to(max(q, 2)).tolist():
            if m % p == 0:
                m //= p
                if m % p == 0:
                    raise DomainError("h is used on squarefree q only")
                al = self.alpha(p)
                out *= al / (1 - al)
        return out

    @staticmethod
    def from_json(doc: dict) -> "SieveSystem":
        k, N = int(doc["k"]), int(doc["N"])
        omega = {}
        for entry in doc.get("omega", []):
            p = int(entry["p"])
            if "residues" in entry:
                omega[p] = frozenset(tuple(int(c) for c in np.atleast_1d(r)) for r in entry["residues"])
            elif "poly" in entry:
                poly = entry["poly"]
                omega[p] = polynomial_zero_set(p, int(poly["n"]), [tuple(l) for l in poly.get("lines", [])])
            else:
                raise DomainError("each omega entry needs residues or poly")
        return SieveSystem(k, N, omega)

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "N": self.N,
            "W": self.W,
            "omega": [{"p": p, "residues": sorted(list(r) for r in res)} for p, res in sorted(self.omega.items())],
        }


def h_table(sys: SieveSystem, limit: int) -> dict[int, Fraction]:
    """``h(q)`` for squarefree ``q <= limit`` built from primes with nonempty ``Omega_p``."""
    ps = sorted(p for p, r in sys.omega.items() if r)
    table = {1: Fraction(1)}

    def grow(i: int, q: int, val: Fraction) -> None:
        for j in range(i, len(ps)):
            p = ps[j]
            if q * p > limit:
                break
            al = sys.alpha(p)
            v = val * al / (1 - al)
            table[q * p] = v
            grow(j + 1, q * p, v)

    grow(0, 1, Fraction(1))
    return dict(sorted(table.items()))


def sieve_bound(sys: SieveSystem) -> tuple[Fraction, dict[int, Fraction]]:
    """``(2N)^k / sum_{q <= N^(1/2)} mu^2(q) h(q)`` and the ``h`` table used."""
    table = h_table(sys, math.isqrt(sys.N))
    total = sum(table.values(), Fraction(0))
    return Fraction((2 * sys.N) ** sys.k) / total, table


def sifted_count(sys: SieveSystem) -> int:
    """``#{|x_i| <= N : x mod p not in Omega_p for all p}`` by direct enumeration."""
    if sys.N > SIFT_GUARD:
        raise DomainError(f"exact sifting limited to N <= {SIFT_GUARD}")
    xs = np.arange(-sys.N, sys.N + 1, dtype=np.int64)
    if sys.k == 1:
        ok = np.ones(xs.shape, dtype=bool)
        for p, res in sys.omega.items():
            bad = np.zeros(p, dtype=bool)
            for (r,) in res:
                bad[r] = True
            ok &= ~bad[xs % p]
        return int(np.count_nonzero(ok))
    total = 0
    for x0 in range(0, xs.size, 256):
        rows = xs[x0 : x0 + 256]
        ok = np.ones((rows.size, xs.size), dtype=bool)
        for p, res in sys.omega.items():
            bad = np.zeros((p, p), dtype=bool)
            for r in res:
                bad[r] = True
            ok &= ~bad[(rows % p)[:, None], (xs % p)[None, :]]
        total += int(np.count_nonzero(ok))
    return total


def rankin_lower_bound_check(sys: SieveSystem) -> dict:
    """``sum_{q <= N^(1/2)} mu^2(q) h(q) >= (1/2) prod (1 - alpha_p)^(-1)`` under ``sum alpha_p log p < (log N)/4``."""
    table = h_table(sys, math.isqrt(sys.N))
    lhs = sum(table.values(), Fraction(0))
    prod = Fraction(1)
    for p in sys.omega:
        prod /= 1 - sys.alpha(p)
    rhs = prod / 2
    markov = math.fsum(float(sys.alpha(p)) * math.log(p) for p in sys.omega)
    condition = markov < math.log(sys.N) / 4
    holds = lhs >= rhs
    status = ("pass" if holds else "fail") if condition else "inconclusive"
    return {
        "lhs": float(lhs),
        "rhs": float(rhs),
        "markov_sum": markov,
        "markov_limit": math.log(sys.N) / 4,
        "condition": condition,
        "holds": holds,
        "status": status,
    }


def random_sieve_system(rng: np.random.Generator, n: int = 4, k: int = 2) -> SieveSystem:
    """``N`` uniform in ``[50, 500]``, ``W`` uniform in ``[3, 30]``; per prime ``p <= W`` either a polynomial zero set
    (for ``k = 2``, probability 1/2) or a random subset of size uniform in ``[1, floor(p^k / 2)]``."""
    N = int(rng.integers(50, 501))
    W = int(rng.integers(3, 31))
    omega = {}
    for p in primes_up_to(W).tolist():
        if k == 2 and rng.random() < 0.5:
            lines = [tuple(int(c) for c in rng.integers(0, p, 2)) for _ in range(2)]
            zs = polynomial_zero_set(p, n, lines)
            if len(zs) < p * p:
                omega[p] = zs
                continue
        size = int(rng.integers(1, max(1, (p**k) // 2) + 1))
        flat = rng.choice(p**k, size=size, replace=False)
        omega[p] = frozenset(tuple(int(c) for c in np.unravel_index(int(f), (p,) * k)) for f in flat)
    return SieveSystem(k, N, omega)
