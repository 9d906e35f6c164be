"""Product-form weights on ideals, the prime sums over ``x^2 + n y^2``, Type I/II evaluators and local densities."""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from .arith import cached_table, factorize, is_prime_64, primes_up_to, tau_mu, von_mangoldt_array
from .constants import kappa_regularized
from .cramer import CramerParams, lambda_cramer_array, lambda_sharp_array
from .errors import CapacityError, DomainError, StateError
from .gowers import ArithFunction
from .idealmach import FormalIdeal, PrincipalIndex, build_principal_index
from .quadfield import FieldInvariants, kronecker

HEADLINE_GUARD = 10**10
TABLE_PRIMALITY_LIMIT = 2 * 10**8
STRIPE = 1 << 12
SIGMA_GUARD = 10**6

WeightFn = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------- weights on Z


def _table_size(top: int) -> int:
    # Round up so that nearby requests share one cached sieve.
    return max(1 << 16, 1 << (int(top) - 1).bit_length())


def lambda_prime_weight(xs: np.ndarray) -> np.ndarray:
    a = np.abs(np.asarray(xs, dtype=np.int64))
    out = np.zeros(a.shape, dtype=np.float64)
    top = int(a.max()) if a.size else 0
    if top < 2:
        return out
    mask = cached_table(_table_size(top)).is_prime_array(a)
    out[mask] = np.log(a[mask].astype(np.float64))
    return out


def von_mangoldt_weight(xs: np.ndarray) -> np.ndarray:
    a = np.abs(np.asarray(xs, dtype=np.int64))
    top = int(a.max()) if a.size else 0
    if top < 2:
        return np.zeros(a.shape)
    table = von_mangoldt_array(0, top)
    return table[a]


def weight_by_name(name: str, X: float | None = None, source: ArithFunction | None = None) -> WeightFn:
    """``lambda_prime``, ``von_mangoldt``, ``cramer``, ``sharp``, ``one`` or ``csv`` (with ``source``)."""
    if name == "lambda_prime":
        return lambda_prime_weight
    if name == "von_mangoldt":
        return von_mangoldt_weight
    if name in ("cramer", "sharp"):
        if X is None:
            raise DomainError("the Cramer weights need the scale X")
        params = CramerParams.from_scale(X)
        fn = lambda_cramer_array if name == "cramer" else lambda_sharp_array
        return lambda xs: fn(np.asarray(xs, dtype=np.int64), params)
    if name == "one":
        return lambda xs: np.ones(np.shape(xs))
    if name == "csv":
        if source is None:
            raise DomainError("csv weight needs a function")
        return lambda xs: arith_function_weight(source, xs)
    raise DomainError(f"unknown weight {name!r}")


def arith_function_weight(f: ArithFunction, xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.int64)
    out = np.zeros(xs.shape, dtype=np.complex128)
    inside = (xs >= f.lo) & (xs < f.hi)
    out[inside] = f.values[xs[inside] - f.lo]
    return out


def difference_weight(a: WeightFn, b: WeightFn) -> WeightFn:
    return lambda xs: a(xs) - b(xs)


# ---------------------------------------------------------------- archimedean character


def chi_infinity(x: int, y: int, inv: FieldInvariants, ell: int) -> complex:
    """``((x + y sqrt(-n)) / |x + y sqrt(-n)|)^ell``."""
    if x == 0 and y == 0:
        raise DomainError("chi_infinity is undefined at the origin")
    if ell == 0:
        return 1 + 0j
    z = complex(x, y * math.sqrt(inv.n))
    return (z / abs(z)) ** ell


def chi_infinity_array(xs: np.ndarray, ys: np.ndarray, n: int, ell: int) -> np.ndarray:
    if ell == 0:
        return np.ones(np.broadcast(xs, ys).shape, dtype=np.complex128)
    ang = np.arctan2(ys * math.sqrt(n), xs.astype(np.float64))
    return np.exp(1j * ell * ang)


# ---------------------------------------------------------------- product-form weights


@dataclass(frozen=True, eq=False)
class ProductWeight:
    """``a -> sum over generators x + y sqrt(-n) of a of chi_infinity^ell * f(x) * f'(y)``; zero off principal ideals."""

    f: WeightFn
    f_prime: WeightFn
    ell: int
    inv: FieldInvariants
    one_bounded: bool = False

    def at(self, gens: list[tuple[int, int]]) -> complex:
        if not gens:
            return 0j
        xs = np.array([g[0] for g in gens], dtype=np.int64)
        ys = np.array([g[1] for g in gens], dtype=np.int64)
        vals = chi_infinity_array(xs, ys, self.inv.n, self.ell) * self.f(xs) * self.f_prime(ys)
        return complex(math.fsum(vals.real.tolist()), math.fsum(vals.imag.tolist()))

    def evaluate(self, a: FormalIdeal, index: PrincipalIndex) -> complex:
        return self.at(index.generators(a))

    def values(self, index: PrincipalIndex, X: int) -> dict:
        """Nonzero values on ideals of norm ``<= X`` keyed by ideal key."""
        out = {}
        for key, gens in index.entries.items():
            a = index.ideals[key]
            if a.norm > X:
                continue
            v = self.at(gens)
            if v != 0:
                out[key] = v
        return out

    def sup_norm(self, index: PrincipalIndex, X: int) -> float:
        return max((abs(v) for v in self.values(index, X).values()), default=0.0)


def support_index(w: ProductWeight, X: int) -> PrincipalIndex:
    """Principal index restricted to generators ``(x, y)`` with ``f(x) f'(y) != 0``."""
    xm = math.isqrt(int(X))
    grid = np.arange(-xm, xm + 1, dtype=np.int64)
    fx = (w.f(grid) != 0).tolist()
    fy = (w.f_prime(grid) != 0).tolist()
    return build_principal_index(w.inv, X, keep=lambda x, y: fx[x + xm] and fy[y + xm])


def _require_index(index: PrincipalIndex | None, inv: FieldInvariants, X: int) -> PrincipalIndex:
    if index is None:
        raise StateError("a principal index is required; build one first")
    if index.n != inv.n or index.X < X:
        raise StateError(f"principal index covers n={index.n}, X={index.X}; need n={inv.n}, X={X}")
    return index


def _divisors_in(a: FormalIdeal, lo: float, hi: float) -> Iterable[FormalIdeal]:
    for d in a.divisors():
        if lo <= d.norm < hi:
            yield d


def type_i_sum(w: ProductWeight, L: float, X: int, index: PrincipalIndex | None) -> dict:
    """``sum_{N d in [L, 2L)} |sum_{d | a, N a <= X} w(a)|`` with the trivial bound ``X ||w||_inf``."""
    index = _require_index(index, w.inv, X)
    vals = w.values(index, X)
    acc: dict = {}
    for key, v in vals.items():
        a = index.ideals[key]
        for d in _divisors_in(a, L, 2 * L):
            acc[d.key] = acc.get(d.key, 0j) + v
    value = math.fsum(abs(v) for v in acc.values())
    sup = max((abs(v) for v in vals.values()), default=0.0)
    trivial = X * sup
    return {
        "value": value,
        "trivial_bound": trivial,
        "savings": trivial / value if value else math.inf,
        "divisors": len(acc),
    }


def _unimodular(seed: int, key) -> complex:
    h = zlib.crc32(repr(key).encode(), seed & 0xFFFFFFFF)
    theta = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, h]).random()
    return complex(math.cos(2 * math.pi * theta), math.sin(2 * math.pi * theta))


def coefficient_source(kind: str, seed: int = 0) -> Callable[[FormalIdeal], complex]:
    """``random`` (seeded unimodular), ``mobius`` (Mobius of the norm) or ``constant``."""
    if kind == "constant":
        return lambda a: 1 + 0j
    if kind == "random":
        return lambda a: _unimodular(seed, a.key)
    if kind == "mobius":
        return lambda a: complex(tau_mu(a.norm)[1]) if a.norm > 1 else 1 + 0j
    raise DomainError(f"unknown coefficient source {kind!r}")


def type_ii_sum(
    w: ProductWeight,
    L: float,
    X: int,
    alpha: Callable[[FormalIdeal], complex],
    beta: Callable[[FormalIdeal], complex],
    index: PrincipalIndex | None,
) -> complex:
    """``sum_{N a in [L, 2L), N ab <= X} alpha_a beta_b w(ab)``."""
    index = _require_index(index, w.inv, X)
    vals = w.values(index, X)
    re, im = [], []
    for key in sorted(vals):
        v = vals[key]
        c = index.ideals[key]
        for a in _divisors_in(c, L, 2 * L):
            t = alpha(a) * beta(c / a) * v
            re.append(t.real)
            im.append(t.imag)
    return complex(math.fsum(re), math.fsum(im))


# ---------------------------------------------------------------- prime sums over x^2 + n y^2


def _prime_mask(values: np.ndarray, X: int) -> np.ndarray:
    if X <= TABLE_PRIMALITY_LIMIT:
        return cached_table(max(int(X), 2)).is_prime_array(values)
    return np.array([is_prime_64(int(v)) for v in values.tolist()], dtype=bool)


def _stripe_sum(
    x_lo: int, x_hi: int, n: int, X: int, ell: int, wx: WeightFn, wy: WeightFn
) -> tuple[float, float]:
    """Contribution of ``x_lo <= x < x_hi`` over the half plane ``y > 0`` or ``(y = 0, x > 0)``,
    each point paired with its negative."""
    xs = np.arange(x_lo, x_hi, dtype=np.int64)
    fx, fxn = wx(xs), wx(-xs)
    live = (fx != 0) | (fxn != 0)
    sign = -1.0 if ell % 2 else 1.0
    re: list[float] = []
    im: list[float] = []
    for i in np.flatnonzero(live).tolist():
        x = int(xs[i])
        ymax = math.isqrt((X - x * x) // n)
        ys = np.arange(0 if x > 0 else 1, ymax + 1, dtype=np.int64)
        if not ys.size:
            continue
        fy, fyn = wy(ys), wy(-ys)
        sel = (fy != 0) | (fyn != 0)
        ys, fy, fyn = ys[sel], fy[sel], fyn[sel]
        if not ys.size:
            continue
        pm = _prime_mask(x * x + n * ys * ys, X)
        if not pm.any():
            continue
        ys, fy, fyn = ys[pm], fy[pm], fyn[pm]
        t = chi_infinity_array(np.full(ys.shape, x), ys, n, ell) * (fx[i] * fy + sign * fxn[i] * fyn)
        re.extend(np.real(t).tolist())
        im.extend(np.imag(t).tolist())
    return math.fsum(re), math.fsum(im)


def headline_sum(
    inv: FieldInvariants,
    X: int,
    ell: int,
    wx: WeightFn | str = "lambda_prime",
    wy: WeightFn | str = "lambda_prime",
    threads: int = 1,
) -> complex:
    """``sum_{0 < x^2 + n y^2 <= X} chi_infinity^ell(x + y sqrt(-n)) wx(x) wy(y) 1[x^2 + n y^2 prime]``.

    Each lattice point is paired with its negative, with ``chi(-z) = (-1)^ell chi(z)``
    applied exactly, so odd ``ell`` cancels to zero for even weights. Stripes of
    ``x`` are fixed in size and combined in order, so the result does not depend
    on ``threads``.
    """
    X = int(X)
    if X > HEADLINE_GUARD:
        raise CapacityError(f"X above {HEADLINE_GUARD}")
    if X < 1:
        raise DomainError("X must be positive")
    if isinstance(wx, str):
        wx = weight_by_name(wx, X)
    if isinstance(wy, str):
        wy = weight_by_name(wy, X)
    xmax = math.isqrt(X)
    stripes = [(lo, min(lo + STRIPE, xmax + 1)) for lo in range(-xmax, xmax + 1, STRIPE)]
    if X <= TABLE_PRIMALITY_LIMIT:
        cached_table(max(X, 2))

    def run(s):
        return _stripe_sum(s[0], s[1], inv.n, X, ell, wx, wy)

    if threads > 1 and len(stripes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, stripes))
    else:
        parts = [run(s) for s in stripes]
    return complex(math.fsum(p[0] for p in parts), math.fsum(p[1] for p in parts))


def predicted_main_term(inv: FieldInvariants, X: float, kappa: float | None = None) -> float:
    """``pi kappa_n X / sqrt(n)``."""
    if kappa is None:
        kappa = kappa_regularized(inv, tol=1e-8).value
    return math.pi * kappa * X / math.sqrt(inv.n)


def headline_ratio(inv: FieldInvariants, X: int, value: complex, kappa: float | None = None) -> float:
    """``value * log X / (pi kappa_n X / sqrt(n))``."""
    return value.real * math.log(X) / predicted_main_term(inv, X, kappa)


def main_term_sum(inv: FieldInvariants, X: int, ell: int, threads: int = 1) -> complex:
    """``(log X) sum chi_infinity^ell sharp(x) sharp(y) 1[prime]`` with the sharp Cramer weights at scale ``X``."""
    return math.log(X) * headline_sum(inv, X, ell, "sharp", "sharp", threads)


def main_term_ratio(inv: FieldInvariants, X: int, value: complex, kappa: float | None = None) -> float:
    return complex(value).real / predicted_main_term(inv, X, kappa)


# ---------------------------------------------------------------- local density sigma(S1, S2)


def _prod(ps: Iterable[int]) -> int:
    return math.prod(ps)


@dataclass(frozen=True)
class SigmaInstance:
    inv: FieldInvariants
    S1: frozenset
    S2: frozenset

    def __post_init__(self):
        if self.inv.n % 2:
            raise DomainError("local densities are set up for even n")
        for p in self.S1 | self.S2:
            if not is_prime_64(p):
                raise DomainError(f"{p} is not prime")

    @property
    def T(self) -> frozenset:
        return frozenset(factorize(self.inv.n))

    @property
    def P1(self) -> int:
        return _prod(self.S1)

    @property
    def P2(self) -> int:
        return _prod(self.S2)

    @property
    def D(self) -> int:
        return 2 * self.inv.n * self.P1 * self.P2

    def primes_of_modulus(self) -> list[int]:
        return sorted(factorize(self.D))


def nu(inv: FieldInvariants, p: int) -> Fraction:
    return Fraction(1, p - kronecker(inv.delta, p))


def sigma_formula(inst: SigmaInstance) -> Fraction:
    """``omega |O*| P_{T \\ S2} / (r h) * prod_{p in T, S1, S2} nu(p)``; zero when ``S1`` meets ``S2`` or ``T``."""
    inv = inst.inv
    if inst.S1 & inst.S2 or inst.S1 & inst.T:
        return Fraction(0)
    val = inv.omega * inv.unit_count * _prod(inst.T - inst.S2) / Fraction(inv.r * inv.class_number)
    for p in sorted(inst.T | inst.S1 | inst.S2):
        val *= nu(inv, p)
    return val


def unit_group_order_formula(inst: SigmaInstance) -> int:
    """``N m prod_{p | m} (1 - 1/p)(1 - (delta|p)/p)`` with ``N m = D^2``."""
    val = Fraction(inst.D**2)
    for p in inst.primes_of_modulus():
        val *= (1 - Fraction(1, p)) * (1 - Fraction(kronecker(inst.inv.delta, p), p))
    return int(val)


def _tau_norm_form(inv: FieldInvariants) -> tuple[int, int, int]:
    """Norm of ``a + b tau`` as ``A a^2 + B a b + C b^2``."""
    if inv.omega == 1:
        return 1, 0, inv.n_star
    return 1, 1, (1 + inv.n_star) // 4


def unit_group_order_bruteforce(inst: SigmaInstance) -> int:
    """``|(O_K / (D))^*|`` by counting residues ``a + b tau`` mod ``p`` with ``p`` not dividing the norm,
    for each ``p^e || D``, times ``p^{2(e-1)}``."""
    A, B, C = _tau_norm_form(inst.inv)
    total = 1
    D = inst.D
    for p in inst.primes_of_modulus():
        e = 0
        m = D
        while m % p == 0:
            m //= p
            e += 1
        a = np.arange(p)[:, None]
        b = np.arange(p)[None, :]
        good = int(np.count_nonzero((A * a * a + B * a * b + C * b * b) % p))
        total *= good * p ** (2 * (e - 1))
    return total


def coprime_count_bruteforce(inst: SigmaInstance) -> int:
    """Elements ``a P1 + b r P2 sqrt(-n*)`` with ``0 <= a < 2 n P2``, ``0 <= b < 2 omega n P1 / r`` whose norm is prime to ``D``.

    A prime ideal divides both ``gamma`` and ``(D)`` exactly when its rational prime
    divides ``gcd(N gamma, D)``, so this counts the residues coprime to ``(D)``.
    """
    inv = inst.inv
    P1, P2 = inst.P1, inst.P2
    a_len = 2 * inv.n * P2
    b_len_f = 2 * inv.omega * inv.n * P1 / Fraction(inv.r)
    if b_len_f.denominator != 1:
        raise DomainError("residue box is not integral")
    b_len = int(b_len_f)
    if a_len * b_len > 50 * SIGMA_GUARD * max(1, inv.n):
        raise CapacityError("residue box too large")
    ps = inst.primes_of_modulus()
    count = 0
    bs = np.arange(b_len, dtype=np.int64)
    # N(gamma) = a^2 P1^2 + n b^2 P2^2.
    for a0 in range(0, a_len, 256):
        a = np.arange(a0, min(a0 + 256, a_len), dtype=np.int64)[:, None]
        ok = np.ones((a.shape[0], b_len), dtype=bool)
        for p in ps:
            ok &= ((a % p) ** 2 * (P1 % p) ** 2 + inv.n * (bs[None, :] % p) ** 2 * (P2 % p) ** 2) % p != 0
        count += int(np.count_nonzero(ok))
    return count


def coprime_count_closed_form(inst: SigmaInstance) -> Fraction:
    """``omega N m / (r P1 P2) * prod_{p | m} (1 - 1/p)``, valid when ``S1`` avoids ``S2`` and ``T``."""
    inv = inst.inv
    val = inv.omega * Fraction(inst.D**2, inv.r * inst.P1 * inst.P2)
    for p in inst.primes_of_modulus():
        val *= 1 - Fraction(1, p)
    return val


def sigma_bruteforce(inst: SigmaInstance) -> tuple[int, int, Fraction]:
    """(coprime residue count, ``|(O_K/m)^*|``, ``sigma = |O*| count / (h |(O_K/m)^*|)``)."""
    if inst.D > SIGMA_GUARD:
        raise CapacityError(f"D = {inst.D} exceeds {SIGMA_GUARD}")
    count = coprime_count_bruteforce(inst)
    units = unit_group_order_bruteforce(inst)
    sigma = Fraction(inst.inv.unit_count * count, inst.inv.class_number * units)
    return count, units, sigma
