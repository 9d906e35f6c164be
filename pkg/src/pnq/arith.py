"""Rational-integer infrastructure: sieves, primality, classical arithmetic functions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CapacityError, DomainError

MAX_SIEVE_LIMIT = 1 << 40
DEFAULT_SEGMENT_BYTES = 256 * 1024

# First twelve primes: a deterministic witness set for every m < 3.3e24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def _small_sieve(limit: int) -> np.ndarray:
    """Plain Eratosthenes up to ``limit`` inclusive; returns the primes."""
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    flags[4::2] = False
    for p in range(3, math.isqrt(limit) + 1, 2):
        if flags[p]:
            flags[p * p :: 2 * p] = False
    return np.flatnonzero(flags).astype(np.int64)


@dataclass(frozen=True)
class PrimeTable:
    """Odd-only packed primality flags: bit ``i`` is set iff ``2i+1`` is a prime ``<= limit``."""

    limit: int
    bits: np.ndarray

    def is_prime(self, m: int) -> bool:
        m = int(m)
        if m < 2 or m > self.limit:
            if m > self.limit:
                raise DomainError(f"{m} exceeds table limit {self.limit}")
            return False
        if m == 2:
            return True
        if m % 2 == 0:
            return False
        i = m >> 1
        return bool((self.bits[i >> 3] >> (i & 7)) & 1)

    def is_prime_array(self, m: np.ndarray) -> np.ndarray:
        """Vectorized membership; entries outside ``[0, limit]`` raise."""
        m = np.abs(np.asarray(m, dtype=np.int64))
        if m.size and int(m.max()) > self.limit:
            raise DomainError("query exceeds table limit")
        odd = (m & 1).astype(bool)
        i = np.where(odd, m >> 1, 0)
        out = ((self.bits[i >> 3] >> (i & 7).astype(np.uint8)) & 1).astype(bool) & odd
        return out | (m == 2)

    def primes(self, lo: int = 2, hi: int | None = None) -> np.ndarray:
        """All primes in ``[lo, hi]`` as an int64 array."""
        hi = self.limit if hi is None else min(int(hi), self.limit)
        if hi < max(lo, 2):
            return np.zeros(0, dtype=np.int64)
        i_lo = max(int(lo), 1) >> 1
        i_hi = (hi - 1) >> 1
        b0, b1 = i_lo >> 3, (i_hi >> 3) + 1
        flags = np.unpackbits(self.bits[b0:b1], bitorder="little")
        idx = np.flatnonzero(flags) + (b0 << 3)
        odd = 2 * idx.astype(np.int64) + 1
        odd = odd[(odd >= lo) & (odd <= hi)]
        if lo <= 2 <= hi:
            odd = np.concatenate([np.array([2], dtype=np.int64), odd])
        return odd

    def count(self) -> int:
        return int(np.unpackbits(self.bits, bitorder="little").sum()) + (1 if self.limit >= 2 else 0)


def sieve_primes(limit: int, segment_bytes: int = DEFAULT_SEGMENT_BYTES) -> PrimeTable:
    """Segmented odd-only sieve up to ``limit`` inclusive.

    The working set per segment is ``segment_bytes`` flag bytes (one per odd
    number); results are packed eight flags per byte as segments complete.
    """
    limit = int(limit)
    if limit < 2 or limit > MAX_SIEVE_LIMIT:
        raise CapacityError(f"sieve limit {limit} outside [2, 2^40]")
    seg = max(64, (int(segment_bytes) // 8) * 8)
    n_odd = (limit + 1) // 2  # odd numbers 1, 3, ..., <= limit
    n_bytes = (n_odd + 7) // 8
    bits = np.zeros(n_bytes, dtype=np.uint8)
    base = _small_sieve(math.isqrt(limit))[1:]  # odd base primes
    for start_i in range(0, n_odd, seg):
        stop_i = min(start_i + seg, n_odd)
        flags = np.ones(stop_i - start_i, dtype=bool)
        lo = 2 * start_i + 1
        hi = 2 * (stop_i - 1) + 1
        if start_i == 0:
            flags[0] = False  # 1 is not prime
        for p in base:
            p = int(p)
            sq = p * p
            if sq > hi:
                break
            first = max(sq, ((lo + p - 1) // p) * p)
            if first % 2 == 0:
                first += p
            flags[(first - lo) // 2 :: p] = False
        if len(flags) % 8:
            flags = np.concatenate([flags, np.zeros(8 - len(flags) % 8, dtype=bool)])
        packed = np.packbits(flags, bitorder="little")
        bits[start_i // 8 : start_i // 8 + len(packed)] = packed
    return PrimeTable(limit=limit, bits=bits)


@lru_cache(maxsize=4)
def cached_table(limit: int) -> PrimeTable:
    return sieve_primes(limit)


def primes_up_to(limit: int) -> np.ndarray:
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    return cached_table(int(limit)).primes()


def is_prime_64(m: int) -> bool:
    """Deterministic Miller-Rabin, exact for every ``m < 2**64``."""
    m = int(m)
    if m < 2:
        return False
    for p in _MR_BASES:
        if m % p == 0:
            return m == p
    d, s = m - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, m)
        if x == 1 or x == m - 1:
            continue
        for _ in range(s - 1):
            x = x * x % m
            if x == m - 1:
                break
        else:
            return False
    return True


def factorize(m: int) -> dict[int, int]:
    """Prime factorization of ``|m|`` by trial division (intended for ``|m| <= 10**12``)."""
    m = abs(int(m))
    if m == 0:
        raise DomainError("cannot factor 0")
    out: dict[int, int] = {}
    for p in (2, 3):
        while m % p == 0:
            out[p] = out.get(p, 0) + 1
            m //= p
    d = 5
    while d * d <= m:
        for q in (d, d + 2):
            while m % q == 0:
                out[q] = out.get(q, 0) + 1
                m //= q
        d += 6
    if m > 1:
        out[m] = out.get(m, 0) + 1
    return out


def _prime_power_base(m: int) -> int | None:
    """Return ``p`` if ``m = p**k`` for a prime ``p`` and ``k >= 1``, else None."""
    if m < 2:
        return None
    for k in range(m.bit_length(), 0, -1):
        r = round(m ** (1.0 / k))
        for c in (r - 1, r, r + 1):
            if c >= 2 and c**k == m:
                return c if is_prime_64(c) else None
    return None


def lambda_prime(x: int) -> float:
    """Prime-only symmetric von Mangoldt: ``log|x|`` if ``|x|`` is prime, else 0."""
    a = abs(int(x))
    return math.log(a) if is_prime_64(a) else 0.0


def von_mangoldt(x: int) -> float:
    a = abs(int(x))
    p = _prime_power_base(a)
    return math.log(p) if p is not None else 0.0


def tau_mu(x: int) -> tuple[int, int]:
    """Divisor count and Mobius value of ``|x|``."""
    if int(x) == 0:
        raise DomainError("tau and mu are undefined at 0")
    fac = factorize(x)
    tau = 1
    for e in fac.values():
        tau *= e + 1
    mu = 0 if any(e > 1 for e in fac.values()) else (-1) ** len(fac)
    return tau, mu


def divisor_count_array(limit: int) -> np.ndarray:
    """``tau[m]`` for ``0 <= m <= limit`` (``tau[0] = 0``)."""
    tau = np.zeros(limit + 1, dtype=np.int64)
    for d in range(1, limit + 1):
        tau[d::d] += 1
    return tau


def smallest_prime_factor_array(limit: int) -> np.ndarray:
    spf = np.zeros(limit + 1, dtype=np.int64)
    for p in _small_sieve(math.isqrt(limit)):
        p = int(p)
        block = spf[p * p :: p]
        block[block == 0] = p
    rest = np.flatnonzero(spf == 0)
    spf[rest] = rest
    return spf


def mobius_array(limit: int) -> np.ndarray:
    mu = np.ones(limit + 1, dtype=np.int64)
    mu[0] = 0
    for p in _small_sieve(limit):
        p = int(p)
        mu[p::p] *= -1
        mu[p * p :: p * p] = 0
    return mu


def lambda_prime_array(lo: int, hi: int, table: PrimeTable | None = None) -> np.ndarray:
    """``Lambda'(x)`` for ``lo <= x <= hi`` as a float array."""
    xs = np.arange(lo, hi + 1, dtype=np.int64)
    a = np.abs(xs)
    top = int(a.max()) if a.size else 0
    table = table or cached_table(max(top, 2))
    out = np.zeros(xs.shape, dtype=np.float64)
    mask = table.is_prime_array(a)
    out[mask] = np.log(a[mask].astype(np.float64))
    return out


def von_mangoldt_array(lo: int, hi: int) -> np.ndarray:
    xs = np.arange(lo, hi + 1, dtype=np.int64)
    a = np.abs(xs)
    top = int(a.max()) if a.size else 0
    out = np.zeros(xs.shape, dtype=np.float64)
    if top < 2:
        return out
    lookup = np.zeros(top + 1, dtype=np.float64)
    for p in primes_up_to(top):
        p = int(p)
        q = p
        lp = math.log(p)
        while q <= top:
            lookup[q] = lp
            q *= p
    return lookup[a]


def divisor_moment_report(Y: int, m: int) -> tuple[int, float]:
    """``S = sum_{0<|y|<=Y} tau(y)^m`` and ``S / (Y (log Y)^(2^m - 1))``."""
    if Y < 16 or not 1 <= m <= 4:
        raise DomainError("need Y >= 16 and 1 <= m <= 4")
    tau = divisor_count_array(int(Y))[1:]
    s = 2 * int(np.sum(tau.astype(object) ** m)) if m > 2 else 2 * int(np.sum(tau**m))
    return s, s / (Y * math.log(Y) ** (2**m - 1))
