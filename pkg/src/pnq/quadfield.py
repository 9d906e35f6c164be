"""Invariants and class-group arithmetic of the imaginary quadratic field K = Q(sqrt(-n)).

The class group is realized by reduced primitive binary quadratic forms
``a x^2 + b x y + c y^2`` of discriminant ``delta`` under Gauss composition.
Ideals ``[a, (-b + sqrt(delta))/2]`` correspond to forms ``(a, b, c)``.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .arith import factorize, is_prime_64, primes_up_to
from .errors import DomainError

Form = tuple[int, int, int]


class Splitting(enum.IntEnum):
    RAMIFIED = 0
    SPLIT = 1
    INERT = 2


def squarefree_decomposition(n: int) -> tuple[int, int]:
    """Write ``n = n_star * r**2`` with ``n_star`` squarefree."""
    n_star, r = 1, 1
    for p, e in factorize(n).items():
        r *= p ** (e // 2)
        if e % 2:
            n_star *= p
    return n_star, r


def kronecker(delta: int, m: int) -> int:
    """Kronecker symbol ``(delta | m)`` for arbitrary integers."""
    a, b = int(delta), int(m)
    if b == 0:
        return 1 if abs(a) == 1 else 0
    if a % 2 == 0 and b % 2 == 0:
        return 0
    v = 0
    while b % 2 == 0:
        v += 1
        b //= 2
    k = 1
    if v % 2 and a % 8 in (3, 5):
        k = -k
    if b < 0:
        b = -b
        if a < 0:
            k = -k
    # b odd and positive: Jacobi-style reciprocity loop.
    a %= b
    while a:
        v = 0
        while a % 2 == 0:
            v += 1
            a //= 2
        if v % 2 and b % 8 in (3, 5):
            k = -k
        if a % 4 == 3 and b % 4 == 3:
            k = -k
        a, b = b % a, a
    return k if b == 1 else 0


def normalize_form(f: Form) -> Form:
    a, b, c = f
    if -a < b <= a:
        return f
    r = (a - b) // (2 * a)
    return a, b + 2 * r * a, a * r * r + b * r + c


def reduce_form(f: Form) -> Form:
    """Reduce a positive definite form to the unique reduced representative of its class."""
    a, b, c = normalize_form(f)
    while a > c:
        a, b, c = normalize_form((c, -b, a))
    if a == c and b < 0:
        b = -b
    return a, b, c


def is_reduced(f: Form) -> bool:
    a, b, c = f
    if not (abs(b) <= a <= c):
        return False
    if (abs(b) == a or a == c) and b < 0:
        return False
    return True


def _ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return x0, y0, a


def compose_forms(f1: Form, f2: Form) -> Form:
    """Gauss composition of two primitive forms of equal discriminant, reduced."""
    a1, b1, c1 = f1
    a2, b2, c2 = f2
    delta = b1 * b1 - 4 * a1 * c1
    if a1 > a2:
        a1, b1, c1, a2, b2, c2 = a2, b2, c2, a1, b1, c1
    s = (b1 + b2) // 2
    nn = b2 - s
    if a2 % a1 == 0:
        y1, d = 0, a1
    else:
        u, _, d = _ext_gcd(a2, a1)
        y1 = u
    if s % d == 0:
        y2, x2, d1 = -1, 0, d
    else:
        u, v, d1 = _ext_gcd(s, d)
        x2, y2 = u, -v
    v1 = a1 // d1
    v2 = a2 // d1
    r = (y1 * y2 * nn - x2 * c2) % v1
    b3 = b2 + 2 * v2 * r
    a3 = v1 * v2
    c3 = (b3 * b3 - delta) // (4 * a3)
    return reduce_form((a3, b3, c3))


def reduced_forms(delta: int) -> list[Form]:
    """All reduced primitive forms of negative discriminant ``delta``, principal form first."""
    out = []
    amax = math.isqrt(-delta // 3) + 1
    for a in range(1, amax + 1):
        for b in range(-a + 1, a + 1):
            if (b - delta) % 2:
                continue
            num = b * b - delta
            if num % (4 * a):
                continue
            c = num // (4 * a)
            f = (a, b, c)
            if c >= a and is_reduced(f) and math.gcd(math.gcd(a, b), c) == 1:
                out.append(f)
    out.sort()
    return out


def principal_form(delta: int) -> Form:
    b = delta % 2
    return 1, b, (b * b - delta) // 4


def class_group_characters(table: np.ndarray) -> list[np.ndarray]:
    """All characters of a finite abelian group given by its Cayley table.

    Characters are built by extending from a subgroup one generator at a time:
    if ``g`` has order ``d`` modulo the current subgroup ``H``, each character
    of ``H`` has exactly ``d`` extensions to ``<H, g>``. Index 0 is principal.
    """
    h = table.shape[0]
    ident = 0
    members = [ident]
    chars = [np.ones(1, dtype=complex)]  # values on `members`, aligned by position
    while len(members) < h:
        g = next(x for x in range(h) if x not in set(members))
        pos = {m: i for i, m in enumerate(members)}
        d, gp = 1, g
        while gp not in pos:
            gp = int(table[gp, g])
            d += 1
        new_members = list(members)
        layers = [list(members)]
        cur = list(members)
        for _ in range(1, d):
            cur = [int(table[m, g]) for m in cur]
            layers.append(cur)
            new_members.extend(cur)
        new_chars = []
        for chi in chars:
            base = chi[pos[gp]]
            z0 = cmath.rect(1.0, cmath.phase(base) / d)
            for k in range(d):
                z = z0 * cmath.rect(1.0, 2 * math.pi * k / d)
                vals = np.concatenate([chi * z**j for j in range(d)])
                new_chars.append(vals)
        members = new_members
        chars = new_chars
    order = np.argsort(np.array(members))
    out = [c[order] for c in chars]
    # Snap values to exact roots of unity for reproducibility.
    return [np.round(c.real, 15) + 1j * np.round(c.imag, 15) for c in out]


@dataclass(frozen=True, eq=False)
class FieldInvariants:
    n: int
    n_star: int
    r: int
    omega: Fraction
    delta: int
    unit_count: int
    forms: tuple[Form, ...]
    table: np.ndarray = field(repr=False)
    _index: dict = field(repr=False, default_factory=dict)

    @property
    def class_number(self) -> int:
        return len(self.forms)

    def form_index(self, f: Form) -> int:
        return self._index[reduce_form(f)]

    def compose(self, i: int, j: int) -> int:
        return int(self.table[i, j])

    def inverse(self, i: int) -> int:
        a, b, c = self.forms[i]
        return self.form_index((a, -b, c))

    @property
    def character_table(self) -> list[np.ndarray]:
        return _characters_for(self.n)

    def chi(self, m: int) -> int:
        return kronecker(self.delta, m)

    def chi_table(self) -> np.ndarray:
        """Values of ``(delta | m)`` for ``0 <= m < |delta|``; the character has period ``|delta|``."""
        return _chi_table(self.delta)

    def chi_array(self, m: np.ndarray) -> np.ndarray:
        return self.chi_table()[np.asarray(m, dtype=np.int64) % (-self.delta)]


@lru_cache(maxsize=None)
def _chi_table(delta: int) -> np.ndarray:
    t = np.array([kronecker(delta, m) for m in range(-delta)], dtype=np.int64)
    t.setflags(write=False)
    return t


@lru_cache(maxsize=None)
def field_invariants(n: int) -> FieldInvariants:
    if n < 1:
        raise DomainError("n must be a positive integer")
    n_star, r = squarefree_decomposition(n)
    omega = Fraction(1) if n_star % 4 in (1, 2) else Fraction(1, 2)
    delta = int(-4 * omega * omega * n_star)
    units = 4 if n_star == 1 else 6 if n_star == 3 else 2
    forms = reduced_forms(delta)
    index = {f: i for i, f in enumerate(forms)}
    h = len(forms)
    table = np.zeros((h, h), dtype=np.int64)
    for i, f in enumerate(forms):
        for j, g in enumerate(forms):
            table[i, j] = index[compose_forms(f, g)]
    table.setflags(write=False)
    return FieldInvariants(n, n_star, r, omega, delta, units, tuple(forms), table, index)


@lru_cache(maxsize=None)
def _characters_for(n: int) -> list[np.ndarray]:
    return class_group_characters(field_invariants(n).table)


def splitting_type(inv: FieldInvariants, p: int) -> Splitting:
    if not is_prime_64(p):
        raise DomainError(f"{p} is not prime")
    k = kronecker(inv.delta, p)
    return Splitting.SPLIT if k == 1 else Splitting.INERT if k == -1 else Splitting.RAMIFIED


def l_one_chi(inv: FieldInvariants) -> float:
    """``L(1, chi_delta)`` from the class number formula."""
    return 2 * math.pi * inv.class_number / (inv.unit_count * math.sqrt(-inv.delta))


def rep_count(inv: FieldInvariants, t: int) -> int:
    """Number of ``(x, y)`` in Z^2 with ``x^2 + n y^2 = t``."""
    if t < 1 or t > 10**12:
        raise DomainError("t must lie in [1, 10^12]")
    total = 0
    for y in range(math.isqrt(t // inv.n) + 1):
        rest = t - inv.n * y * y
        x = math.isqrt(rest)
        if x * x == rest:
            total += (1 if x == 0 else 2) * (1 if y == 0 else 2)
    return total


def rep_count_array(n: int, limit: int) -> np.ndarray:
    """``r(t)`` for ``0 <= t <= limit`` by lattice enumeration."""
    counts = np.zeros(limit + 1, dtype=np.int64)
    xs = np.arange(-math.isqrt(limit), math.isqrt(limit) + 1, dtype=np.int64)
    for y in range(-math.isqrt(limit // n), math.isqrt(limit // n) + 1):
        v = xs * xs + n * y * y
        v = v[v <= limit]
        np.add.at(counts, v, 1)
    return counts


def ideal_count(inv: FieldInvariants, X: int) -> tuple[int, float]:
    """Number of ideals of norm ``<= X`` and the ratio ``count / X``.

    Uses ``#{N a = m} = sum_{d | m} (delta | d)`` and the hyperbola method,
    so the cost is ``O(sqrt X)``.
    """
    X = int(X)
    if X < 1:
        raise DomainError("X must be positive")
    s = math.isqrt(X)
    tab = inv.chi_table()
    q = len(tab)
    ds = np.arange(1, s + 1, dtype=np.int64)
    chi = tab[ds % q]
    part1 = int(np.sum(chi * (X // ds)))
    pref = np.concatenate([[0], np.cumsum(tab)])  # pref[k] = sum_{0<=j<k} chi(j)

    def big_s(y: np.ndarray) -> np.ndarray:
        full, rem = np.divmod(y, q)
        return full * pref[q] + pref[rem + 1] - pref[1]

    part2 = int(np.sum(big_s(X // ds)))
    part3 = int(big_s(np.array([s]))[0]) * s
    count = part1 + part2 - part3
    return count, count / X


def ideal_count_direct(inv: FieldInvariants, X: int) -> int:
    """``sum_{d <= X} (delta | d) floor(X / d)`` evaluated term by term."""
    ds = np.arange(1, X + 1, dtype=np.int64)
    return int(np.sum(inv.chi_array(ds) * (X // ds)))


def prime_ideal_reciprocal_sum(inv: FieldInvariants, X: float) -> float:
    """``sum 1/N p`` over prime ideals of norm ``<= X``."""
    X = int(math.floor(X))
    ps = primes_up_to(X)
    if ps.size == 0:
        return 0.0
    chi = inv.chi_array(ps)
    inv_p = 1.0 / ps.astype(np.float64)
    total = math.fsum((2 * inv_p[chi == 1]).tolist()) + math.fsum(inv_p[chi == 0].tolist())
    inert = ps[(chi == -1) & (ps <= math.isqrt(X))].astype(np.float64)
    return total + math.fsum((1.0 / inert**2).tolist())
