"""Ideals of O_K as multisets of tagged prime ideals, principal-ideal indexing, and sieve sums.

Arithmetic is done in the basis ``{1, tau}`` of ``O_K`` where ``tau = sqrt(-n*)``
(``omega = 1``) or ``tau = (1 + sqrt(-n*))/2`` (``omega = 1/2``). A split prime
``p`` has two prime ideals ``(p, tau - rho)``, one per root ``rho`` of the
minimal polynomial of ``tau`` mod ``p``; ``a + b tau`` lies in it iff
``a + b rho = 0 mod p``.
"""

from __future__ import annotations

import bisect
import itertools
import math
import pickle
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .arith import factorize, primes_up_to, smallest_prime_factor_array
from .errors import CapacityError, DomainError, IdentityError
from .quadfield import FieldInvariants, Splitting, kronecker, reduce_form

TagKey = tuple[int, int, int, int]  # (norm, p, kind, conjugate)
IdealKey = tuple[tuple[TagKey, int], ...]

PRINCIPAL_INDEX_GUARD = 10**8
CACHE_MAGIC = b"PNQPIDX\x00"
CACHE_VERSION = 1
_HEADER = struct.Struct("<8sIIQI")


def sqrt_mod_prime(a: int, p: int) -> int | None:
    """A square root of ``a`` modulo the prime ``p`` (Tonelli-Shanks), or None."""
    a %= p
    if a == 0 or p == 2:
        return a
    if pow(a, (p - 1) // 2, p) != 1:
        return None
    if p % 4 == 3:
        return pow(a, (p + 1) // 4, p)
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while pow(z, (p - 1) // 2, p) != p - 1:
        z += 1
    m, c, t, r = s, pow(z, q, p), pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c, t, r = i, b * b % p, t * b * b % p, r * b % p
    return r


def _tau_roots(inv: FieldInvariants, p: int) -> list[int]:
    """Roots mod ``p`` of the minimal polynomial of ``tau`` (sorted, without repetition)."""
    if inv.omega == 1:
        if p == 2:
            return [inv.n_star % 2]
        s = sqrt_mod_prime(-inv.n_star, p)
        return [] if s is None else sorted({s, (-s) % p})
    c = (1 + inv.n_star) // 4
    if p == 2:
        return [t for t in (0, 1) if (t * t - t + c) % 2 == 0]
    s = sqrt_mod_prime(-inv.n_star, p)
    if s is None:
        return []
    half = (p + 1) // 2
    return sorted({(1 + s) * half % p, (1 - s) * half % p})


@dataclass(frozen=True)
class PrimeIdealTag:
    p: int
    kind: Splitting
    root: int | None
    conjugate: bool
    norm: int
    class_index: int

    @property
    def key(self) -> TagKey:
        return (self.norm, self.p, int(self.kind), int(self.conjugate))

    def __lt__(self, other: "PrimeIdealTag") -> bool:
        return self.key < other.key

    def __le__(self, other: "PrimeIdealTag") -> bool:
        return self.key <= other.key


def _class_of_root(inv: FieldInvariants, p: int, rho: int) -> int:
    if inv.omega == 1:
        b = (2 * rho) % (2 * p)
    else:
        b = (2 * rho - 1) % (2 * p)
    if b > p:
        b -= 2 * p
    num = b * b - inv.delta
    if num % (4 * p):
        raise IdentityError("prime ideal form does not have integral c")
    return inv.form_index(reduce_form((p, b, num // (4 * p))))


def prime_ideals_above(inv: FieldInvariants, p: int) -> list[PrimeIdealTag]:
    k = kronecker(inv.delta, p)
    if k == -1:
        return [PrimeIdealTag(p, Splitting.INERT, None, False, p * p, 0)]
    roots = _tau_roots(inv, p)
    if k == 0:
        rho = roots[0]
        return [PrimeIdealTag(p, Splitting.RAMIFIED, rho, False, p, _class_of_root(inv, p, rho))]
    return [
        PrimeIdealTag(p, Splitting.SPLIT, rho, bool(i), p, _class_of_root(inv, p, rho))
        for i, rho in enumerate(roots)
    ]


_TAG_CACHE: dict[tuple[int, int], list[PrimeIdealTag]] = {}


def tags_above(inv: FieldInvariants, p: int) -> list[PrimeIdealTag]:
    key = (inv.n, p)
    got = _TAG_CACHE.get(key)
    if got is None:
        got = prime_ideals_above(inv, p)
        if len(_TAG_CACHE) > 2_000_000:
            _TAG_CACHE.clear()
        _TAG_CACHE[key] = got
    return got


def enumerate_prime_ideals(inv: FieldInvariants, X: float) -> list[PrimeIdealTag]:
    """All prime ideals of norm ``<= X``, strictly increasing in ``order_key``."""
    X = int(math.floor(X))
    if X < 2:
        return []
    out = []
    for p in primes_up_to(X).tolist():
        for t in tags_above(inv, p):
            if t.norm <= X:
                out.append(t)
    out.sort(key=lambda t: t.key)
    return out


def tag_from_key(inv: FieldInvariants, key: TagKey) -> PrimeIdealTag:
    for t in tags_above(inv, key[1]):
        if t.key == key:
            return t
    raise DomainError(f"no prime ideal with key {key}")


@dataclass(frozen=True)
class FormalIdeal:
    """An ideal of O_K as a sorted tuple of ``(tag, exponent)``; empty means the unit ideal."""

    factors: tuple[tuple[PrimeIdealTag, int], ...] = ()

    @staticmethod
    def from_counts(counts: dict[PrimeIdealTag, int]) -> "FormalIdeal":
        return FormalIdeal(tuple(sorted(((t, e) for t, e in counts.items() if e > 0), key=lambda te: te[0].key)))

    @property
    def norm(self) -> int:
        out = 1
        for t, e in self.factors:
            out *= t.norm**e
        return out

    @property
    def key(self) -> IdealKey:
        return tuple((t.key, e) for t, e in self.factors)

    def counts(self) -> dict[PrimeIdealTag, int]:
        return {t: e for t, e in self.factors}

    def __mul__(self, other: "FormalIdeal") -> "FormalIdeal":
        c = self.counts()
        for t, e in other.factors:
            c[t] = c.get(t, 0) + e
        return FormalIdeal.from_counts(c)

    def divides(self, other: "FormalIdeal") -> bool:
        oc = other.counts()
        return all(oc.get(t, 0) >= e for t, e in self.factors)

    def __truediv__(self, other: "FormalIdeal") -> "FormalIdeal":
        if not other.divides(self):
            raise DomainError("not a divisor")
        c = self.counts()
        for t, e in other.factors:
            c[t] -= e
        return FormalIdeal.from_counts(c)

    def class_index(self, inv: FieldInvariants) -> int:
        g = 0
        for t, e in self.factors:
            for _ in range(e):
                g = inv.compose(g, t.class_index)
        return g

    def divisors(self) -> Iterator["FormalIdeal"]:
        tags = [t for t, _ in self.factors]
        for exps in itertools.product(*(range(e + 1) for _, e in self.factors)):
            yield FormalIdeal(tuple((t, k) for t, k in zip(tags, exps) if k))

    def is_prime_power(self) -> bool:
        return len(self.factors) == 1


def lambda_K(a: FormalIdeal) -> float:
    """``log N p`` if ``a = p^k`` for a prime ideal ``p``, else 0."""
    return math.log(a.factors[0][0].norm) if a.is_prime_power() else 0.0


def element_coords(inv: FieldInvariants, x: int, y: int) -> tuple[int, int]:
    """Coordinates of ``x + y sqrt(-n)`` in the basis ``{1, tau}``."""
    if inv.omega == 1:
        return x, y * inv.r
    return x - y * inv.r, 2 * y * inv.r


def element_norm(inv: FieldInvariants, a: int, b: int) -> int:
    if inv.omega == 1:
        return a * a + inv.n_star * b * b
    return a * a + a * b + ((1 + inv.n_star) // 4) * b * b


def factor_element(
    inv: FieldInvariants, a: int, b: int, factor_int: Callable[[int], dict[int, int]] = factorize
) -> FormalIdeal:
    """Prime ideal factorization of the principal ideal ``(a + b tau)``."""
    if a == 0 and b == 0:
        raise DomainError("the zero element has no factorization")
    counts: dict[PrimeIdealTag, int] = {}
    g = math.gcd(a, b)
    if g > 1:
        for q, e in factor_int(g).items():
            tags = tags_above(inv, q)
            mult = 2 * e if tags[0].kind == Splitting.RAMIFIED else e
            for t in tags:
                counts[t] = counts.get(t, 0) + mult
        a //= g
        b //= g
    nrm = element_norm(inv, a, b)
    if nrm > 1:
        for q, e in factor_int(nrm).items():
            tags = tags_above(inv, q)
            kind = tags[0].kind
            if kind == Splitting.INERT:
                raise IdentityError("inert prime divides a primitive element")
            if kind == Splitting.RAMIFIED:
                t = tags[0]
            else:
                hits = [t for t in tags if (a + b * t.root) % q == 0]
                if len(hits) != 1:
                    raise IdentityError("split prime valuation is ambiguous")
                t = hits[0]
            counts[t] = counts.get(t, 0) + e
    return FormalIdeal.from_counts(counts)


def factor_generator(inv: FieldInvariants, x: int, y: int, factor_int=factorize) -> FormalIdeal:
    a, b = element_coords(inv, x, y)
    return factor_element(inv, a, b, factor_int)


def conjugate_ideal(inv: FieldInvariants, a: FormalIdeal) -> FormalIdeal:
    counts: dict[PrimeIdealTag, int] = {}
    for t, e in a.factors:
        if t.kind == Splitting.SPLIT:
            other = [s for s in tags_above(inv, t.p) if s.conjugate != t.conjugate][0]
            counts[other] = e
        else:
            counts[t] = e
    return FormalIdeal.from_counts(counts)


# --- principal index -----------------------------------------------------------------


@dataclass
class PrincipalIndex:
    """Map from principal ideals to their integer generator pairs ``(x, y)``."""

    n: int
    X: int
    entries: dict[IdealKey, list[tuple[int, int]]]
    ideals: dict[IdealKey, FormalIdeal] = field(repr=False, default_factory=dict)

    def generators(self, a: FormalIdeal | IdealKey) -> list[tuple[int, int]]:
        key = a.key if isinstance(a, FormalIdeal) else a
        return self.entries.get(key, [])

    def pair_count(self) -> int:
        return sum(len(v) for v in self.entries.values())

    def __len__(self) -> int:
        return len(self.entries)


def lattice_points(n: int, X: int) -> Iterator[tuple[int, int]]:
    """All ``(x, y)`` with ``0 < x^2 + n y^2 <= X``."""
    ymax = math.isqrt(X // n)
    for y in range(-ymax, ymax + 1):
        rest = X - n * y * y
        xm = math.isqrt(rest)
        for x in range(-xm, xm + 1):
            if x or y:
                yield x, y


def build_principal_index(
    inv: FieldInvariants,
    X: int,
    keep: Callable[[int, int], bool] | None = None,
) -> PrincipalIndex:
    """Factor every ``x + y sqrt(-n)`` with ``0 < x^2 + n y^2 <= X``.

    ``keep`` optionally restricts registration to pairs of interest (for example
    the support of a product weight). Only pairs with ``x >= 0, y >= 0`` are
    factored; the others follow from ``(-x,-y) ~ (x,y)`` and conjugation.
    """
    X = int(X)
    if X > PRINCIPAL_INDEX_GUARD:
        raise CapacityError(f"principal index limited to X <= {PRINCIPAL_INDEX_GUARD}")
    spf = smallest_prime_factor_array(max(X, 2)).tolist()

    def fac(m: int) -> dict[int, int]:
        if m > X:
            return factorize(m)
        out: dict[int, int] = {}
        while m > 1:
            q = spf[m]
            out[q] = out.get(q, 0) + 1
            m //= q
        return out

    entries: dict[IdealKey, list[tuple[int, int]]] = {}
    ideals: dict[IdealKey, FormalIdeal] = {}
    ymax = math.isqrt(X // inv.n)
    for y in range(0, ymax + 1):
        xm = math.isqrt(X - inv.n * y * y)
        for x in range(0, xm + 1):
            if x == 0 and y == 0:
                continue
            variants = {(x, y), (-x, -y)}
            conj = {(x, -y), (-x, y)}
            want = [v for v in variants if keep is None or keep(*v)]
            want_c = [v for v in conj if keep is None or keep(*v)]
            if not want and not want_c:
                continue
            ideal = factor_generator(inv, x, y, fac)
            if want:
                k = ideal.key
                ideals.setdefault(k, ideal)
                entries.setdefault(k, []).extend(sorted(want))
            if want_c and conj != variants:
                cideal = conjugate_ideal(inv, ideal)
                k = cideal.key
                ideals.setdefault(k, cideal)
                entries.setdefault(k, []).extend(sorted(want_c))
    for v in entries.values():
        v.sort()
    return PrincipalIndex(inv.n, X, dict(sorted(entries.items())), ideals)


def save_principal_index(idx: PrincipalIndex, path: str | Path) -> None:
    payload = zlib.compress(pickle.dumps(idx.entries, protocol=4))
    header = _HEADER.pack(CACHE_MAGIC, CACHE_VERSION, idx.n, idx.X, zlib.crc32(payload))
    Path(path).write_bytes(header + payload)


def load_principal_index(inv: FieldInvariants, X: int, path: str | Path) -> PrincipalIndex | None:
    """Read a cached index; returns None on any mismatch or corruption."""
    try:
        raw = Path(path).read_bytes()
        magic, version, n, xx, crc = _HEADER.unpack_from(raw)
        payload = raw[_HEADER.size :]
        if magic != CACHE_MAGIC or version != CACHE_VERSION or n != inv.n or xx != X:
            return None
        if zlib.crc32(payload) != crc:
            return None
        entries = pickle.loads(zlib.decompress(payload))
    except Exception:
        return None
    ideals = {k: FormalIdeal(tuple((tag_from_key(inv, tk), e) for tk, e in k)) for k in entries}
    return PrincipalIndex(inv.n, X, entries, ideals)


def principal_index_cached(inv: FieldInvariants, X: int, path: str | Path | None) -> PrincipalIndex:
    if path is not None:
        got = load_principal_index(inv, X, path)
        if got is not None:
            return got
    idx = build_principal_index(inv, X)
    if path is not None:
        save_principal_index(idx, path)
    return idx


# --- ideal table and sieve sums ------------------------------------------------------


@dataclass(frozen=True)
class UpSet:
    """Either ``I(p) = {p' >= p}`` (``tag`` given) or ``I(t) = {p : N p >= t}``."""

    tag: PrimeIdealTag | None = None
    t: float | None = None

    @staticmethod
    def from_tag(tag: PrimeIdealTag) -> "UpSet":
        return UpSet(tag=tag)

    @staticmethod
    def from_norm(t: float) -> "UpSet":
        return UpSet(t=float(t))

    def contains(self, tag: PrimeIdealTag) -> bool:
        if self.tag is not None:
            return tag.key >= self.tag.key
        return tag.norm >= self.t


class IdealTable:
    """Every ideal of norm ``<= X``, with per-prime divisibility lists for fast sieve sums."""

    def __init__(self, inv: FieldInvariants, X: int):
        self.inv = inv
        self.X = int(X)
        self.tags = enumerate_prime_ideals(inv, self.X)
        self.tag_pos = {t.key: i for i, t in enumerate(self.tags)}
        tag_norms = [t.norm for t in self.tags]
        facs: list[tuple[tuple[int, int], ...]] = []
        norms: list[int] = []

        def rec(start: int, cur: list[tuple[int, int]], nrm: int) -> None:
            facs.append(tuple(cur))
            norms.append(nrm)
            for i in range(start, len(self.tags)):
                tn = tag_norms[i]
                if nrm * tn > self.X:
                    break
                m, e = nrm * tn, 1
                while m <= self.X:
                    cur.append((i, e))
                    rec(i + 1, cur, m)
                    cur.pop()
                    m *= tn
                    e += 1

        rec(0, [], 1)
        order = sorted(range(len(facs)), key=lambda j: (norms[j], facs[j]))
        self.factors = [facs[j] for j in order]
        self.norms = np.array([norms[j] for j in order], dtype=np.int64)
        self.min_tag = np.array([f[0][0] if f else len(self.tags) for f in self.factors], dtype=np.int64)
        self.omega_big = np.array([sum(e for _, e in f) for f in self.factors], dtype=np.int64)
        by_tag: list[list[int]] = [[] for _ in self.tags]
        for j, f in enumerate(self.factors):
            for i, _ in f:
                by_tag[i].append(j)
        self.by_tag = [np.array(v, dtype=np.int64) for v in by_tag]
        self.index = {f: j for j, f in enumerate(self.factors)}

    def __len__(self) -> int:
        return len(self.factors)

    def ideal(self, j: int) -> FormalIdeal:
        return FormalIdeal(tuple((self.tags[i], e) for i, e in self.factors[j]))

    def position(self, a: FormalIdeal) -> int | None:
        local = tuple((self.tag_pos[t.key], e) for t, e in a.factors)
        return self.index.get(local)

    def weights(self, w: Callable[[FormalIdeal], complex]) -> np.ndarray:
        return np.array([complex(w(self.ideal(j))) for j in range(len(self))], dtype=np.complex128)

    def upset_mask(self, I: UpSet) -> np.ndarray:
        """Mask of ideals all of whose prime factors lie in ``I`` (the unit ideal included)."""
        if I.tag is not None:
            thr = bisect.bisect_left([t.key for t in self.tags], I.tag.key)
        else:
            thr = next((i for i, t in enumerate(self.tags) if t.norm >= I.t), len(self.tags))
        return self.min_tag >= thr

    def members_divisible(self, tag_ids: Sequence[int]) -> np.ndarray:
        """Indices of ideals divisible by the product of the distinct tags ``tag_ids``."""
        if not tag_ids:
            return np.arange(len(self), dtype=np.int64)
        lists = sorted((self.by_tag[i] for i in tag_ids), key=len)
        out = lists[0]
        for other in lists[1:]:
            out = np.intersect1d(out, other, assume_unique=True)
        return out

    def tags_in_norm_range(self, lo: float, hi: float) -> list[int]:
        return [i for i, t in enumerate(self.tags) if lo <= t.norm < hi]


def weighted_sum_S(
    table: IdealTable,
    A: Callable[[FormalIdeal], bool] | np.ndarray | None,
    I: UpSet,
    w: Callable[[FormalIdeal], complex] | np.ndarray,
) -> complex:
    """``S(A, I)``: sum of ``w(a)`` over ``a`` in ``A`` whose prime factors all lie in ``I``."""
    wv = w if isinstance(w, np.ndarray) else table.weights(w)
    mask = table.upset_mask(I)
    if A is not None:
        amask = A if isinstance(A, np.ndarray) else np.array([bool(A(table.ideal(j))) for j in range(len(table))])
        mask = mask & amask
    return complex(np.sum(wv[mask]))


def _S_div(table: IdealTable, wv: np.ndarray, tag_ids: Sequence[int], thr: int) -> complex:
    """``S(C_d, I)`` with ``d`` the product of distinct ``tag_ids`` and ``I`` = tags of index ``>= thr``."""
    members = table.members_divisible(tag_ids)
    sel = members[table.min_tag[members] >= thr]
    return complex(np.sum(wv[sel]))


def _thr_norm(table: IdealTable, t: float) -> int:
    return next((i for i, g in enumerate(table.tags) if g.norm >= t), len(table.tags))


def _rel_close(a: complex, b: complex, scale: float, tol: float) -> bool:
    return abs(a - b) <= tol * max(scale, 1e-300)


@dataclass
class BuchstabReport:
    lhs: complex
    first: complex
    middle: complex
    third: complex
    rhs: complex
    unit_term: complex
    prime_term: complex
    semiprime_term: complex
    two_buchs_residual: float
    sieved_sum_residual: float
    passed: bool


def buchstab_check(
    inv: FieldInvariants,
    X: int,
    u: float,
    z: float,
    w: Callable[[FormalIdeal], complex] | np.ndarray,
    table: IdealTable | None = None,
    tol: float = 1e-9,
) -> BuchstabReport:
    """Evaluate both sides of the two-step Buchstab identity and the sieved-sum decomposition.

    ``S(C, I(z)) = S(C, I(u)) - sum_{u <= Np < z} S(C_p, I(u))
                  + sum_{Np >= u, Nq < z, p < q} S(C_pq, I(p))``.

    The decomposition of ``S(C, I(z))`` (valid when ``z^3 > X``) is returned
    as unit ideal + primes of norm ``>= z`` + products of two such primes.
    """
    if not (2 <= u <= z <= X):
        raise DomainError("need 2 <= u <= z <= X")
    if z**3 <= X:
        raise DomainError("the sieved-sum decomposition needs z^3 > X")
    table = table or IdealTable(inv, X)
    wv = w if isinstance(w, np.ndarray) else table.weights(w)
    thr_u, thr_z = _thr_norm(table, u), _thr_norm(table, z)
    lhs = complex(np.sum(wv[table.min_tag >= thr_z]))
    first = complex(np.sum(wv[table.min_tag >= thr_u]))
    mid_tags = list(range(thr_u, thr_z))
    middle = sum((_S_div(table, wv, [i], thr_u) for i in mid_tags), 0j)
    third = 0j
    for qi in mid_tags:  # N q < z, q > p >= I(u)
        for pi in range(thr_u, qi):
            third += _S_div(table, wv, [pi, qi], pi)
    rhs = first - middle + third
    sel = table.min_tag >= thr_z
    unit_term = complex(wv[0]) if table.norms[0] == 1 else 0j
    prime_term = complex(np.sum(wv[sel & (table.omega_big == 1)]))
    semi_term = complex(np.sum(wv[sel & (table.omega_big == 2)]))
    scale = float(np.sum(np.abs(wv))) or 1.0
    r1 = abs(lhs - rhs) / scale
    r2 = abs(lhs - (unit_term + prime_term + semi_term)) / scale
    return BuchstabReport(
        lhs, first, middle, third, rhs, unit_term, prime_term, semi_term, r1, r2, r1 <= tol and r2 <= tol
    )


@dataclass
class DFIParams:
    X: int
    A: float
    C: float
    B: float
    D: float
    u: float
    z: float
    y: float
    M: int
    asymptotic_choice: bool

    def levels(self) -> list[float]:
        return [self.y * (self.u / self.y) ** (m / self.M) for m in range(self.M + 1)]


def dfi_params(
    X: int,
    A: float = 1.0,
    C: float | None = None,
    u: float | None = None,
    z: float | None = None,
    y: float | None = None,
    M: int | None = None,
) -> DFIParams:
    """Parameters of the sieve decomposition.

    The asymptotic choices ``D = X^(1/2)(log X)^(-C)``, ``u = (log X)^C``,
    ``z = X^(1/2) exp(-(log log X)^2)``, ``y = X^(3/8)``, ``M = (log X)^(1+B/2)``
    with ``B = 2A + 4 <= C`` are used whenever they are consistent
    (``2 <= u <= y <= z`` and ``z^3 > X``). At desk scale they never are, and
    explicit overrides or the fallback ``u = X^(1/8)``, ``z = X^(0.45)`` apply.
    """
    B = 2 * A + 4
    C = B if C is None else C
    if C < B:
        raise DomainError("need C >= B = 2A + 4")
    L = math.log(X)
    D0 = X**0.5 * L ** (-C)
    u0 = L**C
    z0 = X**0.5 * math.exp(-(math.log(L) ** 2))
    y0 = X ** (3 / 8)
    M0 = max(1, math.ceil(L ** (1 + B / 2)))
    asymptotic_ok = 2 <= u0 <= y0 <= z0 and z0**3 > X
    if asymptotic_ok and u is None and z is None and y is None and M is None:
        return DFIParams(X, A, C, B, D0, u0, z0, y0, M0, True)
    uu = u if u is not None else (u0 if asymptotic_ok else X ** (1 / 8))
    zz = z if z is not None else (z0 if asymptotic_ok else X**0.45)
    yy = y if y is not None else y0
    if M is None:
        M = M0 if asymptotic_ok else max(1, math.ceil(math.log2(yy / uu)) + 1)
    return DFIParams(X, A, C, B, D0 if asymptotic_ok else X**0.5 / L, uu, zz, yy, int(M), False)


@dataclass
class DFIReport:
    params: DFIParams
    type_i_lhs: complex
    type_i_small: complex
    type_i_large: complex
    third_term: complex
    large_p_term: complex
    large_p_direct: complex
    rem: complex
    E: list[tuple[complex, complex, complex]]
    e1_trivial_bounds: list[float]
    residuals: dict[str, float]
    passed: bool


def dfi_decomposition(
    inv: FieldInvariants,
    X: int,
    w: Callable[[FormalIdeal], complex] | np.ndarray,
    params: DFIParams | None = None,
    table: IdealTable | None = None,
    tol: float = 1e-9,
) -> DFIReport:
    """Evaluate every term of the sieve decomposition of ``S(C, I(z))`` exactly.

    Checks (all exact identities):

    * Type I portion: ``S(C,I(u)) - sum_{u<=Np<z} S(C_p,I(u))`` equals
      ``sum mu(d) sum_{d|a} w(a)`` over squarefree ``d`` built from primes of norm
      ``< z`` with at most one prime of norm ``>= u`` (split at ``N d <= D``).
    * The third Buchstab term equals the large-``p`` term plus the remainder.
    * Large-``p`` term: for ``Np >= y`` only ``a = pq`` survives, since ``y^3 > X``.
    * Remainder ``sum_{u<=Np<y, Nq<z, p<q} S(C_pq, I(p)) = sum_m E1 + E2 + E3``,
      where ``E3`` ranges over ``r < p`` in the prime order with ``N r >= y_{m+1}``.
    """
    pr = params or dfi_params(X)
    if not (2 <= pr.u <= pr.y <= pr.z) or pr.z**3 <= X or pr.y**3 <= X:
        raise DomainError("need 2 <= u <= y <= z with y^3 > X")
    table = table or IdealTable(inv, X)
    wv = w if isinstance(w, np.ndarray) else table.weights(w)
    thr_u, thr_z, thr_y = (_thr_norm(table, t) for t in (pr.u, pr.z, pr.y))
    ntags = len(table.tags)

    # Type I portion, direct.
    first = complex(np.sum(wv[table.min_tag >= thr_u]))
    middle = sum((_S_div(table, wv, [i], thr_u) for i in range(thr_u, thr_z)), 0j)
    type_i_lhs = first - middle
    # Type I portion, Mobius expansion over admissible squarefree divisors.
    small = large = 0j
    for j, fac in enumerate(table.factors):
        if wv[j] == 0:
            continue
        ps = [i for i, _ in fac if i < thr_u]
        pm = [i for i, _ in fac if thr_u <= i < thr_z]
        norms_s = [table.tags[i].norm for i in ps]
        norms_m = [1] + [table.tags[i].norm for i in pm]
        for r in range(len(ps) + 1):
            for sub in itertools.combinations(range(len(ps)), r):
                ns = math.prod(norms_s[k] for k in sub)
                for mi, nm in enumerate(norms_m):
                    sign = (-1) ** (r + (1 if mi else 0))
                    if ns * nm <= pr.D:
                        small += sign * wv[j]
                    else:
                        large += sign * wv[j]

    # Third Buchstab term and its pieces.
    third = 0j
    for qi in range(thr_u, thr_z):
        for pi in range(thr_u, qi):
            third += _S_div(table, wv, [pi, qi], pi)
    large_p = 0j
    large_p_direct = 0j
    for qi in range(thr_y, thr_z):
        for pi in range(thr_y, qi):
            large_p += _S_div(table, wv, [pi, qi], pi)
            pos = table.index.get(tuple(sorted([(pi, 1), (qi, 1)])))
            if pos is not None:
                large_p_direct += wv[pos]
    rem = 0j
    for qi in range(thr_u, thr_z):
        for pi in range(thr_u, min(qi, thr_y)):
            rem += _S_div(table, wv, [pi, qi], pi)

    levels = pr.levels()
    E = []
    e1_bounds = []
    for m in range(pr.M):
        hi, lo = levels[m], levels[m + 1]
        t_lo, t_hi = _thr_norm(table, lo), _thr_norm(table, hi)
        e1 = e2 = e3 = 0j
        for qi in range(t_lo, min(t_hi, ntags)):
            for pi in range(t_lo, qi):
                e1 += _S_div(table, wv, [pi, qi], pi)
        for pi in range(t_lo, t_hi):
            for qi in range(t_hi, thr_z):
                e2 += _S_div(table, wv, [pi, qi], t_lo)
                for ri in range(t_lo, pi):
                    e3 -= _S_div(table, wv, [pi, qi, ri], ri)
        E.append((e1, e2, e3))
        recip = sum(1.0 / table.tags[i].norm for i in range(t_lo, t_hi))
        e1_bounds.append(float(X * recip**2 * (np.max(np.abs(wv)) if len(wv) else 0.0)))
    e_total = sum(sum(t) for t in E)
    scale = float(np.sum(np.abs(wv))) or 1.0
    residuals = {
        "type_i": abs(type_i_lhs - (small + large)) / scale,
        "third_split": abs(third - (large_p + rem)) / scale,
        "large_p": abs(large_p - large_p_direct) / scale,
        "levels": abs(rem - e_total) / scale,
    }
    passed = all(v <= tol for v in residuals.values())
    return DFIReport(
        pr, type_i_lhs, small, large, third, large_p, large_p_direct, rem, E, e1_bounds, residuals, passed
    )


def psi_prime_sum(inv: FieldInvariants, X: float, chi: int = 0) -> complex:
    """``sum_{N a <= X} Lambda_K(a) chi([a])`` for a class-group character ``chi``."""
    X = int(math.floor(X))
    if X > 10**8:
        raise CapacityError("psi sum limited to X <= 10^8")
    if X < 2:
        return 0j
    chars = inv.character_table
    if not 0 <= chi < len(chars):
        raise DomainError("character index out of range")
    values = chars[chi]
    ps = primes_up_to(X)
    kron = inv.chi_array(ps)
    logs = np.log(ps.astype(np.float64))
    root = math.isqrt(X)
    cut = int(np.searchsorted(ps, root, side="right"))
    principal = chi == 0 or inv.class_number == 1
    total = 0j
    for i in range(cut):
        p, kind, lg = int(ps[i]), int(kron[i]), float(logs[i])
        if kind == -1:
            total += 2 * lg * _power_count(p * p, X)
        elif principal:
            total += lg * _power_count(p, X) * (2 if kind == 1 else 1)
        else:
            kk = _power_count(p, X)
            for t in tags_above(inv, p):
                c = values[t.class_index]
                total += lg * sum(c**e for e in range(1, kk + 1))
    # Primes above sqrt(X): inert ones have norm > X, the rest occur to the first power only.
    k_rest, l_rest = kron[cut:], logs[cut:]
    if principal:
        total += math.fsum((2 * l_rest[k_rest == 1]).tolist()) + math.fsum(l_rest[k_rest == 0].tolist())
    else:
        for i in np.flatnonzero(k_rest >= 0) + cut:
            for t in tags_above(inv, int(ps[i])):
                total += float(logs[i]) * values[t.class_index]
    return complex(total)


def _power_count(q: int, X: int) -> int:
    """Number of ``k >= 1`` with ``q^k <= X``."""
    k, acc = 0, q
    while acc <= X:
        k += 1
        acc *= q
    return k
