"""Gowers U^k norms, symmetric measures, Gowers-Peluse norms and the inequality suite around them."""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, reduce
from numbers import Rational
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CapacityError, DomainError, IdentityError

UK_SUPPORT_GUARD = {2: 1 << 22, 3: 1 << 14, 4: 1 << 10, 5: 1 << 8}
GP_BUDGET = 20_000_000
_FFT_BLOCK = 64
NEG_TOL = 1e-9


# ---------------------------------------------------------------- functions


def _integer_or_none(x) -> int | None:
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Rational):
        return int(x) if x.denominator == 1 else None
    if isinstance(x, float):
        return int(x) if x.is_integer() else None
    raise DomainError(f"unsupported argument type {type(x).__name__}")


@dataclass(frozen=True, eq=False)
class ArithFunction:
    """Finitely supported ``f: Z -> C`` stored densely on ``[lo, lo + len(values))``."""

    lo: int
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.complex128).ravel())

    @staticmethod
    def zero() -> "ArithFunction":
        return ArithFunction(0, np.zeros(0))

    @staticmethod
    def indicator(lo: int, hi: int) -> "ArithFunction":
        """``1_{[lo, hi]}`` (inclusive)."""
        return ArithFunction(lo, np.ones(max(0, hi - lo + 1)))

    @staticmethod
    def interval(N: int) -> "ArithFunction":
        """``1_[N]`` with ``[N] = {1, ..., N}``."""
        return ArithFunction.indicator(1, N)

    @staticmethod
    def from_callable(fn, lo: int, hi: int) -> "ArithFunction":
        return ArithFunction(lo, np.array([fn(x) for x in range(lo, hi + 1)], dtype=np.complex128))

    @property
    def hi(self) -> int:
        """Exclusive end of the window."""
        return self.lo + len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __call__(self, x) -> complex:
        xi = _integer_or_none(x)
        if xi is None or not self.lo <= xi < self.hi:
            return 0j
        return complex(self.values[xi - self.lo])

    def trimmed(self) -> "ArithFunction":
        nz = np.flatnonzero(self.values)
        if nz.size == 0:
            return ArithFunction.zero()
        return ArithFunction(self.lo + int(nz[0]), self.values[nz[0] : nz[-1] + 1])

    def support_span(self) -> int:
        return len(self.trimmed())

    def support_bounds(self) -> tuple[int, int] | None:
        t = self.trimmed()
        return None if len(t) == 0 else (t.lo, t.hi - 1)

    def conj(self) -> "ArithFunction":
        return ArithFunction(self.lo, np.conj(self.values))

    def shift(self, h: int) -> "ArithFunction":
        """``x -> f(x + h)``."""
        return ArithFunction(self.lo - int(h), self.values)

    def modulate(self, theta: float) -> "ArithFunction":
        xs = np.arange(self.lo, self.hi, dtype=np.float64)
        return ArithFunction(self.lo, self.values * np.exp(2j * np.pi * theta * xs))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self) else 0.0

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "re", "im"])
            for i, v in enumerate(self.values):
                if v != 0:
                    w.writerow([self.lo + i, repr(float(v.real)), repr(float(v.imag))])

    @staticmethod
    def from_csv(path: str | Path) -> "ArithFunction":
        rows = []
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r, None)
            if header != ["x", "re", "im"]:
                raise DomainError("ArithFunction CSV must start with header x,re,im")
            for row in r:
                if row:
                    rows.append((int(row[0]), complex(float(row[1]), float(row[2]))))
        if not rows:
            return ArithFunction.zero()
        lo = min(x for x, _ in rows)
        hi = max(x for x, _ in rows)
        vals = np.zeros(hi - lo + 1, dtype=np.complex128)
        for x, v in rows:
            vals[x - lo] += v
        return ArithFunction(lo, vals)


def difference(f: ArithFunction, h) -> ArithFunction:
    """``x -> f(x) conj(f(x + h))``; identically zero when ``h`` is not an integer."""
    hi_ = _integer_or_none(h)
    if hi_ is None:
        return ArithFunction.zero()
    lo = max(f.lo, f.lo - hi_)
    top = min(f.hi, f.hi - hi_)
    if top <= lo:
        return ArithFunction.zero()
    a = f.values[lo - f.lo : top - f.lo]
    b = f.values[lo + hi_ - f.lo : top + hi_ - f.lo]
    return ArithFunction(lo, a * np.conj(b))


def difference_pair(f: ArithFunction, h, hp) -> ArithFunction:
    """``x -> f(x + h) conj(f(x + h'))``."""
    hi_, hpi = _integer_or_none(h), _integer_or_none(hp)
    if hi_ is None or hpi is None:
        return ArithFunction.zero()
    return difference(f.shift(hi_), hpi - hi_)


# ---------------------------------------------------------------- U^k norms


def _u2_rows(rows: np.ndarray) -> np.ndarray:
    """``sum_t |sum_x g(x) conj g(x+t)|^2`` for each row ``g``, via Parseval: ``(1/n) sum |G|^4``."""
    L = rows.shape[1]
    n = 1 << max(1, (2 * L - 1).bit_length())
    F = np.fft.fft(rows, n=n, axis=1)
    p = (F.real**2 + F.imag**2) ** 2
    return p.sum(axis=1) / n


def _diff_rows(v: np.ndarray, hs: np.ndarray) -> np.ndarray:
    """Rows ``Delta_h v`` for ``h >= 0`` in ``hs``, left aligned and zero padded to ``len(v)``."""
    L = len(v)
    out = np.zeros((len(hs), L), dtype=np.complex128)
    for r, h in enumerate(hs):
        out[r, : L - h] = v[: L - h] * np.conj(v[h:])
    return out


def _uk_values(v: np.ndarray, k: int, threads: int = 1) -> float:
    L = len(v)
    if L == 0:
        return 0.0
    if k == 2:
        return float(_u2_rows(v[None, :])[0])
    hs = np.arange(L)
    blocks = [hs[i : i + _FFT_BLOCK] for i in range(0, L, _FFT_BLOCK)]

    def block_sum(b: np.ndarray) -> float:
        if k == 3:
            rows = _diff_rows(v, b)
            vals = _u2_rows(rows)
        else:
            vals = np.array([_uk_values(np.trim_zeros(_diff_rows(v, [h])[0], "b"), k - 1) for h in b])
        w = np.where(b == 0, 1.0, 2.0)  # Delta_{-h} f is a conjugated shift of Delta_h f
        return math.fsum((w * vals).tolist())

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(block_sum, blocks))
    else:
        parts = [block_sum(b) for b in blocks]
    return math.fsum(parts)


def uk_norm_power(f: ArithFunction, k: int, threads: int = 1) -> float:
    """``||f||_{U^k(Z)}^{2^k}`` by ``sum_h ||Delta_h f||^{2^(k-1)}_{U^(k-1)}`` down to an FFT-evaluated ``U^2`` base."""
    if k not in UK_SUPPORT_GUARD:
        raise DomainError("k must lie in [2, 5]")
    g = f.trimmed()
    if len(g) > UK_SUPPORT_GUARD[k]:
        raise CapacityError(f"support {len(g)} exceeds U^{k} guard {UK_SUPPORT_GUARD[k]}")
    val = _uk_values(g.values, k, threads)
    scale = float(np.sum(np.abs(g.values))) ** (2**k) if len(g) else 0.0
    if val < 0:
        if val < -NEG_TOL * max(scale, 1.0):
            raise IdentityError(f"U^{k} power {val} is negative beyond rounding")
        val = 0.0
    return val


@lru_cache(maxsize=256)
def _interval_power(N: int, k: int) -> float:
    return uk_norm_power(ArithFunction.interval(N), k)


def uk_norm_normalized(f: ArithFunction, k: int, N: int, threads: int = 1) -> float:
    """``||f||_{U^k[N]} = ||f||_{U^k(Z)} / ||1_[N]||_{U^k(Z)}``."""
    if N < 1:
        raise DomainError("N must be positive")
    return (uk_norm_power(f, k, threads) / _interval_power(int(N), k)) ** (1.0 / 2**k)


# ---------------------------------------------------------------- measures


@dataclass(frozen=True, eq=False)
class SymmetricMeasure:
    """Symmetric probability measure on ``(1/den) Z``; ``masses[i]`` sits at ``(i - radius) / den``."""

    den: int
    radius: int
    masses: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=np.float64).ravel()
        object.__setattr__(self, "masses", m)
        if self.den < 1 or self.den & (self.den - 1):
            raise DomainError("denominator must be a power of two")
        if len(m) != 2 * self.radius + 1:
            raise DomainError("mass array length must be 2*radius+1")
        if np.any(m < 0):
            raise DomainError("masses must be nonnegative")
        if not np.array_equal(m, m[::-1]):
            raise DomainError("measure is not symmetric")
        if abs(math.fsum(m.tolist()) - 1.0) > 1e-12:
            raise DomainError("masses must sum to 1")

    @staticmethod
    def from_atoms(atoms: dict, den: int | None = None) -> "SymmetricMeasure":
        """Build from ``{offset: mass}`` with integer or rational offsets."""
        if not atoms:
            raise DomainError("empty measure")
        fr = {Fraction(k): float(v) for k, v in atoms.items()}
        if den is None:
            den = 1
            for q in fr:
                while (q * den).denominator != 1:
                    den *= 2
                    if den > 1 << 20:
                        raise DomainError("offsets must have power-of-two denominators")
        R = max(abs(int(q * den)) for q in fr)
        m = np.zeros(2 * R + 1)
        for q, v in fr.items():
            s = q * den
            if s.denominator != 1:
                raise DomainError(f"offset {q} not on the 1/{den} grid")
            m[int(s) + R] += v
        return SymmetricMeasure(den, R, m)

    @staticmethod
    def delta0() -> "SymmetricMeasure":
        return SymmetricMeasure(1, 0, np.ones(1))

    @staticmethod
    def uniform_interval(N: int) -> "SymmetricMeasure":
        """Uniform on ``[-N, N]``."""
        return SymmetricMeasure(1, N, np.full(2 * N + 1, 1.0 / (2 * N + 1)))

    @property
    def offsets(self) -> np.ndarray:
        """Scaled integer offsets ``den * h`` of every grid slot."""
        return np.arange(-self.radius, self.radius + 1, dtype=np.int64)

    def atoms(self) -> list[tuple[Fraction, float]]:
        nz = np.flatnonzero(self.masses)
        return [(Fraction(int(i) - self.radius, self.den), float(self.masses[i])) for i in nz]

    def support_size(self) -> int:
        return int(np.count_nonzero(self.masses))

    def max_abs_offset(self) -> Fraction:
        nz = np.flatnonzero(self.masses)
        return Fraction(int(max(abs(nz[0] - self.radius), abs(nz[-1] - self.radius))), self.den)

    def is_integral(self) -> bool:
        return all(q.denominator == 1 for q, _ in self.atoms())

    def refined(self, den: int) -> "SymmetricMeasure":
        """Same measure on the finer grid ``(1/den) Z``."""
        if den % self.den:
            raise DomainError("target denominator must be a multiple")
        c = den // self.den
        R = self.radius * c
        m = np.zeros(2 * R + 1)
        m[::c] = self.masses
        return SymmetricMeasure(den, R, m)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["offset", "mass"])
            for q, v in self.atoms():
                w.writerow([str(q), repr(v)])

    @staticmethod
    def from_csv(path: str | Path) -> "SymmetricMeasure":
        atoms: dict = {}
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            if next(r, None) != ["offset", "mass"]:
                raise DomainError("measure CSV must start with header offset,mass")
            for row in r:
                if row:
                    q = Fraction(row[0])
                    atoms[q] = atoms.get(q, 0.0) + float(row[1])
        return SymmetricMeasure.from_atoms(atoms)


def _common_den(*mus: SymmetricMeasure) -> int:
    return reduce(math.lcm, (m.den for m in mus), 1)


def uniform_multiset(S: Sequence) -> SymmetricMeasure:
    """Uniform measure on a multiset of offsets (must be symmetric as a multiset)."""
    if len(S) == 0:
        raise DomainError("empty multiset")
    atoms: dict = {}
    for s in S:
        q = Fraction(s)
        atoms[q] = atoms.get(q, 0) + 1
    return SymmetricMeasure.from_atoms({q: c / len(S) for q, c in atoms.items()})


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m[::-1])


def convolve(mu: SymmetricMeasure, nu: SymmetricMeasure) -> SymmetricMeasure:
    """``mu * nu`` on the common grid (dense linear convolution)."""
    d = _common_den(mu, nu)
    a, b = mu.refined(d), nu.refined(d)
    m = np.convolve(a.masses, b.masses)
    return SymmetricMeasure(d, a.radius + b.radius, _symmetrize(m))


def convolve_direct(mu: SymmetricMeasure, nu: SymmetricMeasure) -> SymmetricMeasure:
    """``mu * nu`` by summing over pairs of atoms."""
    out: dict = {}
    for p, u in mu.atoms():
        for q, v in nu.atoms():
            out[p + q] = out.get(p + q, 0.0) + u * v
    return SymmetricMeasure.from_atoms(out, _common_den(mu, nu))


def conv_power(mu: SymmetricMeasure, m: int) -> SymmetricMeasure:
    if m < 0:
        raise DomainError("power must be nonnegative")
    out = SymmetricMeasure.delta0()
    for _ in range(m):
        out = convolve(out, mu)
    return out


def l2_norm_sq(mu: SymmetricMeasure) -> float:
    return math.fsum((mu.masses**2).tolist())


# ---------------------------------------------------------------- Gowers-Peluse


def _on_grid(f: ArithFunction, den: int) -> tuple[int, np.ndarray]:
    """``f`` placed on the fine grid: index ``X`` holds ``f(X / den)``."""
    g = f.trimmed()
    if len(g) == 0:
        return 0, np.zeros(1, dtype=np.complex128)
    arr = np.zeros((len(g) - 1) * den + 1, dtype=np.complex128)
    arr[::den] = g.values
    return g.lo * den, arr


def _shifted(lo: int, arr: np.ndarray, H: int, start: int, length: int) -> np.ndarray:
    """Values of ``X -> F(X + H)`` on ``[start, start + length)``."""
    out = np.zeros(length, dtype=np.complex128)
    a = max(start + H, lo)
    b = min(start + H + length, lo + len(arr))
    if b > a:
        out[a - start - H : b - start - H] = arr[a - lo : b - lo]
    return out


def _avg_shift(lo: int, arr: np.ndarray, mu: SymmetricMeasure) -> tuple[int, np.ndarray]:
    """``X -> sum_H mu(H) F(X + H)`` (equal to convolution by symmetry)."""
    return lo - mu.radius, np.convolve(arr, mu.masses[::-1])


def _pair_level_pairs(mu: SymmetricMeasure):
    nz = np.flatnonzero(mu.masses)
    for i in nz:
        for j in nz:
            yield int(i) - mu.radius, int(j) - mu.radius, float(mu.masses[i] * mu.masses[j])


def _gp_pair_engine(
    fs: list[tuple[int, np.ndarray]],
    den: int,
    mus: list[SymmetricMeasure],
    N: int,
    rng: np.random.Generator | None = None,
    samples: int = 0,
) -> tuple[complex, float | None]:
    """Pair-form inner product on the fine grid. ``fs`` is indexed by ``omega`` read as a binary number
    with the first coordinate most significant. Returns (value, standard error if sampled)."""
    k = len(mus)
    if k == 0:
        lo, arr = fs[0]
        first = (-lo) % den
        return complex(np.sum(arr[first::den])) / N, None

    def last_level(g: list[tuple[int, np.ndarray]]) -> complex:
        (l0, a0), (l1, a1) = _avg_shift(*g[0], mus[-1]), _avg_shift(*g[1], mus[-1])
        lo = min(l0, l1)
        length = max(l0 + len(a0), l1 + len(a1)) - lo
        b0 = _shifted(l0, a0, 0, lo, length)
        b1 = _shifted(l1, a1, 0, lo, length)
        first = (-lo) % den
        return complex(np.sum(b0[first::den] * np.conj(b1[first::den])))

    def step(g: list[tuple[int, np.ndarray]], mu: SymmetricMeasure, H: int, Hp: int):
        half = len(g) // 2
        out = []
        for w in range(half):
            l0, a0 = g[w]
            l1, a1 = g[half + w]
            lo = max(l0 - H, l1 - Hp)
            hi = min(l0 + len(a0) - H, l1 + len(a1) - Hp)
            if hi <= lo:
                out.append((0, np.zeros(1, dtype=np.complex128)))
                continue
            p = _shifted(l0, a0, H, lo, hi - lo) * np.conj(_shifted(l1, a1, Hp, lo, hi - lo))
            out.append((lo, p))
        return out

    if rng is None:
        def rec(g, level) -> complex:
            if level == k - 1:
                return last_level(g)
            acc = 0j
            for H, Hp, w in _pair_level_pairs(mus[level]):
                acc += w * rec(step(g, mus[level], H, Hp), level + 1)
            return acc

        return rec(fs, 0) / N, None

    # Monte Carlo over the outer pairs; the innermost level stays exact.
    vals = np.empty(samples, dtype=np.complex128)
    for s in range(samples):
        g = fs
        for level in range(k - 1):
            mu = mus[level]
            p = mu.masses / mu.masses.sum()
            H, Hp = (rng.choice(len(p), size=2, p=p) - mu.radius).tolist()
            g = step(g, mu, int(H), int(Hp))
        vals[s] = last_level(g)
    se = float(np.std(vals.real, ddof=1) / math.sqrt(samples)) / N if samples > 1 else None
    return complex(vals.mean()) / N, se


def _class_diff_measures(mu: SymmetricMeasure) -> dict[int, tuple[int, np.ndarray]]:
    """For each residue class ``c`` of grid offsets mod ``den``: the law of ``h' - h`` in integer units,
    with ``h, h'`` drawn independently from ``mu`` restricted to the class (mass not renormalized).
    Values are returned as ``(q, w)`` with ``w[d + q]`` the mass at difference ``d``."""
    out = {}
    D = mu.den
    L = len(mu.masses)
    slots = np.arange(L) - mu.radius
    for c in range(D):
        sub = np.where((slots % D == c) & (mu.masses > 0), mu.masses, 0.0)
        if not sub.any():
            continue
        corr = np.correlate(sub, sub, mode="full")  # corr[m]: lag m - (L - 1)
        q = (L - 1) // D
        out[c] = (q, corr[(L - 1) - D * q :: D][: 2 * q + 1])
    return out


def _autocorr(v: np.ndarray) -> np.ndarray:
    """``A[t + L - 1] = sum_x v(x) conj v(x + t)`` for ``|t| < L``."""
    L = len(v)
    if L <= 64:
        return np.conj(np.correlate(v, v, mode="full"))
    n = 1 << (2 * L - 1).bit_length()
    F = np.fft.fft(v, n)
    c = np.fft.ifft(F * np.conj(F))  # c[t] = sum_x v(x+t) conj v(x)
    return np.conj(np.concatenate([c[n - (L - 1) :], c[:L]]))


def _gp_conv_engine(f: ArithFunction, mus: list[SymmetricMeasure], N: int) -> complex:
    """Single-difference form: ``(1/N) sum_x sum_d prod_i nu_i(d_i) Delta_{d_1}...Delta_{d_k} f(x)``
    where ``nu_i`` is the law of ``h_i' - h_i``, split by residue class so the total shift stays integral."""
    g = f.trimmed()
    k = len(mus)
    if len(g) == 0:
        return 0j
    if k == 0:
        return complex(np.sum(g.values)) / N
    D = _common_den(*mus)
    fine = [m.refined(D) for m in mus]
    classes = [_class_diff_measures(m) for m in fine]

    def rec(v: np.ndarray, level: int, cls: list[tuple[int, np.ndarray]]) -> complex:
        R, w = cls[level]
        if level == k - 1:
            A = _autocorr(v)
            L = len(v)
            acc = 0j
            for j in np.flatnonzero(w):
                t = int(j) - R
                if abs(t) < L:
                    acc += w[j] * A[t + L - 1]
            return acc
        acc = 0j
        for j in np.flatnonzero(w):
            t = int(j) - R
            dv = difference(ArithFunction(0, v), t).values
            if len(dv):
                acc += w[j] * rec(dv, level + 1, cls)
        return acc

    total = 0j
    for combo in itertools.product(*[sorted(c.items()) for c in classes]):
        if sum(c for c, _ in combo) % D:
            continue
        total += rec(g.values, 0, [v for _, v in combo])
    return total / N


def _gp_cost(f: ArithFunction, mus: Sequence[SymmetricMeasure]) -> float:
    c = float(max(1, f.support_span()))
    for m in mus[:-1]:
        c *= m.support_size() ** 2
    if mus:
        c *= max(1, mus[-1].support_size())
    return c


@dataclass(frozen=True)
class GPEvaluation:
    pair_value: float
    conv_value: float | None
    rel_diff: float | None
    sampled: bool
    stderr: float | None


def _clamp(val: complex, scale: float, what: str) -> float:
    if abs(val.imag) > 1e-8 * max(scale, 1.0):
        raise IdentityError(f"{what} has imaginary part {val.imag}")
    r = val.real
    if r < 0:
        if r < -NEG_TOL * max(scale, 1.0):
            raise IdentityError(f"{what} is negative ({r}) beyond rounding")
        r = 0.0
    return r


def gp_evaluate(
    f: ArithFunction,
    N: int,
    measures: Sequence[SymmetricMeasure],
    *,
    budget: float = GP_BUDGET,
    sampling: bool = False,
    seed: int | None = None,
    samples: int = 2000,
    tol: float = 1e-9,
) -> GPEvaluation:
    """Pair form and single-difference form of ``||f||^{2^k}_{U_GP[N; measures]}``; raises if they disagree."""
    mus = list(measures)
    if N < 1:
        raise DomainError("N must be positive")
    if not mus:
        raise DomainError("need at least one measure")
    D = _common_den(*mus)
    fs = [_on_grid(f, D)] * (2 ** len(mus))
    fine = [m.refined(D) for m in mus]
    scale = max(f.sup_norm(), 1e-300) ** (2 ** len(mus)) * max(1, f.support_span()) / N
    if _gp_cost(f, mus) > budget:
        if not sampling:
            raise CapacityError("Gowers-Peluse evaluation exceeds budget; enable sampling with a seed")
        if seed is None:
            raise DomainError("sampling mode requires an explicit seed")
        val, se = _gp_pair_engine(fs, D, fine, N, np.random.default_rng(seed), samples)
        return GPEvaluation(max(val.real, 0.0), None, None, True, se)
    pv, _ = _gp_pair_engine(fs, D, fine, N)
    cv = _gp_conv_engine(f, mus, N)
    p = _clamp(pv, scale, "pair form")
    c = _clamp(cv, scale, "single-difference form")
    rel = abs(p - c) / max(abs(p), abs(c), 1e-300) if max(abs(p), abs(c)) > 1e-300 else 0.0
    if abs(p - c) > tol * max(abs(p), abs(c)) and abs(p - c) > 1e-12 * scale:
        raise IdentityError(f"pair form {p} and single-difference form {c} disagree")
    return GPEvaluation(p, c, rel, False, None)


def gp_norm_power(f: ArithFunction, N: int, measures: Sequence[SymmetricMeasure], **kw) -> float:
    """``||f||^{2^k}_{U_GP[N; mu_1..mu_k]}``."""
    return gp_evaluate(f, N, measures, **kw).pair_value


def gp_inner_product(
    functions: Sequence[ArithFunction],
    N: int,
    measures: Sequence[SymmetricMeasure],
    *,
    budget: float = GP_BUDGET,
) -> tuple[complex, float, bool]:
    """The inner product over ``{0,1}^k`` and the product of the individual norms; the bool is the GCS check."""
    mus = list(measures)
    k = len(mus)
    if len(functions) != 2**k:
        raise DomainError("need 2^k functions")
    worst = max((_gp_cost(g, mus) for g in functions), default=0.0)
    if worst > budget:
        raise CapacityError("Gowers-Peluse inner product exceeds budget")
    sups = [g.sup_norm() for g in functions]
    if min(sups) == 0:
        return 0j, 0.0, True
    # Both sides are homogeneous in each function, so compare sup-normalized copies.
    unit = [ArithFunction(g.lo, g.values / s) for g, s in zip(functions, sups)]
    D = _common_den(*mus) if mus else 1
    fine = [m.refined(D) for m in mus]
    inner, _ = _gp_pair_engine([_on_grid(g, D) for g in unit], D, fine, N)
    norms = [gp_norm_power(g, N, mus, budget=budget) ** (1.0 / 2**k) for g in unit]
    ok = abs(inner) <= math.prod(norms) + 1e-9 * max(max(1, g.support_span()) for g in unit) / N
    c = math.prod(sups)
    return complex(inner) * c, math.prod(norms) * c, ok


def _check_bounded_support(f: ArithFunction, N: int, measures: Sequence[SymmetricMeasure]) -> None:
    if f.sup_norm() > 1 + 1e-12:
        raise DomainError("f must be 1-bounded")
    b = f.support_bounds()
    if b is not None and (b[0] < -N or b[1] > N):
        raise DomainError("f must be supported on [-N, N]")
    for m in measures:
        if m.max_abs_offset() > N:
            raise DomainError("measures must be supported on [-N, N]")


def gp_monotonicity_check(
    f: ArithFunction, N: int, measures: Sequence[SymmetricMeasure], k: int | None = None
) -> tuple[float, float, bool]:
    """``||f||^{2^k}_{[mu_1..mu_k]} >= (2k+3)^{-1} (||f||^{2^(k-1)}_{[mu_1..mu_(k-1)]})^2``."""
    mus = list(measures)
    k = len(mus) if k is None else k
    if k < 1 or k > len(mus):
        raise DomainError("need 1 <= k <= number of measures")
    _check_bounded_support(f, N, mus[:k])
    if not mus[k - 1].is_integral():
        # a half-integer outer shift moves the x-sum off Z and the bound no longer follows
        raise DomainError("the added measure must live on the integers")
    lhs = gp_norm_power(f, N, mus[:k])
    if k == 1:
        prev = abs(complex(np.sum(f.values))) / N
    else:
        prev = gp_norm_power(f, N, mus[: k - 1])
    rhs = prev**2 / (2 * k + 3)
    return lhs, rhs, lhs >= rhs - 1e-12 * max(1.0, rhs)


@dataclass(frozen=True)
class Lemma52Report:
    delta: float
    u2_power: float
    weighted_corr: float
    mu2_l2: float
    bound: float
    passed: bool


def lemma52_chain(f: ArithFunction, N: int, mu: SymmetricMeasure, T: float) -> Lemma52Report:
    """The Cauchy-Schwarz chain turning a large one-measure Gowers-Peluse norm into ``U^2`` mass:

    ``sum_t (mu*mu)(t) |A(t)| >= delta N`` and
    ``sum_t |A(t)|^2 >= (delta N)^2 / ||mu*mu||_2^2 >= delta^2 N^3 / T``,
    where ``A`` is the autocorrelation of ``f`` and ``delta`` the Gowers-Peluse square.
    """
    _check_bounded_support(f, N, [mu])
    if not mu.is_integral():
        raise DomainError("measure must live on the integers")
    if l2_norm_sq(mu) > T / N * (1 + 1e-12):
        raise DomainError("||mu||_2^2 exceeds T/N")
    delta = gp_norm_power(f, N, [mu])
    g = f.trimmed()
    u2 = uk_norm_power(g, 2) if len(g) else 0.0
    mu2 = convolve(mu, mu)
    A = np.abs(_autocorr(g.values)) if len(g) else np.zeros(1)
    L = max(len(g), 1)
    corr = 0.0
    for q, m in mu2.atoms():
        t = int(q)
        if abs(t) < L and len(g):
            corr += m * A[t + L - 1]
    mu2l2 = l2_norm_sq(mu2)
    bound = delta**2 * N**3 / T
    eps = 1e-9 * max(1.0, u2)
    ok = (
        corr >= delta * N - 1e-9 * max(1.0, delta * N)
        and u2 >= (delta * N) ** 2 / mu2l2 - eps
        and (delta * N) ** 2 / mu2l2 >= bound - eps
    )
    return Lemma52Report(delta, u2, corr, mu2l2, bound, bool(ok))


def lemma54_experiment(
    f: ArithFunction,
    N: int,
    a,
    b,
    M: int,
    I1: tuple[int, int],
    I2: tuple[int, int],
    eta: float,
) -> dict:
    """``|sum_{x in I1, y in I2} f(a x + b y)|`` against ``eta N^2 / Q^2`` alongside ``||f||_{U^2[N]}``."""
    a, b = Fraction(a), Fraction(b)
    if (a * M).denominator != 1 or (b * M).denominator != 1 or a == 0 or b == 0:
        raise DomainError("a, b must be nonzero elements of (1/M)Z")
    Q = max(abs(a), abs(b))
    d = math.gcd(int(a * M), int(b * M))
    span = N / (eta * float(Q))
    constraints = {
        "a_vs_b": abs(a) >= eta * abs(b),
        "b_vs_a": abs(b) >= eta * abs(a),
        "gcd_bound": d <= 1 / eta,
        "scale": N >= float(Q) ** 2 / eta**3,
        "intervals": all(-span <= lo <= hi <= span for lo, hi in (I1, I2)),
    }
    xs = np.arange(I1[0], I1[1] + 1, dtype=np.int64)
    ys = np.arange(I2[0], I2[1] + 1, dtype=np.int64)
    num = int(a * M) * xs[:, None] + int(b * M) * ys[None, :]
    integral = num % M == 0
    pts = num[integral] // M
    g = f.trimmed()
    total = 0j
    if len(g) and pts.size:
        inside = (pts >= g.lo) & (pts < g.hi)
        total = complex(np.sum(g.values[pts[inside] - g.lo]))
    threshold = eta * N**2 / float(Q) ** 2
    return {
        "constraints": constraints,
        "constraints_ok": all(constraints.values()),
        "hypothesis_value": abs(total),
        "threshold": threshold,
        "hypothesis_holds": abs(total) >= threshold,
        "u2_normalized": uk_norm_normalized(f, 2, N) if len(g) else 0.0,
    }


# ---------------------------------------------------------------- graph systems


Edge = tuple[int, int]


def _edge(v: int, w: int) -> Edge:
    if v == w:
        raise DomainError("loops are not edges")
    return (v, w) if v < w else (w, v)


@dataclass(frozen=True)
class GraphSystem:
    """Per colour ``j``: a vertex set ``V_j`` and an edge set ``E_j`` of unordered pairs, all inside ``[t]``."""

    t: int
    V: tuple[frozenset, ...]
    E: tuple[frozenset, ...]

    def __post_init__(self):
        if len(self.V) != len(self.E):
            raise DomainError("V and E must have one entry per colour")
        for Vj, Ej in zip(self.V, self.E):
            if any(not 1 <= v <= self.t for v in Vj):
                raise DomainError("vertex outside [t]")
            for v, w in Ej:
                if not (1 <= v < w <= self.t):
                    raise DomainError("edge outside [t] or not normalized")

    @property
    def s(self) -> int:
        return len(self.V)

    @staticmethod
    def vertex_complete(s: int) -> "GraphSystem":
        return GraphSystem(1, tuple(frozenset({1}) for _ in range(s)), tuple(frozenset() for _ in range(s)))

    @staticmethod
    def edge_complete(s: int, t: int) -> "GraphSystem":
        edges = frozenset(itertools.combinations(range(1, t + 1), 2))
        return GraphSystem(t, tuple(frozenset() for _ in range(s)), tuple(edges for _ in range(s)))

    def enlarge(self, j: int, edges) -> "GraphSystem":
        E = list(self.E)
        E[j - 1] = E[j - 1] | frozenset(_edge(*e) for e in edges)
        return GraphSystem(self.t, self.V, tuple(E))

    def is_enlargement_of(self, other: "GraphSystem") -> bool:
        return (
            self.t == other.t
            and self.V == other.V
            and all(a >= b for a, b in zip(self.E, other.E))
        )

    def measure_count(self) -> int:
        return sum(len(v) + len(e) for v, e in zip(self.V, self.E))


def graph_duplicate(G: GraphSystem, k: int, u: int) -> GraphSystem:
    """Duplicate colour ``k``'s vertex ``u``: new vertex ``t+1`` copies ``u`` in the other colours,
    every edge at ``u`` gains a twin at ``t+1``, and ``{u, t+1}`` joins ``E_k``."""
    if not 1 <= k <= G.s:
        raise DomainError("colour out of range")
    if u not in G.V[k - 1]:
        raise DomainError(f"vertex {u} is not in V_{k}")
    new = G.t + 1
    V, E = [], []
    for j in range(1, G.s + 1):
        Vj = G.V[j - 1]
        if j == k:
            V.append(Vj - {u})
        else:
            V.append((Vj - {u}) | ({u, new} if u in Vj else set()))
        Ej = set()
        for v, w in G.E[j - 1]:
            Ej.add((v, w))
            if u in (v, w):
                other = w if v == u else v
                Ej.add(_edge(other, new))
        if j == k:
            Ej.add(_edge(u, new))
        E.append(frozenset(Ej))
    return GraphSystem(new, tuple(frozenset(v) for v in V), tuple(E))


def schedule_graph(s: int, t: int) -> GraphSystem:
    """Closed form of the ``t``-th system on the path from vertex-complete to edge-complete."""
    if not 1 <= t <= 2**s:
        raise DomainError("t must lie in [1, 2^s]")
    r = t.bit_length() - 1
    ell = t - 2**r
    if t == 2**s:
        return GraphSystem.edge_complete(s, t)
    V, E = [], []
    full = frozenset(itertools.combinations(range(1, t + 1), 2))
    cut = 2**r - ell
    for j in range(1, s + 1):
        if j > s - r:
            V.append(frozenset())
            E.append(full)
        elif j == s - r:
            V.append(frozenset(range(1, cut + 1)))
            E.append(frozenset(itertools.combinations(range(cut + 1, t + 1), 2)))
        else:
            V.append(frozenset(range(1, t + 1)))
            E.append(frozenset())
    return GraphSystem(t, tuple(V), tuple(E))


def concatenation_schedule(s: int) -> list[tuple[GraphSystem, tuple[int, int] | None]]:
    """Systems ``t = 1..2^s`` built step by step: duplicate along ``(s - r, 2^r - ell)``, then enlarge.

    Duplicating at an endpoint of a complete colour leaves out the edge
    ``{u, t+1}`` there, so the enlargement may touch every colour; each step
    is checked to be a genuine enlargement of the duplicate.
    """
    out = [(GraphSystem.vertex_complete(s), None)]
    G = out[0][0]
    for t in range(1, 2**s):
        r = t.bit_length() - 1
        ell = t - 2**r
        k, u = s - r, 2**r - ell
        D = graph_duplicate(G, k, u)
        G = schedule_graph(s, t + 1)
        if not G.is_enlargement_of(D):
            raise IdentityError(f"step {t} -> {t + 1} is not duplication plus enlargement")
        out.append((G, (k, u)))
    return out


def graph_measures(
    G: GraphSystem, families: Sequence[Sequence[SymmetricMeasure]], indices: Sequence[int]
) -> list[SymmetricMeasure]:
    """``mu_{j, i_v}`` for ``v in V_j`` and ``mu_{j, i_v} * mu_{j, i_w}`` for ``{v, w} in E_j``."""
    if len(indices) != G.t:
        raise DomainError("need one index per vertex")
    out = []
    for j in range(G.s):
        for v in sorted(G.V[j]):
            out.append(families[indices[v - 1]][j])
        for v, w in sorted(G.E[j]):
            out.append(convolve(families[indices[v - 1]][j], families[indices[w - 1]][j]))
    return out


def _same_measures(a: Sequence[SymmetricMeasure], b: Sequence[SymmetricMeasure]) -> bool:
    def key(m: SymmetricMeasure):
        return (m.den, m.radius, m.masses.tobytes())

    return sorted(map(key, a)) == sorted(map(key, b))


def concat_experiment(
    f: ArithFunction,
    N: int,
    families: Sequence[Sequence[SymmetricMeasure]],
    *,
    budget: float = GP_BUDGET,
) -> dict:
    """One duplication step on a family ``(nu_1i, ..., nu_ki)_{i in I}``.

    Reports ``E_i ||f||`` over the input and ``E_{i,i'} ||f||`` over
    ``(nu_1i..nu_(k-1)i, nu_1i'..nu_(k-1)i', nu_ki * nu_ki')``; checks that the
    duplicated graph system reproduces exactly those measures, and that every
    evaluation passes the pair-form versus single-difference identity.
    """
    I = len(families)
    if I == 0:
        raise DomainError("empty family")
    k = len(families[0])
    if any(len(fam) != k for fam in families):
        raise DomainError("every family member needs k measures")
    identity_checks = 0
    lhs_terms = []
    for fam in families:
        e = gp_evaluate(f, N, fam, budget=budget)
        identity_checks += 1
        lhs_terms.append(e.pair_value)
    G1 = GraphSystem.vertex_complete(k)
    G2 = graph_duplicate(G1, k, 1)
    rhs_terms = []
    graph_matches = True
    for i in range(I):
        for ip in range(I):
            direct = (
                list(families[i][: k - 1])
                + list(families[ip][: k - 1])
                + [convolve(families[i][k - 1], families[ip][k - 1])]
            )
            via_graph = graph_measures(G2, families, (i, ip))
            graph_matches &= _same_measures(direct, via_graph)
            e = gp_evaluate(f, N, direct, budget=budget)
            identity_checks += 1
            rhs_terms.append(e.pair_value)
    return {
        "I": I,
        "k": k,
        "lhs_mean": math.fsum(lhs_terms) / I,
        "rhs_mean": math.fsum(rhs_terms) / (I * I),
        "graph_matches_direct": bool(graph_matches),
        "identity_checks_passed": identity_checks,
        "level_after": G2.t,
    }
