"""The Cramer approximant to the primes and its truncated inclusion-exclusion split."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

from .arith import primes_up_to
from .errors import DomainError


@dataclass(frozen=True)
class CramerParams:
    """Sieving level ``Q`` (real), truncation length ``t`` (real) and the density normalizer."""

    Q: float
    t: float
    primes: tuple[int, ...]
    normalizer: float
    X: float | None = None

    @staticmethod
    def from_scale(X: float) -> "CramerParams":
        """``Q = exp((log X^(1/2))^(1/10))`` and ``t = 20 log log X``."""
        if X <= math.e:
            raise DomainError("X must exceed e")
        Q = math.exp((0.5 * math.log(X)) ** 0.1)
        t = 20 * math.log(math.log(X))
        return CramerParams.explicit(Q, t, X)

    @staticmethod
    def explicit(Q: float, t: float = math.inf, X: float | None = None) -> "CramerParams":
        ps = tuple(int(p) for p in primes_up_to(int(math.floor(Q))))
        norm = math.prod(Fraction(p, p - 1) for p in ps)
        return CramerParams(float(Q), float(t), ps, float(norm), X)

    @property
    def primorial(self) -> int:
        return math.prod(self.primes)


def _as_integer(x) -> int | None:
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Rational):
        return int(x) if x.denominator == 1 else None
    if isinstance(x, float):
        return int(x) if x.is_integer() else None
    raise DomainError(f"unsupported argument type {type(x).__name__}")


def omega_q(x: int, params: CramerParams) -> int:
    """Number of primes ``p <= Q`` dividing ``x`` (all of them when ``x = 0``)."""
    return sum(1 for p in params.primes if x % p == 0)


def lambda_cramer(x, params: CramerParams) -> float:
    """``normalizer * 1[gcd(x, p) = 1 for all p <= Q]``; zero off the integers."""
    xi = _as_integer(x)
    if xi is None:
        return 0.0
    return params.normalizer if omega_q(xi, params) == 0 else 0.0


def truncated_alternating(w: int, t: float) -> int:
    """``sum_{0 <= j <= min(w, t)} (-1)^j C(w, j)``."""
    m = min(w, math.floor(t)) if math.isfinite(t) else w
    if m < 0:
        return 0
    if m >= w:
        return 1 if w == 0 else 0
    # Partial alternating sums of binomials telescope to (-1)^m C(w-1, m).
    return (-1) ** m * math.comb(w - 1, m)


def lambda_sharp_flat(x: int, params: CramerParams) -> tuple[float, float]:
    """Split ``Lambda_Cramer = sharp + flat``; sharp keeps subsets ``S`` of primes ``<= Q`` with ``|S| <= t``.

    Only primes dividing ``x`` contribute to the subset sum, so the value
    depends on ``omega_q(x)`` alone.
    """
    xi = int(x)
    w = omega_q(xi, params)
    sharp = params.normalizer * truncated_alternating(w, params.t)
    return sharp, lambda_cramer(xi, params) - sharp


def lambda_sharp_literal(x: int, params: CramerParams) -> float:
    """Literal subset sum over all ``S`` with ``|S| <= t`` (exponential; test oracle)."""
    total = 0
    ps = params.primes
    for r in range(len(ps) + 1):
        if r > params.t:
            break
        for sub in itertools.combinations(ps, r):
            if x % math.prod(sub) == 0:
                total += (-1) ** r
    return params.normalizer * total


def omega_q_array(xs: np.ndarray, params: CramerParams) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.int64)
    out = np.zeros(xs.shape, dtype=np.int64)
    for p in params.primes:
        out += (xs % p == 0)
    return out


def lambda_cramer_array(xs: np.ndarray, params: CramerParams) -> np.ndarray:
    return np.where(omega_q_array(xs, params) == 0, params.normalizer, 0.0)


def lambda_sharp_array(xs: np.ndarray, params: CramerParams) -> np.ndarray:
    w = omega_q_array(xs, params)
    table = np.array(
        [truncated_alternating(k, params.t) for k in range(len(params.primes) + 1)], dtype=np.float64
    )
    return params.normalizer * table[w]


def mean_value(Y: int, params: CramerParams) -> float:
    """``(1/Y) sum_{0 < x <= Y} Lambda_Cramer(x)``."""
    total = 0.0
    step = 1 << 22
    for lo in range(1, Y + 1, step):
        xs = np.arange(lo, min(lo + step, Y + 1), dtype=np.int64)
        total += float(np.count_nonzero(omega_q_array(xs, params) == 0))
    return params.normalizer * total / Y


def flat_magnitude_report(X: float, params: CramerParams | None = None) -> dict:
    """``sum_{|x| <= X^(1/2)} |flat(x)|`` against the shape ``X^(1/2) (log X)^(-8)``."""
    params = params or CramerParams.from_scale(X)
    half = int(math.isqrt(int(X)))
    xs = np.arange(-half, half + 1, dtype=np.int64)
    flat = lambda_cramer_array(xs, params) - lambda_sharp_array(xs, params)
    total = float(np.sum(np.abs(flat)))
    shape = half * math.log(X) ** -8
    return {
        "X": X,
        "Q": params.Q,
        "t": params.t,
        "flat_l1": total,
        "shape": shape,
        "ratio": total / shape,
    }
