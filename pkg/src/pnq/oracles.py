"""Slow reference evaluations by direct summation, shared by the acceptance suite and the tests."""

from __future__ import annotations

import numpy as np


def _padded(v: np.ndarray, pad: int) -> np.ndarray:
    out = np.zeros(len(v) + 2 * pad, dtype=np.complex128)
    out[pad : pad + len(v)] = v
    return out


def u2_literal(v: np.ndarray) -> complex:
    """``sum_{x, h1, h2} f(x) conj f(x+h1) conj f(x+h2) f(x+h1+h2)`` for ``f`` stored on ``[0, L)``.

    Written with ``b = x + h1``, ``c = x + h2`` free over the support.
    """
    v = np.asarray(v, dtype=np.complex128)
    L = len(v)
    if L == 0:
        return 0j
    P = _padded(v, 2 * L)
    idx = np.arange(L)
    bc = idx[:, None] + idx[None, :] + 2 * L
    cb = np.conj(v)[:, None] * np.conj(v)[None, :]
    return complex(sum(v[a] * np.sum(cb * P[bc - a]) for a in range(L)))


def u3_literal(v: np.ndarray) -> complex:
    """The eight-fold product sum defining ``||f||_{U^3(Z)}^8``, over ``x`` and the three corners next to it."""
    v = np.asarray(v, dtype=np.complex128)
    L = len(v)
    if L == 0:
        return 0j
    P = _padded(v, 2 * L)
    idx = np.arange(L)
    b, c, d = idx[:, None, None], idx[None, :, None], idx[None, None, :]
    cv = np.conj(v)
    base = cv[:, None, None] * cv[None, :, None] * cv[None, None, :]
    total = 0j
    for a in range(L):
        t = base * P[2 * L + b + c - a] * P[2 * L + b + d - a] * P[2 * L + c + d - a]
        t = t * np.conj(_get(P, 2 * L + b + c + d - 2 * a))
        total += v[a] * complex(np.sum(t))
    return total


def _get(P: np.ndarray, idx: np.ndarray) -> np.ndarray:
    inside = (idx >= 0) & (idx < len(P))
    return np.where(inside, P[np.clip(idx, 0, len(P) - 1)], 0)


def uk_nested(v: np.ndarray, k: int) -> float:
    """``||f||_{U^k}^{2^k} = sum_h ||Delta_h f||_{U^{k-1}}^{2^{k-1}}`` down to ``||g||_{U^1}^2 = |sum g|^2``,
    with every difference formed explicitly."""
    v = np.asarray(v, dtype=np.complex128)
    if k == 1:
        return float(abs(np.sum(v)) ** 2)
    L = len(v)
    total = 0.0
    for h in range(-(L - 1), L):
        if h >= 0:
            d = v[: L - h] * np.conj(v[h:])
        else:
            d = v[-h:] * np.conj(v[: L + h])
        total += uk_nested(d, k - 1)
    return total
