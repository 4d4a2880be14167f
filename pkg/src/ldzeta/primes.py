"""Primes, prime power sums and the level variances.

The sieve is a segmented odd-only Eratosthenes sieve on numpy byte arrays.
Sums over primes are accumulated with ``math.fsum`` (exactly rounded), which
also makes them independent of summation order.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BudgetError, ConfigError

DEFAULT_SIEVE_BUDGET = 10**9
SEGMENT = 1 << 20
EULER_GAMMA = 0.57721566490153286061


def sieve_budget() -> int:
    raw = os.environ.get("LDZETA_SIEVE_LIMIT")
    return int(float(raw)) if raw else DEFAULT_SIEVE_BUDGET


def _small_primes(n: int) -> np.ndarray:
    if n < 2:
        return np.empty(0, dtype=np.int64)
    flags = np.ones(n + 1, dtype=bool)
    flags[:2] = False
    flags[4::2] = False
    for i in range(3, math.isqrt(n) + 1, 2):
        if flags[i]:
            flags[i * i :: 2 * i] = False
    return np.flatnonzero(flags).astype(np.int64)


@lru_cache(maxsize=8)
def _primes_cached(limit: int) -> np.ndarray:
    if limit <= SEGMENT:
        out = _small_primes(limit)
        out.setflags(write=False)
        return out
    base = _small_primes(math.isqrt(limit))[1:]  # odd base primes
    chunks = [np.array([2], dtype=np.int64)]
    # segment covers odd numbers lo, lo+2, ..., lo + 2*(SEGMENT-1)
    lo = 3
    while lo <= limit:
        hi = min(lo + 2 * SEGMENT - 2, limit if limit % 2 else limit - 1)
        size = (hi - lo) // 2 + 1
        flags = np.ones(size, dtype=bool)
        for p in base:
            p = int(p)
            if p * p > hi:
                break
            start = max(p * p, ((lo + p - 1) // p) * p)
            if start % 2 == 0:
                start += p
            if start > hi:
                continue
            flags[(start - lo) // 2 :: p] = False
        chunks.append(lo + 2 * np.flatnonzero(flags).astype(np.int64))
        lo = hi + 2
    out = np.concatenate(chunks)
    out.setflags(write=False)
    return out


def primes_up_to(limit: int) -> np.ndarray:
    """All primes ``<= limit`` as a read-only int64 array."""
    limit = int(limit)
    budget = sieve_budget()
    if limit > budget:
        raise BudgetError(f"sieve limit {limit:.3g} exceeds budget {budget:.3g} (LDZETA_SIEVE_LIMIT)")
    return _primes_cached(max(limit, 1))


def primes_between(lo: float, hi: float) -> np.ndarray:
    """Primes in the half-open interval ``(lo, hi]``."""
    if hi < lo:
        raise ConfigError(f"empty or reversed interval ({lo}, {hi}]")
    ps = primes_up_to(int(math.floor(hi)))
    return ps[ps > lo]


@dataclass
class PrimeTable:
    """A sieved range with convenient slicing; reused by the experiments."""

    limit: int

    def __post_init__(self):
        self.primes = primes_up_to(self.limit)

    def between(self, lo: float, hi: float) -> np.ndarray:
        if hi > self.limit:
            raise BudgetError(f"interval end {hi:.4g} beyond table limit {self.limit}")
        a = np.searchsorted(self.primes, lo, side="right")
        b = np.searchsorted(self.primes, hi, side="right")
        return self.primes[a:b]

    def covers(self, hi: float) -> bool:
        return math.isfinite(hi) and hi <= self.limit


def prime_power_sum(lo: float, hi: float, terms, primes: np.ndarray | None = None) -> float:
    """``sum_{lo < p <= hi} sum_j w_j p^{-c_j}`` for ``terms = [(w_j, c_j), ...]``."""
    ps = primes_between(lo, hi) if primes is None else primes[(primes > lo) & (primes <= hi)]
    if ps.size == 0:
        return 0.0
    logp = np.log(ps.astype(float))
    parts = [w * np.exp(-c * logp) for w, c in terms]
    return math.fsum(np.concatenate(parts))


@dataclass(frozen=True)
class VarianceReport:
    ell: int
    value: float
    analytic: float
    difference: float
    surrogate: bool


def variance_analytic(ell: int, ladder) -> float:
    """Closed-form main term ``(t_l - t_0)/2 - delta e^{t_l - t_L}``."""
    return 0.5 * (ladder.level(ell) - ladder.t0) - ladder.delta * math.exp(ladder.level(ell) - ladder.levels[-1])


def variance_vl(ell: int, ladder, sigma: float | None = None, table: PrimeTable | None = None) -> VarianceReport:
    """``sum_{T0 < p <= T_l} (1/(2 p^{2s}) + 1/(8 p^{4s}))`` and its main term.

    Falls back to the main term (flagged ``surrogate``) when ``T_l`` is past
    what can be sieved.
    """
    sigma = ladder.sigma if sigma is None else sigma
    analytic = variance_analytic(ell, ladder) if ell > 0 else 0.0
    if ell == 0:
        return VarianceReport(0, 0.0, 0.0, 0.0, False)
    hi = ladder.cutoff(ell)
    limit = table.limit if table is not None else sieve_budget()
    if not math.isfinite(hi) or hi > limit:
        return VarianceReport(ell, analytic, analytic, 0.0, True)
    ps = table.primes if table is not None else None
    v = prime_power_sum(ladder.T0, hi, [(0.5, 2 * sigma), (0.125, 4 * sigma)], primes=ps)
    return VarianceReport(ell, v, analytic, v - analytic, False)


def mertens_product(X: float) -> float:
    """``log X * prod_{p <= X} (1 - 1/p)``; tends to ``exp(-gamma)``."""
    ps = primes_up_to(int(X)).astype(float)
    return math.log(X) * math.exp(math.fsum(np.log1p(-1.0 / ps)))


def prime_stats(limit: int) -> dict:
    ps = primes_up_to(limit).astype(float)
    return {
        "limit": int(limit),
        "count": int(ps.size),
        "largest": int(ps[-1]) if ps.size else None,
        "sum_reciprocal": math.fsum(1.0 / ps),
        "mertens_second_gap": math.fsum(1.0 / ps) - math.log(math.log(limit)),
        "mertens_product": mertens_product(limit),
        "exp_minus_gamma": math.exp(-EULER_GAMMA),
    }


def mobius_up_to(n: int) -> np.ndarray:
    """Möbius function on ``0..n`` (index 0 set to 0)."""
    n = int(n)
    mu = np.ones(n + 1, dtype=np.int8)
    mu[0] = 0
    for p in primes_up_to(n):
        p = int(p)
        mu[p::p] *= -1
        if p * p <= n:
            mu[p * p :: p * p] = 0
    return mu
