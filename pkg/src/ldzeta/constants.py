"""Arithmetic and random-matrix constants for the tail and moment predictions.

* ``euler_gamma``: Euler-Maclaurin acceleration of ``H_n - log n``.
* ``arithmetic_factor``: the Euler product ``a_k`` with a second-order tail
  correction past the prime cutoff.
* ``log_barnes_g``: Weierstrass product on ``[0, 1)`` with Hurwitz-zeta tails,
  shifted by ``G(z+1) = Gamma(z) G(z)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, log_ndtr, zeta as hurwitz_zeta

from .errors import ConfigError
from .primes import primes_up_to

# B_2, B_4, ..., B_16
_BERNOULLI_EVEN = [1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6, -3617 / 510]


@lru_cache(maxsize=1)
def euler_gamma() -> float:
    n = 40
    harmonic = math.fsum(1.0 / j for j in range(1, n + 1))
    corr = [-1.0 / (2 * n)] + [b / (2 * (k + 1) * n ** (2 * (k + 1))) for k, b in enumerate(_BERNOULLI_EVEN)]
    return math.fsum([harmonic, -math.log(n), *corr])


# -- divisor-function local factors -------------------------------------------

def log_divisor_coeffs(k: float, m_max: int) -> np.ndarray:
    """``log d_k(p^m)`` for ``m = 0..m_max`` via ``d(m) = d(m-1) (k+m-1)/m``."""
    m = np.arange(1, m_max + 1, dtype=float)
    with np.errstate(divide="ignore"):
        steps = np.log(np.abs(k + m - 1)) - np.log(m)
    out = np.concatenate([[0.0], np.cumsum(steps)])
    if k == 0:
        out[1:] = -np.inf
    return out


def local_factor_log(k: float, x: float, rel_tol: float = 1e-18, m_cap: int = 100_000) -> tuple[float, float]:
    """``log sum_m d_k(p^m)^2 x^m`` with a relative tail bound, for ``0 < x < 1``.

    Terms are generated in log space until the ratio test certifies the
    geometric remainder is below ``rel_tol`` of the partial sum.
    """
    if not 0 < x < 1:
        raise ConfigError("local factor needs 0 < x < 1")
    if k == 0:
        return 0.0, 0.0
    logx = math.log(x)
    m_max = 64
    while True:
        logs = 2 * log_divisor_coeffs(k, m_max) + np.arange(m_max + 1) * logx
        peak = float(logs.max())
        # consecutive-term ratio ((k+m)/(m+1))^2 x decreases in m for k >= 1 and stays below x for k < 1
        r = max(((k + m_max) / (m_max + 1)) ** 2, 1.0) * x
        tail_rel = math.exp(logs[-1] - peak) * r / (1 - r) if r < 1 else math.inf
        total = math.fsum(np.exp(logs - peak))
        if tail_rel / total < rel_tol or m_max >= m_cap:
            return peak + math.log(total), tail_rel / total
        m_max *= 2


def _series_log_coeffs(k: float, order: int) -> np.ndarray:
    """Power-series coefficients of ``log[(1-x)^{k^2} sum_m d_k(p^m)^2 x^m]`` up to ``x^order``."""
    d2 = np.exp(2 * log_divisor_coeffs(k, order))
    # log of a series with constant term 1: l' = f'/f, solve recursively
    logf = np.zeros(order + 1)
    for n in range(1, order + 1):
        acc = n * d2[n] - sum(j * logf[j] * d2[n - j] for j in range(1, n))
        logf[n] = acc / n
    k2 = k * k
    logf[1:] -= k2 / np.arange(1, order + 1)
    return logf


@dataclass(frozen=True)
class ArithmeticFactor:
    k: float
    value: float
    log_value: float
    truncation_bound: float  # bound on |log a_k - computed log a_k|
    p_limit: int


_EXACT_SPLIT = 10_000


@lru_cache(maxsize=64)
def arithmetic_factor(k: float, p_limit: int = 10**6) -> ArithmeticFactor:
    """``a_k = prod_p (1-1/p)^{k^2} sum_m d_k(p^m)^2 p^{-m}``.

    Primes past ``p_limit`` are accounted for with the leading ``p^{-2}``
    term of the local log-factor; the reported bound covers the rest.
    """
    k = float(k)
    if k < 0:
        raise ConfigError("a_k defined here for k >= 0")
    ps = primes_up_to(p_limit).astype(float)
    k2 = k * k
    small = ps[ps <= _EXACT_SPLIT]
    large = ps[ps > _EXACT_SPLIT]
    logs = []
    inner_err = 0.0
    for p in small:
        lf, rel = local_factor_log(k, 1.0 / p)
        logs.append(k2 * math.log1p(-1.0 / p) + lf)
        inner_err += rel
    if large.size:
        # terms decay like ((k+m)/(m+1))^2 / p; 40 terms suffice for k <= 60 and p > 1e4
        m_max = 40 if k <= 60 else int(4 * k)
        logd = 2 * log_divisor_coeffs(k, m_max)
        logx = -np.log(large)
        block = np.exp(logd[None, :] + np.arange(m_max + 1)[None, :] * logx[:, None])
        logs.extend((k2 * np.log1p(-1.0 / large) + np.log1p(block[:, 1:].sum(axis=1))).tolist())
    coeffs = _series_log_coeffs(k, 6)
    c2, c3 = coeffs[2], coeffs[3]
    tail2 = _prime_zeta_tail(2.0, p_limit, ps)
    tail3 = 1.0 / (p_limit**2 * math.log(p_limit))
    log_val = math.fsum(logs) + c2 * tail2
    # rounding: each local log carries ~eps relative error on terms of size ~k^2/p
    rounding = 4 * np.finfo(float).eps * (1 + k2) * math.fsum(1.0 / ps)
    bound = 2 * (abs(c3) + abs(coeffs[4]) / p_limit) * tail3 + inner_err + rounding
    return ArithmeticFactor(k, math.exp(log_val), log_val, bound, p_limit)


_PRIME_ZETA_2 = 0.45224742004106549850654336483224794


def _prime_zeta_tail(s: float, limit: int, ps: np.ndarray) -> float:
    if s != 2.0:
        raise NotImplementedError
    head = math.fsum(ps[ps <= limit] ** -2.0)
    return _PRIME_ZETA_2 - head


# -- Barnes G -----------------------------------------------------------------

_G_PRODUCT_TERMS = 60


def _log_barnes_g1_reduced(w: float) -> float:
    """``log G(1+w)`` for ``0 <= w < 1`` via the Weierstrass product."""
    g = euler_gamma()
    K = _G_PRODUCT_TERMS
    kk = np.arange(1, K + 1, dtype=float)
    head = kk * np.log1p(w / kk) - w + w * w / (2 * kk)
    # tail sum_{k>K} [k log(1+w/k) - w + w^2/(2k)] = sum_{j>=3} (-1)^{j+1} w^j / j * zeta(j-1, K+1)
    tail = []
    for j in range(3, 60):
        term = (-1) ** (j + 1) * w**j / j * float(hurwitz_zeta(j - 1, K + 1))
        tail.append(term)
        if abs(term) < 1e-20:
            break
    return math.fsum([0.5 * w * math.log(2 * math.pi), -0.5 * (w + w * w * (1 + g)), *head, *tail])


def log_barnes_g(z: float) -> float:
    """``log G(z)`` for real ``z > 0``."""
    if z <= 0:
        raise ConfigError("log_barnes_g implemented for z > 0")
    x = z - 1.0  # G(z) = G(1+x)
    if x < 0:
        # G(1+x) = Gamma(x) G(x)  =>  G(z) = G(1+z)/Gamma(z)
        return _log_barnes_g1_reduced(z) - math.lgamma(z)
    n = int(math.floor(x))
    w = x - n
    shift = math.fsum(math.lgamma(w + j) for j in range(1, n + 1))
    return _log_barnes_g1_reduced(w) + shift


def barnes_g(z: float) -> float:
    return math.exp(log_barnes_g(z))


def log_rmt_factor(k: float) -> float:
    """``log f_k = 2 log G(1+k) - log G(1+2k)``."""
    return 2 * log_barnes_g(1 + k) - log_barnes_g(1 + 2 * k)


def rmt_factor(k: float) -> float:
    return math.exp(log_rmt_factor(k))


# -- composite constants ------------------------------------------------------

def log_tail_constant(alpha: float, delta: float, p_limit: int = 10**6) -> float:
    a = arithmetic_factor(alpha, p_limit)
    g = euler_gamma()
    return g * alpha**2 + a.log_value - 2 * alpha**2 * delta - 36 * alpha**2 * math.log(alpha + 1)


def tail_constant(alpha: float, delta: float, p_limit: int = 10**6) -> float:
    """Prefactor ``e^{gamma a^2} a_a e^{-2 a^2 delta} (a+1)^{-36 a^2}`` of the tail prediction."""
    return math.exp(log_tail_constant(alpha, delta, p_limit))


def moment_shape_constant(k: float, p_limit: int = 10**6) -> float:
    """``a_k e^{gamma k^2} (k+1)^{-38 k^2}``; only the shape is known, not the prefactor."""
    a = arithmetic_factor(k, p_limit)
    return math.exp(a.log_value + euler_gamma() * k * k - 38 * k * k * math.log(k + 1))


def moment_constant(k: float, p_limit: int = 10**6) -> float:
    """Conjectured leading constant ``a_k f_k`` of the ``2k``-th moment."""
    return arithmetic_factor(k, p_limit).value * rmt_factor(k)


def optimal_delta_equation(delta: float, alpha: float) -> float:
    return delta + 0.5 * math.log(delta) - (math.log(alpha + 1) + alpha * math.log(1 / alpha + 1) + 0.5)


def optimal_delta(alpha: float, tol: float = 1e-14) -> float:
    """Root of ``delta + log(delta)/2 = log(a+1) + a log(1/a+1) + 1/2`` by bisection."""
    if alpha <= 0:
        raise ConfigError("alpha must be positive")
    lo, hi = 1e-12, 1.0
    while optimal_delta_equation(hi, alpha) < 0:
        hi *= 2
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if optimal_delta_equation(mid, alpha) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gaussian_tail(V: float, t: float) -> float:
    """``int_V^inf e^{-y^2/t} dy / sqrt(pi t) = erfc(V/sqrt t)/2``."""
    if t <= 0:
        raise ConfigError("variance scale t must be positive")
    return 0.5 * math.erfc(V / math.sqrt(t))


def log_gaussian_tail(V: float, t: float) -> float:
    return float(log_ndtr(-V * math.sqrt(2.0 / t)))


@dataclass(frozen=True)
class ConstantSet:
    gamma: float
    a: dict
    f: dict
    C: dict
    delta_star: dict

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "a_k": self.a, "f_k": self.f, "C_k": self.C, "delta_star": self.delta_star}


def constant_set(ks=(0, 1, 2, 3), alphas=(0.5, 1.0, 2.0), p_limit: int = 10**6) -> ConstantSet:
    a = {str(k): arithmetic_factor(k, p_limit).value for k in ks}
    f = {str(k): rmt_factor(k) for k in ks if k > 0}
    C = {str(k): a[str(k)] * f[str(k)] for k in ks if k > 0}
    ds = {str(al): optimal_delta(al) for al in alphas}
    return ConstantSet(euler_gamma(), a, f, C, ds)
