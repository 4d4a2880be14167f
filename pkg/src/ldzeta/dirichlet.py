"""Experiments on the actual zeta function at random heights ``tau in [T, 2T]``.

Zeta is evaluated by the plain partial sum ``sum_{n<=N} n^{-s}`` with
``N = ceil(T)``, which is accurate to ``O(T^{-1/2})`` on that window. An
Euler-Maclaurin evaluator serves as the independent check. Dirichlet
polynomials of all kinds go through one compiled kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numba
import numpy as np
from scipy import stats

from . import constants
from .errors import BudgetError, ConfigError
from .mc import STREAM_TAU, TailEstimate, mean_and_se, run_blocks
from .params import Ladder, validation_report
from .primes import PrimeTable, mobius_up_to, prime_power_sum, primes_up_to

ZETA_TERM_BUDGET = 5 * 10**6
SMOOTH_ENTRY_CAP = 10**7
SUPPORT_ENTRY_CAP = 10**6


# -- kernels -----------------------------------------------------------------------

@numba.njit(cache=True)
def _dirichlet_kernel(ts, logs, amps):
    """``sum_j amps[j] * exp(-i t logs[j])`` for every ``t`` in ``ts``."""
    out = np.empty(ts.size, dtype=np.complex128)
    for i in range(ts.size):
        t = ts[i]
        re = 0.0
        im = 0.0
        for j in range(logs.size):
            ph = t * logs[j]
            re += amps[j] * math.cos(ph)
            im -= amps[j] * math.sin(ph)
        out[i] = complex(re, im)
    return out


def dirichlet_sum(tau, log_n: np.ndarray, amp: np.ndarray) -> np.ndarray:
    """``sum_n amp_n n^{-i tau}`` given ``log n`` and real amplitudes."""
    ts = np.atleast_1d(np.asarray(tau, dtype=float))
    return _dirichlet_kernel(ts, np.ascontiguousarray(log_n, dtype=float), np.ascontiguousarray(amp, dtype=float))


@lru_cache(maxsize=4)
def _integer_grid(N: int, sigma: float):
    n = np.arange(1, N + 1, dtype=float)
    return np.log(n), n**-sigma


def zeta_cutoff(T: float) -> int:
    N = int(math.ceil(T))
    if N > ZETA_TERM_BUDGET:
        raise BudgetError(f"partial-sum cutoff {N} exceeds budget {ZETA_TERM_BUDGET}")
    return max(N, 1)


def zeta_eval(sigma: float, t, T_context: float | None = None, N: int | None = None):
    """Partial sum ``sum_{n<=N} n^{-sigma-it}`` with ``N = ceil(T_context)``.

    ``T_context`` defaults to ``min |t|``. Returns a complex scalar for scalar
    ``t`` and an array otherwise.
    """
    ts = np.asarray(t, dtype=float)
    if N is None:
        base = T_context if T_context is not None else float(np.min(np.abs(ts)))
        N = zeta_cutoff(max(base, 1.0))
    elif N > ZETA_TERM_BUDGET:
        raise BudgetError(f"cutoff {N} exceeds budget {ZETA_TERM_BUDGET}")
    log_n, amp = _integer_grid(int(N), float(sigma))
    out = dirichlet_sum(ts, log_n, amp)
    return complex(out[0]) if ts.ndim == 0 else out


_B2J_OVER_FACT = [1 / 12, -1 / 720, 1 / 30240]


def zeta_euler_maclaurin(sigma: float, t: float, N: int | None = None, corrections: int = 2) -> complex:
    """Euler-Maclaurin evaluation with ``corrections`` Bernoulli terms.

    The cutoff defaults to about ``|t|``, where successive correction terms
    shrink by roughly ``(2 pi)^{-2}``.
    """
    s = complex(sigma, t)
    if s == 1:
        raise ConfigError("pole at s = 1")
    if N is None:
        N = int(math.ceil(abs(t))) + 10
    log_n, amp = _integer_grid(N - 1, float(sigma)) if N > 1 else (np.empty(0), np.empty(0))
    head = complex(dirichlet_sum(np.array([t]), log_n, amp)[0]) if N > 1 else 0.0
    Ns = complex(N) ** (-s)
    total = head + N * Ns / (s - 1) + 0.5 * Ns
    rising = s
    power = Ns / N
    for j in range(corrections):
        total += _B2J_OVER_FACT[j] * rising * power
        rising *= (s + 2 * j + 1) * (s + 2 * j + 2)
        power /= N * N
    return total


def partial_sum_boundary_term(sigma: float, t: float, N: int) -> complex:
    """Leading gap between the partial sum and zeta: ``N^{1-s}/(1-s) + N^{-s}/2``."""
    s = complex(sigma, t)
    Ns = complex(N) ** (-s)
    return N * Ns / (1 - s) + 0.5 * Ns


# -- tau sampling -------------------------------------------------------------------

def _tau_block(rng, count, T):
    return rng.uniform(T, 2 * T, count)


def sample_tau(T: float, n: int, seed: int, workers: int = 1) -> np.ndarray:
    return run_blocks(_tau_block, n, seed, STREAM_TAU, (float(T),), workers)


def _zeta_block(rng, count, T, sigma, N):
    tau = rng.uniform(T, 2 * T, count)
    return {"tau": tau, "zeta": zeta_eval(sigma, tau, N=N)}


def sample_zeta(T: float, sigma: float, n: int, seed: int, workers: int = 1) -> dict:
    """Heights and zeta values; the same ``(T, seed)`` always gives the same heights."""
    N = zeta_cutoff(T)
    return run_blocks(_zeta_block, n, seed, STREAM_TAU, (float(T), float(sigma), N), workers)


# -- prime sums -------------------------------------------------------------------

def _chunked_prime_sum(tau, primes, sigma, harmonic_weights, chunk=2_000_000):
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.zeros(tau.size, dtype=complex)
    if primes.size == 0:
        return out
    logp = np.log(primes.astype(float))
    rows = max(1, chunk // primes.size)
    for a in range(0, tau.size, rows):
        ph = np.outer(tau[a : a + rows], logp)
        acc = np.zeros(ph.shape, dtype=complex)
        for k, w in harmonic_weights:
            acc += w * np.exp(-k * (sigma * logp + 1j * ph))
        out[a : a + rows] = acc.sum(axis=1)
    return out


def _level_primes(ell: int, ladder: Ladder, table: PrimeTable) -> np.ndarray:
    hi = ladder.cutoff(ell)
    if not table.covers(hi):
        raise BudgetError(f"T_{ell} = {hi:.4g} beyond prime table")
    return table.between(ladder.T0, hi)


def s_tilde(tau, ell: int, ladder: Ladder, table: PrimeTable, sigma: float | None = None):
    """``sum_{T0 < p <= T_l} p^{-s} + p^{-2s}/2`` at ``s = sigma + i tau``; zero for ``ell = 0``."""
    sigma = ladder.sigma if sigma is None else sigma
    if ell == 0:
        return np.zeros(np.size(tau), dtype=complex)
    return _chunked_prime_sum(tau, _level_primes(ell, ladder, table), sigma, [(1, 1.0), (2, 0.5)])


def s_ell(tau, ell: int, ladder: Ladder, table: PrimeTable, sigma: float | None = None):
    return s_tilde(tau, ell, ladder, table, sigma).real


# -- the small-prime mollifier -----------------------------------------------------------

def m0_product(tau, sigma: float, primes: np.ndarray) -> np.ndarray:
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if primes.size == 0:
        return np.ones(tau.size, dtype=complex)
    logp = np.log(primes.astype(float))
    return np.prod(1 - np.exp(-(sigma * logp)[None, :] - 1j * np.outer(tau, logp)), axis=1)


def smooth_squarefree(primes, cap: int = SMOOTH_ENTRY_CAP):
    """All squarefree ``m`` built from ``primes`` with ``mu(m)``, as Python ints."""
    primes = [int(p) for p in primes]
    if 2 ** len(primes) > cap:
        raise BudgetError(f"{2 ** len(primes)} smooth squarefree numbers exceed cap {cap}")
    ms, signs = [1], [1]
    for p in primes:
        ms += [m * p for m in ms]
        signs += [-s for s in signs]
    return ms, signs


def m0_mobius_sum(tau, sigma: float, primes: np.ndarray) -> np.ndarray:
    ms, signs = smooth_squarefree(primes)
    log_m = np.array([math.log(m) for m in ms])
    amp = np.array(signs, dtype=float) * np.exp(-sigma * log_m)
    return dirichlet_sum(tau, log_m, amp)


def m0_eval(tau, sigma: float, table: PrimeTable, T0: float, check: bool = False):
    """``prod_{p <= T0} (1 - p^{-s})``; with ``check`` also compares to the Möbius sum."""
    primes = table.between(0, T0)
    prod = m0_product(tau, sigma, primes)
    if check:
        alt = m0_mobius_sum(tau, sigma, primes)
        gap = float(np.max(np.abs(prod - alt)))
        if gap > 1e-10:
            raise ArithmeticError(f"product and Möbius forms differ by {gap:.3g}")
    return prod


# -- capped level mollifiers --------------------------------------------------------------

@dataclass(frozen=True)
class MollifierSupport:
    level: int
    entries: tuple  # ((m, mobius), ...)
    cap: int

    def as_dict(self) -> dict:
        return dict(self.entries)


def support_count_bound(n_primes: int, cap: int) -> int:
    return sum(math.comb(n_primes, j) for j in range(min(cap, n_primes) + 1))


def enumerate_support(primes, cap: int, level: int = 0, max_entries: int = SUPPORT_ENTRY_CAP) -> MollifierSupport:
    primes = [int(p) for p in primes]
    bound = support_count_bound(len(primes), cap)
    if bound > max_entries:
        raise BudgetError(f"mollifier support has {bound} entries, above cap {max_entries}")
    entries = []
    for j in range(min(cap, len(primes)) + 1):
        sign = -1 if j % 2 else 1
        for combo in combinations(primes, j):
            entries.append((math.prod(combo), sign))
    entries.sort()
    return MollifierSupport(level, tuple(entries), cap)


def mollifier_support(ell: int, ladder: Ladder, table: PrimeTable, max_entries: int = SUPPORT_ENTRY_CAP):
    return enumerate_support(_level_primes(ell, ladder, table), ladder.mu_cap(ell), ell, max_entries)


def mollifier_eval(tau, support: MollifierSupport, sigma: float) -> np.ndarray:
    ms = np.array([m for m, _ in support.entries], dtype=object)
    log_m = np.array([math.log(m) for m in ms])
    amp = np.array([s for _, s in support.entries], dtype=float) * np.exp(-sigma * log_m)
    return dirichlet_sum(tau, log_m, amp)


def capped_mollifier(tau, primes: np.ndarray, cap: int, sigma: float) -> np.ndarray:
    """``sum_{j<=cap} (-1)^j e_j(p^{-s})`` by the elementary-symmetric recursion.

    Same value as :func:`mollifier_eval` on the enumerated support, at cost
    ``O(#primes * cap)`` per height instead of the support size.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    depth = min(cap, primes.size)
    e = np.zeros((tau.size, depth + 1), dtype=complex)
    e[:, 0] = 1.0
    if primes.size == 0:
        return e[:, 0].copy()
    logp = np.log(primes.astype(float))
    for j, lp in enumerate(logp):
        x = np.exp(-sigma * lp - 1j * tau * lp)
        top = min(j + 1, depth)
        e[:, 1 : top + 1] = e[:, 1 : top + 1] + x[:, None] * e[:, :top]
    signs = np.where(np.arange(depth + 1) % 2 == 0, 1.0, -1.0)
    return e @ signs


def level_mollifier(tau, ell: int, ladder: Ladder, table: PrimeTable, sigma: float | None = None):
    sigma = ladder.sigma if sigma is None else sigma
    lo, hi = ladder.cutoff(ell - 1), ladder.cutoff(ell)
    if not table.covers(hi):
        raise BudgetError(f"T_{ell} beyond prime table")
    return capped_mollifier(tau, table.between(lo, hi), ladder.mu_cap(ell), sigma)


@dataclass
class MollifierTotal:
    value: np.ndarray
    levels: list
    length_ok: bool
    log_length: float
    log_bound: float


def mollifier_total(tau, ladder: Ladder, table: PrimeTable, sigma: float | None = None) -> MollifierTotal:
    sigma = ladder.sigma if sigma is None else sigma
    parts = [m0_product(tau, sigma, table.between(0, ladder.T0))]
    for ell in range(1, ladder.L + 1):
        parts.append(level_mollifier(tau, ell, ladder, table, sigma))
    total = np.prod(np.stack(parts), axis=0)
    rep = validation_report(ladder)["short_mollifier"]
    return MollifierTotal(total, parts, rep["holds"], rep["lhs"], rep["rhs"])


# -- approximating level mollifiers -------------------------------------------------

@dataclass
class ResidualReport:
    ell: int
    hypothesis_met: np.ndarray
    residual: np.ndarray
    envelope: np.ndarray
    violations: int
    checked: int

    def summary(self) -> dict:
        return {"ell": self.ell, "checked": self.checked, "hypothesis_unmet": int(self.hypothesis_met.size - self.checked),
                "violations": self.violations, "max_residual_over_envelope":
                float(np.max(np.abs(self.residual[self.hypothesis_met]) / self.envelope[self.hypothesis_met]))
                if self.checked else None}


def molli_residual(tau, ell: int, ladder: Ladder, table: PrimeTable, A: float = 10.0,
                   sigma: float | None = None) -> ResidualReport:
    """Check ``|M_l| ~ exp(-(S_l - S_{l-1}))`` against the approximation envelope.

    Heights where ``|S~_l - S~_{l-1}| > A (t_l - t_{l-1})`` are outside the range where the
    approximation applies; they are reported but not checked.
    """
    sigma = ladder.sigma if sigma is None else sigma
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    inc = s_tilde(tau, ell, ladder, table, sigma) - s_tilde(tau, ell - 1, ladder, table, sigma)
    gap = ladder.level(ell) - ladder.level(ell - 1)
    hyp = np.abs(inc) <= A * gap
    mol = level_mollifier(tau, ell, ladder, table, sigma)
    main = np.exp(-inc.real)
    resid = np.abs(mol) - main
    additive = math.exp(-ladder.mu(ell) + 5 * (A + 1) * gap + 1)
    envelope = 5.0 / math.sqrt(ladder.cutoff(ell - 1)) * main + additive
    bad = hyp & (np.abs(resid) > envelope)
    return ResidualReport(ell, hyp, resid, envelope, int(bad.sum()), int(hyp.sum()))


# -- mean value theorem --------------------------------------------------------------

def _poly_block(rng, count, T, log_n, re_amp, im_amp):
    tau = rng.uniform(T, 2 * T, count)
    # sum a(n) n^{i tau} = conj(sum conj(a(n)) n^{-i tau})
    val = np.conj(dirichlet_sum(tau, log_n, re_amp) - 1j * dirichlet_sum(tau, log_n, im_amp))
    return np.abs(val) ** 2


def mean_value_check(coeffs, T: float, n_samples: int, seed: int, workers: int = 1) -> dict:
    """MC mean of ``|sum_{n<=N} a(n) n^{i tau}|^2`` against ``sum |a(n)|^2``.

    ``coeffs[j]`` is ``a(j+1)``.
    """
    a = np.asarray(coeffs, dtype=complex)
    N = a.size
    if N > T / 10:
        raise ConfigError("mean value check needs N <= T/10")
    log_n = np.log(np.arange(1, N + 1, dtype=float))
    vals = run_blocks(_poly_block, n_samples, seed, STREAM_TAU, (float(T), log_n, a.real.copy(), a.imag.copy()), workers)
    mc, se = mean_and_se(vals)
    rhs = math.fsum(np.abs(a) ** 2)
    rel = abs(mc - rhs) / rhs
    tol = max(3 * se / rhs, 5 * N / T)
    return {"mc": mc, "se": se, "rhs": rhs, "rel_error": rel, "tolerance": tol, "passed": bool(rel <= tol),
            "n": n_samples, "T": T, "N": N}


# -- good event and tails -------------------------------------------------------------

@dataclass
class GoodEventReport:
    s0: np.ndarray
    s: np.ndarray  # columns l = 1..L
    m0_log: np.ndarray
    window_ok: np.ndarray
    barrier_ok: np.ndarray  # columns l = 1..L
    exceed: np.ndarray
    verdict: np.ndarray

    def failing_clause(self, i: int) -> str | None:
        if not self.window_ok[i]:
            return "first window"
        for j in range(self.barrier_ok.shape[1]):
            if not self.barrier_ok[i, j]:
                return f"barrier at level {j + 1}"
        if not self.exceed[i]:
            return "final exceedance"
        return None


def good_event(tau, V: float, ladder: Ladder, table: PrimeTable, sigma: float | None = None) -> GoodEventReport:
    """Evaluate the good event on actual zeta data.

    The slope argument is ``-log|M_0|``, the quantity whose square-exponential
    is windowed by the first barrier and which mirrors ``z0`` in the model.
    """
    sigma = ladder.sigma if sigma is None else sigma
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    m0 = m0_eval(tau, sigma, table, ladder.T0)
    mod2 = np.abs(m0) ** 2
    lo0, hi0 = ladder.first_barrier()
    window = (mod2 >= lo0) & (mod2 <= hi0)
    m0_log = -0.5 * np.log(mod2)
    s0 = m0_log
    cols, oks = [], []
    for ell in range(1, ladder.L + 1):
        sl = s_ell(tau, ell, ladder, table, sigma)
        lo, hi = ladder.barrier(ell, s0)
        cols.append(sl)
        oks.append((sl >= lo) & (sl <= hi))
    s = np.stack(cols, axis=1)
    bar = np.stack(oks, axis=1)
    exceed = m0_log + s[:, -1] > V
    verdict = window & bar.all(axis=1) & exceed
    return GoodEventReport(s0, s, m0_log, window, bar, exceed, verdict)


def _logzeta_block(rng, count, T, sigma, N):
    tau = rng.uniform(T, 2 * T, count)
    return np.log(np.abs(zeta_eval(sigma, tau, N=N)))


def sample_log_zeta(T: float, sigma: float, n: int, seed: int, workers: int = 1) -> np.ndarray:
    return run_blocks(_logzeta_block, n, seed, STREAM_TAU, (float(T), float(sigma), zeta_cutoff(T)), workers)


def empirical_tail(sigma: float, V: float, T: float, n: int, seed: int, workers: int = 1,
                   p_limit: int = 10**6) -> TailEstimate:
    """Estimate ``P(log|zeta(sigma + i tau)| > V)`` over ``tau`` uniform in ``[T, 2T]``.

    The prediction uses ``alpha = V / log log T`` and ``delta = (sigma - 1/2) log T``.
    """
    if n < 100:
        raise ConfigError("need at least 100 samples")
    logz = sample_log_zeta(T, sigma, n, seed, workers)
    t = math.log(math.log(T))
    alpha, delta = V / t, (sigma - 0.5) * math.log(T)
    prediction = None
    if alpha >= 0 and delta > 0:
        prediction = constants.tail_constant(alpha, delta, p_limit) * constants.gaussian_tail(V, t)
    return TailEstimate.from_indicator(logz > V, prediction, label="log|zeta| > V")


def prime_sum_variance(T: float, sigma: float = 0.5) -> float:
    """``sum_{p <= T} 1/(2 p^{2 sigma}) + 1/(8 p^{4 sigma})``."""
    return prime_power_sum(0, T, [(0.5, 2 * sigma), (0.125, 4 * sigma)])


def selberg_clt_distance(T: float, n: int, seed: int, workers: int = 1) -> dict:
    """KS distance of ``log|zeta(1/2 + i tau)| / v`` from the standard normal."""
    logz = sample_log_zeta(T, 0.5, n, seed, workers)
    v2 = prime_sum_variance(T)
    x = logz / math.sqrt(v2)
    return {"T": T, "n": n, "variance": v2, "ks": float(stats.kstest(x, "norm").statistic),
            "mean": float(np.mean(x)), "std": float(np.std(x))}


def _abs_zeta_block(rng, count, T, sigma, N):
    tau = rng.uniform(T, 2 * T, count)
    return np.abs(zeta_eval(sigma, tau, N=N))


def moments_experiment(T: float, k: float, n: int, seed: int, workers: int = 1, p_limit: int = 10**6) -> dict:
    """MC ``E|zeta(1/2 + i tau)|^{2k}`` against ``C_k (log T)^{k^2}``."""
    absz = run_blocks(_abs_zeta_block, n, seed, STREAM_TAU, (float(T), 0.5, zeta_cutoff(T)), workers)
    mean, se = mean_and_se(absz ** (2 * k))
    scale = constants.moment_constant(k, p_limit) * math.log(T) ** (k * k)
    return {"T": T, "k": k, "n": n, "moment": mean, "se": se, "scale": scale, "ratio": mean / scale,
            "ratio_se": se / scale}


# -- mollification -------------------------------------------------------------------

def _mollified_block(rng, count, T, ladder, table, sigmas, N):
    tau = rng.uniform(T, 2 * T, count)
    out = {}
    for j, sig in enumerate(sigmas):
        z = zeta_eval(sig, tau, N=N)
        m = mollifier_total(tau, ladder, table, sig).value
        out[f"err{j}"] = np.abs(z * m - 1) ** 2
    return out


def mollification_check(ladder: Ladder, n: int, seed: int, T: float, table: PrimeTable | None = None,
                        deltas=(0.5, 1.0, 2.0), workers: int = 1) -> dict:
    """``E|zeta M - 1|^2`` at ``sigma = 1/2 + delta / log T_L`` across a delta sweep.

    The same heights are used for every delta.
    """
    table = table or PrimeTable(int(ladder.cutoff(ladder.L)))
    sigmas = [0.5 + d * math.exp(-ladder.levels[-1]) for d in deltas]
    data = run_blocks(_mollified_block, n, seed, STREAM_TAU, (float(T), ladder, table, sigmas, zeta_cutoff(T)), workers)
    rows = []
    for j, (d, sig) in enumerate(zip(deltas, sigmas)):
        mean, se = mean_and_se(data[f"err{j}"])
        rows.append({"delta": d, "sigma": sig, "estimate": mean, "se": se,
                     "bound_shape": math.exp(-2 * d) / d + math.exp(-ladder.mu(ladder.L) / 10)})
    est = [r["estimate"] for r in rows]
    return {"rows": rows, "finite": bool(all(math.isfinite(e) for e in est)),
            "nonincreasing": bool(all(b <= a for a, b in zip(est, est[1:]))), "n": n, "T": T}


def inverse_truncation_check(T: float, lengths, n: int, seed: int, sigma: float = 0.5, workers: int = 1) -> dict:
    """``E|zeta * sum_{m<=M} mu(m) m^{-s} - 1|^2`` for each truncation length ``M``."""
    lengths = sorted(int(M) for M in lengths)
    mu = mobius_up_to(lengths[-1]).astype(float)
    data = run_blocks(_inverse_block, n, seed, STREAM_TAU, (float(T), sigma, zeta_cutoff(T), mu, tuple(lengths)), workers)
    rows = []
    for M in lengths:
        mean, se = mean_and_se(data[f"M{M}"])
        rows.append({"M": M, "estimate": mean, "se": se})
    est = [r["estimate"] for r in rows]
    return {"rows": rows, "decreasing": bool(all(b < a for a, b in zip(est, est[1:])))}


def _inverse_block(rng, count, T, sigma, N, mu, lengths):
    tau = rng.uniform(T, 2 * T, count)
    z = zeta_eval(sigma, tau, N=N)
    out = {}
    for M in lengths:
        m = np.arange(1, M + 1, dtype=float)
        amp = mu[1 : M + 1] * m**-sigma
        keep = amp != 0
        inv = dirichlet_sum(tau, np.log(m[keep]), amp[keep])
        out[f"M{M}"] = np.abs(z * inv - 1) ** 2
    return out
