"""Random models for the zeta function on a ladder.

Small primes (``p <= T0``) carry IID uniform phases and enter through the
exact Euler factor; primes in each later level enter either through phases
(the ``phase`` backend, matching the Dirichlet sums' first two harmonics) or
through centred Gaussians (the ``gauss`` backend). When a level's cutoff is
beyond the sieve, its increment is drawn as a single centred normal with the
analytic variance and the level is flagged as a surrogate.

Arrays follow the convention ``(..., n_primes)``: the last axis runs over
primes, leading axes over samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import constants
from .errors import BudgetError, ConfigError
from .mc import STREAM_GAUSS, STREAM_MGF, STREAM_MISC, STREAM_PHASES, TailEstimate, mean_and_se, run_blocks
from .params import Ladder
from .primes import PrimeTable, variance_analytic

TWO_PI = 2.0 * math.pi


# -- phase-driven pieces --------------------------------------------------------

def sample_phases(rng: np.random.Generator, n: int, n_primes: int) -> np.ndarray:
    return rng.uniform(0.0, TWO_PI, size=(n, n_primes))


def z0_value(theta: np.ndarray, primes: np.ndarray, sigma: float, kmax: int | None = 40):
    """``log prod_p |1 - e^{i theta_p} p^{-sigma}|^{-1}``.

    With integer ``kmax`` the log is expanded as ``sum_k cos(k theta) / (k p^{k sigma})``
    and truncated; ``kmax=None`` uses the closed form.
    """
    primes = np.asarray(primes, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if primes.size == 0:
        return np.zeros(theta.shape[:-1]) if theta.ndim > 1 else 0.0
    x = primes**-sigma
    if kmax is None:
        return -0.5 * np.sum(np.log1p(x * x - 2.0 * x * np.cos(theta)), axis=-1)
    if kmax < 2:
        raise ConfigError("kmax must be at least 2")
    w = x * np.exp(1j * theta)
    power = np.ones_like(w)
    acc = np.zeros(theta.shape, dtype=float)
    for k in range(1, kmax + 1):
        power = power * w
        acc += power.real / k
    return acc.sum(axis=-1)


def z0_tail_bound(primes: np.ndarray, sigma: float, kmax: int) -> float:
    x = np.asarray(primes, dtype=float) ** -sigma
    return math.fsum(x ** (kmax + 1) / ((kmax + 1) * (1 - x)))


def script_s(theta: np.ndarray, primes: np.ndarray, sigma: float):
    """Two-harmonic phase sum ``sum_p cos(theta)/p^s + cos(2 theta)/(2 p^{2s})``."""
    primes = np.asarray(primes, dtype=float)
    if primes.size == 0:
        return np.zeros(np.shape(theta)[:-1]) if np.ndim(theta) > 1 else 0.0
    x = primes**-sigma
    return np.sum(np.cos(theta) * x + np.cos(2 * theta) * x * x / 2, axis=-1)


def y0_value(theta: np.ndarray, primes: np.ndarray, sigma: float):
    """``prod_p |1 - e^{i theta_p} p^{-sigma}|^2``."""
    return np.exp(-2.0 * z0_value(theta, primes, sigma, kmax=None))


def phase_character(theta: np.ndarray, primes: np.ndarray, n: int) -> np.ndarray:
    """``e^{i theta_n}`` with ``theta_n = sum_j a_j theta_{p_j}`` for ``n = prod p_j^{a_j}``."""
    angle = np.zeros(theta.shape[:-1])
    rem = int(n)
    for j, p in enumerate(np.asarray(primes, dtype=np.int64)):
        while rem % p == 0:
            angle = angle + theta[..., j]
            rem //= int(p)
    if rem != 1:
        raise ConfigError(f"{n} has prime factors outside the sampled set")
    return np.exp(1j * angle)


# -- Gaussian pieces -------------------------------------------------------------

@dataclass
class GaussSample:
    """Centred Gaussians of variance 1/2: ``first`` for ``p^{-i tau}``, ``second`` for ``p^{-2 i tau}``."""

    first: np.ndarray
    second: np.ndarray


def sample_gauss(rng: np.random.Generator, n: int, n_primes: int) -> GaussSample:
    scale = math.sqrt(0.5)
    return GaussSample(rng.normal(0.0, scale, (n, n_primes)), rng.normal(0.0, scale, (n, n_primes)))


def gauss_z(sample: GaussSample, primes: np.ndarray, sigma: float, second_harmonic: str = "independent"):
    """Gaussian analogue of the level sum.

    ``second_harmonic="independent"`` pairs each prime with an independent
    Gaussian for the ``p^{-2s}`` term, so the sum is exactly centred normal
    with variance ``sum 1/(2p^{2s}) + 1/(8p^{4s})``. ``"square"`` uses
    ``Z_p^2`` in that slot instead, which shifts the mean by ``sum 1/(4p^{2s})``.
    """
    primes = np.asarray(primes, dtype=float)
    x = primes**-sigma
    if second_harmonic == "independent":
        second = sample.second
    elif second_harmonic == "square":
        second = sample.first**2
    else:
        raise ConfigError(f"unknown second_harmonic mode {second_harmonic!r}")
    return np.sum(sample.first * x + second * x * x / 2, axis=-1)


# -- paths ---------------------------------------------------------------------------

@dataclass
class LevelPlan:
    """How each ladder level is realised: concrete primes or a variance surrogate."""

    primes0: np.ndarray
    level_primes: list  # arrays, or None for surrogate levels
    increment_var: list  # used by surrogate levels
    surrogate: list
    sigma: float
    kmax: int | None

    @property
    def any_surrogate(self) -> bool:
        return any(self.surrogate)


def plan_levels(ladder: Ladder, table: PrimeTable | None = None, sigma: float | None = None,
                kmax: int | None = 40) -> LevelPlan:
    sigma = ladder.sigma if sigma is None else sigma
    T0 = ladder.T0
    limit = table.limit if table is not None else None
    if not math.isfinite(T0) or (limit is not None and T0 > limit) or T0 > 1e8:
        raise BudgetError(f"T0 = {T0:.4g} has too many primes for the phase factor")
    if table is None:
        hi_ok = [ladder.cutoff(l) for l in range(1, ladder.L + 1) if math.isfinite(ladder.cutoff(l)) and ladder.cutoff(l) <= 1e7]
        table = PrimeTable(int(math.floor(max([T0, *hi_ok, 2]))) + 1)
    primes0 = table.between(0, T0)
    level_primes, var, sur = [], [], []
    for ell in range(1, ladder.L + 1):
        hi = ladder.cutoff(ell)
        if table.covers(hi):
            level_primes.append(table.between(ladder.cutoff(ell - 1), hi))
            var.append(None)
            sur.append(False)
        else:
            level_primes.append(None)
            inc = variance_analytic(ell, ladder) - (variance_analytic(ell - 1, ladder) if ell > 1 else 0.0)
            if inc <= 0:
                raise ConfigError(f"surrogate increment variance at level {ell} is {inc:.4g} <= 0")
            var.append(inc)
            sur.append(True)
    return LevelPlan(primes0, level_primes, var, sur, sigma, kmax)


@dataclass
class ModelPath:
    """A batch of model paths; row ``i`` is one path.

    ``z`` holds the cumulative level sums (columns ``1..L``), ``y`` their
    increments. ``y0`` is the small-prime factor ``exp(-2 z0)``.
    """

    z0: np.ndarray
    z: np.ndarray
    y: np.ndarray
    y0: np.ndarray
    surrogate: tuple = field(default=())

    @property
    def n(self) -> int:
        return self.z0.size


def _path_block(rng, count, plan: LevelPlan, backend: str, second_harmonic: str):
    theta0 = sample_phases(rng, count, plan.primes0.size)
    z0 = z0_value(theta0, plan.primes0, plan.sigma, plan.kmax) if plan.primes0.size else np.zeros(count)
    incs = []
    for ps, var, sur in zip(plan.level_primes, plan.increment_var, plan.surrogate):
        if sur:
            incs.append(rng.normal(0.0, math.sqrt(var), count))
        elif backend == "phase":
            incs.append(script_s(sample_phases(rng, count, ps.size), ps, plan.sigma) if ps.size else np.zeros(count))
        elif backend == "gauss":
            incs.append(gauss_z(sample_gauss(rng, count, ps.size), ps, plan.sigma, second_harmonic)
                        if ps.size else np.zeros(count))
        else:
            raise ConfigError(f"unknown backend {backend!r}")
    y = np.stack(incs, axis=1)
    return {"z0": z0, "y": y}


def build_paths(ladder: Ladder, n: int, seed: int, backend: str = "gauss", table: PrimeTable | None = None,
                workers: int = 1, kmax: int | None = 40, second_harmonic: str = "independent",
                sigma: float | None = None) -> ModelPath:
    plan = plan_levels(ladder, table, sigma=sigma, kmax=kmax)
    stream = STREAM_PHASES if backend == "phase" else STREAM_GAUSS
    out = run_blocks(_path_block, n, seed, stream, (plan, backend, second_harmonic), workers)
    y = out["y"]
    z = np.cumsum(y, axis=1)
    return ModelPath(out["z0"], z, y, np.exp(-2 * out["z0"]), tuple(plan.surrogate))


def y_increment(path: ModelPath, ell: int) -> np.ndarray:
    return path.y[:, ell - 1]


def barrier_flags(path: ModelPath, ladder: Ladder) -> np.ndarray:
    """Per-level booleans: column 0 is the first window, column ``l`` the level-``l`` barrier."""
    a, t0 = ladder.alpha, ladder.t0
    w0 = path.z0 - a * t0
    flags = [(w0 >= 0) & (w0 <= math.sqrt(t0))]
    for ell in range(1, ladder.L + 1):
        lo, hi = ladder.barrier(ell, path.z0)
        zl = path.z[:, ell - 1]
        flags.append((zl >= lo) & (zl <= hi))
    return np.stack(flags, axis=1)


def barrier_event(path: ModelPath, V: float, ladder: Ladder) -> np.ndarray:
    """Intersection of all level events and the final exceedance ``z0 + z_L > V``."""
    return barrier_flags(path, ladder).all(axis=1) & (path.z0 + path.z[:, -1] > V)


def heuristic_prediction(V: float, ladder: Ladder, p_limit: int = 10**6) -> float:
    return constants.tail_constant(ladder.alpha, ladder.delta, p_limit) * constants.gaussian_tail(V, ladder.t)


EVENTS = ("always", "tail", "gauss-tail", "barrier", "window")


def event_indicator(event: str, path: ModelPath, ladder: Ladder, V: float | None) -> np.ndarray:
    if event == "always":
        return np.ones(path.n, dtype=bool)
    if event == "window":
        return barrier_flags(path, ladder)[:, 0]
    if V is None:
        raise ConfigError(f"event {event!r} needs V")
    if event == "tail":
        return path.z0 + path.z[:, -1] > V
    if event == "gauss-tail":
        return path.z[:, -1] > V
    if event == "barrier":
        return barrier_event(path, V, ladder)
    raise ConfigError(f"unknown event {event!r}; expected one of {EVENTS}")


def mc_probability(event: str, ladder: Ladder, n: int, seed: int, V: float | None = None,
                   backend: str = "gauss", table: PrimeTable | None = None, workers: int = 1,
                   kmax: int | None = 40, p_limit: int = 10**6) -> TailEstimate:
    return model_run(event, ladder, n, seed, V, backend, table, workers, kmax, p_limit)[0]


def model_run(event: str, ladder: Ladder, n: int, seed: int, V: float | None = None,
              backend: str = "gauss", table: PrimeTable | None = None, workers: int = 1,
              kmax: int | None = 40, p_limit: int = 10**6) -> tuple[TailEstimate, ModelPath]:
    """Like :func:`mc_probability` but also returns the sampled paths."""
    if n < 100:
        raise ConfigError("need at least 100 samples")
    if event not in EVENTS:
        raise ConfigError(f"unknown event {event!r}; expected one of {EVENTS}")
    path = build_paths(ladder, n, seed, backend, table, workers, kmax)
    ind = event_indicator(event, path, ladder, V)
    prediction = None
    if event in ("tail", "barrier"):
        prediction = heuristic_prediction(V, ladder, p_limit)
    elif event == "gauss-tail":
        v2 = level_variance(ladder, ladder.L, table)
        prediction = float(stats.norm.sf(V / math.sqrt(v2)))
    return TailEstimate.from_indicator(ind, prediction, label=event, surrogate=any(path.surrogate)), path


def level_diagnostics(path: ModelPath, ladder: Ladder, V: float | None = None) -> list[dict]:
    """Per-level barrier occupancy and moments of the cumulative sums."""
    flags = barrier_flags(path, ladder)
    rows = [{"ell": 0, "inside": float(flags[:, 0].mean()), "below": float((path.z0 < ladder.alpha * ladder.t0).mean()),
             "above": float((path.z0 > ladder.alpha * ladder.t0 + math.sqrt(ladder.t0)).mean()),
             "mean": float(np.mean(path.z0)), "var": float(np.var(path.z0)),
             "exceed_V": float((path.z0 > V).mean()) if V is not None else None, "surrogate": False}]
    for ell in range(1, ladder.L + 1):
        lo, hi = ladder.barrier(ell, path.z0)
        zl = path.z[:, ell - 1]
        rows.append({"ell": ell, "inside": float(flags[:, ell].mean()), "below": float((zl < lo).mean()),
                     "above": float((zl > hi).mean()), "mean": float(np.mean(zl)), "var": float(np.var(zl)),
                     "exceed_V": float((path.z0 + zl > V).mean()) if V is not None else None,
                     "surrogate": bool(path.surrogate[ell - 1]) if path.surrogate else False})
    return rows


def level_variance(ladder: Ladder, ell: int, table: PrimeTable | None = None, sigma: float | None = None) -> float:
    """Variance of the cumulative level sum, matching how :func:`plan_levels` realises it."""
    plan = plan_levels(ladder, table, sigma=sigma)
    sig = plan.sigma
    total = 0.0
    for j in range(ell):
        if plan.surrogate[j]:
            total += plan.increment_var[j]
        else:
            x = plan.level_primes[j].astype(float) ** (-sig)
            total += math.fsum(x * x / 2 + x**4 / 8)
    return total


# -- Bessel I0 and the exact MGF ---------------------------------------------------

_I0_SERIES_LIMIT = 20.0
_I0_OVERFLOW = 700.0


def _i0_scalar(w: float) -> float:
    w = abs(w)
    if w > _I0_OVERFLOW:
        raise OverflowError(f"I0({w}) overflows double precision")
    if w <= _I0_SERIES_LIMIT:
        q = 0.25 * w * w
        term, total, k = 1.0, 1.0, 0
        while term > 1e-17 * total:
            k += 1
            term *= q / (k * k)
            total += term
        return total
    # Hankel asymptotic: e^w / sqrt(2 pi w) * sum_k ((2k-1)!!)^2 / (k! 8^k w^k)
    term, total, k = 1.0, 1.0, 0
    while True:
        k += 1
        nxt = term * (2 * k - 1) ** 2 / (8.0 * k * w)
        if abs(nxt) < 1e-17 * total or abs(nxt) > abs(term):
            break
        term = nxt
        total += term
    return math.exp(w) / math.sqrt(TWO_PI * w) * total


def bessel_i0(w):
    """Modified Bessel function ``I_0``; series up to |w| = 20, asymptotic beyond."""
    if np.ndim(w) == 0:
        return _i0_scalar(float(w))
    flat = np.asarray(w, dtype=float).ravel()
    return np.array([_i0_scalar(v) for v in flat]).reshape(np.shape(w))


def exact_mgf(lam: float, coeffs, sigma: float, primes) -> float:
    """``prod_p I_0(|a(p)| lam / p^sigma)``, the exact ``E exp(lam sum Re a(p) e^{i theta_p} / p^sigma)``."""
    primes = np.asarray(primes, dtype=float)
    a = np.broadcast_to(np.abs(np.asarray(coeffs, dtype=complex)), primes.shape)
    args = a * abs(lam) * primes**-sigma
    return math.exp(math.fsum(math.log(_i0_scalar(v)) for v in args))


def linear_phase_sum(theta: np.ndarray, coeffs, sigma: float, primes) -> np.ndarray:
    primes = np.asarray(primes, dtype=float)
    a = np.broadcast_to(np.asarray(coeffs, dtype=complex), primes.shape)
    return np.sum((a * np.exp(1j * theta)).real * primes**-sigma, axis=-1)


def _mgf_block(rng, count, lam, coeffs, sigma, primes):
    theta = sample_phases(rng, count, len(primes))
    return np.exp(lam * linear_phase_sum(theta, coeffs, sigma, primes))


def mgf_monte_carlo(lam: float, coeffs, sigma: float, primes, n: int, seed: int, workers: int = 1):
    """MC mean and standard error of ``exp(lam sum Re a(p) e^{i theta_p}/p^sigma)``."""
    primes = np.asarray(primes, dtype=float)
    coeffs = np.broadcast_to(np.asarray(coeffs, dtype=complex), primes.shape).copy()
    vals = run_blocks(_mgf_block, n, seed, STREAM_MGF, (lam, coeffs, sigma, primes), workers)
    return mean_and_se(vals)


# -- moments of the small-prime factor ----------------------------------------------

@dataclass(frozen=True)
class MomentValue:
    value: float
    log_value: float
    tail_bound: float  # relative


def exact_z0_moment(k: float, primes, sigma: float) -> MomentValue:
    """``prod_p sum_m d_k(p^m)^2 p^{-2 m sigma}``, equal to ``E[exp(2k z0)]``."""
    if k < 0:
        raise ConfigError("k must be non-negative")
    logs, tail = [], 0.0
    for p in np.asarray(primes, dtype=float):
        lf, rel = constants.local_factor_log(k, p ** (-2 * sigma), rel_tol=1e-16)
        logs.append(lf)
        tail += rel
    if tail > 1e-10:
        raise ConfigError(f"geometric tail bound {tail:.3g} above 1e-10")
    lv = math.fsum(logs)
    return MomentValue(math.exp(lv), lv, tail)


def _z0_block(rng, count, primes, sigma, kmax):
    theta = sample_phases(rng, count, len(primes))
    return z0_value(theta, primes, sigma, kmax)


def sample_z0(primes, sigma: float, n: int, seed: int, workers: int = 1, kmax: int | None = None) -> np.ndarray:
    primes = np.asarray(primes, dtype=float)
    return run_blocks(_z0_block, n, seed, STREAM_PHASES, (primes, sigma, kmax), workers)


def z0_moment_monte_carlo(k: float, primes, sigma: float, n: int, seed: int, workers: int = 1):
    z0 = sample_z0(primes, sigma, n, seed, workers)
    return mean_and_se(np.exp(2 * k * z0))


@dataclass(frozen=True)
class GaussMomentCheck:
    q: int
    empirical: float
    std_err: float
    gaussian_moment: float
    bound: float
    passed: bool
    margin: float


def moment_2q_gaussbound(samples: np.ndarray, q: int, s2: float) -> GaussMomentCheck:
    """Compare the empirical ``E[X^{2q}]`` to the Gaussian value ``(2q)!/(2^q q!) s2^q``."""
    if q > 30:
        raise ConfigError("q above 30 is not stable under plain MC")
    if q == 0:
        return GaussMomentCheck(0, 1.0, 0.0, 1.0, 1.0, True, 0.0)
    emp, se = mean_and_se(np.asarray(samples, dtype=float) ** (2 * q))
    gm = math.exp(math.lgamma(2 * q + 1) - q * math.log(2) - math.lgamma(q + 1)) * s2**q
    rel = se / emp if emp > 0 else 0.0
    bound = gm * (1 + 5 * rel)
    return GaussMomentCheck(q, emp, se, gm, bound, emp <= bound, bound - emp)


def half_square_sum(coeffs, sigma: float, primes) -> float:
    primes = np.asarray(primes, dtype=float)
    a = np.broadcast_to(np.abs(np.asarray(coeffs, dtype=complex)), primes.shape)
    return 0.5 * math.fsum(a**2 * primes ** (-2 * sigma))


def sample_linear_sum(coeffs, sigma: float, primes, n: int, seed: int, workers: int = 1) -> np.ndarray:
    primes = np.asarray(primes, dtype=float)
    coeffs = np.broadcast_to(np.asarray(coeffs, dtype=complex), primes.shape).copy()
    return run_blocks(_linear_block, n, seed, STREAM_MISC, (coeffs, sigma, primes), workers)


def _linear_block(rng, count, coeffs, sigma, primes):
    return linear_phase_sum(sample_phases(rng, count, len(primes)), coeffs, sigma, primes)


@dataclass(frozen=True)
class TiltReport:
    exceed: TailEstimate
    window: TailEstimate
    markov_bound: float
    tilted_window: float
    bound_respected: bool

    def to_dict(self) -> dict:
        return {"exceed": self.exceed.to_dict(), "window": self.window.to_dict(),
                "markov_bound": self.markov_bound, "tilted_window": self.tilted_window,
                "bound_respected": self.bound_respected}


def tilted_z0_window(alpha: float, T0: float, sigma: float, n: int, seed: int, workers: int = 1,
                     table: PrimeTable | None = None) -> TiltReport:
    """Plain and tilted estimates around the first window ``z0 - alpha t0 in [0, sqrt t0]``.

    Also reports the Markov bound ``E[e^{2 alpha z0}] (log T0)^{-2 alpha^2}`` on
    ``P(z0 > alpha t0)`` and the window probability under the exponential tilt.
    """
    if n < 1000:
        raise ConfigError("need at least 1000 samples")
    if T0 <= math.e:
        raise ConfigError("T0 must exceed e so that t0 = log log T0 is defined")
    table = table or PrimeTable(int(T0))
    return _tilt_report(alpha, table.between(0, T0).astype(float), sigma, n, seed, workers,
                        math.log(math.log(T0)), math.log(T0))


def _tilt_report(alpha, primes, sigma, n, seed, workers, t0, logT0) -> TiltReport:
    z0 = sample_z0(primes, sigma, n, seed, workers)
    shifted = z0 - alpha * t0
    exceed = TailEstimate.from_indicator(z0 > alpha * t0, label="z0 > alpha t0")
    in_window = (shifted >= 0) & (shifted <= math.sqrt(max(t0, 0.0)))
    window = TailEstimate.from_indicator(in_window, label="first window")
    mom = exact_z0_moment(alpha, primes, sigma)
    bound = math.exp(mom.log_value - 2 * alpha**2 * math.log(logT0))
    weights = np.exp(2 * alpha * z0 - mom.log_value)
    tilted = math.fsum(weights * in_window) / n
    ok = exceed.p_hat - 3 * exceed.std_err <= bound
    return TiltReport(exceed, window, bound, tilted, bool(ok))


# -- Gaussian vs phase comparison ------------------------------------------------------

def gaussian_comparison(ladder: Ladder, ell: int, n: int, seed: int, table: PrimeTable | None = None,
                        workers: int = 1) -> dict:
    """Raw KS distance between the phase increment at ``ell`` and its Gaussian counterpart.

    No error constant is attached since none is known for this comparison.
    """
    plan = plan_levels(ladder, table)
    if plan.surrogate[ell - 1]:
        raise BudgetError(f"level {ell} is a surrogate; no concrete primes to compare")
    ph = build_paths(ladder, n, seed, "phase", table, workers)
    ga = build_paths(ladder, n, seed, "gauss", table, workers)
    a, b = ph.y[:, ell - 1], ga.y[:, ell - 1]
    return {"ell": ell, "ks_two_sample": float(stats.ks_2samp(a, b).statistic),
            "ks_phase_vs_normal": float(stats.kstest(a, "norm", args=(0, a.std())).statistic), "n": n}
