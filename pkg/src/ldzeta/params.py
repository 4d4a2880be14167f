"""Scale ladder for the multiscale argument.

A ladder is a finite sequence of log-log scales ``t0 < t1 < ... < tL <= t``
where ``t = log log T``. Level ``l`` corresponds to the prime cutoff
``T_l = exp(exp(t_l))``. Three construction modes exist:

* ``from-T``: everything derived from a height ``T`` (desk scale, T <= 1e15);
* ``from-t``: the same recipe starting from ``t`` directly, which allows
  astronomically large heights because nothing is exponentiated;
* ``explicit``: user supplied ``t0`` and levels.

Ladders derived from a realistic ``T`` almost never satisfy the asymptotic
constraints; :func:`validation_report` says which ones hold instead of
refusing to build.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import ConfigError, DomainError, InfeasibleError

MAX_DESK_T = 1e15


def iterated_log(x: float, k: int) -> float:
    """``log`` applied ``k`` times; raises DomainError once the argument is <= 0."""
    for _ in range(k):
        if not x > 0:
            raise DomainError(f"iterated log undefined: argument {x!r} <= 0")
        x = math.log(x)
    return x


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class LadderConfig:
    T: float | None = None
    t: float | None = None
    alpha: float = 1.0
    delta: float = 1.0
    s_exponent: float | None = None
    explicit_t0: float | None = None
    explicit_levels: tuple[float, ...] | None = None
    # free constants of the exponent condition: a(=5) and the unpinned K
    s_condition_a: float = 5.0
    s_condition_K: float = 2e6
    lower_barrier_constant: float = 100.0

    def __post_init__(self):
        if self.alpha <= 0 or self.delta <= 0:
            raise ConfigError("alpha and delta must be positive")
        if self.explicit_levels is not None and not isinstance(self.explicit_levels, tuple):
            object.__setattr__(self, "explicit_levels", tuple(self.explicit_levels))
        if self.s_exponent is not None and self.s_exponent <= 0:
            raise ConfigError("s_exponent must be positive")

    @property
    def mode(self) -> str:
        if self.explicit_levels is not None or self.explicit_t0 is not None:
            return "explicit"
        if self.t is not None:
            return "from-t"
        if self.T is not None:
            return "from-T"
        raise ConfigError("ladder needs T, t, or explicit levels")


def exponent_condition_gap(s: float, t: float, L: int, alpha: float,
                           a: float = 5.0, K: float = 2e6) -> float:
    """LHS minus RHS of the condition that fixes the ladder exponent."""
    y = s * iterated_log(t, L)
    if y <= 0:
        raise DomainError("s * log_L t must be positive")
    return y - 7 * a * math.log(y) - (7 * a * math.log(max(alpha, 1.0)) + math.log(K))


def derive_exponent(t: float, L: int, alpha: float, a: float = 5.0, K: float = 2e6) -> float:
    """Smallest exponent on the growing branch of the exponent condition.

    Writing ``y = s log_L t`` the condition reads ``y - 7a log y > rhs``. The
    left side dips to its minimum at ``y = 7a``; tiny ``y`` also satisfy it
    but give no decay, so only the branch beyond the minimum is used.
    """
    scale = iterated_log(t, L)
    if scale <= 0:
        raise InfeasibleError(f"log_{L} t = {scale:.4g} <= 0, no exponent can work")
    rhs = 7 * a * math.log(max(alpha, 1.0)) + math.log(K)
    g = lambda y: y - 7 * a * math.log(y) - rhs
    lo = 7 * a
    if g(lo) > 0:
        y = lo
    else:
        hi = 2 * lo
        while g(hi) <= 0:
            hi *= 2
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if g(mid) <= 0 else (lo, mid)
        y = hi
    return y / scale


@dataclass(frozen=True)
class Ladder:
    config: LadderConfig
    mode: str
    t: float
    t0: float
    levels: tuple[float, ...]
    s: float
    notes: tuple[str, ...] = field(default=())

    # -- basic shape ---------------------------------------------------------
    @property
    def L(self) -> int:
        return len(self.levels)

    @property
    def alpha(self) -> float:
        return self.config.alpha

    @property
    def delta(self) -> float:
        return self.config.delta

    @property
    def all_levels(self) -> tuple[float, ...]:
        return (self.t0, *self.levels)

    def level(self, ell: int) -> float:
        self._check_index(ell, allow_zero=True)
        return self.all_levels[ell]

    def log_cutoff(self, ell: int) -> float:
        """``log T_l = e^{t_l}``."""
        return _safe_exp(self.level(ell))

    def cutoff(self, ell: int) -> float:
        return _safe_exp(self.log_cutoff(ell))

    @property
    def T0(self) -> float:
        return self.cutoff(0)

    @property
    def sigma(self) -> float:
        """Evaluation abscissa ``1/2 + delta / log T_L``."""
        return 0.5 + self.delta * math.exp(-self.levels[-1])

    # -- constants -----------------------------------------------------------
    @property
    def upper_barrier_constant(self) -> float:
        return self.alpha * self.s + 1.0 / self.alpha

    @property
    def lower_barrier_constant(self) -> float:
        return self.config.lower_barrier_constant

    def mu(self, ell: int) -> float:
        """Mollifier prime-factor cap at level ``ell >= 1``."""
        self._check_index(ell)
        return 100.0 * max(self.alpha, 1.0) * (self.all_levels[ell] - self.all_levels[ell - 1])

    def mu_cap(self, ell: int) -> int:
        return int(math.floor(self.mu(ell)))

    def nu(self, ell: int) -> float:
        return self.mu(ell) / 10.0

    def log_Delta(self, ell: int) -> float:
        if ell == 0:
            return 100.0 * self.alpha * self.t0
        self._check_index(ell)
        return math.log(10.0 * self.alpha * self.s * iterated_log(self.t, ell - 1))

    def Delta(self, ell: int) -> float:
        return _safe_exp(self.log_Delta(ell))

    # -- barriers ------------------------------------------------------------
    def slope(self, z):
        return (self.alpha * self.t - z) / (self.levels[-1] - self.t0)

    def barrier_width(self, ell: int) -> float:
        """``log_{l+2} T = log_l t``; must be positive for a barrier to exist."""
        self._check_index(ell)
        try:
            w = iterated_log(self.t, ell)
        except DomainError as exc:
            raise DomainError(f"barrier at level {ell}: {exc}") from None
        if w <= 0:
            raise DomainError(f"barrier at level {ell}: log_{ell} t = {w:.4g} <= 0")
        return w

    def barrier(self, ell: int, z):
        """Lower and upper barriers at level ``ell`` given the base value ``z``."""
        w = self.barrier_width(ell)
        centre = self.slope(z) * (self.all_levels[ell] - self.t0)
        return centre - self.lower_barrier_constant * w, centre + self.upper_barrier_constant * w

    def first_barrier(self) -> tuple[float, float]:
        """Window for ``|M_0|^2``: ``(exp(-2 a t0), exp(-2 a t0 + 2 sqrt t0))``."""
        a, t0 = self.alpha, self.t0
        return math.exp(-2 * a * t0), math.exp(-2 * a * t0 + 2 * math.sqrt(t0))

    def _check_index(self, ell: int, allow_zero: bool = False):
        lo = 0 if allow_zero else 1
        if not lo <= ell <= self.L:
            raise DomainError(f"level {ell} outside {lo}..{self.L}")

    def describe(self) -> dict:
        rows = []
        for ell in range(self.L + 1):
            row = {"ell": ell, "t": self.level(ell), "log_T": self.log_cutoff(ell)}
            if ell >= 1:
                row.update(mu=self.mu(ell), nu=self.nu(ell), log_Delta=self.log_Delta(ell))
                try:
                    row["barrier_width"] = self.barrier_width(ell)
                except DomainError:
                    row["barrier_width"] = None
            else:
                row["log_Delta"] = self.log_Delta(0)
            rows.append(row)
        return {
            "mode": self.mode, "t": self.t, "t0": self.t0, "L": self.L, "s": self.s,
            "alpha": self.alpha, "delta": self.delta, "sigma": self.sigma,
            "B": self.upper_barrier_constant, "C": self.lower_barrier_constant,
            "first_barrier": self.first_barrier(), "levels": rows, "notes": list(self.notes),
        }


def _depth_from_T(T: float) -> int:
    L = 0
    while True:
        try:
            ok = iterated_log(T, L + 2) > math.e
        except DomainError:
            ok = False
        if not ok:
            return L
        L += 1


def _depth_from_t(t: float) -> int:
    # log_{l+1} T = log_{l-1} t
    L = 0
    while True:
        try:
            ok = iterated_log(t, L) > math.e
        except DomainError:
            ok = False
        if not ok:
            return L
        L += 1


def build_ladder(config: LadderConfig) -> Ladder:
    mode = config.mode
    notes: list[str] = []
    if mode == "explicit":
        if config.explicit_t0 is None or not config.explicit_levels:
            raise ConfigError("explicit mode needs explicit_t0 and at least one level")
        t0 = float(config.explicit_t0)
        levels = tuple(float(x) for x in config.explicit_levels)
        t = float(config.t) if config.t is not None else levels[-1]
        seq = (t0, *levels)
        if any(b <= a for a, b in zip(seq, seq[1:])) or levels[-1] > t:
            raise ConfigError(f"explicit levels must increase strictly and end <= t: {seq}, t={t}")
        s = config.s_exponent
        if s is None:
            try:
                s = derive_exponent(t, len(levels), config.alpha, config.s_condition_a, config.s_condition_K)
            except (DomainError, InfeasibleError) as exc:
                raise ConfigError(f"cannot derive exponent for explicit ladder ({exc}); pass s_exponent") from None
            notes.append("exponent derived")
        return Ladder(config, mode, t, t0, levels, float(s), tuple(notes))

    if mode == "from-T":
        T = float(config.T)
        if not 0 < T <= MAX_DESK_T:
            raise ConfigError(f"from-T mode needs 0 < T <= {MAX_DESK_T:g}")
        try:
            t = iterated_log(T, 2)
            t0 = iterated_log(T, 4)
        except DomainError:
            raise ConfigError(f"T={T:g} too small: log_4 T undefined") from None
        L = _depth_from_T(T)
    else:
        t = float(config.t)
        if t <= 1:
            raise ConfigError("t must exceed 1")
        try:
            t0 = iterated_log(t, 2)
        except DomainError:
            raise ConfigError(f"t={t:g} too small: log log t undefined") from None
        L = _depth_from_t(t)
    if L < 1:
        raise ConfigError("scale too small for a ladder with at least one level")
    if config.s_exponent is None:
        s = derive_exponent(t, L, config.alpha, config.s_condition_a, config.s_condition_K)
        notes.append("exponent derived")
    else:
        s = float(config.s_exponent)
    levels = tuple(t - s * iterated_log(t, ell) for ell in range(1, L + 1))
    seq = (t0, *levels, t)
    if any(b <= a for a, b in zip(seq, seq[1:])):
        raise InfeasibleError(
            f"exponent s={s:.4g} gives non-increasing levels {tuple(round(x, 4) for x in seq)}"
        )
    return Ladder(config, mode, t, t0, levels, s, tuple(notes))


def ladder_from_cutoffs(T0: float, cutoffs, alpha: float = 1.0, delta: float = 1.0,
                        s_exponent: float = 1.0, t: float | None = None) -> Ladder:
    """Explicit ladder whose prime cutoffs are given directly (``T_0 < T_1 < ...``)."""
    lv = tuple(iterated_log(float(c), 2) for c in cutoffs)
    cfg = LadderConfig(t=t, alpha=alpha, delta=delta, s_exponent=s_exponent,
                       explicit_t0=iterated_log(float(T0), 2), explicit_levels=lv)
    return build_ladder(cfg)


def toy_ladder(t: float = 20.0, t0: float = 1.5, L: int = 3, s_exponent: float = 2.0,
               alpha: float = 1.0, delta: float = 1.0) -> Ladder:
    """Levels ``t - s log_l t`` at a given ``t`` with a small, decoupled ``t0``.

    Keeps the level formula of the t-scale ladder while ``T0 = exp(e^{t0})``
    stays small enough for per-path phase sums.
    """
    levels = tuple(t - s_exponent * iterated_log(t, ell) for ell in range(1, L + 1))
    cfg = LadderConfig(t=t, alpha=alpha, delta=delta, s_exponent=s_exponent, explicit_t0=t0, explicit_levels=levels)
    return build_ladder(cfg)


def _logsumexp(xs) -> float:
    xs = [x for x in xs if x != -math.inf]
    if not xs:
        return -math.inf
    m = max(xs)
    return m + math.log(math.fsum(math.exp(x - m) for x in xs))


# Rosser-Schoenfeld: theta(x) < 1.01624 x
_CHEBYSHEV_THETA_BOUND = 1.01624


def validation_report(ladder: Ladder, table=None) -> dict:
    """Which of the asymptotic side-conditions hold for this ladder.

    Entries carry ``lhs``, ``rhs`` and ``holds``; nothing is raised.
    """
    cfg = ladder.config
    a, K, alpha, s, t, L = cfg.s_condition_a, cfg.s_condition_K, ladder.alpha, ladder.s, ladder.t, ladder.L
    out: dict[str, dict] = {}

    def record(name, lhs, rhs, note=""):
        out[name] = {"lhs": lhs, "rhs": rhs, "holds": bool(lhs < rhs if name == "short_mollifier" else lhs > rhs),
                     "note": note}

    try:
        y = s * iterated_log(t, L)
        record("exponent_condition", y - 7 * a * math.log(y), 7 * a * math.log(max(alpha, 1.0)) + math.log(K))
    except (DomainError, ValueError) as exc:
        out["exponent_condition"] = {"lhs": None, "rhs": None, "holds": False, "note": str(exc)}
    try:
        # (log_{L+1} T)^s / (s log_{L+2} T)^{7a} > K (alpha+1)^{7a}, in logs
        upper = iterated_log(t, L - 1)
        inner = s * iterated_log(t, L)
        record("exponent_decay", s * math.log(upper) - 7 * a * math.log(inner),
               math.log(K) + 7 * a * math.log(alpha + 1))
    except (DomainError, ValueError) as exc:
        out["exponent_decay"] = {"lhs": None, "rhs": None, "holds": False, "note": str(exc)}

    # log of prod_l T_l^{mu_l}; the l=0 factor is uncapped so use the primorial of T0
    terms = []
    T0 = ladder.T0
    if math.isfinite(T0) and T0 <= 1e8:
        from .primes import primes_up_to
        import numpy as np
        theta = math.fsum(np.log(primes_up_to(int(T0)).astype(float)))
        note = "exact primorial"
    else:
        theta = _CHEBYSHEV_THETA_BOUND * T0 if math.isfinite(T0) else math.inf
        note = "Chebyshev bound for primorial"
    terms.append(math.log(theta) if theta > 0 else -math.inf)
    for ell in range(1, L + 1):
        terms.append(math.log(ladder.mu(ell)) + ladder.level(ell))
    record("short_mollifier", _logsumexp(terms), t - math.log(100.0),
           note + "; compares log(sum_l mu_l log T_l) with log(log T / 100)")

    seq = ladder.all_levels
    out["levels_increasing"] = {"lhs": None, "rhs": None,
                                "holds": all(b > a_ for a_, b in zip(seq, seq[1:])) and seq[-1] <= t,
                                "note": ""}
    return out
