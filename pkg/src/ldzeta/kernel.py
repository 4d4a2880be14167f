"""Band-limited kernels, smoothed interval indicators and their Taylor polynomials.

The kernel is ``F(u) = prod_k sinc(a_k u)`` with ``sinc(x) = sin(pi x)/(pi x)``
and ``sum_k a_k = 2``, so its Fourier transform is a convolution of boxes and
vanishes outside ``[-1, 1]``. Two scale families are provided:

* ``"uniform"``: ``2m`` equal scales ``1/m``. The transform is an Irwin-Hall
  density, so ``||F||_1 = F^(0)`` is an exact rational and the tails decay
  like ``u^{1-2m}`` after a Gaussian core.
* ``"ingham"``: scales proportional to ``1/(k log^2(k+2))``, the classical
  slowly-decaying construction, kept for comparison.

Smoothed indicators ``h = 1_[lo, hi] * phi_c`` are carried as the pair
``(log h, log(1 - h))`` so that both tiny values and values within ``e^{-256}``
of one are resolved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np
from scipy.special import logsumexp

from .errors import BudgetError, ConfigError, PrecisionError

DEGREE_GATE = 10_000
MOMENT_COST_GATE = 5 * 10**6  # quadrature nodes times degree
FAMILIES = ("uniform", "ingham")
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of the kernel and of the smoothing scales.

    ``b`` and ``c`` default to ``2a`` and ``3a``. ``order`` is ``m`` for the
    uniform family (``2m`` factors) and the factor count for ``"ingham"``.
    """

    Delta: float = 4.0
    a: float = 2.5
    b: float | None = None
    c: float | None = None
    order: int = 100
    family: str = "uniform"
    grid_step: float = 0.25
    panel_width: float = 0.25
    table_extent: float = 4000.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown kernel family {self.family!r}")
        if not self.c_exp > self.b_exp > self.a > 1:
            raise ConfigError(f"need c > b > a > 1, got a={self.a}, b={self.b_exp}, c={self.c_exp}")
        if self.Delta <= 1:
            raise ConfigError("Delta must exceed 1")
        if self.order < 1:
            raise ConfigError("kernel order must be positive")
        if self.grid_step <= 0 or self.panel_width <= 0:
            raise ConfigError("grid step and panel width must be positive")

    @property
    def b_exp(self) -> float:
        return 2 * self.a if self.b is None else self.b

    @property
    def c_exp(self) -> float:
        return 3 * self.a if self.c is None else self.c

    @property
    def scale(self) -> float:
        """``Delta^c``, the inverse width of the scaled kernel."""
        return self.Delta**self.c_exp

    def with_delta(self, Delta: float) -> "KernelSpec":
        return KernelSpec(Delta, self.a, self.b, self.c, self.order, self.family, self.grid_step,
                          self.panel_width, self.table_extent)

    def interval(self, sign: int) -> tuple[float, float]:
        """Support of the indicator being smoothed: widened for ``+``, shrunk for ``-``."""
        over = self.Delta ** -self.b_exp
        top = 1.0 / self.Delta
        if sign > 0:
            return -over, top + over
        if sign < 0:
            return over, top - over
        raise ConfigError("sign must be +1 or -1")

    def check_overspill(self):
        if not self.Delta ** -self.b_exp < 0.5 * self.Delta ** -self.a:
            raise ConfigError(f"Delta={self.Delta} too small: Delta^-b >= Delta^-a / 2")


def kernel_scales(family: str, order: int) -> np.ndarray:
    if family == "uniform":
        return np.full(2 * order, 1.0 / order)
    k = np.arange(1, order + 1, dtype=float)
    w = 1.0 / (k * np.log(k + 2) ** 2)
    return 2 * w / w.sum()


# -- Irwin-Hall pieces ----------------------------------------------------------------

@lru_cache(maxsize=32)
def irwin_hall_center(n: int) -> Fraction:
    """Density at ``n/2`` of the sum of ``n`` uniforms on ``[0, 1]``, exactly."""
    half = Fraction(n, 2)
    total = sum((-1) ** j * math.comb(n, j) * (half - j) ** (n - 1) for j in range(n) if j < half)
    return total / math.factorial(n - 1)


def irwin_hall_density(x, n: int):
    """Irwin-Hall density at ``x`` (mpmath or float), by the alternating sum."""
    mp = mpmath.mp
    x = mp.mpf(x)
    if x <= 0 or x >= n:
        return mp.zero
    if x > n / 2:
        x = n - x
    acc = mp.zero
    for j in range(int(mp.floor(x)) + 1):
        acc += (-1) ** j * math.comb(n, j) * (x - j) ** (n - 1)
    return acc / math.factorial(n - 1)


# -- the kernel -------------------------------------------------------------------------

@dataclass
class Kernel:
    spec: KernelSpec
    scales: np.ndarray
    log_norm: float  # log ||F||_1
    norm_exact: bool
    _tail_nodes: np.ndarray = field(repr=False)

    # -- values
    def log_F(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            if self.spec.family == "uniform":
                m = self.spec.order
                return 2 * m * np.log(np.abs(np.sinc(u / m)))
            return np.log(np.abs(np.sinc(np.multiply.outer(u, self.scales)))).sum(axis=-1)

    def phi(self, u) -> np.ndarray:
        return np.exp(self.log_F(u) - self.log_norm)

    def log_tail_envelope(self, d) -> np.ndarray:
        """Upper bound on ``log int_d^inf F`` from ``|sinc(a u)| <= 1/(pi a u)``."""
        d = np.atleast_1d(np.asarray(d, dtype=float))
        out = np.empty(d.size)
        for i, di in enumerate(d):
            active = self.scales[np.pi * self.scales * di >= 1]
            s = active.size
            if s < 2:
                out[i] = math.inf
                continue
            out[i] = -np.sum(np.log(np.pi * active)) + (1 - s) * math.log(di) - math.log(s - 1)
        return out

    def log_upper_tail(self, d):
        """``log int_d^inf phi`` for ``d >= 0`` and a flag marking envelope-only values."""
        d = np.atleast_1d(np.asarray(d, dtype=float))
        if np.any(d < 0):
            raise ConfigError("upper tail needs d >= 0")
        w = self.spec.panel_width
        out = np.empty(d.size)
        beyond = d >= self.spec.table_extent
        tab = ~beyond
        if tab.any():
            dd = d[tab]
            idx = np.minimum((dd // w).astype(np.int64), self._tail_nodes.size - 2)
            right = (idx + 1) * w
            half = (right - dd) / 2
            nodes = ((dd + right) / 2)[:, None] + half[:, None] * _GL_X[None, :]
            with np.errstate(divide="ignore"):
                part = logsumexp(self.log_F(nodes) + np.log(_GL_W)[None, :], axis=1) + np.log(half)
            out[tab] = np.logaddexp(part, self._tail_nodes[idx + 1]) - self.log_norm
        if beyond.any():
            out[beyond] = self.log_tail_envelope(d[beyond]) - self.log_norm
        return out, beyond

    def cdf_pair(self, u):
        """``(log Phi(u), log(1 - Phi(u)))`` with the envelope flag."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        lt, flag = self.log_upper_tail(np.abs(u))
        comp = np.log1p(-np.exp(np.minimum(lt, 0.0)))
        upper = np.where(u >= 0, lt, comp)
        lower = np.where(u >= 0, comp, lt)
        return lower, upper, flag

    # -- Fourier side
    def phi_hat(self, xi):
        """Exact transform for the uniform family (Irwin-Hall ratio)."""
        if self.spec.family != "uniform":
            raise ConfigError("closed-form transform only for the uniform family")
        m = self.spec.order
        xs = np.atleast_1d(np.asarray(xi, dtype=float))
        with mpmath.workdps(30 + 2 * m):
            centre = mpmath.mpf(irwin_hall_center(2 * m).numerator) / irwin_hall_center(2 * m).denominator
            vals = [float(irwin_hall_density(m * x + m, 2 * m) / centre) for x in xs]
        return np.array(vals)

    def fourier_quadrature(self, xi, extent: float | None = None) -> np.ndarray:
        """``int phi(x) cos(2 pi xi x) dx`` by panel Gauss-Legendre in x."""
        extent = extent or min(self.spec.table_extent, 400.0 * self.spec.order)
        w = self.spec.panel_width
        left = np.arange(0.0, extent, w)
        nodes = (left[:, None] + w / 2 * (1 + _GL_X[None, :])).ravel()
        weights = np.tile(_GL_W * w / 2, left.size)
        base = self.phi(nodes) * weights
        return np.array([2 * math.fsum(base * np.cos(2 * np.pi * x * nodes)) for x in np.atleast_1d(xi)])

    def normalization_error(self) -> float:
        """``|2 int_0^inf F / ||F||_1 - 1|``; nonzero only for the uniform family."""
        return abs(2 * math.exp(self._tail_nodes[0] - self.log_norm) - 1.0)


def build_kernel(spec: KernelSpec) -> Kernel:
    if spec.grid_step >= 0.4:
        raise PrecisionError("x-side step must be below 0.4 to resolve transforms up to |xi| = 1.5")
    scales = kernel_scales(spec.family, spec.order)
    w = spec.panel_width
    n_panels = int(math.ceil(spec.table_extent / w))
    left = np.arange(n_panels) * w
    nodes = left[:, None] + w / 2 * (1 + _GL_X[None, :])
    proto = Kernel(spec, scales, 0.0, False, np.zeros(2))
    with np.errstate(divide="ignore"):
        panel = logsumexp(proto.log_F(nodes) + np.log(_GL_W * w / 2)[None, :], axis=1)
    env = proto.log_tail_envelope(n_panels * w)[0]
    rev = np.logaddexp.accumulate(np.concatenate([[env], panel[::-1]]))
    tail_nodes = rev[::-1]  # tail_nodes[j] = log int_{j w}^inf F
    if spec.family == "uniform":
        m = spec.order
        centre = irwin_hall_center(2 * m)
        log_norm = math.log(m) + math.log(centre.numerator) - math.log(centre.denominator)
        exact = True
    else:
        log_norm = math.log(2.0) + tail_nodes[0]
        exact = False
    return Kernel(spec, scales, log_norm, exact, tail_nodes)


@lru_cache(maxsize=16)
def cached_kernel(spec: KernelSpec) -> Kernel:
    return build_kernel(spec)


def support_check(kernel: Kernel, points=(1.05, 1.25, 1.5, 2.0, 3.0)) -> dict:
    vals = kernel.fourier_quadrature(points)
    return {"xi": list(points), "values": vals.tolist(), "max_abs": float(np.max(np.abs(vals))),
            "certified": bool(np.max(np.abs(vals)) < 1e-10)}


def parseval_check(kernel: Kernel) -> dict:
    """``int phi_c^2`` in x-space (trapezoid) against the exact Irwin-Hall value in xi-space."""
    if kernel.spec.family != "uniform":
        raise ConfigError("xi-side value is exact only for the uniform family")
    m = kernel.spec.order
    step = kernel.spec.grid_step
    if step >= 0.5:
        raise PrecisionError("trapezoid step must be below 1/2 for a transform supported in [-2, 2]")
    extent = min(kernel.spec.table_extent, 400.0 * m)
    x = np.arange(1, int(extent / step) + 1) * step
    sq = np.exp(2 * (kernel.log_F(x) - kernel.log_norm))
    x_side = step * math.fsum([math.exp(-2 * kernel.log_norm), 2 * math.fsum(sq)])
    num, den = irwin_hall_center(4 * m), irwin_hall_center(2 * m) ** 2
    ratio = num / den
    xi_side = float(ratio) / m
    scale = kernel.spec.scale
    return {"x_side": scale * x_side, "xi_side": scale * xi_side,
            "rel_diff": abs(x_side - xi_side) / xi_side, "passed": bool(abs(x_side - xi_side) / xi_side < 1e-8)}


# -- smoothed indicators ---------------------------------------------------------------

@dataclass
class HValues:
    x: np.ndarray
    log_h: np.ndarray
    log_1mh: np.ndarray
    envelope: np.ndarray  # True where the values are rigorous bounds, not estimates

    @property
    def h(self) -> np.ndarray:
        return np.exp(self.log_h)


def h_pm(x, spec: KernelSpec, sign: int, kernel: Kernel | None = None) -> HValues:
    """``h = 1_[lo, hi] * phi_c`` at ``x`` with ``[lo, hi]`` from :meth:`KernelSpec.interval`."""
    spec.check_overspill()
    kernel = kernel or cached_kernel(spec)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = spec.interval(sign)
    S = spec.scale
    u1, u2 = S * (x - lo), S * (x - hi)
    log_h = np.empty(x.size)
    log_1mh = np.empty(x.size)
    env = np.zeros(x.size, dtype=bool)

    right = u2 >= 0
    left = u1 <= 0
    inside = ~(right | left)
    for mask, near, far in ((right, u2, u1), (left, -u1, -u2)):
        if not mask.any():
            continue
        ln, fn = kernel.log_upper_tail(near[mask])
        lf, ff = kernel.log_upper_tail(far[mask])
        gap = np.minimum(lf - ln, 0.0)
        # a far tail that is only bounded is dropped, which keeps an upper bound on h
        with np.errstate(divide="ignore"):
            corr = np.where(ff, 0.0, np.log1p(-np.exp(gap)))
        log_h[mask] = ln + corr
        env[mask] = fn | ff
    if inside.any():
        a, fa = kernel.log_upper_tail(u1[inside])
        b, fb = kernel.log_upper_tail(-u2[inside])
        log_1mh[inside] = np.logaddexp(a, b)
        env[inside] = fa | fb
    with np.errstate(divide="ignore"):
        out = ~inside
        log_1mh[out] = np.log1p(-np.exp(np.minimum(log_h[out], 0.0)))
        log_h[inside] = np.log1p(-np.exp(np.minimum(log_1mh[inside], 0.0)))
    return HValues(x, log_h, log_1mh, env)


def h_reference(x: float, spec: KernelSpec, sign: int, dps: int = 40):
    """``h`` by mpmath quadrature over the finite interval, as an independent check."""
    if spec.family != "uniform":
        raise ConfigError("reference quadrature implemented for the uniform family")
    m = spec.order
    lo, hi = spec.interval(sign)
    kernel = cached_kernel(spec)
    S_f = spec.scale
    a_f, b_f = S_f * (x - hi), S_f * (x - lo)
    # drop |u| > cut once the envelope says the rest is below working precision
    log_est = float(h_pm([x], spec, sign, kernel).log_h[0])
    near = 0.0 if a_f < 0 < b_f else min(abs(a_f), abs(b_f))
    cut = max(near, 1.0) * 1.01
    target = log_est - (dps + 5) * math.log(10)
    while kernel.log_tail_envelope(cut)[0] - kernel.log_norm > target:
        cut *= 1.25
        if cut > 1e7:
            break
    a_f, b_f = max(a_f, -cut), min(b_f, cut)
    step = min(1.0, m / 8.0)
    n_pieces = int(math.ceil((b_f - a_f) / step))
    if n_pieces > 20_000:
        raise BudgetError("reference quadrature interval too long")
    with mpmath.workdps(dps):
        centre = irwin_hall_center(2 * m)
        norm = m * mpmath.mpf(centre.numerator) / centre.denominator
        f = lambda u: mpmath.sinc(mpmath.pi * u / m) ** (2 * m) / norm
        S = mpmath.mpf(spec.Delta) ** spec.c_exp
        xm = mpmath.mpf(x)
        a = max(S * (xm - mpmath.mpf(hi)), -mpmath.mpf(cut))
        b = min(S * (xm - mpmath.mpf(lo)), mpmath.mpf(cut))
        cuts = [a + (b - a) * k / n_pieces for k in range(n_pieces + 1)]
        return mpmath.fsum(mpmath.quad(f, [cuts[k], cuts[k + 1]], method="gauss-legendre")
                           for k in range(n_pieces))


def transition_measure(spec: KernelSpec, sign: int = 1, eps: float = 1e-3, n: int = 4001) -> float:
    """Length of ``{x : eps < h(x) < 1 - eps}``, measured on grids around both edges."""
    kernel = cached_kernel(spec)
    lo, hi = spec.interval(sign)
    width = 80.0 * math.sqrt(spec.order) / spec.scale
    total = 0.0
    for edge in (lo, hi):
        x = np.linspace(edge - width, edge + width, n)
        hv = h_pm(x, spec, sign, kernel)
        mid = (hv.log_h > math.log(eps)) & (hv.log_1mh > math.log(eps))
        total += mid.sum() * (x[1] - x[0])
    return total


# -- Taylor polynomials ------------------------------------------------------------------

def approx_degree(spec: KernelSpec, X: float) -> int:
    return int(math.ceil(100 * X * spec.scale))


def log_remainder_bound(spec: KernelSpec, X: float, nu: int | None = None) -> float:
    """``log[(2 pi X)^nu / nu! * Delta^{c (nu + 2)}]``."""
    nu = approx_degree(spec, X) if nu is None else nu
    return nu * math.log(2 * math.pi * X) - math.lgamma(nu + 1) + spec.c_exp * (nu + 2) * math.log(spec.Delta)


def log_coefficient_bound(spec: KernelSpec, ell) -> np.ndarray:
    ell = np.asarray(ell, dtype=float)
    from scipy.special import gammaln

    return ell * math.log(2 * math.pi) - gammaln(ell + 1) + spec.c_exp * (ell + 2) * math.log(spec.Delta)


@dataclass
class ApproxPolynomial:
    coefficients: tuple  # mpmath reals, coefficient of x^l
    degree: int
    X: float
    sign: int
    log_remainder: float
    dps: int
    route: str

    def log_abs_coefficients(self) -> np.ndarray:
        with mpmath.workdps(self.dps):
            return np.array([float(mpmath.log(abs(c))) if c != 0 else -math.inf for c in self.coefficients])

    def __call__(self, x):
        with mpmath.workdps(self.dps):
            xm = mpmath.mpf(x)
            acc = mpmath.mpf(0)
            for c in reversed(self.coefficients):
                acc = acc * xm + c
            return acc


def _working_dps(spec: KernelSpec, X: float, floor_digits: int) -> int:
    peak = 2 * math.pi * X * spec.scale / math.log(10)
    return int(peak) + floor_digits + 20


@lru_cache(maxsize=8)
def _gl_nodes(n: int, dps: int):
    """Gauss-Legendre nodes on ``[-1, 1]`` (``n`` even), Newton-refined from the double-precision set."""
    if n % 2:
        raise ValueError("use an even node count")
    with mpmath.workdps(dps + 10):
        mp = mpmath.mp
        start, _ = np.polynomial.legendre.leggauss(n)
        iters = 2
        while 15 * 2 ** (iters - 1) < dps + 10:
            iters += 1
        xs, ws = [], []
        for guess in start[n // 2 :]:
            x = mp.mpf(guess)
            for _ in range(iters):
                p0, p1 = mp.one, x
                for k in range(2, n + 1):
                    p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
                dp = n * (x * p1 - p0) / (x * x - 1)
                x -= p1 / dp
            w = 2 / ((1 - x * x) * dp * dp)
            xs += [x, -x]
            ws += [w, w]
    return tuple(xs), tuple(ws)


def d_poly(spec: KernelSpec, X: float, sign: int, gate: int = DEGREE_GATE, floor_digits: int = 30) -> ApproxPolynomial:
    """Degree-``nu`` truncation of the Fourier-side Taylor expansion of ``h``.

    Coefficient ``l`` is ``(2 pi i)^l / l! * int xi^l h^(xi) d xi``, with the
    moments taken by Gauss-Legendre quadrature on each polynomial piece of
    the transform. Arithmetic is carried in mpmath at a precision covering
    the largest intermediate term ``~exp(2 pi X Delta^c)``.
    """
    if X <= 1:
        raise ConfigError("validity radius X must exceed 1")
    if spec.family != "uniform":
        raise ConfigError("explicit polynomials need the piecewise-polynomial transform")
    spec.check_overspill()
    nu = approx_degree(spec, X)
    if nu > gate:
        raise BudgetError(f"degree {nu} exceeds desk-scale gate {gate}")
    m = spec.order
    per_piece = 2 * ((nu + 2 * m) // 4 + 20)
    if m * per_piece * nu > MOMENT_COST_GATE:
        raise BudgetError(f"moment quadrature cost {m * per_piece * nu:.3g} exceeds {MOMENT_COST_GATE:.3g}")
    dps = _working_dps(spec, X, floor_digits)
    lo, hi = spec.interval(sign)
    with mpmath.workdps(dps):
        mp = mpmath.mp
        S = mp.mpf(spec.Delta) ** spec.c_exp
        lo_m, hi_m = mp.mpf(lo), mp.mpf(hi)
        width, centre_y = hi_m - lo_m, (hi_m + lo_m) / 2
        centre = irwin_hall_center(2 * m)
        f0 = mp.mpf(centre.numerator) / centre.denominator
        xs, ws = _gl_nodes(per_piece, dps)
        bits = int(dps * 3.33) + 64
        one = 1 << bits
        re_g, im_g, eta_fx = [], [], []
        for k in range(m):  # positive half; eta in [k/m, (k+1)/m]
            a, b = mp.mpf(k) / m, mp.mpf(k + 1) / m
            for xn, wn in zip(xs, ws):
                eta = (a + b) / 2 + (b - a) / 2 * xn
                weight = wn * (b - a) / 2
                fh = irwin_hall_density(m * eta + m, 2 * m) / f0
                xi = S * eta
                box = width * mp.sinc(mp.pi * width * xi) * mp.expj(-2 * mp.pi * xi * centre_y)
                g = weight * fh * box
                re_g.append(int(mp.nint(g.real * one)))
                im_g.append(int(mp.nint(g.imag * one)))
                eta_fx.append(int(mp.nint(eta * one)))
        coeffs = []
        two_pi = 2 * mp.pi
        for ell in range(nu):
            # m_l = int eta^l phi^(eta) 1^(S eta) d eta, folded over eta -> -eta
            if ell % 2 == 0:
                mom = 2 * mp.mpf(sum(re_g)) / one
                real_part = (-1) ** (ell // 2) * mom
            else:
                mom = 2 * mp.mpf(sum(im_g)) / one
                real_part = (-1) ** ((ell + 1) // 2) * mom
            coeffs.append(real_part * two_pi**ell * S ** (ell + 1) / mp.factorial(ell))
            re_g = [(g * e) >> bits for g, e in zip(re_g, eta_fx)]
            im_g = [(g * e) >> bits for g, e in zip(im_g, eta_fx)]
    return ApproxPolynomial(tuple(coeffs), nu, X, sign, log_remainder_bound(spec, X, nu), dps, "fourier-moments")


def _series_mul(a, b, n):
    out = [mpmath.mpf(0)] * n
    for i, ai in enumerate(a[:n]):
        if ai == 0:
            continue
        for j in range(min(len(b), n - i)):
            out[i + j] += ai * b[j]
    return out


def _series_pow(a, e, n):
    result = [mpmath.mpf(1)] + [mpmath.mpf(0)] * (n - 1)
    base = list(a[:n])
    while e:
        if e & 1:
            result = _series_mul(result, base, n)
        e >>= 1
        if e:
            base = _series_mul(base, base, n)
    return result


def _sinc_series(u0, scale, n):
    """Taylor coefficients in ``d`` of ``sinc(scale (u0 + d))`` (``sin(pi x)/(pi x)``)."""
    mp = mpmath.mp
    eps = mp.pi * scale
    z0 = eps * u0
    if z0 == 0:
        return [(-1) ** (j // 2) * eps**j / mp.factorial(j + 1) if j % 2 == 0 else mp.zero for j in range(n)]
    sin_part = [eps**j / mp.factorial(j) * mp.sin(z0 + j * mp.pi / 2) for j in range(n)]
    inv = [(-eps / z0) ** j / z0 for j in range(n)]
    return _series_mul(sin_part, inv, n)


def taylor_coefficients(spec: KernelSpec, sign: int, n_terms: int, X: float = 2.0, floor_digits: int = 30,
                        dps: int | None = None):
    """Taylor coefficients of ``h`` at 0 from the x-side series of the kernel.

    Uses ``h'(x) = phi_c(x - lo) - phi_c(x - hi)``; independent of the
    Fourier-side moments used by :func:`d_poly`.
    """
    if spec.family != "uniform":
        raise ConfigError("series route implemented for the uniform family")
    m = spec.order
    lo, hi = spec.interval(sign)
    dps = _working_dps(spec, X, floor_digits) if dps is None else dps
    # expanding 1/(z0 + eps d) cancels against the factorial decay of the
    # true coefficients when |u0| is small; pay for it in working digits
    u_min = spec.scale * min(abs(lo), abs(hi))
    j = np.arange(n_terms)
    lost = -j * math.log10(u_min) - j * math.log10(math.pi / m) + np.array([math.lgamma(k + 1) for k in j]) / math.log(10)
    series_dps = dps + int(max(0.0, float(lost.max()))) + 10
    with mpmath.workdps(series_dps):
        mp = mpmath.mp
        S = mp.mpf(spec.Delta) ** spec.c_exp
        centre = irwin_hall_center(2 * m)
        norm = m * mp.mpf(centre.numerator) / centre.denominator
        parts = []
        for point in (-S * mp.mpf(lo), -S * mp.mpf(hi)):
            base = _sinc_series(point, mp.mpf(1) / m, n_terms)
            parts.append([c / norm for c in _series_pow(base, 2 * m, n_terms)])
        coeffs = [h_reference(0.0, spec, sign, dps)]
        for ell in range(1, n_terms):
            coeffs.append(S**ell * (parts[0][ell - 1] - parts[1][ell - 1]) / ell)
    with mpmath.workdps(dps):
        coeffs = [+c for c in coeffs]
    return ApproxPolynomial(tuple(coeffs), n_terms, X, sign, log_remainder_bound(spec, X, n_terms), dps, "x-series")


def coefficient_bound_check(poly: ApproxPolynomial, spec: KernelSpec) -> dict:
    logs = poly.log_abs_coefficients()
    bound = log_coefficient_bound(spec, np.arange(logs.size))
    slack = bound - logs
    return {"n": int(logs.size), "violations": int(np.sum(slack < 0)), "min_log_slack": float(np.min(slack)),
            "passed": bool(np.all(slack >= 0))}


def remainder_check(poly: ApproxPolynomial, spec: KernelSpec, n_points: int = 21, floor: float = 1e-40) -> dict:
    """Grid max of ``|D - h|`` on ``|x| <= X`` against the declared remainder bound.

    The bound is usually far below any working precision, so the comparison
    adds a stated evaluation floor.
    """
    xs = np.linspace(-poly.X, poly.X, n_points)
    gaps = []
    for x in xs:
        with mpmath.workdps(poly.dps):
            gaps.append(abs(poly(x) - h_reference(float(x), spec, poly.sign, poly.dps)))
    worst = max(gaps)
    with mpmath.workdps(poly.dps):
        allowed = mpmath.exp(poly.log_remainder) + floor
        return {"max_gap": float(worst), "log_remainder_bound": poly.log_remainder, "floor": floor,
                "passed": bool(worst <= allowed)}


# -- sandwich verification ----------------------------------------------------------------

def default_grid(spec: KernelSpec, n_core: int = 9000, n_far: int = 1000, X: float = 2.0) -> np.ndarray:
    inner = spec.Delta ** -spec.a
    top = 1.0 / spec.Delta
    core = np.linspace(-2 * inner, top + 2 * inner, n_core)
    far_r = top + 2 * inner + np.geomspace(1e-3, X, n_far // 2)
    far_l = -2 * inner - np.geomspace(1e-3, X, n_far - n_far // 2)
    return np.sort(np.concatenate([core, far_l, far_r]))


INEQUALITIES = ("h+ lower", "h+ upper", "h- lower", "h- upper",
                "D+ lower", "D+ upper", "D- lower", "D- upper", "nesting")


@dataclass
class SandwichReport:
    Delta: float
    n_points: int
    violations: dict
    min_log_slack: dict
    polynomial: str
    log_remainder: float
    exponents: dict

    @property
    def total_violations(self) -> int:
        return int(sum(self.violations.values()))

    def to_dict(self) -> dict:
        return {"Delta": self.Delta, "n_points": self.n_points, "violations": self.violations,
                "total_violations": self.total_violations, "min_log_slack": self.min_log_slack,
                "polynomial": self.polynomial, "log_remainder": self.log_remainder, "exponents": self.exponents}


def _one_sided(name, lhs, rhs, report_v, report_s, tol=1e-12):
    """Record ``lhs <= rhs`` (both in log space) over the points where it applies."""
    if lhs.size == 0:
        report_v[name] = 0
        report_s[name] = math.inf
        return
    slack = rhs - lhs
    report_v[name] = int(np.sum(slack < -tol))
    report_s[name] = float(np.min(slack))


def verify_sandwich(spec: KernelSpec, grid=None, X: float = 2.0) -> SandwichReport:
    """Count violations of the h and ``|D|^2`` two-sided inequalities on a grid.

    ``D`` is represented as ``h - R`` with ``|R|`` at most the Taylor
    remainder bound at degree ``nu = ceil(100 X Delta^c)``; points with
    ``|x| > X`` are excluded from the ``D`` checks.
    """
    spec.check_overspill()
    kernel = cached_kernel(spec)
    x = default_grid(spec, X=X) if grid is None else np.asarray(grid, dtype=float)
    D = spec.Delta
    inner, top = D**-spec.a, 1.0 / D
    e_h_low = D ** (spec.c_exp - spec.b_exp - 1)  # h+ lower, h- upper
    e_h_high = D ** (spec.c_exp - spec.a - 1)  # h+ upper, h- lower
    e_d = D ** (spec.a - 2)
    hp = h_pm(x, spec, +1, kernel)
    hm = h_pm(x, spec, -1, kernel)
    log_B = log_remainder_bound(spec, X)
    viol, slack = {}, {}

    in_main = (x >= 0) & (x <= top)
    in_wide = (x >= -inner) & (x <= top + inner)
    in_narrow = (x >= inner) & (x <= top - inner)

    # h+: 1 - h+ <= e^{-E1} on [0, 1/D]; h+ <= e^{-E2} outside the widened interval
    _one_sided("h+ lower", hp.log_1mh[in_main], np.full(in_main.sum(), -e_h_low), viol, slack)
    _one_sided("h+ upper", hp.log_h[~in_wide], np.full((~in_wide).sum(), -e_h_high), viol, slack)
    # h-: 1 - h- <= e^{-E2} on the narrow interval; h- <= e^{-E1} outside [0, 1/D]
    _one_sided("h- lower", hm.log_1mh[in_narrow], np.full(in_narrow.sum(), -e_h_high), viol, slack)
    _one_sided("h- upper", hm.log_h[~in_main], np.full((~in_main).sum(), -e_h_low), viol, slack)

    # nesting 0 <= h- <= h+ <= 1: compare log h where small, log(1-h) where near one
    near_one = hp.log_h > math.log(0.5)
    nest_lhs = np.where(near_one, -hm.log_1mh, hm.log_h)
    nest_rhs = np.where(near_one, -hp.log_1mh, hp.log_h)
    _one_sided("nesting", nest_lhs, nest_rhs + 1e-12 * np.abs(nest_rhs), viol, slack)

    within = np.abs(x) <= X
    for tag, hv, low_set, high_set in (("D+", hp, in_main, in_wide), ("D-", hm, in_narrow, in_main)):
        # |D|^2 >= (h - B)^2, so 1 - |D|^2 <= (1 - h + B)(1 + h)
        lo_mask = low_set & within
        one_minus = np.logaddexp(hv.log_1mh[lo_mask], log_B) + np.log1p(np.exp(hv.log_h[lo_mask]))
        _one_sided(f"{tag} lower", one_minus, np.full(lo_mask.sum(), -e_d), viol, slack)
        # |D|^2 <= (h + B)^2 outside the upper indicator, and <= (1 + B)^2 inside it
        out_mask = ~high_set & within
        sq = 2 * np.logaddexp(hv.log_h[out_mask], log_B)
        in_mask = high_set & within
        sq_in = 2 * np.log1p(np.exp(min(log_B, 0.0))) * np.ones(in_mask.sum())
        lhs = np.concatenate([sq, sq_in])
        rhs = np.concatenate([np.full(out_mask.sum(), -e_d), np.full(in_mask.sum(), math.log1p(math.exp(-e_d)))])
        _one_sided(f"{tag} upper", lhs, rhs, viol, slack)

    return SandwichReport(D, int(x.size), viol, slack, "h - R with remainder bound", log_B,
                          {"a": spec.a, "b": spec.b_exp, "c": spec.c_exp})


def sandwich_table(spec: KernelSpec, grid=None, X: float = 2.0) -> dict:
    """Per-point ``(x, h-, h+, D-^2, D+^2)`` columns for the CSV output, plus bounds flags."""
    kernel = cached_kernel(spec)
    x = default_grid(spec, X=X) if grid is None else np.asarray(grid, dtype=float)
    hp, hm = h_pm(x, spec, +1, kernel), h_pm(x, spec, -1, kernel)
    B = math.exp(log_remainder_bound(spec, X))
    return {"x": x, "h_minus": hm.h, "h_plus": hp.h, "D_minus_sq_upper": (hm.h + B) ** 2,
            "D_plus_sq_upper": (hp.h + B) ** 2, "envelope": hp.envelope | hm.envelope}


def certification_scan(spec: KernelSpec, deltas, X: float = 2.0) -> list[dict]:
    """Empirical certification: total violations for each ``Delta``."""
    rows = []
    for D in deltas:
        s = spec.with_delta(float(D))
        try:
            rep = verify_sandwich(s, X=X)
            rows.append({"Delta": float(D), "violations": rep.total_violations, "certified": rep.total_violations == 0,
                         "by_inequality": rep.violations})
        except ConfigError as exc:
            rows.append({"Delta": float(D), "violations": None, "certified": False, "error": str(exc)})
    return rows


def tail_requirements(spec: KernelSpec) -> dict:
    """Measured kernel tails against what the h-bounds need at this ``Delta``.

    The lower bounds need ``int_{D^{c-b}}^inf phi <= e^{-D^{c-b-1}}/2`` and the
    far bounds need ``int_{D^{c-a} - D^{c-b}}^inf phi <= e^{-D^{c-a-1}}``.
    """
    kernel = cached_kernel(spec)
    D = spec.Delta
    near_d = D ** (spec.c_exp - spec.b_exp)
    far_d = D ** (spec.c_exp - spec.a) - near_d
    (ln, lf), flags = kernel.log_upper_tail([near_d, far_d])
    need_n = -D ** (spec.c_exp - spec.b_exp - 1) - math.log(2)
    need_f = -D ** (spec.c_exp - spec.a - 1)
    return {"family": spec.family, "order": spec.order, "Delta": D,
            "near": {"d": near_d, "log_tail": float(ln), "required": need_n, "ok": bool(ln <= need_n)},
            "far": {"d": far_d, "log_tail": float(lf), "required": need_f, "ok": bool(lf <= need_f),
                    "envelope_only": bool(flags[1])}}
