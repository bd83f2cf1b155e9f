"""Posterior functionals of the shrinkage coefficient kappa = 1/(1 + lambda^2 tau^2).

All integrals are written in the local-variance variable t = lambda^2 (so that
kappa = 1/(1 + t tau^2)) and evaluated in y = log t with adaptive quadrature.
For an observation z = x/sigma the two basic integrals are

    D = int pi(t) (1 + t tau^2)^(-1/2) exp(-z^2 / (2 (1 + t tau^2))) dt
    N = int pi(t) (1 + t tau^2)^(-1/2) exp(...) * t tau^2 / (1 + t tau^2) dt

so that E(1 - kappa | x) = N / D and D / sqrt(2 pi) is the marginal density
of z given tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import logsumexp

from .errors import InvalidArgumentError, NoCrossingError, NumericFailureError
from .priors import Family, ShrinkagePriorSpec, log_L, log_range

TAIL_MARGIN = 40.0
MAX_PIECE = 20.0


@dataclass(frozen=True)
class PosteriorQuery:
    x: float
    tau: float
    sigma: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.x):
            raise InvalidArgumentError(f"x must be finite, got {self.x!r}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise InvalidArgumentError(f"tau must be positive, got {self.tau!r}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise InvalidArgumentError(f"sigma must be positive, got {self.sigma!r}")

    @property
    def z(self) -> float:
        return self.x / self.sigma


@dataclass(frozen=True)
class QuadratureSettings:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise InvalidArgumentError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise InvalidArgumentError("max_subdivisions must be >= 1")


DEFAULT_SETTINGS = QuadratureSettings()


def _softplus(v: float) -> float:
    # log(1 + e^v)
    if v > 0:
        return v + math.log1p(math.exp(-v))
    return math.log1p(math.exp(v))


def _scalar_log_prior_y(spec: ShrinkagePriorSpec):
    """y -> log(pi(e^y) e^y), the prior density of y = log lambda^2."""
    if spec.family is Family.TPBN:
        s = spec.alpha + spec.beta
        log_K, a = spec.log_K, spec.a
        return lambda y: log_K - a * y - s * _softplus(-y)
    return lambda y: spec.log_K - spec.a * y + log_L(spec, math.exp(y))


def _integrand(spec, z, tau, with_numerator):
    log_prior = _scalar_log_prior_y(spec)
    log_tau2 = 2.0 * math.log(tau)
    half_z2 = 0.5 * z * z

    def fn(y):
        r = y + log_tau2  # log(t tau^2)
        sp = _softplus(r)  # log(1 + t tau^2)
        val = log_prior(y) - 0.5 * sp - half_z2 * math.exp(-sp)
        if with_numerator:
            val -= _softplus(-r)  # log(t tau^2 / (1 + t tau^2))
        return val

    return fn


def _y_range(spec, z, tau, cut=None):
    y_tau = -2.0 * math.log(tau)
    y_z = y_tau + 2.0 * math.log(max(abs(z), 1.0))
    lo_pad = log_range(spec, TAIL_MARGIN)[0]
    y_lo = min(0.0, y_tau) + lo_pad
    y_hi = max(0.0, y_tau, y_z) + TAIL_MARGIN / (spec.a + 0.5)
    points = [0.0, y_tau, y_z]
    if cut is not None:
        y_lo = min(y_lo, cut + lo_pad)
        y_hi = max(y_hi, cut + TAIL_MARGIN / (spec.a + 0.5))
    return y_lo, y_hi, points


def _pieces(lo, hi, points):
    edges = sorted({lo, hi, *(p for p in points if lo < p < hi)})
    out = []
    for u, v in zip(edges[:-1], edges[1:]):
        n = max(1, math.ceil((v - u) / MAX_PIECE))
        step = (v - u) / n
        out.extend((u + i * step, u + (i + 1) * step if i < n - 1 else v) for i in range(n))
    return out


def _log_quad(fn, lo, hi, points, settings):
    """log of the integral of exp(fn) over [lo, hi], piecewise with local shifts."""
    logs = []
    for u, v in _pieces(lo, hi, points):
        probe = [fn(y) for y in np.linspace(u, v, 33)]
        shift = max(probe)
        if shift == -math.inf:
            continue
        val, err, info, *rest = integrate.quad(
            lambda y: math.exp(fn(y) - shift),
            u,
            v,
            epsabs=settings.abs_tol,
            epsrel=settings.rel_tol,
            limit=settings.max_subdivisions,
            full_output=1,
        )
        if rest and err > 10 * max(settings.abs_tol, settings.rel_tol * abs(val)):
            raise NumericFailureError(
                f"posterior quadrature did not converge on [{u:.3g}, {v:.3g}]",
                achieved_tolerance=err / val if val > 0 else math.inf,
            )
        if val > 0:
            logs.append(math.log(val) + shift)
    if not logs:
        return -math.inf
    return float(logsumexp(logs))


def log_denominator(spec, z, tau, settings=DEFAULT_SETTINGS) -> float:
    """log D(z, tau) for the standardized observation z."""
    y_lo, y_hi, points = _y_range(spec, z, tau)
    return _log_quad(_integrand(spec, z, tau, False), y_lo, y_hi, points, settings)


def _log_numerator(spec, z, tau, settings):
    y_lo, y_hi, points = _y_range(spec, z, tau)
    return _log_quad(_integrand(spec, z, tau, True), y_lo, y_hi, points, settings)


def _split_denominator(spec, z, tau, y_cut, settings):
    """log of the D-integral over y < y_cut and over y > y_cut."""
    y_lo, y_hi, points = _y_range(spec, z, tau, cut=y_cut)
    fn = _integrand(spec, z, tau, False)
    below = _log_quad(fn, y_lo, y_cut, points, settings) if y_cut > y_lo else -math.inf
    above = _log_quad(fn, y_cut, y_hi, points, settings) if y_cut < y_hi else -math.inf
    return below, above


def _check_unit(name, value):
    if not (0.0 < value < 1.0):
        raise InvalidArgumentError(f"{name} must lie in (0, 1), got {value!r}")


def posterior_kappa_logdensity_unnorm(spec: ShrinkagePriorSpec, q: PosteriorQuery, kappa: float) -> float:
    """Unnormalized log posterior density of kappa given (x, tau, sigma)."""
    _check_unit("kappa", kappa)
    a = spec.a
    t = (1.0 / q.tau**2) * (1.0 / kappa - 1.0)
    return (a - 0.5) * math.log(kappa) - (a + 1) * math.log1p(-kappa) + log_L(spec, t) - 0.5 * kappa * q.z**2


def posterior_kappa_density(spec, q: PosteriorQuery, kappa: float, settings=DEFAULT_SETTINGS, log_d=None) -> float:
    """Normalized posterior density of kappa.

    The normalizing constant of the unnormalized form equals D / (K tau^(2a)).
    """
    if log_d is None:
        log_d = log_denominator(spec, q.z, q.tau, settings)
    log_norm = log_d - spec.log_K - 2 * spec.a * math.log(q.tau)
    return math.exp(posterior_kappa_logdensity_unnorm(spec, q, kappa) - log_norm)


def mean_shrinkage_weight(spec: ShrinkagePriorSpec, q: PosteriorQuery, settings: QuadratureSettings = DEFAULT_SETTINGS) -> float:
    """E(1 - kappa | x, tau, sigma)."""
    log_n = _log_numerator(spec, q.z, q.tau, settings)
    log_d = log_denominator(spec, q.z, q.tau, settings)
    return min(1.0, max(0.0, math.exp(log_n - log_d)))


def _kappa_cut_y(kappa_level: float, tau: float) -> float:
    # kappa < level  <=>  t > (1/tau^2)(1/level - 1)
    return math.log1p(-kappa_level) - math.log(kappa_level) - 2.0 * math.log(tau)


def tail_prob_kappa_below(spec, q: PosteriorQuery, eps: float, settings=DEFAULT_SETTINGS) -> float:
    """Pr(kappa < eps | x, tau, sigma)."""
    _check_unit("eps", eps)
    below, above = _split_denominator(spec, q.z, q.tau, _kappa_cut_y(eps, q.tau), settings)
    return math.exp(above - np.logaddexp(below, above))


def tail_prob_kappa_above(spec, q: PosteriorQuery, eta: float, settings=DEFAULT_SETTINGS) -> float:
    """Pr(kappa > eta | x, tau, sigma)."""
    _check_unit("eta", eta)
    below, above = _split_denominator(spec, q.z, q.tau, _kappa_cut_y(eta, q.tau), settings)
    return math.exp(below - np.logaddexp(below, above))


def posterior_mean_mu(spec, q: PosteriorQuery, settings=DEFAULT_SETTINGS) -> float:
    """E(mu | x, tau, sigma) = E(1 - kappa | x, tau, sigma) * x."""
    return mean_shrinkage_weight(spec, q, settings) * q.x


def weight_threshold_x(spec, tau: float, sigma: float = 1.0, level: float = 0.5, settings=DEFAULT_SETTINGS, xtol: float = 1e-10) -> float:
    """The |x| at which the shrinkage weight crosses ``level``.

    Uses that the weight is nondecreasing in |x| and tends to 1.
    """
    _check_unit("level", level)
    PosteriorQuery(0.0, tau, sigma)

    def excess(z):
        return mean_shrinkage_weight(spec, PosteriorQuery(z, tau, 1.0), settings) - level

    at_zero = excess(0.0)
    if at_zero >= 0:
        raise NoCrossingError(f"weight at x=0 is {at_zero + level:.6g}, already >= level {level}")
    hi = max(1.0, math.sqrt(max(0.0, 2.0 * math.log(1.0 / tau**2))))
    f_hi = excess(hi)
    lo = 0.0
    while f_hi <= 0:
        lo = hi
        hi *= 2.0
        if hi > 1e6:
            raise NoCrossingError(f"weight does not reach level {level} for |x| up to 1e6")
        f_hi = excess(hi)
    try:
        z_star = optimize.brentq(excess, lo, hi, xtol=xtol / sigma, maxiter=200)
    except (RuntimeError, ValueError) as exc:
        raise NumericFailureError(f"threshold search failed: {exc}") from exc
    return z_star * sigma
