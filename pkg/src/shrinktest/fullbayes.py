"""Full-Bayes marginalization over (tau, sigma) on a deterministic log-scale grid.

The hyperprior is tau ~ half-Cauchy(0, 1) and pi(sigma) proportional to 1/sigma.
On a grid in (log tau, log sigma) the node log-mass is

    sum_i log g(x_i | tau, sigma) + log C+(tau) + log tau + log w_tau + log w_sigma

where log tau is the Jacobian of the tau density and the 1/sigma prior cancels
the Jacobian of log sigma.  Per-observation log marginals and shrinkage weights
come from Hermite tables built once per (prior, tau nodes).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DegeneratePosteriorError, GridEscapeError, InvalidArgumentError
from .kernels import ZTables
from .posterior import DEFAULT_SETTINGS, PosteriorQuery, log_denominator

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)


class GridEscapeWarning(UserWarning):
    pass


def _trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    if nodes.size == 1:
        return np.ones(1)
    gaps = np.diff(nodes)
    w = np.zeros(nodes.size)
    w[:-1] += gaps / 2
    w[1:] += gaps / 2
    return w


@dataclass(frozen=True)
class HyperGrid:
    """Log-uniform grid over (tau, sigma) with trapezoid weights in log space.

    ``on_escape`` is "error" or "warn": what to do when more than
    ``escape_tol`` of the posterior mass sits on boundary nodes.
    """

    log_tau: tuple
    log_sigma: tuple
    escape_tol: float = 1e-3
    on_escape: str = "error"
    w_tau: np.ndarray = field(init=False, repr=False, compare=False)
    w_sigma: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lt = np.asarray(self.log_tau, dtype=float)
        ls = np.asarray(self.log_sigma, dtype=float)
        if lt.ndim != 1 or ls.ndim != 1 or lt.size < 1 or ls.size < 1:
            raise InvalidArgumentError("grid nodes must be non-empty 1-d sequences")
        if np.any(np.diff(lt) <= 0) or np.any(np.diff(ls) <= 0):
            raise InvalidArgumentError("grid nodes must be strictly increasing")
        if self.on_escape not in ("error", "warn"):
            raise InvalidArgumentError("on_escape must be 'error' or 'warn'")
        object.__setattr__(self, "log_tau", tuple(float(v) for v in lt))
        object.__setattr__(self, "log_sigma", tuple(float(v) for v in ls))
        object.__setattr__(self, "w_tau", _trapezoid_weights(lt))
        object.__setattr__(self, "w_sigma", _trapezoid_weights(ls))

    @classmethod
    def log_uniform(cls, n_tau=96, tau_range=(1e-5, 1e2), n_sigma=48, sigma_range=(0.2, 5.0), **kw) -> "HyperGrid":
        lt = np.linspace(math.log(tau_range[0]), math.log(tau_range[1]), n_tau)
        ls = np.linspace(math.log(sigma_range[0]), math.log(sigma_range[1]), n_sigma)
        return cls(tuple(lt), tuple(ls), **kw)

    @property
    def taus(self) -> np.ndarray:
        return np.exp(np.asarray(self.log_tau))

    @property
    def sigmas(self) -> np.ndarray:
        return np.exp(np.asarray(self.log_sigma))

    def refined(self) -> "HyperGrid":
        """Same bounds with (about) twice the resolution in each direction."""
        lt, ls = np.asarray(self.log_tau), np.asarray(self.log_sigma)
        return HyperGrid(
            tuple(np.linspace(lt[0], lt[-1], 2 * lt.size - 1)),
            tuple(np.linspace(ls[0], ls[-1], 2 * ls.size - 1)),
            escape_tol=self.escape_tol,
            on_escape=self.on_escape,
        )


DEFAULT_GRID = HyperGrid.log_uniform()


@dataclass(frozen=True)
class HyperPosterior:
    grid: HyperGrid
    log_density: np.ndarray  # normalized log density per node w.r.t. d(log tau) d(log sigma)
    log_norm: float
    boundary_mass: float
    tau_quantiles: dict

    @property
    def prob(self) -> np.ndarray:
        """Node probabilities (density times weights); sums to one."""
        return np.exp(self.log_density) * np.outer(self.grid.w_tau, self.grid.w_sigma)

    def tau_marginal(self) -> np.ndarray:
        """Marginal posterior density of tau on the tau nodes (w.r.t. d tau)."""
        dens_log_tau = np.exp(self.log_density) @ self.grid.w_sigma
        return dens_log_tau / self.grid.taus


_TABLES: dict = {}


def tables_for(spec, grid: HyperGrid) -> ZTables:
    """Hermite tables for ``spec`` on the grid's tau nodes (cached)."""
    key = (spec, grid.log_tau)
    if key not in _TABLES:
        _TABLES[key] = ZTables(spec, grid.taus)
    return _TABLES[key]


def marginal_loglik_one(spec, x: float, tau: float, sigma: float, settings=DEFAULT_SETTINGS) -> float:
    """log of the marginal density of one observation given (tau, sigma), by adaptive quadrature."""
    q = PosteriorQuery(x, tau, sigma)
    return log_denominator(spec, q.z, tau, settings) - LOG_SQRT_2PI - math.log(sigma)


def log_half_cauchy(tau):
    return math.log(2 / math.pi) - np.log1p(np.square(tau))


def _quantiles(log_tau: np.ndarray, mass: np.ndarray, levels=QUANTILE_LEVELS) -> dict:
    cdf = np.cumsum(mass) - mass / 2
    out = {}
    for q in levels:
        out[f"{q:g}"] = float(np.exp(np.interp(q, cdf, log_tau)))
    return out


def _standardized(xs, grid):
    xs = np.asarray(xs, dtype=float).ravel()
    if xs.size == 0:
        raise InvalidArgumentError("hyper posterior needs at least one observation")
    if not np.all(np.isfinite(xs)):
        raise InvalidArgumentError("observations must be finite")
    return xs, np.abs(xs)[None, :] / grid.sigmas[:, None]


def hyper_posterior(spec, xs, grid: HyperGrid = DEFAULT_GRID, tables: ZTables | None = None) -> HyperPosterior:
    xs, zs = _standardized(xs, grid)
    if tables is None:
        tables = tables_for(spec, grid)
    m = xs.size
    log_sig = np.asarray(grid.log_sigma)
    loglik = tables.log_d_sums(zs) - m * (LOG_SQRT_2PI + log_sig)[None, :]
    log_prior = (log_half_cauchy(grid.taus) + np.asarray(grid.log_tau))[:, None]
    log_dens = loglik + log_prior
    log_w = np.log(np.outer(grid.w_tau, grid.w_sigma))
    finite = np.isfinite(log_dens)
    if not finite.any():
        raise DegeneratePosteriorError("every grid node has zero posterior mass")
    log_mass = np.where(finite, log_dens + log_w, -np.inf)
    log_norm = float(logsumexp(log_mass))
    if not math.isfinite(log_norm):
        raise DegeneratePosteriorError("posterior normalization is not finite")
    log_density = np.where(finite, log_dens - log_norm, -np.inf)
    prob = np.exp(log_mass - log_norm)
    edge = np.zeros(prob.shape, dtype=bool)
    edge[[0, -1], :] = True
    edge[:, [0, -1]] = True
    boundary = float(prob[edge].sum()) if prob.size > 1 else 0.0
    if boundary > grid.escape_tol:
        msg = f"{boundary:.3g} of the hyper-posterior mass lies on the grid boundary"
        if grid.on_escape == "error":
            raise GridEscapeError(msg, boundary_mass=boundary)
        warnings.warn(msg, GridEscapeWarning, stacklevel=2)
    quant = _quantiles(np.asarray(grid.log_tau), prob.sum(axis=1))
    return HyperPosterior(grid=grid, log_density=log_density, log_norm=log_norm, boundary_mass=boundary, tau_quantiles=quant)


def fb_shrinkage_weights(spec, xs, grid: HyperGrid = DEFAULT_GRID, posterior: HyperPosterior | None = None) -> np.ndarray:
    """Posterior-averaged shrinkage weights E(1 - kappa_i | x_1, ..., x_m)."""
    xs, zs = _standardized(xs, grid)
    tables = tables_for(spec, grid)
    if posterior is None:
        posterior = hyper_posterior(spec, xs, grid, tables)
    w = tables.mixed_weights(zs, posterior.prob)
    return np.clip(w, 0.0, 1.0)
