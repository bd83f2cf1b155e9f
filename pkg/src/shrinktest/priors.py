"""Scale-mixture shrinkage priors with slowly varying mixing densities.

Every prior in this module has a local-variance density of the form

    pi(t) = K * t**(-a - 1) * L(t),    t = lambda**2 > 0,

with L slowly varying at infinity.  Two families are supported: the
three-parameter beta normal (TPBN) and the generalized double Pareto (GDP).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import InvalidArgumentError, NumericFailureError

GDP_REL_TOL = 1e-8


class Family(str, enum.Enum):
    TPBN = "TPBN"
    GDP = "GDP"


class RiskConditionWarning(UserWarning):
    """The prior falls outside the tail-index range used by the risk results."""


@dataclass(frozen=True)
class ShrinkagePriorSpec:
    """One member of the slowly varying family, with derived constants.

    ``lower_rate`` is the exponential decay rate of ``t * pi(t)`` in
    ``log t`` as ``t -> 0``; it is used to size integration ranges.
    """

    family: Family
    alpha: float
    beta: float
    a: float
    K: float
    L_limit: float
    L_sup: float
    lower_rate: float
    name: str = ""
    log_K: float = field(default=0.0, repr=False)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return f"{self.family.value}({self.alpha:g},{self.beta:g})"

    def to_dict(self) -> dict:
        return {
            "name": self.label,
            "family": self.family.value,
            "alpha": self.alpha,
            "beta": self.beta,
            "a": self.a,
            "K": self.K,
            "L_limit": self.L_limit,
            "L_sup": self.L_sup,
        }


def _positive(name, value):
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise InvalidArgumentError(f"{name} must be a positive finite number, got {value!r}")
    return value


def make_prior(family, alpha, beta, name: str = "") -> ShrinkagePriorSpec:
    """Build a prior spec and derive (a, K, L_limit, L_sup)."""
    try:
        family = Family(family.upper() if isinstance(family, str) else family)
    except ValueError:
        raise InvalidArgumentError(f"unknown family {family!r}") from None
    alpha = _positive("alpha", alpha)
    beta = _positive("beta", beta)
    if family is Family.TPBN:
        a = beta
        log_K = special.gammaln(alpha + beta) - special.gammaln(alpha) - special.gammaln(beta)
        L_limit = 1.0
        lower_rate = alpha
        if beta >= 1:
            warnings.warn(
                f"TPBN with beta={beta} has tail index a >= 1; the risk-ratio "
                "results for these rules need a in [1/2, 1)",
                RiskConditionWarning,
                stacklevel=2,
            )
    else:
        a = alpha / 2
        log_K = alpha * math.log(beta) - special.gammaln(alpha)
        L_limit = 2.0 ** (alpha / 2 - 1) * special.gamma(alpha / 2 + 1)
        # pi(t) tends to a finite positive constant at 0, so t*pi(t) ~ t.
        lower_rate = 1.0
    return ShrinkagePriorSpec(
        family=family,
        alpha=alpha,
        beta=beta,
        a=a,
        K=math.exp(log_K),
        L_limit=L_limit,
        L_sup=L_limit,
        lower_rate=lower_rate,
        name=name,
        log_K=float(log_K),
    )


def horseshoe() -> ShrinkagePriorSpec:
    return make_prior(Family.TPBN, 0.5, 0.5, name="horseshoe")


def strawderman_berger() -> ShrinkagePriorSpec:
    return make_prior(Family.TPBN, 1.0, 0.5, name="strawderman-berger")


def neg(beta: float = 0.6) -> ShrinkagePriorSpec:
    """Normal-exponential-gamma prior, i.e. TPBN(1, beta)."""
    return make_prior(Family.TPBN, 1.0, beta, name="neg")


def standard_double_pareto() -> ShrinkagePriorSpec:
    return make_prior(Family.GDP, 1.0, 1.0, name="standard-double-pareto")


PRESETS = {
    "horseshoe": horseshoe,
    "hs": horseshoe,
    "strawderman-berger": strawderman_berger,
    "sb": strawderman_berger,
    "neg": neg,
    "standard-double-pareto": standard_double_pareto,
    "sdp": standard_double_pareto,
    "gdp": standard_double_pareto,
}


def prior_from_name(name: str, alpha=None, beta=None) -> ShrinkagePriorSpec:
    """Resolve a preset name or a family tag (``TPBN``/``GDP`` need alpha and beta).

    For a preset, explicitly given hyperparameters override the preset values.
    """
    key = name.strip().lower()
    if key in ("tpbn", "gdp") and (alpha is not None or beta is not None):
        if alpha is None or beta is None:
            raise InvalidArgumentError(f"family {name} needs both --alpha and --beta")
        return make_prior(key.upper(), alpha, beta)
    if key == "tpbn":
        raise InvalidArgumentError("family TPBN needs --alpha and --beta")
    if key not in PRESETS:
        raise InvalidArgumentError(f"unknown prior {name!r}; choose from {sorted(set(PRESETS))} or TPBN/GDP")
    spec = PRESETS[key]()
    if alpha is None and beta is None:
        return spec
    return make_prior(
        spec.family,
        spec.alpha if alpha is None else alpha,
        spec.beta if beta is None else beta,
        name=spec.name,
    )


# -- slowly varying part ---------------------------------------------------


def _gdp_log_L_scalar(alpha: float, beta: float, t: float) -> float:
    # L(t) = 2^{alpha/2} int_0^inf v^{alpha+1} exp(-v^2 - c v) dv,  c = beta sqrt(2/t)
    c = beta * math.sqrt(2.0 / t)
    if c >= 1.0:
        # w = c v puts the peak of the integrand near w = alpha + 1
        inv_c2 = 1.0 / (c * c)
        fun = lambda w: math.exp((alpha + 1) * math.log(w) - w - w * w * inv_c2) if w > 0 else 0.0
        prefactor = (alpha / 2) * math.log(2.0) - (alpha + 2) * math.log(c)
        peak = alpha + 1
    else:
        fun = lambda v: math.exp((alpha + 1) * math.log(v) - v * v - c * v) if v > 0 else 0.0
        prefactor = (alpha / 2) * math.log(2.0)
        peak = math.sqrt((alpha + 1) / 2)
    # far enough past the peak that the remaining mass is below e^-60
    total, err_total = integrate.quad(fun, 0.0, peak + 60.0 + 10.0 * alpha, points=(peak,), epsabs=0.0, epsrel=GDP_REL_TOL * 0.1, limit=200)
    if not total > 0 or err_total > GDP_REL_TOL * total:
        raise NumericFailureError(
            f"GDP slowly varying integral did not converge at t={t:g}",
            achieved_tolerance=err_total / total if total > 0 else math.inf,
        )
    return prefactor + math.log(total)


def log_L(spec: ShrinkagePriorSpec, t):
    """log L(t), vectorised over ``t``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0)) or np.any(~np.isfinite(t_arr)):
        raise InvalidArgumentError("L(t) needs finite t > 0")
    if spec.family is Family.TPBN:
        out = -(spec.alpha + spec.beta) * np.log1p(1.0 / t_arr)
    else:
        flat = [_gdp_log_L_scalar(spec.alpha, spec.beta, float(v)) for v in t_arr.ravel()]
        out = np.asarray(flat, dtype=float).reshape(t_arr.shape)
    return float(out) if out.ndim == 0 else out


def eval_L(spec: ShrinkagePriorSpec, t):
    """The slowly varying factor L(t) of the mixing density."""
    return np.exp(log_L(spec, t))


def log_mixing_density(spec: ShrinkagePriorSpec, lambda2):
    lam = np.asarray(lambda2, dtype=float)
    out = spec.log_K - (spec.a + 1) * np.log(lam) + log_L(spec, lam)
    return float(out) if np.ndim(out) == 0 else out


def eval_mixing_density(spec: ShrinkagePriorSpec, lambda2):
    """pi(lambda^2) = K * lambda2^(-a-1) * L(lambda2)."""
    return np.exp(log_mixing_density(spec, lambda2))


def log_range(spec: ShrinkagePriorSpec, margin: float = 40.0) -> tuple[float, float]:
    """A range of log(lambda^2) holding all but ~e^-margin of the prior mass."""
    return -margin / spec.lower_rate, margin / spec.a


def prior_mass(spec: ShrinkagePriorSpec, lo: float = 0.0, hi: float = math.inf) -> float:
    """Prior probability of lambda^2 in (lo, hi), integrating in log(lambda^2)."""
    y_lo, y_hi = log_range(spec)
    if lo > 0:
        y_lo = max(y_lo, math.log(lo))
    if math.isfinite(hi):
        y_hi = min(y_hi, math.log(hi))
    if y_hi <= y_lo:
        return 0.0
    edges = np.unique(np.concatenate([[y_lo, y_hi], np.arange(math.ceil(y_lo / 10) * 10, y_hi, 10.0)]))
    total = 0.0
    for u, v in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(lambda y: math.exp(log_mixing_density(spec, math.exp(y)) + y), u, v, epsabs=0.0, epsrel=1e-10, limit=200)
        total += val
    return total


def check_prior(spec: ShrinkagePriorSpec) -> dict:
    """Evaluate the family invariants and return them as a JSON-friendly dict."""
    norm = prior_mass(spec)
    grid = np.logspace(-8, 12, 1000 if spec.family is Family.TPBN else 200)
    values = eval_L(spec, grid)
    slow = {}
    for c in (0.5, 2.0, 10.0):
        slow[f"{c:g}"] = {f"{t:g}": float(eval_L(spec, c * t) / eval_L(spec, t) - 1.0) for t in (1e4, 1e6, 1e8)}
    log_ratio = float(log_L(spec, 1e10) / math.log(1e10))
    # log L(t)/log t decays like log(L_limit)/log t, so families with
    # L_limit != 1 need astronomically large t to reach small values.
    trajectory = {f"{t:g}": float(log_L(spec, t) / math.log(t)) for t in (1e10, 1e50, 1e150, 1e300)}
    checks = {
        "normalization": {"value": norm, "pass": abs(norm - 1) <= 1e-6},
        "bounded_by_L_sup": {"max_L": float(values.max()), "pass": bool(values.max() <= spec.L_sup * (1 + 1e-9))},
        "nondecreasing": {"pass": bool(np.all(np.diff(values) >= -1e-12 * values[1:]))},
        "slow_variation_at_1e8": {
            "deviation": slow,
            "pass": all(abs(v["1e+08"]) <= 1e-3 for v in slow.values()),
        },
        "log_L_over_log_t_at_1e10": {"value": log_ratio, "trajectory": trajectory, "pass": abs(log_ratio) <= 1e-3},
    }
    return {"prior": spec.to_dict(), "checks": checks, "pass": all(c["pass"] for c in checks.values())}
