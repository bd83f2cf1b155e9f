"""Two-groups model, Bayes Oracle, inclusion probabilities and Benjamini-Hochberg.

Under the two-groups model each X_i is N(0, sigma^2) with probability 1 - p and
N(0, sigma^2 + psi^2) with probability p.  Everything here is computed on the
standardized scale z = x / sigma with u = psi^2 / sigma^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import DegenerateRegimeError, InvalidArgumentError, MissingLimitError


@dataclass(frozen=True)
class TwoGroupsParams:
    m: int
    p: float
    psi2: float
    sigma2: float = 1.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise InvalidArgumentError(f"m must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))
        if not (0.0 < self.p < 1.0):
            raise InvalidArgumentError(f"p must lie in (0, 1), got {self.p!r}")
        if not (self.psi2 > 0 and math.isfinite(self.psi2)):
            raise InvalidArgumentError(f"psi2 must be positive, got {self.psi2!r}")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise InvalidArgumentError(f"sigma2 must be positive, got {self.sigma2!r}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def u(self) -> float:
        return self.psi2 / self.sigma2


@dataclass(frozen=True)
class OracleQuantities:
    """Derived Oracle constants; ``c2`` is the threshold on (x / sigma)^2."""

    u: float
    f: float
    v: float
    c2: float
    C: float | None = None
    sigma2: float = 1.0

    @property
    def c(self) -> float:
        return math.sqrt(self.c2)

    def to_dict(self) -> dict:
        return {"u": self.u, "f": self.f, "v": self.v, "c2": self.c2, "C": self.C}


def derive_oracle(params: TwoGroupsParams, C: float | None = None) -> OracleQuantities:
    u = params.u
    f = (1.0 - params.p) / params.p
    v = u * f * f
    inner = math.log(v) + math.log1p(1.0 / u)
    if not inner > 0:
        raise DegenerateRegimeError(f"log v + log(1 + 1/u) = {inner:.6g} is not positive; Oracle threshold undefined", value=inner)
    c2 = (1.0 + 1.0 / u) * inner
    return OracleQuantities(u=u, f=f, v=v, c2=c2, C=C, sigma2=params.sigma2)


def oracle_decide(x, oq: OracleQuantities):
    """Reject iff x^2 / sigma^2 > c^2 (vectorised)."""
    z2 = np.square(np.asarray(x, dtype=float)) / oq.sigma2
    out = z2 > oq.c2
    return bool(out) if out.ndim == 0 else out


def threshold_errors(theta: float, u: float) -> tuple[float, float]:
    """Type I and II error probabilities of the rule |z| > theta."""
    t1 = float(special.erfc(theta / math.sqrt(2.0)))
    t2 = float(special.erf(theta / math.sqrt(2.0 * (1.0 + u))))
    return t1, t2


def threshold_risk(theta: float, params: TwoGroupsParams) -> float:
    """Expected number of misclassifications of the rule |x| / sigma > theta."""
    t1, t2 = threshold_errors(theta, params.u)
    return params.m * ((1.0 - params.p) * t1 + params.p * t2)


def oracle_exact_errors(params: TwoGroupsParams, oq: OracleQuantities | None = None) -> tuple[float, float, float]:
    if oq is None:
        oq = derive_oracle(params)
    t1, t2 = threshold_errors(oq.c, params.u)
    return t1, t2, params.m * ((1.0 - params.p) * t1 + params.p * t2)


def oracle_asymptotic_risk(oq: OracleQuantities, m: int, p: float) -> tuple[float, float, float]:
    if oq.C is None:
        raise MissingLimitError("asymptotic Oracle risk needs the limit constant C")
    log_v = math.log(oq.v)
    t1 = math.exp(-oq.C / 2) * math.sqrt(2.0 / (math.pi * oq.v * log_v))
    t2 = float(special.erf(math.sqrt(oq.C / 2.0)))
    return t1, t2, m * p * t2


def inclusion_probability(x, params: TwoGroupsParams):
    """Posterior probability that the i-th observation is a signal, given (p, psi^2)."""
    u = params.u
    z2 = np.square(np.asarray(x, dtype=float)) / params.sigma2
    log_odds_null = math.log((1 - params.p) / params.p) + 0.5 * math.log1p(u) - 0.5 * z2 * (u / (1 + u))
    out = special.expit(-log_odds_null)
    return float(out) if np.ndim(out) == 0 else out


def two_sided_pvalues(xs) -> np.ndarray:
    return special.erfc(np.abs(np.asarray(xs, dtype=float)) / math.sqrt(2.0))


def bh_procedure(xs, alpha: float) -> np.ndarray:
    """Benjamini-Hochberg step-up on two-sided normal p-values."""
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        raise InvalidArgumentError("BH needs at least one observation")
    if not (0.0 < alpha < 1.0):
        raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha!r}")
    pv = two_sided_pvalues(xs)
    m = pv.size
    ordered = np.sort(pv)
    below = np.nonzero(ordered <= alpha * np.arange(1, m + 1) / m)[0]
    if below.size == 0:
        return np.zeros(m, dtype=bool)
    return pv <= ordered[below[-1]]


@dataclass(frozen=True)
class AsymptoticSequence:
    """p = k m^(-epsilon) with psi^2 solving log(psi^2 f^2) / psi^2 = C (larger root)."""

    C: float
    epsilon: float
    k: float = 1.0
    sigma2: float = 1.0

    def __post_init__(self):
        if not self.C > 0:
            raise InvalidArgumentError("C must be positive")
        if not (0 < self.epsilon < 1):
            raise InvalidArgumentError("epsilon must lie in (0, 1)")
        if not self.k > 0:
            raise InvalidArgumentError("k must be positive")

    def p(self, m: int) -> float:
        p = self.k * m ** (-self.epsilon)
        if not (0 < p < 1):
            raise InvalidArgumentError(f"sequence gives p={p} outside (0, 1) at m={m}")
        return p

    def psi2(self, m: int) -> float:
        f = (1 - self.p(m)) / self.p(m)
        g = lambda u: math.log(u * f * f) - self.C * u
        lo = 1.0 / self.C
        if g(lo) <= 0:
            raise DegenerateRegimeError(f"log(u f^2)/u never reaches C={self.C} at m={m}", value=g(lo))
        hi = 2.0 * lo
        while g(hi) > 0:
            hi *= 2.0
        u = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
        return u * self.sigma2

    def params(self, m: int) -> TwoGroupsParams:
        return TwoGroupsParams(m=m, p=self.p(m), psi2=self.psi2(m), sigma2=self.sigma2)

    def oracle(self, m: int) -> OracleQuantities:
        return derive_oracle(self.params(m), C=self.C)
