"""Multiple-testing procedures behind one interface.

Shrinkage rules reject H_0i when the statistic 1 - E(kappa_i | ...) strictly
exceeds 1/2.  TunedTau uses a tau derived from the true parameters,
EmpiricalBayes plugs in tau-hat, FullBayes averages over the hyper-posterior.
Oracle and BH are the reference procedures.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidArgumentError, MissingParameterError
from .fullbayes import DEFAULT_GRID, HyperGrid, fb_shrinkage_weights
from .oracle import TwoGroupsParams, bh_procedure, derive_oracle, two_sided_pvalues
from .posterior import DEFAULT_SETTINGS, PosteriorQuery, mean_shrinkage_weight
from .priors import ShrinkagePriorSpec

REJECT_LEVEL = 0.5


class ProcedureKind(str, enum.Enum):
    TUNED_TAU = "TunedTau"
    EMPIRICAL_BAYES = "EmpiricalBayes"
    FULL_BAYES = "FullBayes"
    ORACLE = "Oracle"
    BH = "BH"


@dataclass(frozen=True)
class TauRule:
    """How TunedTau picks tau: a fixed value, p, k*p, or p**exponent."""

    kind: str = "p"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("fixed", "p", "k*p", "p^A"):
            raise InvalidArgumentError(f"unknown tau rule {self.kind!r}")
        if not self.value > 0:
            raise InvalidArgumentError("tau rule constant must be positive")

    @classmethod
    def parse(cls, text: str) -> "TauRule":
        text = text.strip().replace(" ", "")
        if text == "p":
            return cls("p")
        if text.startswith("p^"):
            return cls("p^A", float(text[2:]))
        if text.endswith("*p"):
            return cls("k*p", float(text[:-2]))
        return cls("fixed", float(text))

    def resolve(self, params: TwoGroupsParams | None) -> float:
        if self.kind == "fixed":
            return self.value
        if params is None:
            raise MissingParameterError(f"tau rule {self.label} needs the true p")
        if self.kind == "p":
            return params.p
        if self.kind == "k*p":
            return self.value * params.p
        return params.p**self.value

    @property
    def label(self) -> str:
        return {"fixed": f"{self.value:g}", "p": "p", "k*p": f"{self.value:g}*p", "p^A": f"p^{self.value:g}"}[self.kind]


@dataclass(frozen=True)
class ProcedureSpec:
    kind: ProcedureKind
    prior: ShrinkagePriorSpec | None = None
    tau_rule: TauRule | None = None
    c1: float = 2.0
    c2: float = 1.0
    bh_alpha: float | None = None  # None means 1 / log m
    grid: HyperGrid = DEFAULT_GRID
    engine: str = "kernel"  # "kernel" (fixed-node) or "adaptive" (reference quadrature)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", ProcedureKind(self.kind))
        shrink = self.kind in (ProcedureKind.TUNED_TAU, ProcedureKind.EMPIRICAL_BAYES, ProcedureKind.FULL_BAYES)
        if shrink and self.prior is None:
            raise InvalidArgumentError(f"{self.kind.value} needs a prior")
        if self.kind is ProcedureKind.TUNED_TAU and self.tau_rule is None:
            object.__setattr__(self, "tau_rule", TauRule("p"))
        if self.c1 < 2 or self.c2 < 1:
            raise InvalidArgumentError("tau-hat needs c1 >= 2 and c2 >= 1")
        if self.bh_alpha is not None and not (0 < self.bh_alpha < 1):
            raise InvalidArgumentError("bh_alpha must lie in (0, 1)")
        if self.engine not in ("kernel", "adaptive"):
            raise InvalidArgumentError("engine must be 'kernel' or 'adaptive'")

    @property
    def tag(self) -> str:
        if self.name:
            return self.name
        short = {"TunedTau": "TT", "EmpiricalBayes": "EB", "FullBayes": "FB", "Oracle": "Oracle", "BH": "BH"}[self.kind.value]
        if self.prior is None:
            return short
        tag = f"{short}-{self.prior.label}"
        if self.kind is ProcedureKind.TUNED_TAU:
            tag += f"[tau={self.tau_rule.label}]"
        return tag


@dataclass(frozen=True)
class DecisionVector:
    rejections: np.ndarray
    statistic: np.ndarray
    threshold: float
    tau: float | None = None

    def __post_init__(self):
        if self.rejections.shape != self.statistic.shape:
            raise InvalidArgumentError("rejections and statistics differ in length")

    def __len__(self):
        return self.rejections.size


def estimate_tau_hat(xs, m: int | None = None, c1: float = 2.0, c2: float = 1.0) -> float:
    """max{1/m, (1/(c2 m)) #{j : |x_j| > sqrt(c1 log m)}}."""
    xs = np.asarray(xs, dtype=float).ravel()
    if m is None:
        m = xs.size
    if m != xs.size:
        raise InvalidArgumentError(f"m={m} does not match {xs.size} observations")
    if m < 2:
        raise InvalidArgumentError("tau-hat needs m >= 2")
    if c1 < 2 or c2 < 1:
        raise InvalidArgumentError("tau-hat needs c1 >= 2 and c2 >= 1")
    count = int(np.count_nonzero(np.abs(xs) > math.sqrt(c1 * math.log(m))))
    return max(1.0 / m, count / (c2 * m))


def shrinkage_statistic(prior, xs, tau: float, sigma: float = 1.0, engine: str = "kernel") -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if engine == "kernel":
        return kernels.batch_weights(prior, xs, tau, sigma)
    return np.array([mean_shrinkage_weight(prior, PosteriorQuery(float(x), tau, sigma), DEFAULT_SETTINGS) for x in xs])


def run_procedure(proc: ProcedureSpec, xs, params: TwoGroupsParams | None = None) -> DecisionVector:
    xs = np.asarray(xs, dtype=float).ravel()
    if params is not None and xs.size != params.m:
        raise InvalidArgumentError(f"expected {params.m} observations, got {xs.size}")
    if xs.size == 0:
        raise InvalidArgumentError("no observations")
    kind = proc.kind
    tau = None
    if kind is ProcedureKind.TUNED_TAU or kind is ProcedureKind.EMPIRICAL_BAYES:
        if kind is ProcedureKind.TUNED_TAU:
            tau = proc.tau_rule.resolve(params)
        else:
            tau = estimate_tau_hat(xs, xs.size, proc.c1, proc.c2)
        stat = shrinkage_statistic(proc.prior, xs, tau, 1.0, proc.engine)
        return DecisionVector(stat > REJECT_LEVEL, stat, REJECT_LEVEL, tau)
    if kind is ProcedureKind.FULL_BAYES:
        stat = fb_shrinkage_weights(proc.prior, xs, proc.grid)
        return DecisionVector(stat > REJECT_LEVEL, stat, REJECT_LEVEL)
    if kind is ProcedureKind.ORACLE:
        if params is None:
            raise MissingParameterError("the Oracle needs the true (p, psi2)")
        oq = derive_oracle(params)
        stat = xs**2 / params.sigma2
        return DecisionVector(stat > oq.c2, stat, oq.c2)
    alpha = proc.bh_alpha if proc.bh_alpha is not None else 1.0 / math.log(xs.size)
    if not (0 < alpha < 1):
        raise InvalidArgumentError(f"BH level 1/log m = {alpha:.4g} is outside (0, 1); set bh_alpha")
    return DecisionVector(bh_procedure(xs, alpha), two_sided_pvalues(xs), alpha)


def confusion(decisions, truth) -> tuple[int, int, int, int]:
    """(false positives, false negatives, true positives, true negatives)."""
    rej = decisions.rejections if isinstance(decisions, DecisionVector) else np.asarray(decisions, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if rej.shape != truth.shape:
        raise InvalidArgumentError("decisions and truth differ in length")
    fp = int(np.count_nonzero(rej & ~truth))
    fn = int(np.count_nonzero(~rej & truth))
    tp = int(np.count_nonzero(rej & truth))
    tn = int(np.count_nonzero(~rej & ~truth))
    return fp, fn, tp, tn
