"""Numerical certification of the concentration, moment and error-probability bounds.

Each check evaluates an observed quantity and the corresponding bound over a
grid and reports the worst ratio.  Ratios are oriented so that larger is worse:

* upper bounds: observed / bound
* lower bounds: bound / observed
* asymptotic equivalences: max(r, 1/r) where r = observed / limit

A check passes when the worst ratio is at most its slack.  Hard inequalities
use slack 1 + 1e-6 (room for quadrature error only).  Statements that hold up
to a (1 + o(1)) factor are judged at the terminal grid point (smallest tau or
largest m) and record their whole trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .errors import InvalidArgumentError, ShrinkTestError
from .oracle import AsymptoticSequence, TwoGroupsParams, derive_oracle, oracle_exact_errors, threshold_errors
from .posterior import (
    DEFAULT_SETTINGS,
    PosteriorQuery,
    _log_quad,
    log_denominator,
    mean_shrinkage_weight,
    tail_prob_kappa_above,
    tail_prob_kappa_below,
    weight_threshold_x,
)
from .priors import ShrinkagePriorSpec, log_L

HARD_SLACK = 1.0 + 1e-6
SMALL_TAU_SLACK = 1.1
ERROR_SLACK = 1.25
LEMMA_SLACK = 1.05
EB_RISK_SLACK = 1.5
MAX_WITNESSES = 5


@dataclass(frozen=True)
class BoundCheckParams:
    eta: float = 0.49
    delta: float = 0.01
    eps: float = 0.5
    A0: float = 1.0
    slack: float | None = None  # overrides every per-check default when set
    tau_grid: tuple = (1e-1, 1e-2, 1e-3, 1e-4)
    x_grid: tuple = (0.0, 1.0, 2.0, 3.0)
    m_grid: tuple = (1000, 10000, 100000, 1000000)
    hard_x_grid: tuple = tuple(0.5 * i for i in range(21))
    hard_tau_grid: tuple = (1.0, 0.1, 0.01)
    hard_eta_grid: tuple = (0.1, 0.25, 0.4, 0.49)
    hard_delta_grid: tuple = (0.01, 0.5, 0.9)
    C: float = 1.0
    epsilon: float = 0.5
    k: float = 1.0
    suboptimal_exponent: float = 0.3
    lemma_x: float = 1e8
    lemma_log_x: float = 1e10
    eb_m: int = 10000
    eb_reps: int = 200
    c1: float = 2.0
    c2: float = 1.0
    seed: int = 20240607

    def __post_init__(self):
        if not (0 < self.eta < 0.5):
            raise InvalidArgumentError("eta must lie in (0, 1/2)")
        for name in ("delta", "eps"):
            if not (0 < getattr(self, name) < 1):
                raise InvalidArgumentError(f"{name} must lie in (0, 1)")
        if not self.A0 >= 1:
            raise InvalidArgumentError("A0 must be >= 1")
        if self.slack is not None and self.slack < 0:
            raise InvalidArgumentError("slack must be nonnegative")
        if any(not (0 < e < 1) for e in self.hard_eta_grid) or any(not (0 < d < 1) for d in self.hard_delta_grid):
            raise InvalidArgumentError("hard-suite eta and delta values must lie in (0, 1)")

    def slack_for(self, default: float) -> float:
        return default if self.slack is None else self.slack

    @property
    def sequence(self) -> AsymptoticSequence:
        return AsymptoticSequence(C=self.C, epsilon=self.epsilon, k=self.k)


@dataclass
class BoundReport:
    check: str
    kind: str  # "upper", "lower", "equivalence", "growth", "coverage"
    grid: dict
    worst_ratio: float
    slack: float
    verdict: str  # "pass", "fail", "skipped"
    witnesses: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "kind": self.kind,
            "grid": self.grid,
            "worst_ratio": self.worst_ratio,
            "slack": self.slack,
            "verdict": self.verdict,
            "witnesses": self.witnesses,
            "trajectory": self.trajectory,
            "note": self.note,
        }

    @property
    def passed(self) -> bool:
        return self.verdict != "fail"


def _skipped(check, kind, reason, slack=math.nan) -> BoundReport:
    return BoundReport(check, kind, {}, math.nan, slack, "skipped", note=reason)


def _verdict(worst: float, slack: float, failures: int = 0) -> str:
    return "pass" if failures == 0 and math.isfinite(worst) and worst <= slack else "fail"


def _top(witnesses, n=MAX_WITNESSES):
    return sorted(witnesses, key=lambda w: -w.get("ratio", math.inf) if math.isfinite(w.get("ratio", math.inf)) else -math.inf)[:n]


def _oriented(kind: str, observed: float, bound: float) -> float:
    if kind == "upper":
        return observed / bound if bound > 0 else math.inf
    if kind == "lower":
        return bound / observed if observed > 0 else math.inf
    r = observed / bound
    return max(r, 1.0 / r) if r > 0 else math.inf


# -- integrals of the slowly varying part -------------------------------------


def log_tail_integral(spec: ShrinkagePriorSpec, power: float, lower: float, settings=DEFAULT_SETTINGS) -> float:
    """log of int_lower^inf t^power L(t) dt for power < -1."""
    if not power < -1:
        raise InvalidArgumentError("tail integral needs power < -1")
    rate = -(power + 1)
    y0 = math.log(lower)
    fn = lambda y: (power + 1) * y + log_L(spec, math.exp(y))
    return _log_quad(fn, y0, y0 + 60.0 / rate, [], settings)


def log_head_integral(spec: ShrinkagePriorSpec, power: float, lower: float, upper: float, settings=DEFAULT_SETTINGS) -> float:
    """log of int_lower^upper t^power L(t) dt."""
    fn = lambda y: (power + 1) * y + log_L(spec, math.exp(y))
    return _log_quad(fn, math.log(lower), math.log(upper), [], settings)


def hard_bound_terms(spec: ShrinkagePriorSpec, tau: float, eta: float, delta: float) -> dict:
    """H, xi, Delta and the x-free factor H / (tau^(2a) Delta) of the hard concentration bound."""
    a = spec.a
    ed = eta * delta
    t0 = (1.0 / tau**2) * (1.0 / ed - 1.0)
    log_tail = log_tail_integral(spec, -(a + 1.5), t0)
    log_l0 = log_L(spec, t0)
    log_xi = log_tail - (-math.log(a + 0.5) - (a + 0.5) * math.log(t0) + log_l0)
    log_delta_cap = log_xi + log_l0
    log_H = math.log(a + 0.5) + a * math.log1p(-ed) - spec.log_K - (a + 0.5) * math.log(ed)
    log_factor = log_H - 2 * a * math.log(tau) - log_delta_cap
    return {"H": math.exp(log_H), "xi": math.exp(log_xi), "Delta": math.exp(log_delta_cap), "log_factor": log_factor, "t0": t0, "log_tail": log_tail}


def hard_bound(spec, x: float, tau: float, eta: float, delta: float, terms=None) -> float:
    if terms is None:
        terms = hard_bound_terms(spec, tau, eta, delta)
    return math.exp(terms["log_factor"] - eta * (1 - delta) * x * x / 2)


# -- hard inequality ----------------------------------------------------------


def check_hard_concentration(spec: ShrinkagePriorSpec, params: BoundCheckParams = BoundCheckParams()) -> BoundReport:
    """Pr(kappa > eta | x, tau) <= H e^{-eta(1-delta)x^2/2} / (tau^{2a} Delta) over the whole grid."""
    slack = params.slack_for(HARD_SLACK)
    witnesses, failures, worst = [], 0, 0.0
    non_vacuous = 0
    for tau in params.hard_tau_grid:
        for eta in params.hard_eta_grid:
            try:
                probs = [tail_prob_kappa_above(spec, PosteriorQuery(float(x), tau), eta) for x in params.hard_x_grid]
            except ShrinkTestError as exc:
                failures += 1
                witnesses.append({"tau": tau, "eta": eta, "error": str(exc), "ratio": math.inf})
                continue
            for delta in params.hard_delta_grid:
                terms = hard_bound_terms(spec, tau, eta, delta)
                for x, obs in zip(params.hard_x_grid, probs):
                    b = hard_bound(spec, x, tau, eta, delta, terms)
                    ratio = obs / b
                    non_vacuous += b < 1
                    worst = max(worst, ratio)
                    witnesses.append({"x": x, "tau": tau, "eta": eta, "delta": delta, "observed": obs, "bound": b, "ratio": ratio})
    grid = {
        "x": list(params.hard_x_grid),
        "tau": list(params.hard_tau_grid),
        "eta": list(params.hard_eta_grid),
        "delta": list(params.hard_delta_grid),
        "points": len(params.hard_x_grid) * len(params.hard_tau_grid) * len(params.hard_eta_grid) * len(params.hard_delta_grid),
        "non_vacuous_points": int(non_vacuous),
    }
    return BoundReport("hard_concentration", "upper", grid, worst if failures == 0 else math.inf, slack, _verdict(worst, slack, failures), _top(witnesses))


# -- small-tau statements -----------------------------------------------------


def _trajectory_report(name, kind, rows, slack, grid, note=""):
    """rows: dicts with tau (or m), ratio; verdict judged on the terminal grid value."""
    failures = [r for r in rows if "error" in r]
    key = "tau" if "tau" in rows[0] else "m"
    terminal_value = min(r[key] for r in rows) if key == "tau" else max(r[key] for r in rows)
    terminal = [r for r in rows if r[key] == terminal_value and "error" not in r]
    worst = max((r["ratio"] for r in terminal), default=math.inf)
    if failures:
        worst = math.inf
    return BoundReport(name, kind, grid, worst, slack, _verdict(worst, slack, len(failures)), _top(terminal + failures), trajectory=rows, note=note)


def check_small_tau_bounds(spec: ShrinkagePriorSpec, params: BoundCheckParams = BoundCheckParams()) -> list[BoundReport]:
    slack = params.slack_for(SMALL_TAU_SLACK)
    a, eps = spec.a, params.eps
    grid = {"tau": list(params.tau_grid), "x": list(params.x_grid), "eps": eps, "A0": params.A0}
    rows_41, rows_c41, rows_42, rows_a5 = [], [], [], []
    for tau in params.tau_grid:
        t_eps = (1.0 / tau**2) * (1.0 / eps - 1.0)
        log_tail_eps = log_tail_integral(spec, -(a + 1), t_eps)
        ratio_a5 = math.exp(log_denominator(spec, 0.0, tau))
        rows_a5.append({"tau": tau, "observed": ratio_a5, "bound": 1.0, "ratio": _oriented("equivalence", ratio_a5, 1.0)})
        for x in params.x_grid:
            q = PosteriorQuery(float(x), tau)
            try:
                below = tail_prob_kappa_below(spec, q, eps)
                weight = mean_shrinkage_weight(spec, q)
            except ShrinkTestError as exc:
                for rows in (rows_41, rows_c41, rows_42):
                    rows.append({"tau": tau, "x": x, "error": str(exc), "ratio": math.inf})
                continue
            b41 = math.exp(spec.log_K + x * x / 2 + log_tail_eps)
            bc41 = spec.K * spec.L_sup / a * eps**a * (1 - eps) ** (-a) * math.exp(x * x / 2) * tau ** (2 * a)
            rows_41.append({"tau": tau, "x": x, "observed": below, "bound": b41, "ratio": below / b41})
            rows_c41.append({"tau": tau, "x": x, "observed": below, "bound": bc41, "ratio": below / bc41})
            if 0 < a < 1 and tau < 1:
                b42 = params.A0 * spec.K / (a * (1 - a)) * math.exp(x * x / 2) * tau ** (2 * a) * math.exp(log_L(spec, 1 / tau**2))
                rows_42.append({"tau": tau, "x": x, "observed": weight, "bound": b42, "ratio": weight / b42})
    reports = [
        _trajectory_report("tail_below_eps_integral_bound", "upper", rows_41, slack, grid),
        _trajectory_report("tail_below_eps_bounded_L", "upper", rows_c41, slack, grid, note="M = L_sup"),
    ]
    if rows_42:
        reports.append(_trajectory_report("mean_weight_moment_bound", "upper", rows_42, slack, grid))
    else:
        reports.append(_skipped("mean_weight_moment_bound", "upper", f"needs a in (0, 1); a = {a}", slack))
    reports.append(
        _trajectory_report(
            "denominator_scaling",
            "equivalence",
            rows_a5,
            params.slack_for(1 / 0.95),
            {"tau": list(params.tau_grid)},
            note="K tau^(2a) J(tau) -> 1; ratio <= 1 exactly",
        )
    )
    return reports


# -- error probabilities along an asymptotic sequence ---------------------------


@dataclass(frozen=True)
class ErrorPoint:
    m: int
    p: float
    psi2: float
    tau: float
    x_star: float
    t1: float
    t2: float


def error_point(spec, params: TwoGroupsParams, tau: float) -> ErrorPoint:
    """Exact type I/II error probabilities of the rule with fixed tau via threshold inversion."""
    x_star = weight_threshold_x(spec, tau, 1.0, 0.5)
    t1, t2 = threshold_errors(x_star, params.u)
    return ErrorPoint(params.m, params.p, params.psi2, tau, x_star, t1, t2)


def _two_phi_minus_one(v: float) -> float:
    return float(special.erf(v / math.sqrt(2.0)))


def error_bound_values(spec, pt: ErrorPoint, params: BoundCheckParams) -> dict:
    a, eta, delta, C = spec.a, params.eta, params.delta, params.C
    tau = pt.tau
    log_inv_tau2 = math.log(1 / tau**2)
    L_inv = math.exp(log_L(spec, 1 / tau**2))
    out = {
        "t2_upper": _two_phi_minus_one(math.sqrt(2 * a * C / (eta * (1 - delta)))),
        "t2_lower": _two_phi_minus_one(math.sqrt(2 * a * C)),
    }
    if 0 < a < 1:
        H = hard_bound_terms(spec, 1.0, eta, delta)["H"]
        out["t1_upper"] = (1 / math.sqrt(math.pi * a)) * (2 * params.A0 * spec.K / (a * (1 - a))) * tau ** (2 * a) * L_inv / math.sqrt(log_inv_tau2)
        out["t1_lower"] = ((0.5 - eta) / math.sqrt(math.pi * a)) / H * tau ** (2 * a / (eta * (1 - delta))) * L_inv / math.sqrt(log_inv_tau2)
    return out


def sequence_points(spec, params: BoundCheckParams, tau_of_p=lambda p: p) -> list[ErrorPoint]:
    seq = params.sequence
    pts = []
    for m in params.m_grid:
        tp = seq.params(int(m))
        pts.append(error_point(spec, tp, tau_of_p(tp.p)))
    return pts


def check_error_probability_bounds(spec, seq: AsymptoticSequence | None = None, params: BoundCheckParams = BoundCheckParams(), points=None) -> list[BoundReport]:
    if seq is not None:
        params = replace(params, C=seq.C, epsilon=seq.epsilon, k=seq.k)
    slack = params.slack_for(ERROR_SLACK)
    grid = {"m": list(params.m_grid), "C": params.C, "epsilon": params.epsilon, "k": params.k, "eta": params.eta, "delta": params.delta, "tau": "p"}
    if points is None:
        points = sequence_points(spec, params)
    rows = {name: [] for name in ("t1_upper", "t1_lower", "t2_upper", "t2_lower")}
    for pt in points:
        bounds = error_bound_values(spec, pt, params)
        for name, b in bounds.items():
            obs = pt.t1 if name.startswith("t1") else pt.t2
            kind = "upper" if name.endswith("upper") else "lower"
            rows[name].append({"m": pt.m, "p": pt.p, "x_star": pt.x_star, "observed": obs, "bound": b, "ratio": _oriented(kind, obs, b)})
    reports = []
    for name in ("t1_upper", "t1_lower", "t2_upper", "t2_lower"):
        kind = "upper" if name.endswith("upper") else "lower"
        if rows[name]:
            reports.append(_trajectory_report(f"type_{name[1]}_{kind}_bound", kind, rows[name], slack, grid))
        else:
            reports.append(_skipped(f"type_{name[1]}_{kind}_bound", kind, f"needs a in (0, 1); a = {spec.a}", slack))
    # (1 - p) t1 / p should vanish along the sequence when tau = p
    odds = [{"m": pt.m, "value": (1 - pt.p) * pt.t1 / pt.p} for pt in points]
    decreasing = all(b["value"] < a_["value"] for a_, b in zip(odds, odds[1:]))
    reports.append(
        BoundReport(
            "type_1_odds_vanishing",
            "growth",
            grid,
            odds[-1]["value"] / odds[0]["value"],
            1.0,
            "pass" if decreasing else "fail",
            trajectory=odds,
            note="(1-p) t1 / p must decrease along m; worst_ratio = last / first",
        )
    )
    return reports


def check_suboptimal_tau(spec, params: BoundCheckParams = BoundCheckParams(), growth: float = 2.0) -> BoundReport:
    """With tau = p^A (A < 1), the aggregate (1-p) t1 / p + t2 diverges along the sequence."""
    A = params.suboptimal_exponent
    pts = sequence_points(spec, params, tau_of_p=lambda p: p**A)
    traj = []
    for pt in pts:
        b = error_bound_values(spec, pt, params)
        row = {"m": pt.m, "p": pt.p, "tau": pt.tau, "t1": pt.t1, "t2": pt.t2, "aggregate": (1 - pt.p) * pt.t1 / pt.p + pt.t2}
        if "t1_lower" in b:
            row["lower_bound_aggregate"] = (1 - pt.p) * b["t1_lower"] / pt.p + b["t2_lower"]
        traj.append(row)
    factor = traj[-1]["aggregate"] / traj[0]["aggregate"]
    grid = {"m": list(params.m_grid), "tau": f"p^{A:g}", "C": params.C, "epsilon": params.epsilon}
    note = (
        "aggregate uses exact t1, t2; lower_bound_aggregate evaluates the displayed lower bounds "
        "(informational, its t2 part does not grow)"
    )
    return BoundReport("suboptimal_tau_divergence", "growth", grid, factor, growth, "pass" if factor >= growth else "fail", trajectory=traj, note=note)


# -- risk ratio ---------------------------------------------------------------


def risk_envelope(a: float, C: float, eta: float, delta: float) -> tuple[float, float]:
    denom = _two_phi_minus_one(math.sqrt(C))
    return _two_phi_minus_one(math.sqrt(2 * a * C)) / denom, _two_phi_minus_one(math.sqrt(2 * a * C / (eta * (1 - delta)))) / denom


def risk_conditions_hold(spec) -> bool:
    """Conditions (I) 1/2 < a < 1, or (II) a = 1/2 with bounded L."""
    return 0.5 < spec.a < 1 or (abs(spec.a - 0.5) < 1e-12 and math.isfinite(spec.L_sup))


def check_risk_ratio(spec, seq: AsymptoticSequence | None = None, params: BoundCheckParams = BoundCheckParams(), points=None) -> BoundReport:
    if seq is not None:
        params = replace(params, C=seq.C, epsilon=seq.epsilon, k=seq.k)
    slack = params.slack_for(ERROR_SLACK)
    if not risk_conditions_hold(spec):
        return _skipped("risk_ratio", "coverage", f"a = {spec.a} is outside the risk-ratio conditions", slack)
    lo, hi = risk_envelope(spec.a, params.C, params.eta, params.delta)
    if points is None:
        points = sequence_points(spec, params)
    seq_ = params.sequence
    traj = []
    for pt in points:
        tp = seq_.params(pt.m)
        r_og = pt.m * ((1 - pt.p) * pt.t1 + pt.p * pt.t2)
        r_opt = oracle_exact_errors(tp, derive_oracle(tp))[2]
        ratio = r_og / r_opt
        worst = max(ratio / hi, lo / ratio)
        traj.append({"m": pt.m, "risk": r_og, "oracle_risk": r_opt, "ratio": worst, "risk_ratio": ratio})
    grid = {"m": list(params.m_grid), "envelope": [lo, hi], "C": params.C, "epsilon": params.epsilon, "eta": params.eta, "delta": params.delta}
    rep = _trajectory_report("risk_ratio", "coverage", traj, slack, grid, note="ratio column = max(R/upper, lower/R)")
    return rep


def eb_risk_ratio_mc(spec, params: BoundCheckParams = BoundCheckParams(), rng=None) -> BoundReport:
    """Monte Carlo risk of the empirical-Bayes rule against the exact Oracle risk."""
    from . import kernels
    from .rules import estimate_tau_hat

    slack = params.slack_for(EB_RISK_SLACK)
    if not risk_conditions_hold(spec):
        return _skipped("eb_risk_ratio", "upper", f"a = {spec.a} is outside the risk-ratio conditions", slack)
    m = int(params.eb_m)
    tp = params.sequence.params(m)
    r_opt = oracle_exact_errors(tp, derive_oracle(tp))[2]
    _, hi = risk_envelope(spec.a, params.C, params.eta, params.delta)
    losses = []
    for r in range(params.eb_reps):
        g = rng if rng is not None else np.random.Generator(np.random.PCG64(np.random.SeedSequence(params.seed, spawn_key=(1, r))))
        truth = g.random(m) < tp.p
        xs = g.standard_normal(m) * np.where(truth, math.sqrt(1 + tp.psi2), 1.0)
        tau = estimate_tau_hat(xs, m, params.c1, params.c2)
        rej = kernels.batch_weights(spec, xs, tau) > 0.5
        losses.append(int(np.count_nonzero(rej != truth)))
    risk = float(np.mean(losses))
    se = float(np.std(losses, ddof=1) / math.sqrt(len(losses)))
    ratio = (risk / r_opt) / hi
    grid = {"m": m, "p": tp.p, "psi2": tp.psi2, "reps": params.eb_reps, "upper_envelope": hi}
    wit = [{"risk": risk, "risk_se": se, "oracle_risk": r_opt, "risk_ratio": risk / r_opt, "ratio": ratio}]
    return BoundReport("eb_risk_ratio", "upper", grid, ratio, slack, _verdict(ratio, slack), wit)


# -- slowly varying lemmas ---------------------------------------------------


def check_slow_variation_lemmas(spec, params: BoundCheckParams = BoundCheckParams()) -> list[BoundReport]:
    slack = params.slack_for(LEMMA_SLACK)
    a = spec.a
    reports = []
    traj = []
    alpha = -(a + 1.5)
    for x in (1e4, 1e6, params.lemma_x):
        val = math.exp(log_tail_integral(spec, alpha, x) - (alpha + 1) * math.log(x) - log_L(spec, x))
        limit = -1.0 / (alpha + 1)
        traj.append({"x": x, "observed": val, "bound": limit, "ratio": _oriented("equivalence", val, limit)})
    reports.append(_lemma_report("tail_integral_regular_variation", traj, slack, {"alpha": alpha}))
    alpha = -a
    if alpha > -1:
        traj = []
        for x in (1e4, 1e6, params.lemma_x):
            val = math.exp(log_head_integral(spec, alpha, params.A0, x) - (alpha + 1) * math.log(x) - log_L(spec, x))
            limit = 1.0 / (1 + alpha)
            traj.append({"x": x, "observed": val, "bound": limit, "ratio": _oriented("equivalence", val, limit)})
        reports.append(_lemma_report("head_integral_regular_variation", traj, slack, {"alpha": alpha, "A0": params.A0}))
    else:
        reports.append(_skipped("head_integral_regular_variation", "equivalence", f"needs -a > -1; a = {a}", slack))
    traj = [{"x": x, "observed": log_L(spec, x) / math.log(x)} for x in (1e4, 1e6, 1e8, params.lemma_log_x)]
    worst = abs(traj[-1]["observed"])
    reports.append(
        BoundReport(
            "log_L_over_log_x",
            "upper",
            {"x": params.lemma_log_x},
            worst,
            1e-3,
            "pass" if worst <= 1e-3 else "fail",
            trajectory=traj,
            note="|log L(x) / log x| at the terminal x; tolerance is absolute",
        )
    )
    return reports


def _lemma_report(name, traj, slack, grid):
    worst = traj[-1]["ratio"]
    grid = dict(grid, x=[r["x"] for r in traj])
    return BoundReport(name, "equivalence", grid, worst, slack, _verdict(worst, slack), [traj[-1]], trajectory=traj)


# -- empirical-Bayes tau-hat ----------------------------------------------------


def alpha_m(m: int, p: float, psi2: float, c1: float = 2.0) -> float:
    """Probability that one observation exceeds sqrt(c1 log m) under the two-groups model."""
    thr = math.sqrt(c1 * math.log(m))
    return float(special.erfc(thr / math.sqrt(2)) * (1 - p) + special.erfc(thr / math.sqrt(2 * (1 + psi2))) * p)


def tau_hat_draws(m: int, p: float, psi2: float, reps: int, c1: float, c2: float, seed: int, stream: int = 2) -> np.ndarray:
    from .rules import estimate_tau_hat

    out = np.empty(reps)
    for r in range(reps):
        g = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, r))))
        truth = g.random(m) < p
        xs = g.standard_normal(m) * np.where(truth, math.sqrt(1 + psi2), 1.0)
        out[r] = estimate_tau_hat(xs, m, c1, c2)
    return out


def check_eb_tau_consistency(spec=None, params: BoundCheckParams = BoundCheckParams(), coverage: float = 0.95, tol: float = 0.2) -> BoundReport:
    """Fraction of replicates with |tau-hat / alpha_m - 1| < tol; the prior plays no role."""
    m = int(params.eb_m)
    tp = params.sequence.params(m)
    am = alpha_m(m, tp.p, tp.psi2, params.c1)
    taus = tau_hat_draws(m, tp.p, tp.psi2, params.eb_reps, params.c1, params.c2, params.seed)
    rel = taus * params.c2 / am
    frac = float(np.mean(np.abs(rel - 1) < tol))
    # binomial sd of the exceedance count bounds the attainable coverage
    sd_rel = math.sqrt(am * (1 - am) / m) / am
    ideal = float(special.erf(tol / (sd_rel * math.sqrt(2))))
    grid = {"m": m, "p": tp.p, "psi2": tp.psi2, "c1": params.c1, "c2": params.c2, "reps": params.eb_reps, "alpha_m": am, "tolerance": tol}
    wit = [
        {"fraction_within": frac, "required": coverage, "median_ratio": float(np.median(rel)), "count_rel_sd": sd_rel, "normal_approx_coverage": ideal, "ratio": coverage / frac if frac > 0 else math.inf}
    ]
    worst = coverage / frac if frac > 0 else math.inf
    note = "worst_ratio = required / achieved coverage; normal_approx_coverage is the best coverage the binomial count allows"
    return BoundReport("eb_tau_consistency", "lower", grid, worst, 1.0, "pass" if frac >= coverage else "fail", wit, note=note)


# -- suite driver ---------------------------------------------------------------

SUITES = ("hard", "small-tau", "errors", "risk", "lemmas", "eb", "all")


def run_suite(spec, suite: str, params: BoundCheckParams = BoundCheckParams()) -> list[BoundReport]:
    if suite not in SUITES:
        raise InvalidArgumentError(f"unknown suite {suite!r}; choose from {SUITES}")
    reports: list[BoundReport] = []
    points = None
    if suite in ("hard", "all"):
        reports.append(check_hard_concentration(spec, params))
    if suite in ("small-tau", "all"):
        reports.extend(check_small_tau_bounds(spec, params))
    if suite in ("errors", "risk", "all"):
        points = sequence_points(spec, params)
    if suite in ("errors", "all"):
        reports.extend(check_error_probability_bounds(spec, None, params, points))
        reports.append(check_suboptimal_tau(spec, params))
    if suite in ("risk", "all"):
        reports.append(check_risk_ratio(spec, None, params, points))
        reports.append(eb_risk_ratio_mc(spec, params))
    if suite in ("lemmas", "all"):
        reports.extend(check_slow_variation_lemmas(spec, params))
    if suite in ("eb", "all"):
        reports.append(check_eb_tau_consistency(spec, params))
    return reports
