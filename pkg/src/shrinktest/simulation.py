"""Seeded Monte Carlo estimation of misclassification probabilities.

Each replicate draws its own generator from ``SeedSequence(seed, spawn_key=(p_index,
rep_index))``, so results do not depend on how replicates are scheduled over
worker processes.  All procedures in a replicate see the same data.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import multiprocessing as mp

import numpy as np

from .errors import InvalidArgumentError, ShrinkTestError
from .fullbayes import HyperGrid, tables_for
from .oracle import TwoGroupsParams
from .priors import prior_from_name
from .rules import ProcedureKind, ProcedureSpec, TauRule, confusion, run_procedure

DEFAULT_P_GRID = (0.01, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)
DEFAULT_SEED = 20240607
CSV_COLUMNS = ("p", "procedure", "mp_mean", "mp_se", "n_reps", "m", "psi2", "seed")


def fmt(v) -> str:
    """Round-trippable decimal text for floats (17 significant digits)."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def default_procedures() -> list[ProcedureSpec]:
    from .priors import horseshoe, standard_double_pareto

    return [
        ProcedureSpec(ProcedureKind.EMPIRICAL_BAYES, prior=horseshoe()),
        ProcedureSpec(ProcedureKind.FULL_BAYES, prior=horseshoe()),
        ProcedureSpec(ProcedureKind.EMPIRICAL_BAYES, prior=standard_double_pareto()),
        ProcedureSpec(ProcedureKind.ORACLE),
        ProcedureSpec(ProcedureKind.BH),
    ]


@dataclass(frozen=True)
class SimConfig:
    m: int = 200
    p_grid: tuple = DEFAULT_P_GRID
    psi2: float | None = None  # None means psi = sqrt(2 log m)
    sigma2: float = 1.0
    n_reps: int = 1000
    seed: int = DEFAULT_SEED
    procedures: tuple = field(default_factory=lambda: tuple(default_procedures()))

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise InvalidArgumentError("m must be an integer >= 2")
        if not self.p_grid or any(not (0 < p < 1) for p in self.p_grid):
            raise InvalidArgumentError("p_grid values must lie in (0, 1)")
        if int(self.n_reps) != self.n_reps or self.n_reps < 1:
            raise InvalidArgumentError("n_reps must be a positive integer")
        if not (0 <= int(self.seed) < 2**64):
            raise InvalidArgumentError("seed must be a 64-bit unsigned integer")
        if self.psi2 is not None and not self.psi2 > 0:
            raise InvalidArgumentError("psi2 must be positive")
        if not self.procedures:
            raise InvalidArgumentError("at least one procedure is required")
        object.__setattr__(self, "p_grid", tuple(float(p) for p in self.p_grid))
        object.__setattr__(self, "procedures", tuple(self.procedures))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def resolved_psi2(self) -> float:
        return self.psi2 if self.psi2 is not None else 2.0 * math.log(self.m)

    def params(self, p: float) -> TwoGroupsParams:
        return TwoGroupsParams(m=self.m, p=p, psi2=self.resolved_psi2, sigma2=self.sigma2)


def procedure_from_dict(d: dict) -> ProcedureSpec:
    d = dict(d)
    try:
        kind = ProcedureKind(d.pop("kind"))
    except (KeyError, ValueError):
        raise InvalidArgumentError(f"procedure kind must be one of {[k.value for k in ProcedureKind]}") from None
    prior = d.pop("prior", None)
    alpha = d.pop("alpha", None)
    beta = d.pop("beta", None)
    if prior is not None:
        prior = prior_from_name(prior, alpha, beta)
    kw = {}
    if "tau_rule" in d:
        rule = d.pop("tau_rule")
        kw["tau_rule"] = TauRule.parse(str(rule))
    if "grid" in d:
        g = d.pop("grid") or {}
        kw["grid"] = HyperGrid.log_uniform(
            n_tau=int(g.get("n_tau", 96)),
            tau_range=tuple(g.get("tau_range", (1e-5, 1e2))),
            n_sigma=int(g.get("n_sigma", 48)),
            sigma_range=tuple(g.get("sigma_range", (0.2, 5.0))),
            on_escape=g.get("on_escape", "error"),
        )
    for key in ("c1", "c2", "bh_alpha", "engine", "name"):
        if key in d:
            kw[key] = d.pop(key)
    if d:
        raise InvalidArgumentError(f"unknown procedure fields: {sorted(d)}")
    return ProcedureSpec(kind, prior=prior, **kw)


def procedure_to_dict(proc: ProcedureSpec) -> dict:
    out = {"kind": proc.kind.value}
    if proc.prior is not None:
        out.update(prior=proc.prior.family.value, alpha=proc.prior.alpha, beta=proc.prior.beta)
        if proc.prior.name:
            out["prior"] = proc.prior.name
    if proc.kind is ProcedureKind.TUNED_TAU:
        out["tau_rule"] = proc.tau_rule.label
    if proc.kind is ProcedureKind.EMPIRICAL_BAYES:
        out.update(c1=proc.c1, c2=proc.c2)
    if proc.kind is ProcedureKind.FULL_BAYES:
        g = proc.grid
        out["grid"] = {
            "n_tau": len(g.log_tau),
            "tau_range": [math.exp(g.log_tau[0]), math.exp(g.log_tau[-1])],
            "n_sigma": len(g.log_sigma),
            "sigma_range": [math.exp(g.log_sigma[0]), math.exp(g.log_sigma[-1])],
            "on_escape": g.on_escape,
        }
    if proc.kind is ProcedureKind.BH:
        out["bh_alpha"] = proc.bh_alpha
    if proc.engine != "kernel":
        out["engine"] = proc.engine
    if proc.name:
        out["name"] = proc.name
    return out


def config_from_dict(d: dict) -> SimConfig:
    d = dict(d)
    procs = d.pop("procedures", None)
    kw = {}
    if procs is not None:
        kw["procedures"] = tuple(procedure_from_dict(p) for p in procs)
    if "psi" in d:
        psi = d.pop("psi")
        if psi is not None:
            kw["psi2"] = float(psi) ** 2
    for key in ("m", "p_grid", "psi2", "sigma2", "n_reps", "seed"):
        if key in d:
            kw[key] = d.pop(key)
    if d:
        raise InvalidArgumentError(f"unknown config fields: {sorted(d)}")
    return SimConfig(**kw)


def config_to_dict(cfg: SimConfig) -> dict:
    return {
        "m": cfg.m,
        "p_grid": list(cfg.p_grid),
        "psi2": cfg.resolved_psi2,
        "sigma2": cfg.sigma2,
        "n_reps": cfg.n_reps,
        "seed": cfg.seed,
        "procedures": [procedure_to_dict(p) for p in cfg.procedures],
    }


def replicate_rng(seed: int, p_index: int, rep_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(p_index, rep_index))))


def generate_replicate(params: TwoGroupsParams, rng: np.random.Generator):
    """Draw (xs, truth) from the two-groups model."""
    truth = rng.random(params.m) < params.p
    scale = np.where(truth, math.sqrt(params.sigma2 + params.psi2), math.sqrt(params.sigma2))
    xs = rng.standard_normal(params.m) * scale
    return xs, truth


@dataclass(frozen=True)
class MpEstimate:
    procedure: str
    p: float
    mp_mean: float
    mp_se: float
    n_reps: int
    n_dropped: int = 0


def _run_block(cfg: SimConfig, p_index: int, reps: range):
    params = cfg.params(cfg.p_grid[p_index])
    out = []
    for r in reps:
        xs, truth = generate_replicate(params, replicate_rng(cfg.seed, p_index, r))
        try:
            row = []
            for proc in cfg.procedures:
                fp, fn, _, _ = confusion(run_procedure(proc, xs, params), truth)
                row.append((fp + fn) / params.m)
            out.append(row)
        except ShrinkTestError as exc:
            out.append(f"{type(exc).__name__}: {exc}")
    return out


def _warm_caches(cfg: SimConfig):
    for proc in cfg.procedures:
        if proc.kind is ProcedureKind.FULL_BAYES:
            tables_for(proc.prior, proc.grid)


def run_mp_study(config: SimConfig, threads: int | None = None, progress=None) -> list[MpEstimate]:
    """Estimate MP for every (p, procedure); replicates failing anywhere are dropped for all."""
    threads = threads or os.cpu_count() or 1
    _warm_caches(config)
    block = max(1, min(50, config.n_reps // max(1, 4 * threads)))
    jobs = [(pi, range(s, min(s + block, config.n_reps))) for pi in range(len(config.p_grid)) for s in range(0, config.n_reps, block)]
    if threads <= 1:
        results = [_run_block(config, pi, reps) for pi, reps in jobs]
    else:
        ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
        with ProcessPoolExecutor(max_workers=threads, mp_context=ctx) as pool:
            futures = [pool.submit(_run_block, config, pi, reps) for pi, reps in jobs]
            results = []
            for k, fut in enumerate(futures):
                results.append(fut.result())
                if progress:
                    progress(k + 1, len(futures))
    per_p: dict[int, list] = {i: [] for i in range(len(config.p_grid))}
    for (pi, _), res in zip(jobs, results):
        per_p[pi].extend(res)
    estimates = []
    for pi, p in enumerate(config.p_grid):
        rows = [r for r in per_p[pi] if not isinstance(r, str)]
        dropped = len(per_p[pi]) - len(rows)
        arr = np.asarray(rows, dtype=float).reshape(len(rows), len(config.procedures))
        for k, proc in enumerate(config.procedures):
            col = arr[:, k]
            n = col.size
            mean = float(col.mean()) if n else math.nan
            se = float(col.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
            estimates.append(MpEstimate(proc.tag, p, mean, se, n, dropped))
    estimates.sort(key=lambda e: (e.p, e.procedure))
    return estimates


def estimates_to_csv(estimates, config: SimConfig) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for e in estimates:
        writer.writerow([fmt(e.p), e.procedure, fmt(e.mp_mean), fmt(e.mp_se), fmt(e.n_reps), fmt(config.m), fmt(config.resolved_psi2), fmt(config.seed)])
    return buf.getvalue()


def read_mp_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for key in ("p", "mp_mean", "mp_se", "psi2"):
            r[key] = float(r[key])
        for key in ("n_reps", "m", "seed"):
            r[key] = int(r[key])
    return rows
