"""Command-line entry point: ``shrinktest <subcommand> ...``.

Exit codes: 0 success, 1 invalid arguments, 2 numeric failure, 3 a bound check failed.
Every subcommand that writes files also writes ``<first output>.manifest.json``
listing the resolved configuration and a sha256 digest per output file.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidArgumentError, NumericFailureError, ShrinkTestError

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    def __init__(self, message, parser=None):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self)


# -- serialization --------------------------------------------------------------


def _num(v):
    """JSON-ready value; floats keep 17 significant digits, non-finite become strings."""
    if isinstance(v, (bool, np.bool_)) or v is None or isinstance(v, str):
        return bool(v) if isinstance(v, np.bool_) else v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
        return float(f"{v:.17g}")
    if isinstance(v, dict):
        return {str(k): _num(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_num(x) for x in v]
    return str(v)


def dumps(obj) -> str:
    return json.dumps(_num(obj), indent=2, sort_keys=False) + "\n"


def _csv_text(header, rows) -> str:
    from .simulation import fmt

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def _write(path: str, text: str) -> str:
    data = text.encode("utf-8")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def _emit(text: str, out: str | None, outputs: dict):
    if out:
        outputs[out] = _write(out, text)
    else:
        sys.stdout.write(text)


def _write_manifest(command: str, config: dict, seed, outputs: dict, started: str):
    if not outputs:
        return
    first = next(iter(outputs))
    manifest = {
        "tool": "shrinktest",
        "version": __version__,
        "command": command,
        "config": config,
        "seed": seed,
        "started": started,
        "finished": _now(),
        "outputs": {os.path.basename(k): {"path": k, "sha256": v} for k, v in outputs.items()},
    }
    with open(first + ".manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(manifest))


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _log(args, msg):
    if not getattr(args, "quiet", False):
        print(msg, file=sys.stderr)


def _read_data(path: str) -> np.ndarray:
    """Observations from a CSV: a column named x, or the first column; header optional."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise InvalidArgumentError(f"{path} holds no observations")
    col = 0
    header = [c.strip().lower() for c in rows[0]]
    try:
        float(rows[0][0])
    except ValueError:
        col = header.index("x") if "x" in header else 0
        rows = rows[1:]
    try:
        xs = np.array([float(r[col]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise InvalidArgumentError(f"cannot parse observations in {path}: {exc}") from exc
    if xs.size == 0 or not np.all(np.isfinite(xs)):
        raise InvalidArgumentError(f"{path} must hold finite observations")
    return xs


def _seed_override(seed):
    env = os.environ.get("SHRINKTEST_SEED")
    if env is None:
        return seed
    try:
        return int(env)
    except ValueError as exc:
        raise InvalidArgumentError(f"SHRINKTEST_SEED must be an integer, got {env!r}") from exc


# -- prior arguments ----------------------------------------------------------------


def _add_prior_args(p, required=True):
    p.add_argument("--family", required=required, help="tpbn, gdp, or a preset: horseshoe, strawderman-berger, neg, sdp")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)


def _prior(args):
    from .priors import prior_from_name

    return prior_from_name(args.family, args.alpha, args.beta)


# -- subcommands --------------------------------------------------------------------


def cmd_priors(args, outputs):
    from .priors import check_prior

    spec = _prior(args)
    _emit(dumps(check_prior(spec)), args.out, outputs)
    return {"family": args.family, "alpha": spec.alpha, "beta": spec.beta}, EXIT_OK


def cmd_weight(args, outputs):
    from .posterior import PosteriorQuery, mean_shrinkage_weight, posterior_mean_mu

    spec = _prior(args)
    q = PosteriorQuery(args.x, args.tau, args.sigma)
    w = mean_shrinkage_weight(spec, q)
    out = {"prior": spec.label, "x": args.x, "tau": args.tau, "sigma": args.sigma, "weight": w, "posterior_mean": posterior_mean_mu(spec, q)}
    _emit(dumps(out), args.out, outputs)
    return {k: out[k] for k in ("prior", "x", "tau", "sigma")}, EXIT_OK


def cmd_profile(args, outputs):
    from .posterior import PosteriorQuery, mean_shrinkage_weight

    spec = _prior(args)
    if args.steps < 2 or not args.xmax > 0:
        raise InvalidArgumentError("profile needs --steps >= 2 and --xmax > 0")
    xs = np.linspace(0.0, args.xmax, args.steps)
    rows = []
    for x in xs:
        w = mean_shrinkage_weight(spec, PosteriorQuery(float(x), args.tau, args.sigma))
        rows.append((float(x), w, w * float(x)))
    _emit(_csv_text(("x", "weight", "posterior_mean"), rows), args.out, outputs)
    return {"prior": spec.label, "tau": args.tau, "sigma": args.sigma, "xmax": args.xmax, "steps": args.steps}, EXIT_OK


def cmd_oracle(args, outputs):
    from .oracle import TwoGroupsParams, derive_oracle, oracle_asymptotic_risk, oracle_exact_errors

    params = TwoGroupsParams(args.m, args.p, args.psi2, args.sigma2)
    oq = derive_oracle(params, C=args.C)
    t1, t2, risk = oracle_exact_errors(params, oq)
    out = {**oq.to_dict(), "t1": t1, "t2": t2, "risk": risk}
    if args.C is not None:
        a1, a2, ar = oracle_asymptotic_risk(oq, args.m, args.p)
        out.update(t1_asymptotic=a1, t2_asymptotic=a2, risk_asymptotic=ar)
    _emit(dumps(out), args.out, outputs)
    return {"m": args.m, "p": args.p, "psi2": args.psi2, "sigma2": args.sigma2, "C": args.C}, EXIT_OK


def _procedure_from_args(args):
    from .rules import ProcedureKind, ProcedureSpec, TauRule

    aliases = {"tt": "TunedTau", "tunedtau": "TunedTau", "eb": "EmpiricalBayes", "empiricalbayes": "EmpiricalBayes",
               "fb": "FullBayes", "fullbayes": "FullBayes", "oracle": "Oracle", "bh": "BH"}
    key = args.proc.replace("-", "").replace("_", "").lower()
    if key not in aliases:
        raise InvalidArgumentError(f"unknown procedure {args.proc!r}")
    kind = ProcedureKind(aliases[key])
    prior = _prior(args) if args.family else None
    rule = None
    if args.tau is not None and args.tau_rule is not None:
        raise InvalidArgumentError("give either --tau or --tau-rule")
    if args.tau is not None:
        rule = TauRule("fixed", args.tau)
    elif args.tau_rule is not None:
        rule = TauRule.parse(args.tau_rule)
    return ProcedureSpec(kind, prior=prior, tau_rule=rule, bh_alpha=args.bh_alpha)


def cmd_classify(args, outputs):
    from .oracle import TwoGroupsParams
    from .rules import run_procedure

    xs = _read_data(args.data)
    proc = _procedure_from_args(args)
    params = None
    if args.p is not None or args.psi2 is not None:
        if args.p is None or args.psi2 is None:
            raise InvalidArgumentError("--p and --psi2 go together")
        params = TwoGroupsParams(xs.size, args.p, args.psi2)
    dec = run_procedure(proc, xs, params)
    rows = [(i, float(x), float(s), "true" if r else "false") for i, (x, s, r) in enumerate(zip(xs, dec.statistic, dec.rejections))]
    _emit(_csv_text(("index", "x", "statistic", "reject"), rows), args.out, outputs)
    _log(args, f"{int(dec.rejections.sum())} of {xs.size} rejected by {proc.tag}")
    return {"procedure": proc.tag, "data": args.data, "tau": dec.tau, "p": args.p, "psi2": args.psi2}, EXIT_OK


def cmd_tau_posterior(args, outputs):
    from .fullbayes import HyperGrid, hyper_posterior

    spec = _prior(args)
    xs = _read_data(args.data)
    grid = HyperGrid.log_uniform(n_tau=args.n_tau, n_sigma=args.n_sigma, on_escape=args.on_escape)
    post = hyper_posterior(spec, xs, grid)
    rows = list(zip(grid.taus, post.tau_marginal()))
    _emit(_csv_text(("tau", "density"), rows), args.out, outputs)
    summary = {"tau_quantiles": post.tau_quantiles, "boundary_mass": post.boundary_mass}
    if args.summary:
        outputs[args.summary] = _write(args.summary, dumps(summary))
    else:
        _log(args, json.dumps(_num(summary)))
    return {"prior": spec.label, "data": args.data, "n_tau": args.n_tau, "n_sigma": args.n_sigma}, EXIT_OK


def cmd_simulate(args, outputs):
    from .simulation import config_from_dict, config_to_dict, estimates_to_csv, run_mp_study

    if not args.config:
        raise UsageError("simulate needs --config", args._parser)
    with open(args.config) as fh:
        raw = json.load(fh)
    if "seed" in raw or os.environ.get("SHRINKTEST_SEED"):
        raw["seed"] = _seed_override(raw.get("seed"))
    if args.reps is not None:
        raw["n_reps"] = args.reps
    cfg = config_from_dict(raw)
    progress = None if args.quiet else (lambda k, n: print(f"\rblocks {k}/{n}", end="" if k < n else "\n", file=sys.stderr))
    est = run_mp_study(cfg, threads=args.threads, progress=progress)
    dropped = {f"{e.p:g}": e.n_dropped for e in est if e.n_dropped}
    if dropped:
        _log(args, f"dropped replicates per p: {dropped}")
    _emit(estimates_to_csv(est, cfg), args.out, outputs)
    return config_to_dict(cfg), EXIT_OK


def cmd_verify_bounds(args, outputs):
    from dataclasses import replace

    from .bounds import BoundCheckParams, run_suite

    spec = _prior(args)
    params = BoundCheckParams(slack=args.slack)
    seed = _seed_override(None)
    if seed is not None:
        params = replace(params, seed=seed)
    if args.m is not None:
        params = replace(params, m_grid=tuple(args.m))
    reports = run_suite(spec, args.suite, params)
    for r in reports:
        _log(args, f"{r.verdict:>7}  {r.check}  worst={r.worst_ratio:.6g}  slack={r.slack:.6g}")
    body = {"prior": spec.to_dict(), "suite": args.suite, "reports": [r.to_dict() for r in reports]}
    _emit(dumps(body), args.report, outputs)
    code = EXIT_VERIFY if any(r.verdict == "fail" for r in reports) else EXIT_OK
    return {"prior": spec.label, "suite": args.suite, "slack": args.slack, "seed": params.seed, "m_grid": list(params.m_grid)}, code


def cmd_plot(args, outputs):
    from .simulation import read_mp_csv

    rows = read_mp_csv(args.inp)
    _emit(render_svg(rows, args.title), args.out, outputs)
    return {"in": args.inp}, EXIT_OK


PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def render_svg(rows, title="Misclassification probability") -> str:
    """Line chart of mp_mean against p, one polyline per procedure."""
    if not rows:
        raise InvalidArgumentError("nothing to plot")
    procs = sorted({r["procedure"] for r in rows})
    ps = [r["p"] for r in rows]
    ys = [r["mp_mean"] for r in rows if math.isfinite(r["mp_mean"])]
    W, H, L, R, T, B = 640, 420, 60, 170, 40, 50
    x0, x1 = min(ps), max(ps)
    y0, y1 = 0.0, max(ys) * 1.05 if ys else 1.0
    if x1 == x0:
        x1 = x0 + 1
    sx = lambda v: L + (v - x0) / (x1 - x0) * (W - L - R)
    sy = lambda v: H - B - (v - y0) / (y1 - y0) * (H - T - B)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{L}" y1="{H - B}" x2="{W - R}" y2="{H - B}" stroke="black"/>',
        f'<line x1="{L}" y1="{T}" x2="{L}" y2="{H - B}" stroke="black"/>',
    ]
    for k in range(6):
        yv = y0 + (y1 - y0) * k / 5
        out.append(f'<text x="{L - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end" font-family="sans-serif" font-size="10">{yv:.3f}</text>')
    for pv in sorted(set(ps)):
        out.append(f'<text x="{sx(pv):.1f}" y="{H - B + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{pv:g}</text>')
    out.append(f'<text x="{(L + W - R) / 2:.1f}" y="{H - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">p</text>')
    for i, proc in enumerate(procs):
        pts = sorted((r["p"], r["mp_mean"]) for r in rows if r["procedure"] == proc and math.isfinite(r["mp_mean"]))
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"><title>{proc}</title></polyline>')
        ly = T + 16 * i + 10
        out.append(f'<line x1="{W - R + 10}" y1="{ly}" x2="{W - R + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - R + 35}" y="{ly + 4}" font-family="sans-serif" font-size="11">{proc}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="shrinktest", description="Multiple testing with global-local shrinkage priors.")
    top.add_argument("--version", action="version", version=f"shrinktest {__version__}")
    sub = top.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--quiet", action="store_true", help="no progress on stderr")
        p.set_defaults(fn=fn, _parser=p)
        return p

    p = add("priors", cmd_priors, "derived constants and invariant checks of a prior")
    p.add_argument("action", choices=["check"])
    _add_prior_args(p)
    p.add_argument("--out")

    p = add("weight", cmd_weight, "shrinkage weight and posterior mean at one x")
    _add_prior_args(p)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--out")

    p = add("profile", cmd_profile, "weight and posterior mean on an x grid (CSV)")
    _add_prior_args(p)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--xmax", type=float, default=10.0)
    p.add_argument("--steps", type=int, default=101)
    p.add_argument("--out")

    p = add("oracle", cmd_oracle, "Bayes Oracle threshold, error probabilities and risk")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--psi2", type=float, required=True)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--C", type=float, help="limit constant for the asymptotic counterparts")
    p.add_argument("--out")

    p = add("classify", cmd_classify, "apply a testing procedure to data (CSV)")
    p.add_argument("--proc", required=True, help="tt, eb, fb, oracle or bh")
    _add_prior_args(p, required=False)
    p.add_argument("--data", required=True)
    p.add_argument("--tau", type=float)
    p.add_argument("--tau-rule")
    p.add_argument("--p", type=float)
    p.add_argument("--psi2", type=float)
    p.add_argument("--bh-alpha", type=float)
    p.add_argument("--out")

    p = add("tau-posterior", cmd_tau_posterior, "full-Bayes posterior of tau (CSV)")
    _add_prior_args(p)
    p.add_argument("--data", required=True)
    p.add_argument("--n-tau", type=int, default=96)
    p.add_argument("--n-sigma", type=int, default=48)
    p.add_argument("--on-escape", choices=["error", "warn"], default="error")
    p.add_argument("--summary", help="write quantiles JSON here")
    p.add_argument("--out")

    p = add("simulate", cmd_simulate, "Monte Carlo misclassification study (CSV)")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--threads", type=int)
    p.add_argument("--reps", type=int, help="override n_reps")

    p = add("verify-bounds", cmd_verify_bounds, "numerical certification of the bounds (JSON)")
    _add_prior_args(p)
    p.add_argument("--suite", choices=["hard", "small-tau", "errors", "risk", "lemmas", "eb", "all"], default="all")
    p.add_argument("--slack", type=float, help="override every slack")
    p.add_argument("--m", type=int, nargs="+", help="override the m grid")
    p.add_argument("--threads", type=int, help="accepted for symmetry; checks run serially")
    p.add_argument("--report")

    p = add("plot", cmd_plot, "MP-vs-p line chart from simulate output (SVG)")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out")
    p.add_argument("--title", default="Misclassification probability")
    return top


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand", parser)
        outputs: dict = {}
        started = _now()
        config, code = args.fn(args, outputs)
        _write_manifest(args.command, config, config.get("seed") if isinstance(config, dict) else None, outputs, started)
        return code
    except UsageError as exc:
        p = exc.parser or parser
        print(p.format_usage().rstrip(), file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (InvalidArgumentError, FileNotFoundError, json.JSONDecodeError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericFailureError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ShrinkTestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main(argv=None) -> int:
    sys.exit(dispatch(sys.argv[1:] if argv is None else argv))
