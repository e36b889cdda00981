"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 infeasible or invalid input.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .cases import builtin, load_case
from .dlm import RunConfig, StepSchedule, run_rounds
from .dslm import NOISE_KINDS, LoadStreams, NoiseModel, run_ensemble
from .dual import check_slater, solve_dual
from .errors import (
    BracketFailure,
    ConfigurationError,
    InvariantViolation,
    ParseError,
    ScheduleExhausted,
    SlaterViolation,
)
from .graphs import GraphSchedule, complete_graph, spectral_delta
from .plot import write_trace_plots

log = logging.getLogger("dislag")

OUT_ENV = "DISLAG_OUTPUT_DIR"
EXIT_OK, EXIT_RUNTIME, EXIT_INPUT = 0, 1, 2


def _load(args):
    src = args.case
    if src in ("ieee14", "ieee118"):
        seed = args.case_seed if getattr(args, "case_seed", None) is not None else args.seed
        return builtin(src, seed=seed)
    return load_case(src)


def _seed_list(text):
    seeds = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    return seeds


def parse_noise(text, b):
    """``none``/``zero`` or ``kind:frac`` (relative to ``|b_i|``) or ``kind:abs=c``."""
    if text in ("none", "zero"):
        return None if text == "none" else NoiseModel.zero(len(b))
    kind, _, mag = text.partition(":")
    if kind not in NOISE_KINDS or not mag:
        raise ConfigurationError(f"bad noise spec {text!r}; use none, zero or {'|'.join(NOISE_KINDS)}:<frac>")
    if mag.startswith("abs="):
        return NoiseModel(kind, float(mag[4:]))
    return NoiseModel.relative(kind, float(mag), b)


def _schedule(args, n, horizon, p=None, seed=None):
    p = args.p if p is None else p
    seed = args.seed if seed is None else seed
    if args.schedule_file:
        return GraphSchedule.load(args.schedule_file, B=args.B)
    if args.graph == "complete":
        return GraphSchedule.static(complete_graph(n), horizon)
    dyn = GraphSchedule(n, p=p, horizon=horizon, seed=seed, B=args.B)
    if args.graph == "static":
        return GraphSchedule.static(dyn.graph(0), horizon)
    return dyn


def _config(args, **over):
    cfg = RunConfig(
        max_iters=args.max_iters,
        schedule=StepSchedule.parse(args.step),
        termination="max_iters" if args.no_stop else "relative",
        frac=args.frac,
        lambda_init=args.lambda_init,
        record_every=args.record_every,
    )
    return replace(cfg, **over) if over else cfg


def _out_dir(args):
    out = Path(args.out or os.environ.get(OUT_ENV, "dislag-out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(payload):
    print(json.dumps(payload, indent=2, sort_keys=True))


def cmd_solve(args):
    case = _load(args)
    p = case.problem
    if not check_slater(p):
        print(
            f"infeasible: Slater condition fails, need sum(lo)={p.lo.sum():g} < "
            f"sum(b)={p.b.sum():g} < sum(hi)={p.hi.sum():g}",
            file=sys.stderr,
        )
        return EXIT_INPUT
    res = solve_dual(p, tol=args.tol)
    _emit({
        "case": case.name,
        "seed": case.seed,
        "lambda_star": res.lambda_star,
        "q_star": res.q_star,
        "f_star": res.f_star,
        "x_star": res.x_star.tolist(),
        "iterations": res.iterations,
        "residual": res.residual,
    })
    return EXIT_OK


def _run_one(problem, case_name, args, variant, seed, p, out, oracle, write_plots=False):
    cfg = _config(args)
    schedule = _schedule(args, problem.n, args.max_iters, p=p, seed=seed)
    noise = parse_noise(args.noise, problem.b)
    if variant == "dlm" and noise is not None:
        raise ConfigurationError("run-dlm takes no noise; use --noise none or run-dslm")
    if variant == "dslm" and noise is None:
        raise ConfigurationError("run-dslm needs a noise model (use 'zero' for none)")
    tag = f"{variant}_{case_name}_p{p:g}_seed{seed}"
    trace_path = out / f"trace_{tag}.csv"
    if args.stream:
        cfg = replace(cfg, stream_to=trace_path)
    streams = LoadStreams(problem, noise, seed, cfg.max_iters) if noise is not None else None
    trace = run_rounds(problem, schedule, cfg, oracle, loads_at=streams)
    if not args.stream:
        trace.write_csv(trace_path)
    final = trace.final
    summary = {
        "variant": variant,
        "case": case_name,
        "seed": seed,
        "p": p,
        "graph": args.graph,
        "B": args.B,
        "step": args.step,
        "max_iters": cfg.max_iters,
        "frac": cfg.frac,
        "terminated": trace.terminated,
        "termination_iter": trace.termination_iter,
        "iterations": trace.iterations,
        "lambda_star": oracle.lambda_star,
        "f_star": oracle.f_star,
        "total_demand": problem.total_demand,
        "final_total_allocation": float(final.x.sum()),
        "final_balance_residual": float(trace.balance_residual[-1]),
        "final_primal_cost": float(trace.primal_cost[-1]),
        "final_lagrangian_sum": float(trace.lagrangian_sum[-1]),
        "final_max_lambda_error": float(np.max(np.abs(final.lam - oracle.lambda_star))),
        "delta": spectral_delta(schedule, max(1, trace.iterations)),
        "min_averaging_slack": float(trace.averaging_slack.min()) if trace.iterations else None,
        "trace": str(trace_path),
    }
    if noise is not None:
        summary["noise"] = args.noise
        eta = streams.eta[: trace.iterations]
        c = noise.magnitudes(problem.n)
        ok = np.abs(eta) <= c
        summary["noise_bound_respected"] = bool(ok.all())
        audit = out / f"noise_audit_{tag}.csv"
        with audit.open("w") as fh:
            fh.write("k,node,eta,c,within_bound\n")
            for k in range(eta.shape[0]):
                for i in range(problem.n):
                    fh.write(f"{k},{i},{eta[k, i]:.12g},{c[i]:.12g},{int(ok[k, i])}\n")
        summary["noise_audit"] = str(audit)
    (out / f"summary_{tag}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if write_plots and not args.stream:
        summary["plots"] = [str(pth) for pth in write_trace_plots(
            trace_path, out, oracle.f_star, oracle.lambda_star, problem.total_demand, label=variant)]
    return summary


def _prepare(args):
    case = _load(args)
    problem = case.problem.validate()
    oracle = solve_dual(problem)
    log.debug("oracle for %s: lambda*=%.12g f*=%.12g", case.name, oracle.lambda_star, oracle.f_star)
    return case, problem, oracle


def cmd_run(args, variant):
    case, problem, oracle = _prepare(args)
    summary = _run_one(problem, case.name, args, variant, args.seed, args.p, _out_dir(args), oracle,
                       write_plots=args.plot)
    _emit(summary)
    return EXIT_OK


def cmd_ensemble(args):
    case, problem, oracle = _prepare(args)
    noise = parse_noise(args.noise, problem.b)
    if noise is None:
        raise ConfigurationError("ensemble needs a noise model")
    seeds = _seed_list(args.seeds)
    schedule = _schedule(args, problem.n, args.max_iters)
    res = run_ensemble(problem, schedule, _config(args, termination="max_iters"), noise, seeds, oracle,
                       workers=args.workers)
    out = _out_dir(args)
    path = out / f"ensemble_{case.name}_p{args.p:g}_seed{args.seed}.csv"
    res.write_csv(path)
    viol = res.mean_dual_gap_y[1:] > res.bound[1:, None] + 2 * res.gap_halfwidth[1:]
    _emit({
        "case": case.name,
        "seeds": seeds,
        "graph_seed": args.seed,
        "K": int(res.k[-1]),
        "f_star": oracle.f_star,
        "final_mean_lagrangian_sum": float(res.mean_lagrangian_sum[-1]),
        "final_lagrangian_halfwidth": float(res.lagrangian_halfwidth[-1]),
        "delta": res.delta,
        "D": res.D,
        "bound_violations": int(viol.sum()),
        "output": str(path),
    })
    return EXIT_OK


def _sweep_job(job):
    problem, name, args, variant, seed, p, out, oracle = job
    return _run_one(problem, name, args, variant, seed, p, out, oracle)


def cmd_sweep(args):
    case, problem, oracle = _prepare(args)
    out = _out_dir(args)
    ps = [float(v) for v in args.p_values.split(",")]
    jobs = [(problem, case.name, args, args.variant, s, p, out, oracle) for p in ps for s in _seed_list(args.seeds)]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    path = out / f"sweep_{args.variant}_{case.name}.csv"
    cols = ("p", "seed", "terminated", "termination_iter", "iterations", "final_balance_residual",
            "final_primal_cost", "final_max_lambda_error", "delta")
    with path.open("w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in results:
            fh.write(",".join("" if r[c] is None else str(r[c]) for c in cols) + "\n")
    _emit({"runs": len(results), "terminated": sum(r["terminated"] for r in results), "output": str(path)})
    return EXIT_OK


def cmd_plot(args):
    out = _out_dir(args)
    written = []
    for trace in args.traces:
        meta = {}
        if args.summary:
            meta = json.loads(Path(args.summary).read_text())
        else:
            guess = Path(trace).with_name(Path(trace).name.replace("trace_", "summary_", 1)).with_suffix(".json")
            if guess.exists():
                meta = json.loads(guess.read_text())
        written += write_trace_plots(trace, out, meta.get("f_star"), meta.get("lambda_star"),
                                     meta.get("total_demand"), label=meta.get("variant", ""))
    _emit({"plots": [str(pth) for pth in written]})
    return EXIT_OK


def _add_case(sp):
    sp.add_argument("--case", default="ieee14", help="ieee14, ieee118 or a case file path")
    sp.add_argument("--seed", type=int, default=1, help="graph/noise seed (and ieee118 seed unless --case-seed)")
    sp.add_argument("--case-seed", type=int, default=None, help="seed of the synthesized ieee118 instance")


def _add_run(sp, noise_default):
    _add_case(sp)
    sp.add_argument("--graph", choices=("dynamic", "static", "complete"), default="dynamic")
    sp.add_argument("--p", type=float, default=0.5, help="edge probability of the random graphs")
    sp.add_argument("--B", type=int, default=1, help="connectivity window")
    sp.add_argument("--schedule-file", default=None, help="replay an exported graph schedule")
    sp.add_argument("--step", default="invsqrt", help="invsqrt, harmonic or constant:<alpha>")
    sp.add_argument("--max-iters", type=int, default=2000)
    sp.add_argument("--frac", type=float, default=0.1, help="relative multiplier error that stops the run")
    sp.add_argument("--no-stop", action="store_true", help="always run max-iters rounds")
    sp.add_argument("--lambda-init", type=float, default=0.0)
    sp.add_argument("--record-every", type=int, default=1)
    sp.add_argument("--noise", default=noise_default,
                    help="none, zero, <kind>:<frac of b_i> or <kind>:abs=<c>; kinds: " + ", ".join(NOISE_KINDS))
    sp.add_argument("--stream", action="store_true", help="write trace rows while running")
    sp.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./dislag-out)")


def build_parser():
    ap = argparse.ArgumentParser(prog="dislag", description="Distributed Lagrangian methods for resource allocation")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="centralized dual oracle")
    _add_case(sp)
    sp.add_argument("--tol", type=float, default=1e-8)

    sp = sub.add_parser("run-dlm", help="deterministic distributed Lagrangian method")
    _add_run(sp, "none")
    sp.add_argument("--plot", action="store_true")
    sp = sub.add_parser("run-dslm", help="stochastic variant with noisy loads")
    _add_run(sp, "uniform:0.05")
    sp.add_argument("--plot", action="store_true")

    sp = sub.add_parser("ensemble", help="many noise seeds on one graph schedule")
    _add_run(sp, "uniform:0.05")
    sp.add_argument("--seeds", default="1-50", help="noise seeds, e.g. 1-50 or 3,5,9")
    sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("sweep", help="grid over edge probability and seed")
    _add_run(sp, "none")
    sp.add_argument("--variant", choices=("dlm", "dslm"), default="dlm")
    sp.add_argument("--p-values", default="0.2,0.5,0.8")
    sp.add_argument("--seeds", default="1-5")
    sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("plot", help="render SVG panels from trace CSVs")
    sp.add_argument("traces", nargs="+")
    sp.add_argument("--summary", default=None, help="summary JSON with f_star, lambda_star, total_demand")
    sp.add_argument("--out", default=None)
    return ap


def _validate(args):
    if getattr(args, "max_iters", 1) < 1:
        raise ConfigurationError("--max-iters must be >= 1")
    p = getattr(args, "p", 0.5)
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError("--p must lie in [0, 1]")
    if getattr(args, "B", 1) < 1:
        raise ConfigurationError("--B must be >= 1")
    if getattr(args, "workers", 1) < 1:
        raise ConfigurationError("--workers must be >= 1")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        _validate(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "run-dlm":
            return cmd_run(args, "dlm")
        if args.command == "run-dslm":
            return cmd_run(args, "dslm")
        if args.command == "ensemble":
            return cmd_ensemble(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_plot(args)
    except (SlaterViolation, BracketFailure) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigurationError, ParseError, InvariantViolation, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ScheduleExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
