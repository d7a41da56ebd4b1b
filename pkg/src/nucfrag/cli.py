"""Command-line entry point: ``nucfrag <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 missing or empty input,
4 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, branching, experiment, fragmentation
from .errors import ConfigurationError, InsufficientData, PrecisionError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_INTERNAL = 4

log = logging.getLogger("nucfrag")


def _jsonl(records) -> str:
    return "".join(json.dumps(r, sort_keys=True, default=float) + "\n" for r in records)


def cmd_simulate(args) -> int:
    cfg = experiment.ExperimentConfig.load(args.config)
    if args.workers:
        cfg.worker_count = args.workers
    out = cfg.output_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = experiment.run_sweep(cfg)
    summaries = [r.summary for r in results]
    summary_path = out / cfg.output.get("summary", "summary.csv")
    experiment.write_summaries(summary_path, summaries)
    if cfg.output.get("curves"):
        cdir = out / "curves"
        cdir.mkdir(exist_ok=True)
        for r in results:
            if r.curve is not None:
                experiment.write_curve(cdir / f"N{r.summary.N}_rep{r.summary.replication_id}.csv", r.curve)
    n_trunc = sum(s.truncated for s in summaries)
    violations = sum(r.mass_violations for r in results)
    print(f"wrote {len(summaries)} rows to {summary_path}; truncated runs: {n_trunc}; mass violations: {violations}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = experiment.ExperimentConfig.load(args.config)
    path = Path(args.summaries)
    if not path.is_file():
        print(f"error: summary file {path} not found", file=sys.stderr)
        return EXIT_MISSING
    try:
        summaries = experiment.read_summaries(path)
    except InsufficientData as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISSING
    records = experiment.validate(cfg, summaries)
    report = Path(args.report) if args.report else cfg.output_dir() / cfg.output.get("report", "report.jsonl")
    report.parent.mkdir(parents=True, exist_ok=True)
    report.write_text("".join(r.to_json() + "\n" for r in records))
    print(experiment.format_table(records))
    return EXIT_OK


def cmd_fragcheck(args) -> int:
    spec = fragmentation.FragmentationSpec.parse(args.spec)
    rows = []
    for k in range(max(2, args.kmin), args.kmax + 1):
        moments = {p: fragmentation.moment(spec, k, p) for p in range(1, k)}
        total = sum(p * m for p, m in moments.items())
        rows.append({"k": k, "moments": {str(p): m for p, m in moments.items()}, "mass_identity": total, "identity_ok": abs(total - k) <= 1e-9})
    if args.n_c:
        rng = np.random.default_rng(args.seed)
        a3 = fragmentation.check_A3(spec, range(max(2, args.kmin), args.kmax + 1), args.samples, rng, args.n_c)
        rows.append({"check": "A3", "C0_hat": a3.C0_hat, "small_count_growing": a3.small_count_growing,
                     "two_stable_fraction": dict(zip(map(str, a3.ks), a3.two_stable_fraction))})
    n_viol = 0
    for k in range(max(2, args.kmin), args.kmax):
        for kp in range(k + 1, args.kmax + 1):
            n_viol += len(fragmentation.check_A4(spec, k, kp).violations)
    rows.append({"check": "A4", "pairs_up_to": args.kmax, "violations": n_viol})
    sys.stdout.write(_jsonl(rows))
    return EXIT_OK


def cmd_branching(args) -> int:
    spec = fragmentation.FragmentationSpec.parse(args.frag)
    p = branching.BranchingParams(args.alpha, args.mu, args.nc, spec)
    est = branching.estimate_survival(p, args.reps, args.horizon, args.cap, args.seed)
    row = {"alpha": args.alpha, "mu": args.mu, "n_c": args.nc, "fragmentation": str(spec), **est.to_dict()}
    sys.stdout.write(_jsonl([row]))
    return EXIT_OK


def cmd_mminf(args) -> int:
    p = analysis.MMInfParams(args.arrival, args.service, args.level, args.initial, args.batch)
    T = analysis.mm_infinity_simulate_batch(p, args.paths, args.seed)
    y = np.exp(-args.service * args.xi * T)
    row = {"arrival": args.arrival, "service": args.service, "level": args.level, "xi": args.xi,
           "simulated": float(y.mean()), "std_error": float(y.std(ddof=1) / np.sqrt(args.paths)),
           "mean_hitting_time": float(T.mean())}
    try:
        row["closed_form"] = analysis.mm_infinity_laplace(p, args.xi)
    except (ConfigurationError, PrecisionError) as e:
        row["closed_form"] = None
        row["note"] = str(e)
    sys.stdout.write(_jsonl([row]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nucfrag", description="Nucleation-fragmentation polymerization simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a replication sweep and write summary CSVs")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--workers", type=int, help="override worker_count")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("validate", help="limit-law tests on a summary CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--summaries", required=True)
    s.add_argument("--report", help="JSON-lines report path")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("fragcheck", help="moments and monotonicity of a fragmentation measure")
    s.add_argument("--spec", default="UF", help="UF, BF:<p> or MF:<w1>,<w2>,...")
    s.add_argument("--kmin", type=int, default=2)
    s.add_argument("--kmax", type=int, default=12)
    s.add_argument("--n-c", dest="n_c", type=int, default=0, help="also run the small-fragment check for this nucleus size")
    s.add_argument("--samples", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_fragcheck)

    s = sub.add_parser("branching", help="survival of the stable-polymer branching process")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--mu", type=float, required=True)
    s.add_argument("--nc", type=int, required=True)
    s.add_argument("--frag", default="UF")
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--horizon", type=float, default=20.0)
    s.add_argument("--cap", type=int, default=branching.DEFAULT_POPULATION_CAP)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_branching)

    s = sub.add_parser("mminf", help="M/M/infinity hitting-time Laplace transform vs simulation")
    s.add_argument("--arrival", type=float, required=True)
    s.add_argument("--service", type=float, required=True)
    s.add_argument("--level", type=int, required=True)
    s.add_argument("--xi", type=float, required=True)
    s.add_argument("--initial", type=int, default=0)
    s.add_argument("--batch", type=int, default=1)
    s.add_argument("--paths", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_mminf)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigurationError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISSING
    except InsufficientData as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISSING
    except Exception as e:  # noqa: BLE001 - last-resort exit code for the shell
        log.exception("internal error")
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
