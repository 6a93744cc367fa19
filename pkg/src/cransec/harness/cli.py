"""Command line: ``cransec run <spec>``, ``cransec accept`` and ``cransec demo``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import warnings
from pathlib import Path

from ..srm import VARIANTS


def _variants(text: str) -> tuple:
    out = tuple(v.strip() for v in text.split(",") if v.strip())
    bad = [v for v in out if v not in VARIANTS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"variants must be a comma list from {','.join(VARIANTS)}")
    return out


def _injection(items) -> dict:
    out = {}
    for item in items or []:
        cid, _, factor = item.partition("=")
        out[cid.strip().upper()] = float(factor or 10.0)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cransec", description="Secure hybrid beamforming in a C-RAN cluster.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a YAML or JSON spec file")
    run.add_argument("spec", type=Path)
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--outdir", type=Path, help="override the output directory")
    run.add_argument("--trials", type=int, help="override the number of trials per grid point")
    run.add_argument("--variants", type=_variants, help="comma list of variants to run")
    run.add_argument("--workers", type=int, help="worker processes (default from the spec)")

    acc = sub.add_parser("accept", help="run the acceptance suite; exit code 0 iff every criterion passes")
    acc.add_argument("--seed", type=int, help="master seed (default 2024)")
    acc.add_argument("--outdir", type=Path, help="write the report JSON and sweep tables here")
    acc.add_argument("--trials", type=int, help="instances per criterion and trials per sweep point")
    acc.add_argument("--only", help="comma list of criteria, e.g. C1,C7")
    acc.add_argument("--inject", action="append", metavar="CID[=FACTOR]",
                     help="harness self-test: push criterion CID past its bounds by FACTOR (default 10)")

    demo = sub.add_parser("demo", help="solve one instance and print rates per variant")
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--outdir", type=Path, help="save the case, solutions and traces here")
    demo.add_argument("--variants", type=_variants, default=VARIANTS)
    demo.add_argument("--sigma", type=float, default=0.05, help="CSI error ratio of every Eve")
    return p


def cmd_run(args) -> int:
    from .experiment import ExperimentSpec, run_experiment
    spec = ExperimentSpec.load(args.spec)
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.outdir is not None:
        changes["outdir"] = str(args.outdir)
    if args.trials is not None:
        changes["n_trials"] = args.trials
    if args.variants is not None:
        changes["variants"] = args.variants
    if args.workers is not None:
        changes["workers"] = args.workers
    spec = dataclasses.replace(spec, **changes)
    total = len(spec.grid) * spec.n_trials
    done = []

    def progress(point, trial):
        done.append(1)
        logging.info("finished %d/%d (grid %s, trial %d)", len(done), total, spec.grid[point], trial)

    res = run_experiment(spec, progress=progress)
    failed = sum(r.get("status") != "ok" for r in res.rows)
    for entry in res.summary["points"]:
        mean = entry.get("mean", float("nan"))
        ci = entry.get("ci95", float("nan"))
        print(f"{spec.experiment} {entry['grid_value']!s:>8} {entry['variant']:<7} "
              f"secrecy {mean:8.4f} +- {ci:.4f} bit/s/Hz  ok {entry['n_ok']}/{entry['n']}")
    for name, path in res.paths.items():
        print(f"{name}: {path}")
    if failed:
        print(f"{failed} row(s) failed; see the status column", file=sys.stderr)
    return 0


def cmd_accept(args) -> int:
    from .acceptance import CRITERIA, AcceptanceSettings, run_acceptance
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.trials is not None:
        changes.update(n_instances=args.trials, c4_trials=args.trials)
    if args.only:
        only = tuple(c.strip().upper() for c in args.only.split(","))
        bad = [c for c in only if c not in CRITERIA]
        if bad:
            raise SystemExit(f"unknown criteria {bad}")
        changes["only"] = only
    settings = AcceptanceSettings(**changes)
    if args.outdir:
        args.outdir.mkdir(parents=True, exist_ok=True)
    report = run_acceptance(settings, inject=_injection(args.inject), outdir=args.outdir,
                            progress=lambda msg: logging.info("acceptance: %s", msg))
    for line in report.lines():
        print(line)
    print(f"overall {'PASS' if report.passed else 'FAIL'} in {report.seconds:.0f} s")
    if args.outdir:
        path = args.outdir / "acceptance.json"
        path.write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True))
        print(f"report: {path}")
    return 0 if report.passed else 1


def cmd_demo(args) -> int:
    from ..analogbf import design_analog_bf
    from ..io import save_case, save_json, solution_to_dict
    from ..model import SystemConfig, draw_instance
    from ..rankrec import recover_rank_one
    from ..rates import secrecy_rates
    from ..srm import solve_srm
    from .experiment import TRACE_FIELDS, rows_to_csv

    cfg = SystemConfig(rng_seed=args.seed, csi_error_ratio=args.sigma)
    _, channels = draw_instance(cfg)
    bf = design_analog_bf(channels, cfg)
    if args.outdir:
        save_case(args.outdir / "case.json", cfg, channels, bf)
    print(f"config {cfg.digest()}: N={cfg.n_cp_antennas} M={cfg.n_bs_antennas} L={cfg.n_bs} "
          f"K={cfg.n_users} Z={cfg.n_eves} sigma={args.sigma}")
    print(f"{'variant':<8}{'secrecy':>10}{'relaxed':>10}{'access':>10}{'fronthaul':>11}{'iters':>7}  reason")
    for variant in args.variants:
        res = solve_srm(variant, channels, bf, cfg)
        sol, rep = recover_rank_one(res, channels, bf, cfg, rng=args.seed)
        final = secrecy_rates(sol, channels, bf, cfg)
        W = cfg.bw_mmwave
        print(f"{variant:<8}{final.sum_secrecy / W:10.4f}{rep.objective_before:10.4f}{final.sum_access / W:10.4f}"
              f"{final.fronthaul_min / W:11.4f}{res.trace.iterations:7d}  {res.trace.reason}")
        if args.outdir:
            save_json(args.outdir / f"{variant}_solution.json",
                      {"relaxed": solution_to_dict(res.solution), "recovered": solution_to_dict(sol),
                       "ranks_before": rep.ranks_before, "paths": rep.paths})
            rows = [{"variant": variant, **r} for r in res.trace.rows()]
            (args.outdir / f"{variant}_trace.csv").write_text(rows_to_csv(rows, TRACE_FIELDS[3:]))
    print("rates in bit/s/Hz (normalized by the mmWave bandwidth)")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    # cvxpy warns about solution accuracy on some subproblems; statuses are tracked explicitly
    warnings.filterwarnings("ignore", module="cvxpy")
    handler = {"run": cmd_run, "accept": cmd_accept, "demo": cmd_demo}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
