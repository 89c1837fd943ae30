"""Command-line entry point: ``stsar {simulate,fit,mc,weights,check}``.

Exit status is 0 on success, 1 on invalid input or configuration, and 2 on
numerical failure (degenerate likelihood, singular operator, failed fit).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import (
    ConfigError,
    fit_section,
    lattice_section,
    load_config,
    simulate_section,
    study_section,
    truth_section,
)
from .errors import EstimationError, InfeasibleError

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2

log = logging.getLogger("stsar")


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file")
    common.add_argument("--seed", type=int, help="override the seed / base seed")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--verbose", action="store_true", help="debug logging")
    common.add_argument("--log", help="write the debug log to this file")

    ap = argparse.ArgumentParser(prog="stsar", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate a panel to CSV")
    s.add_argument("--m", type=int, help="number of time points")

    f = sub.add_parser("fit", parents=[common], help="fit a panel CSV")
    f.add_argument("--data", required=True, help="panel CSV (site,time,y,x1..xp)")
    f.add_argument("--weights", help="weight triplet file; else built from [lattice]")
    f.add_argument("--format", choices=["report", "csv"], default="report")
    f.add_argument("--level", type=float, default=0.95)

    mc = sub.add_parser("mc", parents=[common], help="Monte Carlo study")
    mc.add_argument("--reps", type=int, help="override [study] reps")
    mc.add_argument("--threads", type=int, default=1)
    mc.add_argument("--replicates", help="per-replicate CSV (default: <out>.replicates.csv)")
    mc.add_argument("--pretty", action="store_true", help="also print the wide table")

    wt = sub.add_parser("weights", parents=[common], help="write lattice weights")
    wt.add_argument("--r", type=int)
    wt.add_argument("--r-star", type=int)

    sub.add_parser("check", parents=[common], help="run the invariant self-checks")
    return ap


def _setup_logging(args):
    if not (args.verbose or args.log):
        return
    handler = logging.FileHandler(args.log) if args.log else logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(name)s %(message)s"))
    root = logging.getLogger("stsar")
    root.addHandler(handler)
    root.setLevel(logging.DEBUG)


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cfg(args):
    return load_config(args.config) if args.config else {}


def cmd_simulate(args):
    from .simulate import SimConfig, gen_dataset, write_dataset
    from .model import write_panel_csv

    cfg = _cfg(args)
    r, rs, thr = lattice_section(cfg)
    m, seed = simulate_section(cfg) if "simulate" in cfg else (args.m, 0)
    if args.m is not None:
        m = args.m
    if m is None:
        raise ConfigError("number of time points not given ([simulate] m or --m)")
    if args.seed is not None:
        seed = args.seed
    sim = SimConfig(r, rs, m, truth_section(cfg), thr, seed)
    data = gen_dataset(sim)
    if args.out:
        write_dataset(sim, data, args.out)
    else:
        write_panel_csv(data, "/dev/stdout")
    return EXIT_OK


def cmd_fit(args):
    from .inference import fit_mle
    from .lattice import lattice_weights, read_weights
    from .model import read_panel_csv

    cfg = _cfg(args)
    data = read_panel_csv(args.data)
    if args.weights:
        w = read_weights(args.weights)
    else:
        r, rs, thr = lattice_section(cfg)
        w = lattice_weights(r, rs, thr)
    fit = fit_mle(data, w, fit_section(cfg))
    if args.format == "csv":
        import csv
        import io

        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(fit.csv_header())
        wr.writerow(fit.csv_row())
        _emit(buf.getvalue(), args.out)
    else:
        _emit(fit.report(args.level), args.out)
    return EXIT_OK if fit.converged else EXIT_NUMERIC


def cmd_mc(args):
    from .harness import McConfig, format_pretty, run_mc, write_summary_csv

    cfg = _cfg(args)
    grid, reps, base_seed = study_section(cfg)
    if args.reps is not None:
        reps = args.reps
    if args.seed is not None:
        base_seed = args.seed
    _, _, thr = lattice_section(cfg, need_size=False)
    mc = McConfig(grid=grid, reps=reps, truth=truth_section(cfg), base_seed=base_seed,
                  thresholds=thr, fit=fit_section(cfg), out=args.out)
    rep_path = args.replicates or (f"{args.out}.replicates.csv" if args.out else None)
    summary = run_mc(mc, threads=args.threads, replicates_path=rep_path)
    if args.out:
        write_summary_csv(summary, args.out)
    else:
        write_summary_csv(summary, "/dev/stdout")
    if args.pretty:
        sys.stderr.write(format_pretty(summary))
    for cell in summary.failed_cells:
        log.warning("cell %s: every replicate failed", cell)
    return EXIT_OK


def cmd_weights(args):
    from .lattice import lattice_weights, write_weights

    cfg = _cfg(args)
    if args.r is not None and args.r_star is not None:
        _, _, thr = lattice_section(cfg, need_size=False)
        r, rs = args.r, args.r_star
    else:
        r, rs, thr = lattice_section(cfg)
    w = lattice_weights(r, rs, thr)
    write_weights(w, args.out or "/dev/stdout")
    return EXIT_OK


def cmd_check(args):
    from .checks import run_checks

    results = run_checks()
    lines = [f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
             for name, ok, detail in results]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_NUMERIC


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "mc": cmd_mc,
            "weights": cmd_weights, "check": cmd_check}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    _setup_logging(args)
    try:
        return COMMANDS[args.cmd](args)
    except (EstimationError, InfeasibleError) as exc:
        print(f"stsar {args.cmd}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, OSError) as exc:
        print(f"stsar {args.cmd}: {exc}", file=sys.stderr)
        return EXIT_INPUT


cli_main = main

if __name__ == "__main__":
    sys.exit(main())
