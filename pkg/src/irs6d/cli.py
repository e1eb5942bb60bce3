"""Command line entry point: ``irs6d run|crb|validate``."""
from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

from .config import ConfigError, load_config


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="irs6d", description="IRS pose estimation experiments")
    sub = p.add_subparsers(dest="command", metavar="{run,crb,validate}")
    sub.required = True

    run = sub.add_parser("run", help="run a Monte Carlo experiment from a config file")
    run.add_argument("--config", required=True, metavar="PATH", help="TOML experiment file")
    run.add_argument("--out", default="results", metavar="DIR", help="output directory (default: results)")
    run.add_argument("--trials", type=int, metavar="N", help="override experiment.trials")
    run.add_argument("--seed", type=int, metavar="N", help="override experiment.root_seed")
    run.add_argument("--pt-dbm", type=float, metavar="X", help="override scenario.pt_dbm")

    crb = sub.add_parser("crb", help="print the bound report for one scenario")
    crb.add_argument("--config", metavar="PATH", help="TOML file (defaults when omitted)")
    crb.add_argument("--out", metavar="DIR", help="also write crb.csv here")
    crb.add_argument("--seed", type=int, metavar="N", help="override experiment.root_seed (codebooks)")
    crb.add_argument("--pt-dbm", type=float, metavar="X", help="override scenario.pt_dbm")

    val = sub.add_parser("validate", help="run the oracle suites")
    val.add_argument("--suite", default="all", metavar="NAME",
                     help="geometry, jacobians, fim, als, kabsch, lemma1 or all")
    return p


def _cmd_run(args) -> int:
    from .harness import csv_text, experiment_from_config, run_experiment

    doc = load_config(args.config)
    if args.trials is not None and args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    exp = experiment_from_config(doc, Path(args.config).stem, Path(args.out), args.trials, args.seed, args.pt_dbm)
    t0 = time.perf_counter()
    rows = run_experiment(exp)
    sys.stdout.write(csv_text(exp, rows))
    out = Path(args.out)
    print(f"wrote {out / (exp.name + '.csv')} and {out / (exp.name + '.meta.json')} "
          f"in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return 0


def crb_table(doc: dict, seed=None, pt_dbm=None):
    """Header and single row of the bound report, at full double precision."""
    from .angles import AngleSet
    from .harness import codebook_seed, experiment_from_config, scenario_crb
    from .scene import make_codebooks, watt_to_dbm

    exp = experiment_from_config(doc, seed=seed, pt_dbm=pt_dbm)
    sc = exp.scenario
    rep = scenario_crb(sc, make_codebooks(sc, codebook_seed(exp.root_seed)))
    header = ["pt_dbm"] + [f"crb_{lab}" for lab in AngleSet.labels(sc.K)] + ["crb_p", "crb_q", "degenerate"]
    row = [watt_to_dbm(sc.tx_power), *rep.crb_per_angle, rep.crb_location, rep.crb_orientation]
    return header, [repr(float(x)) for x in row] + [str(bool(rep.degenerate)).lower()]


def _cmd_crb(args) -> int:
    doc = load_config(args.config) if args.config else {}
    header, row = crb_table(doc, args.seed, args.pt_dbm)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    w.writerow(row)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "crb.csv", "w", newline="") as fh:
            cw = csv.writer(fh, lineterminator="\n")
            cw.writerow(header)
            cw.writerow(row)
    return 0


def _cmd_validate(args) -> int:
    from .validation import SUITES, run_suite

    names = SUITES if args.suite == "all" else (args.suite,)
    if any(n not in SUITES for n in names):
        raise ConfigError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)} or all")
    ok = True
    for n in names:
        res = run_suite(n)
        print(res.line())
        ok &= res.ok
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    handler = {"run": _cmd_run, "crb": _cmd_crb, "validate": _cmd_validate}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"irs6d: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"irs6d: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
