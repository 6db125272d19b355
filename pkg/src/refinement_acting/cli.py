"""Command line: run experiment grids, train models, summarize results, generate and validate problems."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from .core import DomainError
from .domains import build, names
from .experiment import (MODES, OUTPUT_ENV, RunSpec, SpecError, format_summary, output_dir,
                         read_csv, report_rows, run_grid, suite_problems, summarize, write_csv)
from .sim import Problem, Rng

log = logging.getLogger("refinement_acting")

EXIT_OK, EXIT_SPEC, EXIT_INTERNAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_SPEC, f"{self.prog}: error: {message}\n")


def _dmax(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        d = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"d_max must be a positive integer or 'inf', got {text!r}") from None
    if d < 1:
        raise argparse.ArgumentTypeError("d_max must be >= 1")
    return float(d)


def _c(text: str):
    if text == "auto":
        return text
    try:
        c = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"exploration constant must be a number or 'auto', got {text!r}") from None
    if not c >= 0:
        raise argparse.ArgumentTypeError("exploration constant must be >= 0")
    return c


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return n


def _planner_flags(p, nro=1000):
    p.add_argument("--nro", type=_positive, default=nro, help="rollouts per planner call")
    p.add_argument("--dmax", type=_dmax, default=math.inf, help="rollout depth, integer or 'inf'")
    p.add_argument("--c", type=_c, default="auto", help="UCB exploration constant or 'auto'")
    p.add_argument("--time-budget", type=float, default=None, help="seconds per planner call")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="refinement-acting", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="act on a problem suite in one or more modes and write per-task CSV rows")
    p.add_argument("--domain", required=True, action="append", choices=names())
    p.add_argument("--suite", default="s20", help="s<N> for N generated problems, or a directory of problem files")
    p.add_argument("--problems", type=_positive, default=None, help="use only the first N problems")
    p.add_argument("--mode", required=True, action="append", choices=MODES)
    p.add_argument("--runs", type=_positive, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", default=None, help="model file for learned modes (one domain only)")
    p.add_argument("--max-ticks", type=_positive, default=1000)
    p.add_argument("--out", default=None, help=f"CSV path (default: ${OUTPUT_ENV} or ./results, run.csv)")
    p.add_argument("--append", action="store_true", help="append to an existing CSV")
    p.add_argument("--timing", action="store_true", help="record planner wall-clock (makes the CSV nondeterministic)")
    p.add_argument("--workers", type=_positive, default=1)
    _planner_flags(p)

    p = sub.add_parser("train", help="generate training data by acting with the planner, then fit a model")
    p.add_argument("--domain", required=True, choices=names())
    p.add_argument("--strategy", required=True, choices=("lm1", "lm2", "lh"))
    p.add_argument("--tasks", type=_positive, default=100, help="root tasks to act on when generating data")
    p.add_argument("--data", default=None, help="read records from this JSONL file instead of generating")
    p.add_argument("--records", default=None, help="also write the generated records to this JSONL file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=_positive, default=10, help="utility intervals (lh)")
    p.add_argument("--epochs", type=_positive, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--hidden", type=_positive, default=64)
    p.add_argument("--batch", type=_positive, default=32)
    p.add_argument("--out", default=None, help="model path (default: <output dir>/<domain>-<strategy>.json)")
    _planner_flags(p, nro=100)

    p = sub.add_parser("report", help="summarize result CSV files")
    p.add_argument("csv", nargs="+")

    p = sub.add_parser("gen", help="write generated problems as JSON files")
    p.add_argument("--domain", required=True, choices=names())
    p.add_argument("--count", type=_positive, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="directory")

    p = sub.add_parser("validate", help="check domain declarations and optional problem files")
    p.add_argument("--domain", action="append", choices=names())
    p.add_argument("problems", nargs="*", help="problem files to check against the domain")
    return ap


def cmd_run(args) -> int:
    if args.model and len(args.domain) > 1:
        raise SpecError("--model applies to a single domain")
    if any(m in ("lm1", "lm2", "upom+nnH") for m in args.mode) and not args.model:
        raise SpecError("learned modes need --model")
    specs = []
    for name in args.domain:
        domain = build(name)
        for problem in suite_problems(domain, args.suite, args.seed, args.problems):
            pd = problem.to_dict()
            for mode in args.mode:
                for r in range(args.runs):
                    specs.append(RunSpec(name, pd, mode, r, args.seed, args.nro, args.dmax, args.c,
                                         args.time_budget, args.model, args.max_ticks))
    log.info("running %d cells", len(specs))
    reports = run_grid(specs, args.workers)
    rows = [row for rep in reports for row in report_rows(rep, args.timing)]
    out = Path(args.out) if args.out else output_dir() / "run.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(rows, out, append=args.append)
    print(format_summary(summarize(read_csv(out))))
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .learn import Hyper, LearnedHeuristic, MethodPolicy, generate_data, load_records, save_records
    from .planner import PlannerConfig

    domain = build(args.domain)
    if args.data:
        try:
            records = load_records(args.data, domain)
        except (OSError, ValueError, DomainError) as exc:
            raise SpecError(str(exc)) from None
        if args.strategy == "lm1":
            records = [r for r in records if getattr(r, "success", None) is True]
    else:
        cfg = PlannerConfig(n_ro=args.nro, d_max=args.dmax, c=args.c, time_budget=args.time_budget)
        records = generate_data(domain, args.tasks, args.strategy, cfg, Rng(args.seed, f"data/{args.domain}"))
    if args.records:
        save_records(records, args.records)
    if not records:
        raise SpecError(f"no {args.strategy} records to train on")
    hyper = Hyper(lr=args.lr, epochs=args.epochs, hidden=args.hidden, batch=args.batch, seed=args.seed, k=args.k)
    fit = LearnedHeuristic.fit if args.strategy == "lh" else MethodPolicy.fit
    model = fit(domain, records, hyper)
    out = Path(args.out) if args.out else output_dir() / f"{args.domain}-{args.strategy}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    curves = out.with_suffix(".curves.csv")
    with open(curves, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        keys = ("train_loss", "train_acc", "val_loss", "val_acc")
        w.writerow(("epoch",) + keys)
        for e in range(len(model.history["train_loss"])):
            w.writerow([e + 1] + [repr(model.history[k][e]) if e < len(model.history[k]) else "" for k in keys])
    print(f"{len(records)} records; " + ", ".join(f"{k}={v}" for k, v in model.metrics.items()))
    if args.strategy == "lh":
        print("interval edges: " + " ".join(f"{e:.4g}" for e in model.intervals.edges))
    print(f"wrote {out} and {curves}")
    return EXIT_OK


def cmd_report(args) -> int:
    rows = []
    for path in args.csv:
        try:
            rows.extend(read_csv(path))
        except OSError as exc:
            raise SpecError(str(exc)) from None
    if rows:
        print(format_summary(summarize(rows)))
    return EXIT_OK


def cmd_gen(args) -> int:
    domain = build(args.domain)
    problems = suite_problems(domain, f"s{args.count}", args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for p in problems:
        (out / f"{p.id}.json").write_text(p.dumps() + "\n")
    print(f"wrote {len(problems)} problems to {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    domains = args.domain or names()
    for name in domains:
        d = build(name)
        counts = " ".join(f"{k}={v}" for k, v in d.counts().items())
        print(f"{name}: ok ({counts}) fingerprint={d.fingerprint()}")
    if args.problems:
        if len(domains) != 1:
            raise SpecError("checking problem files needs exactly one --domain")
        d = build(domains[0])
        for path in args.problems:
            try:
                Problem.loads(Path(path).read_text(), d)
            except (OSError, ValueError, KeyError, DomainError) as exc:
                raise SpecError(f"{path}: {exc}") from None
            print(f"{path}: ok")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "train": cmd_train, "report": cmd_report, "gen": cmd_gen, "validate": cmd_validate}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors and --help both land here
        return exc.code if isinstance(exc.code, int) else EXIT_SPEC
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (SpecError, DomainError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
