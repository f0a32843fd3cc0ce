"""Command-line interface.

Subcommands: ``run`` (online prediction over a token stream), ``gen``
(synthetic sequence generation), ``verify-bound`` (loss-ceiling suite), and
``lemma-check`` (randomized checks of the weight-distribution inequalities).

Exit codes: 0 success, 1 I/O or data failure, 2 usage or configuration error,
3 verification violation. The distinct violation code lets CI tell a failed
guarantee from a crashed run.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import os
import sys
from dataclasses import fields

from .core import ConfigError, StreamError, open_stream
from .evaluate import (
    BoundRun,
    PredictorConfig,
    format_summary,
    run_bound_suite,
    run_majorization_cases,
    run_online,
    run_ordered_cases,
    write_trace_csv,
)
from .sources import SourceSpec, load_source_spec

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_VIOLATION = 3


def _parse_beta(text: str) -> float | str:
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"--beta must be a number or 'auto', got {text!r}") from None


def cmd_run(args: argparse.Namespace) -> int:
    config = PredictorConfig(
        max_order=args.max_order,
        gamma=args.gamma,
        beta=_parse_beta(args.beta),
        horizon=args.horizon,
        initial_weight=args.initial_weight,
    )
    stream = open_stream(args.input, args.format)
    trace = run_online(config, stream)
    write_trace_csv(trace, args.out, per_expert=args.per_expert)
    if args.plot:
        from . import report

        base = os.path.splitext(args.out)[0]
        report.save_accuracy_figure(trace, base + ".accuracy.png")
        report.save_loss_bound_figure(trace, base + ".bound.png")
    sys.stdout.write(format_summary(trace))
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    spec = load_source_spec(args.spec)
    tokens = spec.generate(args.length, args.seed)
    with open(args.out, "w", encoding="utf-8") as f:
        for tok in tokens:
            f.write(tok + "\n")
    sys.stdout.write(f"wrote {len(tokens)} symbols to {args.out}\n")
    return EXIT_OK


SUITE_COLUMNS = [f.name for f in fields(BoundRun)]


def load_bound_suite(path: str):
    """Parse a verify-bound suite file; see README for the schema."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read suite file {path!r}")
    if "suite" not in parser:
        raise ConfigError(f"{path}: missing [suite] section")
    suite = parser["suite"]
    try:
        gammas = [float(g) for g in suite.get("gammas", "").split()]
        orders = [int(m) for m in suite.get("max-orders", "").split()]
    except ValueError:
        raise ConfigError(f"{path}: bad 'gammas' or 'max-orders' value") from None
    seed_list = suite.get("seed-list", "").split()
    if seed_list:
        seeds = [int(s) for s in seed_list]
    else:
        count = suite.getint("seeds", fallback=0)
        seeds = list(range(count))
    length = suite.getint("length", fallback=0) or None
    if not gammas or not orders or not seeds:
        raise ConfigError(f"{path}: suite needs gammas, max-orders, and seeds")
    if "source" not in parser:
        raise ConfigError(f"{path}: missing [source] section")
    spec = load_source_spec(path)
    return spec, gammas, orders, seeds, length


def _write_suite_rows(rows: list[BoundRun], out) -> None:
    writer = csv.writer(out)
    writer.writerow(SUITE_COLUMNS)
    for row in rows:
        writer.writerow(
            [
                f"{v:.12g}" if isinstance(v, float) else v
                for v in (getattr(row, c) for c in SUITE_COLUMNS)
            ]
        )


def cmd_verify_bound(args: argparse.Namespace) -> int:
    spec, gammas, orders, seeds, length = load_bound_suite(args.suite)
    if args.plot and not args.out:
        raise ConfigError("--plot requires --out to place the figure")
    rows = run_bound_suite(spec, gammas, orders, seeds, length, jobs=args.jobs)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            _write_suite_rows(rows, f)
    else:
        _write_suite_rows(rows, sys.stdout)
    if args.plot:
        from . import report

        report.save_suite_figure(rows, os.path.splitext(args.out)[0] + ".png")
    violations = [r for r in rows if not r.holds]
    norm_violations = sum(r.normalization_violations for r in rows)
    sys.stdout.write(
        f"runs={len(rows)} bound_violations={len(violations)} "
        f"normalization_violations={norm_violations}\n"
    )
    for r in violations:
        sys.stdout.write(
            f"VIOLATION gamma={r.gamma:g} max_order={r.max_order} seed={r.seed} "
            f"loss={r.loss:.6f} bound={r.bound:.6f}\n"
        )
    return EXIT_VIOLATION if violations or norm_violations else EXIT_OK


def cmd_lemma_check(args: argparse.Namespace) -> int:
    if args.cases < 1:
        raise ConfigError(f"--cases must be >= 1, got {args.cases}")
    maj = run_majorization_cases(args.cases, args.seed)
    ordered = run_ordered_cases(args.cases, args.seed)
    sys.stdout.write(
        f"majorization: {args.cases - len(maj)}/{args.cases} ok; "
        f"ordered-inequality: {args.cases - len(ordered)}/{args.cases} ok\n"
    )
    for failure in maj:
        sys.stdout.write(f"MAJORIZATION VIOLATION {failure}\n")
    for failure in ordered:
        sys.stdout.write(f"ORDERED-INEQUALITY VIOLATION {failure}\n")
    return EXIT_VIOLATION if maj or ordered else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hedgeppm",
        description="Online symbol prediction with discounted expert aggregation over "
        "context-trie models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="predict over a token stream and write a trace CSV")
    p.add_argument("--input", required=True, help="token file, or '-' for stdin")
    p.add_argument("--format", default="lines", help="lines | csv:<col> | jsonl:<field>")
    p.add_argument("--max-order", type=int, required=True, help="longest context; orders 0..K")
    p.add_argument("--gamma", type=float, default=1.0, help="loss discount in (0, 1]")
    p.add_argument("--beta", default="auto", help="weight update factor in (0, 1], or 'auto'")
    p.add_argument("--horizon", type=int, default=None, help="declared run length (for --beta auto)")
    p.add_argument("--initial-weight", type=float, default=1.0)
    p.add_argument("--out", required=True, help="trace CSV path")
    p.add_argument("--per-expert", action="store_true", help="add per-expert columns")
    p.add_argument("--plot", action="store_true", help="render figures next to --out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gen", help="generate a synthetic token file from a source spec")
    p.add_argument("--spec", required=True, help="source spec file (INI)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--length", type=int, default=None, help="sequence length (regime specs fix it)")
    p.add_argument("--out", required=True, help="output token file, one symbol per line")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("verify-bound", help="run a (gamma x order x seed) loss-ceiling suite")
    p.add_argument("--suite", required=True, help="suite file (INI)")
    p.add_argument("--out", default=None, help="results CSV path (default: stdout)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--plot", action="store_true", help="render the suite figure next to --out")
    p.set_defaults(func=cmd_verify_bound)

    p = sub.add_parser("lemma-check", help="randomized weight-inequality checks")
    p.add_argument("--cases", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_lemma_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (OSError, StreamError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
