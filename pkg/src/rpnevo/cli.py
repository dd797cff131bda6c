"""Command-line interface.

Verbs:
  run             evolve one problem, write telemetry + a JSON report
  bench           run the problem registry suite and tally typical/best
  validate        check an explicit model against a problem's test set
  nan-experiment  quadratic-root search with and without NaN-bearing domains

Exit codes: 0 validated/ok, 1 usage error, 2 finished without validating.
Flags override config-file keys; the config file is flat JSON covering
every RunConfig field (see `rpnevo dump-config`).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import (
    REGISTRY,
    load_problems_csv,
    quadratic_nan_experiment,
    run_problem,
    run_suite,
    validate_model,
)
from .config import RunConfig
from .genome import Genome, validate as validate_genome
from .infix import parse_infix

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNVALIDATED = 2


class UsageError(Exception):
    pass


def _load_config(args) -> RunConfig:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        config = RunConfig.from_file(path)
    else:
        config = RunConfig()
    overrides = {}
    for flag, key in (
        ("seed", "seed"),
        ("fitness", "fitness"),
        ("backend", "backend"),
        ("selection", "selection"),
        ("scale_divisor", "scale_divisor"),
        ("budget_seconds", "max_seconds"),
        ("generations", "max_generations"),
        ("batch_size", "batch_size"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if overrides:
        config = config.replace(**overrides)
    if config.max_seconds is None and config.max_generations is None:
        config = config.replace(max_seconds=60.0)
    return config


def _resolve_problems(args) -> dict:
    problems = dict(REGISTRY)
    csv_path = getattr(args, "problems_csv", None)
    if csv_path:
        path = Path(csv_path)
        if not path.exists():
            raise UsageError(f"problem CSV not found: {path}")
        for spec in load_problems_csv(path):
            problems[spec.name] = spec
    return problems


def _cmd_run(args) -> int:
    config = _load_config(args)
    problems = _resolve_problems(args)
    if args.problem not in problems:
        raise UsageError(
            f"unknown problem {args.problem!r}; known: {', '.join(sorted(problems))}"
        )
    spec = problems[args.problem]
    telemetry = args.telemetry or f"rpnevo_{spec.name}_s{config.seed}.telemetry.jsonl"
    result = run_problem(
        spec,
        config,
        data_seed=args.data_seed,
        run_seed=config.seed,
        telemetry=telemetry,
    )
    report = {
        "problem": spec.name,
        "fitness": config.fitness,
        "seed": config.seed,
        **result.to_dict(),
    }
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    validated = result.report.validated if result.report else False
    return EXIT_OK if validated else EXIT_UNVALIDATED


def _cmd_bench(args) -> int:
    config = _load_config(args)
    problems = _resolve_problems(args)
    if args.problems:
        names = [n.strip() for n in args.problems.split(",") if n.strip()]
        unknown = [n for n in names if n not in problems]
        if unknown:
            raise UsageError(f"unknown problems: {', '.join(unknown)}")
        selected = [problems[n] for n in names]
    else:
        selected = [problems[n] for n in REGISTRY]
    report = run_suite(
        selected, config, repeats=args.repeats, workers=args.workers,
        progress=not args.quiet,
    )
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n")
    print(f"fitness={report.fitness} repeats={report.repeats}")
    print(f"{'problem':<20} {'validated':>9} {'typical':>8} {'best':>5}")
    for p in report.problems:
        print(
            f"{p.name:<20} {p.validated_count:>6}/{p.repeats:<2} "
            f"{str(p.typical):>8} {str(p.best):>5}"
        )
    print(
        f"totals: typical={report.typical_count} best={report.best_count} "
        f"validated_runs={report.validated_runs_total}"
    )
    return EXIT_OK


def _cmd_validate(args) -> int:
    problems = _resolve_problems(args)
    if args.problem not in problems:
        raise UsageError(f"unknown problem {args.problem!r}")
    spec = problems[args.problem]
    if args.model_infix:
        genome = parse_infix(args.model_infix, spec.arity)
    elif args.model:
        genome = Genome.from_text(args.model, spec.arity)
    else:
        raise UsageError("provide --model (RPN) or --model-infix (expression)")
    if not validate_genome(genome):
        raise UsageError("the supplied model is not a viable genome")
    report = validate_model(genome, spec, data_seed=args.data_seed)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK if report.validated else EXIT_UNVALIDATED


def _cmd_nan_experiment(args) -> int:
    config = _load_config(args)
    report = quadratic_nan_experiment(
        config, repeats=args.repeats, workers=args.workers, progress=not args.quiet
    )
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def _cmd_dump_config(args) -> int:
    print(json.dumps(RunConfig().to_dict(), indent=2))
    return EXIT_OK


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--seed", type=int, help="root random seed")
    p.add_argument("--fitness", choices=["ptpt", "corr"])
    p.add_argument("--backend", choices=["reference", "parallel"])
    p.add_argument("--selection", choices=["microcosm", "microcosm-cutoff", "fullrank"])
    p.add_argument("--scale-divisor", dest="scale_divisor", type=int)
    p.add_argument("--budget-seconds", dest="budget_seconds", type=float)
    p.add_argument("--generations", type=int, help="generation cap")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--problems-csv", dest="problems_csv", help="extra problems (CSV)")
    p.add_argument("--data-seed", dest="data_seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rpnevo", description="symbolic regression engine"
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="evolve one problem")
    p_run.add_argument("--problem", required=True)
    p_run.add_argument("--telemetry", help="JSONL telemetry path")
    p_run.add_argument("--out", help="JSON report path")
    _add_config_flags(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_bench = sub.add_parser("bench", help="run the benchmark suite")
    p_bench.add_argument("--problems", help="comma-separated subset of the registry")
    p_bench.add_argument("--repeats", type=int, default=10)
    p_bench.add_argument("--workers", type=int, default=None)
    p_bench.add_argument("--out", help="JSON report path")
    p_bench.add_argument("--quiet", action="store_true")
    _add_config_flags(p_bench)
    p_bench.set_defaults(fn=_cmd_bench)

    p_val = sub.add_parser("validate", help="validate an explicit model")
    p_val.add_argument("--problem", required=True)
    p_val.add_argument("--model", help="RPN token text, e.g. 'x0 x1 add'")
    p_val.add_argument("--model-infix", help="infix expression, e.g. '(x0 + x1)'")
    _add_config_flags(p_val)
    p_val.set_defaults(fn=_cmd_validate)

    p_nan = sub.add_parser(
        "nan-experiment", help="quadratic root with/without NaN domains"
    )
    p_nan.add_argument("--repeats", type=int, default=10)
    p_nan.add_argument("--workers", type=int, default=None)
    p_nan.add_argument("--out", help="JSON report path")
    p_nan.add_argument("--quiet", action="store_true")
    _add_config_flags(p_nan)
    p_nan.set_defaults(fn=_cmd_nan_experiment)

    p_dump = sub.add_parser("dump-config", help="print the default config")
    p_dump.set_defaults(fn=_cmd_dump_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
