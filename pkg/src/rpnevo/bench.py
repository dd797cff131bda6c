"""Benchmark harness: problem registry, data generation, suite running.

Problems are closed-form targets sampled uniformly over per-variable
domains; training tables hold 512 cases and test tables 128 by default. A
problem may allow invalid targets (NaN from out-of-domain arithmetic), in
which case those cases are kept in the data rather than resampled - the
fitness functions reward models that reproduce the invalid locations.

A run validates when its best model stays within 0.1% relative error on
every test point (and matches target validity everywhere). A problem is
"typically" solved when at least half of the independent repeats validate,
and "best"-solved when at least one does.

Suites fan repeats out over worker processes; every task derives its own
seeds from (suite seed, problem index, repeat), so results are independent
of scheduling order.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .backend import CaseTable, EvalBackend
from .config import RunConfig
from .evolution import RunResult, run
from .fitness import DEFAULT_M_CORR, DEFAULT_M_PTPT, aggregate_corr, aggregate_ptpt
from .genome import Genome
from .infix import parse_infix
from .rng import seed_for
from .validation import validate


class DegenerateDomain(ValueError):
    """Sampled domain produced no valid target at all."""


@dataclass
class ProblemSpec:
    name: str
    arity: int
    fn: Callable[[np.ndarray], np.ndarray]
    domains: tuple[tuple[float, float], ...]
    allow_invalid: bool = False
    description: str = ""

    def __post_init__(self) -> None:
        if len(self.domains) != self.arity:
            raise ValueError("one (lo, hi) domain required per variable")
        for lo, hi in self.domains:
            if not lo < hi:
                raise ValueError(f"invalid domain [{lo}, {hi}]")


def generate_data(
    spec: ProblemSpec,
    n_train: int = 512,
    n_test: int = 128,
    rng: np.random.Generator | None = None,
) -> tuple[CaseTable, CaseTable]:
    """Sample seeded train/test tables for a problem."""
    if rng is None:
        rng = np.random.default_rng(0)

    def sample(n: int) -> CaseTable:
        cols = [rng.uniform(lo, hi, n) for lo, hi in spec.domains]
        inputs = np.column_stack(cols)
        with np.errstate(all="ignore"):
            targets = np.asarray(spec.fn(inputs), dtype=np.float64)
        if targets.shape != (n,):
            raise ValueError(f"target function returned shape {targets.shape}")
        finite = np.isfinite(targets)
        if spec.allow_invalid:
            if not finite.any():
                raise DegenerateDomain(
                    f"problem {spec.name}: all {n} sampled targets are invalid"
                )
        elif not finite.all():
            raise ValueError(
                f"problem {spec.name}: invalid targets in a domain declared valid"
            )
        return CaseTable(inputs=inputs, targets=targets)

    return sample(n_train), sample(n_test)


# --- built-in problem registry ----------------------------------------------


def _f_identity(x):
    return x[:, 0]


def _f_add2(x):
    return x[:, 0] + x[:, 1]


def _f_mul2(x):
    return x[:, 0] * x[:, 1]


def _f_div2(x):
    return x[:, 0] / x[:, 1]


def _f_square(x):
    return x[:, 0] ** 2


def _f_sin(x):
    return np.sin(x[:, 0])


def _f_gauss(x):
    return np.exp(-(x[:, 0] ** 2) / 2.0)


def _f_resist(x):
    return x[:, 0] * x[:, 1] / (x[:, 0] + x[:, 1])


def _f_hypot(x):
    return np.sqrt(x[:, 0] ** 2 + x[:, 1] ** 2)


def _f_sinc(x):
    return np.sin(x[:, 0]) / x[:, 0]


def _f_quadratic_root(x):
    a, b, c = x[:, 0], x[:, 1], x[:, 2]
    return (-b + np.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)


def _f_mul3(x):
    return x[:, 0] * x[:, 1] * x[:, 2]


_D15 = (1.0, 5.0)

REGISTRY: dict[str, ProblemSpec] = {
    spec.name: spec
    for spec in (
        ProblemSpec("identity", 1, _f_identity, (_D15,), description="x0"),
        ProblemSpec("add2", 2, _f_add2, (_D15, _D15), description="x0 + x1"),
        ProblemSpec("mul2", 2, _f_mul2, (_D15, _D15), description="x0 * x1"),
        ProblemSpec("div2", 2, _f_div2, (_D15, _D15), description="x0 / x1"),
        ProblemSpec("square", 1, _f_square, (_D15,), description="x0^2"),
        ProblemSpec("sin", 1, _f_sin, (_D15,), description="sin(x0)"),
        ProblemSpec(
            "gauss", 1, _f_gauss, ((1.0, 3.0),), description="exp(-x0^2 / 2)"
        ),
        ProblemSpec(
            "resist", 2, _f_resist, (_D15, _D15), description="x0*x1 / (x0 + x1)"
        ),
        ProblemSpec(
            "hypot", 2, _f_hypot, (_D15, _D15), description="sqrt(x0^2 + x1^2)"
        ),
        ProblemSpec("sinc", 1, _f_sinc, (_D15,), description="sin(x0) / x0"),
        ProblemSpec(
            "quadratic_root",
            3,
            _f_quadratic_root,
            ((1.0, 1.5), (4.0, 6.0), (1.0, 2.0)),
            description="(-x1 + sqrt(x1^2 - 4 x0 x2)) / (2 x0), real discriminant",
        ),
        ProblemSpec("mul3", 3, _f_mul3, (_D15, _D15, _D15), description="x0*x1*x2"),
    )
}

# The same root target over domains where the discriminant goes negative,
# so a fraction of the sampled targets are NaN.
QUADRATIC_WIDE = ProblemSpec(
    "quadratic_root_wide",
    3,
    _f_quadratic_root,
    ((1.0, 2.0), (1.0, 6.0), (1.0, 2.0)),
    allow_invalid=True,
    description="(-x1 + sqrt(x1^2 - 4 x0 x2)) / (2 x0), NaN where complex",
)


@dataclass
class _GenomeTarget:
    """Picklable target function backed by a parsed expression genome."""

    codes: np.ndarray
    consts: np.ndarray
    arity: int

    def __call__(self, x: np.ndarray) -> np.ndarray:
        backend = EvalBackend(kind="reference")
        lengths = np.array([self.codes.size], dtype=np.int32)
        return backend.evaluate_packed(
            self.codes[None, :], self.consts[None, :], lengths, np.asarray(x, float)
        )[0]


def load_problems_csv(path: str | Path) -> list[ProblemSpec]:
    """Load problems from CSV rows: name, arity, expression, lo1, hi1, ..., allow_invalid.

    The expression uses the engine's infix grammar (see :mod:`rpnevo.infix`).
    """
    import csv

    specs: list[ProblemSpec] = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            row = [cell.strip() for cell in row]
            name, arity_s, expr = row[0], row[1], row[2]
            arity = int(arity_s)
            expected = 3 + 2 * arity + 1
            if len(row) != expected:
                raise ValueError(
                    f"problem {name!r}: expected {expected} columns, found {len(row)}"
                )
            bounds = [float(v) for v in row[3 : 3 + 2 * arity]]
            domains = tuple(
                (bounds[2 * i], bounds[2 * i + 1]) for i in range(arity)
            )
            allow_invalid = row[-1].lower() in ("1", "true", "yes")
            genome = parse_infix(expr, arity)
            specs.append(
                ProblemSpec(
                    name=name,
                    arity=arity,
                    fn=_GenomeTarget(genome.codes, genome.consts, arity),
                    domains=domains,
                    allow_invalid=allow_invalid,
                    description=expr,
                )
            )
    return specs


# --- suite running -----------------------------------------------------------


@dataclass
class ProblemOutcome:
    name: str
    repeats: int
    validated_count: int
    typical: bool
    best: bool
    sample_model: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "repeats": self.repeats,
            "validated_count": self.validated_count,
            "typical": self.typical,
            "best": self.best,
            "sample_model": self.sample_model,
        }


@dataclass
class SuiteReport:
    fitness: str
    repeats: int
    problems: list[ProblemOutcome] = field(default_factory=list)

    @property
    def typical_count(self) -> int:
        return sum(p.typical for p in self.problems)

    @property
    def best_count(self) -> int:
        return sum(p.best for p in self.problems)

    @property
    def validated_runs_total(self) -> int:
        return sum(p.validated_count for p in self.problems)

    def to_dict(self) -> dict:
        return {
            "fitness": self.fitness,
            "repeats": self.repeats,
            "typical_count": self.typical_count,
            "best_count": self.best_count,
            "validated_runs_total": self.validated_runs_total,
            "problems": [p.to_dict() for p in self.problems],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _task_seeds(suite_seed: int, p_idx: int, repeat: int) -> tuple[int, int]:
    data_seed = int(seed_for(suite_seed, 101, p_idx).generate_state(1)[0])
    run_seed = int(seed_for(suite_seed, 202, p_idx, repeat).generate_state(1)[0])
    return data_seed, run_seed


def run_problem(
    spec: ProblemSpec,
    config: RunConfig,
    data_seed: int,
    run_seed: int,
    telemetry: str | None = None,
) -> RunResult:
    """One seeded end-to-end run: sample data, evolve, validate."""
    train, test = generate_data(spec, rng=np.random.default_rng(data_seed))
    cfg = config.replace(arity=spec.arity, seed=run_seed, batch_size=train.n_cases)
    return run(cfg, train, test_cases=test, telemetry=telemetry)


def _suite_task(payload: tuple) -> dict:
    spec, config_dict, p_idx, repeat, threads = payload
    if threads is not None:
        os.environ["RPNE_THREADS"] = str(threads)
    config = RunConfig.from_dict(config_dict)
    data_seed, run_seed = _task_seeds(config.seed, p_idx, repeat)
    result = run_problem(spec, config, data_seed, run_seed)
    return {
        "problem": spec.name,
        "p_idx": p_idx,
        "repeat": repeat,
        "validated": bool(result.report.validated) if result.report else False,
        "best_score": result.best_score,
        "best_infix": result.best_infix,
        "generations": result.generations,
        "stop_reason": result.stop_reason,
    }


def _run_tasks(payloads: list[tuple], workers: int | None, progress: bool) -> list[dict]:
    if not workers or workers <= 1:
        results = []
        for payload in payloads:
            res = _suite_task(payload)
            if progress:
                print(
                    f"  {res['problem']} rep {res['repeat']}: "
                    f"{'validated' if res['validated'] else res['stop_reason']}"
                )
            results.append(res)
        return results
    ctx = get_context("spawn")
    per_worker_threads = max(1, (os.cpu_count() or 1) // workers)
    payloads = [p[:-1] + (per_worker_threads,) for p in payloads]
    results = []
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        for res in pool.map(_suite_task, payloads):
            if progress:
                print(
                    f"  {res['problem']} rep {res['repeat']}: "
                    f"{'validated' if res['validated'] else res['stop_reason']}"
                )
            results.append(res)
    return results


def run_suite(
    problems: Sequence[ProblemSpec],
    config: RunConfig,
    repeats: int = 10,
    workers: int | None = None,
    progress: bool = False,
) -> SuiteReport:
    """Run ``repeats`` independent seeded runs per problem and tally."""
    payloads = [
        (spec, config.to_dict(), p_idx, rep, None)
        for p_idx, spec in enumerate(problems)
        for rep in range(repeats)
    ]
    results = _run_tasks(payloads, workers, progress)

    report = SuiteReport(fitness=config.fitness, repeats=repeats)
    for p_idx, spec in enumerate(problems):
        runs = [r for r in results if r["p_idx"] == p_idx]
        validated = sum(r["validated"] for r in runs)
        sample = next((r["best_infix"] for r in runs if r["validated"]), "")
        report.problems.append(
            ProblemOutcome(
                name=spec.name,
                repeats=repeats,
                validated_count=validated,
                typical=2 * validated >= repeats,
                best=validated >= 1,
                sample_model=sample,
            )
        )
    return report


# --- the NaN-domain quadratic experiment -------------------------------------


def nan_agreement_check(table: CaseTable, m_ptpt: int, m_corr: int) -> dict:
    """Deterministic check that matching the target's NaN locations pays.

    Builds two synthetic model-output rows against a table whose targets
    contain at least one invalid value: a perfect row (valid values exact,
    invalid locations invalid) and the same row with one invalid location
    replaced by a valid number. The perfect row must score strictly higher
    under both fitness functions.
    """
    targets = table.targets
    invalid = np.flatnonzero(~np.isfinite(targets))
    if invalid.size == 0:
        raise ValueError("table contains no invalid targets")
    matching = targets.copy()
    mismatching = matching.copy()
    mismatching[invalid[0]] = 5.0

    ptpt_match = aggregate_ptpt(matching, targets, m_ptpt).aggregate
    ptpt_mismatch = aggregate_ptpt(mismatching, targets, m_ptpt).aggregate
    corr_match = aggregate_corr(matching, targets, m_corr).aggregate
    corr_mismatch = aggregate_corr(mismatching, targets, m_corr).aggregate
    return {
        "ptpt_match": int(ptpt_match),
        "ptpt_mismatch": int(ptpt_mismatch),
        "corr_match": float(corr_match),
        "corr_mismatch": float(corr_mismatch),
        "ptpt_prefers_match": bool(ptpt_match > ptpt_mismatch),
        "corr_prefers_match": bool(corr_match > corr_mismatch),
    }


def quadratic_nan_experiment(
    config: RunConfig,
    repeats: int = 10,
    workers: int | None = None,
    progress: bool = False,
) -> dict:
    """Quadratic-root search on a real-only domain vs a NaN-bearing domain.

    Returns per-setting validated counts plus the deterministic
    NaN-agreement scoring check computed on the widened-domain table.
    """
    restricted = REGISTRY["quadratic_root"]
    widened = QUADRATIC_WIDE
    settings = {}
    for s_idx, spec in ((0, restricted), (1, widened)):
        payloads = [
            (spec, config.to_dict(), 1000 + s_idx, rep, None) for rep in range(repeats)
        ]
        results = _run_tasks(payloads, workers, progress)
        settings[spec.name] = {
            "validated_count": sum(r["validated"] for r in results),
            "repeats": repeats,
        }

    data_seed, _ = _task_seeds(config.seed, 1001, 0)
    wide_train, _ = generate_data(widened, rng=np.random.default_rng(data_seed))
    check = nan_agreement_check(wide_train, DEFAULT_M_PTPT, DEFAULT_M_CORR)
    return {
        "settings": settings,
        "restricted_validated": settings["quadratic_root"]["validated_count"],
        "widened_validated": settings["quadratic_root_wide"]["validated_count"],
        "nan_agreement": check,
    }


def validate_model(genome: Genome, spec: ProblemSpec, data_seed: int = 0):
    """Validate an explicit model against a freshly sampled test table."""
    _, test = generate_data(spec, rng=np.random.default_rng(data_seed))
    return validate(genome, test)
