"""The generation loop: arena-housed population, dead-pool recycling,
staged population schedules, mutation-only births.

The population lives in preallocated slot arrays sized to the largest
schedule stage; slots of culled individuals go onto a dead-pool stack and
are recycled for births, so individual storage is allocated at most once
and never released mid-run. Phases are strictly sequenced per generation -
evaluate, score, select, die, breed - so the bookkeeping runs lock-free
while evaluation parallelism stays inside the backend.

Budgets are wall-clock first (checked at generation boundaries via an
injectable clock, so tests can drive time deterministically) with an
optional generation cap. Per-generation telemetry goes to JSONL.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from typing import IO, Callable

import numpy as np

from .backend import CaseTable, EvalBackend
from .config import RunConfig
from .fitness import perfect_score
from .genome import Genome, mutate, random_genome, to_infix
from .rng import RandomStream
from .selection import build_microcosm, full_rank_select, select_survivors
from .validation import ValidationReport, validate

_PERFECT_SLACK = 1e-10


class BudgetExhausted(Exception):
    """Raised at a generation boundary once the wall-clock budget is spent."""


@dataclass
class GenerationStats:
    gen: int
    live: int
    best: float
    median: float
    evals_total: int
    deadpool: int
    elapsed_ms: float
    births: int = 0
    deaths: int = 0
    allocations: int = 0

    def telemetry_record(self, integer_scores: bool) -> dict:
        best = int(self.best) if integer_scores else float(self.best)
        return {
            "gen": self.gen,
            "live": self.live,
            "best": best,
            "median": float(self.median),
            "evals_total": self.evals_total,
            "deadpool": self.deadpool,
            "elapsed_ms": self.elapsed_ms,
        }


@dataclass
class RunResult:
    best_genome: Genome | None
    best_score: float
    best_infix: str
    generations: int
    stats: list[GenerationStats]
    evals_total: int
    stop_reason: str
    report: ValidationReport | None = None

    def to_dict(self) -> dict:
        return {
            "best_rpn": self.best_genome.to_text() if self.best_genome else None,
            "best_infix": self.best_infix,
            "best_score": self.best_score,
            "generations": self.generations,
            "evals_total": self.evals_total,
            "stop_reason": self.stop_reason,
            "validated": self.report.validated if self.report else None,
            "max_relative_error": (
                self.report.max_relative_error if self.report else None
            ),
        }


class Population:
    """Slot arena with an explicit dead pool of recyclable slots."""

    def __init__(self, capacity: int, max_len: int, arity: int) -> None:
        self.capacity = capacity
        self.arity = arity
        self.codes = np.zeros((capacity, max_len), dtype=np.int16)
        self.consts = np.zeros((capacity, max_len), dtype=np.float64)
        self.lengths = np.zeros(capacity, dtype=np.int32)
        self.live_mask = np.zeros(capacity, dtype=bool)
        self.dead_pool: list[int] = []
        self.allocated = 0
        self.allocations = 0
        self.generation = 0

    @property
    def live_count(self) -> int:
        return int(self.live_mask.sum())

    def live_indices(self) -> np.ndarray:
        return np.flatnonzero(self.live_mask)

    def spawn(self, genome: Genome) -> int:
        """Place a genome into a recycled slot (new slot only if none free)."""
        if self.dead_pool:
            slot = self.dead_pool.pop()
        else:
            if self.allocated >= self.capacity:
                raise RuntimeError("population arena exhausted")
            slot = self.allocated
            self.allocated += 1
            self.allocations += 1
        k = genome.length
        self.codes[slot, :k] = genome.codes
        self.codes[slot, k:] = 0
        self.consts[slot, :k] = genome.consts
        self.consts[slot, k:] = 0.0
        self.lengths[slot] = k
        self.live_mask[slot] = True
        genome.slot_id = slot
        return slot

    def kill(self, slot: int) -> None:
        self.live_mask[slot] = False
        self.dead_pool.append(slot)

    def genome_at(self, slot: int) -> Genome:
        k = int(self.lengths[slot])
        return Genome(
            codes=self.codes[slot, :k].copy(),
            consts=self.consts[slot, :k].copy(),
            arity=self.arity,
            slot_id=slot,
        )

    def check_invariants(self) -> None:
        live = set(self.live_indices().tolist())
        dead = set(self.dead_pool)
        if live & dead:
            raise AssertionError("live and dead pool overlap")
        if len(dead) != len(self.dead_pool):
            raise AssertionError("duplicate slots in dead pool")
        if live | dead != set(range(self.allocated)):
            raise AssertionError("live + dead pool != allocated slots")


def init_population(config: RunConfig, rng: RandomStream) -> Population:
    capacity = max(size for _, size in config.stages)
    pop = Population(capacity=capacity, max_len=config.max_genome_len, arity=config.arity)
    ops = config.operator_set()
    for _ in range(config.target_size(0)):
        pop.spawn(random_genome(rng, config.arity, config.max_genome_len, ops))
    return pop


def _evaluate_live(
    pop: Population, cases: CaseTable, config: RunConfig, backend: EvalBackend
) -> tuple[np.ndarray, np.ndarray]:
    live_idx = pop.live_indices()
    outputs = backend.evaluate_packed(
        pop.codes[live_idx],
        pop.consts[live_idx],
        pop.lengths[live_idx],
        cases.inputs,
    )
    rows = backend.score_rows(outputs, cases.targets, config.fitness, config.m)
    return live_idx, rows.aggregate


def _advance(
    pop: Population,
    live_idx: np.ndarray,
    scores: np.ndarray,
    config: RunConfig,
    rng: RandomStream,
) -> tuple[int, int]:
    """Selection, deaths and mutation-only births; returns (births, deaths)."""
    live = live_idx.shape[0]
    next_target = config.target_size(pop.generation + 1)
    keep_target = min(max(1, round(live * (1.0 - config.cull_fraction))), next_target)
    if config.selection == "fullrank":
        mask = full_rank_select(scores, keep_target)
    else:
        table = build_microcosm(rng, scores, config.microcosm_sample)
        mode = "cutoff" if config.selection == "microcosm-cutoff" else "probabilistic"
        mask = select_survivors(scores, table, keep_target, rng, mode=mode)

    survivors = live_idx[mask]
    deaths = int((~mask).sum())
    for slot in live_idx[~mask].tolist():
        pop.kill(slot)

    ops = config.operator_set()
    births = 0
    n_surv = survivors.shape[0]
    while pop.live_count < next_target:
        parent_slot = int(survivors[rng.randint(n_surv)])
        child = mutate(
            rng,
            pop.genome_at(parent_slot),
            ops,
            config.mutation_weights,
            config.max_genome_len,
        )
        pop.spawn(child)
        births += 1
    pop.generation += 1
    return births, deaths


def step_generation(
    pop: Population,
    cases: CaseTable,
    config: RunConfig,
    rng: RandomStream,
    backend: EvalBackend,
    clock: Callable[[], float] = time.monotonic,
    deadline: float | None = None,
) -> GenerationStats:
    """One full generation: evaluate, score, select, recycle, breed.

    Raises :class:`BudgetExhausted` (before doing any work) once the
    wall-clock deadline has passed.
    """
    if deadline is not None and clock() >= deadline:
        raise BudgetExhausted
    t0 = clock()
    live_idx, scores = _evaluate_live(pop, cases, config, backend)
    births, deaths = _advance(pop, live_idx, scores, config, rng)
    return GenerationStats(
        gen=pop.generation - 1,
        live=live_idx.shape[0],
        best=float(scores.max()),
        median=float(np.median(scores)),
        evals_total=backend.stats.evals_total,
        deadpool=len(pop.dead_pool),
        elapsed_ms=round((clock() - t0) * 1000.0, 3),
        births=births,
        deaths=deaths,
        allocations=pop.allocations,
    )


class _BestTracker:
    """Best-ever genome by score, preferring fewer tokens among quasi-ties.

    Scores within a 1e-9 relative band count as tied so that, e.g., an
    exact model and a bloated variant whose correlation is clamped to 1
    compare by length rather than by floating-point dust. ``score`` itself
    is the monotone best-ever value used for stopping and telemetry.
    """

    REL_TOL = 1e-9

    def __init__(self) -> None:
        self.score = -math.inf
        self.genome_score = -math.inf
        self.genome_length = 1 << 30
        self.genome: Genome | None = None

    def _tol(self, a: float, b: float) -> float:
        return self.REL_TOL * max(abs(a), abs(b), 1.0)

    def offer(self, pop: Population, live_idx: np.ndarray, scores: np.ndarray) -> None:
        gen_max = float(scores.max())
        if gen_max > self.score:
            self.score = gen_max
        # generation champion: shortest among quasi-max, lowest slot on ties
        band = np.flatnonzero(scores >= gen_max - self._tol(gen_max, gen_max))
        lengths = pop.lengths[live_idx[band]]
        pick = int(band[np.argmin(lengths)])
        cand_score = float(scores[pick])
        cand_len = int(pop.lengths[live_idx[pick]])
        tol = self._tol(cand_score, self.genome_score)
        if cand_score > self.genome_score + tol or (
            cand_score >= self.genome_score - tol and cand_len < self.genome_length
        ):
            self.genome_score = cand_score
            self.genome_length = cand_len
            self.genome = pop.genome_at(int(live_idx[pick]))


def run(
    config: RunConfig,
    cases: CaseTable,
    test_cases: CaseTable | None = None,
    telemetry: str | IO[str] | None = None,
    clock: Callable[[], float] = time.monotonic,
) -> RunResult:
    """Evolve under the configured budget and report the best-ever genome.

    Each loop iteration evaluates the current generation exactly once; the
    run then either stops (budget reached, or a perfect training score with
    ``stop_on_perfect``) or advances through selection and births. One JSON
    telemetry line is written per evaluated generation. When ``test_cases``
    is provided the best genome is validated against them.
    """
    if config.max_generations is None and config.max_seconds is None:
        raise ValueError("configure a budget: max_generations and/or max_seconds")
    if cases.arity != config.arity:
        raise ValueError("case table arity does not match config")
    if cases.n_cases != config.batch_size:
        config = config.replace(batch_size=cases.n_cases)

    rng = RandomStream(config.seed)
    backend = EvalBackend(kind=config.backend, capacity=config.backend_capacity)
    pop = init_population(config, rng)

    close_sink = False
    sink: IO[str] | None = None
    if isinstance(telemetry, str):
        sink = open(telemetry, "w")
        close_sink = True
    elif telemetry is not None:
        sink = telemetry

    integer_scores = config.fitness == "ptpt"
    threshold = perfect_score(cases.n_cases, config.m) * (1.0 - _PERFECT_SLACK)
    tracker = _BestTracker()
    stats_series: list[GenerationStats] = []
    start = clock()
    deadline = start + config.max_seconds if config.max_seconds is not None else None

    def emit(st: GenerationStats) -> None:
        stats_series.append(st)
        if sink is not None:
            sink.write(json.dumps(st.telemetry_record(integer_scores)) + "\n")

    steps = 0
    try:
        while True:
            if deadline is not None and steps > 0 and clock() >= deadline:
                stop_reason = "budget_seconds"
                break
            live_idx, scores = _evaluate_live(pop, cases, config, backend)
            tracker.offer(pop, live_idx, scores)
            hit_perfect = config.stop_on_perfect and tracker.score >= threshold
            out_of_gens = (
                config.max_generations is not None and steps >= config.max_generations
            )
            if hit_perfect or out_of_gens:
                emit(
                    GenerationStats(
                        gen=pop.generation,
                        live=live_idx.shape[0],
                        best=tracker.score,
                        median=float(np.median(scores)),
                        evals_total=backend.stats.evals_total,
                        deadpool=len(pop.dead_pool),
                        elapsed_ms=round((clock() - start) * 1000.0, 3),
                        allocations=pop.allocations,
                    )
                )
                stop_reason = "perfect" if hit_perfect else "generations"
                break
            births, deaths = _advance(pop, live_idx, scores, config, rng)
            steps += 1
            emit(
                GenerationStats(
                    gen=pop.generation - 1,
                    live=live_idx.shape[0],
                    best=tracker.score,
                    median=float(np.median(scores)),
                    evals_total=backend.stats.evals_total,
                    deadpool=len(pop.dead_pool),
                    elapsed_ms=round((clock() - start) * 1000.0, 3),
                    births=births,
                    deaths=deaths,
                    allocations=pop.allocations,
                )
            )
    finally:
        if close_sink and sink is not None:
            sink.close()

    report = None
    if test_cases is not None and tracker.genome is not None:
        report = validate(tracker.genome, test_cases)
    return RunResult(
        best_genome=tracker.genome,
        best_score=tracker.score,
        best_infix=to_infix(tracker.genome) if tracker.genome else "",
        generations=steps,
        stats=stats_series,
        evals_total=backend.stats.evals_total,
        stop_reason=stop_reason,
        report=report,
    )
