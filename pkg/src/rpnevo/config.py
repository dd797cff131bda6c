"""Run configuration: operator set, fitness kind, schedules, budgets.

Configs load from a flat JSON document; every key has a documented default
and unknown keys are rejected. Command-line flags override file values.

Population schedules are stage lists ``(generation_threshold, size)``: the
active size is the first stage whose threshold exceeds the current
generation, and the last stage (threshold null/None) applies forever. The
built-in defaults mirror a large-scale setup divided by ``scale_divisor``
(default 100), preserving the stage boundaries and size ratios:

* point-to-point: 5M until generation 20, then 1M
* correlation: 5M/3M/1M/500k/250k stepping down at generations 5/10/15/20
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .fitness import DEFAULT_M_CORR, DEFAULT_M_PTPT
from .genome import DEFAULT_MUTATION_WEIGHTS
from .ops import OP_NAMES, OperatorSet

Stage = tuple[int | None, int]

_PTPT_STAGES_FULL: tuple[Stage, ...] = ((20, 5_000_000), (None, 1_000_000))
_CORR_STAGES_FULL: tuple[Stage, ...] = (
    (5, 5_000_000),
    (10, 3_000_000),
    (15, 1_000_000),
    (20, 500_000),
    (None, 250_000),
)


def default_schedule(fitness: str, scale_divisor: int = 100) -> tuple[Stage, ...]:
    base = _CORR_STAGES_FULL if fitness == "corr" else _PTPT_STAGES_FULL
    return tuple((gen, max(1, size // scale_divisor)) for gen, size in base)


def target_size(stages: tuple[Stage, ...], generation: int) -> int:
    """Active population size for ``generation`` under the schedule."""
    for threshold, size in stages:
        if threshold is None or generation < threshold:
            return size
    return stages[-1][1]


@dataclass
class RunConfig:
    arity: int = 1
    operators: tuple[str, ...] = OP_NAMES
    fitness: str = "ptpt"  # "ptpt" | "corr"
    max_case_score: int | None = None  # None -> 1100 (ptpt) / 1000 (corr)
    schedule: tuple[Stage, ...] | None = None  # None -> default_schedule(...)
    scale_divisor: int = 100
    batch_size: int = 512
    seed: int = 0
    max_generations: int | None = None
    max_seconds: float | None = None
    backend: str = "parallel"  # "reference" | "parallel"
    backend_capacity: int = 8192
    selection: str = "microcosm"  # "microcosm" | "microcosm-cutoff" | "fullrank"
    microcosm_sample: int = 100
    cull_fraction: float = 0.5
    mutation_weights: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_MUTATION_WEIGHTS)
    )
    max_genome_len: int = 64
    stop_on_perfect: bool = True

    def __post_init__(self) -> None:
        if self.arity < 1:
            raise ValueError("arity must be >= 1")
        if self.fitness not in ("ptpt", "corr"):
            raise ValueError(f"unknown fitness kind: {self.fitness!r}")
        if not 1 <= self.batch_size <= 1024:
            raise ValueError("batch_size must be in [1, 1024]")
        if self.backend not in ("reference", "parallel"):
            raise ValueError(f"unknown backend: {self.backend!r}")
        if self.selection not in ("microcosm", "microcosm-cutoff", "fullrank"):
            raise ValueError(f"unknown selection: {self.selection!r}")
        if not 0.0 < self.cull_fraction < 1.0:
            raise ValueError("cull_fraction must be in (0, 1)")
        if self.max_seconds is not None and self.max_seconds < 0:
            raise ValueError("max_seconds must be >= 0")
        if self.max_generations is not None and self.max_generations < 0:
            raise ValueError("max_generations must be >= 0")
        self.operators = tuple(self.operators)
        if self.schedule is not None:
            stages = tuple((g, int(s)) for g, s in self.schedule)
            if any(g is None for g, _ in stages[:-1]) or stages[-1][0] is not None:
                raise ValueError("exactly the last schedule stage may omit a threshold")
            thresholds = [g for g, _ in stages[:-1]]
            if thresholds != sorted(set(thresholds)):
                raise ValueError("schedule thresholds must be strictly increasing")
            if any(s < 1 for _, s in stages):
                raise ValueError("schedule sizes must be >= 1")
            self.schedule = stages

    @property
    def m(self) -> int:
        if self.max_case_score is not None:
            return self.max_case_score
        return DEFAULT_M_CORR if self.fitness == "corr" else DEFAULT_M_PTPT

    @property
    def stages(self) -> tuple[Stage, ...]:
        if self.schedule is not None:
            return self.schedule
        return default_schedule(self.fitness, self.scale_divisor)

    def operator_set(self) -> OperatorSet:
        return OperatorSet.from_names(self.operators)

    def target_size(self, generation: int) -> int:
        return target_size(self.stages, generation)

    def replace(self, **updates) -> "RunConfig":
        return dataclasses.replace(self, **updates)

    # --- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["operators"] = list(self.operators)
        if self.schedule is not None:
            d["schedule"] = [[g, s] for g, s in self.schedule]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if data.get("schedule") is not None:
            data["schedule"] = tuple(
                (None if g is None else int(g), int(s)) for g, s in data["schedule"]
            )
        if "operators" in data:
            data["operators"] = tuple(data["operators"])
        return cls(**data)

    def to_file(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"config file not found: {p}")
        return cls.from_dict(json.loads(p.read_text()))
