"""rpnevo: symbolic regression with stack-based linear genomes.

Batched NaN-aware fitness evaluation, single-pass percentile selection for
very large populations, dead-pool memory recycling, and a built-in
benchmark harness.
"""

from .backend import CapExceeded, CaseTable, DimensionMismatch, EvalBackend, make_backend
from .config import RunConfig, default_schedule, target_size
from .evolution import (
    BudgetExhausted,
    GenerationStats,
    Population,
    RunResult,
    run,
    step_generation,
)
from .fitness import (
    FitnessRecord,
    aggregate_corr,
    aggregate_ptpt,
    corr_score,
    pearson_r,
    ptpt_case,
)
from .genome import (
    Genome,
    Token,
    const,
    eval_case,
    mutate,
    op,
    random_genome,
    to_infix,
    validate as validate_genome,
    var,
)
from .infix import parse_infix
from .ops import OperatorSet
from .rng import RandomStream
from .selection import (
    PercentileTable,
    build_microcosm,
    full_rank_select,
    select_survivors,
)
from .validation import ValidationReport, validate

__version__ = "0.1.0"

__all__ = [
    "BudgetExhausted",
    "CapExceeded",
    "CaseTable",
    "DimensionMismatch",
    "EvalBackend",
    "FitnessRecord",
    "GenerationStats",
    "Genome",
    "OperatorSet",
    "PercentileTable",
    "Population",
    "RandomStream",
    "RunConfig",
    "RunResult",
    "Token",
    "ValidationReport",
    "aggregate_corr",
    "aggregate_ptpt",
    "build_microcosm",
    "const",
    "corr_score",
    "default_schedule",
    "eval_case",
    "full_rank_select",
    "make_backend",
    "mutate",
    "op",
    "parse_infix",
    "pearson_r",
    "ptpt_case",
    "random_genome",
    "run",
    "select_survivors",
    "step_generation",
    "target_size",
    "to_infix",
    "validate",
    "validate_genome",
    "var",
]
