"""Batched population evaluation behind a backend-neutral contract.

A backend takes a full population slice plus a table of fitness cases and
returns the dense output matrix [individuals x cases]; callers never submit
individuals one at a time. The ``reference`` backend walks individuals
sequentially, the ``parallel`` backend partitions individuals across
threads; both share the same per-cell scalar kernel, so their outputs are
bitwise identical.

Population slices larger than ``capacity`` are split internally into
sub-batches; the split is invisible to callers apart from the submission
counter in :class:`BackendStats`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .fitness import FitnessRecord
from .genome import Genome

MAX_CASES_PER_BATCH = 1024

_DEFAULT_M = {"ptpt": 1100, "corr": 1000}


class CapExceeded(ValueError):
    """More fitness cases submitted than a backend batch supports."""


class DimensionMismatch(ValueError):
    """Genome arity and case-table width disagree."""


@dataclass
class CaseTable:
    """Fitness cases: an input matrix and a target vector.

    Inputs must be finite; targets may contain NaN/inf, which downstream
    scoring treats as first-class "invalid" observations.
    """

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        self.inputs = np.ascontiguousarray(np.asarray(self.inputs, dtype=np.float64))
        self.targets = np.ascontiguousarray(np.asarray(self.targets, dtype=np.float64))
        if self.inputs.ndim != 2:
            raise ValueError("inputs must be a 2-D [n_cases x arity] matrix")
        if self.targets.shape != (self.inputs.shape[0],):
            raise ValueError("targets must be a vector matching the input rows")
        if self.inputs.shape[0] < 1:
            raise ValueError("a case table needs at least one case")
        if not np.isfinite(self.inputs).all():
            raise ValueError("case inputs must be finite")

    @property
    def n_cases(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def arity(self) -> int:
        return int(self.inputs.shape[1])


@dataclass
class BackendStats:
    evals_total: int = 0
    submissions: int = 0

    def reset(self) -> None:
        self.evals_total = 0
        self.submissions = 0


@dataclass
class ScoreRows:
    """Column view of per-individual fitness results."""

    aggregate: np.ndarray  # int64 (ptpt) or float64 (corr)
    c1: np.ndarray
    c2: np.ndarray
    r2: np.ndarray | None  # only in correlation mode
    n_cases: int


def _threads_limit() -> int | None:
    raw = os.environ.get("RPNE_THREADS")
    if not raw:
        return None
    try:
        return max(1, int(raw))
    except ValueError:
        return None


_threads_configured = False


def _configure_threads() -> None:
    global _threads_configured
    if _threads_configured:
        return
    limit = _threads_limit()
    if limit is not None:
        import numba

        numba.set_num_threads(min(limit, numba.config.NUMBA_NUM_THREADS))
    _threads_configured = True


def pack_genomes(
    genomes: Sequence[Genome],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pack a genome sequence into padded code/const matrices plus lengths."""
    n = len(genomes)
    width = max((g.length for g in genomes), default=1)
    codes = np.zeros((n, width), dtype=np.int16)
    consts = np.zeros((n, width), dtype=np.float64)
    lengths = np.empty(n, dtype=np.int32)
    for i, g in enumerate(genomes):
        k = g.length
        codes[i, :k] = g.codes
        consts[i, :k] = g.consts
        lengths[i] = k
    return codes, consts, lengths


@dataclass
class EvalBackend:
    """Shared, thread-safe evaluation engine (``reference`` or ``parallel``)."""

    kind: str = "parallel"
    capacity: int = 8192
    stats: BackendStats = field(default_factory=BackendStats)

    def __post_init__(self) -> None:
        if self.kind not in ("reference", "parallel"):
            raise ValueError(f"unknown backend kind: {self.kind!r}")
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")

    # --- evaluation ---------------------------------------------------------

    def evaluate_batch(self, genomes: Sequence[Genome], cases: CaseTable) -> np.ndarray:
        """Outputs[i, j] = value of genomes[i] on cases.inputs[j]."""
        if cases.n_cases > MAX_CASES_PER_BATCH:
            raise CapExceeded(
                f"{cases.n_cases} cases exceed the {MAX_CASES_PER_BATCH}-case batch cap"
            )
        for g in genomes:
            if g.arity != cases.arity:
                raise DimensionMismatch(
                    f"genome arity {g.arity} != case table arity {cases.arity}"
                )
        if len(genomes) == 0:
            return np.empty((0, cases.n_cases), dtype=np.float64)
        codes, consts, lengths = pack_genomes(genomes)
        return self.evaluate_packed(codes, consts, lengths, cases.inputs)

    def evaluate_packed(
        self,
        codes: np.ndarray,
        consts: np.ndarray,
        lengths: np.ndarray,
        inputs: np.ndarray,
    ) -> np.ndarray:
        """Low-level entry taking pre-packed genome matrices."""
        n_cases = inputs.shape[0]
        if n_cases > MAX_CASES_PER_BATCH:
            raise CapExceeded(
                f"{n_cases} cases exceed the {MAX_CASES_PER_BATCH}-case batch cap"
            )
        n = codes.shape[0]
        out = np.empty((n, n_cases), dtype=np.float64)
        if n == 0:
            return out
        _configure_threads()
        kernel = kernels.eval_rows_par if self.kind == "parallel" else kernels.eval_rows_seq
        for start in range(0, n, self.capacity):
            stop = min(start + self.capacity, n)
            kernel(
                codes[start:stop],
                consts[start:stop],
                lengths[start:stop],
                inputs,
                out[start:stop],
            )
            self.stats.submissions += 1
        self.stats.evals_total += n * n_cases
        return out

    # --- scoring ------------------------------------------------------------

    def score_rows(
        self,
        outputs: np.ndarray,
        targets: np.ndarray,
        fitness: str,
        m: int | None = None,
    ) -> ScoreRows:
        """Score every output row against the targets (ascending case order)."""
        if fitness not in _DEFAULT_M:
            raise ValueError(f"unknown fitness kind: {fitness!r}")
        m_val = _DEFAULT_M[fitness] if m is None else int(m)
        targets = np.ascontiguousarray(targets, dtype=np.float64)
        if outputs.ndim != 2 or outputs.shape[1] != targets.shape[0]:
            raise DimensionMismatch("outputs and targets disagree on case count")
        outputs = np.ascontiguousarray(outputs, dtype=np.float64)
        _configure_threads()
        par = self.kind == "parallel"
        if fitness == "ptpt":
            kern = kernels.score_ptpt_par if par else kernels.score_ptpt_seq
            res = kern(outputs, targets, m_val)
            return ScoreRows(
                aggregate=res[:, 0].copy(),
                c1=res[:, 1].astype(np.int64),
                c2=res[:, 2].astype(np.int64),
                r2=None,
                n_cases=int(targets.shape[0]),
            )
        kern = kernels.score_corr_par if par else kernels.score_corr_seq
        res = kern(outputs, targets, m_val)
        return ScoreRows(
            aggregate=res[:, 0].copy(),
            c1=res[:, 2].astype(np.int64),
            c2=res[:, 3].astype(np.int64),
            r2=res[:, 1].copy(),
            n_cases=int(targets.shape[0]),
        )

    def score_batch(
        self,
        outputs: np.ndarray,
        targets: np.ndarray,
        fitness: str = "ptpt",
        m: int | None = None,
    ) -> list[FitnessRecord]:
        """Record-object view of :meth:`score_rows`."""
        rows = self.score_rows(outputs, targets, fitness, m)
        n = rows.aggregate.shape[0]
        if fitness == "ptpt":
            return [
                FitnessRecord(
                    aggregate=int(rows.aggregate[i]),
                    c1=int(rows.c1[i]),
                    c2=int(rows.c2[i]),
                    r2=None,
                    n_cases=rows.n_cases,
                )
                for i in range(n)
            ]
        return [
            FitnessRecord(
                aggregate=float(rows.aggregate[i]),
                c1=int(rows.c1[i]),
                c2=int(rows.c2[i]),
                r2=float(rows.r2[i]),
                n_cases=rows.n_cases,
            )
            for i in range(n)
        ]


def make_backend(kind: str = "parallel", capacity: int = 8192) -> EvalBackend:
    return EvalBackend(kind=kind, capacity=capacity)
