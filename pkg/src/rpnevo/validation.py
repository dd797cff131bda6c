"""Held-out model validation: the 0.1%-per-point rule.

A model is validated when, on every test case with a valid target, its
relative error |h - y| / max(|y|, 1e-12) stays within 0.1%, and on every
case with an invalid target it also produces an invalid value. A single
failing point invalidates the model; an invalid model output against a
valid target counts as unbounded error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import CaseTable, EvalBackend
from .genome import Genome

REL_TOL = 1e-3
EPS_FLOOR = 1e-12


@dataclass
class ValidationReport:
    n_test: int
    max_relative_error: float
    validated: bool
    n_invalid_mismatch: int  # cases where model/target validity disagreed

    def to_dict(self) -> dict:
        return {
            "n_test": self.n_test,
            "max_relative_error": self.max_relative_error,
            "validated": self.validated,
            "n_invalid_mismatch": self.n_invalid_mismatch,
        }


_default_backend: EvalBackend | None = None


def _backend() -> EvalBackend:
    global _default_backend
    if _default_backend is None:
        _default_backend = EvalBackend(kind="reference")
    return _default_backend


def validate(
    genome: Genome,
    test_cases: CaseTable,
    rel_tol: float = REL_TOL,
    eps_floor: float = EPS_FLOOR,
    backend: EvalBackend | None = None,
) -> ValidationReport:
    """Check the genome against every test point; all must pass."""
    be = backend if backend is not None else _backend()
    outputs = be.evaluate_batch([genome], test_cases)[0]
    targets = test_cases.targets
    y_ok = np.isfinite(targets)
    h_ok = np.isfinite(outputs)

    mismatch = int((y_ok != h_ok).sum())
    max_rel = 0.0
    both = y_ok & h_ok
    if both.any():
        y = targets[both]
        h = outputs[both]
        rel = np.abs(h - y) / np.maximum(np.abs(y), eps_floor)
        max_rel = float(rel.max())
    if (y_ok & ~h_ok).any():
        max_rel = math.inf
    validated = mismatch == 0 and max_rel <= rel_tol
    return ValidationReport(
        n_test=test_cases.n_cases,
        max_relative_error=max_rel,
        validated=validated,
        n_invalid_mismatch=mismatch,
    )
