"""Fitness functions: point-to-point magnitude-ratio scoring and
correlation scoring, both aware of invalid (NaN/inf) values.

Invalid values are treated as information, not noise. Per case pair
(model output h, target y):

* both invalid  -> +M (agreement is rewarded)
* one invalid   -> -M (disagreement is penalized)
* both valid    -> scored by the active fitness function

Point-to-point scores a valid pair as ``round(M * min(|h|,|y|) /
max(|h|,|y|))`` with an ``M/11`` penalty subtracted first when the signs
differ, and ``M`` outright when both values are zero. Rounding is
half-away-from-zero. The per-row aggregate is the exact int sum in
ascending case order.

Correlation mode computes Pearson r over only the both-valid pairs, then
scores ``M * r^4 * n_valid - M * (c1 - c2)`` where c1 counts one-invalid
pairs and c2 both-invalid pairs. An undefined r (fewer than two valid
pairs, or zero variance on either side) scores as r = 0, leaving only the
validity-agreement terms. r^4 is computed as (r^2)^2.

These are the plain-Python reference implementations; the batched kernels
in :mod:`rpnevo.kernels` reimplement them and are cross-checked in tests.
Everything here is pure and safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

EPS = 1e-12

DEFAULT_M_PTPT = 1100
DEFAULT_M_CORR = 1000


@dataclass
class FitnessRecord:
    """Per-individual aggregate score plus validity bookkeeping."""

    aggregate: float
    c1: int  # pairs with exactly one invalid value
    c2: int  # pairs with both values invalid
    r2: float | None  # squared correlation (correlation mode only)
    n_cases: int


def round_half_away(x: float) -> int:
    """Round to the nearest integer, ties away from zero."""
    if x >= 0.0:
        return int(math.floor(x + 0.5))
    return int(math.ceil(x - 0.5))


def _valid(x: float) -> bool:
    return math.isfinite(x)


def ptpt_case(yhat: float, y: float, m: int = DEFAULT_M_PTPT) -> int:
    """Score one case pair in [-M, M]; symmetric and scale-free."""
    h_ok = _valid(yhat)
    y_ok = _valid(y)
    if not h_ok and not y_ok:
        return m
    if not h_ok or not y_ok:
        return -m
    ah = abs(yhat)
    ay = abs(y)
    mx = ah if ah >= ay else ay
    if mx == 0.0:
        return m
    mn = ah if ah < ay else ay
    score = m * (mn / mx)
    if (yhat > 0.0 and y < 0.0) or (yhat < 0.0 and y > 0.0):
        score -= m / 11.0
    return round_half_away(score)


def aggregate_ptpt(
    yhat_row: Sequence[float], y: Sequence[float], m: int = DEFAULT_M_PTPT
) -> FitnessRecord:
    """Exact integer sum of per-case scores, ascending case order."""
    if len(yhat_row) != len(y):
        raise ValueError("row lengths differ")
    total = 0
    c1 = 0
    c2 = 0
    for h, t in zip(yhat_row, y):
        h = float(h)
        t = float(t)
        h_ok = _valid(h)
        t_ok = _valid(t)
        if h_ok and t_ok:
            total += ptpt_case(h, t, m)
        elif h_ok or t_ok:
            total -= m
            c1 += 1
        else:
            total += m
            c2 += 1
    return FitnessRecord(aggregate=total, c1=c1, c2=c2, r2=None, n_cases=len(y))


def pairwise_sum(values: np.ndarray) -> float:
    """Bottom-up adjacent pairwise sum (fixed split rule).

    The reduction order is part of the scoring contract: the batched
    kernels use the identical pairing, so sums agree bitwise.
    """
    buf = np.asarray(values, dtype=np.float64).copy()
    n = buf.shape[0]
    if n == 0:
        return 0.0
    while n > 1:
        half = n // 2
        np.add(buf[0 : 2 * half : 2], buf[1 : 2 * half : 2], out=buf[:half])
        if n & 1:
            buf[half] = buf[n - 1]
            n = half + 1
        else:
            n = half
    return float(buf[0])


class PearsonResult(NamedTuple):
    r: float
    c1: int
    c2: int
    defined: bool


def pearson_r(yhat: Sequence[float], y: Sequence[float]) -> PearsonResult:
    """Pearson r over the both-valid pairs, plus validity counts.

    Undefined r (fewer than 2 valid pairs, or zero variance on either
    side) is reported as r = 0 with ``defined=False``.
    """
    yhat = np.asarray(yhat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if yhat.shape != y.shape or yhat.ndim != 1:
        raise ValueError("inputs must be equal-length vectors")
    h_ok = np.isfinite(yhat)
    y_ok = np.isfinite(y)
    both = h_ok & y_ok
    c1 = int((h_ok ^ y_ok).sum())
    c2 = int((~h_ok & ~y_ok).sum())
    hv = yhat[both]
    yv = y[both]
    n = hv.shape[0]
    if n < 2:
        return PearsonResult(0.0, c1, c2, False)
    mean_y = pairwise_sum(yv) / n
    mean_h = pairwise_sum(hv) / n
    dy = yv - mean_y
    dh = hv - mean_h
    syy = pairwise_sum(dy * dy)
    shh = pairwise_sum(dh * dh)
    if not (syy > 0.0 and shh > 0.0):
        return PearsonResult(0.0, c1, c2, False)
    syh = pairwise_sum(dy * dh)
    denom = math.sqrt(syy * shh)
    if not math.isfinite(denom) or denom == 0.0:
        return PearsonResult(0.0, c1, c2, False)
    r = syh / denom
    if r > 1.0:
        r = 1.0
    elif r < -1.0:
        r = -1.0
    if not math.isfinite(r):
        return PearsonResult(0.0, c1, c2, False)
    return PearsonResult(r, c1, c2, True)


def corr_score(r: float, n: int, c1: int, c2: int, m: int = DEFAULT_M_CORR) -> float:
    """Combine correlation and validity agreement into one score."""
    r2 = r * r
    return m * (r2 * r2) * (n - (c1 + c2)) - m * (c1 - c2)


def aggregate_corr(
    yhat_row: Sequence[float], y: Sequence[float], m: int = DEFAULT_M_CORR
) -> FitnessRecord:
    res = pearson_r(yhat_row, y)
    n = len(y)
    score = corr_score(res.r, n, res.c1, res.c2, m)
    return FitnessRecord(
        aggregate=score, c1=res.c1, c2=res.c2, r2=res.r * res.r, n_cases=n
    )


def perfect_score(n_cases: int, m: int) -> float:
    """Upper bound of either aggregate on an n_cases table."""
    return float(n_cases) * float(m)
