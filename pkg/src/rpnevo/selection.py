"""Survivor selection at population scale without a global sort.

``build_microcosm`` sorts a 100-record random sample and reads percentile
thresholds off its order statistics; ``select_survivors`` then buckets every
individual against those thresholds in a single pass and draws survival from
a piecewise-linear curve over the estimated percentile, calibrated so the
expected survivor count equals the requested target. Percentile estimation
errors wash out over generations; a full sort is never performed on the
population (``SORT_STATS`` records the size of every sort executed here, so
tests can prove that).

``full_rank_select`` is the exact baseline: sort everything, keep the top
slice, ties broken by slot index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fitness import round_half_away
from .rng import RandomStream

# Exact full-sort fallback below this population size; microcosm noise would
# dominate tiny populations and sorting them is cheap anyway.
SMALL_POP_FALLBACK = 1000

# Survival transitions from 0 to 1 across a percentile band of this width
# (in units of the keep fraction) centred three-quarters of a keep-fraction
# below the cut line. Narrower than half the keep fraction keeps expected
# overlap with exact ranking above 90% at a 50% cull.
_BAND_LO = 1.25
_BAND_HI = 0.75


@dataclass
class SortCounter:
    """Instrumentation: every sort in this module reports its size here."""

    sorts: int = 0
    largest: int = 0

    def record(self, n: int) -> None:
        self.sorts += 1
        if n > self.largest:
            self.largest = n

    def reset(self) -> None:
        self.sorts = 0
        self.largest = 0


SORT_STATS = SortCounter()


def _tracked_sort(values: np.ndarray) -> np.ndarray:
    SORT_STATS.record(int(values.shape[0]))
    return np.sort(values, kind="stable")


def _tracked_argsort_desc(values: np.ndarray) -> np.ndarray:
    SORT_STATS.record(int(values.shape[0]))
    return np.argsort(-values, kind="stable")


def as_scores(records) -> np.ndarray:
    """Accept either a score vector or a sequence of FitnessRecord."""
    if isinstance(records, np.ndarray):
        return np.asarray(records, dtype=np.float64)
    return np.asarray([r.aggregate for r in records], dtype=np.float64)


@dataclass
class PercentileTable:
    """Score thresholds at the 1%..99% grid, non-decreasing."""

    thresholds: np.ndarray  # float64 [99]
    sample_size: int

    def percentile_of(self, scores: np.ndarray) -> np.ndarray:
        """Estimated percentile in {0.00, 0.01, ..., 0.99} per score."""
        idx = np.searchsorted(self.thresholds, scores, side="right")
        return idx / 100.0


def build_microcosm(
    rng: RandomStream,
    records,
    sample_size: int = 100,
) -> PercentileTable:
    """Estimate population percentiles from a small sorted sample.

    Draws ``sample_size`` records uniformly without replacement and maps
    percentile p to the sample order statistic at round(p * (n - 1)).
    Populations below ``SMALL_POP_FALLBACK`` use all records (an exact
    full sort) instead of a sample.
    """
    scores = as_scores(records)
    n = scores.shape[0]
    if n < 1:
        raise ValueError("cannot build percentiles from zero records")
    if n < max(sample_size, SMALL_POP_FALLBACK):
        sample = _tracked_sort(scores)
    else:
        pick = rng.gen.choice(n, size=sample_size, replace=False)
        sample = _tracked_sort(scores[pick])
    k = sample.shape[0]
    idx = np.array(
        [round_half_away(p / 100.0 * (k - 1)) for p in range(1, 100)], dtype=np.int64
    )
    return PercentileTable(thresholds=sample[idx], sample_size=k)


def survival_curve(q: np.ndarray, keep_fraction: float) -> np.ndarray:
    """Raw survival propensity as a function of estimated percentile."""
    q_lo = 1.0 - _BAND_LO * keep_fraction
    q_hi = 1.0 - _BAND_HI * keep_fraction
    return np.clip((q - q_lo) / (q_hi - q_lo), 0.0, 1.0)


def _calibrate(raw: np.ndarray, target: float) -> np.ndarray:
    """Scale the raw curve so expected survivors == target (waterfilling)."""
    total = raw.sum()
    if total <= 0.0:
        return np.full_like(raw, min(1.0, target / raw.shape[0]))
    scale = target / total
    probs = np.minimum(raw * scale, 1.0)
    for _ in range(4):
        saturated = probs >= 1.0
        n_sat = int(saturated.sum())
        deficit = target - probs.sum()
        if deficit <= 1e-9 or n_sat >= raw.shape[0]:
            break
        free = raw[~saturated].sum()
        if free <= 0.0:
            break
        scale = (target - n_sat) / free
        probs = np.minimum(raw * scale, 1.0)
        probs[saturated] = 1.0
    return probs


def select_survivors(
    records,
    table: PercentileTable,
    target_size: int,
    rng: RandomStream,
    mode: str = "probabilistic",
) -> np.ndarray:
    """Single-pass survivor mask with expected size ``target_size``.

    ``mode="probabilistic"`` draws Bernoulli survival from the calibrated
    curve; ``mode="cutoff"`` keeps exactly those above the estimated cut
    percentile (deterministic, but subject to threshold quantization).
    The best-scoring record always survives.
    """
    if target_size < 1:
        raise ValueError("target_size must be >= 1")
    scores = as_scores(records)
    n = scores.shape[0]
    if target_size >= n:
        return np.ones(n, dtype=bool)
    keep_fraction = target_size / n
    q = table.percentile_of(scores)
    if mode == "cutoff":
        mask = q >= 1.0 - keep_fraction
    elif mode == "probabilistic":
        raw = survival_curve(q, keep_fraction)
        probs = _calibrate(raw, float(target_size))
        mask = rng.gen.random(n) < probs
    else:
        raise ValueError(f"unknown selection mode: {mode!r}")
    mask[int(np.argmax(scores))] = True  # never cull the incumbent best
    return mask


def full_rank_select(records, target_size: int) -> np.ndarray:
    """Exact ranking baseline: keep the top ``target_size`` records."""
    scores = as_scores(records)
    n = scores.shape[0]
    if target_size >= n:
        return np.ones(n, dtype=bool)
    order = _tracked_argsort_desc(scores)
    mask = np.zeros(n, dtype=bool)
    mask[order[:target_size]] = True
    return mask
