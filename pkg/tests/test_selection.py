import numpy as np
import pytest

from rpnevo.fitness import FitnessRecord
from rpnevo.rng import RandomStream
from rpnevo.selection import (
    SMALL_POP_FALLBACK,
    SORT_STATS,
    PercentileTable,
    build_microcosm,
    full_rank_select,
    select_survivors,
)


def records_from(scores):
    return [
        FitnessRecord(aggregate=float(s), c1=0, c2=0, r2=None, n_cases=1)
        for s in scores
    ]


class TestBuildMicrocosm:
    def test_degenerate_equal_scores(self, rng):
        scores = np.full(5000, 42.0)
        table = build_microcosm(rng, scores)
        assert np.all(table.thresholds == 42.0)

    def test_order_statistic_rule_on_1_to_100(self, rng):
        # population below the fallback bound: thresholds come from a full sort
        scores = np.arange(1.0, 101.0)
        table = build_microcosm(rng, scores, sample_size=100)
        # p=50%: index round(0.5 * 99) = round(49.5) -> 50 -> value 51
        assert table.thresholds[49] == 51.0
        assert table.thresholds[0] == 2.0  # p=1%: round(0.99) = 1 -> value 2

    def test_small_population_uses_full_sort(self, rng):
        scores = np.arange(500.0)
        SORT_STATS.reset()
        build_microcosm(rng, scores)
        assert SORT_STATS.largest == 500

    def test_large_population_sorts_only_sample(self, rng):
        scores = np.random.default_rng(0).uniform(0, 1, 50_000)
        SORT_STATS.reset()
        table = build_microcosm(rng, scores, sample_size=100)
        assert SORT_STATS.largest == 100
        assert table.sample_size == 100
        assert np.all(np.diff(table.thresholds) >= 0)

    def test_accepts_records(self, rng):
        table = build_microcosm(rng, records_from(range(100)))
        assert table.thresholds[-1] <= 99


class TestSelectSurvivors:
    def test_all_survive_when_target_is_population(self, rng):
        scores = np.arange(100.0)
        table = build_microcosm(rng, scores)
        mask = select_survivors(scores, table, 100, rng)
        assert mask.all()

    def test_expected_count_near_target(self):
        gen_scores = np.random.default_rng(5).normal(0, 1, 20_000)
        counts = []
        for trial in range(20):
            rng = RandomStream(trial)
            table = build_microcosm(rng, gen_scores)
            mask = select_survivors(gen_scores, table, 10_000, rng)
            counts.append(int(mask.sum()))
        mean = np.mean(counts)
        assert abs(mean - 10_000) / 10_000 < 0.05

    def test_all_equal_scores_expected_half(self):
        scores = np.full(10_000, 7.0)
        counts = []
        for trial in range(20):
            rng = RandomStream(100 + trial)
            table = build_microcosm(rng, scores)
            mask = select_survivors(scores, table, 5000, rng)
            counts.append(int(mask.sum()))
        assert abs(np.mean(counts) - 5000) / 5000 < 0.05

    def test_top_scorer_probability_one(self, rng):
        # one record strictly above the 99% threshold at 50% cull always survives
        scores = np.random.default_rng(8).uniform(0, 1, 20_000)
        scores[123] = 2.0
        for trial in range(30):
            stream = RandomStream(trial)
            table = build_microcosm(stream, scores)
            mask = select_survivors(scores, table, 10_000, stream)
            assert mask[123]

    def test_monotone_survival_probability(self):
        # empirical survival frequency must not decrease with score
        scores = np.repeat(np.arange(100.0), 200)  # 20k records, 100 levels
        hits = np.zeros_like(scores)
        trials = 60
        for trial in range(trials):
            stream = RandomStream(trial)
            table = build_microcosm(stream, scores)
            hits += select_survivors(scores, table, 10_000, stream)
        freq = hits.reshape(100, 200).mean(axis=1) / trials
        # adjacent-level decreases beyond sampling noise are violations
        drops = np.diff(freq)
        assert drops.min() > -0.08

    def test_single_pass_no_population_sort(self):
        scores = np.random.default_rng(9).uniform(0, 1, 100_000)
        stream = RandomStream(4)
        SORT_STATS.reset()
        table = build_microcosm(stream, scores)
        select_survivors(scores, table, 50_000, stream)
        assert SORT_STATS.largest <= 100
        assert SORT_STATS.sorts == 1

    def test_cutoff_mode(self):
        # single draws wobble with the sampled thresholds; the mean homes in
        scores = np.random.default_rng(10).uniform(0, 1, 20_000)
        counts = []
        for trial in range(20):
            stream = RandomStream(300 + trial)
            table = build_microcosm(stream, scores)
            mask = select_survivors(scores, table, 10_000, stream, mode="cutoff")
            counts.append(int(mask.sum()))
        assert abs(np.mean(counts) - 10_000) / 10_000 < 0.05

    def test_rejects_bad_target(self, rng):
        with pytest.raises(ValueError):
            select_survivors(np.arange(10.0), PercentileTable(np.zeros(99), 100), 0, rng)


class TestFullRankSelect:
    def test_keeps_top_scores(self):
        scores = np.array([5.0, 1.0, 9.0, 3.0, 7.0, 2.0, 8.0, 4.0, 6.0, 0.0])
        mask = full_rank_select(scores, 3)
        assert mask.sum() == 3
        assert set(np.flatnonzero(mask)) == {2, 6, 4}  # scores 9, 8, 7

    def test_tie_break_by_low_index(self):
        scores = np.full(10, 1.0)
        mask = full_rank_select(scores, 4)
        assert np.flatnonzero(mask).tolist() == [0, 1, 2, 3]

    def test_exact_count(self):
        scores = np.random.default_rng(11).uniform(0, 1, 1000)
        for target in (1, 10, 999, 1000):
            assert full_rank_select(scores, target).sum() == target


class TestFidelity:
    def test_overlap_with_full_rank_over_generations(self):
        """Static landscape: microcosm survivors track exact ranking closely."""
        gen = np.random.default_rng(12)
        population = 50_000
        target = population // 2
        overlaps = []
        scores = gen.normal(0, 1, population)
        for trial in range(30):
            stream = RandomStream(1000 + trial)
            table = build_microcosm(stream, scores)
            micro = select_survivors(scores, table, target, stream)
            exact = full_rank_select(scores, target)
            overlaps.append((micro & exact).sum() / target)
        assert np.mean(overlaps) >= 0.90
