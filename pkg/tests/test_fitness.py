import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rpnevo.fitness import (
    FitnessRecord,
    aggregate_corr,
    aggregate_ptpt,
    corr_score,
    pairwise_sum,
    pearson_r,
    ptpt_case,
    round_half_away,
)

NAN = float("nan")
INF = float("inf")

finite_floats = st.floats(
    allow_nan=False, allow_infinity=False, min_value=-1e12, max_value=1e12
)
any_floats = st.floats(allow_nan=True, allow_infinity=True, width=64)


class TestRounding:
    @pytest.mark.parametrize(
        "x,expected",
        [(0.5, 1), (1.5, 2), (2.5, 3), (-0.5, -1), (-2.5, -3), (0.49, 0), (-0.49, 0)],
    )
    def test_half_away_from_zero(self, x, expected):
        assert round_half_away(x) == expected


class TestPtptCase:
    def test_both_zero_scores_max(self):
        assert ptpt_case(0.0, 0.0, 1100) == 1100

    def test_equal_values(self):
        assert ptpt_case(2.0, 2.0, 1100) == 1100

    def test_sign_penalty(self):
        assert ptpt_case(-2.0, 2.0, 1100) == 1000

    def test_both_invalid_rewarded(self):
        assert ptpt_case(NAN, NAN, 1100) == 1100
        assert ptpt_case(INF, -INF, 1100) == 1100
        assert ptpt_case(INF, NAN, 1100) == 1100

    def test_validity_mismatch_penalized(self):
        assert ptpt_case(NAN, 5.0, 1100) == -1100
        assert ptpt_case(5.0, NAN, 1100) == -1100
        assert ptpt_case(INF, 5.0, 1100) == -1100

    def test_ratio_branch(self):
        assert ptpt_case(1.0, 2.0, 1100) == 550
        assert ptpt_case(4.0, 2.0, 1100) == 550

    def test_zero_vs_nonzero(self):
        # min/max ratio is 0; signs do not differ (zero is signless here)
        assert ptpt_case(0.0, 5.0, 1100) == 0

    @settings(max_examples=300, deadline=None)
    @given(any_floats, any_floats)
    def test_range_bound(self, a, b):
        assert -1100 <= ptpt_case(a, b, 1100) <= 1100

    @settings(max_examples=300, deadline=None)
    @given(any_floats, any_floats)
    def test_symmetry(self, a, b):
        assert ptpt_case(a, b, 1100) == ptpt_case(b, a, 1100)

    @settings(max_examples=200, deadline=None)
    @given(finite_floats, finite_floats, st.integers(-30, 30))
    def test_scale_family(self, a, b, exponent):
        # powers of two scale exactly in binary floating point
        k = 2.0**exponent
        assert ptpt_case(k * a, k * b, 1100) == ptpt_case(a, b, 1100)


class TestAggregatePtpt:
    def test_perfect_row(self):
        y = np.linspace(1, 5, 512)
        rec = aggregate_ptpt(y, y, m=1000)
        assert rec.aggregate == 512_000
        assert rec.c1 == 0 and rec.c2 == 0 and rec.n_cases == 512

    def test_opposite_sign_row(self):
        y = np.linspace(1, 5, 512)
        rec = aggregate_ptpt(-y, y, m=1100)
        assert rec.aggregate == 512 * 1000

    def test_empty_row(self):
        rec = aggregate_ptpt([], [], m=1100)
        assert rec.aggregate == 0 and rec.n_cases == 0

    def test_all_nan_outputs(self):
        y = np.linspace(1, 5, 512)
        rec = aggregate_ptpt(np.full(512, NAN), y, m=1000)
        assert rec.aggregate == -512_000
        assert rec.c1 == 512

    def test_bookkeeping_partition(self):
        yhat = np.array([1.0, NAN, 2.0, NAN, INF])
        y = np.array([1.0, 2.0, NAN, NAN, -INF])
        rec = aggregate_ptpt(yhat, y, m=1100)
        assert rec.c1 == 2 and rec.c2 == 2
        assert rec.c1 + rec.c2 + 1 == rec.n_cases


class TestPearson:
    def test_identical_vectors(self):
        y = np.array([1.0, 2.0, 5.0, 3.0])
        res = pearson_r(y, y)
        assert res.defined
        assert abs(res.r - 1.0) <= 1e-12
        assert res.c1 == 0 and res.c2 == 0

    def test_affine_invariance(self):
        y = np.linspace(1, 5, 64)
        up = pearson_r(3.0 * y + 2.0, y)
        down = pearson_r(-3.0 * y + 2.0, y)
        assert abs(up.r - 1.0) <= 1e-12
        assert abs(down.r + 1.0) <= 1e-12

    def test_constant_vector_undefined(self):
        y = np.linspace(1, 5, 16)
        res = pearson_r(np.full(16, 2.0), y)
        assert not res.defined
        assert res.r == 0.0

    def test_too_few_valid_pairs(self):
        res = pearson_r([1.0, NAN, NAN], [1.0, 2.0, NAN])
        assert not res.defined
        assert res.c1 == 1 and res.c2 == 1

    def test_only_valid_pairs_enter_r(self):
        y = np.array([1.0, 2.0, 3.0, 100.0])
        yhat = np.array([1.0, 2.0, 3.0, NAN])
        res = pearson_r(yhat, y)  # the broken pair must not touch r
        assert res.defined
        assert abs(res.r - 1.0) <= 1e-12
        assert res.c1 == 1


class TestCorrScore:
    def test_perfect_correlation_all_valid(self):
        assert corr_score(1.0, 512, 0, 0, 1000) == 512_000

    def test_all_invalid_agreement_rewarded(self):
        assert corr_score(0.0, 512, 0, 512, 1000) == 512_000

    def test_total_validity_disagreement(self):
        for r in (0.0, 0.5, 1.0):
            assert corr_score(r, 512, 512, 0, 1000) == -512_000

    def test_r4_not_r2(self):
        # r^4 at r = 0.5 is 1/16 of the full-credit term
        assert corr_score(0.5, 16, 0, 0, 1000) == 1000 * (0.5**4) * 16

    def test_argmax_invariant_under_common_scaling(self):
        gen = np.random.default_rng(3)
        y = gen.uniform(1, 5, 128)
        rows = [gen.uniform(1, 5, 128) for _ in range(20)]
        rows.append(2.0 * y + 1.0)

        def score(row):
            res = pearson_r(row, y)
            return corr_score(res.r, 128, res.c1, res.c2, 1000)

        base = [score(row) for row in rows]
        scaled = [score(8.0 * row) for row in rows]
        assert int(np.argmax(base)) == int(np.argmax(scaled))


class TestAggregateCorr:
    def test_record_fields(self):
        y = np.linspace(1, 5, 512)
        rec = aggregate_corr(y, y, m=1000)
        assert isinstance(rec, FitnessRecord)
        assert abs(rec.aggregate - 512_000) <= 1e-6
        assert rec.r2 is not None and abs(rec.r2 - 1.0) <= 1e-12

    def test_nan_agreement_beats_mismatch(self):
        y = np.array([1.0, 2.0, 3.0, NAN, NAN, 4.0] * 16)
        match = y.copy()
        mismatch = y.copy()
        mismatch[3] = 5.0
        assert aggregate_corr(match, y).aggregate > aggregate_corr(mismatch, y).aggregate
        assert aggregate_ptpt(match, y).aggregate > aggregate_ptpt(mismatch, y).aggregate


class TestPairwiseSum:
    @settings(max_examples=100, deadline=None)
    @given(st.lists(finite_floats, min_size=0, max_size=64))
    def test_close_to_exact(self, values):
        got = pairwise_sum(np.array(values))
        want = math.fsum(values)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-9)

    def test_empty(self):
        assert pairwise_sum(np.array([])) == 0.0
