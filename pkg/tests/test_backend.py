import math

import numpy as np
import pytest

from rpnevo.backend import (
    CapExceeded,
    CaseTable,
    DimensionMismatch,
    EvalBackend,
    pack_genomes,
)
from rpnevo.fitness import aggregate_corr, aggregate_ptpt
from rpnevo.genome import Genome, eval_case, op, random_genome, var
from rpnevo.rng import RandomStream

from .oracles import close_ulp, same_float

NAN = float("nan")


def g(tokens, arity=2):
    return Genome.from_tokens(tokens, arity)


class TestCaseTable:
    def test_shape_and_props(self):
        t = CaseTable(inputs=[[1.0, 2.0], [3.0, 4.0]], targets=[3.0, 7.0])
        assert t.n_cases == 2 and t.arity == 2

    def test_rejects_invalid_inputs(self):
        with pytest.raises(ValueError):
            CaseTable(inputs=[[NAN]], targets=[1.0])

    def test_targets_may_be_invalid(self):
        t = CaseTable(inputs=[[1.0], [2.0]], targets=[NAN, math.inf])
        assert t.n_cases == 2

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            CaseTable(inputs=np.empty((0, 1)), targets=np.empty(0))


class TestEvaluateBatch:
    def test_identity_row(self):
        backend = EvalBackend(kind="reference")
        cases = CaseTable(inputs=[[1.0], [2.0], [3.0]], targets=[0.0, 0.0, 0.0])
        out = backend.evaluate_batch([g([var(0)], arity=1)], cases)
        assert out.shape == (1, 3)
        assert out.tolist() == [[1.0, 2.0, 3.0]]

    def test_empty_population(self):
        backend = EvalBackend(kind="reference")
        cases = CaseTable(inputs=[[1.0], [2.0]], targets=[0.0, 0.0])
        out = backend.evaluate_batch([], cases)
        assert out.shape == (0, 2)

    def test_case_cap_enforced(self):
        backend = EvalBackend(kind="reference")
        cases = CaseTable(
            inputs=np.ones((1025, 1)), targets=np.zeros(1025)
        )
        with pytest.raises(CapExceeded):
            backend.evaluate_batch([g([var(0)], arity=1)], cases)

    def test_exactly_1024_cases_allowed(self):
        backend = EvalBackend(kind="reference")
        cases = CaseTable(inputs=np.ones((1024, 1)), targets=np.zeros(1024))
        out = backend.evaluate_batch([g([var(0)], arity=1)], cases)
        assert out.shape == (1, 1024)

    def test_arity_mismatch(self):
        backend = EvalBackend(kind="reference")
        cases = CaseTable(inputs=[[1.0], [2.0]], targets=[0.0, 0.0])
        with pytest.raises(DimensionMismatch):
            backend.evaluate_batch([g([var(0), var(1), op("add")])], cases)

    def test_matches_scalar_eval(self):
        # arithmetic-only operators are correctly rounded: exact agreement
        rng = RandomStream(21)
        from rpnevo.ops import OperatorSet

        arith = OperatorSet.from_names(["add", "sub", "mul", "div", "sq", "sqrt", "inv"])
        genomes = [random_genome(rng, 2, 20, arith) for _ in range(50)]
        inputs = np.array([[rng.uniform(-5, 5), rng.uniform(-5, 5)] for _ in range(32)])
        cases = CaseTable(inputs=inputs, targets=np.zeros(32))
        out = EvalBackend(kind="reference").evaluate_batch(genomes, cases)
        for i, genome in enumerate(genomes):
            for j in range(32):
                assert same_float(out[i, j], eval_case(genome, inputs[j]))

    def test_matches_scalar_eval_transcendental_within_ulps(self):
        # libm implementations may differ by an ulp on trig of large args
        rng = RandomStream(22)
        genomes = [random_genome(rng, 2, 20) for _ in range(100)]
        inputs = np.array([[rng.uniform(-10, 10), rng.uniform(-10, 10)] for _ in range(16)])
        cases = CaseTable(inputs=inputs, targets=np.zeros(16))
        out = EvalBackend(kind="reference").evaluate_batch(genomes, cases)
        for i, genome in enumerate(genomes):
            for j in range(16):
                assert close_ulp(out[i, j], eval_case(genome, inputs[j]), ulps=8)

    def test_reference_parallel_identical(self):
        rng = RandomStream(23)
        genomes = [random_genome(rng, 2, 24) for _ in range(200)]
        inputs = np.array([[rng.uniform(-5, 5), rng.uniform(-5, 5)] for _ in range(64)])
        cases = CaseTable(inputs=inputs, targets=np.zeros(64))
        a = EvalBackend(kind="reference").evaluate_batch(genomes, cases)
        b = EvalBackend(kind="parallel").evaluate_batch(genomes, cases)
        assert np.array_equal(a, b, equal_nan=True)

    def test_submission_splitting_and_counters(self):
        rng = RandomStream(24)
        genomes = [random_genome(rng, 1, 8) for _ in range(250)]
        cases = CaseTable(inputs=np.ones((16, 1)), targets=np.zeros(16))
        backend = EvalBackend(kind="reference", capacity=100)
        backend.evaluate_batch(genomes, cases)
        assert backend.stats.submissions == math.ceil(250 / 100)
        assert backend.stats.evals_total == 250 * 16

    def test_eval_counter_is_product(self):
        backend = EvalBackend(kind="reference")
        cases = CaseTable(inputs=np.ones((37, 1)), targets=np.zeros(37))
        rng = RandomStream(25)
        genomes = [random_genome(rng, 1, 8) for _ in range(11)]
        backend.evaluate_batch(genomes, cases)
        assert backend.stats.evals_total == 11 * 37


class TestScoreBatch:
    def _outputs(self, rows):
        return np.asarray(rows, dtype=np.float64)

    def test_perfect_row_ptpt(self):
        y = np.linspace(1, 5, 512)
        backend = EvalBackend(kind="reference")
        recs = backend.score_batch(self._outputs([y]), y, fitness="ptpt", m=1000)
        assert recs[0].aggregate == 512_000
        assert recs[0].n_cases == 512

    def test_all_nan_row_ptpt(self):
        y = np.linspace(1, 5, 512)
        row = np.full(512, NAN)
        backend = EvalBackend(kind="reference")
        recs = backend.score_batch(self._outputs([row]), y, fitness="ptpt", m=1000)
        assert recs[0].aggregate == -512_000

    def test_zero_individuals(self):
        backend = EvalBackend(kind="reference")
        recs = backend.score_batch(np.empty((0, 8)), np.zeros(8), fitness="ptpt")
        assert recs == []

    def test_matches_scalar_ptpt_exactly(self):
        gen = np.random.default_rng(31)
        y = gen.uniform(-5, 5, 64)
        y[5] = NAN
        y[9] = math.inf
        rows = gen.uniform(-5, 5, (40, 64))
        rows[3, :] = NAN
        rows[7, 10] = math.inf
        backend = EvalBackend(kind="parallel")
        recs = backend.score_batch(rows, y, fitness="ptpt", m=1100)
        for i in range(40):
            ref = aggregate_ptpt(rows[i], y, m=1100)
            assert recs[i].aggregate == ref.aggregate
            assert (recs[i].c1, recs[i].c2) == (ref.c1, ref.c2)

    def test_matches_scalar_corr_closely(self):
        gen = np.random.default_rng(32)
        y = gen.uniform(-5, 5, 64)
        y[11] = NAN
        rows = gen.uniform(-5, 5, (40, 64))
        rows[2, :] = 3.0  # constant row: undefined r -> 0
        rows[6, 11] = NAN
        backend = EvalBackend(kind="parallel")
        recs = backend.score_batch(rows, y, fitness="corr", m=1000)
        for i in range(40):
            ref = aggregate_corr(rows[i], y, m=1000)
            assert recs[i].aggregate == pytest.approx(ref.aggregate, rel=1e-12, abs=1e-9)
            assert (recs[i].c1, recs[i].c2) == (ref.c1, ref.c2)
            assert recs[i].r2 == pytest.approx(ref.r2, rel=1e-12, abs=1e-12)

    def test_scoring_backend_equivalence(self):
        gen = np.random.default_rng(33)
        y = gen.uniform(-5, 5, 128)
        y[::17] = NAN
        rows = gen.uniform(-1e3, 1e3, (64, 128))
        rows[::9, ::5] = NAN
        ref = EvalBackend(kind="reference")
        par = EvalBackend(kind="parallel")
        a = ref.score_rows(rows, y, "ptpt", 1100)
        b = par.score_rows(rows, y, "ptpt", 1100)
        assert np.array_equal(a.aggregate, b.aggregate)
        c = ref.score_rows(rows, y, "corr", 1000)
        d = par.score_rows(rows, y, "corr", 1000)
        assert np.array_equal(c.aggregate, d.aggregate)


def test_pack_genomes_pads_and_measures():
    genomes = [g([var(0)], arity=1), g([var(0), op("sin"), op("sq")], arity=1)]
    codes, consts, lengths = pack_genomes(genomes)
    assert codes.shape == (2, 3)
    assert lengths.tolist() == [1, 3]
