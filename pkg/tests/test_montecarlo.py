import math

import numpy as np
import pytest

from channelstats.design import ChannelDesign, DesignRecipe, balanced_typical, biased_typical, stack
from channelstats.errors import NonIdentifiableError
from channelstats.estimators import paired_variance_estimate
from channelstats.fisher import crb_variance_param
from channelstats.model import GroupSpec, PopulationSpec, RandomSource, sample_channel_totals
from channelstats.montecarlo import (
    EstimandSummary,
    ExperimentSpec,
    MCSummary,
    crb_comparison,
    mse_sweep,
    run_experiment,
)


def apples(v=0.00056, mean=0.26):
    return PopulationSpec((GroupSpec("apples", mean, v),))


class TestSpec:
    def test_validation(self, fruit):
        with pytest.raises(ValueError):
            ExperimentSpec("D", fruit, 10, 1, n=5)
        with pytest.raises(ValueError):
            ExperimentSpec("A", fruit, 0, 1, n=5)
        with pytest.raises(ValueError):
            ExperimentSpec("B", fruit, 10, 1)
        with pytest.raises(ValueError):
            ExperimentSpec("C", fruit, 10, 1)
        with pytest.raises(ValueError):
            ExperimentSpec("C", fruit, 10, 1, design=ChannelDesign([[1, 2, 3]]))
        with pytest.raises(KeyError):
            ExperimentSpec("A", fruit, 10, 1, n=5, group="pears")


class TestReproducibility:
    @pytest.mark.parametrize("kind", ["A", "B", "C"])
    def test_rerun_and_parallel_identical(self, fruit, kind):
        if kind == "C":
            spec = ExperimentSpec(kind, fruit, 3000, 99, design=balanced_typical(100))
        else:
            spec = ExperimentSpec(kind, fruit, 3000, 99, n=20)
        a = run_experiment(spec)
        b = run_experiment(spec)
        c = run_experiment(spec, workers=3)
        assert a == b == c

    def test_replicate_uses_its_substream(self):
        pop = apples(v=1.0)
        spec = ExperimentSpec("B", pop, 5, 123, n=10)
        summary = run_experiment(spec, offset=40)
        manual = []
        for i in range(40, 45):
            t = sample_channel_totals([[10], [10]], pop, RandomSource(123, i))
            manual.append(paired_variance_estimate(t[0], t[1], 10))
        assert summary["variance"].mean_estimate == pytest.approx(np.mean(manual), rel=1e-15)

    def test_sweep_blocks(self, fruit):
        spec = ExperimentSpec("C", fruit, 500, 7, recipe=DesignRecipe("biased", n=100, p=0.25))
        rows = mse_sweep(spec, [100, 1000])
        assert rows[1] == run_experiment(spec, offset=500, block=1, n=1000)
        assert [r.n for r in rows] == [100, 1000]


class TestKinds:
    def test_kind_a_unbiased_mean(self):
        s = run_experiment(ExperimentSpec("A", apples(), 100_000, 1, n=5))
        m = s["mean"]
        assert abs(m.bias) < 4 * m.bias_se
        assert m.theory_mse == pytest.approx(0.00056 / 5)
        # denominator-n variance estimate is biased low by v/n
        var = s["variance"]
        assert var.bias == pytest.approx(-0.00056 / 5, rel=0.05)
        assert var.crb is None

    def test_kind_b_unbiased(self):
        s = run_experiment(ExperimentSpec("B", apples(), 100_000, 2, n=100))
        e = s["variance"]
        assert abs(e.mean_estimate - 0.00056) < 4 * e.bias_se
        assert e.theory_mse == pytest.approx(2 * 0.00056**2)
        assert e.crb == pytest.approx(crb_variance_param(0.00056))

    def test_kind_c_balanced_plateau(self, fruit):
        s = run_experiment(ExperimentSpec("C", fruit, 100_000, 3, design=balanced_typical(10**4)))
        assert s["apples"].mse == pytest.approx(0.125 + 5e-5, rel=0.05)
        assert s["apples"].theory_mse == pytest.approx(0.125 + 5e-5, rel=1e-10)

    def test_kind_c_singular(self, fruit):
        with pytest.raises(NonIdentifiableError):
            run_experiment(ExperimentSpec("C", fruit, 10, 1, design=biased_typical(100, 0.5)))

    def test_kind_c_stacked_uses_least_squares(self, fruit):
        d = stack([balanced_typical(100), biased_typical(100, 0.25)])
        s = run_experiment(ExperimentSpec("C", fruit, 20_000, 4, design=d))
        for e in s.estimands:
            assert e.theory_mse == pytest.approx(e.crb, rel=1e-10)
            assert abs(e.bias) < 4 * e.bias_se

    def test_kind_c_unequal_variances_theory(self):
        pop = PopulationSpec((GroupSpec("a", 1.0, 0.5), GroupSpec("b", 2.0, 3.0)))
        d = ChannelDesign([[30, 10], [5, 40]])
        s = run_experiment(ExperimentSpec("C", pop, 40_000, 5, design=d))
        for e in s.estimands:
            assert e.mse == pytest.approx(e.theory_mse, rel=0.05)
            # square system: the unique unbiased linear solution attains the bound
            assert e.theory_mse == pytest.approx(e.crb, rel=1e-10)

    def test_summary_invariants(self, fruit):
        s = run_experiment(ExperimentSpec("C", fruit, 200, 6, design=balanced_typical(100)))
        for e in s.estimands:
            assert e.bias_se > 0 and e.mse_se > 0
            assert e.mse >= e.bias**2 - 1e-15

    def test_single_replicate_has_no_se(self):
        e = run_experiment(ExperimentSpec("B", apples(), 1, 1, n=3))["variance"]
        assert e.bias_se is None and e.mse_se is None


class TestSweep:
    def test_needs_values(self):
        with pytest.raises(ValueError):
            mse_sweep(ExperimentSpec("A", apples(), 10, 1, n=5), [])

    def test_fixed_design_cannot_sweep(self, fruit):
        spec = ExperimentSpec("C", fruit, 10, 1, design=balanced_typical(100))
        with pytest.raises(ValueError):
            mse_sweep(spec, [100, 200])
        spec = ExperimentSpec("C", fruit, 10, 1, recipe=DesignRecipe("explicit", matrix=((2, 1), (1, 2))))
        with pytest.raises(ValueError):
            mse_sweep(spec, [100, 200])

    def test_kind_a_theory(self):
        rows = mse_sweep(ExperimentSpec("A", apples(v=0.0005), 200, 3, n=10), [10, 100])
        assert [r["mean"].theory_mse for r in rows] == [0.0005 / 10, 0.0005 / 100]


def _fake(mse, mse_se, crb):
    e = EstimandSummary("x", 0.0, 0.0, 0.0, 1e-3, mse, mse_se, None, crb)
    return MCSummary("B", 10, 1000, 0, (e,))


class TestCRBComparison:
    def test_kind_b_ratio_four(self):
        v = 0.0005
        s = run_experiment(ExperimentSpec("B", apples(v=v), 100_000, 8, n=100))
        (check,) = crb_comparison(s, crb_variance_param(v))
        assert check.passed
        assert check.ratio == pytest.approx(4.0, rel=0.1)

    def test_fabricated_violation(self):
        (check,) = crb_comparison(_fake(0.5, 0.01, 1.0))
        assert not check.passed
        (check,) = crb_comparison(_fake(0.5, 0.01, 1.0), 1.0)
        assert not check.passed

    def test_within_noise_passes(self):
        (check,) = crb_comparison(_fake(0.98, 0.01, 1.0))
        assert check.passed

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            crb_comparison(_fake(1.0, 0.1, 1.0), [1.0, 2.0])


def test_bias_check_false_alarm_rate():
    """A correct unbiased estimator should rarely fail the 4-SE check."""
    failures = 0
    for seed in range(50):
        e = run_experiment(ExperimentSpec("A", apples(), 2000, 1000 + seed, n=5))["mean"]
        failures += abs(e.bias) >= 4 * e.bias_se
    assert failures <= 2
