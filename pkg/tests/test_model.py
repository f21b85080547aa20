import math

import numpy as np
import pytest
from scipy import stats

from channelstats.model import (
    GroupSpec,
    PopulationSpec,
    RandomSource,
    sample_basket_total,
    sample_channel_totals,
    sample_items,
    sample_weight,
)


class TestGroupSpec:
    def test_rejects_negative_variance(self):
        with pytest.raises(ValueError):
            GroupSpec("apples", 0.26, -1e-9)

    def test_rejects_empty_name_and_nonfinite_mean(self):
        with pytest.raises(ValueError):
            GroupSpec("", 0.26, 0.1)
        with pytest.raises(ValueError):
            GroupSpec("apples", math.nan, 0.1)

    def test_population_needs_unique_names(self):
        with pytest.raises(ValueError):
            PopulationSpec((GroupSpec("a", 1, 1), GroupSpec("a", 2, 1)))
        with pytest.raises(ValueError):
            PopulationSpec(())


class TestRandomSource:
    def test_same_seed_and_substream_repeat(self):
        a = RandomSource(42, 7)
        b = RandomSource(42, 7)
        assert [sample_weight(GroupSpec("x", 0, 1), a) for _ in range(5)] == \
               [sample_weight(GroupSpec("x", 0, 1), b) for _ in range(5)]

    def test_substream_is_seedsequence_child(self):
        child = np.random.SeedSequence(42).spawn(4)[3]
        expected = np.random.Generator(np.random.PCG64(child)).normal(size=3)
        np.testing.assert_array_equal(RandomSource(42, 3).generator.normal(size=3), expected)

    def test_rejects_out_of_range_seed(self):
        with pytest.raises(ValueError):
            RandomSource(2**64)
        with pytest.raises(ValueError):
            RandomSource(1, -1)

    def test_substreams_uncorrelated(self):
        x = RandomSource(9, 0).generator.normal(size=100_000)
        y = RandomSource(9, 1).generator.normal(size=100_000)
        assert abs(np.corrcoef(x, y)[0, 1]) < 0.01


class TestSampleWeight:
    def test_zero_variance_is_exact(self):
        assert sample_weight(GroupSpec("a", 0.26, 0.0), RandomSource(1)) == 0.26

    def test_law_of_large_numbers(self):
        g = GroupSpec("a", 0.26, 0.00056)
        draws = sample_items(g, 10**6, RandomSource(3))
        assert abs(draws.mean() - 0.26) < 4 * math.sqrt(0.00056 / 10**6)

    def test_negative_weights_not_truncated(self):
        draws = sample_items(GroupSpec("a", 0.0, 1.0), 1000, RandomSource(5))
        assert draws.min() < 0


@pytest.fixture(scope="module")
def totals():
    pop = PopulationSpec((GroupSpec("a", 0.25, 0.5), GroupSpec("o", -0.1, 2.0)))
    counts = [3, 7]
    t = np.array([sample_basket_total(counts, pop, RandomSource(11, i)) for i in range(100_000)])
    return t, 3 * 0.25 + 7 * -0.1, 3 * 0.5 + 7 * 2.0


class TestBasketTotal:
    def test_empty_basket(self, fruit):
        assert sample_basket_total([0, 0], fruit, RandomSource(1)) == 0.0

    def test_five_identical_apples(self):
        pop = PopulationSpec((GroupSpec("apples", 0.26, 0.0),))
        assert sample_basket_total([5], pop, RandomSource(1)) == pytest.approx(1.3, abs=1e-12)

    def test_count_length_checked(self, fruit):
        with pytest.raises(ValueError):
            sample_basket_total([1], fruit, RandomSource(1))


    def test_moments_match_gaussian_sum(self, totals):
        t, mu, var = totals
        R = t.size
        assert abs(t.mean() - mu) < 4 * math.sqrt(var / R)
        # SE of the sample variance of a normal sample: var * sqrt(2 / (R - 1))
        assert abs(t.var(ddof=1) - var) < 4 * var * math.sqrt(2 / (R - 1))

    def test_standardized_totals_look_normal(self, totals):
        t, mu, var = totals
        z = (t - mu) / math.sqrt(var)
        assert abs(stats.skew(z)) < 0.05
        assert abs(stats.kurtosis(z)) < 0.1

    def test_channel_totals_rows(self, fruit):
        counts = np.array([[2, 0], [0, 3], [0, 0]])
        pop = PopulationSpec((GroupSpec("a", 0.26, 0.0), GroupSpec("o", 0.30, 0.0)))
        np.testing.assert_allclose(sample_channel_totals(counts, pop, RandomSource(0)),
                                   [0.52, 0.90, 0.0], atol=1e-15)
