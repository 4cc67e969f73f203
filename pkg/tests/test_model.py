"""Model contract: validation, the toy simulator's law, the scaled
Euclidean distance's metric properties, and exact simulation accounting."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from abcsmc import (
    ModelSpec,
    ParticleArray,
    RngKey,
    SimCounter,
    SimulationError,
    distance,
    mad_scales,
    prior_sample,
    simulate,
    toy_model,
)
from conftest import assert_ks_pass


@pytest.fixture(scope="module")
def z_at_zero(toy):
    g = RngKey(3).generator()
    return np.array([simulate(toy, np.zeros(1), g)[0] for _ in range(1_000_000)])


def _model_2d(observed=(0.0, 0.0), scales=(2.0, 1.0)):
    return ModelSpec(
        param_dim=1,
        prior_box=[(-1.0, 1.0)],
        summary_dim=2,
        observed=list(observed),
        simulator=lambda theta, rng: np.array([theta[0], theta[0]]),
        distance_scales=list(scales),
    )


class TestModelSpecValidation:
    def test_rejects_degenerate_prior_interval(self):
        with pytest.raises(ValueError):
            ModelSpec(
                param_dim=1,
                prior_box=[(0.0, 0.0)],
                summary_dim=1,
                observed=[0.0],
                simulator=lambda t, r: np.array([0.0]),
            )

    def test_rejects_inverted_interval(self):
        with pytest.raises(ValueError):
            ModelSpec(
                param_dim=1,
                prior_box=[(1.0, -1.0)],
                summary_dim=1,
                observed=[0.0],
                simulator=lambda t, r: np.array([0.0]),
            )

    def test_rejects_nonpositive_scales(self):
        with pytest.raises(ValueError):
            _model_2d(scales=(1.0, 0.0))

    def test_rejects_dimension_mismatches(self):
        with pytest.raises(ValueError):
            ModelSpec(
                param_dim=0,
                prior_box=[],
                summary_dim=1,
                observed=[0.0],
                simulator=lambda t, r: np.array([0.0]),
            )
        with pytest.raises(ValueError):
            _model_2d(observed=(0.0,))

    def test_in_box(self, toy):
        assert toy.in_box(np.array([9.99]))
        assert toy.in_box(np.array([-10.0]))
        assert not toy.in_box(np.array([10.01]))
        flags = toy.in_box_many(np.array([[0.0], [11.0], [-10.0]]))
        assert flags.tolist() == [True, False, True]


class TestPriorSample:
    def test_within_box_fixed_seed(self, toy):
        g = RngKey(1).generator()
        for _ in range(100):
            th = prior_sample(toy, g)
            assert th.shape == (1,)
            assert -10.0 <= th[0] <= 10.0

    def test_mean_of_many_draws(self, toy):
        # CLT: 3 * (20/sqrt(12)) / sqrt(1e6) = 0.0173 < 0.02
        draws = prior_sample(toy, RngKey(2).generator(), size=1_000_000)
        assert abs(draws.mean()) < 0.02


class TestToySimulator:
    def test_variance_matches_mixture(self, z_at_zero):
        # 0.5 * 1 + 0.5 * 0.01 = 0.505
        assert z_at_zero.var() == pytest.approx(0.505, abs=0.01)

    def test_location_family(self, toy):
        g = RngKey(4).generator()
        zs = np.array(
            [simulate(toy, np.array([5.0]), g)[0] for _ in range(200_000)]
        )
        assert zs.mean() == pytest.approx(5.0, abs=0.01)

    def test_small_ball_probability(self, z_at_zero):
        # P(|z| <= 0.09 | theta=0) for the half/half mixture of sd 1 and 0.1
        expected = 0.5 * (2 * stats.norm.cdf(0.09) - 1) + 0.5 * (
            2 * stats.norm.cdf(0.9) - 1
        )
        frac = np.mean(np.abs(z_at_zero) <= 0.09)
        assert frac == pytest.approx(expected, abs=0.002)

    def test_ks_against_mixture_cdf(self, toy):
        theta = 1.3
        g = RngKey(5).generator()
        zs = np.array(
            [simulate(toy, np.array([theta]), g)[0] for _ in range(100_000)]
        )

        def cdf(x):
            return 0.5 * stats.norm.cdf(x - theta) + 0.5 * stats.norm.cdf(
                10.0 * (x - theta)
            )

        p = stats.kstest(zs, cdf).pvalue
        assert p >= 0.001

    def test_toy_model_metadata(self, toy):
        assert toy.name == "toy"
        assert toy.params["prior_halfwidth"] == 10.0
        assert toy_model(0.5).prior_box[0][0] == -0.5


class TestDistance:
    def test_zero_iff_equal_to_observed(self, toy):
        assert distance(toy, np.array([0.0])) == 0.0
        assert distance(toy, np.array([1e-300])) > 0.0

    def test_absolute_value_in_one_dimension(self, toy):
        assert distance(toy, np.array([0.09])) == 0.09
        assert distance(toy, np.array([-0.09])) == 0.09

    def test_scaled_euclidean_example(self):
        model = _model_2d(observed=(0.0, 0.0), scales=(2.0, 1.0))
        assert distance(model, np.array([2.0, 1.0])) == math.sqrt(2.0)

    def test_symmetry(self):
        a = np.array([0.3, -1.2])
        b = np.array([-0.7, 0.4])
        d_ab = distance(_model_2d(observed=a), b)
        d_ba = distance(_model_2d(observed=b), a)
        assert d_ab == pytest.approx(d_ba, rel=1e-15)

    def test_triangle_inequality_on_random_triples(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            x, y, z = rng.normal(size=(3, 2))
            d = lambda u, v: distance(_model_2d(observed=u), v)  # noqa: E731
            assert d(x, z) <= d(x, y) + d(y, z) + 1e-12


class TestSimulateContract:
    def test_counter_bumps_exactly_once_per_call(self, toy):
        counter = SimCounter()
        g = RngKey(6).generator()
        for i in range(25):
            simulate(toy, np.zeros(1), g, counter, "phase-a")
        simulate(toy, np.zeros(1), g, counter, "phase-b")
        assert counter.count("phase-a") == 25
        assert counter.count("phase-b") == 1
        assert counter.total == 26
        assert counter.total_excluding("phase-b") == 25

    def test_failure_wrapped_and_aborts(self):
        def bad(theta, rng):
            raise RuntimeError("backend exploded")

        model = ModelSpec(
            param_dim=1,
            prior_box=[(-1.0, 1.0)],
            summary_dim=1,
            observed=[0.0],
            simulator=bad,
        )
        counter = SimCounter()
        with pytest.raises(SimulationError) as err:
            simulate(model, np.array([0.5]), RngKey(0).generator(), counter)
        assert isinstance(err.value.__cause__, RuntimeError)
        assert err.value.theta is not None
        assert counter.total == 0  # failed simulations are not counted

    def test_wrong_output_length_rejected(self):
        model = ModelSpec(
            param_dim=1,
            prior_box=[(-1.0, 1.0)],
            summary_dim=2,
            observed=[0.0, 0.0],
            simulator=lambda t, r: np.array([1.0]),
        )
        with pytest.raises(SimulationError):
            simulate(model, np.zeros(1), RngKey(0).generator())


class TestMadScales:
    def test_positive_scales_for_spread_summaries(self, toy):
        counter = SimCounter()
        scaled = mad_scales(toy, 512, RngKey(7).generator(), counter)
        assert scaled.distance_scales.shape == (1,)
        assert scaled.distance_scales[0] > 0
        assert counter.count("pilot") == 512

    def test_constant_summary_is_degenerate(self):
        from abcsmc import DegenerateArrayError

        model = ModelSpec(
            param_dim=1,
            prior_box=[(-1.0, 1.0)],
            summary_dim=1,
            observed=[0.0],
            simulator=lambda t, r: np.array([3.14]),
        )
        with pytest.raises(DegenerateArrayError):
            mad_scales(model, 64, RngKey(8).generator())


class TestParticleArray:
    def test_sort_take_and_distinct(self):
        thetas = np.array([[1.0], [0.0], [1.0]])
        zs = np.array([[0.3], [0.1], [0.3]])
        arr = ParticleArray(thetas, zs, np.array([0.3, 0.1, 0.3]))
        srt = arr.sorted_by_dist()
        assert srt.dists.tolist() == [0.1, 0.3, 0.3]
        assert srt.thetas[0, 0] == 0.0
        assert arr.distinct_count() == 2
        sub = arr.take(np.array([0, 2]))
        assert len(sub) == 2
        p = arr.particle(1)
        assert p.dist == 0.1

    def test_empty(self):
        arr = ParticleArray.empty(2, 3)
        assert len(arr) == 0
        assert arr.thetas.shape == (0, 2)

    def test_toy_distribution_ks(self, toy):
        # end-to-end check of prior_sample + simulate against the
        # prior-predictive law via a direct mixture sampler
        g = RngKey(9).generator()
        zs = []
        for _ in range(50_000):
            th = prior_sample(toy, g)
            zs.append(simulate(toy, th, g)[0])
        ref_rng = np.random.default_rng(10)
        th_ref = ref_rng.uniform(-10, 10, size=50_000)
        sd = np.where(ref_rng.random(50_000) < 0.5, 1.0, 0.1)
        z_ref = th_ref + sd * ref_rng.standard_normal(50_000)
        assert_ks_pass(np.array(zs), z_ref)
