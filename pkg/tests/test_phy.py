import numpy as np
import pytest

from udn.core import derive_stream, validate_config
from udn.exceptions import EmptyRealizationError
from udn.geometry import from_links
from udn.phy import (
    SlotChannelDraw,
    attempt_success,
    conditional_success_prob,
    draw_channel,
    path_loss,
    rayleigh_success_probs,
    sinr,
    success_probabilities,
)
from udn.schemas import FadingModel, SuccessEstimator


class TestPathLoss:
    """Tests for the power path-loss law."""

    def test_array_input(self):
        np.testing.assert_allclose(
            path_loss(np.array([1.0, 2.0]), 3), [1.0, 0.125]
        )

    def test_zero_distance_is_refused(self):
        with pytest.raises(ValueError, match="distance 0"):
            path_loss(0.0, 4)


class TestSinr:
    """Tests for the SINR of one slot."""

    def test_lone_link_without_noise_is_infinite(self, isolated_link):
        draw = SlotChannelDraw(np.ones((1, 1)))
        assert sinr(0, [0], isolated_link, draw, 0.0, 4) == float("inf")

    def test_interference_from_one_link(self, two_links):
        draw = SlotChannelDraw(np.ones((2, 2)))
        value = sinr(0, [0, 1], two_links, draw, 0.0, 4)
        assert value == pytest.approx(16.0)

    def test_noise_adds_to_interference(self, two_links):
        draw = SlotChannelDraw(np.ones((2, 2)))
        value = sinr(0, [0, 1], two_links, draw, 0.0625, 4)
        assert value == pytest.approx(8.0)

    def test_inactive_link(self, two_links):
        draw = SlotChannelDraw(np.ones((2, 2)))
        with pytest.raises(ValueError, match="not active"):
            sinr(0, [1], two_links, draw, 0.0, 4)

    def test_threshold_is_inclusive(self):
        assert attempt_success(2.0, 2.0)
        assert not attempt_success(np.nextafter(2.0, 0), 2.0)

    def test_fixed_gains(self):
        draw = draw_channel(3, derive_stream(0, "fading", 0), FadingModel.NONE)
        np.testing.assert_array_equal(draw.gains, np.ones((3, 3)))


class TestSuccessProbability:
    """Tests for the per-link success probability estimators."""

    @pytest.mark.parametrize(
        "theta, alpha",
        [(0.5, 3.0), (1.0, 4.0), (4.0, 4.0)],
        ids=["theta-half-alpha-3", "theta-1-alpha-4", "theta-4-alpha-4"],
    )
    def test_two_exponentials(self, two_links, theta, alpha):
        """One always-active interferer at twice the link distance."""
        config = validate_config(
            {"sinr_threshold": theta, "path_loss_exponent": alpha}
        )
        estimate = conditional_success_prob(
            0,
            two_links,
            np.ones(2),
            100_000,
            derive_stream(1, "estimation", 0),
            config,
        )
        expected = 1 / (1 + theta * 2.0**-alpha)
        assert abs(estimate.probability - expected) <= 4 * estimate.stderr

    def test_isolated_link_always_succeeds_without_noise(self, isolated_link):
        estimate = conditional_success_prob(
            0,
            isolated_link,
            np.ones(1),
            1000,
            derive_stream(0, "estimation", 0),
            validate_config({}),
        )
        assert estimate.probability == 1.0
        assert estimate.stderr == 0.0

    def test_exact_matches_closed_form(self, two_links):
        config = validate_config({"sinr_threshold": 2.0})
        probabilities = rayleigh_success_probs(
            two_links, np.full(2, 0.5), config
        )
        near = 1 - 0.5 + 0.5 / (1 + 2.0 / 2**4)
        far = 1 - 0.5 + 0.5 / (1 + 2.0 / 4**4)
        np.testing.assert_allclose(probabilities, [near, far])

    def test_exact_noise_term(self, isolated_link):
        config = validate_config({"noise_power": 0.5, "sinr_threshold": 2.0})
        probabilities = rayleigh_success_probs(
            isolated_link, np.ones(1), config
        )
        assert probabilities[0] == pytest.approx(np.exp(-1.0))

    def test_monte_carlo_agrees_with_exact(self, small_config):
        from udn.experiments import sample_ensemble

        realization = sample_ensemble(small_config, 1)[0]
        activity = np.full(realization.n_links, 0.5)
        exact, _ = success_probabilities(
            realization,
            activity,
            small_config,
            estimator=SuccessEstimator.RAYLEIGH_EXACT,
        )
        estimate, errors = success_probabilities(
            realization,
            activity,
            small_config,
            estimator=SuccessEstimator.MONTE_CARLO,
            mc_samples=4000,
        )
        spread = np.sqrt(exact * (1 - exact) / 4000)
        within = np.abs(estimate - exact) <= 4 * spread + 1e-12
        assert within.mean() >= 0.95

    def test_common_random_numbers_are_monotone(self, small_config):
        """Lower activity never lowers a Monte-Carlo estimate."""
        from udn.experiments import sample_ensemble

        realization = sample_ensemble(small_config, 1)[0]
        n = realization.n_links
        high, _ = success_probabilities(
            realization, np.full(n, 0.5), small_config, mc_samples=500
        )
        low, _ = success_probabilities(
            realization, np.full(n, 0.05), small_config, mc_samples=500
        )
        assert np.all(low >= high)

    def test_no_fading_falls_back_to_monte_carlo(self, two_links):
        config = validate_config({"fading": "none", "sinr_threshold": 20})
        probabilities, _ = success_probabilities(
            two_links,
            np.ones(2),
            config,
            estimator=SuccessEstimator.RAYLEIGH_EXACT,
            mc_samples=100,
        )
        np.testing.assert_array_equal(probabilities, [0.0, 1.0])

    def test_activity_shape_is_checked(self, two_links):
        with pytest.raises(ValueError, match="activity"):
            rayleigh_success_probs(two_links, np.ones(3), validate_config({}))

    def test_empty_realization(self):
        with pytest.raises(EmptyRealizationError):
            success_probabilities(
                from_links([], 100.0), np.ones(0), validate_config({})
            )
