import numpy as np
import pytest
from scipy import stats

from udn.core import validate_config
from udn.exceptions import EngineFault
from udn.experiments import sample_ensemble
from udn.phy import success_probabilities
from udn.queuesim import (
    QueueStates,
    Streams,
    busy_fraction,
    local_delay_stats,
    run,
    step,
)
from udn.schemas import ConditionKind, SuccessEstimator, SystemVariant
from udn.stability import condition_service_rates


class TestSingleLink:
    """Tests of the engine on an isolated link."""

    def test_no_access_accumulates_every_arrival(self, isolated_link):
        config = validate_config(
            {"access_prob": 0, "arrival_rate": 0.1, "horizon": 5000}
        )
        result = run(config, isolated_link)
        link = result[0]
        assert link.delivered == 0
        assert link.censored
        assert link.attempts == 0
        # the final queue is a Binomial(T, ξ) count
        assert stats.binom(5000, 0.1).cdf(link.final_queue_len) > 1e-4
        assert stats.binom(5000, 0.1).sf(link.final_queue_len) > 1e-4

    def test_certain_access_delivers_in_the_arrival_slot(self, isolated_link):
        config = validate_config(
            {"access_prob": 1, "arrival_rate": 0.3, "horizon": 1000}
        )
        link = run(config, isolated_link)[0]
        assert link.delivered > 0
        assert set(link.delays.tolist()) == {1}
        assert link.final_queue_len == 0

    def test_mean_delay_matches_geo_geo_1(self, isolated_link):
        config = validate_config(
            {"access_prob": 0.5, "arrival_rate": 0.05, "horizon": 100_000}
        )
        link = run(config, isolated_link)[0]
        assert link.mean_delay == pytest.approx(0.95 / 0.45, rel=0.05)

    def test_zero_horizon(self, isolated_link):
        result = run(validate_config({}), isolated_link, horizon=0)
        assert result.horizon == 0
        assert result[0].censored
        assert len(result.sample_slots) == 0

    def test_delays_are_at_least_one(self, isolated_link):
        config = validate_config({"horizon": 3000, "arrival_rate": 0.3})
        link = run(config, isolated_link)[0]
        assert link.delays.min() >= 1
        assert np.all(np.diff(link.completion_slots) > 0)


class TestStep:
    """Tests for one slot of the engine."""

    def test_states_must_match_the_realization(self, two_links):
        config = validate_config({})
        with pytest.raises(EngineFault):
            step(
                QueueStates.empty(3),
                two_links,
                config,
                SystemVariant.ORIGINAL,
                0,
                Streams.for_realization(0, 0),
            )

    def test_corrupted_state_is_detected(self, two_links):
        config = validate_config({})
        states = QueueStates.empty(2)
        states.queue_len[0] = 4
        with pytest.raises(EngineFault, match="conservation"):
            step(
                states,
                two_links,
                config,
                SystemVariant.ORIGINAL,
                0,
                Streams.for_realization(0, 0),
                check=True,
            )

    def test_link_snapshot(self, two_links):
        config = validate_config({"arrival_rate": 1, "access_prob": 0})
        states = QueueStates.empty(2)
        streams = Streams.for_realization(0, 0)
        for slot in range(3):
            step(
                states, two_links, config, SystemVariant.ORIGINAL, slot,
                streams,
            )
        snapshot = states.link(0)
        assert list(snapshot.fifo) == [0, 1, 2]
        assert snapshot.queue_length == 3
        snapshot.check(SystemVariant.ORIGINAL)


class TestCoupling:
    """Sample-path orderings between the coupled systems."""

    def test_dominant_queues_never_shorter(self, small_config):
        for realization in sample_ensemble(small_config):
            original = run(
                small_config, realization, SystemVariant.ORIGINAL, stride=1
            )
            dominant = run(
                small_config, realization, SystemVariant.DOMINANT, stride=1
            )
            assert np.all(dominant.queue_matrix >= original.queue_matrix)

    def test_favorable_delays_never_longer(self, small_config):
        for realization in sample_ensemble(small_config):
            original = run(small_config, realization, SystemVariant.ORIGINAL)
            favorable = run(
                small_config, realization, SystemVariant.FAVORABLE_DROP
            )
            for slow, fast in zip(original, favorable):
                assert fast.delivered >= slow.delivered
                assert np.all(fast.delays[: slow.delivered] <= slow.delays)

    def test_runs_are_reproducible(self, small_config):
        realization = sample_ensemble(small_config, 1)[0]
        a = run(small_config, realization)
        b = run(small_config, realization)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.delays, y.delays)
            np.testing.assert_array_equal(x.queue_samples, y.queue_samples)

    def test_no_arrivals_means_identical_favorable_and_original(
        self, small_config
    ):
        config = small_config.with_updates(arrival_rate=0)
        realization = sample_ensemble(config, 1)[0]
        original = run(config, realization, SystemVariant.ORIGINAL)
        favorable = run(config, realization, SystemVariant.FAVORABLE_DROP)
        assert [x.delivered for x in original] == [0] * len(original)
        assert [x.delivered for x in favorable] == [0] * len(favorable)


class TestFavorableDrop:
    """Tests for the observed/non-observed split of the favorable system."""

    def test_unobserved_links_drop_and_conserve(self, small_config):
        realization = sample_ensemble(small_config, 1)[0]
        result = run(
            small_config,
            realization,
            SystemVariant.FAVORABLE_DROP,
            observed=[0],
            stride=1,
        )
        others = result.links[1:]
        assert sum(link.dropped for link in others) > 0
        assert all(link.final_queue_len == 0 for link in others)
        assert all(set(link.delays.tolist()) <= {1} for link in others)
        assert result[0].dropped == 0


class TestSimplifiedNearest:
    """Tests for the nearest-interferer decoupled systems."""

    def test_only_the_nearest_interferer_counts(self, two_links):
        config = validate_config(
            {
                "access_prob": 1,
                "arrival_rate": 1,
                "fading": "none",
                "sinr_threshold": 20,
                "horizon": 200,
            }
        )
        result = run(config, two_links, SystemVariant.SIMPLIFIED_NEAREST)
        # SIR 16 at the first receiver, 256 at the second
        assert result[0].delivered == 0
        assert result[1].delivered == 200

    def test_saturated_throughput_matches_type_i_rates(self, small_config):
        horizon = 20_000
        config = small_config.with_updates(arrival_rate=1, horizon=horizon)
        for realization in sample_ensemble(config, 2):
            result = run(
                config,
                realization,
                SystemVariant.SIMPLIFIED_NEAREST,
                stride=horizon,
            )
            rates = condition_service_rates(
                realization, config, ConditionKind.NECESSARY_TYPE_I
            )
            delivered = np.array([link.delivered for link in result])
            throughput = delivered / horizon
            z = (throughput - rates) / np.sqrt(rates * (1 - rates) / horizon)
            assert np.max(np.abs(z)) < 5
            assert np.mean(np.abs(z) > 3) <= 0.05


class TestBacklogged:
    """Tests for saturated queues and the local delay."""

    def test_queue_always_holds_one_packet(self, small_config):
        realization = sample_ensemble(small_config, 1)[0]
        result = run(small_config, realization, SystemVariant.BACKLOGGED)
        assert np.all(result.queue_matrix == 1)

    def test_isolated_link_local_delay_is_geometric(self, isolated_link):
        config = validate_config({"access_prob": 0.25, "horizon": 40_000})
        result = run(config, isolated_link, SystemVariant.BACKLOGGED)
        summary = local_delay_stats(result)
        assert summary.means[0] == pytest.approx(4.0, rel=0.05)
        assert summary.variances[0] == pytest.approx(12.0, rel=0.15)

    def test_local_delay_matches_the_success_probability(self, small_config):
        config = small_config.with_updates(horizon=10_000)
        p = config.access_prob
        within, total = 0, 0
        for realization in sample_ensemble(config):
            result = run(config, realization, SystemVariant.BACKLOGGED)
            summary = local_delay_stats(result)
            q, q_errors = success_probabilities(
                realization,
                np.full(realization.n_links, p),
                config,
                estimator=SuccessEstimator.MONTE_CARLO,
                mc_samples=4000,
            )
            expected = 1 / (p * q)
            # delta method for 1 / (p q)
            combined = np.sqrt(
                summary.stderrs**2 + (q_errors / (p * q**2)) ** 2
            )
            enough = summary.counts >= 30
            error = np.abs(summary.means - expected)[enough]
            within += int(np.count_nonzero(error <= 3 * combined[enough]))
            total += int(np.count_nonzero(enough))
        assert total > 50
        assert within / total >= 0.95

    def test_no_fading_with_certain_access_is_one_or_never(self):
        config = validate_config(
            {
                "intensity": 0.05,
                "window_side": 30,
                "access_prob": 1,
                "fading": "none",
                "horizon": 200,
                "realizations": 3,
            }
        )
        for realization in sample_ensemble(config):
            result = run(config, realization, SystemVariant.BACKLOGGED)
            summary = local_delay_stats(result)
            delivering = ~summary.censored
            np.testing.assert_array_equal(summary.means[delivering], 1.0)
            np.testing.assert_array_equal(summary.variances[delivering], 0.0)

    def test_local_delay_needs_backlogged_runs(self, isolated_link):
        result = run(validate_config({"horizon": 10}), isolated_link)
        with pytest.raises(ValueError, match="Backlogged"):
            local_delay_stats(result)

    def test_until_keeps_early_deliveries(self, isolated_link):
        config = validate_config({"access_prob": 0.5, "horizon": 1000})
        result = run(config, isolated_link, SystemVariant.BACKLOGGED)
        half = local_delay_stats(result, until=500)
        assert 0 < half.counts[0] < result[0].delivered


def test_busy_fraction_of_saturated_queues(small_config):
    realization = sample_ensemble(small_config, 1)[0]
    result = run(small_config, realization, SystemVariant.BACKLOGGED)
    assert busy_fraction([result]) == 1.0
    assert busy_fraction([]) == 0.0
