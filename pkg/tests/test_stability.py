import numpy as np
import pytest

from udn.core import validate_config
from udn.exceptions import (
    EmptyRealizationError,
    HorizonTooShortError,
    UnknownRegimeError,
)
from udn.experiments import sample_ensemble
from udn.geometry import from_links
from udn.queuesim import run
from udn.schemas import ConditionKind, ConditionType, Regime, SystemVariant
from udn.stability import (
    condition_service_rates,
    critical_arrival_rate,
    empirical_stability,
    epsilon_quantile,
    loynes_stable,
    recommend_condition_type,
    report_from_runs,
    stability_report,
)

KINDS = [
    ConditionKind.SUFFICIENT,
    ConditionKind.NECESSARY_TYPE_I,
    ConditionKind.NECESSARY_TYPE_II,
]


class TestLoynes:
    """Tests for the single-queue stability criterion."""

    @pytest.mark.parametrize(
        "xi, mu, expected",
        [(0.1, 0.2, True), (0.3, 0.3, False), (0.0, 0.0, True)],
        ids=["below", "boundary", "no-traffic"],
    )
    def test_criterion(self, xi, mu, expected):
        assert loynes_stable(xi, mu) is expected

    def test_service_rate_must_be_a_probability(self):
        with pytest.raises(ValueError):
            loynes_stable(0.1, 1.5)


class TestServiceRates:
    """Tests for per-link service rates under each condition kind."""

    @pytest.mark.parametrize("kind", KINDS, ids=lambda k: k.value)
    def test_lone_link_is_served_at_p(self, isolated_link, kind):
        config = validate_config({"access_prob": 0.3})
        rates = condition_service_rates(isolated_link, config, kind)
        np.testing.assert_allclose(rates, [0.3])

    def test_two_links_type_i_equals_sufficient(self, two_links):
        config = validate_config({})
        sufficient = condition_service_rates(
            two_links, config, ConditionKind.SUFFICIENT
        )
        type_i = condition_service_rates(
            two_links, config, ConditionKind.NECESSARY_TYPE_I
        )
        np.testing.assert_allclose(type_i, sufficient)

    @pytest.mark.parametrize(
        "estimator", ["rayleigh_exact", "monte_carlo"], ids=str
    )
    def test_sufficient_rates_are_lowest(self, small_config, estimator):
        for realization in sample_ensemble(small_config):
            rates = {
                kind: condition_service_rates(
                    realization,
                    small_config,
                    kind,
                    estimator=estimator,
                    mc_samples=300,
                )
                for kind in KINDS
            }
            sufficient = rates[ConditionKind.SUFFICIENT]
            assert np.all(sufficient <= rates[ConditionKind.NECESSARY_TYPE_I])
            assert np.all(
                sufficient <= rates[ConditionKind.NECESSARY_TYPE_II]
            )

    def test_empty_realization(self):
        with pytest.raises(EmptyRealizationError):
            condition_service_rates(
                from_links([], 100.0),
                validate_config({}),
                ConditionKind.SUFFICIENT,
            )


class TestCriticalArrivalRate:
    """Tests for the ε-quantile critical rate."""

    def test_quantile_convention(self):
        values = [0.5, 0.1, 0.4, 0.2, 0.3]
        assert epsilon_quantile(values, 0.2) == 0.1
        assert epsilon_quantile(values, 0.21) == 0.2
        assert epsilon_quantile(values, 1.0) == 0.5

    def test_epsilon_one_is_the_pooled_maximum(self, small_config):
        ensemble = sample_ensemble(small_config)
        xi_star = critical_arrival_rate(
            ensemble, small_config, ConditionKind.SUFFICIENT, 1.0
        )
        pooled = np.concatenate(
            [
                condition_service_rates(
                    r, small_config, ConditionKind.SUFFICIENT
                )
                for r in ensemble
            ]
        )
        assert xi_star == pytest.approx(pooled.max())

    @pytest.mark.parametrize("kind", KINDS, ids=lambda k: k.value)
    def test_no_access_means_no_capacity(self, small_config, kind):
        config = small_config.with_updates(access_prob=0)
        ensemble = sample_ensemble(config)
        assert critical_arrival_rate(ensemble, config, kind) == 0.0

    def test_sufficient_region_is_inside_necessary_ones(self, small_config):
        ensemble = sample_ensemble(small_config)
        for p in (0.2, 0.5, 0.9):
            config = small_config.with_updates(access_prob=p)
            rates = {
                kind: critical_arrival_rate(ensemble, config, kind)
                for kind in KINDS
            }
            assert rates[ConditionKind.SUFFICIENT] <= min(
                rates[ConditionKind.NECESSARY_TYPE_I],
                rates[ConditionKind.NECESSARY_TYPE_II],
            )

    @pytest.mark.parametrize("kind", KINDS, ids=lambda k: k.value)
    def test_nondecreasing_in_epsilon(self, small_config, kind):
        ensemble = sample_ensemble(small_config)
        rates = [
            critical_arrival_rate(ensemble, small_config, kind, epsilon)
            for epsilon in (0.05, 0.1, 0.2)
        ]
        assert rates == sorted(rates)

    def test_type_ii_is_a_fixed_point(self, small_config):
        """ξ* sits where the quantile of μ̂(ξ) crosses ξ."""
        ensemble = sample_ensemble(small_config)
        kind = ConditionKind.NECESSARY_TYPE_II
        xi_star = critical_arrival_rate(ensemble, small_config, kind)
        pooled = np.concatenate(
            [
                condition_service_rates(
                    r, small_config, kind, arrival_rate=xi_star
                )
                for r in ensemble
            ]
        )
        quantile = epsilon_quantile(pooled, small_config.epsilon)
        assert quantile == pytest.approx(xi_star, abs=2e-4)

    def test_empty_ensemble(self, small_config):
        with pytest.raises(EmptyRealizationError):
            critical_arrival_rate(
                [from_links([], 100.0)],
                small_config,
                ConditionKind.SUFFICIENT,
            )

    def test_epsilon_range(self, small_config, isolated_link):
        with pytest.raises(ValueError):
            critical_arrival_rate(
                [isolated_link], small_config, ConditionKind.SUFFICIENT, 1.5
            )


class TestEmpiricalStability:
    """Tests for the finite-horizon growth test."""

    def test_short_horizon_is_refused(self, isolated_link):
        result = run(validate_config({"horizon": 100}), isolated_link)
        with pytest.raises(HorizonTooShortError, match="10000"):
            empirical_stability(result, validate_config({}))

    def test_no_traffic_is_stable(self, isolated_link):
        config = validate_config({"arrival_rate": 0, "horizon": 10_000})
        result = run(config, isolated_link)
        assert empirical_stability(result, config).tolist() == [True]

    def test_no_access_is_unstable(self, isolated_link):
        config = validate_config(
            {"arrival_rate": 0.1, "access_prob": 0, "horizon": 10_000}
        )
        result = run(config, isolated_link)
        assert empirical_stability(result, config).tolist() == [False]
        assert result[0].stable is False

    def test_light_load_is_stable(self, isolated_link):
        config = validate_config(
            {"arrival_rate": 0.05, "access_prob": 0.5, "horizon": 10_000}
        )
        result = run(config, isolated_link)
        assert empirical_stability(result, config).tolist() == [True]

    def test_backlogged_runs_are_refused(self, isolated_link):
        config = validate_config({"horizon": 10_000})
        result = run(config, isolated_link, SystemVariant.BACKLOGGED)
        with pytest.raises(ValueError):
            empirical_stability(result, config)


class TestStabilityReport:
    """Tests for ε-stability verdicts."""

    def test_report_from_rates(self):
        config = validate_config({"arrival_rate": 0.2, "epsilon": 0.25})
        report = stability_report(
            config,
            rates=[0.1, 0.3, 0.4, 0.5],
            kind=ConditionKind.SUFFICIENT,
        )
        assert report.stable == [False, True, True, True]
        assert report.unstable_fraction == 0.25
        assert report.verdict is True

    def test_report_from_runs(self, isolated_link):
        config = validate_config(
            {"arrival_rate": 0.1, "access_prob": 0, "horizon": 10_000}
        )
        report = stability_report(config, runs=[run(config, isolated_link)])
        assert report.condition_kind is ConditionKind.EMPIRICAL
        assert report.verdict is False

    def test_needs_rates_or_runs(self):
        with pytest.raises(ValueError):
            stability_report(validate_config({}))


class TestConditionType:
    """Tests for the regime advice table."""

    @pytest.mark.parametrize(
        "regime, expected",
        [
            ("Access probability approaches zero", ConditionType.TYPE_I),
            (
                "Parameter ε for ε-stability approaches zero",
                ConditionType.TYPE_II,
            ),
            ("Density of transmitters approaches zero", ConditionType.TYPE_I),
            (Regime.THETA_TO_ZERO_AND_ACCESS_TO_ONE, ConditionType.TYPE_II),
            ("long_link_vs_density", ConditionType.TYPE_II),
        ],
        ids=["access", "epsilon", "density", "theta", "member-name"],
    )
    def test_table(self, regime, expected):
        assert recommend_condition_type(regime) is expected

    def test_unknown_regime(self):
        with pytest.raises(UnknownRegimeError):
            recommend_condition_type("Noise power approaches zero")


@pytest.mark.slow
def test_critical_rates_bracket_the_simulated_stability():
    config = validate_config(
        {
            "intensity": 0.05,
            "window_side": 40,
            "access_prob": 0.5,
            "epsilon": 0.1,
            "horizon": 10_000,
            "realizations": 20,
        }
    )
    ensemble = sample_ensemble(config)
    sufficient = critical_arrival_rate(
        ensemble, config, ConditionKind.SUFFICIENT
    )
    necessary = max(
        critical_arrival_rate(ensemble, config, kind) for kind in KINDS[1:]
    )

    def unstable_fraction(xi: float) -> float:
        loaded = config.with_updates(arrival_rate=xi)
        runs = [run(loaded, r, SystemVariant.ORIGINAL) for r in ensemble]
        return report_from_runs(runs, loaded).unstable_fraction

    assert unstable_fraction(0.5 * sufficient) <= 0.15
    assert unstable_fraction(min(1.2 * necessary, 1.0)) > 0.1
