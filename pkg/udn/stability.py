"""ε-stability: service-rate conditions, critical arrival rates, diagnostics."""

import logging
import math
from typing import Iterable, Optional, Sequence

import numpy as np

from udn.config import settings
from udn.core import ValidatedConfig
from udn.exceptions import (
    EmptyRealizationError,
    EngineFault,
    HorizonTooShortError,
    UnknownRegimeError,
)
from udn.geometry import nearest_interferers
from udn.models import NetworkRealization, RunStats
from udn.phy import success_probabilities
from udn.schemas import (
    ConditionKind,
    ConditionType,
    Regime,
    StabilityReport,
    SuccessEstimator,
    SystemVariant,
)

logger = logging.getLogger(__name__)

RECOMMENDATIONS = {
    Regime.EPSILON_TO_ZERO: ConditionType.TYPE_II,
    Regime.ACCESS_PROB_TO_ZERO: ConditionType.TYPE_I,
    Regime.DENSITY_TO_ZERO: ConditionType.TYPE_I,
    Regime.THETA_TO_ZERO_AND_ACCESS_TO_ONE: ConditionType.TYPE_II,
    Regime.LONG_LINK_VS_DENSITY: ConditionType.TYPE_II,
}


def loynes_stable(arrival_rate: float, service_rate: float) -> bool:
    """
    Loynes' criterion: a queue is stable iff ξ < μ.

    An empty system (ξ = 0) is stable whatever its service rate.

    Examples:
        >>> loynes_stable(0.1, 0.2)
        True
        >>> loynes_stable(0.3, 0.3)
        False
        >>> loynes_stable(0.0, 0.0)
        True
    """
    if not 0 <= service_rate <= 1:
        raise ValueError("service rate must lie in [0, 1]")
    if arrival_rate == 0:
        return True
    return arrival_rate < service_rate


def activity_model(
    realization: NetworkRealization,
    config: ValidatedConfig,
    kind: ConditionKind,
    arrival_rate: Optional[float] = None,
) -> np.ndarray:
    """
    Interferer activity probabilities induced by a condition kind.

    Sufficient: every interferer active with probability p. Type I: only
    the nearest interferer, with probability p (returned as an
    (interferer, receiver) matrix). Type II: every interferer active with
    probability ξ·p.
    """
    n = realization.n_links
    p = config.access_prob
    match kind:
        case ConditionKind.SUFFICIENT:
            return np.full(n, p)
        case ConditionKind.NECESSARY_TYPE_I:
            activity = np.zeros((n, n))
            nearest = nearest_interferers(realization)
            receivers = np.flatnonzero(nearest >= 0)
            activity[nearest[receivers], receivers] = p
            return activity
        case ConditionKind.NECESSARY_TYPE_II:
            xi = config.arrival_rate if arrival_rate is None else arrival_rate
            return np.full(n, xi * p)
        case _:
            raise ValueError(f"no activity model for {kind.value} conditions")


def condition_service_rates(
    realization: NetworkRealization,
    config: ValidatedConfig,
    kind: ConditionKind,
    *,
    arrival_rate: Optional[float] = None,
    estimator: Optional[SuccessEstimator] = None,
    mc_samples: Optional[int] = None,
) -> np.ndarray:
    """
    Per-link service rates μ̂_i = p · q̂_i under a condition kind.

    Args:
        realization (NetworkRealization): The deployment.
        config (ValidatedConfig): The experiment configuration.
        kind (ConditionKind): Sufficient, Type I or Type II.
        arrival_rate (float, optional): ξ used by Type II; defaults to the
        configured arrival rate.
        estimator (SuccessEstimator, optional): Defaults to the setting.
        mc_samples (int, optional): Defaults to the setting.

    Raises:
        EmptyRealizationError: If the realization has no links.

    Returns:
        np.ndarray: One service rate per link.
    """
    if realization.is_empty:
        raise EmptyRealizationError("the realization has no links")
    activity = activity_model(realization, config, kind, arrival_rate)
    probabilities, _ = success_probabilities(
        realization,
        activity,
        config,
        estimator=SuccessEstimator(
            estimator or settings.success_estimator
        ),
        mc_samples=mc_samples or settings.mc_samples,
    )
    return config.access_prob * probabilities


def epsilon_quantile(values: Sequence[float], epsilon: float) -> float:
    """
    Lower empirical ε-quantile: the order statistic at index ⌈ε·n⌉.

    Index 0 is read as the minimum.

    Examples:
        >>> epsilon_quantile([0.4, 0.1, 0.3, 0.2], 0.5)
        0.2
        >>> epsilon_quantile([0.4, 0.1, 0.3, 0.2], 1.0)
        0.4
        >>> epsilon_quantile([0.4, 0.1, 0.3, 0.2], 0.0)
        0.1
    """
    ordered = np.sort(np.asarray(values, dtype=float))
    if not len(ordered):
        raise ValueError("cannot take the quantile of no values")
    # round away float noise such as 0.1 * 20 = 2.0000000000000004
    index = max(math.ceil(round(epsilon * len(ordered), 9)), 1)
    return float(ordered[index - 1])


def _pooled_rates(
    ensemble: Sequence[NetworkRealization],
    config: ValidatedConfig,
    kind: ConditionKind,
    arrival_rate: Optional[float] = None,
    **options,
) -> np.ndarray:
    return np.concatenate(
        [
            condition_service_rates(
                realization,
                config,
                kind,
                arrival_rate=arrival_rate,
                **options,
            )
            for realization in ensemble
        ]
    )


def critical_arrival_rate(
    ensemble: Iterable[NetworkRealization],
    config: ValidatedConfig,
    kind: ConditionKind,
    epsilon: Optional[float] = None,
    *,
    tolerance: Optional[float] = None,
    **options,
) -> float:
    """
    The largest arrival rate for which the pooled links are ε-stable.

    For Sufficient and Type I conditions the service rates do not depend on
    ξ and ξ* is the ε-quantile of the pooled rates. Under Type II the rates
    decrease with ξ; ξ* is the fixed point of ξ = quantile(μ̂(ξ)), found by
    bisection on [0, 1].

    Args:
        ensemble (Iterable[NetworkRealization]): Realizations; empty ones are
        skipped.
        config (ValidatedConfig): The experiment configuration.
        kind (ConditionKind): Sufficient, Type I or Type II.
        epsilon (float, optional): Defaults to `config.epsilon`.
        tolerance (float, optional): Bisection tolerance.

    Raises:
        EmptyRealizationError: If the ensemble has no link at all.
        EngineFault: If the bisection is not bracketed.

    Returns:
        float: ξ* in packets per slot.
    """
    epsilon = config.epsilon if epsilon is None else epsilon
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    ensemble = [r for r in ensemble if not r.is_empty]
    if not ensemble:
        raise EmptyRealizationError("the ensemble has no links")

    if kind is not ConditionKind.NECESSARY_TYPE_II:
        rates = _pooled_rates(ensemble, config, kind, **options)
        return epsilon_quantile(rates, epsilon)

    def quantile_at(xi: float) -> float:
        rates = _pooled_rates(ensemble, config, kind, xi, **options)
        return epsilon_quantile(rates, epsilon)

    tolerance = tolerance or settings.bisection_tolerance
    q_low = quantile_at(0.0)
    q_high = quantile_at(1.0)
    if q_low < 0 or q_high > 1:
        raise EngineFault("critical-rate bisection is not bracketed")
    if q_low <= 0:
        return 0.0

    low, high = 0.0, 1.0
    while high - low > tolerance:
        middle = (low + high) / 2
        q_middle = quantile_at(middle)
        if q_middle > middle:
            low, q_low = middle, q_middle
        else:
            high = middle
    # both bounds lie above the fixed point, within tolerance of it
    return min(high, q_low)


def empirical_stability(
    stats: RunStats,
    config: ValidatedConfig,
    *,
    slope_factor: Optional[float] = None,
    min_queue: Optional[int] = None,
    min_horizon: Optional[int] = None,
) -> np.ndarray:
    """
    Flags links whose queue keeps growing over the second half of a run.

    A link is unstable iff the least-squares slope of its queue length over
    the last T/2 slots exceeds `slope_factor`·ξ and its final queue length
    exceeds `min_queue`. The flags are also stored on the per-link stats.

    Raises:
        HorizonTooShortError: If the run is shorter than the floor, or has
        too few samples in its second half.
        ValueError: For Backlogged runs.

    Returns:
        np.ndarray: Stable flag per link.
    """
    if stats.variant is SystemVariant.BACKLOGGED:
        raise ValueError("backlogged queues have no stability to test")
    min_horizon = min_horizon or settings.min_stability_horizon
    if stats.horizon < min_horizon:
        raise HorizonTooShortError(
            f"empirical stability needs T >= {min_horizon}, got {stats.horizon}"
        )
    slope_factor = (
        settings.unstable_slope_factor if slope_factor is None else slope_factor
    )
    min_queue = settings.unstable_min_queue if min_queue is None else min_queue

    window = stats.sample_slots >= stats.horizon / 2
    if np.count_nonzero(window) < 2:
        raise HorizonTooShortError("too few queue samples in the last T/2")
    if not len(stats):
        return np.zeros(0, dtype=bool)

    slots = stats.sample_slots[window].astype(float)
    lengths = stats.queue_matrix[window].astype(float)
    slopes = np.polyfit(slots, lengths, 1)[0]
    finals = np.array([link.final_queue_len for link in stats])
    unstable = (slopes > slope_factor * config.arrival_rate) & (
        finals > min_queue
    )
    for link, flag in zip(stats, unstable):
        link.stable = not flag
    return ~unstable


def report_from_rates(
    rates: Sequence[float],
    arrival_rate: float,
    epsilon: float,
    kind: ConditionKind,
) -> StabilityReport:
    """Builds an ε-stability report from per-link service rates."""
    stable = [loynes_stable(arrival_rate, float(rate)) for rate in rates]
    return _report(stable, epsilon, kind, service_rates=list(map(float, rates)))


def report_from_runs(
    runs: Iterable[RunStats], config: ValidatedConfig, **options
) -> StabilityReport:
    """Builds an empirical ε-stability report pooled over runs."""
    stable: list[bool] = []
    for stats in runs:
        stable.extend(map(bool, empirical_stability(stats, config, **options)))
    return _report(stable, config.epsilon, ConditionKind.EMPIRICAL)


def _report(
    stable: list[bool],
    epsilon: float,
    kind: ConditionKind,
    service_rates: Optional[list[float]] = None,
) -> StabilityReport:
    unstable_fraction = stable.count(False) / len(stable) if stable else 0.0
    return StabilityReport(
        service_rates=service_rates or [],
        stable=stable,
        unstable_fraction=unstable_fraction,
        epsilon=epsilon,
        verdict=unstable_fraction <= epsilon,
        condition_kind=kind,
    )


def recommend_condition_type(regime: Regime | str) -> ConditionType:
    """
    Advises which necessary-condition type suits a limiting regime.

    Args:
        regime (Regime | str): A `Regime`, its member name, or its row text.

    Raises:
        UnknownRegimeError: If the regime is not tabulated.

    Examples:
        >>> recommend_condition_type("Access probability approaches zero")
        <ConditionType.TYPE_I: 'Type I'>
        >>> recommend_condition_type("EPSILON_TO_ZERO").value
        'Type II'
    """
    if not isinstance(regime, Regime):
        try:
            regime = Regime(regime)
        except ValueError:
            try:
                regime = Regime[str(regime).upper()]
            except KeyError:
                raise UnknownRegimeError(regime) from None
    return RECOMMENDATIONS[regime]


def stability_report(
    config: ValidatedConfig,
    *,
    rates: Optional[Sequence[float]] = None,
    runs: Optional[Iterable[RunStats]] = None,
    kind: Optional[ConditionKind] = None,
    **options,
) -> StabilityReport:
    """
    ε-stability verdict for the configured arrival rate.

    Given service rates, each link is judged by Loynes' criterion; given
    simulation runs, by the empirical growth test.

    Raises:
        ValueError: If neither rates nor runs are given, or rates come
        without a condition kind.
    """
    if runs is not None:
        return report_from_runs(runs, config, **options)
    if rates is None or kind is None:
        raise ValueError("pass either runs, or rates with their kind")
    return report_from_rates(rates, config.arrival_rate, config.epsilon, kind)
