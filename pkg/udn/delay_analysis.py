"""Mean-delay distributions, busy-probability fixed point, local delay."""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from udn.config import settings
from udn.core import ValidatedConfig
from udn.exceptions import EmptyRealizationError
from udn.models import CdfEstimate, NetworkRealization, RunStats
from udn.phy import success_probabilities
from udn.queuesim import local_delay_stats
from udn.schemas import FixedPointResult, SuccessEstimator, SystemVariant

logger = logging.getLogger(__name__)

CHAIN_CAP = 10_000
CHAIN_TAIL = 1e-12


def default_grid() -> np.ndarray:
    """The evaluation grid used when none is given."""
    return np.linspace(0.0, settings.cdf_grid_max, settings.cdf_grid_points)


def geo_geo_1_stationary(
    xi: float, mu: float, cap: int = CHAIN_CAP, tail_tol: float = CHAIN_TAIL
) -> np.ndarray:
    """
    Stationary queue length of the Geo/Geo/1 chain, observed at slot starts.

    In each slot a packet arrives with probability ξ, then the head of line
    (if any) departs with probability μ. The chain is a birth-death chain with
    ratio r = ξ(1 − μ) / ((1 − ξ)μ), so π_n ∝ rⁿ. The distribution is cut at
    `cap` states, or as soon as the remaining tail mass drops below
    `tail_tol`, and renormalized.

    Raises:
        ValueError: If the queue is not stable (ξ ≥ μ with ξ > 0).

    Examples:
        >>> geo_geo_1_stationary(0.0, 0.5).tolist()
        [1.0]
        >>> [round(x, 6) for x in geo_geo_1_stationary(0.2, 0.6)[:3]]
        [0.833333, 0.138889, 0.023148]
    """
    if not (0 <= xi <= 1 and 0 <= mu <= 1):
        raise ValueError("xi and mu must lie in [0, 1]")
    if xi == 0:
        return np.ones(1)
    if xi >= mu:
        raise ValueError(f"the queue is unstable: xi={xi} >= mu={mu}")
    ratio = xi * (1 - mu) / ((1 - xi) * mu)
    if ratio == 0:
        return np.ones(1)
    # tail mass beyond n is r^n; stop once it is negligible
    states = min(cap, max(1, int(np.ceil(np.log(tail_tol) / np.log(ratio)))))
    weights = ratio ** np.arange(states)
    return weights / weights.sum()


def geo_geo_1_mean_delay(xi: float, mu: float, **chain) -> float:
    """
    Mean sojourn of a Geo/Geo/1 queue in slots, arrival slot included.

    By Little's law the mean delay is E[Q]/ξ + 1, which for ξ < μ equals
    (1 − ξ) / (μ − ξ). Returns `inf` for an unstable queue and 1/μ for an
    empty one.

    Examples:
        >>> round(geo_geo_1_mean_delay(0.05, 0.5), 6)
        2.111111
        >>> geo_geo_1_mean_delay(0.0, 0.25)
        4.0
        >>> geo_geo_1_mean_delay(0.5, 0.5)
        inf
    """
    if xi == 0:
        return 1 / mu if mu > 0 else float("inf")
    if xi >= mu:
        return float("inf")
    distribution = geo_geo_1_stationary(xi, mu, **chain)
    mean_queue = float(np.arange(len(distribution)) @ distribution)
    return mean_queue / xi + 1


def _check_ensemble(runs: Sequence[RunStats]) -> None:
    if not runs:
        raise EmptyRealizationError("the ensemble has no runs")
    variants = {stats.variant for stats in runs}
    if len(variants) > 1:
        raise ValueError("every run must use the same variant")


def mean_delay_cdf(
    runs: Iterable[RunStats],
    grid: Optional[Sequence[float]] = None,
    *,
    truncated: bool = False,
) -> CdfEstimate:
    """
    Distribution of the per-link mean delay, pooled over an ensemble.

    A link's mean delay is the sum of its recorded delays over the number of
    packets it delivered; links that delivered nothing are censored and
    carry their mass above the grid.

    Args:
        runs (Iterable[RunStats]): Runs of one variant and configuration.
        grid (Sequence[float], optional): Evaluation points.
        truncated (bool): Average the horizon-truncated sojourn of every
        arrived packet instead, counting undelivered packets at their age in
        the last slot.

    Raises:
        EmptyRealizationError: If there are no runs.
        ValueError: If the runs mix variants.

    Returns:
        CdfEstimate: The estimate.
    """
    runs = list(runs)
    _check_ensemble(runs)
    means = [
        link.truncated_mean if truncated else link.mean_delay
        for stats in runs
        for link in stats
    ]
    censored = [link.censored for stats in runs for link in stats]
    kept = np.array(
        [m for m, flag in zip(means, censored) if not flag], dtype=float
    )
    return CdfEstimate(
        means=np.sort(kept),
        censored=sum(censored),
        total=len(censored),
        grid=default_grid() if grid is None else np.asarray(grid, dtype=float),
    )


def _pooled_success(
    ensemble: Sequence[NetworkRealization],
    config: ValidatedConfig,
    activity: float,
    estimator: Optional[SuccessEstimator],
    mc_samples: Optional[int],
) -> np.ndarray:
    probabilities = [
        success_probabilities(
            realization,
            np.full(realization.n_links, activity),
            config,
            estimator=SuccessEstimator(
                estimator or settings.success_estimator
            ),
            mc_samples=mc_samples or settings.mc_samples,
        )[0]
        for realization in ensemble
        if not realization.is_empty
    ]
    return np.concatenate(probabilities) if probabilities else np.zeros(0)


def fixed_point_busy(
    config: ValidatedConfig,
    ensemble: Sequence[NetworkRealization],
    tolerance: Optional[float] = None,
    max_iter: Optional[int] = None,
    *,
    damping: Optional[float] = None,
    estimator: Optional[SuccessEstimator] = None,
    mc_samples: Optional[int] = None,
) -> FixedPointResult:
    """
    Solves ρ = f(ρ) for the common busy probability of the interferers.

    f(ρ) averages min(1, ξ / (p·q_i(ρ))) over every link of the ensemble,
    q_i(ρ) being the link's success probability when each interferer is
    active with probability ρ·p. The damped iteration starts at ρ = 1; the
    damping is halved whenever the residual grows after the third step.

    Args:
        config (ValidatedConfig): Supplies ξ, p and the physical layer.
        ensemble (Sequence[NetworkRealization]): Realizations to average over.
        tolerance (float, optional): Residual target.
        max_iter (int, optional): Iteration cap.
        damping (float, optional): Initial damping factor γ.

    Raises:
        ValueError: If the tolerance is not positive.
        EmptyRealizationError: If the ensemble has no link.

    Returns:
        FixedPointResult: The last iterate, even when not converged.
    """
    if tolerance is None:
        tolerance = settings.fixed_point_tolerance
    max_iter = max_iter or settings.fixed_point_max_iter
    gamma = damping or settings.fixed_point_damping
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    if not any(not realization.is_empty for realization in ensemble):
        raise EmptyRealizationError("the ensemble has no links")

    xi, p = config.arrival_rate, config.access_prob
    if xi == 0:
        return FixedPointResult(
            rho=0.0,
            iterations=1,
            residual=0.0,
            converged=True,
            damping=gamma,
            iterates=[1.0, 0.0],
        )

    def busy_map(rho: float) -> float:
        q = _pooled_success(ensemble, config, rho * p, estimator, mc_samples)
        service = p * q
        with np.errstate(divide="ignore"):
            ratios = np.where(service > 0, xi / service, np.inf)
        return float(np.minimum(1.0, ratios).mean())

    rho = 1.0
    iterates = [rho]
    previous = None
    for iteration in range(1, max_iter + 1):
        value = busy_map(rho)
        residual = abs(rho - value)
        if residual <= tolerance:
            return FixedPointResult(
                rho=rho,
                iterations=iteration,
                residual=residual,
                converged=True,
                damping=gamma,
                iterates=iterates,
            )
        if iteration > 3 and previous is not None and residual > previous:
            gamma /= 2
            logger.debug(
                "residual grew at step %d, damping now %g", iteration, gamma
            )
        previous = residual
        rho = (1 - gamma) * rho + gamma * value
        iterates.append(rho)

    residual = abs(rho - busy_map(rho))
    converged = residual <= tolerance
    if not converged:
        logger.warning(
            "busy-probability fixed point not reached in %d iterations "
            "(residual %.3g)",
            max_iter,
            residual,
        )
    return FixedPointResult(
        rho=rho,
        iterations=max_iter,
        residual=residual,
        converged=converged,
        damping=gamma,
        iterates=iterates,
    )


def approx_delay_cdf(
    config: ValidatedConfig,
    ensemble: Sequence[NetworkRealization],
    rho: float,
    grid: Optional[Sequence[float]] = None,
    *,
    estimator: Optional[SuccessEstimator] = None,
    mc_samples: Optional[int] = None,
) -> CdfEstimate:
    """
    Mean-delay distribution under the independent-busy approximation.

    Every link is a Geo/Geo/1 queue served with probability p·q_i(ρ); links
    whose approximate queue is unstable are censored.

    Raises:
        ValueError: If ρ is not a probability.
    """
    if not 0 <= rho <= 1:
        raise ValueError("rho must lie in [0, 1]")
    xi, p = config.arrival_rate, config.access_prob
    service = p * _pooled_success(
        ensemble, config, rho * p, estimator, mc_samples
    )
    delays = np.array([geo_geo_1_mean_delay(xi, float(mu)) for mu in service])
    finite = np.isfinite(delays)
    return CdfEstimate(
        means=np.sort(delays[finite]),
        censored=int(np.count_nonzero(~finite)),
        total=len(delays),
        grid=default_grid() if grid is None else np.asarray(grid, dtype=float),
    )


@dataclass(frozen=True)
class LocalDelaySummary:
    """
    Pooled local-delay statistics of a Backlogged ensemble.

    - **mean**: Average of the per-link mean delays over delivering links.
    - **variance**: Average of the per-link delay variances.
    - **censored_fraction**: Fraction of links without a success.
    - **diverging**: Whether the pooled mean keeps growing with the horizon.
    """

    mean: float
    variance: float
    censored_fraction: float
    diverging: bool


def _pooled_moments(runs: Sequence[RunStats], until: Optional[int] = None):
    means, variances, censored = [], [], []
    for stats in runs:
        link_stats = local_delay_stats(stats, until=until)
        means.append(link_stats.means)
        variances.append(link_stats.variances)
        censored.append(link_stats.censored)
    means = np.concatenate(means) if means else np.zeros(0)
    variances = np.concatenate(variances) if variances else np.zeros(0)
    censored = np.concatenate(censored) if censored else np.zeros(0, bool)
    delivering = ~censored
    if not np.any(delivering):
        return float("nan"), float("nan"), censored
    return (
        float(means[delivering].mean()),
        float(variances[delivering].mean()),
        censored,
    )


def local_delay_summary(
    runs: Iterable[RunStats], growth: Optional[float] = None
) -> LocalDelaySummary:
    """
    Summarizes the time-to-success of a Backlogged ensemble.

    The divergence indicator compares the pooled mean at the full horizon T
    with the same statistic restricted to the first T/2 slots: a relative
    increase above `growth` flags a mean that does not settle. An ensemble
    where links succeed at T but none did by T/2 is flagged as well.

    Raises:
        ValueError: If a run is not Backlogged.
    """
    runs = list(runs)
    if any(stats.variant is not SystemVariant.BACKLOGGED for stats in runs):
        raise ValueError("local delay is defined on Backlogged runs only")
    growth = settings.divergence_growth if growth is None else growth
    total = sum(len(stats) for stats in runs)
    if not total:
        return LocalDelaySummary(float("nan"), float("nan"), 0.0, False)

    mean, variance, censored = _pooled_moments(runs)
    censored_fraction = float(np.count_nonzero(censored)) / total
    if np.isnan(mean):
        diverging = False
    else:
        horizon = min(stats.horizon for stats in runs)
        half_mean, _, _ = _pooled_moments(runs, until=horizon // 2)
        diverging = bool(
            np.isnan(half_mean) or mean > (1 + growth) * half_mean
        )
    if censored_fraction:
        logger.info("%.1f%% of links never succeeded", 100 * censored_fraction)
    return LocalDelaySummary(mean, variance, censored_fraction, diverging)
