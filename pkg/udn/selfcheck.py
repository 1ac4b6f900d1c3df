"""Fast consistency checks of the engine against known answers."""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from udn.core import derive_stream, validate_config
from udn.delay_analysis import geo_geo_1_mean_delay
from udn.experiments import sample_ensemble
from udn.geometry import from_links
from udn.phy import conditional_success_prob
from udn.queuesim import run
from udn.schemas import SystemVariant

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    """
    Outcome of one check.

    - **name**: Short identifier.
    - **passed**: Whether the observation met the expectation.
    - **expected**, **observed**: Human-readable values.
    """

    name: str
    passed: bool
    expected: str
    observed: str


def check_coupling(realizations: int = 3, horizon: int = 2_000) -> CheckResult:
    """Dominant queues never fall below Original queues on coupled runs."""
    config = validate_config(
        {
            "intensity": 0.05,
            "window_side": 40,
            "access_prob": 0.5,
            "arrival_rate": 0.1,
            "horizon": horizon,
            "seed": 7,
        }
    )
    violations = 0
    for realization in sample_ensemble(config, realizations):
        original = run(config, realization, SystemVariant.ORIGINAL, stride=1)
        dominant = run(config, realization, SystemVariant.DOMINANT, stride=1)
        violations += int(
            np.count_nonzero(dominant.queue_matrix < original.queue_matrix)
        )
    return CheckResult(
        "coupling dominance",
        violations == 0,
        "0 violations",
        f"{violations} violations",
    )


def check_geo_geo_1(
    horizon: int = 100_000, tolerance: float = 0.05
) -> CheckResult:
    """
    An isolated link reproduces the Geo/Geo/1 mean delay.

    The defaults are a fast variant; the full check runs 10⁶ slots at 2%.
    """
    xi, p = 0.05, 0.5
    config = validate_config(
        {
            "arrival_rate": xi,
            "access_prob": p,
            "noise_power": 0,
            "horizon": horizon,
            "seed": 11,
        }
    )
    realization = from_links([((10.0, 10.0), (11.0, 10.0))], 100.0)
    stats = run(config, realization, SystemVariant.ORIGINAL)
    expected = geo_geo_1_mean_delay(xi, p)
    observed = stats[0].mean_delay
    return CheckResult(
        f"Geo/Geo/1 mean delay (T={horizon:,}, within {tolerance:.0%})",
        bool(abs(observed - expected) <= tolerance * expected),
        f"{expected:.4f}",
        f"{observed:.4f}",
    )


def check_two_exponentials(
    samples: int = 200_000, sigmas: float = 4.0
) -> list[CheckResult]:
    """
    One always-active interferer at twice the link distance.

    The defaults are a fast variant; the full check draws 10⁶ samples and
    allows 3 standard errors.
    """
    results = []
    realization = from_links(
        [((0.0, 0.0), (1.0, 0.0)), ((3.0, 0.0), (4.0, 0.0))], 100.0
    )
    for alpha in (3.0, 4.0):
        for theta in (0.5, 1.0, 4.0):
            config = validate_config(
                {"sinr_threshold": theta, "path_loss_exponent": alpha}
            )
            estimate = conditional_success_prob(
                0,
                realization,
                np.ones(2),
                samples,
                derive_stream(config.seed, "estimation", 0),
                config,
            )
            expected = 1 / (1 + theta * 2.0**-alpha)
            error = abs(estimate.probability - expected)
            results.append(
                CheckResult(
                    f"two exponentials (theta={theta:g}, alpha={alpha:g}, "
                    f"{samples:,} samples, {sigmas:g} sigma)",
                    bool(error <= sigmas * estimate.stderr),
                    f"{expected:.5f}",
                    f"{estimate.probability:.5f} ± {estimate.stderr:.5f}",
                )
            )
    return results


CHECKS: list[Callable[[], CheckResult | list[CheckResult]]] = [
    check_coupling,
    check_geo_geo_1,
    check_two_exponentials,
]


def run_selfcheck() -> list[CheckResult]:
    """Runs every check and returns the flattened results."""
    results: list[CheckResult] = []
    for check in CHECKS:
        outcome = check()
        results.extend(outcome if isinstance(outcome, list) else [outcome])
    for result in results:
        if not result.passed:
            logger.error(
                "%s failed: expected %s, observed %s",
                result.name,
                result.expected,
                result.observed,
            )
    return results
