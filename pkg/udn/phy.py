"""Path loss, fading, SINR and per-link success probabilities."""

import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from udn.core import RngStream, ValidatedConfig, derive_stream
from udn.exceptions import EmptyRealizationError
from udn.models import NetworkRealization
from udn.schemas import FadingModel, SuccessEstimator

logger = logging.getLogger(__name__)

# Upper bound on the number of cells of one Monte-Carlo block.
_BLOCK_CELLS = 1 << 20


@dataclass(frozen=True)
class SlotChannelDraw:
    """
    Power gains of one slot, entry `[k, i]` is h(k→i).

    Rows and columns index the links the gains were drawn for, in order.
    """

    gains: np.ndarray

    def gain(self, transmitter: int, receiver: int) -> float:
        return float(self.gains[transmitter, receiver])


@dataclass(frozen=True)
class SuccessEstimate:
    """A success probability with its standard error."""

    probability: float
    stderr: float


def path_loss(distance, alpha: float):
    """
    Returns the power path-loss gain `distance ** -alpha`.

    Args:
        distance: A distance in meters, or an array of them.
        alpha (float): The path-loss exponent.

    Raises:
        ValueError: If any distance is not strictly positive.

    Examples:
        >>> path_loss(2.0, 4)
        0.0625
    """
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise ValueError(
            "path loss is undefined at distance 0: a transmitter coincides "
            "with a receiver"
        )
    gain = distance ** (-alpha)
    return float(gain) if gain.ndim == 0 else gain


def gain_matrix(realization: NetworkRealization, alpha: float) -> np.ndarray:
    """Path-loss gains of every ordered (tx k, rx i) pair."""
    return path_loss(realization.distances, alpha).reshape(
        realization.n_links, realization.n_links
    )


def draw_channel(
    n_links: int, stream: RngStream, fading: FadingModel
) -> SlotChannelDraw:
    """Draws one slot of i.i.d. unit-mean gains for every ordered pair."""
    if fading is FadingModel.NONE:
        return SlotChannelDraw(np.ones((n_links, n_links)))
    return SlotChannelDraw(stream.exponential(1.0, size=(n_links, n_links)))


def sinr(
    link_index: int,
    active_set: Iterable[int],
    realization: NetworkRealization,
    draw: SlotChannelDraw,
    noise_power: float,
    alpha: float,
) -> float:
    """
    Returns the SINR of an active link.

    Args:
        link_index (int): The link whose transmission is evaluated.
        active_set (Iterable[int]): Links transmitting in this slot; must
        contain `link_index`.
        realization (NetworkRealization): The deployment.
        draw (SlotChannelDraw): Gains of the slot.
        noise_power (float): Noise power.
        alpha (float): Path-loss exponent.

    Raises:
        ValueError: If the link itself is not active.

    Returns:
        float: The SINR, `inf` when both noise and interference vanish.
    """
    active = set(active_set)
    if link_index not in active:
        raise ValueError(f"link {link_index} is not active")
    distances = realization.distances
    signal = draw.gain(link_index, link_index) * path_loss(
        distances[link_index, link_index], alpha
    )
    interference = sum(
        draw.gain(k, link_index) * path_loss(distances[k, link_index], alpha)
        for k in active
        if k != link_index
    )
    denominator = noise_power + interference
    if denominator == 0:
        return float("inf")
    return signal / denominator


def attempt_success(sinr_value: float, theta: float) -> bool:
    """
    Decides a transmission attempt: success iff `sinr_value >= theta`.

    Examples:
        >>> attempt_success(1.0, 1.0)
        True
        >>> attempt_success(0.0, 1.0)
        False
        >>> attempt_success(float("inf"), 4.0)
        True
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    return bool(sinr_value >= theta)


def _activity_column(activity: np.ndarray, link_index: int) -> np.ndarray:
    column = activity if activity.ndim == 1 else activity[:, link_index]
    column = column.astype(float, copy=True)
    column[link_index] = 0.0
    return column


def _check_activity(activity, n_links: int) -> np.ndarray:
    activity = np.asarray(activity, dtype=float)
    if activity.shape not in {(n_links,), (n_links, n_links)}:
        raise ValueError(
            "activity must give one probability per link, or one per "
            "(interferer, receiver) pair"
        )
    if np.any((activity < 0) | (activity > 1)):
        raise ValueError("activity probabilities must lie in [0, 1]")
    return activity


def conditional_success_prob(
    link_index: int,
    realization: NetworkRealization,
    activity,
    mc_samples: int,
    stream: RngStream,
    config: ValidatedConfig,
) -> SuccessEstimate:
    """
    Estimates P(SINR >= θ) for one link by Monte Carlo.

    Each sample draws a fresh fading gain for every pair and an independent
    activity indicator for every other transmitter. The same numbers are
    drawn whatever the activity model, so two models evaluated on equal
    streams are compared with common random numbers.

    Args:
        link_index (int): The observed link.
        realization (NetworkRealization): The deployment.
        activity: Per-link activity probabilities, shape `(n,)`, or per
        (interferer, receiver) pair, shape `(n, n)`.
        mc_samples (int): Number of samples.
        stream (RngStream): The estimation stream of this link.
        config (ValidatedConfig): Supplies θ, α, noise and fading.

    Raises:
        EmptyRealizationError: If the realization has no links.
        ValueError: On invalid activity probabilities or sample count.

    Returns:
        SuccessEstimate: The estimate and its standard error.
    """
    if realization.is_empty:
        raise EmptyRealizationError("the realization has no links")
    if mc_samples < 1:
        raise ValueError("mc_samples must be at least 1")
    n = realization.n_links
    activity = _activity_column(_check_activity(activity, n), link_index)
    gains = path_loss(realization.distances[:, link_index], config.path_loss_exponent)
    gains = np.atleast_1d(gains)
    own_gain = gains[link_index]
    gains = gains.copy()
    gains[link_index] = 0.0

    block = max(1, _BLOCK_CELLS // n)
    successes = 0
    remaining = mc_samples
    while remaining:
        size = min(block, remaining)
        uniforms = stream.random((size, n))
        if config.fading is FadingModel.RAYLEIGH:
            fading = stream.exponential(1.0, size=(size, n))
        else:
            fading = np.ones((size, n))
        interference = ((uniforms < activity) * fading) @ gains
        signal = fading[:, link_index] * own_gain
        successes += int(
            np.count_nonzero(
                signal
                >= config.sinr_threshold * (config.noise_power + interference)
            )
        )
        remaining -= size

    probability = successes / mc_samples
    stderr = float(np.sqrt(probability * (1 - probability) / mc_samples))
    return SuccessEstimate(probability, stderr)


def rayleigh_success_probs(
    realization: NetworkRealization, activity, config: ValidatedConfig
) -> np.ndarray:
    """
    Exact success probability of every link under Rayleigh fading.

    With independent interferer activity the success probability factorizes:
    exp(-θ·N·r^α) · Π_k (1 - a_k + a_k / (1 + θ·g_k / g_0)), where g_0 is the
    desired link's path gain and g_k the gain from interferer k.

    Raises:
        EmptyRealizationError: If the realization has no links.
    """
    if realization.is_empty:
        raise EmptyRealizationError("the realization has no links")
    n = realization.n_links
    activity = _check_activity(activity, n)
    if activity.ndim == 1:
        activity = np.broadcast_to(activity[:, None], (n, n))
    activity = activity.copy()
    np.fill_diagonal(activity, 0.0)

    gains = gain_matrix(realization, config.path_loss_exponent)
    own = np.diag(gains)
    ratio = config.sinr_threshold * gains / own[None, :]
    log_factors = np.log1p(-activity * ratio / (1 + ratio))
    log_noise = -config.sinr_threshold * config.noise_power / own
    return np.exp(log_noise + log_factors.sum(axis=0))


def estimation_entity(realization_id: int, link_index: int) -> int:
    """Entity id of a link's estimation stream, unique across realizations."""
    return (realization_id << 32) | link_index


def success_probabilities(
    realization: NetworkRealization,
    activity,
    config: ValidatedConfig,
    *,
    estimator: SuccessEstimator = SuccessEstimator.MONTE_CARLO,
    mc_samples: int = 2000,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Success probability and standard error of every link.

    Monte-Carlo estimates draw from each link's own estimation stream, so
    repeated calls with different activity models use common random
    numbers. The exact estimator needs Rayleigh fading and silently falls
    back to Monte Carlo otherwise.

    Returns:
        tuple: `(probabilities, standard_errors)` arrays.
    """
    if realization.is_empty:
        raise EmptyRealizationError("the realization has no links")
    n = realization.n_links
    if (
        estimator is SuccessEstimator.RAYLEIGH_EXACT
        and config.fading is FadingModel.RAYLEIGH
    ):
        return rayleigh_success_probs(realization, activity, config), np.zeros(n)

    probabilities = np.empty(n)
    errors = np.empty(n)
    for link in range(n):
        stream = derive_stream(
            config.seed,
            "estimation",
            estimation_entity(realization.realization_id, link),
        )
        estimate = conditional_success_prob(
            link, realization, activity, mc_samples, stream, config
        )
        probabilities[link] = estimate.probability
        errors[link] = estimate.stderr
    return probabilities, errors
