"""Poisson bipolar deployments on a torus."""

import logging
from typing import Optional, Sequence

import numpy as np

from udn.core import RngStream, ValidatedConfig
from udn.exceptions import EmptyRealizationError
from udn.models import NetworkRealization

logger = logging.getLogger(__name__)


def sample_bipolar(
    config: ValidatedConfig, stream: RngStream, realization_id: int = 0
) -> NetworkRealization:
    """
    Samples one Poisson bipolar deployment.

    The transmitter count is Poisson with mean λ·L², transmitters are uniform
    on the window, and each receiver sits at distance r from its transmitter
    in a uniformly random direction, wrapped onto the torus.

    Args:
        config (ValidatedConfig): The experiment configuration.
        stream (RngStream): The geometry stream of this realization.
        realization_id (int): Id recorded on the realization.

    Returns:
        NetworkRealization: The deployment; possibly empty.
    """
    side = config.window_side
    count = int(stream.poisson(config.intensity * side**2))
    tx = stream.uniform(0.0, side, size=(count, 2))
    angles = stream.uniform(0.0, 2 * np.pi, size=count)
    offsets = config.link_distance * np.column_stack(
        (np.cos(angles), np.sin(angles))
    )
    rx = np.mod(tx + offsets, side)
    # mod can round up to exactly `side` for tiny negative inputs
    rx[rx >= side] = 0.0
    if count == 0:
        logger.warning("realization %d is empty", realization_id)
    return NetworkRealization(
        tx=tx,
        rx=rx,
        window_side=side,
        link_distance=config.link_distance,
        realization_id=realization_id,
    )


def from_links(
    links: Sequence[tuple[Sequence[float], Sequence[float]]],
    window_side: float,
    realization_id: int = 0,
) -> NetworkRealization:
    """
    Builds a realization from explicit (tx, rx) pairs.

    The link distance is taken from the first pair; all pairs must share it.
    """
    tx = np.array([pair[0] for pair in links], dtype=float).reshape(-1, 2)
    rx = np.array([pair[1] for pair in links], dtype=float).reshape(-1, 2)
    lengths = [
        toroidal_distance(t, r, window_side) for t, r in zip(tx, rx)
    ]
    if lengths and not np.allclose(lengths, lengths[0]):
        raise ValueError("all links must have the same length")
    return NetworkRealization(
        tx=tx,
        rx=rx,
        window_side=window_side,
        link_distance=float(lengths[0]) if lengths else 0.0,
        realization_id=realization_id,
    )


def toroidal_distance(a, b, window_side: float) -> float:
    """
    Returns the distance between two points on the torus.

    Examples:
        >>> toroidal_distance((0, 0), (99, 0), 100)
        1.0
        >>> toroidal_distance((3, 4), (3, 4), 100)
        0.0
    """
    delta = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    delta = np.minimum(delta, window_side - delta)
    return float(np.hypot(delta[0], delta[1]))


def pairwise_toroidal_distance(
    sources: np.ndarray, targets: np.ndarray, window_side: float
) -> np.ndarray:
    """Distance matrix, entry `[k, i]` from `sources[k]` to `targets[i]`."""
    delta = np.abs(sources[:, None, :] - targets[None, :, :])
    delta = np.minimum(delta, window_side - delta)
    return np.hypot(delta[..., 0], delta[..., 1])


def nearest_interferer(
    link_index: int, realization: NetworkRealization
) -> tuple[Optional[int], float]:
    """
    Finds the transmitter, other than the link's own, closest to its receiver.

    Ties are broken by the lowest index.

    Args:
        link_index (int): The observed link.
        realization (NetworkRealization): The deployment.

    Raises:
        EmptyRealizationError: If the realization has no links.
        IndexError: If the link does not exist.

    Returns:
        tuple: `(interferer_index, distance)`, or `(None, inf)` when the link
        is alone in the network.
    """
    if realization.is_empty:
        raise EmptyRealizationError("the realization has no links")
    if not 0 <= link_index < realization.n_links:
        raise IndexError(f"no link {link_index}")
    if realization.n_links == 1:
        return None, float("inf")
    column = realization.distances[:, link_index].copy()
    column[link_index] = np.inf
    index = int(np.argmin(column))
    return index, float(column[index])


def nearest_interferers(realization: NetworkRealization) -> np.ndarray:
    """
    Nearest-interferer index of every link, -1 for a lone link.

    Vectorized counterpart of `nearest_interferer`.
    """
    n = realization.n_links
    if n < 2:
        return np.full(n, -1, dtype=np.int64)
    distances = realization.distances.copy()
    np.fill_diagonal(distances, np.inf)
    return np.argmin(distances, axis=0).astype(np.int64)
