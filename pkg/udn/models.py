from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import pandas as pd

from udn import storage
from udn.exceptions import EngineFault
from udn.schemas import SystemVariant


class TableMixin:
    """Base for domain objects that can be dumped as CSV."""

    def to_frame(self) -> pd.DataFrame:
        raise NotImplementedError

    def save(self, path: str | Path) -> Path:
        """Saves the current object as CSV."""
        return storage.save_frame(self.to_frame(), path)


@dataclass(frozen=True, eq=False)
class NetworkRealization(TableMixin):
    """
    One static deployment of transmitter-receiver pairs on a torus.

    `tx` and `rx` are `(n, 2)` arrays of coordinates in `[0, window_side)`;
    row `i` of both arrays is link `i`.
    """

    tx: np.ndarray
    rx: np.ndarray
    window_side: float
    link_distance: float
    realization_id: int = 0

    @property
    def n_links(self) -> int:
        return len(self.tx)

    @property
    def is_empty(self) -> bool:
        return self.n_links == 0

    @cached_property
    def distances(self) -> np.ndarray:
        """Toroidal distance matrix, entry `[k, i]` from tx k to rx i."""
        from udn.geometry import pairwise_toroidal_distance

        return pairwise_toroidal_distance(self.tx, self.rx, self.window_side)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "realization_id": np.full(self.n_links, self.realization_id),
                "link_id": np.arange(self.n_links),
                "tx_x": self.tx[:, 0],
                "tx_y": self.tx[:, 1],
                "rx_x": self.rx[:, 0],
                "rx_y": self.rx[:, 1],
            }
        )


@dataclass
class LinkQueueState:
    """
    FIFO of packet arrival slots for one link.

    `arrivals` counts every packet ever enqueued, so that at every slot
    `arrivals == len(fifo) + delivered + dropped`.
    """

    fifo: deque = field(default_factory=deque)
    head_attempts: int = 0
    delivered: int = 0
    dropped: int = 0
    arrivals: int = 0

    @property
    def queue_length(self) -> int:
        return len(self.fifo)

    def check(self, variant: SystemVariant) -> None:
        """
        Verifies the per-link invariants.

        Raises:
            EngineFault: If any invariant is breached.
        """
        if self.arrivals != self.queue_length + self.delivered + self.dropped:
            raise EngineFault("packet conservation violated")
        if self.dropped and variant is not SystemVariant.FAVORABLE_DROP:
            raise EngineFault(f"packets dropped under {variant.value}")
        slots = list(self.fifo)
        if any(a > b for a, b in zip(slots, slots[1:])):
            raise EngineFault("FIFO order violated")


@dataclass
class PerLinkStats:
    """
    Delivery statistics of one link over one run.

    - **delays**: End-to-end delay of every delivered packet, arrival slot to
      success slot inclusive (Backlogged: slots from becoming head of line).
    - **completion_slots**: Slot of each delivery.
    - **sojourns**: For every packet that arrived, its delay truncated at the
      horizon; undelivered packets count their age at the last slot.
    - **queue_samples**: Queue length at the end of every sampled slot.
    """

    link_id: int
    delays: np.ndarray
    completion_slots: np.ndarray
    sojourns: np.ndarray
    attempts: int
    successes: int
    dropped: int
    busy_slots: int
    final_queue_len: int
    queue_samples: np.ndarray
    stable: bool | None = None

    @property
    def delivered(self) -> int:
        return len(self.delays)

    @property
    def censored(self) -> bool:
        return self.delivered == 0

    @property
    def mean_delay(self) -> float:
        return float(self.delays.mean()) if self.delivered else float("nan")

    @property
    def var_delay(self) -> float:
        if self.delivered < 2:
            return float("nan")
        return float(self.delays.var(ddof=1))

    @property
    def truncated_mean(self) -> float:
        """Mean horizon-truncated sojourn over every arrived packet."""
        if not len(self.sojourns):
            return float("nan")
        return float(self.sojourns.mean())


@dataclass
class RunStats(TableMixin):
    """Per-link statistics for every link of one simulation run."""

    realization_id: int
    variant: SystemVariant
    horizon: int
    sample_slots: np.ndarray
    links: list[PerLinkStats]

    def __len__(self) -> int:
        return len(self.links)

    def __iter__(self):
        return iter(self.links)

    def __getitem__(self, index: int) -> PerLinkStats:
        return self.links[index]

    @property
    def queue_matrix(self) -> np.ndarray:
        """Queue samples as a `(samples, links)` array."""
        if not self.links:
            return np.zeros((len(self.sample_slots), 0), dtype=np.int64)
        return np.column_stack([link.queue_samples for link in self.links])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "realization_id": [self.realization_id] * len(self.links),
                "link_id": [link.link_id for link in self.links],
                "delivered": [link.delivered for link in self.links],
                "dropped": [link.dropped for link in self.links],
                "mean_delay": [link.mean_delay for link in self.links],
                "var_delay": [link.var_delay for link in self.links],
                "censored_flag": [int(link.censored) for link in self.links],
                "final_queue_len": [
                    link.final_queue_len for link in self.links
                ],
            },
            columns=[
                "realization_id",
                "link_id",
                "delivered",
                "dropped",
                "mean_delay",
                "var_delay",
                "censored_flag",
                "final_queue_len",
            ],
        )


@dataclass
class CdfEstimate(TableMixin):
    """
    Empirical distribution of per-link mean delays.

    Censored links carry their mass above the grid, so the cdf at the end of
    the grid never exceeds `1 - censored_fraction`.
    """

    means: np.ndarray
    censored: int
    total: int
    grid: np.ndarray

    @property
    def censored_fraction(self) -> float:
        return self.censored / self.total if self.total else 0.0

    def evaluate(self, t: float | np.ndarray) -> np.ndarray:
        """
        Returns the right-continuous cdf at `t`.

        Examples:
            >>> import numpy as np
            >>> est = CdfEstimate(np.array([1.0, 2.0, 2.0]), 1, 4, np.array([]))
            >>> est.evaluate(np.array([0.5, 1.0, 2.0, 9.0])).tolist()
            [0.0, 0.25, 0.75, 0.75]
        """
        if not self.total:
            return np.zeros_like(np.asarray(t, dtype=float))
        counts = np.searchsorted(self.means, t, side="right")
        return counts / self.total

    @property
    def cdf(self) -> np.ndarray:
        return self.evaluate(self.grid)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "grid_t": self.grid,
                "cdf": self.cdf,
                "censored_fraction": np.full(
                    len(self.grid), self.censored_fraction
                ),
            }
        )
