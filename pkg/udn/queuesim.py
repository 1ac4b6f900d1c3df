"""
Slotted-time interacting-queues engine.

One slot runs in a fixed order: Bernoulli arrivals, ALOHA access draws,
active-set selection under the variant's rule, fading for every pair of
access-drawing links, SINR success decisions, queue updates.

Arrival and access uniforms are drawn for every link in every slot, and the
fading matrix covers every pair of links that drew access, whatever the
variant. Since every variant's active set is a subset of the access set, two
runs on streams derived from the same seed read identical numbers for
identical events; this is what couples the variants sample path by sample
path.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from udn.core import RngStream, ValidatedConfig, derive_stream
from udn.exceptions import EngineFault
from udn.geometry import nearest_interferers
from udn.models import (
    LinkQueueState,
    NetworkRealization,
    PerLinkStats,
    RunStats,
)
from udn.phy import draw_channel, gain_matrix
from udn.schemas import FadingModel, SystemVariant

logger = logging.getLogger(__name__)


@dataclass
class Streams:
    """The per-realization streams the engine draws from."""

    arrivals: RngStream
    access: RngStream
    fading: RngStream

    @classmethod
    def for_realization(cls, seed: int, realization_id: int) -> "Streams":
        return cls(
            arrivals=derive_stream(seed, "arrivals", realization_id),
            access=derive_stream(seed, "access", realization_id),
            fading=derive_stream(seed, "fading", realization_id),
        )


@dataclass
class QueueStates:
    """
    Queue state of every link.

    Counters are kept as arrays for the vectorized parts of a slot; the
    FIFOs hold arrival slots, one deque per link.
    """

    fifos: list[deque]
    head_attempts: np.ndarray
    delivered: np.ndarray
    dropped: np.ndarray
    arrivals: np.ndarray
    queue_len: np.ndarray

    @classmethod
    def empty(cls, n_links: int) -> "QueueStates":
        return cls(
            fifos=[deque() for _ in range(n_links)],
            head_attempts=np.zeros(n_links, dtype=np.int64),
            delivered=np.zeros(n_links, dtype=np.int64),
            dropped=np.zeros(n_links, dtype=np.int64),
            arrivals=np.zeros(n_links, dtype=np.int64),
            queue_len=np.zeros(n_links, dtype=np.int64),
        )

    @classmethod
    def backlogged(cls, n_links: int) -> "QueueStates":
        """Every link starts with a head-of-line packet that arrived at 0."""
        states = cls.empty(n_links)
        for fifo in states.fifos:
            fifo.append(0)
        states.arrivals[:] = 1
        states.queue_len[:] = 1
        return states

    def __len__(self) -> int:
        return len(self.fifos)

    def link(self, index: int) -> LinkQueueState:
        """Snapshot of one link's state."""
        return LinkQueueState(
            fifo=deque(self.fifos[index]),
            head_attempts=int(self.head_attempts[index]),
            delivered=int(self.delivered[index]),
            dropped=int(self.dropped[index]),
            arrivals=int(self.arrivals[index]),
        )

    def check(self, variant: SystemVariant) -> None:
        """
        Verifies conservation and FIFO bookkeeping for every link.

        Raises:
            EngineFault: On any inconsistency.
        """
        if np.any(
            self.arrivals != self.queue_len + self.delivered + self.dropped
        ):
            raise EngineFault("packet conservation violated")
        if variant is not SystemVariant.FAVORABLE_DROP and self.dropped.any():
            raise EngineFault(f"packets dropped under {variant.value}")
        lengths = np.fromiter(
            (len(fifo) for fifo in self.fifos), dtype=np.int64, count=len(self)
        )
        if np.any(lengths != self.queue_len):
            raise EngineFault("queue length out of sync with its FIFO")


@dataclass
class SlotEvents:
    """
    What happened in one slot.

    - **transmitting**: Links that sent a real packet.
    - **active**: Links radiating power (real or dummy packets).
    - **successes**: Links whose real packet was delivered.
    - **busy**: Links with a nonempty queue at the access decision.
    - **delays**: Delay recorded for each delivery, by link.
    """

    slot: int
    arrivals: np.ndarray
    access: np.ndarray
    transmitting: np.ndarray
    active: np.ndarray
    successes: np.ndarray
    dropped: np.ndarray
    busy: np.ndarray
    delays: dict[int, int] = field(default_factory=dict)


@dataclass
class EngineContext:
    """Quantities fixed for a whole run."""

    variant: SystemVariant
    gains: np.ndarray
    own_gains: np.ndarray
    observed: np.ndarray
    nearest: np.ndarray
    arrival_rate: float
    access_prob: float
    theta: float
    noise_power: float
    fading: FadingModel

    @classmethod
    def build(
        cls,
        config: ValidatedConfig,
        realization: NetworkRealization,
        variant: SystemVariant,
        observed: Optional[Iterable[int]] = None,
    ) -> "EngineContext":
        n = realization.n_links
        gains = gain_matrix(realization, config.path_loss_exponent)
        mask = np.ones(n, dtype=bool)
        if observed is not None:
            mask[:] = False
            mask[list(observed)] = True
        return cls(
            variant=variant,
            gains=gains,
            own_gains=np.diag(gains).copy(),
            observed=mask,
            nearest=nearest_interferers(realization),
            arrival_rate=config.arrival_rate,
            access_prob=config.access_prob,
            theta=config.sinr_threshold,
            noise_power=config.noise_power,
            fading=config.fading,
        )


def _interference_vectors(
    context: EngineContext,
    arrivals: np.ndarray,
    access: np.ndarray,
    transmitting: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Interferer activity seen by observed and by non-observed receivers.

    Returns two boolean vectors over all links; a receiver's own entry is
    ignored by the caller.
    """
    variant = context.variant
    if variant in (SystemVariant.DOMINANT, SystemVariant.BACKLOGGED):
        return access, access
    if variant is SystemVariant.FAVORABLE_DROP:
        dropping = access & arrivals
        mixed = np.where(context.observed, transmitting, dropping)
        return dropping, mixed
    return transmitting, transmitting


def step(
    states: QueueStates,
    realization: NetworkRealization,
    config: ValidatedConfig,
    variant: SystemVariant,
    slot_index: int,
    streams: Streams,
    context: Optional[EngineContext] = None,
    check: bool = False,
) -> tuple[QueueStates, SlotEvents]:
    """
    Advances every queue by one slot, in place.

    Args:
        states (QueueStates): Queue states at the start of the slot.
        realization (NetworkRealization): The deployment.
        config (ValidatedConfig): The experiment configuration.
        variant (SystemVariant): The system being simulated.
        slot_index (int): Index of this slot.
        streams (Streams): The realization's streams.
        context (EngineContext, optional): Precomputed run quantities.
        check (bool): Verify conservation before stepping.

    Raises:
        EngineFault: If the states are inconsistent with the realization.

    Returns:
        tuple: The updated states and the events of the slot.
    """
    n = realization.n_links
    if len(states) != n:
        raise EngineFault("queue states do not match the realization")
    if check:
        states.check(variant)
    if context is None:
        context = EngineContext.build(config, realization, variant)
    backlogged = variant is SystemVariant.BACKLOGGED
    favorable = variant is SystemVariant.FAVORABLE_DROP

    # (1) arrivals; drawn under every variant to keep the streams aligned
    arrivals = streams.arrivals.random(n) < context.arrival_rate
    if backlogged:
        arrivals[:] = False
    for link in np.flatnonzero(arrivals):
        states.fifos[link].append(slot_index)
    states.arrivals += arrivals
    states.queue_len += arrivals

    # (2) access
    access = streams.access.random(n) < context.access_prob

    # (3) active set
    nonempty = states.queue_len > 0
    transmitting = access & nonempty
    seen_by_observed, seen_by_others = _interference_vectors(
        context, arrivals, access, transmitting
    )
    active = seen_by_others | transmitting

    # (4) fading over every pair of access-drawing links
    drawn = np.flatnonzero(access)
    m = len(drawn)
    if m:
        fading = draw_channel(m, streams.fading, context.fading).gains
    else:
        fading = np.ones((0, 0))

    # (5) success decisions for links sending a real packet
    successes = np.zeros(n, dtype=bool)
    if m and transmitting.any():
        received = fading * context.gains[np.ix_(drawn, drawn)]
        signal = np.diag(received).copy()
        np.fill_diagonal(received, 0.0)

        if variant is SystemVariant.SIMPLIFIED_NEAREST:
            full = seen_by_others[drawn] @ received
            position = np.full(n, -1)
            position[drawn] = np.arange(m)
            nearest = context.nearest[drawn]
            nearest_pos = np.where(nearest >= 0, position[nearest], -1)
            simplified = np.where(
                nearest_pos >= 0,
                received[np.maximum(nearest_pos, 0), np.arange(m)],
                0.0,
            )
            interference = np.where(
                context.observed[drawn], simplified, full
            )
        elif favorable:
            interference = np.where(
                context.observed[drawn],
                seen_by_observed[drawn] @ received,
                seen_by_others[drawn] @ received,
            )
        else:
            interference = seen_by_others[drawn] @ received

        decided = signal >= context.theta * (
            context.noise_power + interference
        )
        successes[drawn] = decided
        successes &= transmitting

    # (6) queue updates
    events = SlotEvents(
        slot=slot_index,
        arrivals=arrivals,
        access=access,
        transmitting=transmitting,
        active=active,
        successes=successes,
        dropped=np.zeros(n, dtype=bool),
        busy=nonempty,
    )
    for link in np.flatnonzero(successes):
        fifo = states.fifos[link]
        arrived = fifo.popleft()
        events.delays[int(link)] = slot_index - arrived + 1
        states.delivered[link] += 1
        states.head_attempts[link] = 0
        if backlogged:
            fifo.append(slot_index + 1)
            states.arrivals[link] += 1
        else:
            states.queue_len[link] -= 1

    failed = transmitting & ~successes
    states.head_attempts += failed
    if favorable:
        # a non-observed packet lives exactly one slot
        lost = ~context.observed & arrivals & ~successes
        for link in np.flatnonzero(lost):
            states.fifos[link].popleft()
        states.dropped += lost
        states.queue_len -= lost
        states.head_attempts[~context.observed] = 0
        events.dropped = lost
    return states, events


def run(
    config: ValidatedConfig,
    realization: NetworkRealization,
    variant: Optional[SystemVariant] = None,
    streams: Optional[Streams] = None,
    *,
    horizon: Optional[int] = None,
    observed: Optional[Iterable[int]] = None,
    stride: Optional[int] = None,
) -> RunStats:
    """
    Simulates one realization over the horizon.

    Queues start empty (Backlogged: every link holds a packet). Under
    FavorableDrop and SimplifiedNearest each observed link is evaluated in
    its own decoupled system; by default every link is observed.

    Args:
        config (ValidatedConfig): The experiment configuration.
        realization (NetworkRealization): The deployment.
        variant (SystemVariant, optional): Defaults to `config.variant`.
        streams (Streams, optional): Defaults to the streams derived from
        `config.seed` and the realization id.
        horizon (int, optional): Overrides `config.horizon`; 0 is allowed.
        observed (Iterable[int], optional): Observed links.
        stride (int, optional): Overrides `config.queue_sample_stride`.

    Raises:
        EngineFault: On any bookkeeping inconsistency.

    Returns:
        RunStats: Per-link statistics.
    """
    variant = variant or config.variant
    horizon = config.horizon if horizon is None else horizon
    stride = stride or config.queue_sample_stride
    streams = streams or Streams.for_realization(
        config.seed, realization.realization_id
    )
    n = realization.n_links
    backlogged = variant is SystemVariant.BACKLOGGED
    states = QueueStates.backlogged(n) if backlogged else QueueStates.empty(n)
    context = EngineContext.build(config, realization, variant, observed)

    delays: list[list[int]] = [[] for _ in range(n)]
    completions: list[list[int]] = [[] for _ in range(n)]
    attempts = np.zeros(n, dtype=np.int64)
    busy = np.zeros(n, dtype=np.int64)
    sample_slots = np.arange(0, horizon, stride)
    samples = np.zeros((len(sample_slots), n), dtype=np.int64)
    next_sample = 0

    logger.debug(
        "running %s on realization %d: %d links, %d slots",
        variant.value,
        realization.realization_id,
        n,
        horizon,
    )
    for slot in range(horizon):
        states, events = step(
            states, realization, config, variant, slot, streams, context
        )
        attempts += events.transmitting
        busy += events.busy
        for link, delay in events.delays.items():
            delays[link].append(delay)
            completions[link].append(slot)
        if slot % stride == 0:
            states.check(variant)
            samples[next_sample] = states.queue_len
            next_sample += 1

    return RunStats(
        realization_id=realization.realization_id,
        variant=variant,
        horizon=horizon,
        sample_slots=sample_slots,
        links=[
            _link_stats(
                link,
                states,
                delays,
                completions,
                attempts,
                busy,
                samples,
                horizon,
            )
            for link in range(n)
        ],
    )


def _link_stats(
    link: int,
    states: QueueStates,
    delays: list[list[int]],
    completions: list[list[int]],
    attempts: np.ndarray,
    busy: np.ndarray,
    samples: np.ndarray,
    horizon: int,
) -> PerLinkStats:
    delivered = np.asarray(delays[link], dtype=np.int64)
    residual = horizon - np.fromiter(states.fifos[link], dtype=np.int64)
    return PerLinkStats(
        link_id=link,
        delays=delivered,
        completion_slots=np.asarray(completions[link], dtype=np.int64),
        sojourns=np.concatenate((delivered, residual)),
        attempts=int(attempts[link]),
        successes=int(states.delivered[link]),
        dropped=int(states.dropped[link]),
        busy_slots=int(busy[link]),
        final_queue_len=int(states.queue_len[link]),
        queue_samples=samples[:, link].copy(),
    )


@dataclass
class LocalDelayStats:
    """Per-link time-to-success moments of a Backlogged run."""

    means: np.ndarray
    variances: np.ndarray
    counts: np.ndarray
    censored: np.ndarray

    @property
    def stderrs(self) -> np.ndarray:
        """Standard error of each per-link mean."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.sqrt(self.variances / self.counts)


def local_delay_stats(
    stats: RunStats, until: Optional[int] = None
) -> LocalDelayStats:
    """
    Sample mean and variance of every link's time-to-success.

    Args:
        stats (RunStats): Statistics of a Backlogged run.
        until (int, optional): Only count deliveries completed before this
        slot, i.e. evaluate the run as if its horizon were `until`.

    Raises:
        ValueError: If the run is not Backlogged.

    Returns:
        LocalDelayStats: Links without a success are flagged censored and
        carry NaN moments.
    """
    if stats.variant is not SystemVariant.BACKLOGGED:
        raise ValueError("local delay is defined on Backlogged runs only")
    n = len(stats)
    means = np.full(n, np.nan)
    variances = np.full(n, np.nan)
    counts = np.zeros(n, dtype=np.int64)
    for index, link in enumerate(stats):
        delays = link.delays
        if until is not None:
            delays = delays[link.completion_slots < until]
        counts[index] = len(delays)
        if len(delays):
            means[index] = delays.mean()
            variances[index] = delays.var(ddof=1) if len(delays) > 1 else 0.0
    return LocalDelayStats(
        means=means, variances=variances, counts=counts, censored=counts == 0
    )


def busy_fraction(runs: Iterable[RunStats]) -> float:
    """Pooled fraction of link-slots with a nonempty queue."""
    busy = 0
    total = 0
    for stats in runs:
        busy += sum(link.busy_slots for link in stats)
        total += stats.horizon * len(stats)
    return busy / total if total else 0.0
