"""Discrete-event engine and abstract propagation connecting the UEs.

Time is an integer slot counter. Power is dBm end to end; path loss is
log-distance with optional seeded Gaussian shadowing. Collisions use a
capture model: of two same-slot transmissions with overlapping
subchannel spans, the stronger survives only if it exceeds the weaker
by at least the capture threshold, otherwise both are destroyed. The
capture contest applies to the data/control grid (PSSCH, PSCCH);
broadcast sync and feedback bursts ride dedicated resources and are
arbitrated by their own procedures instead.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable


class Channel(Enum):
    PSBCH = "PSBCH"  # sync broadcast
    PSCCH = "PSCCH"  # first-stage control
    PSSCH = "PSSCH"  # data (control piggybacked)
    PSFCH = "PSFCH"  # HARQ feedback

    # channels taking part in the subchannel-grid capture contest
    @property
    def on_data_grid(self) -> bool:
        return self in (Channel.PSCCH, Channel.PSSCH)


@dataclass
class SimClock:
    current_slot: int = 0
    slot_duration_ms: float = 1.0
    slots_per_frame: int = 10

    @property
    def direct_frame_number(self) -> int:
        return (self.current_slot // self.slots_per_frame) % 1024

    @property
    def slot_in_frame(self) -> int:
        return self.current_slot % self.slots_per_frame

    def advance_to(self, slot: int):
        if slot < self.current_slot:
            raise ValueError(f"clock cannot move back to {slot} from {self.current_slot}")
        self.current_slot = slot

    def slots_from_ms(self, ms: float) -> int:
        return max(1, round(ms / self.slot_duration_ms))


@dataclass
class ChannelModel:
    reference_loss_db: float = 46.7
    path_loss_exponent: float = 2.7
    noise_floor_dbm: float = -110.0
    shadowing_sigma_db: float = 0.0
    capture_threshold_db: float = 3.0
    tb_error_rate: float = 0.0

    def __post_init__(self):
        if self.path_loss_exponent < 2:
            raise ValueError(f"path loss exponent {self.path_loss_exponent} below 2")
        if not 0 <= self.tb_error_rate <= 1:
            raise ValueError(f"tb_error_rate {self.tb_error_rate} outside [0, 1]")


def rsrp_at(tx_power_dbm: float, distance_m: float, model: ChannelModel) -> float:
    """Received power from log-distance path loss, no fading."""
    if distance_m <= 0:
        raise ValueError(f"distance {distance_m} must be positive")
    return (
        tx_power_dbm
        - model.reference_loss_db
        - 10.0 * model.path_loss_exponent * math.log10(distance_m)
    )


@dataclass
class Transmission:
    sender_id: int
    tx_power_dbm: float
    slot: int
    channel: Channel
    payload: Any
    subchannel_range: tuple[int, int] | None = None  # (start, length)
    seq: int = 0  # emission order within the run, set by the world

    def __post_init__(self):
        declared = getattr(self.payload, "CHANNEL", None)
        if declared is not None and declared != self.channel.value:
            raise ValueError(
                f"payload for {declared} cannot ride {self.channel.value}"
            )
        if self.subchannel_range is not None:
            start, length = self.subchannel_range
            if start < 0 or length < 1:
                raise ValueError(f"bad subchannel range {self.subchannel_range}")

    def overlaps(self, other: "Transmission") -> bool:
        if self.subchannel_range is None or other.subchannel_range is None:
            return False
        a0, alen = self.subchannel_range
        b0, blen = other.subchannel_range
        return a0 < b0 + blen and b0 < a0 + alen


@dataclass
class Reception:
    transmission: Transmission
    rsrp_dbm: float


@dataclass
class CollisionRecord:
    receiver_id: int
    slot: int
    destroyed_seqs: tuple[int, ...]


def deliver(
    transmissions: list[Transmission],
    positions: dict[int, tuple[float, float]],
    model: ChannelModel,
    rng: random.Random,
) -> tuple[dict[int, list[Reception]], list[CollisionRecord]]:
    """Propagate one slot's transmissions to every other node.

    Returns receptions per receiver (in transmission emission order)
    and the collision records for destroyed data-grid receptions.
    Shadowing is drawn once per (transmission, receiver) pair in a
    fixed iteration order so runs stay reproducible.
    """
    raw: dict[int, list[Reception]] = {uid: [] for uid in positions}
    for tx in transmissions:
        sx, sy = positions[tx.sender_id]
        for uid in positions:
            if uid == tx.sender_id:
                continue
            rx, ry = positions[uid]
            distance = math.hypot(rx - sx, ry - sy)
            # co-location guard: the pure formula rejects zero distance
            distance = max(distance, 1e-3)
            level = rsrp_at(tx.tx_power_dbm, distance, model)
            if model.shadowing_sigma_db > 0:
                level += rng.gauss(0.0, model.shadowing_sigma_db)
            if level > model.noise_floor_dbm:
                raw[uid].append(Reception(tx, level))

    collisions: list[CollisionRecord] = []
    out: dict[int, list[Reception]] = {}
    for uid, recs in raw.items():
        contested = [r for r in recs if r.transmission.channel.on_data_grid]
        destroyed: set[int] = set()
        for i in range(len(contested)):
            for j in range(i + 1, len(contested)):
                a, b = contested[i], contested[j]
                if not a.transmission.overlaps(b.transmission):
                    continue
                weak, strong = sorted((a, b), key=lambda r: r.rsrp_dbm)
                destroyed.add(weak.transmission.seq)
                if strong.rsrp_dbm - weak.rsrp_dbm < model.capture_threshold_db:
                    destroyed.add(strong.transmission.seq)
        if destroyed:
            collisions.append(
                CollisionRecord(uid, contested[0].transmission.slot, tuple(sorted(destroyed)))
            )
        out[uid] = [r for r in recs if r.transmission.seq not in destroyed]
    return out, collisions


@dataclass(order=True)
class _QueuedEvent:
    slot: int
    seq: int
    label: str = field(compare=False)
    action: Callable[[], None] = field(compare=False)


class EventQueue:
    """Slot-ordered event queue; equal-slot events fire in insertion order."""

    def __init__(self, clock: SimClock):
        self.clock = clock
        self._heap: list[_QueuedEvent] = []
        self._seq = 0
        self.processed = 0

    def schedule(self, slot: int, label: str, action: Callable[[], None]):
        if slot < self.clock.current_slot:
            raise ValueError(
                f"cannot schedule {label!r} at {slot}, clock is at {self.clock.current_slot}"
            )
        heapq.heappush(self._heap, _QueuedEvent(slot, self._seq, label, action))
        self._seq += 1

    def run_until(self, slot: int) -> int:
        """Process everything due through `slot`; returns event count."""
        ran = 0
        while self._heap and self._heap[0].slot <= slot:
            ev = heapq.heappop(self._heap)
            self.clock.advance_to(ev.slot)
            ev.action()
            ran += 1
        self.clock.advance_to(slot)
        self.processed += ran
        return ran

    def __len__(self) -> int:
        return len(self._heap)


def child_rng(seed: int, label: str) -> random.Random:
    """Independent deterministic stream for one component of a run."""
    return random.Random(f"{seed}:{label}")
