"""Sensing-based resource selection over a subchannel x slot grid.

A claim heard at slot t0 with reservation interval r (in slots) blocks
cell (t, sc) of the selection window iff

    exists k in 0..missRefreshLimit:
        d = t0 + k*r - t,  d >= 0  and  d % P == 0

with P = slotsPerSelectionWindow, the period at which the pool grid
recurs. The k bound makes an unrefreshed claim lapse after
missRefreshLimit periods; the modulo term says a candidate slot stands
for a transmission position recurring every P, which is what collides
with the claim's later occurrences. For r below the window length this
yields the plain occurrence list (e.g. slots 5, 105, 205 for t0=5,
r=100, window 300); for r a multiple of P it gives the claim continuous
ownership of its pool position until it lapses.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .frames import Sci1A, fra_decode, fra_encode, tra_decode, tra_encode

MISS_REFRESH_LIMIT = 2  # claims lapse after this many missed refresh periods
RESELECTION_COUNTER_RANGE = (5, 15)


class GrantExhausted(Exception):
    """Mode-1 scheduler has no free cells left for the request."""


@dataclass
class ResourcePool:
    num_subchannels: int
    slots_per_selection_window: int
    period_list_ms: list[int]
    sl_max_num_per_reserve: int = 2
    sensing_window_slots: int = 1100
    rsrp_exclusion_threshold_dbm: float = -100.0
    slot_duration_ms: float = 1.0
    min_candidate_ratio: float = 0.2
    threshold_step_db: float = 3.0
    # SCI 1-A codec knobs
    dmrs_patterns: list[int] = field(default_factory=lambda: [0])
    additional_mcs_tables: int = 0
    psfch_period: int = 4
    num_reserved_bits: int = 2

    def __post_init__(self):
        if self.num_subchannels < 1:
            raise ValueError("pool needs at least one subchannel")
        if self.slots_per_selection_window < 1:
            raise ValueError("selection window must be at least one slot")
        if not self.period_list_ms:
            raise ValueError("period list must not be empty")
        if max(self.period_list_ms) > 1000:
            raise ValueError(f"period list max {max(self.period_list_ms)} exceeds 1000 ms")
        if 1000 not in self.period_list_ms:
            raise ValueError("period list must include 1000 ms")
        if self.sl_max_num_per_reserve not in (2, 3):
            raise ValueError("sl_max_num_per_reserve must be 2 or 3")
        if self.additional_mcs_tables not in (0, 1, 2):
            raise ValueError("additional_mcs_tables must be 0, 1 or 2")
        if not 2 <= self.num_reserved_bits <= 4:
            raise ValueError("num_reserved_bits must be 2..4")
        for rri in self.period_list_ms:
            if self.rri_slots(rri) * self.slot_duration_ms != rri:
                raise ValueError(f"rri {rri} ms is not a whole number of slots")

    def rri_slots(self, rri_ms: int) -> int:
        return round(rri_ms / self.slot_duration_ms)

    @property
    def total_cells(self) -> int:
        return self.num_subchannels * self.slots_per_selection_window


@dataclass
class Reservation:
    """One projected occurrence stream decoded from a claim."""

    source_id: int
    subchannel_start: int
    subchannel_len: int
    start_slot: int
    rri_slots: int
    priority: int
    observed_rsrp_dbm: float

    @property
    def expiry_slot(self) -> int:
        return self.start_slot + MISS_REFRESH_LIMIT * self.rri_slots

    def blocks_slot(self, slot: int, pool_period: int) -> bool:
        for k in range(MISS_REFRESH_LIMIT + 1):
            d = self.start_slot + k * self.rri_slots - slot
            if d >= 0 and d % pool_period == 0:
                return True
        return False

    def subchannels(self) -> range:
        return range(self.subchannel_start, self.subchannel_start + self.subchannel_len)


@dataclass
class ControlBurst:
    """A standalone first-stage announcement (no data attached)."""

    CHANNEL = "PSCCH"

    sci1_bits: object  # BitString, decoded against the receiver's pool


@dataclass
class OccupancyMap:
    """Blocked cells over one selection window, with re-sense inputs."""

    pool: ResourcePool
    window_start: int
    threshold_dbm: float
    reservations: list[Reservation]
    skipped_scis: int = 0

    @property
    def window(self) -> range:
        return range(self.window_start, self.window_start + self.pool.slots_per_selection_window)

    def blocked_cells(self) -> set[tuple[int, int]]:
        period = self.pool.slots_per_selection_window
        out: set[tuple[int, int]] = set()
        for res in self.reservations:
            for slot in self.window:
                if res.blocks_slot(slot, period):
                    for sc in res.subchannels():
                        out.add((slot, sc))
        return out

    def occupancy(self) -> dict[tuple[int, int], list[Reservation]]:
        period = self.pool.slots_per_selection_window
        out: dict[tuple[int, int], list[Reservation]] = {}
        for res in self.reservations:
            for slot in self.window:
                if res.blocks_slot(slot, period):
                    for sc in res.subchannels():
                        out.setdefault((slot, sc), []).append(res)
        return out


def claims_from_sci(sci: Sci1A, pool: ResourcePool, rsrp: float, slot: int,
                    source_id: int = -1) -> list[Reservation]:
    """Expand a decoded SCI 1-A into its reserved occurrence streams.

    The first occurrence sits at the announcement slot on the claim's
    primary span; later same-period occurrences (time gaps) reuse that
    span for two-per-reserve pools and the secondary start for
    three-per-reserve pools.
    """
    start, length, start2 = fra_decode(
        pool.num_subchannels, pool.sl_max_num_per_reserve, sci.frequency_resource
    )
    gaps = tra_decode(pool.sl_max_num_per_reserve, sci.time_resource)
    rri = pool.rri_slots(pool.period_list_ms[sci.rri_index])
    later_start = start if pool.sl_max_num_per_reserve == 2 else start2
    claims = [Reservation(source_id, start, length, slot, rri, sci.priority, rsrp)]
    for gap in gaps:
        claims.append(
            Reservation(source_id, later_start, length, slot + gap, rri, sci.priority, rsrp)
        )
    return claims


def sense(
    received: list[tuple[Sci1A | None, float, int]],
    pool: ResourcePool,
    window_start: int,
    threshold_dbm: float | None = None,
    source_ids: list[int] | None = None,
) -> OccupancyMap:
    """Project heard claims onto the upcoming selection window.

    received holds (sci, rsrp, slot) per decoded announcement; a None
    sci stands for an undecodable one and is skipped but counted.
    Claims below the exclusion threshold are ignored.
    """
    threshold = pool.rsrp_exclusion_threshold_dbm if threshold_dbm is None else threshold_dbm
    reservations: list[Reservation] = []
    skipped = 0
    for idx, (sci, rsrp, slot) in enumerate(received):
        if sci is None:
            skipped += 1
            continue
        if rsrp < threshold:
            continue
        src = source_ids[idx] if source_ids else -1
        reservations.extend(claims_from_sci(sci, pool, rsrp, slot, src))
    live = [r for r in reservations if r.expiry_slot >= window_start]
    return OccupancyMap(pool, window_start, threshold, live, skipped)


@dataclass
class Selection:
    slot: int
    subchannel_start: int
    subchannel_len: int
    candidate_count: int
    total_positions: int
    threshold_dbm: float

    @property
    def candidate_ratio(self) -> float:
        return self.candidate_count / self.total_positions


def candidate_positions(pool: ResourcePool, occ: OccupancyMap, demand: int) -> list[tuple[int, int]]:
    """All (slot, start) spans of `demand` subchannels avoiding blocked cells."""
    blocked = occ.blocked_cells()
    out = []
    for slot in occ.window:
        for start in range(pool.num_subchannels - demand + 1):
            if all((slot, sc) not in blocked for sc in range(start, start + demand)):
                out.append((slot, start))
    return out


def select_resources(
    pool: ResourcePool,
    occ: OccupancyMap,
    demand: int,
    rng: random.Random,
) -> Selection:
    """Pick a transmission cell uniformly from the unblocked candidates.

    When fewer than min_candidate_ratio of the positions are free, the
    exclusion threshold rises step by step and the same heard claims
    are re-projected, dropping the weakest first, until enough
    candidates exist.
    """
    if demand < 1 or demand > pool.num_subchannels:
        raise ValueError(f"demand {demand} impossible on {pool.num_subchannels} subchannels")
    total = pool.slots_per_selection_window * (pool.num_subchannels - demand + 1)
    threshold = occ.threshold_dbm
    current = occ
    while True:
        cands = candidate_positions(pool, current, demand)
        if cands and (len(cands) / total >= pool.min_candidate_ratio
                      or not current.reservations):
            break
        if not current.reservations:
            break  # nothing left to drop; window is structurally full
        threshold += pool.threshold_step_db
        kept = [r for r in current.reservations if r.observed_rsrp_dbm >= threshold]
        current = replace(current, threshold_dbm=threshold, reservations=kept)
    slot, start = rng.choice(cands)
    return Selection(slot, start, demand, len(cands), total, threshold)


def announce(selection: Selection, rri_ms: int, priority: int, pool: ResourcePool,
             mcs: int = 9) -> Sci1A:
    """SCI 1-A whose decoded claim equals the selection."""
    if rri_ms not in pool.period_list_ms:
        raise ValueError(f"rri {rri_ms} ms not in pool period list {pool.period_list_ms}")
    return Sci1A(
        priority=priority,
        frequency_resource=fra_encode(
            pool.num_subchannels,
            pool.sl_max_num_per_reserve,
            selection.subchannel_start,
            selection.subchannel_len,
            selection.subchannel_start,
        ),
        time_resource=tra_encode(pool.sl_max_num_per_reserve, ()),
        rri_index=pool.period_list_ms.index(rri_ms),
        mcs=mcs,
    )


def draw_reselection_counter(rng: random.Random) -> int:
    lo, hi = RESELECTION_COUNTER_RANGE
    return rng.randint(lo, hi)


class Mode1Scheduler:
    """gNodeB-side grant stub: authoritative first-fit over the grid."""

    def __init__(self, pool: ResourcePool):
        self.pool = pool
        self.registered: set[int] = set()
        self.grants: dict[tuple[int, int], int] = {}  # (slot, subchannel) -> ue

    def register(self, ue_id: int):
        self.registered.add(ue_id)

    def grant(self, ue_id: int, demand: int) -> Selection:
        if ue_id not in self.registered:
            raise ValueError(f"ue {ue_id} not registered in coverage")
        if demand < 1 or demand > self.pool.num_subchannels:
            raise ValueError(f"demand {demand} impossible")
        for slot in range(self.pool.slots_per_selection_window):
            for start in range(self.pool.num_subchannels - demand + 1):
                span = [(slot, sc) for sc in range(start, start + demand)]
                if all(cell not in self.grants for cell in span):
                    for cell in span:
                        self.grants[cell] = ue_id
                    total = self.pool.slots_per_selection_window * (
                        self.pool.num_subchannels - demand + 1
                    )
                    return Selection(slot, start, demand, 0, total, float("-inf"))
        raise GrantExhausted(f"no span of {demand} subchannels free")

    def release(self, ue_id: int):
        self.grants = {cell: ue for cell, ue in self.grants.items() if ue != ue_id}
