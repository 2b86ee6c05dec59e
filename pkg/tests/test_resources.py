"""Occupancy projection, candidate filtering, and selection fallback."""

import random

import pytest

from sidelinksim.frames import Sci1A, fra_encode, tra_encode
from sidelinksim.resources import (
    GrantExhausted,
    Mode1Scheduler,
    OccupancyMap,
    Reservation,
    ResourcePool,
    Selection,
    announce,
    candidate_positions,
    claims_from_sci,
    draw_reselection_counter,
    select_resources,
    sense,
)

POOL = ResourcePool(4, 10, [100, 1000])
POOL3 = ResourcePool(10, 20, [20, 50, 100, 1000], sl_max_num_per_reserve=3)


def res(start_slot, rri, sc=0, width=1, rsrp=-60.0, src=-1, prio=1):
    return Reservation(src, sc, width, start_slot, rri, prio, rsrp)


def test_pool_validation():
    with pytest.raises(ValueError):
        ResourcePool(0, 10, [1000])
    with pytest.raises(ValueError):
        ResourcePool(4, 10, [100])  # missing the mandatory 1000 ms entry
    with pytest.raises(ValueError):
        ResourcePool(4, 10, [1000, 2000])
    with pytest.raises(ValueError):
        ResourcePool(4, 10, [1000], sl_max_num_per_reserve=4)
    assert POOL.rri_slots(100) == 100
    assert POOL.total_cells == 40


def test_blocks_slot_hand_cases():
    r = res(5, 100)
    # k=0 projects slot 5 and every earlier slot congruent mod 10
    assert r.blocks_slot(5, 10)
    assert r.blocks_slot(105, 10)   # k=1 exact hit
    assert r.blocks_slot(205, 10)   # k=2 exact hit
    assert not r.blocks_slot(305, 10)  # beyond the miss-refresh bound
    assert not r.blocks_slot(6, 10)    # different pool position
    assert r.blocks_slot(15, 10)    # d=-10 at k=0 but k=1 gives 90 % 10 == 0
    assert r.expiry_slot == 205


def test_blocks_slot_rri_multiple_of_period_owns_position():
    # r = 10 with P = 10: the claim owns its pool position while alive.
    r = res(3, 10)
    for slot in range(3, 24):
        expected = slot % 10 == 3 and slot <= 23
        assert r.blocks_slot(slot, 10) == expected


def test_claims_from_sci_reserve2_reuses_primary_span():
    fr = fra_encode(4, 2, 1, 2, 0)
    sci = Sci1A(priority=2, frequency_resource=fr,
                time_resource=tra_encode(2, (7,)), rri_index=0, mcs=9)
    claims = claims_from_sci(sci, POOL, -70.0, 50, source_id=9)
    assert len(claims) == 2
    first, second = claims
    assert (first.start_slot, first.subchannel_start, first.subchannel_len) == (50, 1, 2)
    assert (second.start_slot, second.subchannel_start) == (57, 1)
    assert first.rri_slots == 100 and second.priority == 2
    assert second.source_id == 9


def test_claims_from_sci_reserve3_uses_secondary_start():
    fr = fra_encode(10, 3, 2, 3, 6)
    sci = Sci1A(priority=1, frequency_resource=fr,
                time_resource=tra_encode(3, (4, 11)), rri_index=3, mcs=9)
    claims = claims_from_sci(sci, POOL3, -70.0, 100)
    starts = [(c.start_slot, c.subchannel_start) for c in claims]
    assert starts == [(100, 2), (104, 6), (111, 6)]


def test_sense_threshold_expiry_and_undecodable():
    fr = fra_encode(4, 2, 0, 1, 0)
    sci = Sci1A(priority=1, frequency_resource=fr,
                time_resource=tra_encode(2, ()), rri_index=0, mcs=9)
    received = [
        (sci, -60.0, 900),    # live claim
        (sci, -120.0, 900),   # below exclusion threshold
        (None, -50.0, 920),   # undecodable; counted, not projected
        (sci, -60.0, 600),    # expiry 800 < window start: dropped
    ]
    occ = sense(received, POOL, window_start=1000)
    assert len(occ.reservations) == 1
    assert occ.reservations[0].start_slot == 900
    assert occ.skipped_scis == 1
    assert occ.threshold_dbm == POOL.rsrp_exclusion_threshold_dbm


def test_candidate_positions_matches_direct_enumeration():
    rng = random.Random(424242)
    for _ in range(60):
        claims = []
        for _ in range(rng.randint(0, 8)):
            claims.append(res(
                start_slot=rng.randint(0, 99),
                rri=rng.choice([10, 20, 100]),
                sc=rng.randint(0, 3),
                width=rng.randint(1, 2),
                rsrp=rng.uniform(-99, -50),
            ))
        window_start = rng.randint(100, 200)
        occ = OccupancyMap(POOL, window_start, -100.0,
                           [c for c in claims if c.expiry_slot >= window_start])
        demand = rng.randint(1, 3)
        got = set(candidate_positions(POOL, occ, demand))

        # independent re-derivation straight from the occupancy rule
        expected = set()
        for slot in range(window_start, window_start + 10):
            for start in range(POOL.num_subchannels - demand + 1):
                clear = True
                for c in occ.reservations:
                    hits_time = any(
                        (c.start_slot + k * c.rri_slots - slot) >= 0
                        and (c.start_slot + k * c.rri_slots - slot) % 10 == 0
                        for k in range(3)
                    )
                    overlap = not (start + demand <= c.subchannel_start
                                   or c.subchannel_start + c.subchannel_len <= start)
                    if hits_time and overlap:
                        clear = False
                        break
                if clear:
                    expected.add((slot, start))
        assert got == expected


def test_select_resources_raises_threshold_when_starved():
    # Strong claims own every position until the threshold climbs past them.
    claims = []
    for sc in range(4):
        for offset in range(10):
            claims.append(res(100 + offset, 10, sc=sc, rsrp=-80.0 + sc))
    occ = OccupancyMap(POOL, 100, -100.0, claims)
    sel = select_resources(POOL, occ, 1, random.Random(5))
    assert sel.threshold_dbm > -100.0
    assert sel.candidate_count >= 0.2 * sel.total_positions
    assert 100 <= sel.slot < 110


def test_select_resources_deterministic_for_seed():
    claims = [res(100 + i, 100, sc=i % 4, rsrp=-70.0) for i in range(6)]
    occ = OccupancyMap(POOL, 100, -100.0, claims)
    a = select_resources(POOL, occ, 2, random.Random(77))
    b = select_resources(POOL, occ, 2, random.Random(77))
    assert a == b
    with pytest.raises(ValueError):
        select_resources(POOL, occ, 5, random.Random(0))


def test_select_resources_empty_window_uniform():
    occ = OccupancyMap(POOL, 40, -100.0, [])
    rng = random.Random(3)
    seen = {select_resources(POOL, occ, 1, rng).slot for _ in range(200)}
    assert seen == set(range(40, 50))


def test_announce_round_trip_reproduces_claim():
    sel = Selection(slot=104, subchannel_start=1, subchannel_len=2,
                    candidate_count=30, total_positions=30, threshold_dbm=-100.0)
    sci = announce(sel, 100, priority=3, pool=POOL)
    decoded = Sci1A.decode(POOL, sci.encode(POOL))
    claims = claims_from_sci(decoded, POOL, -60.0, sel.slot)
    assert len(claims) == 1
    c = claims[0]
    assert (c.start_slot, c.subchannel_start, c.subchannel_len) == (104, 1, 2)
    assert c.rri_slots == 100 and c.priority == 3
    with pytest.raises(ValueError):
        announce(sel, 37, priority=1, pool=POOL)


def test_reselection_counter_range():
    rng = random.Random(8)
    draws = {draw_reselection_counter(rng) for _ in range(500)}
    assert draws == set(range(5, 16))


def test_mode1_scheduler_first_fit_and_exhaustion():
    sched = Mode1Scheduler(POOL)
    with pytest.raises(ValueError):
        sched.grant(1, 1)  # not registered
    sched.register(1)
    sched.register(2)
    first = sched.grant(1, 4)
    assert (first.slot, first.subchannel_start) == (0, 0)
    second = sched.grant(2, 4)
    assert second.slot == 1
    for _ in range(8):
        sched.grant(2, 4)
    with pytest.raises(GrantExhausted):
        sched.grant(1, 1)
    sched.release(2)
    assert sched.grant(1, 4).slot == 1
