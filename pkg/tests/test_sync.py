"""Synchronization source selection and identity derivation."""

import random

from sidelinksim.frames import MibSl, SlssIdentity
from sidelinksim.sync import (
    CandidateBuffer,
    SyncCandidate,
    SyncConfig,
    SyncSourceKind,
    SyncState,
    derive_own_slss,
    rank_candidates,
    select_sync_ref,
    should_transmit_ssb,
    tier,
)

CFG = SyncConfig()
MIB = MibSl(0, True, 0, 0)


def cand(slss_id, in_cov, rsrp, slot=0, sender=-1):
    return SyncCandidate(SlssIdentity(slss_id, in_cov), rsrp, MIB, slot, sender)


def test_tier_boundaries():
    assert tier(SlssIdentity(0, True)) == 0
    assert tier(SlssIdentity(0, False)) == 0
    assert tier(SlssIdentity(1, True)) == 1
    assert tier(SlssIdentity(335, True)) == 1
    assert tier(SlssIdentity(1, False)) == 2
    assert tier(SlssIdentity(336, True)) == 3
    assert tier(SlssIdentity(336, False)) == 4
    assert tier(SlssIdentity(671, False)) == 4


def test_rank_drops_below_threshold():
    weak = cand(5, True, CFG.selection_rsrp_threshold_dbm - 0.1)
    strong = cand(400, False, -60)
    ranked = rank_candidates([weak, strong], CFG)
    assert ranked == [strong]


def test_rank_matches_brute_force():
    rng = random.Random(42)
    for _ in range(300):
        cands = [
            cand(rng.randrange(672), bool(rng.getrandbits(1)),
                 rng.uniform(-120, -50), sender=i)
            for i in range(rng.randint(0, 8))
        ]
        expected = sorted(
            (c for c in cands if c.rsrp_dbm >= CFG.selection_rsrp_threshold_dbm),
            key=lambda c: (tier(c.slss), -c.rsrp_dbm, c.slss.slss_id),
        )
        assert rank_candidates(list(cands), CFG) == expected


def test_acquire_needs_threshold_plus_hysteresis():
    cfg = SyncConfig(min_hyst_db=3)
    edge = cand(10, True, cfg.selection_rsrp_threshold_dbm + 2.9)
    assert select_sync_ref(None, [edge], cfg).action == "internal_clock"
    ok = cand(10, True, cfg.selection_rsrp_threshold_dbm + 3.0)
    assert select_sync_ref(None, [ok], cfg).action == "switch"


def test_better_tier_switches_without_hysteresis():
    current = cand(100, True, -60)  # tier 1, strong
    usurper = cand(0, True, -80)    # tier 0, much weaker
    decision = select_sync_ref(current, [usurper, current], CFG)
    assert decision.action == "switch"
    assert decision.candidate.slss.slss_id == 0


def test_same_tier_needs_rsrp_margin():
    current = cand(100, True, -70)
    rival_weak = cand(200, True, -70 + CFG.diff_hyst_db - 0.1)
    rival_strong = cand(200, True, -70 + CFG.diff_hyst_db)
    assert select_sync_ref(current, [rival_weak, current], CFG).action == "keep"
    decision = select_sync_ref(current, [rival_strong, current], CFG)
    assert decision.action == "switch"
    assert decision.candidate.slss.slss_id == 200


def test_same_id_keeps_with_updated_measurement():
    current = cand(100, True, -70, slot=0, sender=7)
    louder = cand(100, True, -55, slot=16, sender=9)
    decision = select_sync_ref(current, [louder], CFG)
    assert decision.action == "keep"
    assert decision.candidate is louder  # measurement (and sender) refreshed


def test_empty_candidates_lapse_to_internal_clock():
    current = cand(100, True, -70)
    assert select_sync_ref(current, [], CFG).action == "internal_clock"
    assert select_sync_ref(None, [], CFG).action == "internal_clock"


def test_should_transmit_ssb():
    ref = SyncState(network_sync_ref=True)
    assert should_transmit_ssb(ref, -50, CFG)  # configured refs always send
    plain = SyncState()
    assert should_transmit_ssb(plain, None, CFG)  # no reference at all
    assert should_transmit_ssb(plain, CFG.tx_thresh_ooc_dbm - 0.1, CFG)
    assert not should_transmit_ssb(plain, CFG.tx_thresh_ooc_dbm, CFG)


def test_derive_own_slss_ranges():
    rng = random.Random(5)
    assert derive_own_slss(SyncSourceKind.GNSS, None, rng) == SlssIdentity(0, True)
    for _ in range(50):
        own = derive_own_slss(SyncSourceKind.GNODE_B, None, rng)
        assert 1 <= own.slss_id <= 335 and own.in_coverage
        own = derive_own_slss(SyncSourceKind.INTERNAL_CLOCK, None, rng)
        assert 336 <= own.slss_id <= 671 and not own.in_coverage


def test_derive_own_slss_follows_reference():
    rng = random.Random(6)
    # chaining off a GNSS-locked ref keeps id 0 but clears the indicator
    own = derive_own_slss(SyncSourceKind.SYNC_REF_UE, SlssIdentity(0, True), rng)
    assert own == SlssIdentity(0, False)
    # chaining off an in-coverage ref draws from the in-coverage range
    for _ in range(50):
        own = derive_own_slss(SyncSourceKind.SYNC_REF_UE, SlssIdentity(42, True), rng,
                              heard_ids={42})
        assert 1 <= own.slss_id <= 335 and not own.in_coverage
        assert own.slss_id != 42
    # chaining off an out-of-coverage ref draws a fresh OOC id
    for _ in range(50):
        own = derive_own_slss(SyncSourceKind.SYNC_REF_UE, SlssIdentity(400, False), rng,
                              heard_ids={400, 401})
        assert 336 <= own.slss_id <= 671 and not own.in_coverage
        assert own.slss_id not in (400, 401)


def test_candidate_buffer_keeps_stronger_instance():
    buf = CandidateBuffer(retention_slots=32)
    buf.note(cand(9, True, -60, slot=0, sender=1))
    buf.note(cand(9, True, -80, slot=4, sender=2))  # weaker clone, ignored
    assert buf.entries[9].sender_id == 1
    buf.note(cand(9, True, -50, slot=8, sender=3))  # stronger clone wins
    assert buf.entries[9].sender_id == 3


def test_candidate_buffer_ages_out():
    buf = CandidateBuffer(retention_slots=32)
    buf.note(cand(9, True, -60, slot=0))
    buf.note(cand(11, True, -70, slot=30))
    fresh = buf.fresh(32)  # floor at slot 0, both still inside
    assert {c.slss.slss_id for c in fresh} == {9, 11}
    assert [c.slss.slss_id for c in buf.fresh(40)] == [11]
    # a stale strong entry no longer shadows a new weak one
    buf.note(cand(11, True, -90, slot=100))
    assert buf.entries[11].rsrp_dbm == -90
