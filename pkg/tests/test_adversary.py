"""Attack agent behaviors: targeting, timing, capture, and the tracker."""

import random

import pytest

from sidelinksim.adversary import (
    ATTACK_REGISTRY,
    AttackKind,
    AttackPlan,
    AttackerCapability,
    TrackerAgent,
    build_attacker,
    pairs_from_clusters,
    pairs_from_truth,
    permutation_f1_baseline,
    precision_recall_f1,
)
from sidelinksim.frames import (
    MibSl,
    Pc5Message,
    Pc5MessageKind as K,
    Sci2A,
    SlssIdentity,
)
from sidelinksim.defense import sign_ssb, verify_ssb
from sidelinksim.harq import DataBurst, FeedbackBurst
from sidelinksim.pc5 import Pc5Burst
from sidelinksim.radio import Channel, Reception, Transmission
from sidelinksim.resources import ControlBurst, ResourcePool, claims_from_sci
from sidelinksim.frames import Sci1A
from sidelinksim.sync import SsbBurst

POOL = ResourcePool(4, 10, [100, 1000])
CAP = AttackerCapability()


def build(kind, window=(0, 1000), params=None, cap=CAP, seed="atk"):
    plan = AttackPlan(kind, window, params or {})
    agent = build_attacker(9000, 0x900001, cap, plan, random.Random(seed))
    agent.configure(pool=POOL, feedback_delay=2, ssb_period=16)
    return agent


def hear(agent, payload, slot, channel, sender=1, rsrp=-70.0):
    tx = Transmission(sender, 23.0, slot, channel, payload,
                      (0, 1) if channel == Channel.PSSCH else None)
    agent.on_receptions([Reception(tx, rsrp)], slot)


def data_burst(src, dst, tb=1, harq=True, pid=3):
    sci2 = Sci2A(harq_process_id=pid, ndi=0, rv=0, source_id=src & 0xFF,
                 dest_id=dst & 0xFFFF, harq_enabled=harq, cast_type=0,
                 csi_request=False)
    return DataBurst(None, sci2.encode(), mac_src_l2=src, mac_dst_l2=dst,
                     tb_id=tb, size_bytes=300)


def test_registry_covers_all_kinds_and_validates_params():
    assert set(ATTACK_REGISTRY) == set(AttackKind)
    for kind, (cls, params) in ATTACK_REGISTRY.items():
        assert cls.kind == kind
        for name, spec in params.items():
            assert isinstance(spec.help, str) and spec.help
    with pytest.raises(ValueError):
        build(AttackKind.FALSE_SYNC_INJECTION, params={"volume": 11})
    with pytest.raises(ValueError):
        AttackPlan(AttackKind.PC5_REPLAY, (100, 50))


def test_window_gating_and_jitter_bounds():
    agent = build(AttackKind.FALSE_SYNC_INJECTION, window=(100, 200))
    assert not agent.active(99) and agent.active(100)
    assert agent.active(199) and not agent.active(200)
    assert agent.jitter() == 0  # perfect timing by default
    sloppy = build(AttackKind.FALSE_SYNC_INJECTION,
                   cap=AttackerCapability(timing_precision_slots=2))
    draws = {sloppy.jitter() for _ in range(200)}
    assert draws == {-2, -1, 0, 1, 2}


def test_false_sync_injection_beacons_on_period():
    agent = build(AttackKind.FALSE_SYNC_INJECTION, window=(0, 100),
                  params={"slss_id": 0})
    assert agent.transmissions(15) == []
    out = agent.transmissions(16)
    assert len(out) == 1
    burst = out[0].payload
    assert isinstance(burst, SsbBurst)
    assert burst.slss.slss_id == 0 and burst.slss.in_coverage
    assert burst.mib.direct_frame_number == 1 and burst.mib.slot_index == 6
    # no key: the tag is noise, so a verifying receiver drops it
    assert not verify_ssb(b"\x01" * 32, 0, burst.mib.encode(), burst.auth_tag)


def test_false_sync_injection_with_insider_key_signs_validly():
    key = b"\x07" * 32
    agent = build(AttackKind.FALSE_SYNC_INJECTION,
                  cap=AttackerCapability(has_key=True))
    agent.configure(ssb_key=key)
    burst = agent.transmissions(0)[0].payload
    assert verify_ssb(key, 0, burst.mib.encode(), burst.auth_tag)


def test_outsider_never_receives_the_key():
    agent = build(AttackKind.FALSE_SYNC_INJECTION)  # has_key=False
    agent.configure(ssb_key=b"\x07" * 32)
    assert agent.ssb_key is None


def test_sync_impersonation_clones_strongest_heard_identity():
    agent = build(AttackKind.SYNC_IMPERSONATION, window=(0, 100))
    weak = SsbBurst(SlssIdentity(40, True), MibSl(0, True, 0, 0))
    strong = SsbBurst(SlssIdentity(7, True), MibSl(1, True, 0, 0))
    hear(agent, weak, 0, Channel.PSBCH, sender=2, rsrp=-80.0)
    hear(agent, strong, 0, Channel.PSBCH, sender=3, rsrp=-60.0)
    assert agent.transmissions(1) == []  # off the victim's burst phase
    out = agent.transmissions(16)
    assert len(out) == 1
    clone = out[0].payload
    assert clone.slss.slss_id == 7
    assert clone.mib.tdd_config == 1
    assert clone.mib.direct_frame_number == 1  # refreshed, not parroted


def test_sync_impersonation_silent_until_it_hears_something():
    agent = build(AttackKind.SYNC_IMPERSONATION)
    assert agent.transmissions(0) == []


def test_resource_blocking_claims_requested_fraction():
    agent = build(AttackKind.RESOURCE_BLOCKING, window=(0, 5000),
                  params={"claim_fraction": 0.75, "rri_ms": 1000})
    seen = {}
    for slot in range(0, 1000):
        for tx in agent.transmissions(slot):
            assert isinstance(tx.payload, ControlBurst)
            sci = Sci1A.decode(POOL, tx.payload.sci1_bits)
            claim = claims_from_sci(sci, POOL, -60.0, slot)[0]
            assert claim.rri_slots == 1000
            seen[(slot % 10, claim.subchannel_start)] = slot
    assert len(seen) == round(0.75 * POOL.total_cells) == 30
    # each claim refreshes every interval, holding the cells indefinitely
    refreshed = [tx for slot in range(1000, 2000) for tx in agent.transmissions(slot)]
    assert len(refreshed) == 30


def test_resource_blocking_listens_first_without_pool_knowledge():
    cap = AttackerCapability(knows_pool_config=False)
    agent = build(AttackKind.RESOURCE_BLOCKING, window=(0, 5000), cap=cap,
                  params={"pool_discovery_slots": 100})
    assert all(agent.transmissions(s) == [] for s in range(100))
    assert any(agent.transmissions(s) for s in range(100, 120))


def test_harq_spoof_targets_and_times_the_race():
    agent = build(AttackKind.HARQ_SPOOF_NACK, window=(0, 100),
                  params={"target_src_l2": 0x000111, "target_dst_l2": 0x000222})
    hear(agent, data_burst(0x000111, 0x000222, pid=5), 10, Channel.PSSCH)
    hear(agent, data_burst(0x000333, 0x000222), 10, Channel.PSSCH)  # wrong sender
    hear(agent, data_burst(0x000111, 0x000444), 10, Channel.PSSCH)  # wrong receiver
    assert agent.transmissions(11) == []
    out = agent.transmissions(12)  # tb slot + feedback delay
    assert len(out) == 1
    forged = out[0].payload
    assert isinstance(forged, FeedbackBurst) and forged.spoofed
    assert not forged.ack and forged.harq_process_id == 5
    assert forged.src_l2 == 0x000222 and forged.dst_l2 == 0x000111
    assert agent.transmissions(13) == []


def test_harq_spoof_ack_variant_and_slot_offset():
    agent = build(AttackKind.HARQ_SPOOF_ACK, window=(0, 100),
                  params={"slot_offset": 1})
    hear(agent, data_burst(0x000111, 0x000222), 10, Channel.PSSCH)
    assert agent.transmissions(12) == []
    out = agent.transmissions(13)
    assert out and out[0].payload.ack


def test_harq_spoof_ignores_feedback_disabled_and_inactive_windows():
    agent = build(AttackKind.HARQ_SPOOF_NACK, window=(50, 100))
    hear(agent, data_burst(1, 2, harq=False), 60, Channel.PSSCH)
    hear(agent, data_burst(1, 2), 10, Channel.PSSCH)  # before the window
    assert all(agent.transmissions(s) == [] for s in range(70))


def test_forged_reject_races_observed_requests():
    agent = build(AttackKind.PC5_FORGED_REJECT, window=(0, 100))
    req = Pc5Message(K.ESTABLISHMENT_REQUEST, 0x000101, 0x000202, 1,
                     {"nonce": "aa" * 16, "ts": 10, "knrp_id": 1,
                      "cipher": "REQUIRED", "integ": "REQUIRED",
                      "allow_null": 0, "auth_req": 0})
    hear(agent, Pc5Burst(message=req), 10, Channel.PSSCH)
    out = agent.transmissions(11)
    assert len(out) == 1
    forged = out[0].payload.message
    assert forged.kind == K.ESTABLISHMENT_REJECT
    assert forged.src_l2 == 0x000202  # impersonates the responder
    assert forged.dst_l2 == 0x000101  # hits the requester
    # header-only forger: it cannot echo the nonce it never parsed
    assert forged.body["echo_nonce"] != req.body["nonce"]


def test_replay_agent_re_emits_captured_frame_verbatim():
    agent = build(AttackKind.PC5_REPLAY, window=(0, 200),
                  params={"replay_delay_slots": 40})
    req = Pc5Message(K.ESTABLISHMENT_REQUEST, 0x000101, 0x000202, 1,
                     {"nonce": "bb" * 16, "ts": 10, "knrp_id": 2,
                      "cipher": "REQUIRED", "integ": "REQUIRED",
                      "allow_null": 0, "auth_req": 0})
    hear(agent, Pc5Burst(message=req), 10, Channel.PSSCH)
    assert agent.transmissions(49) == []
    out = agent.transmissions(50)
    assert len(out) == 1
    assert out[0].payload.message is req  # byte-for-byte the captured frame
    assert agent.transmissions(51) == []


def test_tracker_links_increment_scheme_first():
    agent = build(AttackKind.L2_TRACKING, window=(0, 1000),
                  params={"linkage_window_slots": 50})
    # UE A: id 100 then 101 (weak refresh); UE B: id 500 throughout
    for slot in range(0, 200, 40):
        hear(agent, data_burst(100, 0xFFFFFF, tb=slot), slot, Channel.PSSCH, rsrp=-70.0)
        hear(agent, data_burst(500, 0xFFFFFF, tb=slot), slot, Channel.PSSCH, rsrp=-60.0)
    for slot in range(200, 400, 40):
        hear(agent, data_burst(101, 0xFFFFFF, tb=slot), slot, Channel.PSSCH, rsrp=-70.0)
        hear(agent, data_burst(500, 0xFFFFFF, tb=slot), slot, Channel.PSSCH, rsrp=-60.0)
    clusters = agent.link()
    assert {100, 101} in clusters and {500} in clusters
    truth = {100: 1, 101: 1, 500: 2}
    assert agent.report(truth) == {"precision": 1.0, "recall": 1.0, "f1": 1.0}


def test_tracker_falls_back_to_power_similarity():
    agent = build(AttackKind.L2_TRACKING, params={"rsrp_similarity_db": 3.0})
    for slot in range(0, 100, 20):
        hear(agent, data_burst(0x111111, 0xFFFFFF), slot, Channel.PSSCH, rsrp=-70.0)
        hear(agent, data_burst(0x333333, 0xFFFFFF), slot, Channel.PSSCH, rsrp=-90.0)
    for slot in range(120, 220, 20):
        hear(agent, data_burst(0x222222, 0xFFFFFF), slot, Channel.PSSCH, rsrp=-70.4)
    clusters = agent.link()
    assert {0x111111, 0x222222} in clusters  # similar power, succession in window
    assert {0x333333} in clusters  # 20 dB apart never links


def test_tracker_respects_linkage_window():
    agent = build(AttackKind.L2_TRACKING, params={"linkage_window_slots": 50})
    hear(agent, data_burst(0x111111, 0xFFFFFF), 0, Channel.PSSCH, rsrp=-70.0)
    hear(agent, data_burst(0x222222, 0xFFFFFF), 100, Channel.PSSCH, rsrp=-70.0)
    assert agent.link() == [{0x111111}, {0x222222}]


def test_pair_scoring_edges():
    assert pairs_from_clusters([{1, 2, 3}]) == {(1, 2), (1, 3), (2, 3)}
    assert pairs_from_truth({5: 1, 9: 1, 7: 2}) == {(5, 9)}
    assert precision_recall_f1(set(), set()) == {
        "precision": 1.0, "recall": 1.0, "f1": 1.0}
    out = precision_recall_f1({(1, 2)}, set())
    assert out["precision"] == 0.0 and out["recall"] == 1.0
    out = precision_recall_f1({(1, 2), (3, 4)}, {(1, 2)})
    assert out["precision"] == 0.5 and out["recall"] == 1.0
    assert out["f1"] == pytest.approx(2 / 3)


def test_permutation_baseline_scores_chance_level():
    clusters = [{1, 2}, {3, 4}, {5, 6}, {7, 8}]
    truth = {i: (i - 1) // 2 for i in range(1, 9)}
    perfect = precision_recall_f1(pairs_from_clusters(clusters),
                                  pairs_from_truth(truth))["f1"]
    assert perfect == 1.0
    mean, sigma = permutation_f1_baseline(clusters, truth, random.Random(4), trials=300)
    assert 0.0 < mean < 0.5  # shuffled ownership rarely reproduces the pairs
    assert sigma > 0.0


def test_attack_actions_are_logged():
    agent = build(AttackKind.FALSE_SYNC_INJECTION, window=(0, 100))
    agent.transmissions(0)
    agent.transmissions(16)
    assert [a.slot for a in agent.actions] == [0, 16]
    assert all(a.kind == "false_sync_injection" and a.outcome == "sent"
               for a in agent.actions)
