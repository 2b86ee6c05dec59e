"""World assembly and the per-slot simulation loop.

Slot phases, in order: identifier-privacy epochs, UE actions
(sync bursts, sync evaluation, PC5 signalling, traffic), attacker
actions, radio delivery, reception dispatch, feedback-window closure.
Every random draw comes from a child generator derived from the run
seed and a fixed label, so a (scenario, seed) pair replays exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .adversary import ATTACK_REGISTRY, AttackerAgent, TrackerAgent, build_attacker
from .defense import (
    FeedbackProfile,
    IncidentLog,
    ReplayGuard,
    enforce_policy,
    harq_anomaly_check,
    sign_ssb,
    verify_ssb,
)
from .frames import CastType, MibSl, Sci1A, Sci2A, SlssIdentity
from .harq import (
    Action,
    DataBurst,
    Feedback,
    FeedbackBurst,
    FeedbackConfig,
    FeedbackKind,
    HarqProcess,
    TbState,
    arbitrate_feedback,
    feedback_for_tb,
    in_window,
)
from .metrics import MetricsReport
from .pc5 import BROADCAST_L2, L2Identity, Pc5Burst, Pc5Endpoint, refresh_identifier
from .radio import Channel, Transmission, child_rng, deliver
from .resources import (
    ControlBurst,
    Selection,
    announce,
    draw_reselection_counter,
    select_resources,
    sense,
)
from .scenario import ATTACKER_ID_BASE, Scenario, TrafficFlow, UeSpec
from .sync import (
    CandidateBuffer,
    SsbBurst,
    SyncCandidate,
    SyncSourceKind,
    SyncState,
    derive_own_slss,
    select_sync_ref,
    should_transmit_ssb,
)

MAX_PROCESSES = 16


def demand_subchannels(flow: TrafficFlow, num_subchannels: int) -> int:
    """Subchannels a TB of this size occupies (300-byte granularity)."""
    return max(1, min(math.ceil(flow.size_bytes / 300), num_subchannels))


@dataclass
class GrantState:
    next_slot: int
    remaining: int
    subchannel_start: int
    subchannel_len: int
    rri_slots: int
    rri_ms: int
    selection: Selection


@dataclass
class FlowRuntime:
    flow: TrafficFlow
    process: HarqProcess
    demand: int
    next_gen_slot: int
    grant: GrantState | None = None
    pending_kind: str | None = None  # "new" | "retx"


@dataclass
class PendingTb:
    flow_rt: FlowRuntime
    process_id: int
    tb_id: int
    tb_slot: int
    expected_slot: int


@dataclass
class TbOutcome:
    """Ground-truth record of one finished transport block."""

    ue_id: int
    tb_id: int
    first_tx_slot: int
    attempts: int
    state: str
    spoof_candidates: int


@dataclass
class SelectionRecord:
    ue_id: int
    decided_slot: int
    selection: Selection
    sensed: list | None  # snapshot for oracle replay, when capture is on


class UeAgent:
    """One legitimate participant: sync, sensing, flows, PC5 endpoint."""

    def __init__(self, spec: UeSpec, world: "World"):
        self.spec = spec
        self.world = world
        self.rng = child_rng(world.seed, f"ue:{spec.id}")
        self.l2 = L2Identity(current=world.take_l2(), born_slot=0)
        world.identity_truth[self.l2.current] = spec.id

        cfg = world.sc.sync
        if spec.role == "gnss_visible":
            self.state = SyncState(SyncSourceKind.GNSS, None, SlssIdentity(0, True), True)
        elif spec.role == "gnode_b":
            own = derive_own_slss(SyncSourceKind.GNODE_B, None, self.rng)
            self.state = SyncState(SyncSourceKind.GNODE_B, None, own, True)
        else:
            own = derive_own_slss(SyncSourceKind.INTERNAL_CLOCK, None, self.rng)
            self.state = SyncState(SyncSourceKind.INTERNAL_CLOCK, None, own,
                                   spec.network_sync_ref)
        self.buffer = CandidateBuffer(retention_slots=2 * cfg.ssb_period_slots)

        policy = spec.policy
        if world.sc.defenses.policy_enforcer.enabled:
            policy = enforce_policy(policy)
        self.endpoint = Pc5Endpoint(
            spec.id, self.l2.current, world.psk, policy,
            child_rng(world.seed, f"pc5:{spec.id}"),
        )
        guard_cfg = world.sc.defenses.replay_guard
        self.guard = ReplayGuard(guard_cfg.timestamp_skew_slots) if guard_cfg.enabled else None
        self.profile = FeedbackProfile()

        self.flows: list[FlowRuntime] = []
        self.sensing: list[tuple[Sci1A | None, float, int]] = []
        self.pending_tbs: list[PendingTb] = []
        self.feedback_inbox: list[tuple[Feedback, bool]] = []
        self.outbox: dict[int, list[tuple[Channel, object, tuple | None]]] = {}
        self.tb_counter = 0
        self.delivered_seen: set[int] = set()
        self.spoof_hits: dict[int, int] = {}  # tb_id -> spoofed candidates seen
        self.tb_first_slot: dict[int, int] = {}

    # -- per-slot action ---------------------------------------------------

    def act(self, slot: int) -> list[Transmission]:
        out: list[Transmission] = []
        horizon = slot - self.world.sc.pool.sensing_window_slots
        if self.sensing and self.sensing[0][2] < horizon:
            self.sensing = [e for e in self.sensing if e[2] >= horizon]

        for channel, payload, span in self.outbox.pop(slot, ()):
            out.append(Transmission(self.spec.id, self.spec.tx_power_dbm, slot,
                                    channel, payload, span))

        self._sync_step(slot, out)
        self._pc5_step(slot, out)
        for rt in self.flows:
            self._flow_step(rt, slot, out)
        return out

    def _sync_step(self, slot: int, out: list[Transmission]):
        cfg = self.world.sc.sync
        if self.state.source in (SyncSourceKind.SYNC_REF_UE, SyncSourceKind.INTERNAL_CLOCK):
            cands = self.buffer.fresh(slot)
            decision = select_sync_ref(self.state.reference, cands, cfg)
            if decision.action == "switch":
                self.state.source = SyncSourceKind.SYNC_REF_UE
                self.state.reference = decision.candidate
                self.state.switch_count += 1
                heard = {c.slss.slss_id for c in cands}
                self.state.own_slss = derive_own_slss(
                    SyncSourceKind.SYNC_REF_UE, decision.candidate.slss, self.rng, heard
                )
                self.world.metrics.bump("sync_switches")
                self.world.event(slot, "sync_switch", ue=self.spec.id,
                                 slss=decision.candidate.slss.slss_id,
                                 sender=decision.candidate.sender_id)
            elif decision.action == "keep" and decision.candidate is not None:
                self.state.reference = decision.candidate
            elif decision.action == "internal_clock" and self.state.reference is not None:
                self.state.source = SyncSourceKind.INTERNAL_CLOCK
                self.state.reference = None
                self.world.event(slot, "sync_lapse", ue=self.spec.id)

        if slot % cfg.ssb_period_slots != self.spec.id % cfg.ssb_period_slots:
            return
        measured = self.state.reference.rsrp_dbm if self.state.reference else None
        if not should_transmit_ssb(self.state, measured, cfg):
            return
        mib = MibSl(
            tdd_config=0,
            in_coverage=self.state.own_slss.in_coverage,
            direct_frame_number=(slot // 10) % 1024,
            slot_index=slot % 10,
        )
        signed = self.world.sc.defenses.signed_ssb
        tag = None
        if signed.enabled:
            tag = sign_ssb(self.world.ssb_key, self.state.own_slss.slss_id,
                           mib.encode(), signed.tag_bits)
            self.world.metrics.bump("airtime_overhead_bits", signed.tag_bits)
        out.append(Transmission(self.spec.id, self.spec.tx_power_dbm, slot,
                                Channel.PSBCH,
                                SsbBurst(self.state.own_slss, mib, tag)))
        self.world.metrics.bump("ssb_sent")

    def _pc5_step(self, slot: int, out: list[Transmission]):
        for link in self.world.sc.links:
            if link.initiator == self.spec.id and link.start_slot == slot:
                peer_l2 = self.world.l2_of(link.responder)
                for msg in self.endpoint.initiate(peer_l2, slot):
                    out.append(self._pc5_tx(slot, msg))
        msgs, events = self.endpoint.tick(slot)
        for msg in msgs:
            out.append(self._pc5_tx(slot, msg))
        for ev in events:
            self.world.security_event(self, ev)

    def _pc5_tx(self, slot: int, msg) -> Transmission:
        return Transmission(self.spec.id, self.spec.tx_power_dbm, slot,
                            Channel.PSSCH, Pc5Burst(message=msg))

    def _flow_step(self, rt: FlowRuntime, slot: int, out: list[Transmission]):
        flow, proc = rt.flow, rt.process
        in_flight = proc.attempts > 0 and proc.state not in (TbState.DONE, TbState.FAILED)
        if slot >= rt.next_gen_slot:
            if not in_flight and rt.pending_kind is None:
                self.tb_counter += 1
                tb_id = self.spec.id * 1_000_000 + self.tb_counter
                proc.start_tb(tb_id, self.world.l2_of(flow.dst))
                rt.pending_kind = "new"
            rt.next_gen_slot = slot + flow.period_slots
        if rt.pending_kind is None:
            return
        if rt.grant is None or rt.grant.remaining <= 0:
            self._reselect(rt, slot)
            return
        g = rt.grant
        if slot != g.next_slot:
            if slot > g.next_slot:  # fell behind (should not happen); realign
                while g.next_slot < slot:
                    g.next_slot += g.rri_slots
                    g.remaining -= 1
            return
        self._emit_tb(rt, slot, out)

    def _reselect(self, rt: FlowRuntime, slot: int):
        pool = self.world.sc.pool
        window_start = slot + 1
        occ = sense(self.sensing, pool, window_start)
        sel = select_resources(pool, occ, rt.demand, self.rng)
        counter = draw_reselection_counter(self.rng)
        had_grant = rt.grant is not None
        rt.grant = GrantState(
            next_slot=sel.slot,
            remaining=counter,
            subchannel_start=sel.subchannel_start,
            subchannel_len=sel.subchannel_len,
            rri_slots=pool.rri_slots(rt.flow.rri_ms),
            rri_ms=rt.flow.rri_ms,
            selection=sel,
        )
        self.world.metrics.bump("selections")
        if had_grant:
            self.world.metrics.bump("reselections")
        self.world.metrics.bump("candidate_positions", sel.candidate_count)
        snapshot = list(self.sensing) if self.world.capture_sensing else None
        self.world.selection_log.append(SelectionRecord(self.spec.id, slot, sel, snapshot))
        self.world.event(slot, "selection", ue=self.spec.id, tx_slot=sel.slot,
                         candidates=sel.candidate_count, total=sel.total_positions,
                         threshold=sel.threshold_dbm)

    def _emit_tb(self, rt: FlowRuntime, slot: int, out: list[Transmission]):
        flow, proc, g = rt.flow, rt.process, rt.grant
        ndi, rv = proc.record_transmission()
        pool = self.world.sc.pool
        dst_l2 = self.world.l2_of(flow.dst)
        cast = CastType.BROADCAST if flow.dst == "broadcast" else CastType.UNICAST
        sci1 = announce(g.selection, g.rri_ms, flow.priority, pool)
        sci2 = Sci2A.for_tb(
            process_id=proc.process_id, ndi=ndi, rv=rv,
            src_l2=self.l2.current, dst_l2=dst_l2,
            harq_enabled=flow.harq, cast_type=cast,
        )
        burst = DataBurst(
            sci1_bits=sci1.encode(pool),
            sci2_bits=sci2.encode(),
            mac_src_l2=self.l2.current,
            mac_dst_l2=dst_l2,
            tb_id=proc.tb_id,
            size_bytes=flow.size_bytes,
        )
        out.append(Transmission(self.spec.id, self.spec.tx_power_dbm, slot,
                                Channel.PSSCH, burst,
                                (g.subchannel_start, g.subchannel_len)))
        if rt.pending_kind == "new":
            self.world.metrics.bump("tb_sent")
            self.tb_first_slot[proc.tb_id] = slot
        else:
            self.world.metrics.bump("retransmissions", slot=slot)
        rt.pending_kind = None
        g.next_slot += g.rri_slots
        g.remaining -= 1
        if flow.harq and cast == CastType.UNICAST:
            self.pending_tbs.append(PendingTb(
                rt, proc.process_id, proc.tb_id, slot,
                slot + self.world.fb_cfg.feedback_delay_slots,
            ))
        else:
            proc.state = TbState.DONE  # blind transmission, nothing to wait for

    # -- reception ----------------------------------------------------------

    def receive(self, rec, slot: int):
        payload = rec.transmission.payload
        if isinstance(payload, SsbBurst):
            self._receive_ssb(rec, payload, slot)
        elif isinstance(payload, DataBurst):
            self._note_sci(payload.sci1_bits, rec.rsrp_dbm, slot)
            self._receive_data(rec, payload, slot)
        elif isinstance(payload, ControlBurst):
            self._note_sci(payload.sci1_bits, rec.rsrp_dbm, slot)
        elif isinstance(payload, Pc5Burst):
            self._receive_pc5(payload, slot)
        elif isinstance(payload, FeedbackBurst):
            self._receive_feedback(rec, payload, slot)

    def _receive_ssb(self, rec, burst: SsbBurst, slot: int):
        signed = self.world.sc.defenses.signed_ssb
        if signed.enabled and not verify_ssb(
            self.world.ssb_key, burst.slss.slss_id, burst.mib.encode(),
            burst.auth_tag, signed.tag_bits,
        ):
            self.world.metrics.bump("ssb_rejected")
            self.world.incidents.record(slot, "signed_ssb",
                                        rec.transmission.sender_id, "bad_tag")
            return
        self.buffer.note(SyncCandidate(burst.slss, rec.rsrp_dbm, burst.mib, slot,
                                       rec.transmission.sender_id))

    def _note_sci(self, bits, rsrp: float, slot: int):
        try:
            sci = Sci1A.decode(self.world.sc.pool, bits)
        except ValueError:
            sci = None
        self.sensing.append((sci, rsrp, slot))

    def _receive_data(self, rec, burst: DataBurst, slot: int):
        mine = burst.mac_dst_l2 == self.l2.current
        broadcast = burst.mac_dst_l2 == BROADCAST_L2
        if not mine and not broadcast:
            return
        crc_ok = self.world.crc_rng.random() >= self.world.sc.channel.tb_error_rate
        if crc_ok and burst.tb_id not in self.delivered_seen:
            self.delivered_seen.add(burst.tb_id)
            self.world.metrics.bump("receiver_delivered", slot=slot)
        if not mine:
            return
        try:
            sci2 = Sci2A.decode(burst.sci2_bits)
        except ValueError:
            return
        fb = feedback_for_tb(crc_ok, sci2.harq_enabled, sci2.harq_process_id,
                             self.l2.current, burst.mac_src_l2)
        if fb is not None:
            due = slot + self.world.fb_cfg.feedback_delay_slots
            self.outbox.setdefault(due, []).append((Channel.PSFCH, fb, None))
            self.world.metrics.bump("feedback_sent")

    def _receive_pc5(self, burst: Pc5Burst, slot: int):
        msg = burst.message
        if msg.dst_l2 != self.l2.current:
            return
        replies, events = self.endpoint.handle(msg, slot, self.guard)
        for reply in replies:
            self.outbox.setdefault(slot + 1, []).append(
                (Channel.PSSCH, Pc5Burst(message=reply), None)
            )
        for ev in events:
            self.world.security_event(self, ev)

    def _receive_feedback(self, rec, burst: FeedbackBurst, slot: int):
        if burst.dst_l2 != self.l2.current:
            return
        fb = Feedback(
            kind=FeedbackKind.ACK if burst.ack else FeedbackKind.NACK,
            harq_process_id=burst.harq_process_id,
            source_claimed_l2=burst.src_l2,
            slot=slot,
            observed_rsrp_dbm=rec.rsrp_dbm,
        )
        self.feedback_inbox.append((fb, burst.spoofed))

    # -- feedback-window closure ---------------------------------------------

    def close_feedback(self, slot: int):
        cfg = self.world.fb_cfg
        anomaly = self.world.sc.defenses.harq_anomaly_check
        still_open: list[PendingTb] = []
        for pending in self.pending_tbs:
            if slot < pending.expected_slot + cfg.window_slots:
                still_open.append(pending)
                continue
            candidates = [
                (fb, spoofed) for fb, spoofed in self.feedback_inbox
                if fb.harq_process_id == pending.process_id
                and in_window(fb.slot, pending.expected_slot, cfg)
            ]
            self.feedback_inbox = [
                (fb, spoofed) for fb, spoofed in self.feedback_inbox
                if (fb, spoofed) not in candidates
            ]
            self._resolve(pending, candidates, slot)
        # drop anything that can no longer match an open window
        self.feedback_inbox = [
            (fb, spoofed) for fb, spoofed in self.feedback_inbox
            if fb.slot + cfg.window_slots >= slot
        ]
        self.pending_tbs = still_open

    def _resolve(self, pending: PendingTb, candidates, slot: int):
        cfg = self.world.fb_cfg
        anomaly = self.world.sc.defenses.harq_anomaly_check
        accepted = []
        for fb, spoofed in candidates:
            if spoofed:
                self.world.metrics.bump("feedback_spoofed")
                self.spoof_hits[pending.tb_id] = self.spoof_hits.get(pending.tb_id, 0) + 1
            else:
                self.world.metrics.bump("feedback_candidates_legit")
            if anomaly.enabled:
                reason = harq_anomaly_check(self.profile, fb, pending.expected_slot, anomaly)
                if reason is not None:
                    self.world.metrics.bump("feedback_flagged")
                    if not spoofed:
                        self.world.metrics.bump("feedback_flagged_legit")
                    self.world.incidents.record(slot, "harq_anomaly",
                                                fb.source_claimed_l2, reason)
                    continue
            accepted.append(fb)
        winner, _ = arbitrate_feedback(accepted, pending.expected_slot, cfg)
        if winner is not None and anomaly.enabled:
            self.profile.learn(winner.source_claimed_l2, winner.observed_rsrp_dbm)
        proc = pending.flow_rt.process
        action = proc.on_feedback(winner.kind if winner else None, cfg)
        if action == Action.COMPLETE:
            self.world.metrics.bump("sender_delivered", slot=slot)
            self._finish_tb(pending, proc, "done")
        elif action == Action.RETRANSMIT:
            pending.flow_rt.pending_kind = "retx"
        else:
            self.world.metrics.bump("harq_failures")
            self.world.event(slot, "harq_fail", ue=self.spec.id, tb=pending.tb_id,
                             attempts=proc.attempts)
            self._finish_tb(pending, proc, "failed")

    def _finish_tb(self, pending: PendingTb, proc: HarqProcess, state: str):
        self.world.tb_log.append(TbOutcome(
            self.spec.id, pending.tb_id,
            self.tb_first_slot.pop(pending.tb_id, pending.tb_slot),
            proc.attempts, state,
            self.spoof_hits.pop(pending.tb_id, 0),
        ))


class World:
    """Everything one run owns; `run()` executes the slot loop."""

    def __init__(self, scenario: Scenario, seed: int | None = None,
                 capture_sensing: bool = False):
        self.sc = scenario
        self.seed = scenario.seed if seed is None else seed
        self.capture_sensing = capture_sensing
        self.metrics = MetricsReport(scenario.name, self.seed)
        self.events: list[dict] = []
        self.fb_cfg = FeedbackConfig()
        self.incidents = IncidentLog(enabled=scenario.defenses.incident_log.enabled)

        self.crc_rng = child_rng(self.seed, "crc")
        self.channel_rng = child_rng(self.seed, "channel")
        self.privacy_rng = child_rng(self.seed, "privacy")
        self._l2_rng = child_rng(self.seed, "l2init")
        self._l2_used: set[int] = {BROADCAST_L2}
        self.psk = child_rng(self.seed, "psk").randbytes(32)
        self.ssb_key = child_rng(self.seed, "ssbkey").randbytes(32)

        self.identity_truth: dict[int, int] = {}
        self.selection_log: list[SelectionRecord] = []
        self.tb_log: list[TbOutcome] = []
        self._tx_seq = 0

        self.agents: list[UeAgent] = [UeAgent(spec, self) for spec in scenario.ues]
        self.by_id = {a.spec.id: a for a in self.agents}
        for flow in scenario.traffic:
            agent = self.by_id[flow.src]
            idx = len(agent.flows)
            agent.flows.append(FlowRuntime(
                flow=flow,
                process=HarqProcess(process_id=idx % MAX_PROCESSES),
                demand=demand_subchannels(flow, scenario.pool.num_subchannels),
                next_gen_slot=flow.start_slot,
            ))

        self.attackers: list[AttackerAgent] = []
        for i, spec in enumerate(scenario.attacks):
            agent = build_attacker(
                ATTACKER_ID_BASE + i,
                self.take_l2(),
                spec.capability,
                spec.plan,
                child_rng(self.seed, f"attacker:{i}"),
            )
            agent.configure(
                pool=scenario.pool,
                feedback_delay=self.fb_cfg.feedback_delay_slots,
                ssb_period=scenario.sync.ssb_period_slots,
                ssb_key=self.ssb_key,
            )
            self.attackers.append(agent)

        self.positions: dict[int, tuple[float, float]] = {}

    # -- shared helpers ------------------------------------------------------

    def take_l2(self) -> int:
        while True:
            candidate = self._l2_rng.getrandbits(24)
            if candidate not in self._l2_used:
                self._l2_used.add(candidate)
                return candidate

    def l2_of(self, ue_id) -> int:
        if ue_id == "broadcast":
            return BROADCAST_L2
        return self.by_id[ue_id].l2.current

    def event(self, slot: int, event_type: str, **fields):
        entry = {"slot": slot, "type": event_type}
        entry.update(fields)
        self.events.append(entry)

    def security_event(self, agent: UeAgent, ev):
        detail = {("msg_kind" if k == "kind" else k): v for k, v in ev.detail.items()}
        self.event(ev.slot, "pc5", ue=agent.spec.id, kind=ev.kind,
                   peer=ev.peer_l2, **detail)
        bump = self.metrics.bump
        if ev.kind == "established":
            bump("links_established")
        elif ev.kind in ("link_failure", "auth_fail"):
            bump("link_failures", slot=ev.slot)
        elif ev.kind == "replay_reject":
            bump("replay_rejects", slot=ev.slot)
            self.incidents.record(ev.slot, "replay_guard", ev.peer_l2,
                                  detail.get("reason", ""))
        elif ev.kind == "duplicate_session":
            bump("duplicate_sessions")
        elif ev.kind in ("discard_bad_tag", "discard_unbound", "replay"):
            bump("security_discards")
            self.incidents.record(ev.slot, "pdu_protection", ev.peer_l2, ev.kind)
        elif ev.kind == "policy_mismatch":
            bump("policy_mismatches")

    # -- slot phases -----------------------------------------------------------

    def _update_positions(self, slot: int):
        t_s = slot * self.sc.pool.slot_duration_ms / 1000.0
        for agent in self.agents:
            x0, y0 = agent.spec.position
            vx, vy = agent.spec.velocity
            self.positions[agent.spec.id] = (x0 + vx * t_s, y0 + vy * t_s)
        for attacker in self.attackers:
            self.positions[attacker.id] = attacker.cap.position

    def _privacy_epoch(self, slot: int):
        cfg = self.sc.defenses.privacy_randomizer
        if not cfg.enabled or cfg.mode == "static" or slot == 0:
            return
        timer_slots = int(round(cfg.timer_ms / self.sc.pool.slot_duration_ms))
        if timer_slots <= 0 or slot % timer_slots != 0:
            return
        live = {a.l2.current for a in self.agents}
        for agent in self.agents:
            if agent.spec.role != "legit":
                continue
            old = agent.l2.current
            new = refresh_identifier(agent.l2, self.privacy_rng, cfg.mode, slot, live)
            live.discard(old)
            live.add(new)
            msgs = agent.endpoint.begin_identifier_update(
                new, self.privacy_rng.getrandbits(32)
            )
            for msg in msgs:
                agent.outbox.setdefault(slot, []).append(
                    (Channel.PSSCH, Pc5Burst(message=msg), None)
                )
            agent.endpoint.l2_id = new
            self.identity_truth[new] = agent.spec.id
            self.metrics.bump("identifier_refreshes")
            self.event(slot, "identifier_refresh", ue=agent.spec.id)

    def _deliver_and_dispatch(self, transmissions: list[Transmission], slot: int):
        for tx in transmissions:
            self._tx_seq += 1
            tx.seq = self._tx_seq
        recs_by_receiver, collisions = deliver(
            transmissions, self.positions, self.sc.channel, self.channel_rng
        )
        for record in collisions:
            self.metrics.bump("collision_count", len(record.destroyed_seqs),
                              slot=record.slot)
            self.event(record.slot, "collision", receiver=record.receiver_id,
                       destroyed=len(record.destroyed_seqs))
        for agent in self.agents:
            for rec in sorted(recs_by_receiver.get(agent.spec.id, ()),
                              key=lambda r: r.transmission.seq):
                agent.receive(rec, slot)
        for attacker in self.attackers:
            recs = sorted(recs_by_receiver.get(attacker.id, ()),
                          key=lambda r: r.transmission.seq)
            attacker.on_receptions(recs, slot)

    def run(self) -> MetricsReport:
        for slot in range(self.sc.duration_slots):
            self._update_positions(slot)
            self._privacy_epoch(slot)
            transmissions: list[Transmission] = []
            for agent in self.agents:
                transmissions.extend(agent.act(slot))
            for attacker in self.attackers:
                injected = attacker.transmissions(slot)
                if injected:
                    self.metrics.bump("attack_frames_sent", len(injected))
                transmissions.extend(injected)
            self._deliver_and_dispatch(transmissions, slot)
            for agent in self.agents:
                agent.close_feedback(slot)
        self._finalize()
        return self.metrics

    def _finalize(self):
        self.metrics.bump("slots_run", self.sc.duration_slots)
        victims = sum(
            1 for a in self.agents
            if a.spec.role == "legit"
            and a.state.source == SyncSourceKind.SYNC_REF_UE
            and a.state.reference is not None
            and a.state.reference.sender_id >= ATTACKER_ID_BASE
        )
        if victims:
            self.metrics.bump("sync_victims", victims)
        ratios = [
            rec.selection.candidate_ratio for rec in self.selection_log
            if self.by_id[rec.ue_id].spec.role == "legit"
        ]
        if ratios:
            self.metrics.gauge("candidate_set_ratio", sum(ratios) / len(ratios))
        for attacker in self.attackers:
            if isinstance(attacker, TrackerAgent):
                truth = {
                    observed: self.identity_truth[observed]
                    for observed in attacker.traces
                    if observed in self.identity_truth
                }
                scores = attacker.report(truth)
                self.metrics.gauge("tracking_precision", scores["precision"])
                self.metrics.gauge("tracking_recall", scores["recall"])
                self.metrics.gauge("tracking_f1", scores["f1"])
                break
        if self.incidents.enabled:
            self.metrics.bump("incidents", self.incidents.count())
        for attacker in self.attackers:
            for action in attacker.actions:
                self.event(action.slot, "attack", attacker=attacker.id,
                           kind=action.kind, power=action.power_dbm,
                           outcome=action.outcome)
        self.events.sort(key=lambda e: (e["slot"], 0 if e["type"] != "attack" else 1))
        self.metrics.check_fold()


def run_scenario(scenario: Scenario, seed: int | None = None,
                 capture_sensing: bool = False) -> tuple[MetricsReport, list[dict], World]:
    world = World(scenario, seed=seed, capture_sensing=capture_sensing)
    report = world.run()
    return report, world.events, world
