"""Attacker agents: sync-layer spoofing, resource-claim flooding, HARQ
feedback forgery, PC5 signalling exploits and passive id tracking.

Agents interact with the world only through the shared radio path:
they receive what their radio hears and hand transmissions back for
delivery. Capability flags gate what each one may parse or assume
(pool geometry, feedback timing, key material); timing jitter draws
from the agent's seeded source within the configured bound.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

from .bits import BitString
from .defense import sign_ssb
from .frames import (
    MibSl,
    Pc5Message,
    Pc5MessageKind as K,
    Sci1A,
    Sci2A,
    SlssIdentity,
    fra_encode,
)
from .harq import DataBurst, FeedbackBurst
from .pc5 import Pc5Burst
from .radio import Channel, Reception, Transmission
from .resources import ControlBurst, ResourcePool
from .sync import SsbBurst


class AttackKind(Enum):
    SYNC_IMPERSONATION = "sync_impersonation"
    FALSE_SYNC_INJECTION = "false_sync_injection"
    RESOURCE_BLOCKING = "resource_blocking"
    HARQ_SPOOF_ACK = "harq_spoof_ack"
    HARQ_SPOOF_NACK = "harq_spoof_nack"
    PC5_FORGED_REQUEST_FLOOD = "pc5_forged_request_flood"
    PC5_FORGED_REJECT = "pc5_forged_reject"
    PC5_AUTH_DISRUPT = "pc5_auth_disrupt"
    PC5_REPLAY = "pc5_replay"
    PC5_FALSE_SEC_MODE_REJECT = "pc5_false_sec_mode_reject"
    L2_TRACKING = "l2_tracking"


@dataclass(frozen=True)
class AttackerCapability:
    tx_power_dbm: float = 33.0
    timing_precision_slots: int = 0  # jitter bound; 0 = perfect timing
    knows_pool_config: bool = True
    knows_harq_params: bool = True
    has_key: bool = False  # insider: provisioned with the scenario key
    position: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class AttackPlan:
    kind: AttackKind
    window: tuple[int, int]  # [start, end) in slots
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        start, end = self.window
        if start < 0 or end < start:
            raise ValueError(f"bad active window {self.window}")


@dataclass
class AttackAction:
    """One injected frame, for the per-attacker action log."""

    slot: int
    kind: str
    power_dbm: float
    outcome: str
    detail: dict = field(default_factory=dict)


class AttackerAgent:
    """Base: window gating, jitter draws, the action log."""

    kind: AttackKind

    def __init__(self, attacker_id: int, l2_id: int, capability: AttackerCapability,
                 plan: AttackPlan, rng: random.Random):
        self.id = attacker_id
        self.l2_id = l2_id
        self.cap = capability
        self.plan = plan
        self.rng = rng
        self.actions: list[AttackAction] = []
        self._seq = 0
        # wired by the harness after construction
        self.pool: ResourcePool | None = None
        self.feedback_delay = 2
        self.ssb_period = 16
        self.ssb_key: bytes | None = None

    def configure(self, pool=None, feedback_delay=None, ssb_period=None, ssb_key=None):
        if pool is not None:
            self.pool = pool
        if feedback_delay is not None:
            self.feedback_delay = feedback_delay
        if ssb_period is not None:
            self.ssb_period = ssb_period
        if ssb_key is not None and self.cap.has_key:
            self.ssb_key = ssb_key

    def active(self, slot: int) -> bool:
        start, end = self.plan.window
        return start <= slot < end

    def jitter(self) -> int:
        bound = self.cap.timing_precision_slots
        return self.rng.randint(-bound, bound) if bound else 0

    def _tx(self, slot: int, channel: Channel, payload, log_kind: str,
            **detail) -> Transmission:
        self._seq += 1
        self.actions.append(
            AttackAction(slot, log_kind, self.cap.tx_power_dbm, "sent", detail)
        )
        return Transmission(self.id, self.cap.tx_power_dbm, slot, channel, payload)

    def _forged_tag(self) -> str:
        return self.rng.getrandbits(32).to_bytes(4, "big").hex()

    # hooks ---------------------------------------------------------------

    def on_receptions(self, receptions: list[Reception], slot: int):
        """Passive capture; everything an agent later forges it must hear here."""

    def transmissions(self, slot: int) -> list[Transmission]:
        return []


# ---------------------------------------------------------------------------
# synchronization attacks


class SyncImpersonationAgent(AttackerAgent):
    """Clones the strongest legitimate SyncRef it has heard and rebroadcasts
    that identity louder, on the victim's burst phase."""

    kind = AttackKind.SYNC_IMPERSONATION

    def __init__(self, *args):
        super().__init__(*args)
        self._best: tuple[float, SsbBurst, int] | None = None  # (rsrp, burst, slot)

    def on_receptions(self, receptions, slot):
        for rec in receptions:
            burst = rec.transmission.payload
            if not isinstance(burst, SsbBurst):
                continue
            if rec.transmission.sender_id == self.id:
                continue
            if self._best is None or rec.rsrp_dbm > self._best[0]:
                self._best = (rec.rsrp_dbm, burst, rec.transmission.slot)

    def transmissions(self, slot):
        if not self.active(slot) or self._best is None:
            return []
        _, burst, heard_slot = self._best
        if slot % self.ssb_period != heard_slot % self.ssb_period:
            return []
        mib = MibSl(
            tdd_config=burst.mib.tdd_config,
            in_coverage=burst.mib.in_coverage,
            direct_frame_number=(slot // 10) % 1024,
            slot_index=slot % 10,
        )
        if self.ssb_key is not None:
            tag = sign_ssb(self.ssb_key, burst.slss.slss_id, mib.encode())
        else:
            tag = self._forged_tag()
        clone = SsbBurst(slss=burst.slss, mib=mib, auth_tag=tag)
        return [self._tx(slot, Channel.PSBCH, clone, "sync_impersonation",
                         slss_id=burst.slss.slss_id)]


class FalseSyncInjectionAgent(AttackerAgent):
    """Fabricates a top-tier sync identity (default the GNSS-direct id 0
    with the coverage indicator raised) and beacons it at high power."""

    kind = AttackKind.FALSE_SYNC_INJECTION

    PARAM_DEFAULTS = {"slss_id": 0, "tdd_config": 0}

    def transmissions(self, slot):
        if not self.active(slot):
            return []
        planned = slot + self.jitter()
        if planned % self.ssb_period != 0 or planned < 0:
            return []
        slss_id = self.plan.params.get("slss_id", 0)
        mib = MibSl(
            tdd_config=self.plan.params.get("tdd_config", 0),
            in_coverage=True,
            direct_frame_number=(slot // 10) % 1024,
            slot_index=slot % 10,
        )
        if self.ssb_key is not None:
            tag = sign_ssb(self.ssb_key, slss_id, mib.encode())
        else:
            tag = self._forged_tag()
        burst = SsbBurst(slss=SlssIdentity(slss_id, in_coverage=True), mib=mib, auth_tag=tag)
        return [self._tx(slot, Channel.PSBCH, burst, "false_sync_injection", slss_id=slss_id)]


# ---------------------------------------------------------------------------
# resource blocking


class ResourceBlockingAgent(AttackerAgent):
    """Floods control signalling that reserves a configured fraction of the
    pool at the maximum reservation interval, refreshing each interval so
    victims keep sensing the cells as taken. Control-only: the frames carry
    no data payload and occupy no subchannel physically."""

    kind = AttackKind.RESOURCE_BLOCKING

    def __init__(self, *args):
        super().__init__(*args)
        self._claim_cells: list[tuple[int, int]] | None = None  # (slot pos, subchannel)
        self._next_refresh: dict[tuple[int, int], int] = {}
        self._listen_until: int | None = None

    def _prepare(self, slot: int):
        assert self.pool is not None
        p = self.plan.params
        fraction = p.get("claim_fraction", 0.75)
        pool = self.pool
        cells = [
            (s, c)
            for s in range(pool.slots_per_selection_window)
            for c in range(pool.num_subchannels)
        ]
        take = round(fraction * len(cells))
        self._claim_cells = cells[:take]
        period = pool.slots_per_selection_window
        for pos, sub in self._claim_cells:
            first = slot + ((pos - slot) % period)
            self._next_refresh[(pos, sub)] = first

    def transmissions(self, slot):
        if not self.active(slot) or self.pool is None:
            return []
        if self._listen_until is None:
            discovery = 0 if self.cap.knows_pool_config else int(
                self.plan.params.get("pool_discovery_slots", 100)
            )
            self._listen_until = self.plan.window[0] + discovery
        if slot < self._listen_until:
            return []
        if self._claim_cells is None:
            self._prepare(slot)
        pool = self.pool
        rri_ms = self.plan.params.get("rri_ms", max(pool.period_list_ms))
        rri = pool.rri_slots(rri_ms)
        period = pool.slots_per_selection_window
        out = []
        for (pos, sub), due in list(self._next_refresh.items()):
            if slot < due:
                continue
            emit = slot + self.jitter()
            self._next_refresh[(pos, sub)] = due + rri
            if emit != slot:
                # jitter pushed the frame off its intended slot; it would
                # claim the wrong pool position, so the injection is wasted
                self.actions.append(AttackAction(
                    slot, "resource_blocking", self.cap.tx_power_dbm,
                    "missed_window", {"pos": pos, "sub": sub},
                ))
                continue
            sci = Sci1A(
                priority=self.plan.params.get("priority", 1),
                frequency_resource=fra_encode(
                    pool.num_subchannels, pool.sl_max_num_per_reserve, sub, 1
                ),
                time_resource=0,
                rri_index=pool.period_list_ms.index(rri_ms),
                mcs=9,
            )
            burst = ControlBurst(sci1_bits=sci.encode(pool))
            out.append(self._tx(slot, Channel.PSCCH, burst, "resource_blocking",
                                pos=pos, sub=sub))
        return out


# ---------------------------------------------------------------------------
# HARQ feedback spoofing


class HarqSpoofAgent(AttackerAgent):
    """Watches data-channel control stages for HARQ process ids, then races
    the legitimate receiver's feedback with a louder forgery."""

    def __init__(self, *args):
        super().__init__(*args)
        self._queued: list[tuple[int, FeedbackBurst, int]] = []  # (emit slot, burst, tb slot)

    @property
    def spoof_ack(self) -> bool:
        return self.kind == AttackKind.HARQ_SPOOF_ACK

    def on_receptions(self, receptions, slot):
        if not self.cap.knows_harq_params:
            return
        target_src = self.plan.params.get("target_src_l2")
        target_dst = self.plan.params.get("target_dst_l2")
        for rec in receptions:
            burst = rec.transmission.payload
            if not isinstance(burst, DataBurst) or burst.sci2_bits is None:
                continue
            if not self.active(rec.transmission.slot):
                continue
            sci2 = Sci2A.decode(burst.sci2_bits)
            if not sci2.harq_enabled:
                continue
            if target_src is not None and burst.mac_src_l2 != target_src:
                continue
            if target_dst is not None and burst.mac_dst_l2 != target_dst:
                continue
            offset = self.plan.params.get("slot_offset", 0)
            emit = rec.transmission.slot + self.feedback_delay + offset + self.jitter()
            forged = FeedbackBurst(
                ack=self.spoof_ack,
                harq_process_id=sci2.harq_process_id,
                src_l2=burst.mac_dst_l2,  # claims to be the true receiver
                dst_l2=burst.mac_src_l2,
                spoofed=True,
            )
            self._queued.append((emit, forged, rec.transmission.slot))

    def transmissions(self, slot):
        out = []
        keep = []
        for emit, burst, tb_slot in self._queued:
            if emit > slot:
                keep.append((emit, burst, tb_slot))
            elif emit == slot:
                out.append(self._tx(slot, Channel.PSFCH, burst, self.kind.value,
                                    process=burst.harq_process_id, tb_slot=tb_slot))
            else:
                self.actions.append(AttackAction(
                    slot, self.kind.value, self.cap.tx_power_dbm, "missed_window",
                    {"process": burst.harq_process_id},
                ))
        self._queued = keep
        return out


class HarqSpoofAckAgent(HarqSpoofAgent):
    kind = AttackKind.HARQ_SPOOF_ACK


class HarqSpoofNackAgent(HarqSpoofAgent):
    kind = AttackKind.HARQ_SPOOF_NACK


# ---------------------------------------------------------------------------
# PC5 signalling exploits


class Pc5AttackAgent(AttackerAgent):
    """Shared plumbing: watch link signalling, forge unprotected kinds.

    Forgers here work from headers alone (kind, source, destination);
    they never read message bodies, so they cannot echo a victim's
    nonce. The replay variant is the exception by nature: it stores and
    re-emits captured frames verbatim, without interpreting them.
    """

    def _pc5(self, slot: int, kind: K, src: int, dst: int, body: dict,
             log_kind: str) -> Transmission:
        msg = Pc5Message(kind, src, dst, counter=0, body=body)
        self._seq += 1
        self.actions.append(AttackAction(slot, log_kind, self.cap.tx_power_dbm,
                                         "sent", {"dst": dst}))
        return Transmission(self.id, self.cap.tx_power_dbm, slot, Channel.PSSCH,
                            Pc5Burst(message=msg))


class Pc5ForgedRequestFloodAgent(Pc5AttackAgent):
    """Hammers a target with establishment requests from throwaway ids."""

    kind = AttackKind.PC5_FORGED_REQUEST_FLOOD

    def transmissions(self, slot):
        if not self.active(slot):
            return []
        every = self.plan.params.get("period_slots", 4)
        if (slot - self.plan.window[0]) % every != 0:
            return []
        target = self.plan.params.get("target_l2")
        if target is None:
            return []
        body = {
            "nonce": self.rng.randbytes(16).hex(),
            "ts": slot,
            "knrp_id": self.rng.getrandbits(32),
            "cipher": "REQUIRED",
            "integ": "REQUIRED",
            "allow_null": 0,
            "auth_req": 0,
        }
        fake_src = self.rng.getrandbits(24)
        return [self._pc5(slot, K.ESTABLISHMENT_REQUEST, fake_src, target, body,
                          "pc5_forged_request_flood")]


class _ReactiveForger(Pc5AttackAgent):
    """Forge an unprotected abort at whoever just took a handshake step."""

    watch_kind: K
    forge_kind: K
    cause: str
    # which side gets hit: "requester" forges toward the observed source,
    # "responder" toward the observed destination
    target_side: str = "requester"

    def __init__(self, *args):
        super().__init__(*args)
        self._pending: list[tuple[int, int, int]] = []  # (emit slot, src, dst)

    def on_receptions(self, receptions, slot):
        for rec in receptions:
            burst = rec.transmission.payload
            if not isinstance(burst, Pc5Burst):
                continue
            msg = burst.message
            if msg.kind != self.watch_kind or not self.active(rec.transmission.slot):
                continue
            if self.target_side == "requester":
                victim, impersonated = msg.src_l2, msg.dst_l2
            else:
                victim, impersonated = msg.dst_l2, msg.src_l2
            emit = rec.transmission.slot + 1 + self.jitter()
            self._pending.append((max(emit, rec.transmission.slot + 1),
                                  impersonated, victim))

    def transmissions(self, slot):
        out = []
        keep = []
        for emit, src, dst in self._pending:
            if emit > slot:
                keep.append((emit, src, dst))
            elif emit == slot:
                body = {
                    "cause": self.cause,
                    "ts": slot,
                    # header-only capability: the real nonce was in a body
                    # this agent does not parse, so it guesses
                    "echo_nonce": self.rng.randbytes(16).hex(),
                }
                out.append(self._pc5(slot, self.forge_kind, src, dst, body,
                                     self.kind.value))
        self._pending = keep
        return out


class Pc5ForgedRejectAgent(_ReactiveForger):
    kind = AttackKind.PC5_FORGED_REJECT
    watch_kind = K.ESTABLISHMENT_REQUEST
    forge_kind = K.ESTABLISHMENT_REJECT
    cause = "congestion"
    target_side = "requester"


class Pc5AuthDisruptAgent(_ReactiveForger):
    kind = AttackKind.PC5_AUTH_DISRUPT
    watch_kind = K.AUTHENTICATION_REQUEST
    forge_kind = K.AUTHENTICATION_REJECT
    cause = "auth_disrupt"
    target_side = "responder"  # the challenged initiator is the dst of the challenge


class Pc5FalseSecModeRejectAgent(_ReactiveForger):
    kind = AttackKind.PC5_FALSE_SEC_MODE_REJECT
    watch_kind = K.SECURITY_MODE_COMMAND
    forge_kind = K.SECURITY_MODE_REJECT
    cause = "smc_reject"
    target_side = "requester"  # hit the responder that issued the command


class Pc5ReplayAgent(Pc5AttackAgent):
    """Captures establishment requests and re-emits them verbatim later."""

    kind = AttackKind.PC5_REPLAY

    def __init__(self, *args):
        super().__init__(*args)
        self._captured: list[tuple[int, Pc5Message]] = []  # (replay slot, frame)

    def on_receptions(self, receptions, slot):
        delay = self.plan.params.get("replay_delay_slots", 40)
        for rec in receptions:
            burst = rec.transmission.payload
            if not isinstance(burst, Pc5Burst):
                continue
            msg = burst.message
            if msg.kind != K.ESTABLISHMENT_REQUEST:
                continue
            if not self.active(rec.transmission.slot):
                continue
            self._captured.append((rec.transmission.slot + delay + self.jitter(), msg))

    def transmissions(self, slot):
        out = []
        keep = []
        for emit, msg in self._captured:
            if emit > slot:
                keep.append((emit, msg))
            elif emit == slot and self.active(slot):
                self._seq += 1
                self.actions.append(AttackAction(
                    slot, "pc5_replay", self.cap.tx_power_dbm, "sent",
                    {"src": msg.src_l2, "dst": msg.dst_l2},
                ))
                out.append(Transmission(self.id, self.cap.tx_power_dbm, slot,
                                        Channel.PSSCH, Pc5Burst(message=msg)))
        self._captured = keep
        return out


# ---------------------------------------------------------------------------
# passive layer-2 tracking


RSRP_QUANTUM_DB = 0.5


@dataclass
class _IdTrace:
    first_seen: int
    last_seen: int
    rsrp_sum: float = 0.0
    samples: int = 0

    @property
    def mean_rsrp(self) -> float:
        raw = self.rsrp_sum / self.samples
        return round(raw / RSRP_QUANTUM_DB) * RSRP_QUANTUM_DB


class TrackerAgent(AttackerAgent):
    """Passive capture of cleartext MAC source ids; links an id that
    disappears to one appearing within the window at similar power, with
    the predictable increment scheme tried first."""

    kind = AttackKind.L2_TRACKING

    def __init__(self, *args):
        super().__init__(*args)
        self.window_slots = self.plan.params.get("linkage_window_slots", 50)
        self.rsrp_gate_db = self.plan.params.get("rsrp_similarity_db", 3.0)
        self.traces: dict[int, _IdTrace] = {}

    def on_receptions(self, receptions, slot):
        for rec in receptions:
            burst = rec.transmission.payload
            src = None
            if isinstance(burst, DataBurst):
                src = burst.mac_src_l2
            elif isinstance(burst, Pc5Burst):
                src = burst.message.src_l2
            if src is None or not self.active(rec.transmission.slot):
                continue
            t = self.traces.get(src)
            if t is None:
                t = self.traces[src] = _IdTrace(rec.transmission.slot, rec.transmission.slot)
            t.last_seen = max(t.last_seen, rec.transmission.slot)
            t.rsrp_sum += rec.rsrp_dbm
            t.samples += 1

    def link(self) -> list[set[int]]:
        """Cluster observed ids into per-UE hypotheses."""
        parent = {i: i for i in self.traces}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(a, b):
            parent[find(a)] = find(b)

        by_first = sorted(self.traces.items(), key=lambda kv: (kv[1].first_seen, kv[0]))
        for new_id, new_trace in by_first:
            candidates = [
                (old_id, old_trace)
                for old_id, old_trace in self.traces.items()
                if old_id != new_id
                and old_trace.last_seen < new_trace.first_seen
                and new_trace.first_seen - old_trace.last_seen <= self.window_slots
            ]
            if not candidates:
                continue
            increment = [(o, t) for o, t in candidates if (o + 1) % (1 << 24) == new_id]
            if increment:
                union(new_id, increment[0][0])
                continue
            near = [
                (abs(t.mean_rsrp - new_trace.mean_rsrp), -t.last_seen, o)
                for o, t in candidates
                if abs(t.mean_rsrp - new_trace.mean_rsrp) <= self.rsrp_gate_db
            ]
            if near:
                near.sort()
                union(new_id, near[0][2])
        clusters: dict[int, set[int]] = {}
        for i in self.traces:
            clusters.setdefault(find(i), set()).add(i)
        return list(clusters.values())

    def report(self, truth: dict[int, int]) -> dict[str, float]:
        """Precision/recall/F1 of same-UE id pairs against ground truth.

        truth maps each observed id to the stable UE that used it.
        """
        predicted = pairs_from_clusters(self.link())
        actual = pairs_from_truth(truth)
        return precision_recall_f1(predicted, actual)


def pairs_from_clusters(clusters: list[set[int]]) -> set[tuple[int, int]]:
    out = set()
    for cluster in clusters:
        members = sorted(cluster)
        for i, a in enumerate(members):
            for b in members[i + 1:]:
                out.add((a, b))
    return out


def pairs_from_truth(truth: dict[int, int]) -> set[tuple[int, int]]:
    by_ue: dict[int, list[int]] = {}
    for observed_id, ue in truth.items():
        by_ue.setdefault(ue, []).append(observed_id)
    clusters = [set(ids) for ids in by_ue.values()]
    return pairs_from_clusters(clusters)


def precision_recall_f1(predicted: set, actual: set) -> dict[str, float]:
    if not predicted and not actual:
        return {"precision": 1.0, "recall": 1.0, "f1": 1.0}
    hits = len(predicted & actual)
    precision = hits / len(predicted) if predicted else 1.0
    recall = hits / len(actual) if actual else 1.0
    if precision + recall == 0:
        return {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    return {
        "precision": precision,
        "recall": recall,
        "f1": 2 * precision * recall / (precision + recall),
    }


def permutation_f1_baseline(predicted_clusters: list[set[int]], truth: dict[int, int],
                            rng: random.Random, trials: int = 200) -> tuple[float, float]:
    """Chance level for the linkage score: shuffle which UE owns each id,
    keeping cluster sizes, and score the same prediction each time.
    Returns (mean, standard deviation) of the null F1 distribution.
    """
    predicted = pairs_from_clusters(predicted_clusters)
    ids = sorted(truth)
    owners = [truth[i] for i in ids]
    scores = []
    for _ in range(trials):
        shuffled = owners[:]
        rng.shuffle(shuffled)
        null_truth = dict(zip(ids, shuffled))
        scores.append(precision_recall_f1(predicted, pairs_from_truth(null_truth))["f1"])
    mean = sum(scores) / len(scores)
    var = sum((s - mean) ** 2 for s in scores) / len(scores)
    return mean, var ** 0.5


# ---------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class ParamSpec:
    default: object
    help: str


ATTACK_REGISTRY: dict[AttackKind, tuple[type[AttackerAgent], dict[str, ParamSpec]]] = {
    AttackKind.SYNC_IMPERSONATION: (SyncImpersonationAgent, {}),
    AttackKind.FALSE_SYNC_INJECTION: (FalseSyncInjectionAgent, {
        "slss_id": ParamSpec(0, "sync identity to fabricate (0 claims GNSS-direct)"),
        "tdd_config": ParamSpec(0, "TDD pattern index carried in the fake payload"),
    }),
    AttackKind.RESOURCE_BLOCKING: (ResourceBlockingAgent, {
        "claim_fraction": ParamSpec(0.75, "fraction of pool cells to claim"),
        "rri_ms": ParamSpec(1000, "reservation interval advertised on each claim"),
        "priority": ParamSpec(1, "priority field carried on fake claims"),
        "pool_discovery_slots": ParamSpec(100, "listen time before injecting when pool unknown"),
    }),
    AttackKind.HARQ_SPOOF_ACK: (HarqSpoofAckAgent, {
        "target_src_l2": ParamSpec(None, "only spoof TBs from this sender (None = all)"),
        "target_dst_l2": ParamSpec(None, "only spoof TBs toward this receiver (None = all)"),
        "slot_offset": ParamSpec(0, "extra slots past the feedback deadline"),
    }),
    AttackKind.HARQ_SPOOF_NACK: (HarqSpoofNackAgent, {
        "target_src_l2": ParamSpec(None, "only spoof TBs from this sender (None = all)"),
        "target_dst_l2": ParamSpec(None, "only spoof TBs toward this receiver (None = all)"),
        "slot_offset": ParamSpec(0, "extra slots past the feedback deadline"),
    }),
    AttackKind.PC5_FORGED_REQUEST_FLOOD: (Pc5ForgedRequestFloodAgent, {
        "target_l2": ParamSpec(None, "layer-2 id to flood"),
        "period_slots": ParamSpec(4, "slots between forged requests"),
    }),
    AttackKind.PC5_FORGED_REJECT: (Pc5ForgedRejectAgent, {}),
    AttackKind.PC5_AUTH_DISRUPT: (Pc5AuthDisruptAgent, {}),
    AttackKind.PC5_REPLAY: (Pc5ReplayAgent, {
        "replay_delay_slots": ParamSpec(40, "slots between capture and re-emission"),
    }),
    AttackKind.PC5_FALSE_SEC_MODE_REJECT: (Pc5FalseSecModeRejectAgent, {}),
    AttackKind.L2_TRACKING: (TrackerAgent, {
        "linkage_window_slots": ParamSpec(50, "max gap between an id vanishing and its successor"),
        "rsrp_similarity_db": ParamSpec(3.0, "power gate for linking two ids"),
    }),
}


def build_attacker(attacker_id: int, l2_id: int, capability: AttackerCapability,
                   plan: AttackPlan, rng: random.Random) -> AttackerAgent:
    cls, param_spec = ATTACK_REGISTRY[plan.kind]
    unknown = set(plan.params) - set(param_spec)
    if unknown:
        raise ValueError(f"unknown parameters for {plan.kind.value}: {sorted(unknown)}")
    return cls(attacker_id, l2_id, capability, plan, rng)
