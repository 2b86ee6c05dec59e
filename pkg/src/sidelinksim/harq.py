"""HARQ process state, feedback timing, and feedback arbitration.

attempts counts transmissions of the pending TB, so the initial send is
attempt 1. A NACK triggers a retransmission while attempts has not
passed maxRetransmissions; a NACK arriving with attempts already at
maxRetransmissions + 1 fails the process. Missing feedback at window
close is treated as a NACK by default. Arbitration among same-window
feedback bursts is by received power, which is what makes overpowering
spoofs meaningful and underpowered ones useless.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

RV_SEQUENCE = (0, 2, 3, 1)  # redundancy version by attempt, cycling
MAX_PROCESS_ID = 15


class TbState(Enum):
    IDLE = "idle"
    AWAITING_FEEDBACK = "awaiting_feedback"
    DONE = "done"
    FAILED = "failed"


class FeedbackKind(Enum):
    ACK = "ack"
    NACK = "nack"


@dataclass
class FeedbackConfig:
    feedback_delay_slots: int = 2
    window_slots: int = 0  # tolerance after the expected slot; 0 = exact
    missing_is_nack: bool = True

    def __post_init__(self):
        if self.feedback_delay_slots < 1:
            raise ValueError("feedback delay must be >= 1 slot")
        if self.window_slots < 0:
            raise ValueError("window must be >= 0")


@dataclass
class Feedback:
    kind: FeedbackKind
    harq_process_id: int
    source_claimed_l2: int  # who the burst claims to come from
    slot: int
    observed_rsrp_dbm: float


@dataclass
class FeedbackBurst:
    """PSFCH payload: one bit of feedback plus addressing context."""

    CHANNEL = "PSFCH"

    ack: bool
    harq_process_id: int
    src_l2: int  # claimed feedback sender (the TB receiver)
    dst_l2: int  # TB sender being answered
    spoofed: bool = False  # ground truth for metrics, invisible to logic


@dataclass
class DataBurst:
    """PSSCH payload: a transport block with its piggybacked control."""

    CHANNEL = "PSSCH"

    sci1_bits: object  # BitString for the pool's SCI 1-A layout
    sci2_bits: object  # BitString, 35-bit SCI 2-A
    mac_src_l2: int
    mac_dst_l2: int  # 2^24-1 for broadcast
    tb_id: int
    size_bytes: int


class Action(Enum):
    COMPLETE = "complete"
    RETRANSMIT = "retransmit"
    FAIL = "fail"


@dataclass
class HarqProcess:
    process_id: int
    max_retransmissions: int = 3
    ndi: int = 0
    state: TbState = TbState.IDLE
    attempts: int = 0
    tb_id: int | None = None
    dest_l2: int | None = None
    history: list[int] = field(default_factory=list)  # rv per attempt, for audits

    def __post_init__(self):
        if not 0 <= self.process_id <= MAX_PROCESS_ID:
            raise ValueError(f"process id {self.process_id} outside 0..{MAX_PROCESS_ID}")

    @property
    def rv(self) -> int:
        if self.attempts == 0:
            return RV_SEQUENCE[0]
        return RV_SEQUENCE[(self.attempts - 1) % len(RV_SEQUENCE)]

    def start_tb(self, tb_id: int, dest_l2: int):
        if self.state == TbState.AWAITING_FEEDBACK:
            raise ValueError(f"process {self.process_id} still has a TB in flight")
        self.ndi ^= 1
        self.attempts = 0
        self.tb_id = tb_id
        self.dest_l2 = dest_l2
        self.state = TbState.IDLE
        self.history.clear()

    def record_transmission(self) -> tuple[int, int]:
        """Count one (re)transmission; returns (ndi, rv) for the SCI."""
        if self.tb_id is None:
            raise ValueError("no TB loaded")
        self.attempts += 1
        if self.attempts > self.max_retransmissions + 1:
            raise AssertionError("transmitted beyond the retransmission bound")
        self.state = TbState.AWAITING_FEEDBACK
        self.history.append(self.rv)
        return self.ndi, self.rv

    def on_feedback(self, kind: FeedbackKind | None, cfg: FeedbackConfig) -> Action:
        """Resolve the window outcome; None means nothing arrived."""
        if self.state != TbState.AWAITING_FEEDBACK:
            raise ValueError(f"process {self.process_id} not awaiting feedback")
        if kind is None and not cfg.missing_is_nack:
            kind = FeedbackKind.ACK
        if kind == FeedbackKind.ACK:
            self.state = TbState.DONE
            return Action.COMPLETE
        if self.attempts <= self.max_retransmissions:
            self.state = TbState.IDLE  # ready for the next occurrence
            return Action.RETRANSMIT
        self.state = TbState.FAILED
        return Action.FAIL


def feedback_for_tb(crc_ok: bool, harq_enabled: bool, process_id: int,
                    receiver_l2: int, sender_l2: int) -> FeedbackBurst | None:
    """Receiver-side feedback decision for an addressed TB."""
    if not harq_enabled:
        return None
    return FeedbackBurst(
        ack=crc_ok,
        harq_process_id=process_id,
        src_l2=receiver_l2,
        dst_l2=sender_l2,
    )


def in_window(slot: int, expected_slot: int, cfg: FeedbackConfig) -> bool:
    return expected_slot <= slot <= expected_slot + cfg.window_slots


def arbitrate_feedback(
    candidates: list[Feedback],
    expected_slot: int,
    cfg: FeedbackConfig,
) -> tuple[Feedback | None, list[Feedback]]:
    """Pick the winning in-window feedback; returns (winner, discarded).

    Stronger received power wins; ties go to the earlier slot, then to
    ACK over NACK. Anything outside the window is discarded.
    """
    kept, discarded = [], []
    for fb in candidates:
        (kept if in_window(fb.slot, expected_slot, cfg) else discarded).append(fb)
    if not kept:
        return None, discarded
    winner = sorted(
        kept,
        key=lambda f: (-f.observed_rsrp_dbm, f.slot, 0 if f.kind == FeedbackKind.ACK else 1),
    )[0]
    return winner, discarded
