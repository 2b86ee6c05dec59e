"""Sidelink air-interface payload codecs.

Everything here is a pure codec: dataclasses describing what a payload
carries, plus encode/decode against the big-endian bit layouts below.
No channel state, no timing.

MIB-SL (32 bits, broadcast on PSBCH):

    +----------------+------+---------------------------------------+
    | field          | bits | meaning                               |
    +----------------+------+---------------------------------------+
    | tdd_config     |  12  | uplink/downlink slot pattern index    |
    | in_coverage    |   1  | transmitter hears a network directly  |
    | frame_number   |  10  | direct frame number, 0..1023          |
    | slot_index     |   7  | slot within the frame, 0..127         |
    | reserved       |   2  | spare, transmitted as written         |
    +----------------+------+---------------------------------------+

SCI 2-A (35 bits, second-stage control on PSSCH):

    +------------------+------+-------------------------------------+
    | harq_process_id  |   4  | process the TB belongs to           |
    | ndi              |   1  | new-data indicator                  |
    | rv               |   2  | redundancy version index            |
    | source_id        |   8  | low 8 bits of source L2 id          |
    | dest_id          |  16  | low 16 bits of destination L2 id    |
    | harq_enabled     |   1  | feedback requested on PSFCH         |
    | cast_type        |   2  | broadcast / groupcast / unicast     |
    | csi_request      |   1  | channel state report request        |
    +------------------+------+-------------------------------------+

SCI 1-A widths depend on the resource pool; see Sci1A.field_widths.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from math import ceil, log2
from typing import Any

from .bits import BitReader, BitString, BitWriter

L2_ID_BITS = 24
L2_ID_MASK = (1 << L2_ID_BITS) - 1

SLSS_COUNT = 672  # 2 PSS sequences x 336 SSS sequences
MIB_SL_BITS = 32
SCI_2A_BITS = 35


def check_l2_id(value: int, label: str = "l2 id") -> int:
    if not 0 <= value <= L2_ID_MASK:
        raise ValueError(f"{label} {value} outside 24-bit range")
    return value


# ---------------------------------------------------------------------------
# synchronization identity and MIB-SL


class CoverageClass(Enum):
    """Which population an SLSS id belongs to, a pure function of the id."""

    GNSS_DIRECT = "gnss_direct"        # id 0: transmitter syncs straight off GNSS
    IN_COVERAGE = "in_coverage"        # ids 1..335: assigned under network coverage
    OUT_OF_COVERAGE = "out_of_coverage"  # ids 336..671: self-selected outside coverage


@dataclass(frozen=True)
class SlssIdentity:
    """Sidelink sync signal identity plus the priority indicator I_C.

    The id itself rides in the PSS/SSS sequence pair, the indicator in
    the accompanying system information; both travel with every sync
    burst so they are kept together here. I_C true means the sender is
    itself locked to a primary source (GNSS or a base station).
    """

    slss_id: int
    in_coverage: bool

    def __post_init__(self):
        if not 0 <= self.slss_id < SLSS_COUNT:
            raise ValueError(f"slss_id {self.slss_id} outside 0..{SLSS_COUNT - 1}")

    @property
    def s_pss(self) -> int:
        return self.slss_id // 336

    @property
    def s_sss(self) -> int:
        return self.slss_id % 336

    @classmethod
    def from_sequences(cls, s_pss: int, s_sss: int, in_coverage: bool) -> "SlssIdentity":
        if s_pss not in (0, 1):
            raise ValueError(f"s_pss {s_pss} not in {{0, 1}}")
        if not 0 <= s_sss < 336:
            raise ValueError(f"s_sss {s_sss} outside 0..335")
        return cls(336 * s_pss + s_sss, in_coverage)

    @property
    def coverage_class(self) -> CoverageClass:
        if self.slss_id == 0:
            return CoverageClass.GNSS_DIRECT
        if self.slss_id <= 335:
            return CoverageClass.IN_COVERAGE
        return CoverageClass.OUT_OF_COVERAGE


@dataclass
class MibSl:
    tdd_config: int
    in_coverage: bool
    direct_frame_number: int
    slot_index: int
    reserved: int = 0

    def encode(self) -> BitString:
        w = BitWriter()
        w.write(self.tdd_config, 12)
        w.write(int(self.in_coverage), 1)
        w.write(self.direct_frame_number, 10)
        w.write(self.slot_index, 7)
        w.write(self.reserved, 2)
        return w.finish()

    @classmethod
    def decode(cls, payload: BitString) -> "MibSl":
        if payload.bit_length != MIB_SL_BITS:
            raise ValueError(f"MIB-SL is {MIB_SL_BITS} bits, got {payload.bit_length}")
        r = BitReader(payload)
        mib = cls(
            tdd_config=r.read(12),
            in_coverage=bool(r.read(1)),
            direct_frame_number=r.read(10),
            slot_index=r.read(7),
            reserved=r.read(2),
        )
        r.expect_end()
        return mib


# ---------------------------------------------------------------------------
# frequency / time resource assignment packings for SCI 1-A

MAX_TIME_GAP = 31  # slot gap field range for later reservations


def fra_value_count(num_subchannels: int, max_reserve: int) -> int:
    n = num_subchannels
    if max_reserve == 2:
        return n * (n + 1) // 2
    if max_reserve == 3:
        return n * (n + 1) * (2 * n + 1) // 6
    raise ValueError(f"max_reserve {max_reserve} not in {{2, 3}}")


def fra_width(num_subchannels: int, max_reserve: int) -> int:
    return ceil(log2(fra_value_count(num_subchannels, max_reserve)))


def tra_width(max_reserve: int) -> int:
    if max_reserve == 2:
        return 5
    if max_reserve == 3:
        return 9
    raise ValueError(f"max_reserve {max_reserve} not in {{2, 3}}")


def fra_encode(num_subchannels: int, max_reserve: int,
               start: int, length: int, start2: int = 0) -> int:
    """Index of a contiguous subchannel assignment.

    Enumeration is lexicographic over (length, start) and, when three
    reservations are allowed, the second occurrence's start too. start2
    is ignored for max_reserve == 2.
    """
    n = num_subchannels
    if not 1 <= length <= n:
        raise ValueError(f"length {length} outside 1..{n}")
    if not 0 <= start <= n - length:
        raise ValueError(f"start {start} leaves no room for length {length}")
    index = 0
    for shorter in range(1, length):
        span = n - shorter + 1
        index += span if max_reserve == 2 else span * span
    if max_reserve == 2:
        return index + start
    if not 0 <= start2 <= n - length:
        raise ValueError(f"start2 {start2} leaves no room for length {length}")
    return index + start * (n - length + 1) + start2


def fra_decode(num_subchannels: int, max_reserve: int, value: int) -> tuple[int, int, int]:
    """Inverse of fra_encode; returns (start, length, start2)."""
    n = num_subchannels
    if not 0 <= value < fra_value_count(n, max_reserve):
        raise ValueError(f"fra value {value} out of range")
    for length in range(1, n + 1):
        span = n - length + 1
        block = span if max_reserve == 2 else span * span
        if value < block:
            if max_reserve == 2:
                return value, length, 0
            return value // span, length, value % span
        value -= block
    raise AssertionError("unreachable: value bounded by fra_value_count")


def tra_encode(max_reserve: int, gaps: tuple[int, ...]) -> int:
    """Index of the slot gaps to later reservations of the same claim.

    Gaps are strictly increasing values in 1..31. Zero gaps means the
    claim covers a single occurrence per period.
    """
    if len(gaps) > max_reserve - 1:
        raise ValueError(f"{len(gaps)} gaps exceed max_reserve {max_reserve}")
    for g in gaps:
        if not 1 <= g <= MAX_TIME_GAP:
            raise ValueError(f"gap {g} outside 1..{MAX_TIME_GAP}")
    if not gaps:
        return 0
    if len(gaps) == 1:
        return gaps[0]
    k1, k2 = gaps
    if k2 <= k1:
        raise ValueError(f"gaps must increase, got {gaps}")
    # after the 31 single-gap codes, pairs (k1, k2) in lexicographic order
    index = 1 + MAX_TIME_GAP
    index += (k1 - 1) * MAX_TIME_GAP - k1 * (k1 - 1) // 2
    return index + (k2 - k1 - 1)


def tra_decode(max_reserve: int, value: int) -> tuple[int, ...]:
    if value == 0:
        return ()
    if value <= MAX_TIME_GAP:
        return (value,)
    if max_reserve != 3:
        raise ValueError(f"tra value {value} out of range for max_reserve 2")
    value -= 1 + MAX_TIME_GAP
    for k1 in range(1, MAX_TIME_GAP + 1):
        pairs = MAX_TIME_GAP - k1
        if value < pairs:
            return (k1, k1 + 1 + value)
        value -= pairs
    raise ValueError("tra value out of range")


# ---------------------------------------------------------------------------
# SCI stages


@dataclass
class Sci1A:
    """First-stage control: where the data sits and how it repeats."""

    priority: int
    frequency_resource: int
    time_resource: int
    rri_index: int
    mcs: int
    dmrs_pattern: int = 0
    second_stage_format: int = 0
    beta_offset: int = 0
    dmrs_ports: int = 0
    additional_mcs: int = 0
    psfch_overhead: int = 0
    reserved: int = 0

    @staticmethod
    def field_widths(pool) -> dict[str, int]:
        """Per-field bit widths for a given resource pool configuration."""
        rri_entries = len(pool.period_list_ms)
        dmrs_entries = len(pool.dmrs_patterns)
        return {
            "priority": 3,
            "frequency_resource": fra_width(pool.num_subchannels, pool.sl_max_num_per_reserve),
            "time_resource": tra_width(pool.sl_max_num_per_reserve),
            "rri_index": ceil(log2(rri_entries)) if rri_entries > 1 else 0,
            "dmrs_pattern": ceil(log2(dmrs_entries)) if dmrs_entries > 1 else 0,
            "second_stage_format": 2,
            "beta_offset": 2,
            "dmrs_ports": 1,
            "mcs": 5,
            "additional_mcs": pool.additional_mcs_tables,
            "psfch_overhead": 1 if pool.psfch_period in (2, 4) else 0,
            "reserved": pool.num_reserved_bits,
        }

    @staticmethod
    def bit_length(pool) -> int:
        return sum(Sci1A.field_widths(pool).values())

    def encode(self, pool) -> BitString:
        w = BitWriter()
        for name, width in self.field_widths(pool).items():
            w.write(getattr(self, name), width)
        return w.finish()

    @classmethod
    def decode(cls, pool, payload: BitString) -> "Sci1A":
        widths = cls.field_widths(pool)
        expected = sum(widths.values())
        if payload.bit_length != expected:
            raise ValueError(
                f"SCI 1-A for this pool is {expected} bits, got {payload.bit_length}"
            )
        r = BitReader(payload)
        fields = {name: r.read(width) for name, width in widths.items()}
        r.expect_end()
        return cls(**fields)


class CastType(IntEnum):
    UNICAST = 0
    GROUPCAST = 1
    BROADCAST = 2


@dataclass
class Sci2A:
    """Second-stage control: who the TB is for and its HARQ context."""

    harq_process_id: int
    ndi: int
    rv: int
    source_id: int
    dest_id: int
    harq_enabled: bool
    cast_type: CastType
    csi_request: int = 0

    def encode(self) -> BitString:
        w = BitWriter()
        w.write(self.harq_process_id, 4)
        w.write(self.ndi, 1)
        w.write(self.rv, 2)
        w.write(self.source_id, 8)
        w.write(self.dest_id, 16)
        w.write(int(self.harq_enabled), 1)
        w.write(int(self.cast_type), 2)
        w.write(self.csi_request, 1)
        return w.finish()

    @classmethod
    def decode(cls, payload: BitString) -> "Sci2A":
        if payload.bit_length != SCI_2A_BITS:
            raise ValueError(f"SCI 2-A is {SCI_2A_BITS} bits, got {payload.bit_length}")
        r = BitReader(payload)
        sci = cls(
            harq_process_id=r.read(4),
            ndi=r.read(1),
            rv=r.read(2),
            source_id=r.read(8),
            dest_id=r.read(16),
            harq_enabled=bool(r.read(1)),
            cast_type=CastType(r.read(2)),
            csi_request=r.read(1),
        )
        r.expect_end()
        return sci

    @classmethod
    def for_tb(cls, process_id: int, ndi: int, rv: int, src_l2: int, dst_l2: int,
               harq_enabled: bool, cast_type: CastType) -> "Sci2A":
        """Build from full L2 ids, truncating to the on-air widths."""
        return cls(
            harq_process_id=process_id,
            ndi=ndi,
            rv=rv,
            source_id=check_l2_id(src_l2, "source l2") & 0xFF,
            dest_id=check_l2_id(dst_l2, "dest l2") & 0xFFFF,
            harq_enabled=harq_enabled,
            cast_type=cast_type,
        )


# ---------------------------------------------------------------------------
# PC5 signalling message set


class SecurityPhase(Enum):
    """When in a link's life a message legitimately appears."""

    BEFORE = "before"   # no security context yet
    DURING = "during"   # security mode exchange itself
    AFTER = "after"     # established context required


class Pc5MessageKind(IntEnum):
    ESTABLISHMENT_REQUEST = 1
    ESTABLISHMENT_ACCEPT = 2
    MODIFICATION_REQUEST = 3
    MODIFICATION_ACCEPT = 4
    RELEASE_REQUEST = 5
    RELEASE_ACCEPT = 6
    KEEPALIVE_REQUEST = 7
    KEEPALIVE_RESPONSE = 8
    AUTHENTICATION_REQUEST = 9
    AUTHENTICATION_RESPONSE = 10
    AUTHENTICATION_REJECT = 11
    SECURITY_MODE_COMMAND = 12
    SECURITY_MODE_COMPLETE = 13
    SECURITY_MODE_REJECT = 14
    REKEYING_REQUEST = 15
    REKEYING_RESPONSE = 16
    IDENTIFIER_UPDATE_REQUEST = 17
    IDENTIFIER_UPDATE_ACCEPT = 18
    IDENTIFIER_UPDATE_ACK = 19
    IDENTIFIER_UPDATE_REJECT = 20
    MODIFICATION_REJECT = 21
    ESTABLISHMENT_REJECT = 22
    AUTHENTICATION_FAILURE = 23


@dataclass(frozen=True)
class Protection:
    ciphered: bool
    integrity: bool
    phase: SecurityPhase


_B, _D, _A = SecurityPhase.BEFORE, SecurityPhase.DURING, SecurityPhase.AFTER

PROTECTION: dict[Pc5MessageKind, Protection] = {
    Pc5MessageKind.ESTABLISHMENT_REQUEST: Protection(False, False, _B),
    Pc5MessageKind.ESTABLISHMENT_ACCEPT: Protection(True, True, _A),
    Pc5MessageKind.MODIFICATION_REQUEST: Protection(True, True, _A),
    Pc5MessageKind.MODIFICATION_ACCEPT: Protection(True, True, _A),
    Pc5MessageKind.RELEASE_REQUEST: Protection(True, True, _A),
    Pc5MessageKind.RELEASE_ACCEPT: Protection(True, True, _A),
    Pc5MessageKind.KEEPALIVE_REQUEST: Protection(True, True, _A),
    Pc5MessageKind.KEEPALIVE_RESPONSE: Protection(True, True, _A),
    Pc5MessageKind.AUTHENTICATION_REQUEST: Protection(False, False, _B),
    Pc5MessageKind.AUTHENTICATION_RESPONSE: Protection(False, False, _B),
    Pc5MessageKind.AUTHENTICATION_REJECT: Protection(False, False, _B),
    Pc5MessageKind.SECURITY_MODE_COMMAND: Protection(False, True, _D),
    Pc5MessageKind.SECURITY_MODE_COMPLETE: Protection(True, True, _D),
    Pc5MessageKind.SECURITY_MODE_REJECT: Protection(False, False, _D),
    Pc5MessageKind.REKEYING_REQUEST: Protection(True, True, _A),
    Pc5MessageKind.REKEYING_RESPONSE: Protection(True, True, _A),
    Pc5MessageKind.IDENTIFIER_UPDATE_REQUEST: Protection(True, True, _A),
    Pc5MessageKind.IDENTIFIER_UPDATE_ACCEPT: Protection(True, True, _A),
    Pc5MessageKind.IDENTIFIER_UPDATE_ACK: Protection(True, True, _A),
    Pc5MessageKind.IDENTIFIER_UPDATE_REJECT: Protection(True, True, _A),
    Pc5MessageKind.MODIFICATION_REJECT: Protection(True, True, _A),
    Pc5MessageKind.ESTABLISHMENT_REJECT: Protection(False, False, _B),
    Pc5MessageKind.AUTHENTICATION_FAILURE: Protection(False, False, _B),
}


@dataclass
class Pc5Message:
    """One PC5 signalling PDU as it rides the air.

    body values are ints or strings (byte fields travel hex-encoded) so
    the canonical serialization is unambiguous. counter is the 32-bit
    anti-replay counter covered by the MAC. cipher_blob replaces the
    body on the wire when the message is confidentiality-protected, and
    auth_tag carries the truncated MAC when integrity-protected.
    """

    kind: Pc5MessageKind
    src_l2: int
    dst_l2: int
    counter: int
    body: dict[str, Any] = field(default_factory=dict)
    cipher_blob: str | None = None
    auth_tag: str | None = None

    def __post_init__(self):
        check_l2_id(self.src_l2, "src l2")
        check_l2_id(self.dst_l2, "dst l2")
        if not 0 <= self.counter < (1 << 32):
            raise ValueError(f"counter {self.counter} outside 32-bit range")

    def header_bytes(self) -> bytes:
        return json.dumps(
            [int(self.kind), self.src_l2, self.dst_l2, self.counter],
            separators=(",", ":"),
        ).encode()

    def body_bytes(self) -> bytes:
        for key, value in self.body.items():
            if not isinstance(value, (int, str)):
                raise ValueError(f"body field {key!r} must be int or str")
        return json.dumps(sorted(self.body.items()), separators=(",", ":")).encode()

    def mac_input(self) -> bytes:
        """Bytes covered by the integrity tag: header plus wire payload."""
        wire = self.cipher_blob.encode() if self.cipher_blob is not None else self.body_bytes()
        return self.header_bytes() + b"|" + wire

    @property
    def protection(self) -> Protection:
        return PROTECTION[self.kind]
