"""Bit-level codec checks: fixed widths, round-trip identity, fixtures."""

import random

import pytest

from sidelinksim.frames import (
    PROTECTION,
    BitReader,
    BitString,
    BitWriter,
    CastType,
    CoverageClass,
    MibSl,
    Pc5Message,
    Pc5MessageKind,
    Sci1A,
    Sci2A,
    SecurityPhase,
    SlssIdentity,
    fra_decode,
    fra_encode,
    fra_value_count,
    fra_width,
    tra_decode,
    tra_encode,
    tra_width,
)
from sidelinksim.resources import ResourcePool

POOL_4x10 = ResourcePool(4, 10, [100, 1000])
POOL_10x20 = ResourcePool(10, 20, [20, 50, 100, 1000], sl_max_num_per_reserve=3)


def test_bitstring_rejects_bad_padding():
    with pytest.raises(ValueError):
        BitString(b"\xff", 4)  # low pad bits must be zero
    BitString(b"\xf0", 4)  # ok


def test_bitwriter_reader_round_trip():
    rng = random.Random(99)
    for _ in range(200):
        widths = [rng.randint(1, 24) for _ in range(rng.randint(1, 8))]
        values = [rng.getrandbits(w) for w in widths]
        w = BitWriter()
        for v, width in zip(values, widths):
            w.write(v, width)
        bs = w.finish()
        assert bs.bit_length == sum(widths)
        r = BitReader(bs)
        assert [r.read(width) for width in widths] == values
        r.expect_end()


def test_mib_sl_is_exactly_32_bits():
    mib = MibSl(tdd_config=0x0AB, in_coverage=True, direct_frame_number=517, slot_index=44)
    assert mib.encode().bit_length == 32


def test_mib_sl_round_trip():
    rng = random.Random(1)
    for _ in range(1000):
        mib = MibSl(
            tdd_config=rng.getrandbits(12),
            in_coverage=bool(rng.getrandbits(1)),
            direct_frame_number=rng.getrandbits(10),
            slot_index=rng.getrandbits(7),
            reserved=rng.getrandbits(2),
        )
        assert MibSl.decode(mib.encode()) == mib


def test_mib_sl_rejects_wrong_length():
    with pytest.raises(ValueError):
        MibSl.decode(BitString(b"\x00\x00\x00", 24))


def test_sci_2a_is_exactly_35_bits():
    sci = Sci2A(3, 1, 2, 0x5A, 0xBEEF, True, CastType.UNICAST)
    assert sci.encode().bit_length == 35


def test_sci_2a_round_trip():
    rng = random.Random(2)
    for _ in range(1000):
        sci = Sci2A(
            harq_process_id=rng.getrandbits(4),
            ndi=rng.getrandbits(1),
            rv=rng.getrandbits(2),
            source_id=rng.getrandbits(8),
            dest_id=rng.getrandbits(16),
            harq_enabled=bool(rng.getrandbits(1)),
            cast_type=CastType(rng.randrange(3)),
            csi_request=rng.getrandbits(1),
        )
        assert Sci2A.decode(sci.encode()) == sci


def test_sci_2a_for_tb_truncates_l2_ids():
    sci = Sci2A.for_tb(1, 0, 0,
                       src_l2=0xABCDEF, dst_l2=0x123456,
                       harq_enabled=True, cast_type=CastType.UNICAST)
    assert sci.source_id == 0xEF
    assert sci.dest_id == 0x3456


# frozen width anchors for the two reference pools
def test_sci_1a_width_anchors():
    assert Sci1A.bit_length(POOL_4x10) == 26
    assert Sci1A.bit_length(POOL_10x20) == 36


def test_sci_1a_round_trip_both_pools():
    rng = random.Random(3)
    for pool in (POOL_4x10, POOL_10x20):
        widths = Sci1A.field_widths(pool)
        for _ in range(500):
            sci = Sci1A(**{name: rng.getrandbits(w) for name, w in widths.items()})
            assert Sci1A.decode(pool, sci.encode(pool)) == sci


def test_sci_1a_rejects_wrong_pool_length():
    sci = Sci1A(priority=1, frequency_resource=0, time_resource=0, rri_index=0, mcs=9)
    bits = sci.encode(POOL_4x10)
    with pytest.raises(ValueError):
        Sci1A.decode(POOL_10x20, bits)


def test_fra_bijection():
    for n, reserve in ((4, 2), (10, 2), (4, 3), (10, 3)):
        count = fra_value_count(n, reserve)
        assert count <= 1 << fra_width(n, reserve)
        seen = set()
        for length in range(1, n + 1):
            for start in range(n - length + 1):
                starts2 = range(n - length + 1) if reserve == 3 else [0]
                for start2 in starts2:
                    v = fra_encode(n, reserve, start, length, start2)
                    assert v not in seen
                    seen.add(v)
                    assert fra_decode(n, reserve, v) == (start, length, start2)
        assert seen == set(range(count))


def test_fra_rejects_out_of_range():
    with pytest.raises(ValueError):
        fra_encode(4, 2, 3, 2)  # start 3 + length 2 > 4 subchannels
    with pytest.raises(ValueError):
        fra_decode(4, 2, fra_value_count(4, 2))


def test_tra_bijection():
    seen = {tra_encode(3, ())}
    for k1 in range(1, 32):
        seen.add(tra_encode(3, (k1,)))
        for k2 in range(k1 + 1, 32):
            v = tra_encode(3, (k1, k2))
            assert v not in seen
            seen.add(v)
            assert tra_decode(3, v) == (k1, k2)
    # () + 31 singles + C(31,2) pairs
    assert len(seen) == 1 + 31 + 31 * 30 // 2
    assert seen == set(range(len(seen)))
    assert 1 + 31 + 31 * 30 // 2 <= 1 << tra_width(3)
    # two-per-reserve claims never carry a second gap
    with pytest.raises(ValueError):
        tra_encode(2, (1, 2))
    assert tra_decode(2, 31) == (31,)


def test_slss_identity_rejects_out_of_range():
    with pytest.raises(ValueError):
        SlssIdentity(672, False)
    with pytest.raises(ValueError):
        SlssIdentity(-1, True)


def test_slss_coverage_boundaries():
    assert SlssIdentity(0, True).coverage_class is CoverageClass.GNSS_DIRECT
    assert SlssIdentity(1, True).coverage_class is CoverageClass.IN_COVERAGE
    assert SlssIdentity(335, True).coverage_class is CoverageClass.IN_COVERAGE
    assert SlssIdentity(336, False).coverage_class is CoverageClass.OUT_OF_COVERAGE
    assert SlssIdentity(671, False).coverage_class is CoverageClass.OUT_OF_COVERAGE


def test_slss_sequence_mapping_is_bijective():
    seen = set()
    for s_pss in (0, 1):
        for s_sss in range(336):
            ident = SlssIdentity.from_sequences(s_pss, s_sss, False)
            assert (ident.s_pss, ident.s_sss) == (s_pss, s_sss)
            seen.add(ident.slss_id)
    assert len(seen) == 672
    assert seen == set(range(672))


# the full 23-row protection fixture, transcribed independently:
# (ciphered, integrity-protected, lifecycle phase)
PROTECTION_FIXTURE = {
    1: (False, False, "before"),   # establishment request
    2: (True, True, "after"),      # establishment accept
    3: (True, True, "after"),      # modification request
    4: (True, True, "after"),      # modification accept
    5: (True, True, "after"),      # release request
    6: (True, True, "after"),      # release accept
    7: (True, True, "after"),      # keepalive request
    8: (True, True, "after"),      # keepalive response
    9: (False, False, "before"),   # authentication request
    10: (False, False, "before"),  # authentication response
    11: (False, False, "before"),  # authentication reject
    12: (False, True, "during"),   # security mode command
    13: (True, True, "during"),    # security mode complete
    14: (False, False, "during"),  # security mode reject
    15: (True, True, "after"),     # rekeying request
    16: (True, True, "after"),     # rekeying response
    17: (True, True, "after"),     # identifier update request
    18: (True, True, "after"),     # identifier update accept
    19: (True, True, "after"),     # identifier update ack
    20: (True, True, "after"),     # identifier update reject
    21: (True, True, "after"),     # modification reject
    22: (False, False, "before"),  # establishment reject
    23: (False, False, "before"),  # authentication failure
}


def test_protection_profile_matches_fixture():
    assert len(PROTECTION) == 23
    assert set(PROTECTION) == set(Pc5MessageKind)
    for kind, (ciphered, integrity, phase) in PROTECTION_FIXTURE.items():
        prof = PROTECTION[Pc5MessageKind(kind)]
        assert prof.ciphered is ciphered, kind
        assert prof.integrity is integrity, kind
        assert prof.phase is SecurityPhase(phase), kind


def test_pc5_message_field_validation():
    with pytest.raises(ValueError):
        Pc5Message(Pc5MessageKind.KEEPALIVE_REQUEST, 1 << 24, 5, 0)
    with pytest.raises(ValueError):
        Pc5Message(Pc5MessageKind.KEEPALIVE_REQUEST, 5, 6, 1 << 32)
