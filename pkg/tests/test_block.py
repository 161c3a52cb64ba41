import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sprec.block import BlockHeader, FormatError, pack_block, unpack_block
from sprec.distributions import FactorizedDistribution
from sprec.partition import build_partition
from sprec.rec import CodePoint, decode

# Frozen bytes: format version 1, counts (4, 2, 1), seed 123, Philox id 1, zeta 0.5,
# then 3 bin bits and the range-coded index.
GOLDEN = [
    (CodePoint(0, 1), "010003000400020001000000000000007b013fe0000000000000"),
    (CodePoint(7, 2), "010003000400020001000000000000007b013fe0000000000000fc"),
    (CodePoint(5, 2 ** 32), "010003000400020001000000000000007b013fe0000000000000bfffffffdffffffffff8"),
]
GOLDEN_SAMPLE = [0.9854018016065901, 1.6603361792827265, -7.59748843271532]


@pytest.mark.parametrize("code,hexdata", GOLDEN)
def test_golden_blocks(code, hexdata):
    header = BlockHeader((4, 2, 1), 123, 0.5)
    assert pack_block(header, code).hex() == hexdata
    assert unpack_block(bytes.fromhex(hexdata)) == (header, code)


def test_golden_decoded_sample():
    # the shared stream is part of the format: this sample must never change
    prior = FactorizedDistribution.gaussian([0.0, 1.0, -2.0], [1.0, 0.5, 3.0])
    header, code = unpack_block(bytes.fromhex(GOLDEN[1][1]))
    z = decode(prior, build_partition(prior, header.counts), code, header.base_seed)
    assert z.tolist() == GOLDEN_SAMPLE


@given(st.lists(st.integers(1, 300), min_size=1, max_size=4), st.integers(0, 2 ** 64 - 1),
       st.floats(0.01, 100), st.data())
def test_roundtrip(counts, seed, zeta, data):
    header = BlockHeader(tuple(counts), seed, zeta)
    j = data.draw(st.integers(0, header.total_bins - 1))
    n = data.draw(st.integers(1, 2 ** 32))
    assert unpack_block(pack_block(header, CodePoint(j, n))) == (header, CodePoint(j, n))


def test_single_bin_uses_no_bin_bits():
    assert BlockHeader((1, 1), 0, 1.0).bin_bits == 0
    assert BlockHeader((4, 2), 0, 1.0).bin_bits == 3
    assert BlockHeader((3,), 0, 1.0).bin_bits == 2


def test_format_errors():
    header = BlockHeader((4,), 1, 1.0)
    with pytest.raises(FormatError):
        pack_block(header, CodePoint(4, 1))
    with pytest.raises(FormatError):
        BlockHeader((70000,), 1, 1.0).pack()
    good = pack_block(header, CodePoint(1, 1))
    with pytest.raises(FormatError):
        unpack_block(b"\x02" + good[1:])
    with pytest.raises(FormatError):
        unpack_block(good[:5])
    bad_gen = bytearray(good)
    bad_gen[2 + 2 + 8 + 1] = 9  # version, D, one count, seed, then generator id
    with pytest.raises(FormatError):
        unpack_block(bytes(bad_gen))
    # header claims 3 bins but payload bits say bin 3
    with pytest.raises(FormatError):
        unpack_block(BlockHeader((3,), 1, 1.0).pack() + bytes([0b11000000]))
