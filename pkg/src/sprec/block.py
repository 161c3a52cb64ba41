"""Wire format for one coded block.

Header, big-endian::

    format_version  u8   (currently 1)
    D               u16
    per_dim_counts  u16 x D
    base_seed       u64
    generator_id    u8   (1 = Philox4x32-10 keyed uniforms)
    zeta            f64  (Zipf parameter of the local-index model)

Payload, MSB first: the bin index as a ceil(log2 J)-bit unsigned integer,
then the range-coded local index. Trailing zero bits of the payload are
dropped; readers treat missing bits as zero.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

from .index_codec import BitReader, BitWriter, ZipfModel, decode_index, encode_index
from .rec import CodePoint
from .streams import GENERATOR_ID

FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


@dataclass(frozen=True)
class BlockHeader:
    counts: tuple
    base_seed: int
    zeta: float
    generator_id: int = GENERATOR_ID
    format_version: int = FORMAT_VERSION

    @property
    def total_bins(self) -> int:
        return math.prod(self.counts)

    @property
    def bin_bits(self) -> int:
        return (self.total_bins - 1).bit_length()

    def pack(self) -> bytes:
        if not 1 <= len(self.counts) <= 0xFFFF:
            raise FormatError("dimension count must fit in u16")
        if any(not 1 <= c <= 0xFFFF for c in self.counts):
            raise FormatError(f"per-axis interval counts must fit in u16, got {self.counts}")
        fmt = f">BH{len(self.counts)}HQBd"
        return struct.pack(fmt, self.format_version, len(self.counts), *self.counts,
                           self.base_seed & 0xFFFFFFFFFFFFFFFF, self.generator_id, self.zeta)

    @classmethod
    def unpack(cls, data: bytes) -> tuple["BlockHeader", int]:
        """Parse a header; returns it with its length in bytes."""
        if len(data) < 3:
            raise FormatError("truncated header")
        version, dims = struct.unpack_from(">BH", data, 0)
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported format version {version}")
        fmt = f">BH{dims}HQBd"
        size = struct.calcsize(fmt)
        if len(data) < size:
            raise FormatError("truncated header")
        fields = struct.unpack_from(fmt, data, 0)
        counts = tuple(fields[2:2 + dims])
        seed, gen, zeta = fields[2 + dims:]
        if gen != GENERATOR_ID:
            raise FormatError(f"unknown generator id {gen}")
        return cls(counts, seed, zeta, gen, version), size


def pack_block(header: BlockHeader, code: CodePoint) -> bytes:
    if not 0 <= code.bin < header.total_bins:
        raise FormatError(f"bin {code.bin} out of range for {header.total_bins} bins")
    writer = BitWriter()
    writer.write(code.bin, header.bin_bits)
    encode_index(ZipfModel(header.zeta), code.local_index, writer)
    return header.pack() + writer.getvalue(strip_trailing_zeros=True)


def unpack_block(data: bytes) -> tuple[BlockHeader, CodePoint]:
    header, offset = BlockHeader.unpack(data)
    reader = BitReader(data[offset:])
    j = reader.read(header.bin_bits)
    if j >= header.total_bins:
        raise FormatError(f"bin {j} out of range for {header.total_bins} bins")
    n = decode_index(ZipfModel(header.zeta), reader)
    return header, CodePoint(j, n)
