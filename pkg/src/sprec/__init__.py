"""Relative entropy coding with space partitioning.

Exact (PFR) and fixed-budget (ORC) samplers, their space-partitioned
variants, a two-part bitstream, and the diagnostics used to study them.
"""

from .block import BlockHeader, FormatError, pack_block, unpack_block
from .distributions import (
    UNBOUNDED,
    FactorizedDistribution,
    Gaussian,
    RecTask,
    Uniform,
    kl_bits,
    renyi_inf_bits,
)
from .index_codec import ZipfModel, decode_indices, encode_indices, fit_zeta
from .partition import GridPartition, allocate_intervals, build_partition, locate_bin
from .rec import (
    CodePoint,
    EncodeReport,
    InfiniteRatio,
    PiChoice,
    decode,
    encode_orc,
    encode_pfr,
    encode_sp_orc,
    encode_sp_pfr,
    heuristic_kl_bits,
)

__all__ = [
    "BlockHeader", "FormatError", "pack_block", "unpack_block",
    "UNBOUNDED", "FactorizedDistribution", "Gaussian", "RecTask", "Uniform",
    "kl_bits", "renyi_inf_bits",
    "ZipfModel", "decode_indices", "encode_indices", "fit_zeta",
    "GridPartition", "allocate_intervals", "build_partition", "locate_bin",
    "CodePoint", "EncodeReport", "InfiniteRatio", "PiChoice", "decode", "encode_orc",
    "encode_pfr", "encode_sp_orc", "encode_sp_pfr", "heuristic_kl_bits",
]
