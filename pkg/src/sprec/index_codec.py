"""Zipf model for local sample indices: fitting, codelength, and a range coder.

P(n) is proportional to n ** -(1 + 1/zeta) for n >= 1. Indices are entropy
coded against the pmf truncated to [1, 2**32] by a sequence of binary
decisions: first the bit length of n (unary, each step conditioned on the
remaining mass), then the lower bits by bisection. Every decision probability
comes from Hurwitz-zeta tail sums, quantized to 16 bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

INDEX_CAP = 2 ** 32
PROB_BITS = 16
_PROB_TOTAL = 1 << PROB_BITS
_DIRECT_TERMS = 32
_ZETA_LO, _ZETA_HI = 1e-3, 1e3


def hurwitz_zeta(s: float, a) -> np.ndarray:
    """sum_{n >= a} n ** -s for s > 1, a >= 1.

    Direct sum of the first terms, then Euler-Maclaurin for the remainder with
    three correction terms; the truncation error is below 1e-15 relative to
    the first omitted term for the shifts used here.
    """
    if not s > 1.0:
        raise ValueError(f"need s > 1, got {s}")
    a = np.asarray(a, dtype=np.float64)
    k = np.arange(_DIRECT_TERMS, dtype=np.float64)
    head = np.sum((a[..., None] + k) ** -s, axis=-1)
    n = a + _DIRECT_TERMS
    ns = n ** -s
    tail = (n * ns / (s - 1.0) + 0.5 * ns + s * ns / (12.0 * n)
            - s * (s + 1) * (s + 2) * ns / (720.0 * n ** 3)
            + s * (s + 1) * (s + 2) * (s + 3) * (s + 4) * ns / (30240.0 * n ** 5))
    return head + tail


def _hz(s: float, a: int) -> float:
    return float(hurwitz_zeta(s, float(a)))


@dataclass(frozen=True)
class ZipfModel:
    zeta: float
    exponent: float = field(init=False)
    normalizer: float = field(init=False)

    def __post_init__(self):
        if not (self.zeta > 0.0 and math.isfinite(self.zeta)):
            raise ValueError(f"zeta must be positive and finite, got {self.zeta}")
        s = 1.0 + 1.0 / self.zeta
        object.__setattr__(self, "exponent", s)
        object.__setattr__(self, "normalizer", _hz(s, 1))

    def mass(self, lo: int, hi: int) -> float:
        """Unnormalized mass of [lo, hi)."""
        return _range_mass(self.exponent, int(lo), int(hi))

    def entropy_bits(self, terms: int = 1 << 20) -> float:
        """Entropy in bits of the pmf truncated to [1, INDEX_CAP], the one the coder uses."""
        s = self.exponent
        n = np.arange(1, terms + 1, dtype=np.float64)
        head = float(np.sum(n ** -s * np.log(n)))

        def antiderivative(x: float) -> float:
            # integral of x**-s ln x is -antiderivative(x)
            return x ** (1 - s) * (math.log(x) / (s - 1) + 1 / (s - 1) ** 2)

        tail = antiderivative(terms + 0.5) - antiderivative(INDEX_CAP + 0.5)
        total = self.normalizer - _hz(s, INDEX_CAP + 1)
        return (s * (head + tail) / total + math.log(total)) / math.log(2)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Inverse-CDF draws from the pmf truncated to [1, INDEX_CAP]."""
        s = self.exponent
        total = self.normalizer - _hz(s, INDEX_CAP + 1)
        u = rng.random(size)
        # smallest n with tail(n + 1) <= (1 - u) * total, i.e. CDF(n) >= u
        target = (1.0 - u) * total + _hz(s, INDEX_CAP + 1)
        lo = np.ones(size, dtype=np.float64)
        hi = np.full(size, float(INDEX_CAP))
        while np.any(hi > lo):
            mid = np.floor((lo + hi) / 2)
            ok = hurwitz_zeta(s, mid + 1) <= target
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid + 1)
        return lo.astype(np.int64)


@lru_cache(maxsize=1 << 16)
def _range_mass(s: float, lo: int, hi: int) -> float:
    if hi - lo <= _DIRECT_TERMS:
        return math.fsum(float(n) ** -s for n in range(lo, hi))
    return _hz(s, lo) - _hz(s, hi)


def _scaled_range_mass(s: float, lo: int, hi: int) -> float:
    """Mass of [lo, hi) divided by lo**-s, for exponents where the raw mass underflows.

    Direct terms until they are negligible or 32 have been summed, then an
    Euler-Maclaurin tail (accurate there, since s / n is then small).
    """
    total, n = 0.0, lo
    while n < hi and n < lo + _DIRECT_TERMS:
        term = (n / lo) ** -s
        total += term
        if term < 1e-20 * total:
            return total
        n += 1
    if n >= hi:
        return total
    a, b = float(n), float(hi)

    def f(x):
        return (x / lo) ** -s

    integral = lo / (s - 1.0) * ((a / lo) ** (1.0 - s) - (b / lo) ** (1.0 - s))
    d1 = (-s / b) * f(b) - (-s / a) * f(a)
    d3 = (-s * (s + 1) * (s + 2) / b ** 3) * f(b) - (-s * (s + 1) * (s + 2) / a ** 3) * f(a)
    return total + integral + 0.5 * (f(a) - f(b)) + d1 / 12.0 - d3 / 720.0


def _mass_ratio(s: float, lo: int, mid: int, hi: int) -> float:
    """mass[lo, mid) / mass[lo, hi)."""
    den = _range_mass(s, lo, hi)
    if den > 1e-250:
        return _range_mass(s, lo, mid) / den
    return _scaled_range_mass(s, lo, mid) / _scaled_range_mass(s, lo, hi)


def nll_bits(model: ZipfModel, index) -> np.ndarray | float:
    """-log2 P(index) under the infinite-support pmf."""
    idx = np.asarray(index, dtype=np.float64)
    if np.any(idx < 1):
        raise ValueError("indices start at 1")
    out = model.exponent * np.log2(idx) + math.log2(model.normalizer)
    return float(out) if out.ndim == 0 else out


def total_nll(zeta: float, sum_log: float, count: int) -> float:
    s = 1.0 + 1.0 / zeta
    return s * sum_log + count * math.log(_hz(s, 1))


def fit_zeta(indices) -> ZipfModel:
    """Maximum-likelihood zeta by golden-section search on log zeta in [1e-3, 1e3]."""
    idx = np.asarray(indices, dtype=np.float64)
    if idx.size == 0:
        raise ValueError("cannot fit a Zipf model to no indices")
    if np.any(idx < 1):
        raise ValueError("indices start at 1")
    sum_log, count = float(np.sum(np.log(idx))), int(idx.size)

    def f(x):
        return total_nll(math.exp(x), sum_log, count)

    a, b = math.log(_ZETA_LO), math.log(_ZETA_HI)
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > 1e-10:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    best = min((a, f(a)), (b, f(b)), ((a + b) / 2, f((a + b) / 2)), key=lambda t: t[1])
    return ZipfModel(math.exp(best[0]))


# ---------------------------------------------------------------------------
# Bit I/O, most significant bit first
# ---------------------------------------------------------------------------
class BitWriter:
    def __init__(self):
        self.bits: list[int] = []

    def write(self, value: int, width: int):
        for i in range(width - 1, -1, -1):
            self.bits.append((value >> i) & 1)

    def write_byte(self, byte: int):
        self.write(byte, 8)

    def getvalue(self, strip_trailing_zeros: bool = False) -> bytes:
        bits = self.bits
        if strip_trailing_zeros:
            end = len(bits)
            while end and bits[end - 1] == 0:
                end -= 1
            bits = bits[:end]
        out = bytearray((len(bits) + 7) // 8)
        for i, b in enumerate(bits):
            if b:
                out[i >> 3] |= 0x80 >> (i & 7)
        return bytes(out)

    def __len__(self):
        return len(self.bits)


class BitReader:
    """Reads past the end as zeros."""

    def __init__(self, data: bytes, bit_offset: int = 0):
        self.data = data
        self.pos = bit_offset

    def read(self, width: int) -> int:
        v = 0
        for _ in range(width):
            byte = self.pos >> 3
            bit = (self.data[byte] >> (7 - (self.pos & 7))) & 1 if byte < len(self.data) else 0
            v = (v << 1) | bit
            self.pos += 1
        return v

    def read_byte(self) -> int:
        return self.read(8)


# ---------------------------------------------------------------------------
# 32-bit range coder with carry propagation (cache + pending 0xFF run)
# ---------------------------------------------------------------------------
_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF


class RangeEncoder:
    def __init__(self, sink: BitWriter):
        self.sink = sink
        self.low = 0
        self.range = _MASK32
        self.cache = 0
        self.pending = 0  # 0xFF bytes waiting behind the cache byte
        self.started = False

    def _shift_low(self):
        if self.low < 0xFF000000 or self.low > _MASK32:
            carry = self.low >> 32
            if self.started:
                self.sink.write_byte((self.cache + carry) & 0xFF)
            for _ in range(self.pending):
                self.sink.write_byte((0xFF + carry) & 0xFF)
            self.pending = 0
            self.cache = (self.low >> 24) & 0xFF
            self.started = True
        else:
            self.pending += 1
        self.low = (self.low << 8) & _MASK32

    def encode_bit(self, bit: int, freq0: int):
        bound = (self.range >> PROB_BITS) * freq0
        if bit:
            self.low += bound
            self.range -= bound
        else:
            self.range = bound
        while self.range < _TOP:
            self.range <<= 8
            self._shift_low()

    def finish(self):
        # pick the value in [low, low + range) with the most trailing zero bits
        high = self.low + self.range - 1
        shift = 32
        while shift > 0:
            v = ((self.low + (1 << shift) - 1) >> shift) << shift
            if v <= high:
                break
            shift -= 1
        self.low = ((self.low + (1 << shift) - 1) >> shift) << shift
        for _ in range(5):
            self._shift_low()


class RangeDecoder:
    def __init__(self, source: BitReader):
        self.source = source
        self.range = _MASK32
        self.code = 0
        for _ in range(4):
            self.code = (self.code << 8) | source.read_byte()

    def decode_bit(self, freq0: int) -> int:
        r = self.range >> PROB_BITS
        bound = r * freq0
        if self.code < bound:
            self.range = bound
            bit = 0
        else:
            self.code -= bound
            self.range -= bound
            bit = 1
        while self.range < _TOP:
            self.range = (self.range << 8) & _MASK32
            self.code = ((self.code << 8) | self.source.read_byte()) & _MASK32
        return bit


def _quantize(p0: float) -> int:
    return min(max(int(round(p0 * _PROB_TOTAL)), 1), _PROB_TOTAL - 1)


class _DecisionTable:
    """Quantized probabilities of the binary decisions for one model."""

    def __init__(self, model: ZipfModel):
        self.s = model.exponent
        self.cache: dict[tuple, int] = {}

    def stop_here(self, length: int) -> int:
        """P(bit length == length | bit length >= length), quantized."""
        key = ("L", length)
        if key not in self.cache:
            lo = 1 << (length - 1)
            self.cache[key] = _quantize(_mass_ratio(self.s, lo, 1 << length, INDEX_CAP + 1))
        return self.cache[key]

    def left(self, lo: int, mid: int, hi: int) -> int:
        key = (lo, hi)
        if key not in self.cache:
            self.cache[key] = _quantize(_mass_ratio(self.s, lo, mid, hi))
        return self.cache[key]


_MAX_LENGTH = INDEX_CAP.bit_length()  # 33: only 2**32 itself has this length


def _encode_one(enc: RangeEncoder, table: _DecisionTable, n: int):
    if not 1 <= n <= INDEX_CAP:
        raise ValueError(f"index {n} outside [1, 2**32]")
    length = n.bit_length()
    for l in range(1, min(length, _MAX_LENGTH - 1) + 1):
        enc.encode_bit(0 if l == length else 1, table.stop_here(l))
    lo, hi = 1 << (length - 1), min(1 << length, INDEX_CAP + 1)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        enc.encode_bit(0 if n < mid else 1, table.left(lo, mid, hi))
        lo, hi = (lo, mid) if n < mid else (mid, hi)


def _decode_one(dec: RangeDecoder, table: _DecisionTable) -> int:
    length = _MAX_LENGTH
    for l in range(1, _MAX_LENGTH):
        if dec.decode_bit(table.stop_here(l)) == 0:
            length = l
            break
    lo, hi = 1 << (length - 1), min(1 << length, INDEX_CAP + 1)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if dec.decode_bit(table.left(lo, mid, hi)) == 0:
            hi = mid
        else:
            lo = mid
    return lo


def encode_index(model: ZipfModel, index: int, sink: BitWriter):
    """Append one range-coded index to ``sink`` (flushes the coder)."""
    encode_indices(model, [index], sink)


def decode_index(model: ZipfModel, source: BitReader) -> int:
    return decode_indices(model, source, 1)[0]


def encode_indices(model: ZipfModel, indices, sink: BitWriter | None = None) -> BitWriter:
    sink = BitWriter() if sink is None else sink
    enc = RangeEncoder(sink)
    table = _DecisionTable(model)
    for n in indices:
        _encode_one(enc, table, int(n))
    enc.finish()
    return sink


def decode_indices(model: ZipfModel, source: BitReader, count: int) -> list[int]:
    dec = RangeDecoder(source)
    table = _DecisionTable(model)
    return [_decode_one(dec, table) for _ in range(count)]
