"""Shared and private randomness.

Candidate samples come from a counter-based generator keyed on
(base_seed, bin, local_index, axis), so the receiver can regenerate the
n-th sample of any bin without replaying the encoder. Arrival times use a
separate, sender-private stateful generator.
"""

from __future__ import annotations

import numpy as np

from .distributions import FactorizedDistribution, Gaussian, ppf, std_normal_ppf
from .partition import GridPartition

GENERATOR_ID = 1  # Philox4x32-10, two words -> 53-bit midpoint uniform

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
MAX_LOCAL_INDEX = 2 ** 32


def philox4x32(counter, key, rounds: int = 10):
    """Philox4x32 block function on arrays of 32-bit words.

    counter: four uint32-valued arrays (broadcastable); key: two ints.
    Returns four uint64 arrays holding 32-bit outputs.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK32 for c in counter)
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for _ in range(rounds):
        p0 = c0 * _M0
        p1 = c2 * _M1
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = (hi1 ^ c1 ^ np.uint64(k0), lo1,
                          hi0 ^ c3 ^ np.uint64(k1), lo0)
        k0 = (k0 + _W0) & 0xFFFFFFFF
        k1 = (k1 + _W1) & 0xFFFFFFFF
    return c0, c1, c2, c3


def keyed_uniforms(base_seed: int, bins, local_index, axis) -> np.ndarray:
    """Uniform variates in (0, 1), one per StreamKey.

    Counter words: bin (low, high), local_index - 1, axis. Key: base_seed.
    """
    seed = int(base_seed) & 0xFFFFFFFFFFFFFFFF
    bins = np.asarray(bins, dtype=np.int64).astype(np.uint64)
    local = np.asarray(local_index, dtype=np.int64)
    if np.any(local < 1) or np.any(local > MAX_LOCAL_INDEX):
        raise ValueError("local sample index must lie in [1, 2**32]")
    local = (local - 1).astype(np.uint64)
    axis = np.asarray(axis, dtype=np.uint64)
    w0, w1, _, _ = philox4x32((bins & _MASK32, bins >> _SHIFT32, local, axis),
                              (seed & 0xFFFFFFFF, seed >> 32))
    k = ((w0 >> np.uint64(5)) << np.uint64(26)) | (w1 >> np.uint64(6))
    return (k.astype(np.float64) + 0.5) * 2.0 ** -53


def sample_cells(prior: FactorizedDistribution, part: GridPartition, cells, bins,
                 local_index, base_seed: int) -> np.ndarray:
    """Batch of restricted-prior samples; row i lies in cell ``cells[i]``.

    Per axis: u = (k + v) / J_d with v keyed uniform, mapped through the prior
    quantile (upper-tail form above the median), then clipped to the interval.
    """
    cells = np.atleast_2d(np.asarray(cells, dtype=np.int64))
    n, dims = cells.shape[0], prior.D
    bins = np.broadcast_to(np.asarray(bins, dtype=np.int64), (n,))
    local_index = np.broadcast_to(np.asarray(local_index, dtype=np.int64), (n,))
    v = keyed_uniforms(base_seed, bins[:, None], local_index[:, None],
                       np.arange(dims, dtype=np.uint64)[None, :])
    counts = np.asarray(part.counts, dtype=np.float64)
    lower = (cells + v) / counts
    upper = ((counts - cells) - v) / counts
    out = np.empty((n, dims))
    gauss = _gaussian_axes(prior)
    if gauss.size:
        mean, std = _gaussian_params(prior)
        out[:, gauss] = mean + std * std_normal_ppf(lower[:, gauss], upper[:, gauss])
    for d, law in enumerate(prior.dims):
        if not isinstance(law, Gaussian):
            out[:, d] = ppf(law, lower[:, d], upper[:, d])
    for d in range(dims):
        b = part.boundaries[d]
        k = cells[:, d]
        out[:, d] = np.clip(out[:, d], b[k], b[k + 1])
    return out


def _gaussian_axes(prior: FactorizedDistribution) -> np.ndarray:
    return np.array([d for d, law in enumerate(prior.dims) if isinstance(law, Gaussian)],
                    dtype=np.int64)


def _gaussian_params(prior: FactorizedDistribution) -> tuple[np.ndarray, np.ndarray]:
    laws = [law for law in prior.dims if isinstance(law, Gaussian)]
    return (np.array([law.mean for law in laws]), np.array([law.std for law in laws]))


def sample_in_bin(prior: FactorizedDistribution, part: GridPartition, j: int,
                  local_index: int, base_seed: int) -> np.ndarray:
    cells = np.asarray(part.decompose(j), dtype=np.int64)[None, :]
    return sample_cells(prior, part, cells, [j], [local_index], base_seed)[0]


def private_rngs(private_seed: int, count: int = 2) -> list[np.random.Generator]:
    """Independent sender-private generators (arrival times, bin proposals, ...)."""
    children = np.random.SeedSequence(int(private_seed)).spawn(count)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def default_private_seed(base_seed: int) -> int:
    ss = np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, 0x7072697661746531])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class ORCExhausted(RuntimeError):
    pass


class ArrivalProcess:
    """Arrival times T_1 < T_2 < ... for PFR (Exp(1) gaps) or ORC with N candidates.

    In ORC mode the N times are N times the order statistics of N i.i.d.
    Exp(1) variates. Gaps use -ln(1 - u), u in [0, 1).
    """

    def __init__(self, mode: str = "pfr", n_candidates: int | None = None,
                 private_seed: int = 0, rng: np.random.Generator | None = None):
        if mode not in ("pfr", "orc"):
            raise ValueError(f"mode must be 'pfr' or 'orc', got {mode!r}")
        if mode == "orc" and (n_candidates is None or n_candidates < 1):
            raise ValueError("ORC mode needs a positive candidate count")
        self.mode = mode
        self.n_candidates = n_candidates
        self.private_seed = private_seed
        self.rng = rng if rng is not None else private_rngs(private_seed, 1)[0]
        self.n = 0
        self.t = 0.0

    def take(self, count: int) -> np.ndarray:
        """Next ``count`` arrival times."""
        if self.mode == "orc" and self.n + count > self.n_candidates:
            raise ORCExhausted(
                f"ORC with N={self.n_candidates} has {self.n_candidates - self.n} arrivals left")
        u = self.rng.random(count)
        gaps = -np.log1p(-u)
        if self.mode == "orc":
            n = np.arange(self.n + 1, self.n + count + 1, dtype=np.float64)
            gaps = gaps * (self.n_candidates / (self.n_candidates - n + 1.0))
        gaps[0] += self.t
        times = np.add.accumulate(gaps)
        self.n += count
        self.t = float(times[-1])
        return times

    def next_arrival(self) -> float:
        return float(self.take(1)[0])
