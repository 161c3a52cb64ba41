"""Axis-aligned grid partitions with equal prior mass per cell."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import (
    UNBOUNDED,
    Dim1Law,
    FactorizedDistribution,
    RecTask,
    interval_mass,
    log_sup_ratio,
    ppf,
)

MAX_BINS = 2 ** 63


def allocate_intervals(dim_mi_bits, kl_budget_bits: int) -> list[int]:
    """Per-axis interval counts from per-axis mutual information.

    Repeatedly doubles the count on the axis with the largest remaining
    information, charging one bit to that axis and one to the budget. Ties go
    to the lowest axis index. Stops when the budget is spent or no axis has
    positive information left.
    """
    mi = [max(float(v), 0.0) for v in dim_mi_bits]
    if not mi:
        raise ValueError("need at least one dimension")
    budget = int(kl_budget_bits)
    if budget < 0:
        raise ValueError(f"budget must be non-negative, got {kl_budget_bits}")
    counts = [1] * len(mi)
    while budget > 0:
        best = max(range(len(mi)), key=lambda d: (mi[d], -d))
        if mi[best] <= 0.0:
            break
        counts[best] *= 2
        mi[best] -= 1.0
        budget -= 1
    return counts


@dataclass(frozen=True)
class GridPartition:
    """Per-axis boundaries, outer endpoints included.

    Cell index composition is mixed radix with axis 0 most significant:
    j = ((k_0 * J_1 + k_1) * J_2 + k_2) ...
    """

    counts: tuple
    boundaries: tuple  # per axis: float array of length counts[d] + 1

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 1 for c in counts):
            raise ValueError(f"interval counts must be positive, got {counts}")
        if len(self.boundaries) != len(counts):
            raise ValueError("one boundary array per axis required")
        bounds = []
        for c, b in zip(counts, self.boundaries):
            b = np.asarray(b, dtype=np.float64)
            b.setflags(write=False)
            if b.shape != (c + 1,):
                raise ValueError(f"expected {c + 1} boundaries, got {b.shape}")
            if np.any(np.diff(b) <= 0):
                raise ValueError("boundaries must be strictly increasing")
            bounds.append(b)
        if math.prod(counts) >= MAX_BINS:
            raise ValueError("total number of bins must stay below 2**63")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "boundaries", tuple(bounds))
        radix = [1] * len(counts)
        for d in range(len(counts) - 2, -1, -1):
            radix[d] = radix[d + 1] * counts[d + 1]
        object.__setattr__(self, "_radix", tuple(radix))

    @property
    def D(self) -> int:
        return len(self.counts)

    @property
    def total_bins(self) -> int:
        return math.prod(self.counts)

    @property
    def log2_bins(self) -> float:
        return float(sum(math.log2(c) for c in self.counts))

    def interval(self, d: int, k: int) -> tuple[float, float]:
        b = self.boundaries[d]
        return float(b[k]), float(b[k + 1])

    def compose(self, cells) -> int | np.ndarray:
        """Mixed-radix index from per-axis interval indices (tuple or (n, D) array)."""
        cells = np.asarray(cells, dtype=np.int64)
        if cells.ndim == 1:
            if cells.shape != (self.D,):
                raise ValueError("cell tuple has wrong length")
            return sum(int(k) * r for k, r in zip(cells, self._radix))
        j = np.zeros(cells.shape[0], dtype=np.int64)
        for d in range(self.D):
            j = j * self.counts[d] + cells[:, d]
        return j

    def decompose(self, j) -> tuple | np.ndarray:
        if np.ndim(j) == 0:
            j = int(j)
            if not 0 <= j < self.total_bins:
                raise IndexError(f"bin {j} out of range [0, {self.total_bins})")
            return tuple((j // r) % c for r, c in zip(self._radix, self.counts))
        j = np.asarray(j, dtype=np.int64)
        cells = np.empty((j.shape[0], self.D), dtype=np.int64)
        for d in range(self.D - 1, -1, -1):
            cells[:, d] = j % self.counts[d]
            j = j // self.counts[d]
        return cells

    def locate_cells(self, z) -> np.ndarray:
        """Per-axis interval indices for an (n, D) batch; intervals are [a, b)."""
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        if z.shape[1] != self.D:
            raise ValueError(f"expected points of dimension {self.D}")
        cells = np.empty(z.shape, dtype=np.int64)
        for d, b in enumerate(self.boundaries):
            col = z[:, d]
            if np.any((col < b[0]) | (col > b[-1])) or np.any(np.isnan(col)):
                raise ValueError(f"point outside the prior support on axis {d}")
            cells[:, d] = np.searchsorted(b[1:-1], col, side="right")
        return cells

    def to_json(self) -> dict:
        return {"counts": list(self.counts),
                "boundaries": [b[1:-1].tolist() for b in self.boundaries]}

    @classmethod
    def from_json(cls, obj: dict, prior: FactorizedDistribution) -> "GridPartition":
        counts = obj["counts"]
        bounds = []
        for law, inner in zip(prior.dims, obj["boundaries"]):
            lo, hi = law.support
            bounds.append(np.concatenate([[lo], np.asarray(inner, dtype=float), [hi]]))
        return cls(tuple(counts), tuple(bounds))


def axis_boundaries(law: Dim1Law, count: int) -> np.ndarray:
    """Prior quantiles at i/count, i = 0..count."""
    i = np.arange(count + 1, dtype=np.float64)
    b = ppf(law, i / count, (count - i) / count)
    lo, hi = law.support
    b[0], b[-1] = lo, hi
    return b


def build_partition(prior: FactorizedDistribution, per_dim_counts) -> GridPartition:
    counts = [int(c) for c in per_dim_counts]
    if len(counts) != prior.D:
        raise ValueError(f"need {prior.D} interval counts, got {len(counts)}")
    if any(c < 1 for c in counts):
        raise ValueError(f"interval counts must be positive, got {counts}")
    return GridPartition(tuple(counts),
                         tuple(axis_boundaries(law, c) for law, c in zip(prior.dims, counts)))


def trivial_partition(prior: FactorizedDistribution) -> GridPartition:
    return build_partition(prior, [1] * prior.D)


def locate_bin(part: GridPartition, z) -> int:
    z = np.asarray(z, dtype=np.float64)
    return part.compose(part.locate_cells(z[None, :])[0])


def axis_target_masses(task: RecTask, part: GridPartition) -> list[np.ndarray]:
    """Target mass of every interval, per axis."""
    out = []
    for q, b in zip(task.target.dims, part.boundaries):
        out.append(interval_mass(q, b[:-1], b[1:]))
    return out


def bin_target_mass(task: RecTask, part: GridPartition, j: int) -> float:
    cells = part.decompose(j)
    mass = 1.0
    for d, k in enumerate(cells):
        a, b = part.interval(d, k)
        mass *= float(interval_mass(task.target.dims[d], a, b))
    return mass


def axis_log_sup_ratios(task: RecTask, part: GridPartition) -> list[np.ndarray]:
    """ln sup q/p on every interval, per axis."""
    out = []
    for q, p, b in zip(task.target.dims, task.prior.dims, part.boundaries):
        out.append(np.array([log_sup_ratio(q, p, float(b[i]), float(b[i + 1]))
                             for i in range(len(b) - 1)]))
    return out


def sup_ratio_on_interval(q: Dim1Law, p: Dim1Law, interval):
    a, b = interval
    v = log_sup_ratio(q, p, float(a), float(b))
    if math.isinf(v) and v > 0:
        return UNBOUNDED
    return math.exp(v)
