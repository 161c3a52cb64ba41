"""Theory-side quantities: the partition cost epsilon, the codelength bound,
ORC bias bounds, and two-sample bias measurements (MMD, 1D histogram TV)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .distributions import (
    LOG2E,
    Dim1Law,
    FactorizedDistribution,
    Gaussian,
    RecTask,
    interval_mass,
    kl_bits,
    log_ratio,
    mean_std,
    ppf,
)


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo estimate with its standard error."""

    value: float
    stderr: float
    n_mc: int
    seed: int

    def record(self, name: str) -> dict:
        return {"name": name, **asdict(self)}


@dataclass(frozen=True)
class BoundReport:
    kl_bits: float
    log2_J: float
    epsilon_hat: float
    codelength_bound_bits: float
    epsilon_gaussian_cap: float | None = None

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TVBounds:
    """ORC bias bounds at slack t bits; raw values may fall outside [0, 1]."""

    t: float
    upper_raw: float
    lower_raw: float
    tail_above: float
    tail_below: float
    n_mc: int
    seed: int

    @property
    def upper(self) -> float:
        return min(max(self.upper_raw, 0.0), 1.0)

    @property
    def lower(self) -> float:
        return min(max(self.lower_raw, 0.0), 1.0)

    def to_json(self) -> dict:
        return {**asdict(self), "upper": self.upper, "lower": self.lower}


def _mc_log2_ratios(task: RecTask, n_mc: int, seed: int) -> np.ndarray:
    if n_mc < 1:
        raise ValueError("n_mc must be at least 1")
    z = task.target.sample(np.random.default_rng(seed), n_mc)
    return log_ratio(task, z) * LOG2E


def epsilon_from_log2_ratios(log2_r: np.ndarray, J: int) -> np.ndarray:
    """Per-draw partition cost max(0, log2 J - log2 q/p)."""
    return np.maximum(0.0, math.log2(J) - np.asarray(log2_r))


def epsilon_cost(task: RecTask, J: int, n_mc: int = 10_000, seed: int = 0) -> Estimate:
    """E_{z~Q}[max(0, log2 J - log2 q(z)/p(z))] by Monte Carlo."""
    if J < 1:
        raise ValueError(f"J must be at least 1, got {J}")
    eps = epsilon_from_log2_ratios(_mc_log2_ratios(task, n_mc, seed), J)
    se = float(eps.std(ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else math.nan
    return Estimate(float(eps.mean()), se, n_mc, seed)


def gaussian_epsilon_cap(task: RecTask) -> float | None:
    """0.849 sqrt(KL), valid when every axis is Gaussian with a narrower target."""
    for q, p in zip(task.target.dims, task.prior.dims):
        if not (isinstance(q, Gaussian) and isinstance(p, Gaussian) and q.std < p.std):
            return None
    return 0.849 * math.sqrt(kl_bits(task))


def codelength_bound(task_or_kl, J: int, epsilon_hat: float) -> BoundReport:
    """One-shot bound KL + eps + log2(KL - log2 J + eps + 1) + 4, in bits.

    ``task_or_kl`` is a RecTask or a KL value in bits. With J = 1 this is the
    bound for standard (unpartitioned) coding.
    """
    if epsilon_hat < 0:
        raise ValueError("epsilon_hat must be non-negative")
    if isinstance(task_or_kl, RecTask):
        kl, cap = kl_bits(task_or_kl), gaussian_epsilon_cap(task_or_kl)
    else:
        kl, cap = float(task_or_kl), None
    log2_j = math.log2(J)
    arg = kl - log2_j + epsilon_hat + 1.0
    if arg <= 0:
        raise ValueError(f"log argument {arg} is not positive (log2 J exceeds KL + eps + 1)")
    return BoundReport(kl, log2_j, epsilon_hat, kl + epsilon_hat + math.log2(arg) + 4.0, cap)


def tv_bounds(task: RecTask, t: float, n_mc: int = 10_000, seed: int = 0) -> TVBounds:
    """Upper bound on ORC bias with N = 2^(KL + t), lower bound with N = 2^(KL - t).

    Everything is in bits: t is the slack in the exponent of N and the tail
    events compare log2 q/p against KL +- t/2. The upper tail uses a strict
    inequality, so Q = P gives exactly 4 at t = 0.
    """
    t = float(t)
    if t < 0:
        raise ValueError("t must be non-negative")
    kl = kl_bits(task)
    r = _mc_log2_ratios(task, n_mc, seed)
    above = float(np.mean(r > kl + t / 2))
    below = float(np.mean(r <= kl - t / 2))
    upper = 4.0 * math.sqrt(2.0 ** (-t / 4) + 2.0 * math.sqrt(above))
    lower = 1.0 - 2.0 ** (-t / 2) - below
    return TVBounds(float(t), upper, lower, above, below, n_mc, seed)


# ---------------------------------------------------------------------------
# Two-sample bias measurements
# ---------------------------------------------------------------------------
def standardize(samples, law_or_dist) -> np.ndarray:
    """Shift and scale each column by the target's per-axis mean and std."""
    dims = law_or_dist.dims if isinstance(law_or_dist, FactorizedDistribution) else law_or_dist
    ms = np.array([mean_std(law) for law in dims])
    return (np.atleast_2d(samples) - ms[:, 0]) / ms[:, 1]


def median_bandwidth(pooled: np.ndarray, max_points: int = 2000, seed: int = 0) -> float:
    """Median pairwise Euclidean distance, on a fixed subsample when large."""
    if pooled.shape[0] > max_points:
        idx = np.random.default_rng(seed).choice(pooled.shape[0], max_points, replace=False)
        pooled = pooled[idx]
    sq = _sq_dists(pooled, pooled)
    iu = np.triu_indices(pooled.shape[0], k=1)
    h = float(np.sqrt(np.median(sq[iu])))
    return h if h > 0 else 1.0


def _sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = (x * x).sum(1)[:, None] + (y * y).sum(1)[None, :] - 2.0 * x @ y.T
    return np.maximum(d, 0.0)


def _kernel_sum(x: np.ndarray, y: np.ndarray, gamma: float, block: int = 2048) -> float:
    total = 0.0
    for i in range(0, x.shape[0], block):
        total += float(np.exp(-gamma * _sq_dists(x[i:i + block], y)).sum())
    return total


def _as_2d(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a[:, None] if a.ndim == 1 else a


def mmd_rbf(samples_a, samples_b, bandwidth: float | None = None) -> float:
    """Unbiased estimate of squared MMD with kernel exp(-|x - y|^2 / (2 h^2)).

    ``h`` defaults to the median pairwise distance of the pooled sample.
    Standardize the inputs first (see ``standardize``) when comparing against
    a Gaussian target.
    """
    a, b = _as_2d(samples_a), _as_2d(samples_b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    n, m = a.shape[0], b.shape[0]
    if n < 2 or m < 2:
        raise ValueError("each sample set needs at least two points")
    h = median_bandwidth(np.vstack([a, b])) if bandwidth is None else float(bandwidth)
    gamma = 1.0 / (2.0 * h * h)
    kaa = (_kernel_sum(a, a, gamma) - n) / (n * (n - 1))
    kbb = (_kernel_sum(b, b, gamma) - m) / (m * (m - 1))
    kab = _kernel_sum(a, b, gamma) / (n * m)
    return kaa + kbb - 2.0 * kab


@dataclass(frozen=True)
class PermutationTest:
    mmd2: float
    p_value: float
    bandwidth: float
    n_permutations: int


def mmd_permutation_test(samples_a, samples_b, n_permutations: int = 200,
                         bandwidth: float | None = None, seed: int = 0) -> PermutationTest:
    """Permutation test of equal distributions using unbiased MMD^2.

    Builds the pooled kernel matrix once, so keep the pooled size to a few
    thousand points.
    """
    a, b = _as_2d(samples_a), _as_2d(samples_b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    pooled = np.vstack([a, b])
    n, total = a.shape[0], pooled.shape[0]
    m = total - n
    h = median_bandwidth(pooled) if bandwidth is None else float(bandwidth)
    k = np.exp(-_sq_dists(pooled, pooled) / (2.0 * h * h))
    np.fill_diagonal(k, 0.0)

    def stat(mask: np.ndarray) -> float:
        x = mask.astype(np.float64)
        y = 1.0 - x
        kx, ky = k @ x, k @ y
        return (x @ kx) / (n * (n - 1)) + (y @ ky) / (m * (m - 1)) - 2.0 * (x @ ky) / (n * m)

    base = np.zeros(total, dtype=bool)
    base[:n] = True
    observed = stat(base)
    rng = np.random.default_rng(seed)
    exceed = int(sum(stat(rng.permutation(base)) >= observed for _ in range(n_permutations)))
    return PermutationTest(float(observed), float(exceed + 1) / (n_permutations + 1), h,
                           n_permutations)


def histogram_edges(prior_law: Dim1Law, bins: int = 100) -> np.ndarray:
    """Equal-width bins over the prior's central 99.9%, plus two unbounded outer bins."""
    lo, hi = ppf(prior_law, np.array([0.0005, 0.9995]), np.array([0.9995, 0.0005]))
    inner = np.linspace(lo, hi, bins + 1)
    return np.concatenate([[-math.inf], inner, [math.inf]])


def histogram_tv_1d(samples, q_law: Dim1Law, prior_law: Dim1Law, bins: int = 100) -> float:
    """Total variation between the empirical histogram and the exact target bin masses."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    edges = histogram_edges(prior_law, bins)
    counts = np.bincount(np.searchsorted(edges[1:-1], x, side="right"),
                         minlength=len(edges) - 1)
    emp = counts / x.size
    target = interval_mass(q_law, edges[:-1], edges[1:])
    return 0.5 * float(np.abs(emp - target).sum())
