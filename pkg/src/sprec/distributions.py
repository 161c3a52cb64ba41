"""Factorized one-dimensional Gaussian and Uniform laws.

Every quantity exposed publicly is in bits. Natural logs are used internally
by the samplers, which work with Exp(1) arrival gaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import erfc

LN2 = math.log(2.0)
LOG2E = 1.0 / LN2
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


class _Unbounded:
    """Marker for a divergence or density ratio with no finite supremum."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNBOUNDED"

    def __reduce__(self):
        return (_Unbounded, ())


UNBOUNDED = _Unbounded()


def is_unbounded(value) -> bool:
    return value is UNBOUNDED


@dataclass(frozen=True)
class Gaussian:
    mean: float
    std: float

    def __post_init__(self):
        if not (self.std > 0.0 and math.isfinite(self.std)):
            raise ValueError(f"Gaussian std must be positive and finite, got {self.std}")
        if not math.isfinite(self.mean):
            raise ValueError(f"Gaussian mean must be finite, got {self.mean}")

    @property
    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.hi > self.lo):
            raise ValueError(f"Uniform needs finite lo < hi, got ({self.lo}, {self.hi})")

    @property
    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo


Dim1Law = Union[Gaussian, Uniform]


# ---------------------------------------------------------------------------
# Standard normal quantile: Acklam's rational approximation plus one Newton
# step against the erfc-based CDF. Fixed recipe; boundaries and restricted
# samples on both sides of the channel depend on it bit for bit.
# ---------------------------------------------------------------------------
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam_lower(p: np.ndarray) -> np.ndarray:
    """Rational approximation of the standard normal quantile for 0 < p <= 0.5."""
    x = np.empty_like(p)
    tail = p < _P_LOW
    if np.any(tail):
        q = np.sqrt(-2.0 * np.log(p[tail]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x[tail] = num / den
    mid = ~tail
    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = num / den
    return x


def _std_normal_cdf(x):
    return 0.5 * erfc(-x / _SQRT2)


def _ndtri_lower(p: np.ndarray) -> np.ndarray:
    """Standard normal quantile for p in [0, 0.5]."""
    p = np.asarray(p, dtype=np.float64)
    out = np.full(p.shape, -np.inf)
    ok = p > 0.0
    if np.any(ok):
        pp = p[ok]
        x = _acklam_lower(pp)
        # one Newton step; skipped where exp(x^2/2) would overflow
        safe = x > -37.5
        xs = x[safe]
        err = _std_normal_cdf(xs) - pp[safe]
        xs = xs - err * _SQRT2PI * np.exp(0.5 * xs * xs)
        x[safe] = xs
        out[ok] = np.minimum(x, 0.0)
    return out


def std_normal_ppf(p, s=None) -> np.ndarray:
    """Standard normal quantile of lower-tail mass ``p``.

    ``s`` is the upper-tail mass ``1 - p`` when the caller can form it without
    cancellation; upper-half quantiles are then taken from ``s`` directly.
    """
    p = np.asarray(p, dtype=np.float64)
    s = 1.0 - p if s is None else np.asarray(s, dtype=np.float64)
    p, s = np.broadcast_arrays(p, s)
    upper = p > 0.5
    out = np.empty(p.shape)
    out[~upper] = _ndtri_lower(p[~upper])
    out[upper] = -_ndtri_lower(s[upper])
    return out


# ---------------------------------------------------------------------------
# Per-law vectorized primitives (natural log)
# ---------------------------------------------------------------------------
def logpdf(law: Dim1Law, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if isinstance(law, Gaussian):
        zs = (x - law.mean) / law.std
        return -0.5 * zs * zs - math.log(law.std * _SQRT2PI)
    inside = (x >= law.lo) & (x <= law.hi)
    return np.where(inside, -math.log(law.width), -np.inf)


def cdf(law: Dim1Law, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if isinstance(law, Gaussian):
        return _std_normal_cdf((x - law.mean) / law.std)
    return np.clip((x - law.lo) / law.width, 0.0, 1.0)


def sf(law: Dim1Law, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if isinstance(law, Gaussian):
        return _std_normal_cdf(-(x - law.mean) / law.std)
    return np.clip((law.hi - x) / law.width, 0.0, 1.0)


def ppf(law: Dim1Law, p, s=None) -> np.ndarray:
    """Quantile with optional exact upper-tail mass ``s`` (see std_normal_ppf)."""
    p = np.asarray(p, dtype=np.float64)
    if isinstance(law, Gaussian):
        return law.mean + law.std * std_normal_ppf(p, s)
    if s is None:
        return law.lo + p * law.width
    s = np.asarray(s, dtype=np.float64)
    return np.where(p > 0.5, law.hi - s * law.width, law.lo + p * law.width)


def interval_mass(law: Dim1Law, a, b) -> np.ndarray:
    """Mass of [a, b] under ``law``, using the survival side above the median."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    centre = law.mean if isinstance(law, Gaussian) else 0.5 * (law.lo + law.hi)
    upper = a >= centre
    lower_side = cdf(law, b) - cdf(law, a)
    upper_side = sf(law, a) - sf(law, b)
    return np.maximum(np.where(upper, upper_side, lower_side), 0.0)


def quantile(law: Dim1Law, u: float) -> float:
    """Inverse CDF of a single law at ``u`` in [0, 1]."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u must lie in [0, 1], got {u}")
    return float(ppf(law, u))


# ---------------------------------------------------------------------------
# Factorized distributions and tasks
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class FactorizedDistribution:
    dims: tuple

    def __post_init__(self):
        dims = tuple(self.dims)
        if not dims:
            raise ValueError("a factorized distribution needs at least one dimension")
        for law in dims:
            if not isinstance(law, (Gaussian, Uniform)):
                raise TypeError(f"unsupported 1D law {law!r}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def gaussian(cls, mean, std) -> "FactorizedDistribution":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        std = np.broadcast_to(np.asarray(std, dtype=float), mean.shape)
        return cls(tuple(Gaussian(float(m), float(s)) for m, s in zip(mean, std)))

    @classmethod
    def uniform(cls, lo, hi) -> "FactorizedDistribution":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), lo.shape)
        return cls(tuple(Uniform(float(a), float(b)) for a, b in zip(lo, hi)))

    @property
    def D(self) -> int:
        return len(self.dims)

    def _points(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1:] != (self.D,):
            raise ValueError(f"expected points of dimension {self.D}, got shape {z.shape}")
        return z

    def logpdf(self, z) -> np.ndarray:
        """Natural-log density; accepts a point or an (n, D) batch."""
        z = self._points(z)
        total = np.zeros(z.shape[:-1])
        for d, law in enumerate(self.dims):
            total = total + logpdf(law, z[..., d])
        return total

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random((n, self.D))
        if all(isinstance(law, Gaussian) for law in self.dims):
            mean = np.array([law.mean for law in self.dims])
            std = np.array([law.std for law in self.dims])
            return mean + std * std_normal_ppf(u)
        out = np.empty((n, self.D))
        for d, law in enumerate(self.dims):
            out[:, d] = ppf(law, u[:, d])
        return out

    def to_json(self) -> dict:
        dims = []
        for law in self.dims:
            if isinstance(law, Gaussian):
                dims.append({"kind": "gaussian", "mean": law.mean, "std": law.std})
            else:
                dims.append({"kind": "uniform", "lo": law.lo, "hi": law.hi})
        return {"dims": dims}

    @classmethod
    def from_json(cls, obj: dict) -> "FactorizedDistribution":
        dims = []
        for entry in obj["dims"]:
            kind = entry["kind"]
            if kind == "gaussian":
                dims.append(Gaussian(float(entry["mean"]), float(entry["std"])))
            elif kind == "uniform":
                dims.append(Uniform(float(entry["lo"]), float(entry["hi"])))
            else:
                raise ValueError(f"unknown law kind {kind!r}")
        return cls(tuple(dims))


def _absolutely_continuous(q: Dim1Law, p: Dim1Law) -> bool:
    if isinstance(p, Gaussian):
        return True
    if isinstance(q, Gaussian):
        return False
    return p.lo <= q.lo and q.hi <= p.hi


@dataclass(frozen=True)
class RecTask:
    target: FactorizedDistribution
    prior: FactorizedDistribution

    def __post_init__(self):
        if self.target.D != self.prior.D:
            raise ValueError(
                f"target has {self.target.D} dims but prior has {self.prior.D}")
        for d, (q, p) in enumerate(zip(self.target.dims, self.prior.dims)):
            if not _absolutely_continuous(q, p):
                raise ValueError(f"dimension {d}: target support not contained in prior support")

    @property
    def D(self) -> int:
        return self.target.D

    def to_json(self) -> dict:
        return {"target": self.target.to_json(), "prior": self.prior.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "RecTask":
        return cls(FactorizedDistribution.from_json(obj["target"]),
                   FactorizedDistribution.from_json(obj["prior"]))


def log2_density(dist: FactorizedDistribution, z) -> float:
    return float(dist.logpdf(z) * LOG2E)


def log_ratio(task: RecTask, z) -> np.ndarray:
    """Natural-log density ratio ln q(z) - ln p(z) for a point or batch."""
    z = task.prior._points(z)
    lp = task.prior.logpdf(z)
    if np.any(np.isneginf(lp)):
        raise ValueError("point outside the prior support; density ratio undefined")
    return task.target.logpdf(z) - lp


def log2_ratio(task: RecTask, z) -> float:
    return float(log_ratio(task, z) * LOG2E)


def kl_nats_1d(q: Dim1Law, p: Dim1Law) -> float:
    if not _absolutely_continuous(q, p):
        raise ValueError(f"KL undefined: {q!r} is not absolutely continuous w.r.t. {p!r}")
    if isinstance(q, Gaussian):
        return (math.log(p.std / q.std)
                + (q.std ** 2 + (q.mean - p.mean) ** 2) / (2.0 * p.std ** 2) - 0.5)
    if isinstance(p, Uniform):
        return math.log(p.width / q.width)
    # uniform target, gaussian prior
    mid = 0.5 * (q.lo + q.hi)
    second_moment = q.width ** 2 / 12.0 + (mid - p.mean) ** 2
    return (-math.log(q.width) + math.log(p.std * _SQRT2PI)
            + second_moment / (2.0 * p.std ** 2))


def dimwise_kl_bits(task: RecTask) -> list[float]:
    return [kl_nats_1d(q, p) * LOG2E for q, p in zip(task.target.dims, task.prior.dims)]


def kl_bits(task: RecTask) -> float:
    return float(math.fsum(dimwise_kl_bits(task)))


def log_sup_ratio(q: Dim1Law, p: Dim1Law, a: float, b: float) -> float:
    """ln sup_{z in [a, b]} q(z)/p(z); +inf when unbounded, -inf when q vanishes.

    [a, b] must lie in p's support; endpoints may be infinite.
    """
    if isinstance(q, Uniform):
        lo, hi = max(a, q.lo), min(b, q.hi)
        if hi < lo or (hi == lo and a < b):
            return -math.inf
        if isinstance(p, Uniform):
            return math.log(p.width / q.width)
        # farthest admissible point from the prior mean maximises 1/p
        far = lo if abs(lo - p.mean) >= abs(hi - p.mean) else hi
        return -math.log(q.width) - float(logpdf(p, far))
    if isinstance(p, Uniform):
        raise ValueError("Gaussian target against a uniform prior is not absolutely continuous")

    # ln q - ln p = c2 z^2 + c1 z + c0
    vq, vp = q.std ** 2, p.std ** 2
    c2 = 0.5 / vp - 0.5 / vq
    c1 = q.mean / vq - p.mean / vp
    c0 = math.log(p.std / q.std) - 0.5 * q.mean ** 2 / vq + 0.5 * p.mean ** 2 / vp

    def value(z):
        return (c2 * z + c1) * z + c0

    if c2 < 0.0:
        zstar = min(max(-c1 / (2.0 * c2), a), b)
        return value(zstar)
    if c2 == 0.0:
        if c1 == 0.0:
            return c0
        end = b if c1 > 0.0 else a
        return math.inf if math.isinf(end) else value(end)
    if math.isinf(a) or math.isinf(b):
        return math.inf
    return max(value(a), value(b))


def renyi_inf_bits(task: RecTask):
    """log2 sup q/p, or UNBOUNDED."""
    total = 0.0
    for q, p in zip(task.target.dims, task.prior.dims):
        lo, hi = p.support
        v = log_sup_ratio(q, p, lo, hi)
        if math.isinf(v) and v > 0:
            return UNBOUNDED
        total += v
    return total * LOG2E


def mean_std(law: Dim1Law) -> tuple[float, float]:
    if isinstance(law, Gaussian):
        return law.mean, law.std
    return 0.5 * (law.lo + law.hi), law.width / math.sqrt(12.0)
