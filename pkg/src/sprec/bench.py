"""Synthetic Gaussian toy tasks and the PFR / ORC sweeps run on them."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .diagnostics import mmd_rbf, standardize
from .distributions import FactorizedDistribution, RecTask, kl_bits, renyi_inf_bits
from .index_codec import fit_zeta, nll_bits
from .partition import GridPartition, allocate_intervals, build_partition
from .rec import (
    DEFAULT_STEP_CEILING,
    encode_orc,
    encode_pfr,
    encode_sp_orc,
    encode_sp_pfr,
)

SCHEMA_VERSION = 1


def derive_seed(*keys: int) -> int:
    """A 64-bit seed determined by an integer key path (master seed first)."""
    ss = np.random.SeedSequence([int(k) & 0xFFFFFFFFFFFFFFFF for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ToyTaskSpec:
    """One realization of the toy Gaussian model.

    Prior N(0, sigma^2 + rho^2), target N(x, rho^2) with x ~ N(0, sigma^2),
    all diagonal.
    """

    task_id: int
    seed: int
    sigma: tuple
    rho: tuple
    x: tuple

    @property
    def dim(self) -> int:
        return len(self.sigma)

    @property
    def task(self) -> RecTask:
        s, r = np.asarray(self.sigma), np.asarray(self.rho)
        prior = FactorizedDistribution.gaussian(np.zeros(self.dim), np.sqrt(s * s + r * r))
        return RecTask(FactorizedDistribution.gaussian(self.x, r), prior)

    @property
    def mi_bits(self) -> list[float]:
        s, r = np.asarray(self.sigma), np.asarray(self.rho)
        return (0.5 * np.log2((s * s + r * r) / (r * r))).tolist()

    def layout(self) -> list[int]:
        """Per-axis interval counts: MI-driven doubling within floor(KL) bits."""
        return allocate_intervals(self.mi_bits, math.floor(kl_bits(self.task)))

    def partition(self) -> GridPartition:
        return build_partition(self.task.prior, self.layout())

    def to_json(self) -> dict:
        return {"task_id": self.task_id, "seed": self.seed, "sigma": list(self.sigma),
                "rho": list(self.rho), "x": list(self.x)}

    @classmethod
    def from_json(cls, obj: dict) -> "ToyTaskSpec":
        return cls(int(obj["task_id"]), int(obj["seed"]), tuple(obj["sigma"]),
                   tuple(obj["rho"]), tuple(obj["x"]))


def _open_unit(rng: np.random.Generator, n: int) -> np.ndarray:
    u = rng.random(n)
    while np.any(u == 0.0):
        u[u == 0.0] = rng.random(int(np.sum(u == 0.0)))
    return u


def make_task(task_id: int, seed: int, dim: int = 5) -> ToyTaskSpec:
    rng = np.random.default_rng(seed)
    sigma = _open_unit(rng, dim)
    rho = _open_unit(rng, dim)
    x = rng.normal(0.0, sigma)
    return ToyTaskSpec(task_id, seed, tuple(sigma.tolist()), tuple(rho.tolist()),
                       tuple(x.tolist()))


def gen_tasks(count: int, dim: int = 5, seed: int = 0) -> list[ToyTaskSpec]:
    if count < 1:
        raise ValueError("count must be at least 1")
    if dim < 1:
        raise ValueError("dim must be at least 1")
    return [make_task(i, derive_seed(seed, i), dim) for i in range(count)]


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------
@dataclass
class RunRecord:
    schema_version: int
    task_id: int
    algorithm: str
    repeat: int
    seed: int
    layout: str
    log2_J: float
    n_candidates: int
    n_encodes: int
    steps: float
    censored: bool
    tau_star: float
    bin: int
    local_index: int
    zeta: float
    index_nll_bits: float
    code_bits: float
    kl_bits: float
    dinf_bits: float
    mmd2: float
    wall_time_s: float


CSV_COLUMNS = [f.name for f in fields(RunRecord)]


def write_csv(records: Iterable[RunRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for r in records:
            w.writerow(asdict(r))


def read_csv(path) -> list[RunRecord]:
    casts = {f.name: f.type for f in fields(RunRecord)}
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if int(row["schema_version"]) != SCHEMA_VERSION:
                raise ValueError(f"unsupported schema version {row['schema_version']}")
            vals = {}
            for k, v in row.items():
                t = casts[k]
                vals[k] = (v == "True") if t == "bool" else (v if t == "str" else
                                                             (int(v) if t == "int" else float(v)))
            out.append(RunRecord(**vals))
    return out


def _layout_str(counts: Sequence[int]) -> str:
    return "x".join(str(c) for c in counts)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------
def run_pfr_sweep(tasks: Sequence[ToyTaskSpec], repeats: int = 50, seed: int = 0,
                  step_ceiling: int = DEFAULT_STEP_CEILING, threads: int = 1,
                  algorithms: Sequence[str] = ("pfr", "sp-pfr")) -> list[RunRecord]:
    """PFR and SP-PFR on every task, ``repeats`` encodes each under shared seeds.

    The local-index codelength uses a Zipf model fitted to the task's repeats
    for that algorithm; code_bits = log2 J + index NLL.
    """
    def cell(item):
        spec, r = item
        task = spec.task
        s = derive_seed(seed, spec.task_id, r)
        out = []
        for algo in algorithms:
            t0 = time.perf_counter()
            if algo == "pfr":
                rep, counts = encode_pfr(task, s, step_ceiling=step_ceiling), [1] * spec.dim
            elif algo == "sp-pfr":
                part = spec.partition()
                rep, counts = encode_sp_pfr(task, part, s, step_ceiling=step_ceiling), part.counts
            else:
                raise ValueError(f"unknown algorithm {algo!r}")
            out.append((algo, r, s, counts, rep, time.perf_counter() - t0))
        return out

    cells = [(spec, r) for spec in tasks for r in range(repeats)]
    results = _map(cell, cells, threads)

    records: list[RunRecord] = []
    for ti, spec in enumerate(tasks):
        chunk = [row for rows in results[ti * repeats:(ti + 1) * repeats] for row in rows]
        task = spec.task
        kl, dinf = kl_bits(task), float(renyi_inf_bits(task))
        for algo in algorithms:
            rows = [row for row in chunk if row[0] == algo]
            model = fit_zeta([row[4].code.local_index for row in rows])
            for _, r, s, counts, rep, wall in rows:
                log2_j = float(sum(math.log2(c) for c in counts))
                nll = float(nll_bits(model, rep.code.local_index))
                records.append(RunRecord(
                    SCHEMA_VERSION, spec.task_id, algo, r, s, _layout_str(counts), log2_j, 0, 1,
                    float(rep.steps), rep.censored, rep.tau_star, rep.code.bin,
                    rep.code.local_index, model.zeta, nll, log2_j + nll, kl, dinf,
                    math.nan, wall))
    return records


def run_orc_sweep(tasks: Sequence[ToyTaskSpec], sample_sizes: Sequence[int] = tuple(2 ** k for k in range(1, 11)),
                  repeats: int = 500, seed: int = 0, threads: int = 1,
                  algorithms: Sequence[str] = ("orc", "sp-orc")) -> list[RunRecord]:
    """ORC and SP-ORC at each candidate budget; one aggregate record per
    (task, N, algorithm) carrying the MMD^2 between ``repeats`` encoded samples
    and as many direct draws from Q, both standardized by Q.

    Encodes at a given (task, repeat) share seeds across N and algorithms, and
    each task uses one reference draw for every setting.
    """
    def cell(spec: ToyTaskSpec):
        task = spec.task
        part = spec.partition()
        ref_rng = np.random.default_rng(derive_seed(seed, spec.task_id, 0x5245))
        reference = standardize(task.target.sample(ref_rng, repeats), task.target)
        kl, dinf = kl_bits(task), float(renyi_inf_bits(task))
        out = []
        for n in sample_sizes:
            for algo in algorithms:
                t0 = time.perf_counter()
                samples = np.empty((repeats, spec.dim))
                for r in range(repeats):
                    s = derive_seed(seed, spec.task_id, r)
                    if algo == "orc":
                        rep = encode_orc(task, n, s)
                    elif algo == "sp-orc":
                        rep = encode_sp_orc(task, part, n, s)
                    else:
                        raise ValueError(f"unknown algorithm {algo!r}")
                    samples[r] = rep.sample
                counts = part.counts if algo == "sp-orc" else (1,) * spec.dim
                log2_j = float(sum(math.log2(c) for c in counts))
                mmd = mmd_rbf(standardize(samples, task.target), reference)
                out.append(RunRecord(
                    SCHEMA_VERSION, spec.task_id, algo, 0, derive_seed(seed, spec.task_id),
                    _layout_str(counts), log2_j, n, repeats, float(n), False, math.nan, 0, 0,
                    math.nan, math.nan, log2_j + math.log2(n), kl, dinf, mmd,
                    time.perf_counter() - t0))
        return out

    return [rec for rows in _map(cell, list(tasks), threads) for rec in rows]


def summarize(records: Sequence[RunRecord], by: str = "dinf_bits",
              value: str = "steps") -> dict:
    """Mean and interquartile range of ``value`` per algorithm and unit-width bucket of ``by``.

    Per-task means are taken first, so every task counts once per bucket.
    """
    per_task: dict = {}
    for r in records:
        key = (r.algorithm, r.task_id, r.n_candidates)
        per_task.setdefault(key, {"x": getattr(r, by), "v": []})["v"].append(getattr(r, value))
    buckets: dict = {}
    for (algo, _, n), entry in per_task.items():
        b = math.floor(entry["x"])
        buckets.setdefault(algo, {}).setdefault(n, {}).setdefault(b, []).append(
            float(np.mean(entry["v"])))
    out: dict = {"schema_version": SCHEMA_VERSION, "by": by, "value": value, "series": []}
    for algo in sorted(buckets):
        for n in sorted(buckets[algo]):
            for b in sorted(buckets[algo][n]):
                v = np.asarray(buckets[algo][n][b])
                q1, q3 = np.percentile(v, [25, 75])
                out["series"].append({"algorithm": algo, "n_candidates": n, "bucket": [b, b + 1],
                                      "tasks": int(v.size), "mean": float(v.mean()),
                                      "iqr": [float(q1), float(q3)]})
    return out


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
