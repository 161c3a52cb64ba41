"""Acceptance criteria 1-10, one test each.

Every test records a one-line PASS/FAIL verdict (printed in the terminal
summary and to stdout) before asserting.
"""

import math

import numpy as np
import pytest
from scipy import stats

from conftest import ACCEPTANCE_LINES
from sprec import bench
from sprec.block import BlockHeader, pack_block, unpack_block
from sprec.diagnostics import (
    codelength_bound,
    epsilon_cost,
    gaussian_epsilon_cap,
    histogram_tv_1d,
    mmd_permutation_test,
    standardize,
)
from sprec.distributions import (
    FactorizedDistribution,
    RecTask,
    Uniform,
    dimwise_kl_bits,
    kl_bits,
    renyi_inf_bits,
)
from sprec.index_codec import BitReader, ZipfModel, decode_indices, encode_indices, fit_zeta
from sprec.partition import allocate_intervals, build_partition, trivial_partition
from sprec.rec import decode, encode_orc, encode_pfr, encode_sp_orc, encode_sp_pfr


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)
    assert ok, line


def kl_layout(task: RecTask) -> list[int]:
    return allocate_intervals(dimwise_kl_bits(task), math.floor(kl_bits(task)))


# ---------------------------------------------------------------------------
# 1. exactness of SP-PFR
# ---------------------------------------------------------------------------
def test_c01_sp_pfr_exactness():
    task = RecTask(FactorizedDistribution.gaussian([1.0, -0.5], [0.2, 0.3]),
                   FactorizedDistribution.gaussian([0.0, 0.0], [1.0, 1.2]))
    part = build_partition(task.prior, kl_layout(task))
    z = np.array([encode_sp_pfr(task, part, seed).sample for seed in range(5000)])
    ks = [float(stats.kstest(z[:, d], "norm", args=(q.mean, q.std)).statistic)
          for d, q in enumerate(task.target.dims)]
    ref = task.target.sample(np.random.default_rng(12345), 5000)
    # the permutation test builds a pooled kernel matrix, so it uses 1500 + 1500 points
    test = mmd_permutation_test(standardize(z[:1500], task.target),
                                standardize(ref[:1500], task.target), 200, seed=1)
    ok = max(ks) < 0.03 and test.p_value > 0.01
    verdict(1, ok, f"J={part.total_bins} KS={[round(k, 4) for k in ks]} (<0.03) "
                   f"MMD p={test.p_value:.3f} (>0.01)")


# ---------------------------------------------------------------------------
# 2. runtime reduction at D_inf in [10, 13)
# ---------------------------------------------------------------------------
def test_c02_runtime_reduction():
    pool = [t for t in bench.gen_tasks(600, seed=11) if 10 <= renyi_inf_bits(t.task) < 13][:60]
    recs = bench.run_pfr_sweep(pool, repeats=20, seed=2)
    pfr = np.mean([r.steps for r in recs if r.algorithm == "pfr"])
    sp = np.mean([r.steps for r in recs if r.algorithm == "sp-pfr"])
    censored = sum(r.censored for r in recs)
    ok = sp <= 0.1 * pfr and censored == 0
    verdict(2, ok, f"{len(pool)} tasks x 20: SP-PFR {sp:.1f} vs PFR {pfr:.1f} mean steps, "
                   f"ratio {sp / pfr:.4f} (<=0.1)")


# ---------------------------------------------------------------------------
# 3 and 4 share one PFR / SP-PFR sweep
# ---------------------------------------------------------------------------
@pytest.fixture(scope="module")
def codelength_sweep():
    # PFR runtime is 2^D_inf steps, so the suite keeps tasks with D_inf < 14 bits
    pool = [t for t in bench.gen_tasks(200, seed=21) if renyi_inf_bits(t.task) < 14][:80]
    recs = bench.run_pfr_sweep(pool, repeats=50, seed=5)
    by = {}
    for r in recs:
        by.setdefault((r.algorithm, r.task_id), []).append(r)
    return pool, by


def test_c03_codelength_bound(codelength_sweep):
    pool, by = codelength_sweep
    worst, worst_task = -math.inf, None
    for t in pool:
        for algo in ("pfr", "sp-pfr"):
            rs = by[(algo, t.task_id)]
            J = 2 ** round(rs[0].log2_J)
            eps = epsilon_cost(t.task, J, 20_000, seed=t.task_id).value
            bound = codelength_bound(t.task, J, eps).codelength_bound_bits
            gap = np.mean([r.code_bits for r in rs]) - bound
            if gap > worst:
                worst, worst_task = gap, (algo, t.task_id)
    verdict(3, worst <= 1.0, f"{len(pool)} tasks x 50, both samplers: max(codelength - bound) = "
                             f"{worst:.3f} bits at {worst_task} (<=1)")


def test_c04_codelength_parity(codelength_sweep):
    pool, by = codelength_sweep
    buckets = {}
    for t in pool:
        b = math.floor(kl_bits(t.task))
        for algo in ("pfr", "sp-pfr"):
            buckets.setdefault(b, {}).setdefault(algo, []).append(
                np.mean([r.code_bits for r in by[(algo, t.task_id)]]))
    diffs = {b: np.mean(v["sp-pfr"]) - np.mean(v["pfr"]) for b, v in sorted(buckets.items())}
    worst = max(abs(d) for d in diffs.values())
    detail = " ".join(f"[{b},{b + 1}):{d:+.2f}(n={len(buckets[b]['pfr'])})" for b, d in diffs.items())
    verdict(4, worst <= 1.0, f"SP-PFR minus PFR mean code bits per KL bucket: {detail}; "
                             f"max |diff| {worst:.3f} (<=1)")


# ---------------------------------------------------------------------------
# 5. epsilon bounds
# ---------------------------------------------------------------------------
def random_uniform_task(rng, dim=3):
    lo = rng.uniform(-2, 0, dim)
    hi = lo + rng.uniform(0.5, 3, dim)
    w = (hi - lo) * rng.uniform(0.01, 0.9, dim)
    qlo = lo + rng.uniform(0, 1, dim) * (hi - lo - w)
    return RecTask(FactorizedDistribution.uniform(qlo, qlo + w), FactorizedDistribution.uniform(lo, hi))


def test_c05_epsilon_bounds():
    rng = np.random.default_rng(5)
    uniform_max = 0.0
    for _ in range(100):
        task = random_uniform_task(rng)
        J = 2 ** math.floor(kl_bits(task))
        uniform_max = max(uniform_max, epsilon_cost(task, J, 2000, 0).value)
    worst = -math.inf
    for t in bench.gen_tasks(100, seed=55):
        task = t.task
        J = 2 ** math.floor(kl_bits(task))
        est = epsilon_cost(task, J, 20_000, seed=t.task_id)
        worst = max(worst, est.value - gaussian_epsilon_cap(task) - 3 * est.stderr)
    ok = uniform_max == 0.0 and worst <= 0.0
    verdict(5, ok, f"uniform max eps = {uniform_max} (==0); gaussian max(eps - 0.849 sqrt(KL) - 3se) = "
                   f"{worst:.3f} (<=0), 100 tasks each")


# ---------------------------------------------------------------------------
# 6. ORC bias ordering
# ---------------------------------------------------------------------------
def test_c06_orc_bias_ordering():
    # cells where both samplers are already unbiased only compare noise, so
    # the suite uses tasks with KL in [6, 16) bits, where N <= 2^8 is still short
    pool = [t for t in bench.gen_tasks(600, seed=7) if 6 <= kl_bits(t.task) < 16][:50]
    recs = bench.run_orc_sweep(pool, [2 ** 4, 2 ** 6, 2 ** 8], repeats=100, seed=3)
    mmd = {(r.task_id, r.n_candidates, r.algorithm): r.mmd2 for r in recs}
    cells = [(t.task_id, n) for t in pool for n in (16, 64, 256)]
    wins = [mmd[(i, n, "sp-orc")] <= mmd[(i, n, "orc")] for i, n in cells]
    frac = float(np.mean(wins))
    verdict(6, frac >= 0.8, f"SP-ORC MMD <= ORC MMD in {sum(wins)}/{len(cells)} cells "
                            f"= {frac:.3f} (>=0.8)")


# ---------------------------------------------------------------------------
# 7. ORC sample-size law
# ---------------------------------------------------------------------------
def test_c07_orc_sample_size_law():
    task = RecTask(FactorizedDistribution.gaussian([1.389], [0.1]), FactorizedDistribution.gaussian([0], [1]))
    kl = kl_bits(task)
    q, p = task.target.dims[0], task.prior.dims[0]
    hi_n, lo_n = 2 ** round(kl + 4), 2 ** round(kl - 3)
    tv_hi = histogram_tv_1d([encode_orc(task, hi_n, s).sample[0] for s in range(10_000)], q, p)
    tv_lo = histogram_tv_1d([encode_orc(task, lo_n, s).sample[0] for s in range(10_000)], q, p)
    ok = tv_hi < 0.1 and tv_lo > 0.3
    verdict(7, ok, f"KL={kl:.3f}: TV at N={hi_n} is {tv_hi:.4f} (<0.1), at N={lo_n} is "
                   f"{tv_lo:.4f} (>0.3)")


# ---------------------------------------------------------------------------
# 8. roundtrip through the bitstream
# ---------------------------------------------------------------------------
def test_c08_roundtrip():
    rng = np.random.default_rng(8)
    toy = [t.task for t in bench.gen_tasks(60, seed=81) if renyi_inf_bits(t.task) < 14][:30]
    uni = [random_uniform_task(rng) for _ in range(10)]
    mixed = [RecTask(FactorizedDistribution((Uniform(0.1, 0.4), Uniform(-0.5, 0.7))),
                     FactorizedDistribution((Uniform(0.0, 1.0),
                                             FactorizedDistribution.gaussian([0], [1]).dims[0])))]
    tasks = toy + uni + mixed
    failures = 0
    for _ in range(1000):
        task = tasks[rng.integers(len(tasks))]
        algo = ("pfr", "sp-pfr", "orc", "sp-orc")[rng.integers(4)]
        seed = int(rng.integers(0, 2 ** 63)) * 2 + int(rng.integers(2))
        part = build_partition(task.prior, kl_layout(task))
        if algo == "pfr":
            rep, part = encode_pfr(task, seed, step_ceiling=2 ** 18), trivial_partition(task.prior)
        elif algo == "sp-pfr":
            rep = encode_sp_pfr(task, part, seed, step_ceiling=2 ** 18)
        elif algo == "orc":
            rep, part = encode_orc(task, 64, seed), trivial_partition(task.prior)
        else:
            rep = encode_sp_orc(task, part, 64, seed)
        blob = pack_block(BlockHeader(part.counts, seed, 1.0), rep.code)
        header, code = unpack_block(blob)
        z = decode(task.prior, build_partition(task.prior, header.counts), code, header.base_seed)
        failures += not np.array_equal(z, rep.sample)
    verdict(8, failures == 0, f"{1000 - failures}/1000 (task, algorithm, seed) triples decode "
                              f"bitwise after serialization")


# ---------------------------------------------------------------------------
# 9. index codec
# ---------------------------------------------------------------------------
def test_c09_index_codec():
    n = 10_000
    rows, ok = [], True
    # heavier tails make the sample-mean NLL too noisy for a 0.1 bit window at n = 10^4
    for zeta in (0.3, 0.5, 1.0):
        model = ZipfModel(zeta)
        idx = model.sample(np.random.default_rng(int(zeta * 10)), n).tolist()
        data = encode_indices(model, idx).getvalue(strip_trailing_zeros=True)
        lossless = decode_indices(model, BitReader(data), n) == idx
        bits = 8 * len(data) / n
        entropy = model.entropy_bits()
        fitted = fit_zeta(idx).zeta
        good = lossless and abs(bits - entropy) <= 0.1 + 2 / n and abs(fitted / zeta - 1) <= 0.1
        ok &= good
        rows.append(f"zeta={zeta}: lossless={lossless} bits/idx={bits:.4f} H={entropy:.4f} "
                    f"fit={fitted:.4f}")
    verdict(9, ok, "; ".join(rows))


# ---------------------------------------------------------------------------
# 10. degenerate equivalence
# ---------------------------------------------------------------------------
def test_c10_degenerate_equivalence():
    mismatches, total = 0, 0
    for t in [t for t in bench.gen_tasks(30, seed=10) if renyi_inf_bits(t.task) < 12][:10]:
        part = trivial_partition(t.task.prior)
        for r in range(10):
            s = bench.derive_seed(10, t.task_id, r)
            pairs = [(encode_pfr(t.task, s), encode_sp_pfr(t.task, part, s)),
                     (encode_orc(t.task, 128, s), encode_sp_orc(t.task, part, 128, s))]
            for a, b in pairs:
                total += 1
                same = (a.code == b.code and a.steps == b.steps and a.tau_star == b.tau_star
                        and a.censored == b.censored and np.array_equal(a.sample, b.sample))
                mismatches += not same
    verdict(10, mismatches == 0, f"{total - mismatches}/{total} J=1 encodes identical to the "
                                 f"unpartitioned sampler (code, steps, tau*, sample)")
