import math

import numpy as np
import pytest
from scipy import stats

from sprec.distributions import FactorizedDistribution, Gaussian, Uniform, ppf
from sprec.partition import build_partition
from sprec.streams import (
    ArrivalProcess,
    ORCExhausted,
    keyed_uniforms,
    philox4x32,
    sample_cells,
    sample_in_bin,
)


@pytest.mark.parametrize("counter,key,expected", [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF, 0xFFFFFFFF), (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
])
def test_philox_known_answers(counter, key, expected):
    out = philox4x32(counter, key)
    assert tuple(int(w) for w in out) == expected


def test_keyed_uniforms_are_deterministic_and_open():
    u = keyed_uniforms(7, np.arange(1000), 1, 0)
    assert np.array_equal(u, keyed_uniforms(7, np.arange(1000), 1, 0))
    assert np.all((u > 0) & (u < 1))
    assert stats.kstest(u, "uniform").statistic < 0.05
    # every key component matters
    assert not np.array_equal(u, keyed_uniforms(8, np.arange(1000), 1, 0))
    assert not np.array_equal(u, keyed_uniforms(7, np.arange(1000), 2, 0))
    assert not np.array_equal(u, keyed_uniforms(7, np.arange(1000), 1, 1))


def test_keyed_uniforms_index_range():
    with pytest.raises(ValueError):
        keyed_uniforms(0, 0, 0, 0)
    with pytest.raises(ValueError):
        keyed_uniforms(0, 0, 2 ** 32 + 1, 0)
    keyed_uniforms(0, 0, 2 ** 32, 0)


def test_restricted_samples_follow_truncated_prior():
    law = Gaussian(0.5, 2.0)
    prior = FactorizedDistribution((law,))
    part = build_partition(prior, [8])
    k = 6
    n = 4000
    z = sample_cells(prior, part, np.full((n, 1), k), k, np.arange(1, n + 1), 11)[:, 0]
    a, b = part.interval(0, k)
    assert np.all((z >= a) & (z <= b))
    trunc = stats.truncnorm((a - 0.5) / 2.0, (b - 0.5) / 2.0, loc=0.5, scale=2.0)
    assert stats.kstest(z, trunc.cdf).pvalue > 0.001


def test_outermost_cells_stay_finite():
    prior = FactorizedDistribution((Gaussian(0, 1), Uniform(0, 1)))
    part = build_partition(prior, [1024, 4])
    z = sample_cells(prior, part, [[0, 0], [1023, 3]], [0, part.total_bins - 1], [1, 1], 3)
    assert np.all(np.isfinite(z))
    assert z[0, 0] < ppf(Gaussian(0, 1), 1 / 1024)
    assert z[1, 0] > ppf(Gaussian(0, 1), 1 - 1 / 1024)


def test_sample_in_bin_matches_batch():
    prior = FactorizedDistribution.gaussian([0, 0], [1, 3])
    part = build_partition(prior, [4, 2])
    single = sample_in_bin(prior, part, 5, 9, 123)
    cells = np.array(part.decompose(5))[None, :]
    assert np.array_equal(single, sample_cells(prior, part, cells, [5], [9], 123)[0])


def test_arrivals_are_chunk_invariant():
    a = ArrivalProcess("pfr", private_seed=5)
    whole = a.take(100)
    b = ArrivalProcess("pfr", private_seed=5)
    parts = np.concatenate([b.take(1), b.take(30), b.take(69)])
    assert np.array_equal(whole, parts)
    assert np.all(np.diff(whole) > 0)


def test_pfr_arrivals_are_poisson():
    t = ArrivalProcess("pfr", private_seed=1).take(20000)
    gaps = np.diff(np.r_[0.0, t])
    assert stats.kstest(gaps, "expon").pvalue > 0.001


def test_orc_arrivals_are_exponential_order_statistics():
    n = 8
    last = np.array([ArrivalProcess("orc", n, private_seed=s).take(n)[-1] for s in range(4000)])
    # times are n * (order statistics); the largest has CDF (1 - e^{-x/n})^n
    assert stats.kstest(last, lambda x: (1 - np.exp(-x / n)) ** n).pvalue > 0.001
    assert last.mean() == pytest.approx(n * sum(1 / k for k in range(1, n + 1)), rel=0.05)


def test_orc_budget_enforced():
    p = ArrivalProcess("orc", 4, private_seed=0)
    p.take(4)
    with pytest.raises(ORCExhausted):
        p.next_arrival()
    with pytest.raises(ValueError):
        ArrivalProcess("orc", None)
    with pytest.raises(ValueError):
        ArrivalProcess("bogus")
