import dataclasses
import math

import numpy as np
import pytest

from treewave import mc, params
from treewave.errors import ConfigurationError, RangeError, UnknownEventError
from treewave.kernels import ConstantKernels, PairDistribution, ProductBernoulli

from oracles import gw_iterate

DELTA = ConstantKernels(PairDistribution.point(0, 0), PairDistribution.point(1, 1), 0.4)
ONES = ConstantKernels(PairDistribution.point(0, 0), PairDistribution.point(1, 1), 1.0)


def test_s_empty_all_ones_chain():
    r = mc.mc_probability(DELTA, 6, "s-empty", trials=20_000, seed=1)
    assert r.covers(0.6)
    assert r.p_hat == pytest.approx(0.6, abs=0.02)


def test_s_empty_galton_watson():
    p, J = 0.7, 14
    r = mc.mc_probability(ProductBernoulli(p, 0.0), J, "s-empty", trials=3000, seed=2)
    exact = gw_iterate(p, J)
    assert r.covers(exact)
    assert params.phi0(ProductBernoulli(p, 0.0), J) == pytest.approx(exact, abs=1e-14)


def test_impossible_event():
    r = mc.mc_probability(ONES, 2, "s-empty", trials=100_000, seed=3)
    assert r.successes == 0
    # 0 of 1e5 puts the 95% Wilson upper end at z^2 / (n + z^2) ~ 3.8e-5
    assert dataclasses.replace(r, confidence=0.95).interval[1] < 5e-5


def test_wilson_coverage():
    sch = ProductBernoulli(0.0, 0.0, 0.7)  # S_0 empty with probability 0.3
    hits = 0
    for m in range(200):
        r = mc.mc_probability(sch, 0, "s-empty", trials=100, seed=10_000 + m)
        hits += r.covers(0.3)
    assert hits / 200 >= 0.95


def test_wilson_interval_bounds():
    lo, hi = mc.wilson_interval(0, 100)
    assert lo == 0.0 and 0 < hi < 0.1
    lo, hi = mc.wilson_interval(100, 100)
    assert hi == 1.0 and lo > 0.9


def test_reproducible_and_seed_sensitive():
    sch = ProductBernoulli(0.6, 0.2, 0.5)
    a = mc.mc_probability(sch, 6, "fresh-nonempty", trials=400, seed=5)
    assert a == mc.mc_probability(sch, 6, "fresh-nonempty", trials=400, seed=5)
    assert mc.replicate_seed(5, 0) != mc.replicate_seed(6, 0)
    assert len({mc.replicate_seed(5, i) for i in range(1000)}) == 1000


def test_event_errors():
    with pytest.raises(UnknownEventError):
        mc.mc_probability(ONES, 3, "nope", trials=100)
    with pytest.raises(ConfigurationError):
        mc.mc_probability(ONES, 3, "s-empty", trials=10)


def test_moment_examples():
    m = mc.mc_moment(ProductBernoulli(0.7, 0.0), 6, "#S_j", 6, trials=4000, seed=1)
    assert m.within(1.4 ** 6)
    f = mc.mc_moment(ProductBernoulli(0.0, 0.3, 0.0), 1, "#S~_j", 1, trials=4000, seed=2)
    assert f.within(0.6)
    o = mc.mc_moment(ONES, 7, "#S_j", 7, trials=100, seed=3)
    assert o.mean == 128 and o.se == 0
    with pytest.raises(RangeError):
        mc.mc_moment(ONES, 4, "#S_j", 5, trials=100)
    with pytest.raises(RangeError):
        mc.mc_moment(ONES, 4, "#S~_j", 0, trials=100)


def test_theta_dimension_trivial_and_subcritical():
    td = mc.mc_theta_dimension(ONES, 10, 5, seed=0)
    assert td.survival.successes == 5
    assert np.allclose(td.slopes, 1.0)
    sub = mc.mc_theta_dimension(ProductBernoulli(0.4, 0.0), 20, 500, seed=0)
    assert sub.survival.p_hat < 0.01
