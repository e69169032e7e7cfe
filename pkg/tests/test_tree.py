import struct

import numpy as np
import pytest

from treewave import tree
from treewave.errors import ConfigurationError, RangeError
from treewave.kernels import ConstantKernels, PairDistribution, ProductBernoulli

from oracles import gw_fixed_point

ALL_ONES = ConstantKernels(PairDistribution.point(0, 0), PairDistribution.point(1, 1), 1.0)


def test_all_ones_tree():
    t = tree.sample_tree(ALL_ONES, 8, 3)
    for j in range(9):
        assert t.count(j) == 1 << j
        assert tree.level_ones(t, j).size == 1 << j
    for j in range(1, 9):
        assert tree.fresh_ones(t, j).size == 0
    cov = tree.theta_cover(t, 8)
    assert len(cov) == 256 and np.all(cov.run == 8)
    assert all(tree.subtree_reaches(t, 4, k) for k in range(16))


def test_absorbing_zero():
    t = tree.sample_tree(ProductBernoulli(0.7, 0.0, 0.0), 10, 5)
    assert t.counts.sum() == 0
    assert len(tree.theta_cover(t)) == 0
    assert not tree.subtree_reaches(t, 0, 0)


def test_mean_count_galton_watson():
    sch = ProductBernoulli(0.7, 0.0)
    counts = np.array([tree.sample_tree(sch, 5, s).count(5) for s in range(10_000)])
    se = counts.std(ddof=1) / np.sqrt(counts.size)
    assert abs(counts.mean() - 1.4 ** 5) <= 3 * se


def test_fresh_mean_below_bound():
    sch = ProductBernoulli(0.0, 0.5, 0.0)
    j = 4
    fresh = np.array([tree.fresh_ones(tree.sample_tree(sch, j, s), j).size for s in range(5000)])
    eta = 2 * 0.5 - 0.25
    se = fresh.std(ddof=1) / np.sqrt(fresh.size)
    assert fresh.mean() <= (1 << j) * eta + 3 * se
    # E[#fresh_j] = 2^{j-1} P(father 0) 2q
    p0 = np.array([1 - tree.sample_tree(sch, j - 1, s).bits(j - 1).mean() for s in range(5000)]).mean()
    assert abs(fresh.mean() - (1 << (j - 1)) * p0 * 2 * 0.5) <= 4 * se


def test_subtree_survival_frequency():
    p, J = 0.7, 20
    sch = ProductBernoulli(p, 0.0)
    hits = sum(tree.subtree_reaches(tree.sample_tree(sch, J, s), 0, 0) for s in range(2000))
    target = 1 - gw_fixed_point(p)
    sd = np.sqrt(target * (1 - target) / 2000)
    assert abs(hits / 2000 - target) <= 4 * sd + 1e-3


def test_zero_vertex_subtree_empty():
    t = tree.sample_tree(ProductBernoulli(0.6, 0.0), 8, 11)
    zeros = np.flatnonzero(t.bits(3) == 0)
    for k in zeros:
        assert not tree.subtree_reaches(t, 3, int(k))


def test_run_lengths_mark_chain_start():
    sch = ProductBernoulli(0.6, 0.3)
    t = tree.sample_tree(sch, 6, 2)
    run = tree.run_lengths(t)
    for k in range(64):
        chain = [t.state(j, k >> (6 - j)) for j in range(7)]
        if chain[-1] == 0:
            assert run[k] == -1
        else:
            n = 0
            while n < 6 and chain[5 - n] == 1:
                n += 1
            assert run[k] == n


def test_range_errors():
    t = tree.sample_tree(ALL_ONES, 4, 0)
    with pytest.raises(RangeError):
        t.bits(5)
    with pytest.raises(RangeError):
        tree.fresh_ones(t, 0)
    with pytest.raises(RangeError):
        tree.subtree_reaches(t, 2, 4)


def test_depth_cap(monkeypatch):
    with pytest.raises(ConfigurationError):
        tree.sample_tree(ALL_ONES, tree.DEFAULT_DEPTH_CAP + 1, 0)
    monkeypatch.setenv("TREEWAVE_DEPTH_CAP", "3")
    with pytest.raises(ConfigurationError):
        tree.sample_tree(ALL_ONES, 4, 0)


def test_file_layout(tmp_path):
    sch = ProductBernoulli(0.6, 0.2)
    t = tree.sample_tree(sch, 5, 0xDEADBEEF)
    blob = t.to_bytes()
    assert blob[:4] == b"HMTT"
    assert struct.unpack("<BBQ", blob[4:14]) == (1, 5, 0xDEADBEEF)
    assert blob[14:30] == sch.fingerprint() and len(sch.fingerprint()) == 16
    stream = np.concatenate([t.bits(j) for j in range(6)])
    assert blob[30:] == np.packbits(stream, bitorder="little").tobytes()
    f = tmp_path / "t.hmtt"
    t.save(f)
    back = tree.TreeSample.load(f)
    assert back.to_bytes() == blob


def test_seeds_differ():
    sch = ProductBernoulli(0.5, 0.5, 0.5)
    assert tree.sample_tree(sch, 10, 1).to_bytes() != tree.sample_tree(sch, 10, 2).to_bytes()
