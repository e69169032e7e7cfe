import json
import math

import numpy as np
import pytest

from treewave import analysis, synth, tree
from treewave.errors import ConfigurationError, DomainError, RangeError
from treewave.kernels import ProductBernoulli

from oracles import periodized


def _single(j, k, J):
    arrays = [np.zeros(1 << m) for m in range(J + 1)]
    arrays[j][k] = 1.0
    return synth.CoefficientField.from_arrays(arrays)


def test_coefficient_examples():
    assert synth.coefficient_values(np.array([1]), 3, 0.5, 2.0)[0] == pytest.approx(0.35355, abs=1e-5)
    assert synth.coefficient_values(np.array([0]), 4, 0.5, math.inf)[0] == 0.0
    assert synth.coefficient_values(np.array([0]), 0, 0.5, 3.0)[0] == 1.0


def test_coefficients_reject_bad_exponents():
    t = tree.sample_tree(ProductBernoulli(0.5, 0.5), 3, 0)
    with pytest.raises(ConfigurationError):
        synth.coefficients(t, 2.0, 1.0)


def test_mother_wavelet_path_matches_direct_sum():
    N = 1 << 8
    path = synth.synthesize(_single(0, 0, 2), N=N)
    x = np.arange(0, N, 37) / N
    assert np.abs(path.values[::37] - periodized(0, 0, x, terms=400)).max() <= 1e-6


def test_level_wavelet_matches_direct_sum():
    N = 1 << 9
    vals = synth.wavelet_on_grid(3, 5, N)
    x = np.arange(0, N, 61) / N
    assert np.abs(vals[::61] - periodized(3, 5, x)).max() <= 1e-6


def test_zero_field():
    z = synth.CoefficientField.from_arrays([np.zeros(1 << j) for j in range(6)])
    p = synth.synthesize(z)
    assert not p.values.any()
    back = synth.analyze(p)
    assert all(not v.any() for v in back)


def test_single_wavelet_analyzes_to_indicator():
    J = 7
    c = synth.analyze(synth.synthesize(_single(5, 9, J)), J=J)
    for j, v in enumerate(c):
        target = np.zeros(1 << j)
        if j == 5:
            target[9] = 1.0
        assert np.abs(v - target).max() <= 1e-6


def test_round_trip_random_coefficients():
    rng = np.random.default_rng(4)
    c = synth.CoefficientField.from_arrays([rng.normal(size=1 << j) * 2.0 ** (-0.5 * j) for j in range(11)])
    back = synth.analyze(synth.synthesize(c), J=10)
    for a, b in zip(c, back):
        assert np.abs(a - b).max() <= 1e-6 * np.abs(a).max()


def test_mean_zero():
    t = tree.sample_tree(ProductBernoulli(0.7, 0.1), 10, 3)
    p = synth.synthesize(synth.coefficients(t, 0.8, 3.0))
    assert abs(p.values.mean()) <= 1e-8 * np.abs(p.values).max()


def test_grid_errors():
    c = _single(0, 0, 6)
    with pytest.raises(RangeError):
        synth.synthesize(c, N=1 << 8)
    with pytest.raises(ConfigurationError):
        synth.synthesize(c, N=1000)
    with pytest.raises(RangeError):
        synth.analyze(np.zeros(1 << 8), J=7)


def test_regularity_gate():
    t = tree.sample_tree(ProductBernoulli(0.7, 0.0), 4, 0)
    with pytest.raises(ConfigurationError):
        synth.synthesize(synth.coefficients(t, 0.5, math.inf), probe_ceiling=math.inf)


def test_tail_bound_decreases():
    assert synth.tail_bound(0.5, 10) > synth.tail_bound(0.5, 11) > 0


def test_fractional_integrate_examples():
    t = tree.sample_tree(ProductBernoulli(0.6, 0.3), 6, 1)
    c = synth.coefficients(t, 0.5, 2.0)
    same = synth.fractional_integrate(c, 0.0)
    assert all(np.array_equal(a, b) for a, b in zip(c, same))
    up = synth.fractional_integrate(c, 0.25)
    assert up.exponents == (0.75, 2.25)
    for j in range(7):
        big = t.bits(j) == 1
        assert np.allclose(up.values(j)[big], 2.0 ** (-0.75 * j), rtol=1e-15, atol=0)
        if j:
            assert np.allclose(up.values(j)[~big], 2.0 ** (-2.25 * j), rtol=1e-15, atol=0)
    with pytest.raises(DomainError):
        synth.fractional_integrate(c, -0.1)


def _chirp(h, beta, J, x0):
    """Coefficients of a chirp at ``x0``: level ``j`` carries ``2^{-hj/(beta+1)}`` at distance ``2^{-j/(beta+1)}``."""
    arrays = []
    for j in range(J + 1):
        a = np.zeros(1 << j)
        r = 2.0 ** (-j / (beta + 1))
        a[int(((x0 + r) % 1.0) * 2 ** j)] = 2.0 ** (-h * j / (beta + 1))
        arrays.append(a)
    return synth.CoefficientField.from_arrays(arrays)


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_chirp_leader_slope(beta):
    c = _chirp(0.6, beta, 20, 0.3)
    ts = [0.0, 0.25, 0.5, 0.75]
    ex = [analysis.leader_exponent(synth.fractional_integrate(c, t), 0.3, 2, 20) for t in ts]
    assert ex[0] == pytest.approx(0.6, abs=0.1)
    assert abs(np.polyfit(ts, ex, 1)[0] - (beta + 1)) <= 0.1


def test_raw_and_csv_round_trip(tmp_path):
    t = tree.sample_tree(ProductBernoulli(0.7, 0.2), 6, 8)
    p = synth.synthesize(synth.coefficients(t, 0.7, math.inf), probe_ceiling=5.6)
    f = tmp_path / "p.f64"
    p.save_raw(f)
    assert f.read_bytes() == p.values.astype("<f8").tobytes()
    side = json.loads((tmp_path / "p.f64.json").read_text())
    assert side["N"] == p.N and side["h_high"] == "inf" and side["wavelet"] == "meyer"
    back = synth.SamplePath.load_raw(f)
    assert np.array_equal(back.values, p.values) and back.h_high == math.inf
    g = tmp_path / "p.csv"
    p.save_csv(g)
    rows = g.read_text().splitlines()
    assert rows[0] == "x,value" and len(rows) == p.N + 1
    vals = np.array([float(r.split(",")[1]) for r in rows[1:]])
    assert np.array_equal(vals, p.values)
