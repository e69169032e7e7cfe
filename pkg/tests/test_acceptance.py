"""Acceptance suite: one test per criterion, tolerances as stated in the criteria.

Each test records its wall time and asserts the runtime budget alongside the
numerical target.
"""

import math
import time

import numpy as np
import pytest

from treewave import analysis, mc, params, spectrum, synth, tree
from treewave.kernels import ConstantKernels, Geometric, PairDistribution, ProductBernoulli

from invariants import CHECKS, random_case, random_schedule
from oracles import brute_phi0, cesaro_theta, gw_fixed_point, truncated_sum

H_LOW = 1.0


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f}s, budget {self.seconds}s"


# ----------------------------------------------------------------------------
# 1. exact recursion against exhaustive enumeration


def test_1_phi0_matches_enumeration():
    rng = np.random.default_rng(101)
    with Budget(1.0):
        for _ in range(5):
            sch = random_schedule(rng)
            for j in range(4):
                assert abs(params.phi0(sch, j) - brute_phi0(sch, j)) <= 1e-12, (sch, j)


# ----------------------------------------------------------------------------
# 2. closed-form parameters against truncated sums and Cesaro means


def test_2_closed_forms():
    J = 64
    with Budget(1.0):
        for p, q in ((0.7, 0.0), (0.6, 0.3), (0.9, 0.05)):
            sch = ProductBernoulli(p, q)
            assert params.gamma(sch, 5) == pytest.approx(2 * p, abs=1e-15)
            assert params.eta(sch, 5) == pytest.approx(2 * q - q * q, abs=1e-15)
            th = params.theta(sch, J)
            ces = cesaro_theta([2 * p] * (J + 1))[-1]
            assert th.value == pytest.approx(math.log2(2 * p), abs=1e-15)
            assert abs(th.value - ces) <= 1.0 / J
            vs = params.varsigma(sch, 0)
            direct = truncated_sum(lambda n: 2 * p * p * (2 * p) ** -(n + 2), 0, 2000)
            assert vs.value == pytest.approx(p / (2 * p - 1), abs=1e-10)
            assert abs(vs.value - direct) <= 1e-10
        for c in (0.25, 0.5, 0.75):
            ht = params.h_tilde(ProductBernoulli(0.7, Geometric(0.5, c)), H_LOW)
            assert ht.exact and ht.lo == pytest.approx(H_LOW / (1 - c), abs=1e-12)


# ----------------------------------------------------------------------------
# 3. synthesis round trip


def test_3_round_trip():
    rng = np.random.default_rng(303)
    J, N = 12, 1 << 16
    with Budget(30.0):
        for i in range(20):
            sch = random_schedule(rng)
            h_low = float(rng.uniform(0.3, 1.0))
            h_high = h_low + float(rng.uniform(0.2, 1.0))
            c = synth.coefficients(tree.sample_tree(sch, J, 1000 + i), h_low, h_high)
            back = synth.analyze(synth.synthesize(c, N=N), J=J)
            for j in range(J + 1):
                ref = c.values(j)
                assert np.all(np.abs(back.values(j) - ref) <= 1e-6 * np.abs(ref)), (i, j)


# ----------------------------------------------------------------------------
# 4. dimension of the all-1 chain set


@pytest.mark.slow
def test_4_theta_dimension():
    p, J = 0.7, 22
    with Budget(300.0):
        td = mc.mc_theta_dimension(ProductBernoulli(p, 0.0), J, trials=100, seed=4)
    assert td.slopes.size >= 50
    assert abs(td.mean_slope - math.log2(2 * p)) <= 0.1
    assert td.survival.covers(1.0 - gw_fixed_point(p))


# ----------------------------------------------------------------------------
# 5. P(Theta empty) without (0,0) mass under state 1


@pytest.mark.parametrize("nu1, pi", [
    (PairDistribution(0.0, 0.3, 0.3, 0.4), 0.6),
    (PairDistribution.product(1.0), 0.25),
])
def test_5_chain_extinction_formula(nu1, pi):
    sch = ConstantKernels(PairDistribution.point(0, 0), nu1, pi)
    with Budget(60.0):
        te = spectrum.p_theta_empty(params.derive(sch, H_LOW, 4.0, J=64))
        assert te.status == "exact" and te.value == 1.0 - pi
        r = mc.mc_probability(sch, 16, "theta-absent", trials=10_000, seed=5, min_run=16)
    assert r.covers(1.0 - pi)


# ----------------------------------------------------------------------------
# 6, 7, 9. the h_tilde = 2 h_low run

HALF_RATE = ProductBernoulli(0.3, Geometric(0.02, 0.5))
ENS_H_HIGH = 6.0
ENS_J, ENS_N, ENS_SEEDS = 20, 1 << 16, 40


@pytest.fixture(scope="module")
def ensemble():
    t0 = time.perf_counter()
    coeffs = [synth.coefficients(tree.sample_tree(HALF_RATE, ENS_J, s), H_LOW, ENS_H_HIGH) for s in range(ENS_SEEDS)]
    fields = [analysis.holder_field(c, N=ENS_N) for c in coeffs]
    return coeffs, fields, time.perf_counter() - t0


def test_6_parameters_of_the_run():
    d = params.derive(HALF_RATE, H_LOW, ENS_H_HIGH, J=64)
    assert d.h_tilde.exact and d.h_tilde.lo == pytest.approx(2 * H_LOW)
    assert spectrum.predict_spectrum(d).regime == "thm2"


@pytest.mark.slow
def test_6a_median_exponent(ensemble):
    _, fields, build = ensemble
    with Budget(600.0 - build):
        target = min(2 * H_LOW, ENS_H_HIGH)
        med = float(np.median(np.concatenate([f.h for f in fields])))
    assert abs(med - target) <= 0.15 * H_LOW


@pytest.mark.slow
def test_6b_iso_set_dimension(ensemble):
    _, fields, build = ensemble
    h, eps = 1.5 * H_LOW, 0.1
    with Budget(600.0 - build):
        counts = analysis.pooled_counts([analysis.iso_holder_sets(f, h, eps).counts_E for f in fields])
        bd = analysis.box_dimension(counts)
    assert abs(bd.slope - h / (2 * H_LOW)) <= 0.15


@pytest.mark.slow
def test_6c_large_deviation_support(ensemble):
    coeffs, _, build = ensemble
    grid = np.linspace(H_LOW + 0.1, ENS_H_HIGH - 0.1, 49)
    with Budget(600.0 - build):
        for c in coeffs:
            ld = spectrum.large_deviation_spectrum(c, h_grid=grid, eps=0.05)
            assert np.all(ld.values == -math.inf)
            ends = spectrum.large_deviation_spectrum(c, h_grid=[H_LOW, ENS_H_HIGH], eps=0.05)
            assert np.all(np.isfinite(ends.values))


@pytest.mark.slow
def test_7_oscillation_exponents(ensemble):
    coeffs, fields, _ = ensemble
    rng = np.random.default_rng(707)
    with Budget(300.0):
        c, f = coeffs[0], fields[0]
        inside = np.flatnonzero((f.h > H_LOW + 0.1) & (f.h < ENS_H_HIGH - 0.1))
        pick = rng.choice(inside, 200, replace=False)
        beta = analysis.estimate_beta(c, f.x[pick])
    hits = np.abs(beta - (f.h[pick] / H_LOW - 1.0)) <= 0.15
    assert hits.mean() >= 0.9


@pytest.mark.slow
def test_9_locality(ensemble):
    _, fields, _ = ensemble
    rep = analysis.locality_check(fields, 1.5 * H_LOW, 0.1, n_subintervals=4)
    assert all(np.isfinite(rep.slopes))
    assert rep.spread <= 0.2


# ----------------------------------------------------------------------------
# 8. nested-interval construction on an h_tilde = infinity schedule


@pytest.mark.slow
def test_8_construct_point():
    # q_j = 2^{1-j} / (j + 1): sum 2^j eta_j diverges like the harmonic series while h_tilde is infinite
    sch = ProductBernoulli(0.3, Geometric(2.0, 1.0, 1.0))
    J, h = 22, 2 * H_LOW
    d = params.derive(sch, H_LOW, 6.0, J=64)
    assert math.isinf(d.h_tilde.lo)
    reached, close = 0, 0
    with Budget(600.0):
        for seed in range(50):
            t = tree.sample_tree(sch, J, seed)
            pc = analysis.construct_point(t, d, h, J=J)
            if pc.y is None or pc.depth < J - 4:
                continue
            reached += 1
            est = analysis.estimate_holder(synth.coefficients(t, H_LOW, 6.0), pc.y, j_min=pc.j0)
            close += abs(est - h) <= 0.2 * H_LOW
    assert reached >= 0.8 * 50
    assert close >= 0.8 * reached


# ----------------------------------------------------------------------------
# 10. invariant suite on random configurations


@pytest.mark.slow
def test_10_invariant_suite():
    rng = np.random.default_rng(20261016)
    failures = []
    with Budget(300.0):
        for _ in range(100):
            case = random_case(rng, max_J=12)
            for check in CHECKS:
                try:
                    check(case)
                except AssertionError as exc:
                    failures.append(f"{check.__name__}: {case!r}: {exc}")
    assert not failures, "\n".join(failures[:10])
