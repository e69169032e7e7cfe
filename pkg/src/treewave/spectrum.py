"""Predicted spectrum of singularities and the emptiness law of the 1-chain set.

``d(h)`` is the Hausdorff dimension of the set of points with Hölder
exponent ``h``. Away from ``[h_low, h_high]`` it is always ``-inf``; inside,
its shape depends on whether ``sum_j 2^j eta_j`` converges, on the sign of
``theta`` and on how ``h_tilde`` compares with ``h_high`` and
``h_low / h_tilde`` with ``theta``. Predictions are exact piecewise data, never
sampled arrays.

``Theta`` denotes the set of points reached by infinite all-1 chains of the
tree; ``d(h_low)`` takes its random value exactly according to whether
``Theta`` is empty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AmbiguityError, DefinitionError
from .params import DerivedParams, classify_regime, eta, phi0, phi_gf, varsigma
from .synth import CoefficientField

NEG_INF = -math.inf
PRODUCT_TAIL_TOL = 1e-10


# ----------------------------------------------------------------------------
# P(Theta is empty)


@dataclass(frozen=True)
class ThetaEmpty:
    """Law of the event ``Theta = empty``.

    ``status`` is one of ``"exact"`` (``value`` holds the probability up to
    ``tail_bound``), ``"one"``, ``"zero"``, ``"strictly-between"`` (in
    ``(0, 1)``), ``"positive"`` (in ``(0, 1]``), ``"less-than-one"`` (in
    ``[0, 1)``) or ``"indeterminate"``.
    """

    status: str
    value: float | None = None
    lo: float = 0.0
    hi: float = 1.0
    tail_bound: float = 0.0
    certificate: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "status": self.status, "value": self.value, "lo": self.lo, "hi": self.hi,
            "tail_bound": self.tail_bound, "certificate": dict(self.certificate), "notes": list(self.notes),
        }


def extinction_probability(nu) -> float:
    """Least fixed point in ``[0, 1]`` of the offspring generating function ``p00 + (p01 + p10) x + p11 x^2``."""
    a, b, c = nu.p11, nu.p01 + nu.p10 - 1.0, nu.p00
    if c == 0.0:
        return 0.0
    if a == 0.0:
        return min(1.0, -c / b) if b < 0 else 1.0
    disc = b * b - 4 * a * c
    if disc <= 0:
        return 1.0 if -b / (2 * a) >= 1.0 else -b / (2 * a)
    # stable form of the smaller root
    q = -0.5 * (b - math.sqrt(disc))
    r = min(c / q, q / a)
    return min(1.0, r)


def _log_product(schedule, start, eta_zero_from, max_level=1000):
    """``sum_{j >= start} 2^j log(1 - eta_j)`` with a bound on the neglected tail.

    Returns ``(value, tail_bound)``; ``value`` is ``-inf`` when some
    ``eta_j = 1``. The tail is bounded geometrically from the ratios of the
    last computed terms, so it is only certified for tails decaying at least
    geometrically.
    """
    stop = max_level if eta_zero_from is None else max(start, eta_zero_from)
    total = 0.0
    terms = []
    for j in range(start, stop):
        e = eta(schedule, j)
        if e >= 1.0:
            return NEG_INF, 0.0
        t = -math.ldexp(math.log1p(-e), j) if e > 0 else 0.0
        total += t
        terms.append(t)
        if eta_zero_from is None and len(terms) >= 16:
            last = terms[-8:]
            if last[-1] == 0.0 and all(v == 0.0 for v in last):
                # vanishing run without a zero certificate: keep scanning
                continue
            ratios = [b / a for a, b in zip(last, last[1:]) if a > 0]
            if len(ratios) == 7:
                r = max(ratios)
                if r < 1.0:
                    bound = last[-1] * r / (1.0 - r)
                    if bound < PRODUCT_TAIL_TOL:
                        return -total, bound
    if eta_zero_from is not None:
        return -total, 0.0
    return -total, math.inf


def _liminf_product_zero(params):
    th = params.theta
    if th.value < 0:
        return True if th.exact else None
    if th.value > 0:
        return False if th.exact else None
    s = params.schedule.nu1_stationary_from()
    if s is not None:
        nu = params.schedule.kernel_at(s, 1)
        if 2 * nu.p11 + nu.p10 + nu.p01 == 1.0:
            return False
    return None


def _eta_varsigma_sum(params):
    """Whether ``sum_j 2^j eta_j / varsigma_{j+1}`` is infinite: (verdict, evidence)."""
    sch = params.schedule
    s = sch.nu1_stationary_from()
    if s is not None:
        v = varsigma(sch, s)
        if v.value == math.inf:
            return False, {"varsigma_stationary": "inf"}
        # finite positive varsigma from level s on: the sum diverges with sum 2^j eta_j
        return True, {"varsigma_stationary": v.value}
    if getattr(sch, "eta_varsigma_tail", None) is not None:
        n_max = sch.n0 + 1
        while sch.j_n(n_max + 1) <= 4096:
            n_max += 1
        partial, last = 0.0, sch.n0
        for n in range(sch.n0 + 1, n_max + 1):
            jn = sch.j_n(n)
            try:
                v = varsigma(sch, jn).value
            except (DefinitionError, OverflowError):
                break  # gamma products leave the double range: the tail bound covers the rest
            partial += math.ldexp(eta(sch, jn - 1), jn - 1) / v
            last = n
        n_max = last
        tail = sch.eta_varsigma_tail(n_max)
        return False, {"partial": partial, "tail_bound": tail, "levels": f"j_n for n in ({sch.n0}, {n_max}]"}
    partial = 0.0
    for j in range(params.J):
        e = eta(sch, j)
        if e > 0:
            partial += math.ldexp(e, j) / varsigma(sch, j + 1).value
    return None, {"partial": partial, "depth": params.J}


def p_theta_empty(params: DerivedParams) -> ThetaEmpty:
    """``P(Theta = empty)``, or a certificate describing it."""
    sch = params.schedule
    jstar = params.nu1_00.zero_from
    es = params.eta_sum.diverges
    notes = []
    if jstar is not None:
        # no state-1 vertex can lose all its sons from j* on: Theta is empty
        # exactly when S_{j*} is empty and no fresh vertex appears afterwards
        phi = phi0(sch, jstar)
        if es:
            return ThetaEmpty("exact", 0.0, 0.0, 0.0, 0.0, {"j_star": jstar, "eta_sum": "inf"},
                              ["the product vanishes because sum 2^j eta_j diverges"])
        logp, tail = _log_product(sch, jstar, sch.eta_zero_from())
        if not params.nu1_00.exact:
            notes.append("j_star read off finite depth")
        cert = {"j_star": jstar, "phi0_j_star": phi}
        if tail < PRODUCT_TAIL_TOL:
            val = phi * math.exp(logp)
            lo = phi * math.exp(logp - tail)
            status = "exact" if params.nu1_00.exact else "indeterminate"
            return ThetaEmpty(status, val, lo, val, tail, cert, notes)
        notes.append("product tail not certified below 1e-10")
        return ThetaEmpty("indeterminate", None, 0.0, phi * math.exp(logp), tail, cert, notes)

    zf, sf = sch.eta_zero_from(), sch.nu1_stationary_from()
    if zf is not None and sf is not None:
        # from level m on no fresh vertex appears and the state-1 vertices
        # reproduce as a Galton-Watson process: each level-m vertex in state 1
        # dies out independently with the extinction probability x
        m = max(zf, sf)
        x = extinction_probability(sch.kernel_at(m, 1))
        val = phi_gf(sch, m, x)
        return ThetaEmpty("exact", val, val, val, 0.0, {"level": m, "extinction": x})
    th = params.theta
    if es is False:
        ju = params.j_under.value
        c1 = None
        if ju != math.inf:
            v = params.varsigma.get(int(ju))
            c1 = None if v is None else (v.value == math.inf if v.exact else None)
        c2 = _liminf_product_zero(params)
        c3 = None
        if ju != math.inf:
            zf = sch.eta_zero_from()
            c3 = bool(zf is not None and zf <= ju and phi0(sch, int(ju)) == 1.0)
        else:
            c2 = True
        cert = {"varsigma_infinite": c1, "liminf_product_zero": c2, "phi0_one_and_eta_zero": c3}
        if any(c is True for c in (c1, c2, c3)):
            return ThetaEmpty("one", 1.0, 1.0, 1.0, 0.0, cert, notes)
        if params.nu1_00.positive_io is True and all(c is False for c in (c1, c2, c3)):
            return ThetaEmpty("strictly-between", None, 0.0, 1.0, 0.0, cert, notes)
        return ThetaEmpty("positive", None, 0.0, 1.0, 0.0, cert, ["equality to one undecided at this depth"])

    if es is None:
        return ThetaEmpty("indeterminate", notes=["convergence of sum 2^j eta_j undecided"])

    # sum 2^j eta_j diverges
    if th.value < 0 and th.exact:
        return ThetaEmpty("one", 1.0, 1.0, 1.0, 0.0, {"theta_negative": True},
                          ["a nonempty Theta would have dimension theta < 0"])
    if th.value <= 0:
        return ThetaEmpty("indeterminate", certificate={"theta": th.value},
                          notes=["theta is not certified positive"])
    verdict, evidence = _eta_varsigma_sum(params)
    cert = {"eta_varsigma_sum_infinite": verdict, **evidence}
    if verdict is True:
        return ThetaEmpty("zero", 0.0, 0.0, 0.0, 0.0, cert, notes)
    if verdict is False:
        return ThetaEmpty("strictly-between", None, 0.0, 1.0, 0.0, cert, notes)
    return ThetaEmpty("less-than-one", None, 0.0, 1.0, 0.0, cert, ["divergence undecided at this depth"])


# ----------------------------------------------------------------------------
# spectrum prediction


@dataclass(frozen=True)
class LinearPiece:
    """``d(h) = h / h_tilde`` on an interval with the given closedness."""

    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool
    h_tilde: float

    def contains(self, h):
        left = h >= self.lo if self.lo_closed else h > self.lo
        right = h <= self.hi if self.hi_closed else h < self.hi
        return left and right

    def value(self, h):
        return 0.0 if math.isinf(self.h_tilde) else h / self.h_tilde


@dataclass(frozen=True)
class SpectrumPrediction:
    regime: str  # "thm1", "thm2" or "out-of-scope"
    branch: str
    h_low: float
    h_high: float
    h_tilde: tuple
    theta: float
    atoms: dict = field(default_factory=dict)
    linear: LinearPiece | None = None
    random_at: dict = field(default_factory=dict)  # h -> (alternative values)
    random_spectrum: bool | None = False
    p_dim_neg_inf: float | None = 0.0
    theta_empty: ThetaEmpty | None = None
    notes: list = field(default_factory=list)

    def d(self, h: float):
        """Predicted dimension at ``h``; a tuple of alternatives where it is random."""
        if h < self.h_low or h > self.h_high:
            return NEG_INF
        if h in self.random_at:
            vals = self.random_at[h]
            return vals[0] if len(set(vals)) == 1 else vals
        if h in self.atoms:
            return self.atoms[h]
        if self.linear is not None and self.linear.contains(h):
            return self.linear.value(h)
        return NEG_INF

    def support(self):
        pts = set(self.atoms) | set(self.random_at)
        if self.linear is not None:
            return sorted(pts), (self.linear.lo, self.linear.hi)
        return sorted(pts), None

    def to_dict(self):
        def num(x):
            if isinstance(x, float) and math.isinf(x):
                return "inf" if x > 0 else "-inf"
            return x

        return {
            "regime": self.regime,
            "branch": self.branch,
            "h_low": num(self.h_low),
            "h_high": num(self.h_high),
            "h_tilde": [num(v) for v in self.h_tilde],
            "theta": num(self.theta),
            "atoms": [{"h": num(h), "d": num(v)} for h, v in sorted(self.atoms.items())],
            "linear": None if self.linear is None else {
                "lo": num(self.linear.lo), "hi": num(self.linear.hi),
                "lo_closed": self.linear.lo_closed, "hi_closed": self.linear.hi_closed,
                "d": "h / h_tilde", "h_tilde": num(self.linear.h_tilde)},
            "random_at": [{"h": num(h), "alternatives": [num(v) for v in vals]}
                          for h, vals in self.random_at.items()],
            "random_spectrum": self.random_spectrum,
            "p_dim_neg_inf": self.p_dim_neg_inf,
            "theta_empty": None if self.theta_empty is None else self.theta_empty.to_dict(),
            "notes": list(self.notes),
        }


def _theta_bracket(params):
    th = params.theta
    if th.exact or th.cesaro_estimate is None:
        return th.value, th.value
    return min(th.value, th.cesaro_estimate), max(th.value, th.cesaro_estimate)


def _randomness(te: ThetaEmpty):
    """Whether an event of probability ``P(Theta = empty)`` is nontrivial."""
    if te.status in ("one", "zero"):
        return False
    if te.status == "exact":
        return 0.0 < te.value < 1.0
    if te.status == "strictly-between":
        return True
    return None


def predict_spectrum(params: DerivedParams) -> SpectrumPrediction:
    reg = classify_regime(params)
    hl, hh = params.h_low, params.h_high
    ht = (params.h_tilde.lo, params.h_tilde.hi)
    th = params.theta.value
    t_lo, t_hi = _theta_bracket(params)
    base = dict(h_low=hl, h_high=hh, h_tilde=ht, theta=th)
    if reg.theorem == "out-of-scope":
        return SpectrumPrediction("out-of-scope", "none", random_spectrum=None, p_dim_neg_inf=None,
                                  notes=list(reg.reasons), **base)
    if reg.theorem == "indeterminate":
        raise AmbiguityError("sum 2^j eta_j convergence", "cannot tell which theorem applies at this depth")

    if reg.theorem == "thm1":
        if t_hi < 0:
            return SpectrumPrediction("thm1", "thm1.theta<0", atoms={hh: 1.0}, random_spectrum=False,
                                      p_dim_neg_inf=1.0, **base)
        if t_lo < 0:
            raise AmbiguityError("theta = 0")
        te = p_theta_empty(params)
        rnd = _randomness(te)
        atoms = {hh: 1.0}
        random_at = {}
        if te.status in ("one",) or (te.status == "exact" and te.value == 1.0):
            p = 1.0
        elif te.status == "zero" or (te.status == "exact" and te.value == 0.0):
            p = 0.0
            atoms[hl] = th
        else:
            p = te.value
            random_at[hl] = (NEG_INF, th)
        if p == 1.0:
            random_at = {}
        return SpectrumPrediction("thm1", "thm1.theta>=0", atoms=atoms, random_at=random_at,
                                  random_spectrum=rnd, p_dim_neg_inf=p, theta_empty=te, **base)

    # thm2
    if ht[1] < hh:
        branch = "thm2.h_tilde<h_high"
        ht_v = ht[0] if ht[0] == ht[1] else None
        linear = LinearPiece(hl, ht[1], False, True, ht_v if ht_v is not None else ht[1])
        atoms = {}
        notes = [] if math.isinf(hh) else [
            "d(h_high) = -inf follows from the full-measure argument for exponents above h_tilde"]
    elif ht[0] >= hh:
        branch = "thm2.h_tilde>=h_high"
        linear = LinearPiece(hl, hh, False, False, ht[0] if ht[0] == ht[1] else ht[1])
        atoms = {hh: 1.0}
        notes = []
    else:
        raise AmbiguityError("h_tilde = h_high")
    if ht[0] != ht[1]:
        notes.append(f"h_tilde known only within [{ht[0]}, {ht[1]}]; slope uses the upper end")
    r_lo = hl / ht[1] if not math.isinf(ht[1]) else 0.0
    r_hi = hl / ht[0] if not math.isinf(ht[0]) else 0.0
    if r_lo >= t_hi:
        atoms[hl] = r_lo if r_lo == r_hi else r_hi
        sub = "ratio>=theta"
        te = None
        rnd = False
        random_at = {}
    elif r_hi < t_lo:
        sub = "ratio<theta"
        te = p_theta_empty(params)
        rnd = _randomness(te)
        if te.status == "zero" or (te.status == "exact" and te.value == 0.0):
            atoms[hl] = th
            random_at = {}
        elif te.status == "one" or (te.status == "exact" and te.value == 1.0):
            atoms[hl] = r_hi
            random_at = {}
        else:
            random_at = {hl: (r_hi, th)}
    else:
        raise AmbiguityError("h_low / h_tilde = theta")
    return SpectrumPrediction("thm2", f"{branch};{sub}", atoms=atoms, linear=linear, random_at=random_at,
                              random_spectrum=rnd, p_dim_neg_inf=0.0, theta_empty=te, notes=notes, **base)


# ----------------------------------------------------------------------------
# large deviation spectrum


@dataclass(frozen=True)
class LargeDeviation:
    h: np.ndarray
    eps: float
    values: np.ndarray
    levels: tuple

    def at(self, h):
        i = int(np.argmin(np.abs(self.h - h)))
        return float(self.values[i])


def large_deviation_spectrum(coeffs: CoefficientField, h_grid=None, eps: float = 0.05,
                             j_min: int | None = None, J: int | None = None) -> LargeDeviation:
    """Finite-depth proxy of the coefficient large deviation spectrum.

    For each ``h`` the value is the largest, over levels ``j`` of the upper
    half window, of ``(1/j) log2 #{k : 2^{-(h+eps)j} <= |c_{j,k}| <= 2^{-(h-eps)j}}``,
    and ``-inf`` when every count vanishes.
    """
    J = coeffs.J if J is None else J
    j_min = max(1, math.ceil(J / 2)) if j_min is None else j_min
    hl, hh = coeffs.exponents
    if h_grid is None:
        top = hh if math.isfinite(hh) else 2 * hl
        h_grid = np.linspace(0.0, top + hl, 201)
    h_grid = np.asarray(h_grid, dtype=float)
    best = np.full(h_grid.shape, NEG_INF)
    for j in range(j_min, J + 1):
        v = np.abs(coeffs.values(j))
        nz = v[v > 0]
        # exponents -log2|c| / j; exactly h_low or h_high up to rounding
        ex, counts = np.unique(np.round(-np.log2(nz) / j, 12), return_counts=True)
        for e, c in zip(ex, counts):
            hit = np.abs(h_grid - e) <= eps
            best = np.where(hit, np.maximum(best, math.log2(c) / j), best)
    return LargeDeviation(h_grid, eps, best, (j_min, J))
