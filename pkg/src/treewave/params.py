"""Derived parameters of a kernel schedule.

For a schedule these functions compute

* ``gamma_j`` -- the expected number of state-1 sons of a state-1 vertex;
* ``eta_j`` -- the probability that a state-0 vertex has a state-1 son;
* ``j_under`` -- the level from which every ``gamma_j`` is positive;
* ``theta`` -- the liminf of the Cesaro averages of ``log2 gamma_j``;
* ``varsigma_j`` -- the weighted tail sum of both-sons-1 probabilities;
* ``h_tilde`` -- the critical exponent of ``sum_j 2^{(1 - h_low/h) j} eta_j``;
* ``Phi_j(z)`` -- the generating function of ``#S_j``.

Closed forms are used whenever the schedule exposes exact tail information.
Otherwise the finite-depth estimates below are returned with ``exact=False``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DefinitionError
from .kernels import KernelSchedule

INDETERMINATE_SLOPE = 0.05


def gamma(schedule: KernelSchedule, j: int) -> float:
    nu = schedule.kernel_at(j, 1)
    return 2.0 * nu.p11 + nu.p10 + nu.p01


def eta(schedule: KernelSchedule, j: int) -> float:
    return 1.0 - schedule.kernel_at(j, 0).p00


def gamma_seq(schedule, J):
    return np.array([gamma(schedule, j) for j in range(J + 1)])


def eta_seq(schedule, J):
    return np.array([eta(schedule, j) for j in range(J + 1)])


# ----------------------------------------------------------------------------
# j_under and theta


@dataclass(frozen=True)
class JUnder:
    value: float  # an integer level, or math.inf
    exact: bool


def j_under(schedule: KernelSchedule, J: int) -> JUnder:
    """Least ``j0`` with ``gamma_j > 0`` for every ``j >= j0``.

    Exact when ``nu_{1,j}`` is known to be stationary from a level ``<= J``;
    otherwise the answer is read off levels ``0..J`` and flagged inexact.
    """
    s = schedule.nu1_stationary_from()
    if s is not None:
        if gamma(schedule, s) == 0:
            return JUnder(math.inf, True)
        last_zero = max((j for j in range(s) if gamma(schedule, j) == 0), default=-1)
        return JUnder(last_zero + 1, True)
    g = gamma_seq(schedule, J)
    zeros = np.flatnonzero(g == 0)
    last = int(zeros[-1]) if zeros.size else -1
    closed = schedule.theta_closed_form()
    if closed is not None and closed > -math.inf:
        # a finite closed-form theta forces gamma_j > 0 eventually
        if getattr(schedule, "gamma_product_log2_lower", None) is not None:
            return JUnder(last + 1, True)
    if last >= J // 2:
        # zeros persist into the upper half of the window: not stabilized
        return JUnder(math.inf, False)
    return JUnder(last + 1, False)


@dataclass(frozen=True)
class ThetaResult:
    value: float
    exact: bool
    j_under: float
    cesaro_estimate: float | None = None


def theta_cesaro(schedule: KernelSchedule, J: int, ju: int = 0) -> float:
    """Running minimum over ``j in [J/2, J]`` of ``sum_{l=ju}^{j} log2 gamma_l / j``."""
    g = gamma_seq(schedule, J)[ju:]
    with np.errstate(divide="ignore"):
        partial = np.cumsum(np.log2(g))
    levels = np.arange(ju, J + 1)
    lo = max(J // 2, ju, 1)
    mask = levels >= lo
    return float(np.min(partial[mask] / levels[mask]))


def theta(schedule: KernelSchedule, J: int) -> ThetaResult:
    if J < 1:
        raise ConfigurationError("theta needs J >= 1")
    ju = j_under(schedule, J)
    closed = schedule.theta_closed_form()
    if ju.value == math.inf:
        return ThetaResult(-math.inf, ju.exact, ju.value, None)
    if ju.value > J:
        # gamma still vanishes inside the window: nothing to average
        if closed is not None:
            return ThetaResult(float(closed), True, ju.value, None)
        raise DefinitionError(f"gamma_j vanishes at level {int(ju.value) - 1} >= J={J}; raise J")
    # gamma <= 2 bounds the liminf by 1; finite windows can overshoot by O(1/J)
    est = min(theta_cesaro(schedule, J, int(ju.value)), 1.0)
    if closed is not None:
        return ThetaResult(float(closed), True, ju.value, est)
    return ThetaResult(est, False, ju.value, est)


# ----------------------------------------------------------------------------
# varsigma


@dataclass(frozen=True)
class VarsigmaResult:
    value: float
    tail_bound: float
    exact: bool


def varsigma(schedule: KernelSchedule, j: int, tol: float = 1e-12,
             max_terms: int = 1 << 16) -> VarsigmaResult:
    """``2 sum_{n>=j} nu_{1,n}(11) / (gamma_n prod_{l=j}^{n} gamma_l)``.

    Once ``nu_{1,n}`` is stationary the remaining terms form a geometric
    series with ratio ``1/gamma``, summed in closed form (infinite when
    ``gamma <= 1`` and the numerator is positive). For other schedules the
    terms are summed until a geometric tail estimate built from the recent
    growth of the products falls below ``tol``; the result is then flagged
    inexact, and reported infinite once the partial sum exceeds ``1/tol``.
    """
    if tol <= 0:
        raise ConfigurationError("tol must be positive")
    s = schedule.nu1_stationary_from()
    stop = None if s is None else max(s, j)
    lower = None
    if stop is None and getattr(schedule, "gamma_product_log2_lower", None) is not None:
        lower = schedule.gamma_product_log2_lower(j)
    total = 0.0
    log_prod = 0.0  # log2 prod_{l=j}^{n} gamma_l
    logs = []
    n = j
    while True:
        nu = schedule.kernel_at(n, 1)
        g = 2.0 * nu.p11 + nu.p10 + nu.p01
        if g == 0:
            raise DefinitionError(f"gamma_{n} = 0 with n >= {j}: varsigma undefined below j_under")
        log_prod += math.log2(g)
        term = 0.0 if nu.p11 == 0 else 2.0 * nu.p11 / g * 2.0 ** (-log_prod)
        if stop is not None and n == stop:
            if term == 0.0:
                return VarsigmaResult(total, 0.0, True)
            if g <= 1.0:
                return VarsigmaResult(math.inf, 0.0, True)
            return VarsigmaResult(total + term / (1.0 - 1.0 / g), 0.0, True)
        total += term
        logs.append(math.log2(g))
        n += 1
        if stop is not None:
            continue
        if lower is not None:
            # numerators 2 nu(11)/gamma never exceed 1, so the tail is dominated
            # by sum_{m>=n} 2^{-(rate (m+1) - A)}
            A, rate = lower
            lb = A - rate * (n + 1) - math.log2(1.0 - 2.0 ** (-rate))
            bound = 2.0 ** lb if lb < 1000 else math.inf
            if bound < tol:
                return VarsigmaResult(total, bound, True)
            if len(logs) >= max_terms:
                return VarsigmaResult(total, bound, False)
            continue
        if total > 1.0 / tol:
            return VarsigmaResult(math.inf, math.inf, False)
        window = logs[-64:]
        if len(logs) >= 32:
            rate = sum(window) / len(window)
            if rate > 0:
                # next term is at most about term * 2^{-rate}, then geometric
                r = 2.0 ** (-rate)
                bound = term * r / (1.0 - r) if term > 0 else 0.0
                if bound < tol and all(v >= 0 for v in window[-8:]):
                    return VarsigmaResult(total, bound, False)
            elif len(logs) > 4096 and term > 0:
                return VarsigmaResult(math.inf, math.inf, False)
        if len(logs) >= max_terms:
            return VarsigmaResult(total, math.inf, False)


# ----------------------------------------------------------------------------
# h_tilde and the divergence of sum 2^j eta_j


@dataclass(frozen=True)
class HTilde:
    lo: float
    hi: float
    exact: bool
    lower_bound: float | None = None
    method: str = "closed-form"

    @property
    def value(self):
        return self.lo if self.lo == self.hi else None


def _eta_log_slope(schedule, J):
    """Least-squares slope of ``log2 eta_j`` over the positive levels in [J/2, J]."""
    levels = np.arange(J // 2, J + 1)
    vals = eta_seq(schedule, J)[J // 2:]
    keep = vals > 0
    if keep.sum() < 2:
        return None
    return float(np.polyfit(levels[keep], np.log2(vals[keep]), 1)[0])


def h_tilde(schedule: KernelSchedule, h_low: float, J: int = 64) -> HTilde:
    if h_low <= 0:
        raise ConfigurationError("h_low must be positive")
    closed = schedule.h_tilde_closed_form(h_low)
    if closed is not None:
        lb = None
        if getattr(schedule, "family", "") == "remark4":
            lb = h_low / schedule.c
        return HTilde(closed, closed, True, lb)
    slope = _eta_log_slope(schedule, J)
    if slope is None:
        return HTilde(math.inf, math.inf, False, method="no-positive-eta")
    # terms 2^{(1 - h_low/h) j} eta_j grow at rate 1 - h_low/h + slope per level;
    # convergence is declared below -0.05 and divergence above +0.05
    def solve(level):
        d = 1.0 + slope - level
        return h_low / d if d > 0 else math.inf
    lo = max(h_low, solve(-INDETERMINATE_SLOPE))
    hi = max(lo, solve(INDETERMINATE_SLOPE))
    return HTilde(lo, hi, False, method="log-slope")


@dataclass(frozen=True)
class EtaSum:
    diverges: bool | None
    exact: bool
    partial: float


def eta_sum_diverges(schedule: KernelSchedule, J: int = 64) -> EtaSum:
    """Whether ``sum_j 2^j eta_j`` diverges."""
    partial = float(np.sum(2.0 ** np.arange(J + 1) * eta_seq(schedule, J)))
    verdict = schedule.eta_sum_diverges()
    if verdict is not None:
        return EtaSum(verdict, True, partial)
    slope = _eta_log_slope(schedule, J)
    if slope is None:
        return EtaSum(False, False, partial)
    rate = 1.0 + slope
    if rate > INDETERMINATE_SLOPE:
        return EtaSum(True, False, partial)
    if rate < -INDETERMINATE_SLOPE:
        return EtaSum(False, False, partial)
    return EtaSum(None, False, partial)


# ----------------------------------------------------------------------------
# generating function of #S_j


def phi_gf(schedule: KernelSchedule, j: int, z: float) -> float:
    """``E[z^{#S_j}]`` by the descending subtree recursion.

    ``f(x)`` is the generating function of the number of state-1 level-``j``
    descendants of a vertex in state ``x``; sibling subtrees are
    conditionally independent given their father, so one level up
    ``f(x) = sum_{a,b} nu_{x,m}(a,b) f(a) f(b)``.
    """
    if not 0.0 <= z <= 1.0:
        raise ConfigurationError(f"z={z!r} outside [0,1]")
    if j < 0:
        raise ConfigurationError("level must be nonnegative")
    if z == 1.0:
        return 1.0  # E[1^N] = 1 exactly; the recursion would only add rounding
    f0, f1 = 1.0, float(z)
    for m in range(j - 1, -1, -1):
        n0 = schedule.kernel_at(m, 0)
        n1 = schedule.kernel_at(m, 1)
        pair = (f0 * f0, f0 * f1, f1 * f0, f1 * f1)
        f0, f1 = (math.fsum(p * v for p, v in zip(n0.as_tuple(), pair)),
                  math.fsum(p * v for p, v in zip(n1.as_tuple(), pair)))
    pi = schedule.initial_law
    if pi == 1.0:
        return f1
    if pi == 0.0:
        return f0
    return pi * f1 + (1.0 - pi) * f0


def phi0(schedule: KernelSchedule, j: int) -> float:
    """``P(S_j is empty)``."""
    return phi_gf(schedule, j, 0.0)


def phi0_seq(schedule: KernelSchedule, J: int) -> np.ndarray:
    return np.array([phi0(schedule, j) for j in range(J + 1)])


# ----------------------------------------------------------------------------
# bundle and regime classification


@dataclass(frozen=True)
class Nu1ZeroPattern:
    """Whether ``nu_{1,j}(00)`` vanishes from some level on."""

    zero_from: int | None
    positive_io: bool | None
    exact: bool


def nu1_00_pattern(schedule: KernelSchedule, J: int) -> Nu1ZeroPattern:
    zf = schedule.nu1_00_zero_from()
    io = schedule.nu1_00_positive_io()
    if zf is not None:
        return Nu1ZeroPattern(zf, False, True)
    if io is not None:
        return Nu1ZeroPattern(None, io, True)
    vals = [schedule.kernel_at(j, 1).p00 for j in range(J + 1)]
    pos = [j for j, v in enumerate(vals) if v > 0]
    if not pos:
        return Nu1ZeroPattern(0, False, False)
    if pos[-1] < J // 2:
        return Nu1ZeroPattern(pos[-1] + 1, False, False)
    return Nu1ZeroPattern(None, True, False)


@dataclass(frozen=True)
class DerivedParams:
    schedule: KernelSchedule
    J: int
    h_low: float
    h_high: float
    gamma: np.ndarray
    eta: np.ndarray
    j_under: JUnder
    theta: ThetaResult
    varsigma: dict
    h_tilde: HTilde
    phi0: np.ndarray
    eta_sum: EtaSum
    nu1_00: Nu1ZeroPattern
    notes: list = field(default_factory=list)

    def varsigma_at(self, j, tol=1e-12):
        if j not in self.varsigma:
            self.varsigma[j] = varsigma(self.schedule, j, tol)
        return self.varsigma[j]

    def to_dict(self):
        def num(x):
            return x if x is None or isinstance(x, bool) else float(x)
        return {
            "J": self.J,
            "h_low": num(self.h_low),
            "h_high": num(self.h_high),
            "gamma": [float(v) for v in self.gamma],
            "eta": [float(v) for v in self.eta],
            "j_under": {"value": num(self.j_under.value), "exact": self.j_under.exact},
            "theta": {"value": num(self.theta.value), "exact": self.theta.exact,
                      "cesaro_estimate": num(self.theta.cesaro_estimate)},
            "varsigma": {str(k): {"value": num(v.value), "tail_bound": num(v.tail_bound), "exact": v.exact}
                         for k, v in sorted(self.varsigma.items())},
            "h_tilde": {"lo": num(self.h_tilde.lo), "hi": num(self.h_tilde.hi), "exact": self.h_tilde.exact,
                        "lower_bound": num(self.h_tilde.lower_bound), "method": self.h_tilde.method},
            "phi0": [float(v) for v in self.phi0],
            "eta_sum": {"diverges": self.eta_sum.diverges, "exact": self.eta_sum.exact,
                        "partial": num(self.eta_sum.partial)},
            "nu1_00": {"zero_from": self.nu1_00.zero_from, "positive_io": self.nu1_00.positive_io,
                       "exact": self.nu1_00.exact},
            "notes": list(self.notes),
        }


def derive(schedule: KernelSchedule, h_low: float, h_high: float = math.inf, J: int = 64,
           tol: float = 1e-12) -> DerivedParams:
    """Compute every derived quantity to depth ``J``."""
    if not (0 < h_low < h_high):
        raise ConfigurationError(f"need 0 < h_low < h_high, got {h_low!r}, {h_high!r}")
    th = theta(schedule, J)
    ju = th.j_under
    vs = {}
    notes = []
    if ju != math.inf:
        for j in (int(ju), int(ju) + 1):
            try:
                vs[j] = varsigma(schedule, j, tol)
            except DefinitionError as exc:  # pragma: no cover - ju guarantees gamma > 0
                notes.append(str(exc))
    return DerivedParams(
        schedule=schedule, J=J, h_low=float(h_low), h_high=float(h_high),
        gamma=gamma_seq(schedule, J), eta=eta_seq(schedule, J),
        j_under=j_under(schedule, J), theta=th, varsigma=vs,
        h_tilde=h_tilde(schedule, h_low, J), phi0=phi0_seq(schedule, J),
        eta_sum=eta_sum_diverges(schedule, J), nu1_00=nu1_00_pattern(schedule, J),
        notes=notes,
    )


@dataclass(frozen=True)
class RegimeReport:
    theorem: str  # "thm1", "thm2", "out-of-scope" or "indeterminate"
    theta_below_one: bool
    theta_negative: bool
    eta_sum_diverges: bool | None
    h_tilde_below_h_high: bool | None
    ratio_below_theta: bool | None
    nu1_00_zero_from: int | None
    nu1_00_positive_io: bool | None
    exact: bool
    reasons: list = field(default_factory=list)

    def to_dict(self):
        return dict(self.__dict__)


def classify_regime(params: DerivedParams, J: int | None = None) -> RegimeReport:
    th = params.theta.value
    reasons = []
    below_one = th < 1
    if not below_one:
        reasons.append(f"theta = {th:.6g} is not below one: out of model scope")
    es = params.eta_sum.diverges
    ht = params.h_tilde
    h_hi = params.h_high
    if ht.hi < h_hi:
        ht_below = True
    elif ht.lo >= h_hi:
        ht_below = False
    else:
        ht_below = None
    ratio_below = None
    if th > -math.inf:
        r_hi = params.h_low / ht.lo
        r_lo = params.h_low / ht.hi if ht.hi < math.inf else 0.0
        if r_hi < th:
            ratio_below = True
        elif r_lo >= th:
            ratio_below = False
    else:
        ratio_below = False
    if not below_one:
        thm = "out-of-scope"
    elif es is None:
        thm = "indeterminate"
        reasons.append("convergence of sum 2^j eta_j undecided at this depth")
    else:
        thm = "thm2" if es else "thm1"
    exact = params.eta_sum.exact and params.theta.exact and ht.exact
    return RegimeReport(
        theorem=thm, theta_below_one=below_one, theta_negative=th < 0,
        eta_sum_diverges=es, h_tilde_below_h_high=ht_below, ratio_below_theta=ratio_below,
        nu1_00_zero_from=params.nu1_00.zero_from, nu1_00_positive_io=params.nu1_00.positive_io,
        exact=exact, reasons=reasons,
    )
