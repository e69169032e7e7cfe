"""Level-indexed transition kernels of the {0,1}-valued tree Markov chain.

A vertex ``u`` at generation ``j`` in state ``x`` draws the states of its two
sons ``(X_u0, X_u1)`` from a probability measure ``nu_{x,j}`` on {0,1}^2.
A :class:`KernelSchedule` resolves these measures for every level and also
carries the law of the root state.

Four families are provided:

* :class:`ConstantKernels` -- the same pair of measures at every level;
* :class:`ExplicitTable` -- a finite table of rows, the last row of each
  parent state repeating forever;
* :class:`ProductBernoulli` -- both sons independent, success probability
  ``p_j`` below a state-1 parent and ``q_j`` below a state-0 parent;
* :class:`Remark4Kernels` -- the two-parameter family whose spectrum of
  singularities is random.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ConfigurationError

SUM_TOL = 1e-12


@dataclass(frozen=True)
class PairDistribution:
    """Probabilities of the son pairs (0,0), (0,1), (1,0), (1,1).

    The first index is the state of son ``u0``, the second that of ``u1``.
    Construction does not validate; use :meth:`problems` or
    :meth:`checked`.
    """

    p00: float
    p01: float
    p10: float
    p11: float

    @classmethod
    def checked(cls, p00, p01, p10, p11):
        pd = cls(float(p00), float(p01), float(p10), float(p11))
        issues = pd.problems()
        if issues:
            raise ConfigurationError("; ".join(issues))
        return pd

    @classmethod
    def product(cls, p0, p1=None):
        """Independent sons, P(son0 = 1) = p0 and P(son1 = 1) = p1."""
        p1 = p0 if p1 is None else p1
        return cls((1 - p0) * (1 - p1), (1 - p0) * p1, p0 * (1 - p1), p0 * p1)

    @classmethod
    def point(cls, a, b):
        vals = [0.0, 0.0, 0.0, 0.0]
        vals[2 * int(a) + int(b)] = 1.0
        return cls(*vals)

    def as_tuple(self):
        return (self.p00, self.p01, self.p10, self.p11)

    def problems(self):
        out = []
        for name, v in zip(("p00", "p01", "p10", "p11"), self.as_tuple()):
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                out.append(f"{name}={v!r} outside [0,1]")
        s = math.fsum(self.as_tuple())
        if abs(s - 1.0) > SUM_TOL:
            out.append(f"probabilities sum to {s!r}, not 1")
        return out

    @property
    def is_valid(self):
        return not self.problems()

    @property
    def is_degenerate(self):
        """True when every entry is exactly 0 or 1 (a point mass)."""
        return all(v in (0.0, 1.0) for v in self.as_tuple())

    def mass(self, *outcomes):
        """Total mass of the given outcomes, e.g. ``mass((1, 0), (0, 1))``."""
        t = self.as_tuple()
        return math.fsum(t[2 * a + b] for a, b in outcomes)

    def cdf(self):
        """Cumulative probabilities in (00, 01, 10, 11) order."""
        return np.cumsum(self.as_tuple())


# ----------------------------------------------------------------------------
# level sequences used by the product family


@dataclass(frozen=True)
class LevelSequence:
    """A sequence ``s_j`` in [0, 1] indexed by level ``j >= 0``.

    Subclasses advertise their tail behaviour so that closed forms can be
    used downstream: ``stationary_from`` is the level from which the
    sequence is constant (``None`` if not known to be), ``decay`` is the pair
    ``(c, k)`` with ``s_j`` comparable to ``2^{-cj} j^{-k}`` and ``zero_from``
    the level from which the sequence vanishes identically.
    """

    def __call__(self, j: int) -> float:
        raise NotImplementedError

    stationary_from = None
    decay = None
    zero_from = None

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Const(LevelSequence):
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ConfigurationError(f"sequence value {self.value!r} outside [0,1]")

    def __call__(self, j):
        return float(self.value)

    @property
    def stationary_from(self):
        return 0

    @property
    def decay(self):
        return (0.0, 0.0) if self.value > 0 else None

    @property
    def zero_from(self):
        return 0 if self.value == 0 else None

    def describe(self):
        return {"kind": "const", "value": self.value}


@dataclass(frozen=True)
class Geometric(LevelSequence):
    """``s_j = min(1, scale * 2^{-rate j} * (j + 1)^{-power})``."""

    scale: float
    rate: float
    power: float = 0.0

    def __post_init__(self):
        if self.scale < 0 or self.rate < 0:
            raise ConfigurationError("geometric sequence needs scale >= 0 and rate >= 0")

    def __call__(self, j):
        if self.scale == 0:
            return 0.0
        return float(min(1.0, self.scale * 2.0 ** (-self.rate * j) * (j + 1.0) ** (-self.power)))

    @property
    def stationary_from(self):
        return 0 if (self.rate == 0 and self.power == 0) or self.scale == 0 else None

    @property
    def decay(self):
        return None if self.scale == 0 else (float(self.rate), float(self.power))

    @property
    def zero_from(self):
        return 0 if self.scale == 0 else None

    def describe(self):
        return {"kind": "geometric", "scale": self.scale, "rate": self.rate, "power": self.power}


@dataclass(frozen=True)
class Table(LevelSequence):
    """Explicit values for the first levels, then a constant tail."""

    values: tuple
    tail: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values and self.tail is None:
            raise ConfigurationError("empty table sequence without a tail")
        for v in self.values + (() if self.tail is None else (self.tail,)):
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"sequence value {v!r} outside [0,1]")

    @property
    def _tail(self):
        return self.values[-1] if self.tail is None else float(self.tail)

    def __call__(self, j):
        return self.values[j] if j < len(self.values) else self._tail

    @property
    def stationary_from(self):
        return len(self.values)

    @property
    def decay(self):
        return (0.0, 0.0) if self._tail > 0 else None

    @property
    def zero_from(self):
        if self._tail != 0:
            return None
        n = len(self.values)
        while n > 0 and self.values[n - 1] == 0:
            n -= 1
        return n

    def describe(self):
        return {"kind": "table", "values": list(self.values), "tail": self.tail}


def as_sequence(spec) -> LevelSequence:
    """Coerce a float, list or dict description into a :class:`LevelSequence`."""
    if isinstance(spec, LevelSequence):
        return spec
    if isinstance(spec, (int, float)):
        return Const(float(spec))
    if isinstance(spec, (list, tuple)):
        return Table(tuple(spec))
    if isinstance(spec, Mapping):
        kind = spec.get("kind")
        if kind == "const":
            return Const(float(spec["value"]))
        if kind == "geometric":
            return Geometric(float(spec["scale"]), float(spec["rate"]), float(spec.get("power", 0.0)))
        if kind == "table":
            return Table(tuple(spec["values"]), spec.get("tail"))
    raise ConfigurationError(f"cannot interpret {spec!r} as a level sequence")


# ----------------------------------------------------------------------------
# schedules


class KernelSchedule:
    """Base class: resolves ``nu_{x,j}`` and the root law.

    Subclasses implement :meth:`_pair` and :meth:`describe`. The remaining
    hooks give downstream code exact tail information when a family has it;
    the defaults say "unknown".
    """

    family = "abstract"

    def __init__(self, initial_law: float = 1.0):
        initial_law = float(initial_law)
        if not 0.0 <= initial_law <= 1.0:
            raise ConfigurationError(f"initial_law={initial_law!r} outside [0,1]")
        self.initial_law = initial_law

    def _pair(self, j: int, state: int) -> PairDistribution:
        raise NotImplementedError

    def kernel_at(self, j: int, parent_state: int) -> PairDistribution:
        if j < 0 or int(j) != j:
            raise ConfigurationError(f"level must be a nonnegative integer, got {j!r}")
        if parent_state not in (0, 1):
            raise ConfigurationError(f"parent state must be 0 or 1, got {parent_state!r}")
        pd = self._pair(int(j), int(parent_state))
        issues = pd.problems()
        if issues:
            raise ConfigurationError(f"nu_{{{parent_state},{j}}}: " + "; ".join(issues))
        return pd

    # -- tail hints ---------------------------------------------------------

    def nu1_stationary_from(self):
        """Level from which ``nu_{1,j}`` is constant, or None."""
        return None

    def nu0_stationary_from(self):
        return None

    def eta_decay(self):
        """``(c, k)`` with eta_j comparable to 2^{-cj} j^{-k}, or None."""
        return None

    def eta_zero_from(self):
        """Level from which eta_j = 0 identically, or None."""
        return None

    def theta_closed_form(self):
        """``log2 gamma`` of the stationary state-1 kernel; finitely many early levels do not move the liminf."""
        s = self.nu1_stationary_from()
        if s is None:
            return None
        nu = self.kernel_at(s, 1)
        g = 2 * nu.p11 + nu.p10 + nu.p01
        return math.log2(g) if g > 0 else -math.inf

    def h_tilde_closed_form(self, h_low):
        return None

    def eta_sum_diverges(self):
        """Exact verdict on whether sum_j 2^j eta_j diverges, or None."""
        zf = self.eta_zero_from()
        if zf is not None:
            return False
        d = self.eta_decay()
        if d is None:
            return None
        c, k = d
        return c < 1 or (c == 1 and k <= 1)

    def nu1_00_zero_from(self):
        """Least j* with nu_{1,j}({(0,0)}) = 0 for all j >= j*, if known.

        Returns ``None`` when the mass is known to be positive infinitely
        often or when the family cannot tell (see :meth:`nu1_00_positive_io`).
        """
        s = self.nu1_stationary_from()
        if s is None:
            return None
        if self.kernel_at(s, 1).p00 != 0:
            return None
        j = s
        while j > 0 and self.kernel_at(j - 1, 1).p00 == 0:
            j -= 1
        return j

    def nu1_00_positive_io(self):
        """True/False if it is known whether nu_{1,j}(00) > 0 infinitely often."""
        s = self.nu1_stationary_from()
        if s is None:
            return None
        return self.kernel_at(s, 1).p00 > 0

    # -- identity -----------------------------------------------------------

    def describe(self) -> dict:
        raise NotImplementedError

    def fingerprint(self) -> bytes:
        """16-byte digest of the canonical description."""
        blob = json.dumps(self.describe(), sort_keys=True, separators=(",", ":"))
        return hashlib.blake2b(blob.encode(), digest_size=16).digest()

    def __repr__(self):
        return f"{type(self).__name__}({self.describe()!r})"


class ConstantKernels(KernelSchedule):
    family = "constant"

    def __init__(self, nu0: PairDistribution, nu1: PairDistribution, initial_law=1.0):
        super().__init__(initial_law)
        self.nu0 = PairDistribution.checked(*nu0.as_tuple())
        self.nu1 = PairDistribution.checked(*nu1.as_tuple())

    def _pair(self, j, state):
        return self.nu1 if state else self.nu0

    def nu1_stationary_from(self):
        return 0

    def nu0_stationary_from(self):
        return 0

    def _eta(self):
        return 1.0 - self.nu0.p00

    def eta_decay(self):
        return (0.0, 0.0) if self._eta() > 0 else None

    def eta_zero_from(self):
        return 0 if self._eta() == 0 else None

    def h_tilde_closed_form(self, h_low):
        return h_low if self._eta() > 0 else math.inf

    def describe(self):
        return {
            "family": self.family,
            "nu0": list(self.nu0.as_tuple()),
            "nu1": list(self.nu1.as_tuple()),
            "initial_law": self.initial_law,
        }


class ExplicitTable(KernelSchedule):
    """Per-level rows ``(j, state) -> PairDistribution``.

    Rows must be given for every level from 0 up to the last level listed
    for each state; beyond it the last row repeats. Rows are stored as given
    and checked on access, so :func:`validate_schedule` can report bad rows.
    """

    family = "table"

    def __init__(self, rows: Mapping, initial_law=1.0):
        super().__init__(initial_law)
        self.rows = {(int(j), int(s)): PairDistribution(*map(float, pd.as_tuple() if isinstance(pd, PairDistribution) else pd))
                     for (j, s), pd in rows.items()}
        self.last = {}
        for s in (0, 1):
            levels = sorted(j for (j, st) in self.rows if st == s)
            if not levels:
                raise ConfigurationError(f"table has no rows for parent state {s}")
            if levels != list(range(levels[-1] + 1)):
                missing = sorted(set(range(levels[-1] + 1)) - set(levels))
                raise ConfigurationError(f"table rows for state {s} missing at levels {missing}")
            self.last[s] = levels[-1]

    def _pair(self, j, state):
        return self.rows[(min(j, self.last[state]), state)]

    def nu1_stationary_from(self):
        return self.last[1]

    def nu0_stationary_from(self):
        return self.last[0]

    def eta_decay(self):
        return (0.0, 0.0) if self.rows[(self.last[0], 0)].p00 < 1 else None

    def eta_zero_from(self):
        if self.rows[(self.last[0], 0)].p00 < 1:
            return None
        j = self.last[0]
        while j > 0 and self.rows[(j - 1, 0)].p00 == 1:
            j -= 1
        return j

    def h_tilde_closed_form(self, h_low):
        return h_low if self.eta_zero_from() is None else math.inf

    def describe(self):
        return {
            "family": self.family,
            "rows": [[j, s, *pd.as_tuple()] for (j, s), pd in sorted(self.rows.items())],
            "initial_law": self.initial_law,
        }


class ProductBernoulli(KernelSchedule):
    """Independent sons: success ``p_j`` under state 1, ``q_j`` under state 0."""

    family = "product_bernoulli"

    def __init__(self, p, q, initial_law=1.0):
        super().__init__(initial_law)
        self.p = as_sequence(p)
        self.q = as_sequence(q)

    def _pair(self, j, state):
        return PairDistribution.product(self.p(j) if state else self.q(j))

    def nu1_stationary_from(self):
        return self.p.stationary_from

    def nu0_stationary_from(self):
        return self.q.stationary_from

    def eta_decay(self):
        # eta = 2q - q^2 has the tail of q when q -> 0, and is constant otherwise
        return self.q.decay

    def eta_zero_from(self):
        return self.q.zero_from

    def h_tilde_closed_form(self, h_low):
        if self.q.zero_from is not None:
            return math.inf
        d = self.q.decay
        if d is None:
            return None
        c, _ = d
        return h_low / (1 - c) if c < 1 else math.inf

    def describe(self):
        return {
            "family": self.family,
            "p": self.p.describe(),
            "q": self.q.describe(),
            "initial_law": self.initial_law,
        }


def ilog(n: int, b: int) -> int:
    """Largest m with b**m <= n (n >= 1), computed in integers."""
    m, t = 0, b
    while t <= n:
        m += 1
        t *= b
    return m


class Remark4Kernels(KernelSchedule):
    """Product kernels with sparse appearance levels ``j_n = b^{n+1} - 1``.

    Below a state-1 parent both sons are 1 with probability ``p_0 = 2^{-a}``
    and ``p_j = 2^{-a(b^{floor(log_b(j+1))} - b^{floor(log_b j)})}`` for
    ``j >= 1``. Below a state-0 parent the success probability ``q_{j-1}``
    vanishes except at ``j = j_n`` with ``n > n0``, where it is the geometric
    mean of the admissible bracket
    ``[2^{-(j_n-1)}, j_n^{-2} 2^{(a(1-1/b)-1) j_n}]``; ``n0`` is the least
    ``n`` for which the bracket is nonempty.
    """

    family = "remark4"

    def __init__(self, a: float, b: int, initial_law=1.0):
        super().__init__(initial_law)
        if not 0 < a < 1:
            raise ConfigurationError(f"remark4 needs a in (0,1), got {a!r}")
        if int(b) != b or b < 2:
            raise ConfigurationError(f"remark4 needs an integer b >= 2, got {b!r}")
        self.a = float(a)
        self.b = int(b)
        self.c = self.a * (1 - 1 / self.b)
        self.n0 = self._first_nonempty_bracket()

    def _bracket_log2(self, jn):
        return -(jn - 1), -2 * math.log2(jn) + (self.c - 1) * jn

    def _first_nonempty_bracket(self):
        n = 0
        while True:
            lo, hi = self._bracket_log2(self.b ** (n + 1) - 1)
            if lo <= hi:
                return n
            n += 1
            if n > 4096:  # pragma: no cover - c > 0 guarantees termination
                raise ConfigurationError("remark4 bracket never becomes nonempty")

    def j_n(self, n):
        return self.b ** (n + 1) - 1

    def exponent(self, j):
        if j == 0:
            return 1
        return self.b ** ilog(j + 1, self.b) - self.b ** ilog(j, self.b)

    def p_at(self, j):
        return 2.0 ** (-self.a * self.exponent(j))

    def q_log2_at(self, i):
        """log2 q_i, or -inf when q_i = 0."""
        jn = i + 1
        if jn < 1:
            return -math.inf
        n = ilog(jn + 1, self.b) - 1
        if n <= self.n0 or self.j_n(n) != jn:
            return -math.inf
        lo, hi = self._bracket_log2(jn)
        return 0.5 * (lo + hi)

    def q_at(self, i):
        return 2.0 ** self.q_log2_at(i)

    def bracket(self, n):
        """(lower, chosen, upper) values of q_{j_n - 1}."""
        lo, hi = self._bracket_log2(self.j_n(n))
        return 2.0 ** lo, 2.0 ** (0.5 * (lo + hi)), 2.0 ** hi

    def _pair(self, j, state):
        return PairDistribution.product(self.p_at(j) if state else self.q_at(j))

    def eta_sum_diverges(self):
        return True

    def nu1_00_positive_io(self):
        return True

    def nu1_00_zero_from(self):
        return None

    def theta_closed_form(self):
        return 1.0 - self.a

    def gamma_product_log2_lower(self, j):
        """``(A, rate)`` with ``log2 prod_{l=j}^{n} gamma_l >= rate (n+1) - A``.

        The exponents telescope: ``prod_{l=0}^{n} gamma_l =
        2^{(n+1) - a b^{floor(log_b(n+1))}}``.
        """
        A = 0.0 if j == 0 else j - self.a * self.b ** ilog(j, self.b)
        return A, 1.0 - self.a

    def eta_varsigma_tail(self, n):
        """Bound on ``sum_{m > n} 2^{j_m - 1} eta_{j_m - 1} / varsigma_{j_m}`` for ``n >= n0``.

        Uses ``eta <= 2q``, the bracket upper end and
        ``varsigma_{j_m} >= 2^{c (j_m + 1) - 1}``: every term is at most
        ``2^{1-c} / j_m^2``.
        """
        total, m = 0.0, max(n, self.n0) + 1
        while True:
            t = 2.0 ** (1 - self.c) / self.j_n(m) ** 2
            total += t
            if t < 1e-18 * max(total, 1e-300):
                return total * (1 + 1e-12)
            m += 1

    def h_tilde_closed_form(self, h_low):
        # with the geometric-mean choice, log2(2^{(1-h_low/h) j_n} eta_{j_n-1})
        # = (c/2 - h_low/h) j_n + O(log j_n)
        return 2.0 * h_low / self.c

    def describe(self):
        return {"family": self.family, "a": self.a, "b": self.b, "initial_law": self.initial_law}


# ----------------------------------------------------------------------------
# module-level operations


def kernel_at(schedule: KernelSchedule, j: int, parent_state: int) -> PairDistribution:
    """``nu_{parent_state, j}`` as a :class:`PairDistribution`."""
    return schedule.kernel_at(j, parent_state)


def remark4_schedule(a: float, b: int, initial_law: float = 1.0) -> Remark4Kernels:
    return Remark4Kernels(a, b, initial_law)


@dataclass
class ValidationReport:
    J: int
    failures: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    theta_below_one: bool | None = None
    theta: float | None = None
    eta_sum_diverges: bool | None = None
    nu1_00_positive_levels: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures


def validate_schedule(schedule: KernelSchedule, J: int) -> ValidationReport:
    """Check every row up to level ``J`` and summarize theorem hypotheses."""
    from . import params  # local import: params depends on this module

    rep = ValidationReport(J=J)
    for j in range(J + 1):
        for s in (0, 1):
            try:
                pd = schedule.kernel_at(j, s)
            except ConfigurationError as exc:
                rep.failures.append({"level": j, "state": s, "reason": str(exc)})
                continue
            if s == 1 and pd.p00 > 0:
                rep.nu1_00_positive_levels.append(j)
    if rep.failures:
        return rep
    th = params.theta(schedule, J)
    rep.theta = th.value
    rep.theta_below_one = th.value < 1
    if not rep.theta_below_one:
        rep.warnings.append(f"theta = {th.value:.6g} is not below one; model out of scope")
    rep.eta_sum_diverges = params.eta_sum_diverges(schedule, J).diverges
    if isinstance(schedule, Remark4Kernels) and not schedule.a < 1 / (2 - 1 / schedule.b):
        rep.warnings.append("a >= 1/(2-1/b): the randomness claim for this family is not guaranteed")
    return rep
