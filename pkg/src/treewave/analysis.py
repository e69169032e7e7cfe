"""Empirical estimators confronting a sampled series with the theory.

The pointwise exponent is estimated from the positions of the large
coefficients: a state-1 vertex ``u`` at level ``j`` within distance ``d`` of
``x`` forces ``h(x) <= h_low j / (-log2(2^{-j} + d))``. Taking the minimum
over a window of levels ``[j_min, J]`` is the finite-depth stand-in for the
"infinitely many vertices" in the limsup sets

    L_alpha = {x : d(x, x_u) < 2^{-h_low <u> / alpha} for infinitely many u in S}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UndefinedExponentError
from .synth import CoefficientField, fractional_integrate
from .tree import TreeSample, fresh_ones, level_ones

DEFAULT_CEILING_FACTOR = 8.0


def torus_distance(x, y):
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) % 1.0
    return np.minimum(d, 1.0 - d)


def nearest_anchor(anchors: np.ndarray, x: np.ndarray):
    """Torus distance from each ``x`` to the closest of the sorted ``anchors`` and its index."""
    x = np.asarray(x, dtype=float)
    n = anchors.size
    i = np.searchsorted(anchors, x)
    left = (i - 1) % n
    right = i % n
    dl = torus_distance(x, anchors[left])
    dr = torus_distance(x, anchors[right])
    take_r = dr < dl
    return np.where(take_r, dr, dl), np.where(take_r, right, left)


def default_window(J):
    return max(1, math.ceil(J / 2))


# ----------------------------------------------------------------------------
# pointwise exponents


@dataclass(frozen=True)
class HolderField:
    """Estimated exponents on a set of torus points."""

    x: np.ndarray
    h: np.ndarray
    j_min: int
    J: int
    h_low: float
    h_high: float
    ceiling: float
    clamped: np.ndarray
    witness_level: np.ndarray
    witness_offset: np.ndarray

    @property
    def N(self):
        return self.x.size


def _level_ratio(h_low, j, anchors_pos, x):
    d, idx = nearest_anchor(anchors_pos, x)
    den = -np.log2(2.0 ** (-j) + d)
    with np.errstate(divide="ignore"):
        a = np.where(den > 0, h_low * j / np.where(den > 0, den, 1.0), np.inf)
    return a, idx


def holder_field(coeffs: CoefficientField, x=None, j_min: int | None = None, J: int | None = None,
                 probe_ceiling: float | None = None, N: int | None = None) -> HolderField:
    """Estimate ``h(x)`` at the points ``x`` (default: the grid ``k/N``)."""
    J = coeffs.J if J is None else J
    j_min = default_window(J) if j_min is None else j_min
    if j_min < 1:
        raise DomainError("j_min must be >= 1")
    if x is None:
        N = 1 << (J + 4) if N is None else N
        x = np.arange(N) / N
    x = np.atleast_1d(np.asarray(x, dtype=float)) % 1.0
    h_low, h_high = coeffs.exponents
    if math.isinf(h_high):
        base = DEFAULT_CEILING_FACTOR * coeffs.h_low if probe_ceiling is None else probe_ceiling
        ceiling = base + coeffs.t
    else:
        ceiling = h_high
    best = np.full(x.shape, np.inf)
    wl = np.full(x.shape, -1, dtype=np.int64)
    wo = np.full(x.shape, -1, dtype=np.int64)
    for j in range(j_min, J + 1):
        ks = coeffs.large(j)
        if ks.size == 0:
            continue
        a, idx = _level_ratio(h_low, j, ks / 2.0 ** j, x)
        better = a < best
        best = np.where(better, a, best)
        wl = np.where(better, j, wl)
        wo = np.where(better, ks[idx], wo)
    clamped = best >= ceiling
    h = np.minimum(best, ceiling)
    return HolderField(x, h, j_min, J, h_low, h_high, ceiling, clamped, wl, wo)


def estimate_holder(coeffs: CoefficientField, x, j_min: int | None = None, J: int | None = None,
                    probe_ceiling: float | None = None):
    """``min(h_high_eff, min_{j_min <= j <= J} min_{u in S_j} h_low j / (-log2(2^{-j} + d(x, x_u))))``."""
    f = holder_field(coeffs, x, j_min, J, probe_ceiling)
    return float(f.h[0]) if np.ndim(x) == 0 else f.h


def estimate_beta(coeffs: CoefficientField, x, t_grid=None, j_min: int | None = None,
                  J: int | None = None, probe_ceiling: float | None = None, on_clamped: str = "raise"):
    """Oscillation exponent: slope of ``t -> h^t(x)`` minus one.

    ``h^t`` is the estimated exponent after the order-``t`` integration
    surrogate. Points whose exponent sits at the probe ceiling have no
    finite exponent to differentiate; they raise, or give NaN with
    ``on_clamped="nan"``.
    """
    if t_grid is None:
        ts = np.array([0.0, 0.05, 0.1]) * coeffs.h_low
    else:
        ts = np.asarray(t_grid, dtype=float)
    if ts.size < 2 or np.any(ts < 0):
        raise DomainError("t_grid needs >= 2 nonnegative offsets")
    scalar = np.ndim(x) == 0
    fields = [holder_field(fractional_integrate(coeffs, t), x, j_min, J, probe_ceiling) for t in ts]
    hs = np.vstack([f.h for f in fields])
    clamped = fields[0].clamped & np.isinf(coeffs.h_high)
    tc = ts - ts.mean()
    slope = (tc[:, None] * (hs - hs.mean(axis=0))).sum(axis=0) / (tc ** 2).sum()
    beta = slope - 1.0
    if clamped.any():
        if on_clamped == "raise":
            raise UndefinedExponentError("exponent at the probe ceiling: oscillation exponent undefined")
        beta = np.where(clamped, np.nan, beta)
    return float(beta[0]) if scalar else beta


# ----------------------------------------------------------------------------
# limsup sets


def decomposition_min_level(h_low: float, alpha: float) -> float:
    """Least window start for which a state-1 witness always yields a fresh or chained one.

    If ``u`` is within ``2^{-h_low j / alpha}`` of ``x`` and its deepest fresh
    ancestor ``v`` sits at level ``l``, then ``v`` is within
    ``2^{-h_low l / alpha}`` of ``x`` as soon as
    ``2^{-l} <= 2^{-h_low l / alpha} (1 - 2^{-h_low / alpha})``.
    """
    s = h_low / alpha
    return math.log2(1.0 / (1.0 - 2.0 ** (-s))) / (1.0 - s)


@dataclass(frozen=True)
class Membership:
    in_L: np.ndarray
    in_L_tilde: np.ndarray
    in_theta_path: np.ndarray

    @property
    def consistent(self):
        return ~self.in_L | self.in_L_tilde | self.in_theta_path


def _run_levels(tree, J):
    out = []
    run = np.where(tree.bits(0) == 1, 0, -1).astype(np.int32)
    out.append(run)
    for j in range(1, J + 1):
        b = tree.bits(j)
        up = np.repeat(run, 2)
        run = np.where(b == 1, np.where(up >= 0, up + 1, 0), -1).astype(np.int32)
        out.append(run)
    return out


def limsup_membership(tree: TreeSample, x, alpha: float, j_min: int | None = None, J: int | None = None,
                      *, h_low: float) -> Membership:
    """Finite-window membership of ``x`` in ``L_alpha`` and its two parts.

    ``in_L``: some ``u in S_j``, ``j_min <= j <= J``, has
    ``d(x, x_u) < 2^{-h_low j / alpha}``. ``in_L_tilde``: the same over fresh
    vertices. ``in_theta_path``: such a ``u`` exists whose ancestors at
    levels ``j_min - 1 .. j - 1`` are all in state 1, i.e. ``x`` is close to
    an all-1 chain spanning the window.
    """
    if alpha <= h_low:
        raise DomainError(f"alpha={alpha!r} must exceed h_low={h_low!r}")
    J = tree.J if J is None else J
    j_min = default_window(J) if j_min is None else j_min
    x = np.atleast_1d(np.asarray(x, dtype=float)) % 1.0
    in_L = np.zeros(x.shape, bool)
    in_Lt = np.zeros(x.shape, bool)
    in_th = np.zeros(x.shape, bool)
    runs = _run_levels(tree, J)
    for j in range(j_min, J + 1):
        r = 2.0 ** (-h_low * j / alpha)
        ones = level_ones(tree, j)
        if ones.size:
            d, idx = nearest_anchor(ones / 2.0 ** j, x)
            in_L |= d < r
            chained = ones[runs[j][ones] >= j - j_min + 1]
            if chained.size:
                dc, _ = nearest_anchor(chained / 2.0 ** j, x)
                in_th |= dc < r
        if j >= 1:
            fr = fresh_ones(tree, j)
            if fr.size:
                d, _ = nearest_anchor(fr / 2.0 ** j, x)
                in_Lt |= d < r
    return Membership(in_L, in_Lt, in_th)


# ----------------------------------------------------------------------------
# dimensions


@dataclass(frozen=True)
class BoxDimension:
    slope: float
    r2: float
    levels: tuple = ()

    def __iter__(self):
        return iter((self.slope, self.r2))


def box_dimension(cover_counts: dict) -> BoxDimension:
    """Least-squares slope of ``log2(count)`` against scale exponent over the upper half of the scales.

    Keys are scale exponents ``s`` (boxes of side ``2^{-s}``) and need not be
    integers; counts may be ensemble means.
    """
    items = sorted((float(s), float(c)) for s, c in cover_counts.items() if c > 0)
    if not items:
        return BoxDimension(-math.inf, float("nan"))
    if len(items) < 4:
        raise DomainError(f"box dimension needs >= 4 nonempty levels, got {len(items)}")
    use = items[len(items) // 2:]
    lv = np.array([s for s, _ in use])
    lc = np.log2([c for _, c in use])
    slope, icpt = np.polyfit(lv, lc, 1)
    resid = lc - (slope * lv + icpt)
    ss = ((lc - lc.mean()) ** 2).sum()
    r2 = 1.0 - (resid ** 2).sum() / ss if ss > 0 else 1.0
    return BoxDimension(float(slope), float(r2), tuple(float(v) for v in lv))


def dyadic_counts(points: np.ndarray, levels) -> dict:
    """Number of distinct level-``l`` dyadic arcs containing at least one point."""
    points = np.asarray(points, dtype=float) % 1.0
    return {int(l): int(np.unique(np.floor(points * 2.0 ** l).astype(np.int64)).size) for l in levels}


def layer_counts(field: HolderField, mask: np.ndarray, h: float) -> dict:
    """Layered cover of ``{x in mask}`` at exponent ``h``.

    A point whose exponent is witnessed at level ``j`` sits within
    ``2^{-h_low j / h}`` of a level-``j`` anchor, so the points witnessed at
    level ``j`` are covered by boxes of side ``2^{-h_low j / h}``. The count
    of such boxes is recorded under the scale exponent ``h_low j / h``; the
    result feeds :func:`box_dimension`.
    """
    out = {}
    for j in range(field.j_min, field.J + 1):
        s = field.h_low * j / h
        pts = field.x[mask & (field.witness_level == j)]
        out[s] = int(np.unique(np.floor(pts * 2.0 ** s)).size)
    return out


def pooled_counts(counts: list) -> dict:
    """Mean of several count dictionaries with identical keys."""
    if not counts:
        return {}
    keys = counts[0].keys()
    if any(c.keys() != keys for c in counts):
        raise DomainError("pooled counts need identical scale keys")
    return {k: float(np.mean([c[k] for c in counts])) for k in keys}


@dataclass(frozen=True)
class IsoSets:
    h: float
    eps: float
    E: np.ndarray  # mask of |h(x) - h| <= eps
    E_tilde: np.ndarray  # mask of h(x) <= h + eps
    counts_E: dict
    counts_E_tilde: dict


def iso_holder_sets(field: HolderField, h: float, eps: float) -> IsoSets:
    """Level sets ``E = {|h(x) - h| <= eps}`` and ``E~ = {h(x) <= h + eps}`` with their layered covers."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    E = np.abs(field.h - h) <= eps
    Et = field.h <= h + eps
    return IsoSets(h, eps, E, Et, layer_counts(field, E, h), layer_counts(field, Et, h))


@dataclass(frozen=True)
class LocalityReport:
    slopes: list
    spread: float
    notes: list = field(default_factory=list)


def locality_check(fields, h: float, eps: float, n_subintervals: int = 4) -> LocalityReport:
    """Box dimension of ``{h(x) <= h + eps}`` inside each of ``n`` equal arcs.

    ``fields`` is one :class:`HolderField` or a list of them, the latter
    sharing grid and window; per-arc counts are then averaged over the list
    before the regression.
    """
    if n_subintervals < 2:
        raise DomainError("need at least two arcs")
    if isinstance(fields, HolderField):
        fields = [fields]
    per_arc = [[] for _ in range(n_subintervals)]
    for f in fields:
        Et = f.h <= h + eps
        arc = np.minimum(np.floor(f.x * n_subintervals).astype(int), n_subintervals - 1)
        for i in range(n_subintervals):
            per_arc[i].append(layer_counts(f, Et & (arc == i), h))
    slopes, notes = [], []
    for i, cs in enumerate(per_arc):
        pooled = pooled_counts(cs)
        if not any(v > 0 for v in pooled.values()):
            slopes.append(-math.inf)
            notes.append(f"arc {i} misses the set")
            continue
        try:
            slopes.append(box_dimension(pooled).slope)
        except DomainError as exc:
            slopes.append(float("nan"))
            notes.append(f"arc {i}: {exc}")
    finite = [s for s in slopes if np.isfinite(s)]
    spread = max(finite) - min(finite) if finite else float("nan")
    return LocalityReport(slopes, spread, notes)


def leader_exponent(coeffs: CoefficientField, x: float, j_min: int, J: int) -> float:
    """Regression exponent of the wavelet leaders at ``x``.

    The leader at level ``j`` is the largest ``|c_{j',k'}|`` over ``j' >= j``
    with the arc of ``(j', k')`` inside the three level-``j`` arcs around
    ``x``; the exponent is minus the slope of ``log2`` leader against ``j``.
    """
    mags = [np.abs(coeffs.values(j)) for j in range(J + 1)]
    # leaders from the finest level upward: L_j[k] = max(|c_jk|, L_{j+1}[2k], L_{j+1}[2k+1])
    lead = mags[J]
    leaders = {J: lead}
    for j in range(J - 1, -1, -1):
        lead = np.maximum(mags[j], np.maximum(lead[0::2], lead[1::2]))
        leaders[j] = lead
    js, vals = [], []
    for j in range(j_min, J + 1):
        k = int(math.floor((x % 1.0) * 2 ** j))
        nb = [(k - 1) % 2 ** j, k, (k + 1) % 2 ** j]
        v = max(leaders[j][i] for i in nb)
        if v > 0:
            js.append(j)
            vals.append(math.log2(v))
    slope = np.polyfit(js, vals, 1)[0]
    return float(-slope)


# ----------------------------------------------------------------------------
# nested-interval construction of a point with prescribed exponent


RHO_TAIL_LIMIT = 0.1


@dataclass(frozen=True)
class Step:
    level: int  # j_n
    left: float  # left end of I_n on the torus
    length: float  # diameter of I_n
    rho: float
    anchor: tuple  # (level, offset) of the ball I_n is flush against
    balls: np.ndarray  # (center, radius) rows examined at this step


@dataclass(frozen=True)
class PointConstruction:
    h: float
    j0: int | None
    steps: tuple
    y: float | None
    status: str  # "success", "fresh-vertex exhaustion", "width exhaustion", "under-resolved"
    reason: str
    depth: int
    rho_mode: str
    final_balls: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))

    @property
    def ok(self):
        return self.status == "success"

    @property
    def n(self):
        return len(self.steps)

    @property
    def levels(self):
        return [s.level for s in self.steps]

    @property
    def intervals(self):
        return [(s.left, s.length) for s in self.steps]


def _circle_gaps(centers, radii):
    """Closed arcs of the torus left uncovered by the open balls, as (left, length)."""
    if centers.size == 0:
        return [(0.0, 1.0)]
    if np.any(2 * radii >= 1.0):
        return []
    s = (centers - radii) % 1.0
    order = np.argsort(s, kind="stable")
    s = s[order]
    e = s + 2 * radii[order]
    gaps = []
    cur = e[0]
    for si, ei in zip(s[1:], e[1:]):
        if si > cur:
            gaps.append((cur, si - cur))
        cur = max(cur, ei)
    wrap = s[0] + 1.0 - cur
    if wrap > 0:
        gaps.append((cur, wrap))
    else:
        over = cur - 1.0
        trimmed = []
        for gl, gw in gaps:
            if gl + gw <= over:
                continue
            if gl < over:
                gw, gl = gl + gw - over, over
            trimmed.append((gl, gw))
        gaps = trimmed
    return [(g % 1.0, w) for g, w in gaps if w > 0]


def _interval_gaps(a, length, centers, radii):
    """Closed components of ``[a, a + length]`` minus the open balls (unwrapped coordinates)."""
    b = a + length
    mid = a + length / 2
    c = centers + np.round(mid - centers)
    lo = np.concatenate([c - 1, c, c + 1]) - np.tile(radii, 3)
    hi = np.concatenate([c - 1, c, c + 1]) + np.tile(radii, 3)
    keep = (hi > a) & (lo < b)
    lo, hi = lo[keep], hi[keep]
    order = np.argsort(lo, kind="stable")
    comps = []
    cur = a
    for l, r in zip(lo[order], hi[order]):
        if l > cur:
            comps.append((cur, l))
        cur = max(cur, r)
    if cur < b:
        comps.append((cur, b))
    return [(l, r) for l, r in comps if r > l], bool(keep.any())


def _widest(comps):
    best = None
    for l, r in comps:
        if best is None or (r - l) > (best[1] - best[0]):
            best = (l, r)
    return best


def _fresh_by_level(tree, J):
    return {j: fresh_ones(tree, j) for j in range(1, J + 1)}


def rho_series(params, h: float, j: int, J: int):
    """Partial sum of ``rho^h_j`` over ``j < j' <= J`` and the neglected tail beyond ``J``."""
    s = params.h_low / h
    from .params import eta  # local import: params does not depend on analysis

    def term(jp):
        e = eta(params.schedule, jp - 1)
        return 0.0 if e == 0 else 2.0 ** ((1 - s) * jp) * e * jp * jp

    pref = j * 2.0 ** (params.h_low * j / h)
    partial = math.fsum(term(jp) for jp in range(j + 1, J + 1))
    tail, jp, small = 0.0, J + 1, 0
    while jp < J + 4096:
        t = term(jp)
        tail += t
        small = small + 1 if t <= 1e-16 * max(tail + partial, 1e-300) else 0
        if small >= 64:
            break
        jp += 1
    return pref * partial, pref * tail


def construct_point(tree: TreeSample, params, h: float, J: int | None = None, rho_mode: str = "constant",
                    rho0: float = 0.25) -> PointConstruction:
    """Nested closed arcs ``I_1 > I_2 > ...`` avoiding the balls ``B^h_u`` of fresh vertices.

    ``B^h_u`` has center ``x_u`` and radius ``2^{-h_low <u> / h}``. The first
    level ``j0`` is the least one for which the balls of fresh vertices at
    levels ``j0..J`` have total length at most ``1/4`` (with ``theta >= 0``
    the enlarged balls of radius ``3 * 2^{-j0}`` around the state-1 vertices
    of level ``j0 - 1`` also count). Each step picks the least level at which
    a fresh vertex appears in the current arc and the widest remaining
    component can hold an arc of length ``rho_j 2^{-h_low j / h}``; the new arc
    is placed against the boundary of a ball. Once the levels run out, the
    point is the midpoint of the widest part of the last arc that avoids the
    remaining balls.

    ``rho_mode="series"`` evaluates ``rho_j = j 2^{h_low j/h} sum_{j'>j}
    2^{(1-h_low/h) j'} eta_{j'-1} j'^2`` truncated at ``J``; ``"constant"``
    uses ``rho_j = rho0``.
    """
    hl, hh = params.h_low, params.h_high
    if not hl <= h < hh:
        raise DomainError(f"need h_low <= h < h_high, got h={h!r}")
    if rho_mode not in ("constant", "series"):
        raise DomainError(f"unknown rho mode {rho_mode!r}")
    J = tree.J if J is None else J

    def radius(j):
        return 2.0 ** (-hl * j / h)

    def rho(j):
        if rho_mode == "constant":
            return rho0, 0.0
        return rho_series(params, h, j, J)

    fresh = _fresh_by_level(tree, J)
    counts = {j: fresh[j].size for j in fresh}
    theta_nonneg = params.theta.value >= 0

    # j0: realized total length of the excluded balls at most 1/4
    j0 = None
    for j in range(1, J + 1):
        mass = 2.0 * sum(counts[jp] * radius(jp) for jp in range(j, J + 1))
        if theta_nonneg:
            mass = max(mass, 3.0 * tree.count(j - 1) * 2.0 ** (-(j - 1)))
        if mass <= 0.25:
            j0 = j
            break
    result = dict(h=h, rho_mode=rho_mode)
    if j0 is None or not any(counts[j] for j in range(j0, J + 1)):
        return PointConstruction(j0=j0, steps=(), y=None, status="fresh-vertex exhaustion",
                                 reason="no fresh vertex at levels j0..J", depth=0, **result)

    def balls(levels):
        rows = [np.column_stack([fresh[j] / 2.0 ** j, np.full(fresh[j].size, radius(j))])
                for j in levels if counts[j]]
        return np.vstack(rows) if rows else np.empty((0, 2))

    big = np.empty((0, 2))
    if theta_nonneg and j0 >= 1:
        ones = level_ones(tree, j0 - 1)
        big = np.column_stack([ones / 2.0 ** (j0 - 1), np.full(ones.size, 3.0 * 2.0 ** (-j0))])

    steps = []
    # step 1 on the whole torus
    for j in range(j0, J + 1):
        B = balls(range(j0, j + 1))
        if B.shape[0] == 0:
            continue
        allb = np.vstack([B, big])
        gaps = _circle_gaps(allb[:, 0], allb[:, 1])
        if not gaps:
            continue
        r, tail = rho(j)
        if rho_mode == "series" and tail > RHO_TAIL_LIMIT * r:
            return PointConstruction(j0=j0, steps=(), y=None, status="under-resolved",
                                     reason=f"rho tail {tail:.3g} exceeds 10% of the partial sum {r:.3g} at level {j}",
                                     depth=j - 1, **result)
        length = r * radius(j)
        left, width = max(gaps, key=lambda g: (g[1], -g[0]))
        if length <= width:
            # the gap starts at the right end of a ball: find it for the record
            d = torus_distance(left, allb[:, 0] + allb[:, 1])
            i = int(np.argmin(d))
            steps.append(Step(j, left % 1.0, length, r, _ball_id(i, B, fresh, j0, j), allb))
            break
    else:
        return PointConstruction(j0=j0, steps=(), y=None, status="width exhaustion",
                                 reason="no level up to J leaves room for the first arc", depth=J, **result)

    # steps n + 1
    while True:
        cur = steps[-1]
        a, L, jn = cur.left, cur.length, cur.level
        placed = False
        for j in range(jn + 1, J + 1):
            B = balls(range(jn + 1, j + 1))
            if B.shape[0] == 0:
                continue
            inside = ((B[:, 0] - a) % 1.0) <= L
            if not inside.any():
                continue
            comps, _ = _interval_gaps(a, L, B[:, 0], B[:, 1])
            if not comps:
                return PointConstruction(j0=j0, steps=tuple(steps), y=None, status="width exhaustion",
                                         reason=f"I_{len(steps)} covered at level {j}", depth=j - 1, **result)
            r, tail = rho(j)
            if rho_mode == "series" and tail > RHO_TAIL_LIMIT * r:
                return PointConstruction(j0=j0, steps=tuple(steps), y=None, status="under-resolved",
                                         reason=f"rho tail exceeds 10% of the partial sum at level {j}",
                                         depth=j - 1, **result)
            length = r * radius(j)
            wl, wr = _widest(comps)
            if length <= wr - wl and length < L:
                if wl > a:
                    left, edge = wl, wl
                    d = np.abs(((B[:, 0] + B[:, 1]) - edge + 0.5) % 1.0 - 0.5)
                else:
                    left, edge = wr - length, wr
                    d = np.abs(((B[:, 0] - B[:, 1]) - edge + 0.5) % 1.0 - 0.5)
                i = int(np.argmin(d))
                steps.append(Step(j, left % 1.0, length, r, _ball_id(i, B, fresh, jn + 1, j), B))
                placed = True
                break
        if not placed:
            break

    # final point: avoid the balls of every fresh vertex below the last step
    cur = steps[-1]
    B = balls(range(cur.level + 1, J + 1))
    for j in range(cur.level + 1, J + 1):
        comps, _ = _interval_gaps(cur.left, cur.length, *balls(range(cur.level + 1, j + 1)).T) \
            if counts[j] else (None, None)
        if comps is not None and not comps:
            return PointConstruction(j0=j0, steps=tuple(steps), y=None, status="width exhaustion",
                                     reason=f"last arc covered at level {j}", depth=j - 1,
                                     final_balls=B, **result)
    comps, _ = _interval_gaps(cur.left, cur.length, B[:, 0], B[:, 1]) if B.size else \
        ([(cur.left, cur.left + cur.length)], False)
    wl, wr = _widest(comps)
    y = ((wl + wr) / 2) % 1.0
    return PointConstruction(j0=j0, steps=tuple(steps), y=y, status="success", reason="levels exhausted",
                             depth=J, final_balls=B, **result)


def _ball_id(i, B, fresh, lo, hi):
    """(level, offset) of row ``i`` of the ball table built from levels ``lo..hi``."""
    for j in range(lo, hi + 1):
        n = fresh[j].size
        if i < n:
            return (j, int(fresh[j][i]))
        i -= n
    return (lo - 1, -1)  # an enlarged ball around a level j0 - 1 vertex
