"""Monte Carlo harness over independently seeded trees.

Replicate ``i`` of a run with base seed ``s`` uses the tree seed
``replicate_seed(s, i)``; with the counter-based generator of
:mod:`treewave.tree`, distinct tree seeds give independent samples and the
same base seed reproduces the same result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .analysis import box_dimension
from .errors import ConfigurationError, RangeError, UnknownEventError
from .kernels import KernelSchedule
from .tree import TreeSample, _mix, cover_counts, fresh_ones, run_lengths, sample_tree, subtree_reaches

CONFIDENCE = 0.99
DEFAULT_TRIALS = 10_000
DEFAULT_J = 16


def replicate_seed(seed: int, i: int) -> int:
    with np.errstate(over="ignore"):
        z = _mix(np.uint64(seed) ^ _mix(np.uint64(i) + np.uint64(0x632BE59BD9B4E019)))
    return int(z)


def wilson_interval(successes: int, trials: int, confidence: float = CONFIDENCE):
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(max(0.0, ci.low)), float(min(1.0, ci.high))


@dataclass(frozen=True)
class MCResult:
    event: str
    trials: int
    successes: int
    seed: int
    confidence: float = CONFIDENCE

    @property
    def p_hat(self):
        return self.successes / self.trials

    @property
    def interval(self):
        return wilson_interval(self.successes, self.trials, self.confidence)

    def covers(self, p: float) -> bool:
        lo, hi = self.interval
        return lo <= p <= hi

    def to_dict(self):
        lo, hi = self.interval
        return {"event": self.event, "trials": self.trials, "successes": self.successes,
                "p_hat": self.p_hat, "interval": [lo, hi], "confidence": self.confidence, "seed": self.seed}


# ----------------------------------------------------------------------------
# event registry


def _s_empty(tree, J, j=None):
    return tree.count(J if j is None else j) == 0


def _fresh_nonempty(tree, J, lo=1, hi=None):
    hi = J if hi is None else hi
    return any(fresh_ones(tree, j).size for j in range(max(lo, 1), hi + 1))


def _subtree_survival(tree, J, j=0, k=0):
    return subtree_reaches(tree, j, k, J)


def _theta_cover_nonempty(tree, J, min_run=None):
    run = run_lengths(tree, J)
    need = J if min_run is None else min_run
    return bool(np.any(run >= need))


def _theta_absent(tree, J, min_run=None):
    return not _theta_cover_nonempty(tree, J, min_run)


EVENTS = {
    "s-empty": (_s_empty, "S_j is empty (default j = J)"),
    "fresh-nonempty": (_fresh_nonempty, "some fresh vertex at levels lo..hi"),
    "subtree-survival": (_subtree_survival, "the all-1 subtree of (j, k) reaches level J"),
    "theta-cover-nonempty": (_theta_cover_nonempty, "a level-J vertex ends an all-1 chain of >= min_run levels"),
    "theta-absent": (_theta_absent, "no level-J vertex ends an all-1 chain of >= min_run levels"),
}


def describe_event(event: str, args: dict | None = None) -> str:
    args = args or {}
    inner = ",".join(f"{k}={v}" for k, v in sorted(args.items()))
    return f"{event}({inner})"


def mc_probability(schedule: KernelSchedule, J: int, event: str, trials: int = DEFAULT_TRIALS,
                   seed: int = 0, **event_args) -> MCResult:
    if event not in EVENTS:
        raise UnknownEventError(f"unknown event {event!r}; known: {sorted(EVENTS)}")
    if trials < 100:
        raise ConfigurationError("mc_probability needs at least 100 trials")
    fn = EVENTS[event][0]
    hits = 0
    for i in range(trials):
        tree = sample_tree(schedule, J, replicate_seed(seed, i))
        hits += bool(fn(tree, J, **event_args))
    return MCResult(describe_event(event, event_args), trials, hits, seed)


# ----------------------------------------------------------------------------
# moments


@dataclass(frozen=True)
class MomentResult:
    statistic: str
    j: int
    trials: int
    mean: float
    se: float
    seed: int

    def within(self, value: float, k: float = 3.0) -> bool:
        if self.se == 0:
            return self.mean == value
        return abs(self.mean - value) <= k * self.se


STATISTICS = ("#S_j", "#S~_j")


def mc_moment(schedule: KernelSchedule, J: int, statistic: str, j: int, trials: int = DEFAULT_TRIALS,
              seed: int = 0) -> MomentResult:
    if statistic not in STATISTICS:
        raise UnknownEventError(f"unknown statistic {statistic!r}; known: {STATISTICS}")
    if not 0 <= j <= J:
        raise RangeError(f"level {j} outside [0, {J}]")
    if statistic == "#S~_j" and j < 1:
        raise RangeError("fresh vertices start at level 1")
    vals = np.empty(trials)
    for i in range(trials):
        tree = sample_tree(schedule, j, replicate_seed(seed, i))
        vals[i] = tree.count(j) if statistic == "#S_j" else fresh_ones(tree, j).size
    se = float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    return MomentResult(statistic, j, trials, float(vals.mean()), se, seed)


# ----------------------------------------------------------------------------
# dimension of the 1-chain set


@dataclass(frozen=True)
class ThetaDimension:
    slopes: np.ndarray
    r2: np.ndarray
    survival: MCResult
    mean_counts: dict = field(default_factory=dict)

    @property
    def mean_slope(self):
        return float(np.mean(self.slopes)) if self.slopes.size else -math.inf

    @property
    def pooled_slope(self):
        return box_dimension(self.mean_counts).slope if self.mean_counts else -math.inf


def mc_theta_dimension(schedule: KernelSchedule, J: int, trials: int, seed: int = 0,
                       min_survivors: int = 0, max_trials: int | None = None) -> ThetaDimension:
    """Cover-count slopes of the depth-``J`` 1-chain set over surviving replicates.

    A replicate survives when some level-``J`` vertex ends an all-1 chain
    from the root. ``min_survivors`` keeps sampling past ``trials`` (up to
    ``max_trials``) until that many survivors are collected.
    """
    slopes, r2s, sums = [], [], {}
    hits = n = 0
    limit = max(trials, max_trials or trials)
    while n < trials or (len(slopes) < min_survivors and n < limit):
        tree: TreeSample = sample_tree(schedule, J, replicate_seed(seed, n))
        n += 1
        counts = cover_counts(tree, J)
        if counts[0] == 0:
            continue
        hits += 1
        bd = box_dimension(counts)
        slopes.append(bd.slope)
        r2s.append(bd.r2)
        for j, c in counts.items():
            sums[j] = sums.get(j, 0) + c
    mean_counts = {j: c / hits for j, c in sums.items()} if hits else {}
    survival = MCResult(describe_event("subtree-survival", {}), n, hits, seed)
    return ThetaDimension(np.array(slopes), np.array(r2s), survival, mean_counts)
