"""Sampling the tree-indexed Markov chain.

Vertex ``(j, k)`` (level ``j``, offset ``0 <= k < 2^j``) has father
``(j - 1, k // 2)`` and sons ``(j + 1, 2k)``, ``(j + 1, 2k + 1)``; it carries
the dyadic arc ``[k 2^{-j}, (k + 1) 2^{-j})`` of the torus.

Randomness is counter based: the son pair of vertex ``(j, k)`` is decided by
a single uniform obtained by hashing ``(seed, j, k)``. Samples therefore do
not depend on traversal order, and changing the kernels at levels above
``j`` never alters levels ``<= j``.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, RangeError, TreewaveError
from .kernels import KernelSchedule

DEFAULT_DEPTH_CAP = 26
MAGIC = b"HMTT"
FORMAT_VERSION = 1
ROOT_LEVEL_TAG = 0xFFFF

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def depth_cap() -> int:
    """Largest admissible depth; ``TREEWAVE_DEPTH_CAP`` overrides the default."""
    raw = os.environ.get("TREEWAVE_DEPTH_CAP")
    if raw is None:
        return DEFAULT_DEPTH_CAP
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"TREEWAVE_DEPTH_CAP={raw!r} is not an integer") from exc


def _mix(z):
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def vertex_uniforms(seed: int, j: int, k) -> np.ndarray:
    """Uniforms in [0, 1) attached to vertices ``(j, k)`` for the given seed."""
    with np.errstate(over="ignore"):
        key = _mix(np.uint64(seed) * _GOLDEN + np.uint64(j + 1) * _M2)
        z = _mix(key + (np.asarray(k, dtype=np.uint64) + np.uint64(1)) * _GOLDEN)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _draw_pairs(schedule, j, states, seed, idx):
    """Son-pair outcome codes (2 a + b) for the parents ``idx`` at level ``j``."""
    out = np.zeros(idx.size, dtype=np.uint8)
    for s in (0, 1):
        sel = states == s
        if not sel.any():
            continue
        pd = schedule.kernel_at(j, s)
        t = pd.as_tuple()
        if pd.is_degenerate:
            out[sel] = t.index(1.0)
            continue
        u = vertex_uniforms(seed, j, idx[sel])
        c = np.cumsum(t)
        out[sel] = (u >= c[0]).astype(np.uint8) + (u >= c[1]) + (u >= c[2])
    return out


@dataclass(frozen=True)
class TreeSample:
    """One realization of the chain to depth ``J``.

    ``packed[j]`` holds the ``2^j`` states of level ``j`` bit-packed in
    little-endian bit order.
    """

    J: int
    packed: tuple
    seed: int
    fingerprint: bytes

    def bits(self, j: int) -> np.ndarray:
        if not 0 <= j <= self.J:
            raise RangeError(f"level {j} outside [0, {self.J}]")
        return np.unpackbits(self.packed[j], count=1 << j, bitorder="little")

    def count(self, j: int) -> int:
        return int(self.bits(j).sum())

    def state(self, j: int, k: int) -> int:
        if not 0 <= k < (1 << j):
            raise RangeError(f"offset {k} outside level {j}")
        return int(self.bits(j)[k])

    @cached_property
    def counts(self) -> np.ndarray:
        return np.array([self.count(j) for j in range(self.J + 1)])

    # -- binary format ------------------------------------------------------

    def to_bytes(self) -> bytes:
        head = MAGIC + struct.pack("<BBQ", FORMAT_VERSION, self.J, self.seed) + self.fingerprint
        stream = np.concatenate([self.bits(j) for j in range(self.J + 1)])
        return head + np.packbits(stream, bitorder="little").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "TreeSample":
        if blob[:4] != MAGIC:
            raise TreewaveError("not a tree-sample file (bad magic)")
        version, J, seed = struct.unpack("<BBQ", blob[4:14])
        if version != FORMAT_VERSION:
            raise TreewaveError(f"unsupported tree-sample version {version}")
        fp = blob[14:30]
        total = (1 << (J + 1)) - 1
        stream = np.unpackbits(np.frombuffer(blob[30:], dtype=np.uint8), count=total, bitorder="little")
        packed = tuple(np.packbits(stream[(1 << j) - 1:(1 << (j + 1)) - 1], bitorder="little")
                       for j in range(J + 1))
        return cls(J, packed, seed, fp)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def sample_tree(schedule: KernelSchedule, J: int, seed: int) -> TreeSample:
    """Draw the root from ``initial_law``, then every son pair level by level."""
    if J < 0:
        raise ConfigurationError("J must be nonnegative")
    cap = depth_cap()
    if J > cap:
        raise ConfigurationError(f"J={J} exceeds the depth cap {cap} (set TREEWAVE_DEPTH_CAP to raise it)")
    if not 0 <= seed < 1 << 64:
        raise ConfigurationError("seed must fit in 64 unsigned bits")
    root = vertex_uniforms(seed, ROOT_LEVEL_TAG, np.zeros(1, dtype=np.uint64))[0]
    cur = np.array([1 if root < schedule.initial_law else 0], dtype=np.uint8)
    packed = [np.packbits(cur, bitorder="little")]
    for j in range(J):
        nxt = np.zeros(2 * cur.size, dtype=np.uint8)
        if schedule.kernel_at(j, 0).p00 == 1.0:
            # state-0 parents have two state-0 sons: only visit the ones
            idx = np.flatnonzero(cur).astype(np.uint64)
            states = np.ones(idx.size, dtype=np.uint8)
        else:
            idx = np.arange(cur.size, dtype=np.uint64)
            states = cur
        if idx.size:
            code = _draw_pairs(schedule, j, states, seed, idx)
            pos = 2 * idx.astype(np.int64)
            nxt[pos] = code >> 1
            nxt[pos + 1] = code & 1
        packed.append(np.packbits(nxt, bitorder="little"))
        cur = nxt
    return TreeSample(J, tuple(packed), int(seed), schedule.fingerprint())


# ----------------------------------------------------------------------------
# state sets


def level_ones(tree: TreeSample, j: int) -> np.ndarray:
    """Sorted offsets of the state-1 vertices at level ``j``."""
    return np.flatnonzero(tree.bits(j))


def fresh_ones(tree: TreeSample, j: int) -> np.ndarray:
    """Offsets of level-``j`` vertices in state 1 whose father is in state 0."""
    if not 1 <= j <= tree.J:
        raise RangeError(f"fresh vertices need 1 <= j <= {tree.J}, got {j}")
    b = tree.bits(j)
    father = np.repeat(tree.bits(j - 1), 2)
    return np.flatnonzero(b & (father ^ 1))


def run_lengths(tree: TreeSample, J: int | None = None) -> np.ndarray:
    """Length of the all-1 ancestor chain ending at each level-``J`` vertex.

    The tag counts the state-1 strict ancestors reached before the first
    state-0 one; it is ``-1`` for state-0 vertices.
    """
    J = tree.J if J is None else J
    run = np.where(tree.bits(0) == 1, 0, -1).astype(np.int16)
    for j in range(1, J + 1):
        b = tree.bits(j)
        up = np.repeat(run, 2)
        run = np.where(b == 1, np.where(up >= 0, up + 1, 0), -1).astype(np.int16)
    return run


@dataclass(frozen=True)
class ThetaCover:
    J: int
    offsets: np.ndarray  # level-J state-1 offsets
    run: np.ndarray  # terminal 1-run tag of each offset

    def filtered(self, min_run: int) -> np.ndarray:
        """Offsets whose all-1 ancestor chain spans at least ``min_run`` levels."""
        return self.offsets[self.run >= min_run]

    def __len__(self):
        return int(self.offsets.size)


def theta_cover(tree: TreeSample, J: int | None = None) -> ThetaCover:
    """Level-``J`` dyadic arcs of state-1 vertices, with their run tags."""
    J = tree.J if J is None else J
    if not 0 <= J <= tree.J:
        raise RangeError(f"level {J} outside [0, {tree.J}]")
    run = run_lengths(tree, J)
    off = np.flatnonzero(run >= 0)
    return ThetaCover(J, off, run[off].astype(np.int64))


def surviving_masks(tree: TreeSample, J: int | None = None) -> list:
    """Per level ``j <= J``, the vertices whose all-1 subtree reaches level ``J``."""
    J = tree.J if J is None else J
    alive = tree.bits(J).astype(bool)
    out = [alive]
    for j in range(J - 1, -1, -1):
        alive = tree.bits(j).astype(bool) & (alive[0::2] | alive[1::2])
        out.append(alive)
    return out[::-1]


def cover_counts(tree: TreeSample, J: int | None = None) -> dict:
    """Number of level-``j`` vertices carrying an all-1 chain down to level ``J``.

    These vertices cover the depth-``J`` trace of the boundary points of the
    all-1 subtrees at every scale ``2^{-j}``.
    """
    return {j: int(m.sum()) for j, m in enumerate(surviving_masks(tree, J))}


def subtree_reaches(tree: TreeSample, j: int, k: int, J: int | None = None) -> bool:
    """Whether the all-1 subtree rooted at ``(j, k)`` contains a level-``J`` vertex."""
    J = tree.J if J is None else J
    if not 0 <= j <= J <= tree.J:
        raise RangeError(f"need 0 <= j <= J <= {tree.J}")
    if not 0 <= k < (1 << j):
        raise RangeError(f"offset {k} outside level {j}")
    front = np.array([k], dtype=np.int64)
    front = front[tree.bits(j)[front] == 1]
    for m in range(j + 1, J + 1):
        if front.size == 0:
            return False
        sons = np.concatenate([2 * front, 2 * front + 1])
        front = sons[tree.bits(m)[sons] == 1]
    return bool(front.size)
