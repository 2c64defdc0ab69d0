"""Pairwise-merge coalescent trajectories and their sequential construction.

A trajectory for n individuals is the full merge history: n - 1 events, each
merging two blocks at an exponential holding time.  Individuals can be added
one at a time: the waiting length of the next individual has hazard equal to
the current block count, so its cumulative hazard is piecewise linear and is
inverted exactly.  The per-individual lengths collected along the way form a
length sequence from which the whole trajectory can be rebuilt.
"""

from __future__ import annotations

import io
import math
from bisect import bisect_left, bisect_right, insort
from dataclasses import dataclass, field

import numpy as np

from .streams import exp_inverse

__all__ = [
    "Partition",
    "TrajectoryEvent",
    "Trajectory",
    "PeblsSequence",
    "simulate_kingman",
    "extend_recursive",
    "build_pebls",
    "reconstruct_from_pebls",
    "time_to_mrca",
    "cumulative_hazard",
    "invert_cumulative_hazard",
    "trajectory_to_csv",
    "pebls_to_csv",
]


@dataclass
class Partition:
    """Partition of {1..n} into disjoint non-empty blocks, sorted by minimum."""

    n: int
    blocks: list[frozenset]

    def __post_init__(self):
        seen = set()
        for b in self.blocks:
            if not b:
                raise ValueError("empty block")
            if seen & b:
                raise ValueError("blocks overlap")
            seen |= b
        if seen != set(range(1, self.n + 1)):
            raise ValueError(f"blocks do not cover 1..{self.n}")
        self.blocks = sorted((frozenset(b) for b in self.blocks), key=min)

    def __len__(self):
        return len(self.blocks)

    def block_of(self, i: int) -> frozenset:
        for b in self.blocks:
            if i in b:
                return b
        raise ValueError(f"{i} not in ground set")


@dataclass(frozen=True)
class TrajectoryEvent:
    """One merge: the blocks labelled by their minimum elements a < b join."""

    time: float
    block_a: int
    block_b: int


class _UnionFind:
    """Union by size with path compression; roots relabelled to block minima."""

    def __init__(self, n: int):
        self.parent = list(range(n + 1))
        self.min_label = list(range(n + 1))
        self.size = [1] * (n + 1)

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def label(self, i: int) -> int:
        return self.min_label[self.find(i)]

    def union(self, i: int, j: int) -> tuple:
        """Merge the blocks containing i and j; returns their prior labels."""
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            raise ValueError("merging a block with itself")
        la, lb = self.min_label[ri], self.min_label[rj]
        if self.size[ri] < self.size[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        self.size[ri] += self.size[rj]
        self.min_label[ri] = min(la, lb)
        return (la, lb) if la < lb else (lb, la)


@dataclass
class Trajectory:
    """Merge history over individuals 1..n; complete once n - 1 events exist."""

    n: int
    events: list = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n < 1:
            raise ValueError("need at least one individual")
        if len(self.events) > self.n - 1:
            raise ValueError("more events than a coalescent of this size allows")
        last = 0.0
        uf = _UnionFind(self.n)
        for ev in self.events:
            if not (ev.time > last):
                raise ValueError("event times must be strictly increasing")
            if not math.isfinite(ev.time):
                raise ValueError("non-finite event time")
            last = ev.time
            # Raises if labels are not current block minima of distinct blocks.
            if uf.label(ev.block_a) != ev.block_a or uf.label(ev.block_b) != ev.block_b:
                raise ValueError("event labels are not current block minima")
            uf.union(ev.block_a, ev.block_b)

    @property
    def is_complete(self) -> bool:
        return len(self.events) == self.n - 1

    def event_times(self) -> list:
        return [ev.time for ev in self.events]

    def block_count_at(self, t: float) -> int:
        """Number of blocks at time t (right-continuous in t)."""
        times = self.event_times()
        return self.n - bisect_right(times, t)

    def partition_at(self, t: float) -> Partition:
        """Partition at time t; a merge at exactly t has already happened."""
        uf = _UnionFind(self.n)
        for ev in self.events:
            if ev.time > t:
                break
            uf.union(ev.block_a, ev.block_b)
        groups = {}
        for i in range(1, self.n + 1):
            groups.setdefault(uf.find(i), []).append(i)
        return Partition(self.n, [frozenset(g) for g in groups.values()])


@dataclass
class PeblsSequence:
    """Per-individual waiting lengths, entry i holding the length of
    individual i + 2.  The first individual's length is infinite by
    convention and is not stored."""

    n_max: int
    lengths: list

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if len(self.lengths) != self.n_max - 1:
            raise ValueError("expected one length per individual 2..n_max")
        for v in self.lengths:
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError("lengths must be finite and positive")
        if len(set(self.lengths)) != len(self.lengths):
            raise ValueError("duplicate length values")

    def length_of(self, individual: int) -> float:
        if individual == 1:
            return math.inf
        if not 2 <= individual <= self.n_max:
            raise ValueError("individual outside 1..n_max")
        return self.lengths[individual - 2]


def simulate_kingman(n: int, rng: np.random.Generator) -> Trajectory:
    """Simulate the n-individual coalescent directly.

    With b blocks the holding time is exponential with rate b(b-1)/2 and the
    merging pair is uniform among blocks.  An exact floating tie with the
    previous event time (possible only by underflow) is redrawn.
    """
    if n < 1:
        raise ValueError("need at least one individual")
    uf = _UnionFind(n)
    roots = list(range(1, n + 1))  # current block labels, ascending
    t = 0.0
    events = []
    for b in range(n, 1, -1):
        rate = b * (b - 1) / 2.0
        t_next = t + exp_inverse(rng) / rate
        while t_next == t:
            t_next = t + exp_inverse(rng) / rate
        t = t_next
        i = int(rng.integers(b))
        j = int(rng.integers(b - 1))
        if j >= i:
            j += 1
        la, lb = uf.union(roots[i], roots[j])
        events.append(TrajectoryEvent(t, la, lb))
        roots.remove(lb)
    return Trajectory(n, events)


def cumulative_hazard(traj: Trajectory, t: float) -> float:
    """Integral of the block count over [0, t] for a complete trajectory."""
    if not traj.is_complete:
        raise ValueError("trajectory is not complete")
    if t < 0.0:
        raise ValueError("time must be non-negative")
    total = 0.0
    prev = 0.0
    count = traj.n
    for ev in traj.events:
        if ev.time >= t:
            break
        total += count * (ev.time - prev)
        prev = ev.time
        count -= 1
    return total + count * (t - prev)


def invert_cumulative_hazard(traj: Trajectory, target: float) -> float:
    """Unique t with cumulative_hazard(traj, t) == target.

    The hazard is piecewise linear with slope equal to the block count, which
    ends at 1, so every positive target is attained and the segment-local
    inversion is exact to rounding.
    """
    if not traj.is_complete:
        raise ValueError("trajectory is not complete")
    if not (target > 0.0 and math.isfinite(target)):
        raise ValueError("target must be positive and finite")
    total = 0.0
    prev = 0.0
    count = traj.n
    for ev in traj.events:
        seg = count * (ev.time - prev)
        if total + seg >= target:
            return prev + (target - total) / count
        total += seg
        prev = ev.time
        count -= 1
    return prev + (target - total)  # final slope is exactly 1


def extend_recursive(traj: Trajectory, rng: np.random.Generator) -> tuple:
    """Add one individual to a complete trajectory.

    Draws a standard exponential, inverts the cumulative hazard to get the
    new individual's length L, and merges it into a uniformly chosen block of
    the partition just before L.  A draw whose L exactly equals an existing
    event time is rejected and redrawn.  Returns (L, extended trajectory).
    """
    if not traj.is_complete:
        raise ValueError("trajectory is not complete")
    times = traj.event_times()
    existing = set(times)
    while True:
        length = invert_cumulative_hazard(traj, exp_inverse(rng))
        if length not in existing:
            break

    uf = _UnionFind(traj.n)
    count = traj.n
    for ev in traj.events:
        if ev.time >= length:
            break
        uf.union(ev.block_a, ev.block_b)
        count -= 1
    pick = int(rng.integers(count))
    labels = sorted({uf.label(i) for i in range(1, traj.n + 1)})
    chosen = labels[pick]

    newcomer = traj.n + 1
    pos = bisect_left(times, length)
    events = list(traj.events)
    events.insert(pos, TrajectoryEvent(length, chosen, newcomer))
    return length, Trajectory(newcomer, events)


def build_pebls(n_max: int, rng: np.random.Generator) -> tuple:
    """Grow a trajectory from a single individual up to n_max, collecting the
    length of each added individual.  Returns (length sequence, trajectory)."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    traj = Trajectory(1, [])
    lengths = []
    for _ in range(1, n_max):
        length, traj = extend_recursive(traj, rng)
        lengths.append(length)
    return PeblsSequence(n_max, lengths), traj


def reconstruct_from_pebls(pebls: PeblsSequence,
                           rng: np.random.Generator) -> Trajectory:
    """Rebuild a trajectory from per-individual lengths alone.

    Individual n merges at its length L_n into the cluster of an eligible
    partner j < n chosen uniformly among those with L_j >= L_n (individual 1
    always qualifies).  Replaying the merges in time order yields a valid
    trajectory: just before L_n both n and its partner still head distinct
    clusters, because each individual leaves its own cluster only at its own
    length and the partner's length is at least L_n.
    """
    n_max = pebls.n_max
    if n_max == 1:
        return Trajectory(1, [])
    merges = []
    for n in range(2, n_max + 1):
        ln = pebls.length_of(n)
        eligible = [1] + [i for i in range(2, n) if pebls.length_of(i) > ln]
        partner = eligible[int(rng.integers(len(eligible)))]
        merges.append((ln, n, partner))
    merges.sort()
    uf = _UnionFind(n_max)
    events = []
    for when, n, partner in merges:
        la, lb = uf.union(n, partner)
        events.append(TrajectoryEvent(when, la, lb))
    return Trajectory(n_max, events)


def time_to_mrca(traj: Trajectory) -> float:
    """Time of the final merge of a complete trajectory."""
    if not traj.is_complete:
        raise ValueError("trajectory is not complete")
    if traj.n == 1:
        return 0.0
    return traj.events[-1].time


def trajectory_to_csv(traj: Trajectory) -> str:
    out = io.StringIO()
    out.write("event_index,time,block_a,block_b\n")
    for i, ev in enumerate(traj.events):
        out.write(f"{i},{ev.time!r},{ev.block_a},{ev.block_b}\n")
    return out.getvalue()


def pebls_to_csv(pebls: PeblsSequence) -> str:
    out = io.StringIO()
    out.write("individual,length\n")
    for n in range(2, pebls.n_max + 1):
        out.write(f"{n},{pebls.length_of(n)!r}\n")
    return out.getvalue()
