"""Stick construction of the coalescent on the unit interval.

Sticks U_1, U_2, ... and individuals V_1, V_2, ... are iid uniform positions.
Stick j carries a height equal to the coalescent time at which the population
drops below j blocks, so two individuals belong to the same block at time t
exactly when every stick strictly between them is shorter than t.  Replaying
the positions in planting order also identifies the record chain of ranks and
positions without ever looking at heights.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right, insort
from collections import defaultdict

import numpy as np

from .kingman import Partition
from .ra_chain import RAState
from .streams import exp_inverse

__all__ = [
    "StickField",
    "sample_stick_field",
    "partition_at",
    "identify_lineage_rank",
    "identify_ra",
    "match_rank_to_individual",
    "batch_first_record",
    "field_to_csv",
]

_STICK = 0
_INDIVIDUAL = 1


def _height_count(tol: float) -> int:
    """Number of stick heights to materialize so that truncating the
    infinite sum leaves a zero-mean remainder with standard deviation
    at most tol."""
    return max(64, math.ceil((2.0 / (math.sqrt(3.0) * tol)) ** (2.0 / 3.0)))


class StickField:
    """Lazily grown field of stick and individual positions with heights.

    Positions come from two child streams of the generator handed in (one
    per kind, a third for heights), so asking for more sticks never shifts
    the individuals.  Exact position collisions, which would make interval
    adjacency ambiguous, are redrawn.
    """

    def __init__(self, rng: np.random.Generator, *, height_tol: float = 1e-9):
        if not 0.0 < height_tol <= 1e-2:
            raise ValueError("height_tol out of range")
        stick_rng, indiv_rng, height_rng = rng.spawn(3)
        self._stick_rng = stick_rng
        self._indiv_rng = indiv_rng
        self._height_rng = height_rng
        self.height_tol = float(height_tol)
        self._sticks: list = []
        self._individuals: list = []
        self._taken: set = {0.0}
        self._heights: np.ndarray | None = None

    def _draw(self, rng) -> float:
        while True:
            x = rng.random()
            if x not in self._taken:
                self._taken.add(x)
                return x

    def ensure_sticks(self, m: int):
        while len(self._sticks) < m:
            self._sticks.append(self._draw(self._stick_rng))

    def ensure_individuals(self, n: int):
        while len(self._individuals) < n:
            self._individuals.append(self._draw(self._indiv_rng))

    def stick_location(self, j: int) -> float:
        if j < 1:
            raise ValueError("stick indices start at 1")
        self.ensure_sticks(j)
        return self._sticks[j - 1]

    def individual_location(self, i: int) -> float:
        if i < 1:
            raise ValueError("individual indices start at 1")
        self.ensure_individuals(i)
        return self._individuals[i - 1]

    def ensure_heights(self):
        """Materialize stick heights once.

        Height j is the coalescent time of the drop from j+1 to j blocks:
        a sum of Exp(k(k-1)/2) holding times for k > j.  The sum is cut at
        K terms chosen from height_tol, and the cut tail is replaced by its
        exact mean 2/K so the error is centered.
        """
        if self._heights is not None:
            return
        K = _height_count(self.height_tol)
        k = np.arange(2, K + 1, dtype=float)
        holds = exp_inverse(self._height_rng, K - 1) / (k * (k - 1.0) / 2.0)
        self._heights = np.cumsum(holds[::-1])[::-1] + 2.0 / K

    def stick_height(self, j: int) -> float:
        self.ensure_heights()
        if j < 1 or j > self._heights.shape[0]:
            raise ValueError("height index out of the materialized range")
        return float(self._heights[j - 1])

    def count_at_least(self, t: float) -> int:
        """How many sticks stand at height >= t.  Heights decrease with the
        index, so these are exactly sticks 1..m."""
        self.ensure_heights()
        if t <= self._heights[-1]:
            raise ValueError(
                "time below the resolved height floor; lower height_tol")
        return int(np.searchsorted(-self._heights, -t, side="right"))


def sample_stick_field(num_sticks: int, num_individuals: int,
                       rng: np.random.Generator, *,
                       height_tol: float = 1e-9) -> StickField:
    """Fresh field with the given numbers of positions already drawn.

    The field stays lazily extendable past both counts.
    """
    if num_sticks < 1 or num_individuals < 1:
        raise ValueError("need at least one stick and one individual")
    field = StickField(rng, height_tol=height_tol)
    field.ensure_sticks(num_sticks)
    field.ensure_individuals(num_individuals)
    return field


def partition_at(field: StickField, t: float, n: int) -> Partition:
    """Block structure of the first n individuals at coalescent time t."""
    if not (t >= 0.0 and math.isfinite(t)):
        raise ValueError("need a finite time >= 0")
    if n < 1:
        raise ValueError("need n >= 1")
    if t == 0.0:
        # Every stick separates at time zero.
        return Partition(n, [frozenset({i}) for i in range(1, n + 1)])
    m = field.count_at_least(t)
    field.ensure_sticks(m)
    field.ensure_individuals(n)
    separators = sorted(field._sticks[:m])
    regions = defaultdict(set)
    for i in range(1, n + 1):
        loc = field._individuals[i - 1]
        regions[bisect_right(separators, loc)].add(i)
    return Partition(n, [frozenset(b) for b in regions.values()])


def identify_lineage_rank(field: StickField, n: int, *,
                          max_rank: int | None = None) -> int:
    """Rank of individual n's lineage when it arrives: the smallest k such
    that after planting sticks 1..k, individual n sits alone among the first
    n individuals in its stick interval."""
    if n < 2:
        raise ValueError("need n >= 2; the first lineage has no finite rank")
    field.ensure_individuals(n)
    target = field._individuals[n - 1]
    others = sorted(field._individuals[i] for i in range(n - 1))
    sticks: list = []
    k = 0
    while True:
        k += 1
        if max_rank is not None and k > max_rank:
            raise RuntimeError(f"not resolved within {max_rank} sticks")
        insort(sticks, field.stick_location(k))
        i = bisect_left(sticks, target)
        lo = sticks[i - 1] if i > 0 else 0.0
        hi = sticks[i] if i < len(sticks) else 1.0
        if bisect_left(others, hi) == bisect_right(others, lo):
            return k


class _PlantingBoard:
    """Interleaved positions of everything planted so far, in location order."""

    def __init__(self, field: StickField):
        self.field = field
        self.locations: list = []
        self.kinds: list = []
        self.n_sticks = 0
        self.n_individuals = 0

    def _insert(self, loc: float, kind: int):
        i = bisect_left(self.locations, loc)
        self.locations.insert(i, loc)
        self.kinds.insert(i, kind)

    def plant_stick(self) -> float:
        self.n_sticks += 1
        loc = self.field.stick_location(self.n_sticks)
        self._insert(loc, _STICK)
        return loc

    def plant_individual(self) -> float:
        self.n_individuals += 1
        loc = self.field.individual_location(self.n_individuals)
        self._insert(loc, _INDIVIDUAL)
        return loc

    def flanked_by_individuals(self, loc: float) -> bool:
        """Both immediate neighbors of the item at loc are individuals.
        The interval boundary counts as not an individual."""
        i = bisect_left(self.locations, loc)
        if i == 0 or self.kinds[i - 1] != _INDIVIDUAL:
            return False
        return i + 1 < len(self.locations) and self.kinds[i + 1] == _INDIVIDUAL


def identify_ra(field: StickField, max_pairs: int, *,
                max_individuals: int | None = None,
                max_sticks: int | None = None) -> list:
    """Read the record chain off the planting order of the field.

    A newly planted stick starts a record hunt when it is not already
    walled in by individuals; the hunt ends once individuals close in on
    both sides, and the closing individual's index is the record position.
    Returns up to max_pairs states; hitting either cap returns the pairs
    certified so far (a censored prefix).
    """
    if max_pairs < 1:
        raise ValueError("need max_pairs >= 1")
    board = _PlantingBoard(field)
    pairs: list = []
    anchor = board.plant_stick()
    while len(pairs) < max_pairs:
        while not board.flanked_by_individuals(anchor):
            if max_individuals is not None and board.n_individuals >= max_individuals:
                return pairs
            board.plant_individual()
        pairs.append(RAState(board.n_sticks, board.n_individuals))
        if len(pairs) == max_pairs:
            break
        while True:
            if max_sticks is not None and board.n_sticks >= max_sticks:
                return pairs
            anchor = board.plant_stick()
            if not board.flanked_by_individuals(anchor):
                break
    return pairs


def _interval_bounds(separators: list, loc: float) -> tuple:
    i = bisect_right(separators, loc)
    lo = separators[i - 1] if i > 0 else 0.0
    hi = separators[i] if i < len(separators) else 1.0
    return lo, hi


def _crowded(sorted_locs: list, lo: float, hi: float) -> bool:
    return bisect_left(sorted_locs, hi) > bisect_right(sorted_locs, lo)


def match_rank_to_individual(field: StickField, rank: int, *,
                             max_individuals: int | None = None) -> int:
    """The individual whose lineage carries the given rank.

    With sticks 1..rank planted, individuals are planted one at a time
    until the first one that lands alone in its stick interval while the
    interval it would occupy among sticks 1..rank-1 already holds an
    earlier individual.  That arrival is separated by stick `rank` and by
    no shorter prefix of sticks, so its length is the rank-th tallest.
    Inverse of identify_lineage_rank in every realization.
    """
    if rank < 1:
        raise ValueError("rank must be >= 1")
    field.ensure_sticks(rank)
    sticks_full = sorted(field._sticks[:rank])
    sticks_prev = sorted(field._sticks[:rank - 1])
    earlier: list = []
    m = 0
    while True:
        m += 1
        if max_individuals is not None and m > max_individuals:
            raise RuntimeError(f"no match within {max_individuals} individuals")
        loc = field.individual_location(m)
        alone = not _crowded(earlier, *_interval_bounds(sticks_full, loc))
        was_joined = _crowded(earlier, *_interval_bounds(sticks_prev, loc))
        if alone and was_joined:
            return m
        insort(earlier, loc)


def batch_first_record(replicates: int, rng: np.random.Generator,
                       cap: int) -> np.ndarray:
    """First-record positions for many independent fields at once.

    Only the first stick and individuals up to `cap` matter: the first
    record closes at the first individual landing on the opposite side of
    stick 1 from individual 1.  Entries are 0 where all `cap` individuals
    fell on one side (the position exceeds cap).  Memory is replicates * cap
    doubles, so chunk large runs.
    """
    if cap < 2:
        raise ValueError("need cap >= 2")
    u = rng.random(replicates)
    v = rng.random((replicates, cap))
    sides = v < u[:, None]
    flipped = sides != sides[:, :1]
    found = flipped.any(axis=1)
    first = flipped.argmax(axis=1)
    return np.where(found, first + 1, 0).astype(np.int64)


def field_to_csv(field: StickField, num_sticks: int, num_individuals: int, *,
                 include_heights: bool = False) -> str:
    field.ensure_sticks(num_sticks)
    field.ensure_individuals(num_individuals)
    if include_heights:
        lines = ["kind,index,location,height"]
        for j in range(1, num_sticks + 1):
            lines.append(
                f"stick,{j},{field.stick_location(j)!r},{field.stick_height(j)!r}")
        for i in range(1, num_individuals + 1):
            lines.append(f"individual,{i},{field.individual_location(i)!r},")
    else:
        lines = ["kind,index,location"]
        for j in range(1, num_sticks + 1):
            lines.append(f"stick,{j},{field.stick_location(j)!r}")
        for i in range(1, num_individuals + 1):
            lines.append(f"individual,{i},{field.individual_location(i)!r}")
    return "\n".join(lines) + "\n"
