"""The record chain of lineage lengths: exact transition laws and samplers.

State (r, a): the current record holder is individual a and its length has
rank r among all lengths seen so far.  Both coordinates strictly increase and
a - r >= 1 always.  Closed-form pmfs and tails are available in two algebraic
forms, with independent urn-process oracles in exact rational arithmetic for
cross-checking, and exact inverse-CDF samplers.

Scalar law evaluation takes an RAState; the bulk kernels (the _vector and
_batch functions) take raw (r, a) coordinates so callers can tabulate without
building state objects in a loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .numerics import log_gamma_diff

__all__ = [
    "EXACT_LIMIT",
    "RAState",
    "RAPath",
    "sample_a1",
    "r_pmf",
    "r_tail",
    "r_pmf_vector",
    "r_tail_vector",
    "r_pmf_exact",
    "r_tail_exact",
    "a_pmf",
    "a_tail",
    "a_pmf_exact",
    "a_tail_exact",
    "sample_r_next",
    "sample_r_next_batch",
    "sample_a_next",
    "step",
    "sample_path",
    "sample_paths_batch",
    "urn_oracle_r",
    "urn_oracle_a",
    "path_to_csv",
]

# States are kept in exact integer arithmetic up to this bound (the unsigned
# 128-bit range); past it the chain continues in floating point and the state
# carries exact=False.
EXACT_LIMIT = 2**127 - 1

# Largest position index for which the scalar sampler confirms its
# log-gamma bisection result with the exact sequential tail recursion.
_VERIFY_LIMIT = 10**6


@dataclass
class RAState:
    """One record: rank r of the record length, position a of its holder."""

    r: int
    a: int
    exact: bool = True

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("rank must be >= 1")
        if self.a - self.r < 1:
            raise ValueError("need a - r >= 1")


@dataclass
class RAPath:
    """Successive record states (R_1, A_1), (R_2, A_2), ..."""

    states: list

    def r_array(self) -> np.ndarray:
        return np.array([s.r for s in self.states], dtype=float)

    def a_array(self) -> np.ndarray:
        return np.array([s.a for s in self.states], dtype=float)


def _check_state(r, a):
    if r < 1:
        raise ValueError("rank must be >= 1")
    if a - r < 1:
        raise ValueError("need a - r >= 1")


def sample_a1(rng: np.random.Generator, size: int | None = None):
    """Position of the first record, pmf 2/(n(n+1)) on n >= 2.

    Inverse CDF on the tail P(A_1 >= n) = 2/n: a = floor(2/u).  u = 0 is
    redrawn; float uniforms are >= 2^-53 so the result fits in an int64.
    """
    if size is None:
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        return int(2.0 / u)
    u = rng.random(size)
    bad = u == 0.0
    while bad.any():
        u[bad] = rng.random(int(bad.sum()))
        bad = u == 0.0
    return np.floor(2.0 / u).astype(np.int64)


# ---------------------------------------------------------------------------
# rank transition (the next record's rank, given state (r, a))


def r_pmf(state: RAState, x, form: str = "product") -> float:
    """P(next rank = r + x) from the given state, for x in 1..a-r (else 0).

    Two algebraic forms of the same law are kept deliberately:
    "product" multiplies the absorption factor (2r+2x)/(a+r+x) into the
    survival product, while "binomial" evaluates the equivalent
    binomial-coefficient ratio C(2a, a-r-x)/C(2a, a-r-1) scaled by
    (2r+2x)/(a+r+1), exactly for a <= 1e4 and as a falling-factorial ratio
    beyond.  Their agreement is itself a verified invariant.
    """
    r, a = state.r, state.a
    if x < 1 or x > a - r:
        return 0.0
    if form == "product":
        acc = (2.0 * r + 2.0 * x) / (a + r + x)
        for k in range(1, x):
            acc *= (a - r - k) / (a + r + k)
        return acc
    if form == "binomial":
        if a <= 10**4:
            ratio = Fraction(math.comb(2 * a, a - r - x), math.comb(2 * a, a - r - 1))
            return float(Fraction(2 * r + 2 * x, a + r + 1) * ratio)
        acc = (2.0 * r + 2.0 * x) / (a + r + 1)
        for k in range(1, x):
            acc *= (a - r - k) / (a + r + k + 1)
        return acc
    raise ValueError(f"unknown form {form!r}")


def r_tail(state: RAState, x) -> float:
    """P(next rank >= r + x); equals 1 for x <= 1, 0 past the support."""
    r, a = state.r, state.a
    if x <= 1:
        return 1.0
    if x > a - r:
        return 0.0
    acc = 1.0
    for k in range(1, x):
        acc *= (a - r - k) / (a + r + k)
    return acc


def r_pmf_vector(r, a, max_x: int | None = None) -> np.ndarray:
    """pmf over x = 1..min(a-r, max_x), via one cumulative product."""
    _check_state(r, a)
    width = a - r if max_x is None else min(a - r, max_x)
    k = np.arange(1, width, dtype=float)
    survival = np.concatenate([[1.0], np.cumprod((a - r - k) / (a + r + k))])
    x = np.arange(1, width + 1, dtype=float)
    return survival * (2.0 * r + 2.0 * x) / (a + r + x)


def r_tail_vector(r, a, max_x: int | None = None) -> np.ndarray:
    """Tails for x = 1..min(a-r, max_x)+1; over the full support the final
    entry is exactly 0."""
    _check_state(r, a)
    width = a - r if max_x is None else min(a - r, max_x)
    k = np.arange(1, width + 1, dtype=float)
    return np.concatenate([[1.0], np.cumprod((a - r - k) / (a + r + k))])


def r_pmf_exact(state: RAState, x) -> Fraction:
    """Product-form pmf as an exact rational."""
    r, a = state.r, state.a
    if x < 1 or x > a - r:
        return Fraction(0)
    acc = Fraction(2 * r + 2 * x, a + r + x)
    for k in range(1, x):
        acc *= Fraction(a - r - k, a + r + k)
    return acc


def r_tail_exact(state: RAState, x) -> Fraction:
    r, a = state.r, state.a
    if x <= 1:
        return Fraction(1)
    if x > a - r:
        return Fraction(0)
    acc = Fraction(1)
    for k in range(1, x):
        acc *= Fraction(a - r - k, a + r + k)
    return acc


def _log_r_tail(r, a, x):
    """log of the rank-transition tail, stable for astronomically large a."""
    return log_gamma_diff(a - r, x - 1.0) - log_gamma_diff(a + r + x, x - 1.0)


def sample_r_next(state: RAState, rng: np.random.Generator) -> int:
    """Exact draw of the next rank.

    Finds the smallest x with tail(x+1) <= u by exponential galloping plus
    bisection on log-gamma tail evaluations; a u exactly equal to a tail
    value resolves to the smaller x.  For a <= 1e6 the result is confirmed
    (and corrected if the log evaluation put the boundary a rounding error
    off) by the sequential ratio recursion tail(x+1) = tail(x) (a-r-x)/(a+r+x).
    """
    r, a = state.r, state.a
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    max_x = a - r
    if max_x == 1:
        return r + 1

    log_u = math.log(u)

    if a <= _VERIFY_LIMIT:
        # Direct lgamma differences are cheap and accurate to ~1e-9 here;
        # the sequential recursion below settles any boundary rounding.
        def pred(x):
            log_tail = (math.lgamma(a - r) - math.lgamma(a - r - x)
                        - math.lgamma(a + r + x + 1) + math.lgamma(a + r + 1))
            return log_tail <= log_u
    else:
        def pred(x):
            return _log_r_tail(float(r), float(a), float(x) + 1.0) <= log_u

    lo, hi = 1, 1
    while hi < max_x and not pred(hi):
        lo = hi + 1
        hi = min(2 * hi, max_x)
    while lo < hi:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid + 1

    if a <= _VERIFY_LIMIT:
        tail = 1.0
        x = 1
        while x <= max_x:
            tail *= (a - r - x) / (a + r + x)  # tail(x+1)
            if tail <= u:
                break
            x += 1
        lo = x
    return r + lo


def sample_r_next_batch(r, a, rng: np.random.Generator, size: int) -> np.ndarray:
    """Many exact draws of the next rank from one state (r, a).

    Precomputes the full tail vector with the same sequential recursion the
    scalar sampler verifies against, then inverts every uniform with one
    searchsorted.  Ties resolve to the smaller x, matching the scalar path.
    """
    _check_state(r, a)
    if a - r > 10**7:
        raise ValueError("support too wide to tabulate; draw scalars instead")
    tails = r_tail_vector(r, a)  # tails[i] = tail(i+1), decreasing, ends at 0
    u = rng.random(size)
    bad = u == 0.0
    while bad.any():
        u[bad] = rng.random(int(bad.sum()))
        bad = u == 0.0
    x = np.searchsorted(-tails, -u, side="left")
    return r + x.astype(np.int64)


# ---------------------------------------------------------------------------
# position transition (the next record's position, given a and the new rank)


def _check_rank_step(state, r_next):
    if not state.r < r_next <= state.a:
        raise ValueError("next rank must lie in (r, a]")


def a_pmf(state: RAState, r_next, y, form: str = "closed") -> float:
    """P(next position = a + y), with c = a + r_next.

    "closed" evaluates c / ((c+y-1)(c+y)); "product" multiplies the
    success factor 1/(c+y) into the sequential survival product
    prod_{k<y} (c+k-1)/(c+k), which telescopes to the same value.
    """
    _check_rank_step(state, r_next)
    c = state.a + r_next
    if y < 1:
        return 0.0
    if form == "closed":
        return c / ((c + y - 1.0) * (c + y))
    if form == "product":
        acc = 1.0 / (c + y)
        for k in range(1, y):
            acc *= (c + k - 1.0) / (c + k)
        return acc
    raise ValueError(f"unknown form {form!r}")


def a_tail(state: RAState, r_next, y) -> float:
    """P(next position >= a + y) = c/(c+y-1) for y >= 1."""
    _check_rank_step(state, r_next)
    c = state.a + r_next
    if y <= 1:
        return 1.0
    return c / (c + y - 1.0)


def a_pmf_exact(state: RAState, r_next, y) -> Fraction:
    _check_rank_step(state, r_next)
    c = state.a + r_next
    if y < 1:
        return Fraction(0)
    return Fraction(c, (c + y - 1) * (c + y))


def a_tail_exact(state: RAState, r_next, y) -> Fraction:
    _check_rank_step(state, r_next)
    c = state.a + r_next
    if y <= 1:
        return Fraction(1)
    return Fraction(c, c + y - 1)


def sample_a_next(state: RAState, r_next, rng: np.random.Generator):
    """Exact draw of the next position: a + floor(c(1-u)/u) + 1.

    The closed form inverts the tail c/(c+y-1).  Integer inputs give an
    integer result; a draw whose intermediate overflows floating point
    (u below roughly c/1e308) is redrawn.
    """
    _check_rank_step(state, r_next)
    a = state.a
    c = a + r_next
    while True:
        u = rng.random()
        if u == 0.0:
            continue
        z = float(c) * (1.0 - u) / u
        if math.isfinite(z):
            break
    if isinstance(a, (int, np.integer)):
        return a + int(z) + 1
    return a + math.floor(z) + 1.0


def step(state: RAState, rng: np.random.Generator) -> RAState:
    """One transition of the record chain: rank first, then position."""
    r_next = sample_r_next(state, rng)
    a_next = sample_a_next(state, r_next, rng)
    exact = state.exact and isinstance(a_next, int) and a_next <= EXACT_LIMIT
    if state.exact and not exact:
        # Flagged continuation: past the exact range the state is carried in
        # double precision and all tail evaluations go through log-gamma.
        return RAState(float(r_next), float(a_next), False)
    return RAState(r_next, a_next, exact)


def sample_path(start: RAState | None, steps: int,
                rng: np.random.Generator) -> RAPath:
    """Record path of the given number of transitions.

    start = None begins at the first record, rank 1 with position drawn
    from sample_a1.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if start is None:
        start = RAState(1, max(2, sample_a1(rng)))
    states = [start]
    for _ in range(steps):
        states.append(step(states[-1], rng))
    return RAPath(states)


def _batch_r_step(r, a, u):
    """Vectorized bisection for the next rank across many heterogeneous
    states; all tail evaluations through log-gamma."""
    max_x = a - r
    lo = np.ones_like(r)
    hi = max_x.copy()
    log_u = np.log(u)
    while True:
        open_ = lo < hi
        if not open_.any():
            break
        mid = np.floor((lo + hi) / 2.0)
        cond = _log_r_tail(r, a, mid + 1.0) <= log_u
        hi = np.where(open_ & cond, mid, hi)
        lo = np.where(open_ & ~cond, mid + 1.0, lo)
    return r + lo


def sample_paths_batch(num_paths: int, steps: int, rng: np.random.Generator,
                       start=(1, 2)):
    """Advance many record paths in lockstep; returns (R, A) float arrays of
    shape (steps+1, num_paths).

    Intended for statistical verification at scale: state values are floats
    (exact as integers up to 2^53, the double-precision continuation beyond),
    and the rank step uses the log-gamma bisection throughout.  Per step it
    draws one uniform array for ranks, then one for positions.
    """
    r0, a0 = start
    if a0 - r0 < 1:
        raise ValueError("need a - r >= 1 at the start")
    r = np.full(num_paths, float(r0))
    a = np.full(num_paths, float(a0))
    R = np.empty((steps + 1, num_paths))
    A = np.empty((steps + 1, num_paths))
    R[0], A[0] = r, a
    for i in range(1, steps + 1):
        u1 = rng.random(num_paths)
        u1[u1 == 0.0] = 0.5
        r = _batch_r_step(r, a, u1)
        u2 = rng.random(num_paths)
        u2[u2 == 0.0] = 0.5
        c = a + r
        y = np.floor(np.minimum(c * (1.0 - u2) / u2, 1e300)) + 1.0
        a = a + y
        R[i], A[i] = r, a
    return R, A


# ---------------------------------------------------------------------------
# urn oracles: the planting process reduced to category counts, in exact
# rational arithmetic, independent of the closed forms above


def urn_oracle_r(state: RAState, *, max_a: int = 12) -> list:
    """Exact rank-transition law by enumerating the stick-planting urn.

    Subintervals fall into three categories: 2r flanking an existing relevant
    stick, 2 touching the boundary, and a - r - 1 bounded by individuals on
    both sides.  A stick landing in the last kind converts that subinterval
    into a flanking pair and raises the total by one; landing anywhere else
    absorbs.  Returns P(x) for x = 1..a-r as Fractions.
    """
    r, a = state.r, state.a
    if a > max_a:
        raise ValueError(f"urn enumeration capped at a = {max_a}")
    flank = 2 * r
    boundary = 2
    inner = a - r - 1
    total = a + r + 1
    surviving = Fraction(1)
    probs = []
    for _ in range(1, a - r + 1):
        probs.append(surviving * Fraction(flank + boundary, total))
        surviving *= Fraction(inner, total)
        inner -= 1
        flank += 2
        total += 1
    return probs


def urn_oracle_a(state: RAState, r_next, y_cutoff: int, *,
                 max_c: int = 1000) -> tuple:
    """Exact position-transition law by enumerating the individual-planting
    urn: one target gap among c + y subintervals at attempt y, each failure
    adding a subinterval.  Returns (probs for y = 1..y_cutoff, exact tail
    P(y > y_cutoff))."""
    _check_rank_step(state, r_next)
    c = state.a + r_next
    if c > max_c:
        raise ValueError(f"urn enumeration capped at a + r_next = {max_c}")
    if y_cutoff < 1:
        raise ValueError("need a cutoff >= 1")
    surviving = Fraction(1)
    probs = []
    for y in range(1, y_cutoff + 1):
        total = c + y
        probs.append(surviving * Fraction(1, total))
        surviving *= Fraction(total - 1, total)
    return probs, surviving


def path_to_csv(path: RAPath) -> str:
    lines = ["i,R,A,lnA"]
    for i, s in enumerate(path.states, start=1):
        lines.append(f"{i},{s.r},{s.a},{math.log(s.a)!r}")
    return "\n".join(lines) + "\n"
