"""Record-chain laws: closed forms vs exact rationals, urn oracles, samplers."""

import math
from fractions import Fraction

import numpy as np
import pytest

from seqcoal import ra_chain
from seqcoal.ra_chain import (EXACT_LIMIT, RAPath, RAState, a_pmf, a_pmf_exact,
                              a_tail, a_tail_exact, path_to_csv, r_pmf,
                              r_pmf_exact, r_pmf_vector, r_tail, r_tail_exact,
                              r_tail_vector, sample_a1, sample_a_next,
                              sample_path, sample_paths_batch, sample_r_next,
                              sample_r_next_batch, step, urn_oracle_a,
                              urn_oracle_r)
from seqcoal.stats import chi2_gof
from seqcoal.streams import stream


class ScriptedRNG:
    """Returns pre-chosen uniforms in order; fails loudly when exhausted."""

    def __init__(self, values):
        self.values = list(values)

    def random(self, size=None):
        if size is None:
            return self.values.pop(0)
        return np.array([self.values.pop(0) for _ in range(int(size))])


def test_state_validation():
    st = RAState(1, 2)
    assert st.exact
    RAState(5, 6)
    with pytest.raises(ValueError):
        RAState(0, 5)
    with pytest.raises(ValueError):
        RAState(3, 3)


def test_path_arrays():
    path = RAPath([RAState(1, 2), RAState(2, 5)])
    assert path.r_array().tolist() == [1.0, 2.0]
    assert path.a_array().tolist() == [2.0, 5.0]


# --- the first record -------------------------------------------------------


def test_sample_a1_inversion_and_zero_redraw():
    assert sample_a1(ScriptedRNG([0.5])) == 4
    assert sample_a1(ScriptedRNG([0.25])) == 8
    assert sample_a1(ScriptedRNG([0.0, 0.5])) == 4
    assert sample_a1(ScriptedRNG([0.9])) == 2


def test_sample_a1_array():
    vals = sample_a1(stream(20, 0), size=50_000)
    assert vals.dtype == np.int64
    assert vals.min() >= 2
    counts = np.zeros(50, dtype=np.int64)
    for v in vals:
        counts[min(int(v), 51) - 2] += 1
    probs = [2.0 / (n * (n + 1.0)) for n in range(2, 51)]
    probs.append(1.0 - math.fsum(probs))
    rep = chi2_gof(counts, probs, seed=20)
    assert rep.passed, rep.to_dict()


# --- rank transition --------------------------------------------------------


def test_r_pmf_smallest_states():
    assert r_pmf(RAState(1, 2), 1) == 1.0
    assert r_pmf(RAState(1, 3), 1) == pytest.approx(0.8)
    assert r_pmf(RAState(1, 3), 2) == pytest.approx(0.2)
    assert r_pmf(RAState(1, 3), 0) == 0.0
    assert r_pmf(RAState(1, 3), 3) == 0.0
    with pytest.raises(ValueError):
        r_pmf(RAState(1, 3), 1, form="magic")


def test_r_pmf_exact_matches_urn_enumeration():
    # the urn oracle evolves subinterval categories directly; no factor of
    # the closed form appears in it
    for r in range(1, 8):
        for a in range(r + 1, 10):
            law = urn_oracle_r(RAState(r, a))
            assert sum(law, Fraction(0)) == 1
            for x, want in enumerate(law, start=1):
                assert r_pmf_exact(RAState(r, a), x) == want
    with pytest.raises(ValueError):
        urn_oracle_r(RAState(1, 40))


def test_r_pmf_forms_agree():
    for st in [RAState(1, 5), RAState(3, 17), RAState(10, 200)]:
        for x in range(1, st.a - st.r + 1):
            p = r_pmf(st, x, form="product")
            b = r_pmf(st, x, form="binomial")
            assert b == pytest.approx(p, rel=1e-12)
    # past the exact-binomial range the falling-factorial branch takes over
    st = RAState(3, 10**5)
    for x in (1, 2, 7, 40):
        assert r_pmf(st, x, form="binomial") == pytest.approx(
            r_pmf(st, x, form="product"), rel=1e-12)


def test_r_tail_values_and_edges():
    st = RAState(2, 7)
    assert r_tail(st, 1) == 1.0
    assert r_tail(st, 0) == 1.0
    assert r_tail(st, 6) == 0.0
    assert r_tail_exact(st, 5) == Fraction(1, 715)
    assert Fraction(1, math.comb(13, 4)) == Fraction(1, 715)


def test_r_tail_binomial_ratio_identity():
    # tail(x) = C(2a-1, a-r-x) / C(2a-1, a-r-1), checked in exact arithmetic
    for r, a in [(1, 2), (1, 9), (3, 11), (7, 30), (12, 25)]:
        st = RAState(r, a)
        for x in range(1, a - r + 1):
            want = Fraction(math.comb(2 * a - 1, a - r - x),
                            math.comb(2 * a - 1, a - r - 1))
            assert r_tail_exact(st, x) == want


def test_r_vector_forms_match_scalars():
    r, a = 3, 40
    pmf = r_pmf_vector(r, a)
    tails = r_tail_vector(r, a)
    assert pmf.shape == (a - r,)
    assert tails.shape == (a - r + 1,)
    assert tails[0] == 1.0
    assert tails[-1] == 0.0
    st = RAState(r, a)
    for x in range(1, a - r + 1):
        assert pmf[x - 1] == pytest.approx(r_pmf(st, x), rel=1e-13)
        assert tails[x - 1] == pytest.approx(r_tail(st, x), rel=1e-13)
    assert math.fsum(pmf.tolist()) == pytest.approx(1.0, abs=1e-12)
    # truncation keeps the leading entries unchanged
    head = r_pmf_vector(r, a, max_x=5)
    assert head.shape == (5,)
    assert np.array_equal(head, pmf[:5])
    assert r_tail_vector(r, a, max_x=5).shape == (6,)


def test_log_tail_matches_exact_recursion():
    r, a, x = 123, 10**7, 500
    want = r_tail_exact(RAState(r, a), x)
    got = ra_chain._log_r_tail(float(r), float(a), float(x))
    ref = math.log(want.numerator) - math.log(want.denominator)
    assert got == pytest.approx(ref, rel=1e-12)


# --- samplers ---------------------------------------------------------------


def test_sample_r_next_boundary_resolution():
    # from (1,3): tail(2) = 1/5; u equal to a tail value takes the smaller x
    assert sample_r_next(RAState(1, 3), ScriptedRNG([0.2])) == 2
    assert sample_r_next(RAState(1, 3), ScriptedRNG([0.19])) == 3
    assert sample_r_next(RAState(1, 3), ScriptedRNG([0.21])) == 2
    # forced transition when only one rank is reachable
    assert sample_r_next(RAState(1, 2), ScriptedRNG([0.77])) == 2


def test_sample_r_next_batch_matches_scalar_stream():
    r, a = 2, 9
    batch = sample_r_next_batch(r, a, stream(21, 0), 500)
    rng = stream(21, 0)
    scalars = [sample_r_next(RAState(r, a), rng) for _ in range(500)]
    assert batch.tolist() == scalars


def test_sample_r_next_frequencies():
    draws = sample_r_next_batch(1, 5, stream(21, 1), 20_000)
    counts = np.bincount(draws, minlength=6)[2:6]
    probs = r_pmf_vector(1, 5)
    rep = chi2_gof(counts, probs, seed=21)
    assert rep.passed, rep.to_dict()


def test_sample_a_next_inversion():
    prior = RAState(1, 3)
    # c = 5; u = 0.5 -> offset floor(5) + 1
    assert sample_a_next(prior, 2, ScriptedRNG([0.5])) == 9
    # u near 1 -> smallest possible position a + 1
    assert sample_a_next(prior, 2, ScriptedRNG([0.999999])) == 4
    assert sample_a_next(prior, 2, ScriptedRNG([0.0, 0.5])) == 9
    with pytest.raises(ValueError):
        sample_a_next(prior, 1, ScriptedRNG([0.5]))
    with pytest.raises(ValueError):
        sample_a_next(prior, 4, ScriptedRNG([0.5]))


def test_sample_a_next_tail_frequencies():
    prior = RAState(1, 3)
    rng = stream(22, 0)
    draws = np.array([sample_a_next(prior, 2, rng) for _ in range(20_000)])
    assert draws.min() >= 4
    counts = np.zeros(30, dtype=np.int64)
    for v in draws:
        counts[min(int(v) - 4, 29)] += 1
    probs = [float(a_pmf_exact(prior, 2, y)) for y in range(1, 30)]
    probs.append(float(a_tail_exact(prior, 2, 30)))
    rep = chi2_gof(counts, probs, seed=22)
    assert rep.passed, rep.to_dict()


# --- position transition ----------------------------------------------------


def test_a_pmf_frozen_values_and_forms():
    prior = RAState(1, 2)
    assert a_pmf(prior, 2, 1) == pytest.approx(0.2)
    assert a_pmf_exact(prior, 2, 1) == Fraction(1, 5)
    assert a_tail_exact(prior, 2, 2) == Fraction(4, 5)
    assert a_pmf(prior, 2, 0) == 0.0
    assert a_tail(prior, 2, 1) == 1.0
    for y in (1, 2, 3, 10, 57):
        closed = a_pmf(prior, 2, y, form="closed")
        product = a_pmf(prior, 2, y, form="product")
        assert product == pytest.approx(closed, rel=1e-13)
    with pytest.raises(ValueError):
        a_pmf(prior, 2, 1, form="magic")


def test_a_pmf_exact_matches_urn_enumeration():
    prior = RAState(1, 2)
    probs, tail = urn_oracle_a(prior, 2, 5)
    assert probs == [Fraction(1, 5), Fraction(2, 15), Fraction(2, 21),
                     Fraction(1, 14), Fraction(1, 18)]
    assert tail == Fraction(4, 9)
    assert tail == a_tail_exact(prior, 2, 6)
    for y, p in enumerate(probs, start=1):
        assert p == a_pmf_exact(prior, 2, y)
    # a second state, deeper in the chain
    prior = RAState(4, 11)
    probs, tail = urn_oracle_a(prior, 7, 40)
    assert sum(probs, Fraction(0)) + tail == 1
    for y, p in enumerate(probs, start=1):
        assert p == a_pmf_exact(prior, 7, y)
    with pytest.raises(ValueError):
        urn_oracle_a(RAState(1, 2000), 2, 5)
    with pytest.raises(ValueError):
        urn_oracle_a(RAState(1, 2), 2, 0)


# --- whole-chain stepping ---------------------------------------------------


def test_step_scripted():
    nxt = step(RAState(1, 3), ScriptedRNG([0.2, 0.5]))
    assert nxt == RAState(2, 9)
    assert nxt.exact
    assert type(nxt.r) is int and type(nxt.a) is int


def test_step_keeps_big_integers_exact():
    st = RAState(1, 10**20)
    nxt = step(st, stream(23, 0))
    assert nxt.exact
    assert type(nxt.a) is int
    assert nxt.a > st.a
    assert nxt.a - nxt.r >= 1


def test_step_flags_overflow_continuation():
    st = RAState(1, EXACT_LIMIT - 5)
    # u2 = 0.25 multiplies the position by roughly 7, crossing the bound
    nxt = step(st, ScriptedRNG([0.9, 0.25]))
    assert not nxt.exact
    assert isinstance(nxt.a, float)
    assert nxt.a > float(EXACT_LIMIT)
    # the float continuation keeps stepping
    again = step(nxt, ScriptedRNG([0.7, 0.5]))
    assert not again.exact
    assert again.a > nxt.a and again.r > nxt.r


def test_sample_path_structure():
    path = sample_path(RAState(1, 2), 12, stream(24, 0))
    assert len(path.states) == 13
    for s0, s1 in zip(path.states, path.states[1:]):
        assert s1.r > s0.r
        assert s1.a > s0.a
        assert s1.a - s1.r >= 1
    with pytest.raises(ValueError):
        sample_path(RAState(1, 2), -1, stream(24, 1))


def test_sample_path_default_start():
    path = sample_path(None, 0, ScriptedRNG([0.4]))
    assert path.states == [RAState(1, 5)]


def test_sample_paths_batch_matches_scalar_path():
    steps = 8
    R, A = sample_paths_batch(1, steps, stream(25, 0), start=(1, 2))
    assert R.shape == (steps + 1, 1)
    path = sample_path(RAState(1, 2), steps, stream(25, 0))
    assert R[:, 0].tolist() == [float(s.r) for s in path.states]
    assert A[:, 0].tolist() == [float(s.a) for s in path.states]


def test_sample_paths_batch_shapes_and_invariants():
    R, A = sample_paths_batch(64, 10, stream(25, 1), start=(1, 2))
    assert R.shape == A.shape == (11, 64)
    assert np.all(np.diff(R, axis=0) > 0)
    assert np.all(np.diff(A, axis=0) > 0)
    assert np.all(A - R >= 1)
    with pytest.raises(ValueError):
        sample_paths_batch(4, 3, stream(25, 2), start=(2, 2))


def test_path_csv_header():
    path = sample_path(RAState(1, 2), 3, stream(26, 0))
    lines = path_to_csv(path).splitlines()
    assert lines[0] == "i,R,A,lnA"
    assert lines[1].startswith("1,1,2,")
    assert float(lines[1].split(",")[3]) == math.log(2.0)


def test_exact_limit_is_unsigned_128_bit_bound():
    assert EXACT_LIMIT == 2**127 - 1
