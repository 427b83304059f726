from fractions import Fraction as F

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import brute_opt
from selfish_packing.analysis import (
    SPOA_TARGET,
    config_ratio,
    decimal,
    strong_occupancy_audit,
    lk_series,
    occupancy_audit,
    optimal_bins,
    parametric_audit,
    parametric_bound,
    poa_ratio,
    ratio_lemma_bound,
    check_ratio_lemma,
    spoa_case_big,
    spoa_case_medium,
    spoa_constant,
    square_bound_audit,
)
from selfish_packing.errors import InstanceTooLarge, NotAnEquilibrium, PreconditionViolated
from selfish_packing.game import EXACT, NFDH, Configuration, MovePolicy, run_dynamics, run_strong_dynamics
from selfish_packing.geometry import Item, Rect, packing_is_valid
from selfish_packing.instances import gen_random, gen_square_poa, gen_strong_poa, gen_two_bad_bins, gen_unbounded_poa

pos = st.fractions(min_value=F(1, 1000), max_value=100, max_denominator=1000)
unit = st.fractions(min_value=F(1, 1000), max_value=F(999, 1000), max_denominator=1000)


def oracle_for(exact):
    return EXACT if exact else NFDH


class TestLk:
    def test_small_values(self):
        assert lk_series(2) == 1
        assert lk_series(3) == F(14, 9)
        assert lk_series(4) == F(803, 441)

    def test_monotone_and_bounded(self):
        prev = F(0)
        for k in range(2, 201):
            v = lk_series(k)
            assert prev < v < F(20761, 10000)
            prev = v

    def test_frozen(self):
        assert decimal(lk_series(20), 10) == "2.0760477538"
        assert decimal(lk_series(60), 10) == "2.0760515685"
        assert lk_series(20) > F(2076, 1000)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            lk_series(1)


class TestRatioLemma:
    def test_square_constant(self):
        assert ratio_lemma_bound(F(1, 4), F(4, 9)) == F(43, 16)

    def test_precondition(self):
        with pytest.raises(PreconditionViolated):
            ratio_lemma_bound(F(1, 2), F(1, 4))
        with pytest.raises(PreconditionViolated):
            check_ratio_lemma(0, 1, F(1, 4), F(4, 9))

    @settings(max_examples=300)
    @given(pos, st.one_of(st.just(F(0)), pos), unit, unit)
    def test_never_exceeded(self, a, b, g, d):
        assume(g < d)
        assert check_ratio_lemma(a, b, g, d)

    def test_tight(self):
        # b/a = (1 - gamma)/delta makes both denominators equal
        g, d = F(1, 4), F(4, 9)
        a, b = F(1), (1 - g) / d
        assert (a + b) / max(a, g * a + d * b) == ratio_lemma_bound(g, d)


class TestParametric:
    @pytest.mark.parametrize("m,v", [(2, 4), (3, F(9, 4)), (10, F(100, 81))])
    def test_values(self, m, v):
        assert parametric_bound(m) == v

    def test_bad_m(self):
        with pytest.raises(ValueError):
            parametric_bound(1)

    @settings(max_examples=40)
    @given(st.integers(1, 12), st.integers(0, 10**6), st.sampled_from([2, 3, 4]), st.booleans())
    def test_audit_on_endpoints(self, n, seed, m, exact):
        oracle = oracle_for(exact)
        items = gen_random(n, seed, squares=False, max_side=F(1, m), grid=4 * m)
        final, _ = run_dynamics(Configuration.singletons(items), oracle, MovePolicy("random", "first", seed))
        audit = parametric_audit(final, m)
        assert audit.holds

    def test_audit_precondition(self):
        c = Configuration.singletons([Item(0, Rect.square(F(1, 2)))])
        with pytest.raises(PreconditionViolated):
            parametric_audit(c, 3)


class TestSpoa:
    def test_root(self):
        s = spoa_constant()
        assert s.width <= F(1, 10**9)
        assert abs(float(s.lo) - 0.62876) < 1e-5
        assert (1 - s.lo**2) * (1 - s.lo) ** 2 > F(1, 12) > (1 - s.hi**2) * (1 - s.hi) ** 2

    def test_bounds(self):
        s = spoa_constant()
        assert s.cases_overlap
        assert s.side_condition
        assert s.bound <= SPOA_TARGET
        assert max(s.case_big) <= F(23605, 10000) and max(s.case_medium) <= F(23605, 10000)
        assert abs(float(s.bound) - 2.36048464897) < 1e-8

    def test_case_monotonicity(self):
        xs = [F(k, 100) for k in range(1, 99)]
        big = [spoa_case_big(x) for x in xs]
        med = [spoa_case_medium(x) for x in xs]
        assert big == sorted(big) and med == sorted(med, reverse=True)


class TestOptimal:
    def test_empty_and_single(self):
        assert optimal_bins([])[0] == 0
        assert optimal_bins([Item(0, Rect.square(1))])[0] == 1

    def test_five_halves(self):
        n, part = optimal_bins([Item(k, Rect.square(F(1, 2))) for k in range(5)])
        assert n == 2
        assert sorted(len(b) for b in part) == [1, 4]

    def test_limit(self):
        with pytest.raises(InstanceTooLarge):
            optimal_bins([Item(k, Rect.square(F(1, 8))) for k in range(11)])

    @settings(max_examples=60)
    @given(st.integers(1, 6), st.integers(0, 10**6), st.booleans())
    def test_matches_brute_force(self, n, seed, squares):
        items = gen_random(n, seed, squares=squares, grid=4)
        best, part = optimal_bins(items)
        assert best == brute_opt(items, 4)
        assert sorted(it.id for b in part for it in b) == [it.id for it in items]


class TestRatios:
    def test_unbounded(self):
        r = poa_ratio(gen_unbounded_poa(5))
        assert (r.eq_bins, r.opt_bins, r.ratio) == (5, 2, F(5, 2))
        assert r.opt_certificate == "area-lower-bound"

    def test_square_full_bins(self):
        r = poa_ratio(gen_square_poa())
        assert r.opt_certificate == "full-bins"
        assert r.ratio > F(23604, 10000)

    def test_two_bad_bins(self):
        out = gen_two_bad_bins()
        r = poa_ratio(out, NFDH)
        assert (r.eq_bins, r.opt_bins, r.ratio) == (2, 1, 2)
        with pytest.raises(NotAnEquilibrium):
            poa_ratio(out, EXACT)

    def test_config_ratio(self):
        items = [Item(k, Rect.square(F(1, 2))) for k in range(5)]
        c = Configuration.from_bins([items[:4], items[4:]])
        r = config_ratio(c)
        assert r.ratio == 1 and r.opt_certificate == "exact-oracle"
        with pytest.raises(NotAnEquilibrium):
            config_ratio(Configuration.singletons(items))


class TestAudits:
    def test_two_bad_bins(self):
        count, offenders = occupancy_audit(gen_two_bad_bins().eq, F(4, 9))
        assert count == 2 and len(offenders) == 2

    def test_square_bound_on_square_eq(self):
        out = gen_square_poa()
        a = square_bound_audit(out.eq)
        assert a.holds
        # only the lone 1/2 + eps square is big
        assert a.n_big == out.declared_opt

    def test_square_bound_on_profile_and_config_agree(self):
        out = gen_strong_poa(4, F(1, 7))
        assert square_bound_audit(out.eq) == square_bound_audit(out.eq_config)

    @settings(max_examples=60)
    @given(st.integers(1, 12), st.integers(0, 10**6), st.booleans())
    def test_square_bound_on_endpoints(self, n, seed, exact):
        oracle = oracle_for(exact)
        items = gen_random(n, seed, grid=8)
        final, _ = run_dynamics(Configuration.singletons(items), oracle, MovePolicy("random", "best", seed))
        assert square_bound_audit(final).holds

    @settings(max_examples=20)
    @given(st.integers(2, 8), st.integers(0, 10**6))
    def test_strong_occupancy_k2(self, n, seed):
        items = gen_random(n, seed, max_side=F(1, 2), grid=8)
        final, _ = run_strong_dynamics(Configuration.singletons(items), NFDH, 4)
        below, ok = strong_occupancy_audit(final, 2)
        assert ok

    def test_strong_eq_witness_valid(self):
        out = gen_strong_poa(5)
        for cls in out.opt.classes:
            assert packing_is_valid(cls.witness)


class TestDecimal:
    def test_rounding(self):
        assert decimal(F(2, 3), 4) == "0.6667"
        assert decimal(F(43, 16), 4) == "2.6875"
