import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_has_coalition, brute_is_nash
from selfish_packing.analysis import occupancy_audit
from selfish_packing.errors import PotentialViolation, SearchSpaceTooLarge, StepLimitReached, UnknownItem
from selfish_packing.game import (
    EXACT,
    INFINITE,
    NEW_BIN,
    NFDH,
    BinClass,
    Configuration,
    FeasibilityOracle,
    MovePolicy,
    Profile,
    canonical,
    cost,
    find_coalition,
    improving_moves,
    is_improving_coalition,
    is_nash,
    is_strong_nash_bounded,
    potential,
    run_dynamics,
    run_strong_dynamics,
)
from selfish_packing.geometry import Item, Rect
from selfish_packing.instances import gen_random, gen_square_poa, gen_strong_poa, gen_unbounded_poa, random_configuration

ORACLES = [NFDH, FeasibilityOracle("exact", 12)]


def sq(k, side):
    return Item(k, Rect.square(side))


def random_start(n, seed, squares=True, max_side=1, grid=8):
    items = gen_random(n, seed, squares=squares, max_side=max_side, grid=grid)
    if seed % 2:
        return random_configuration(items, seed)
    return Configuration.singletons(items)


class TestOracle:
    def test_kinds(self):
        with pytest.raises(ValueError):
            FeasibilityOracle("greedy")

    def test_exact_beats_nfdh(self):
        eps = F(1, 100)
        items = [Rect.square(F(1, 2))] + [Rect.square(F(1, 3) + eps)] * 3 + [Rect.square(F(1, 6))] * 2
        assert EXACT.fits(items)
        assert not NFDH.fits(items)


class TestCost:
    def test_alone(self):
        c = Configuration.singletons([sq(0, F(1, 3))])
        assert cost(c, 0, NFDH) == 1

    def test_half_of_half(self):
        items = [sq(0, F(1, 2))] + [sq(k, F(1, 4)) for k in range(1, 5)]
        c = Configuration.from_bins([items])
        assert cost(c, 0, NFDH) == F(1, 2)

    def test_infeasible_bin(self):
        c = Configuration.from_bins([[sq(k, F(1, 2) + F(1, 100)) for k in range(2)]])
        assert cost(c, 0, NFDH) == INFINITE

    def test_unknown_item(self):
        c = Configuration.singletons([sq(0, F(1, 3))])
        with pytest.raises(UnknownItem):
            cost(c, 7, NFDH)


class TestImprovingMoves:
    def test_singleton_instance(self):
        assert improving_moves(Configuration.singletons([sq(0, F(1, 2))]), 0, NFDH) == []

    def test_unbounded_bars_stay(self):
        out = gen_unbounded_poa(5)
        c = out.eq_config
        for iid, it in c.items.items():
            assert improving_moves(c, iid, NFDH) == []

    def test_half_joins_fuller_bin(self):
        c = Configuration.from_bins([[sq(0, F(1, 2))], [sq(1, F(1, 2)), sq(2, F(1, 4))]])
        moves = improving_moves(c, 0, NFDH)
        assert [m.target for m in moves] == [1]
        assert NFDH.fits([Rect.square(F(1, 2))] * 2 + [Rect.square(F(1, 4))])

    def test_new_bin_only_from_infeasible(self):
        c = Configuration.from_bins([[sq(0, F(2, 3)), sq(1, F(2, 3))]])
        assert [m.target for m in improving_moves(c, 0, NFDH)] == [NEW_BIN]
        c = Configuration.from_bins([[sq(0, F(1, 3))], [sq(1, F(1, 3))]])
        assert all(m.target != NEW_BIN for m in improving_moves(c, 0, NFDH))

    def test_migration_exceeds_both_areas(self):
        for seed in range(60):
            c = random_start(8, seed)
            for oracle in ORACLES:
                areas = {b: potential(Configuration.from_bins([cont]), oracle)[0] for b, cont in c.bins().items()}
                for iid in c.items:
                    for m in improving_moves(c, iid, oracle):
                        if m.target == NEW_BIN:
                            continue
                        new_area = c.items[iid].area / m.new_cost
                        assert new_area > areas[m.source] and new_area > areas[m.target]


class TestDynamics:
    def test_equilibrium_start(self):
        c = gen_unbounded_poa(5).eq_config
        final, trace = run_dynamics(c, NFDH)
        assert len(trace) == 0 and final.assignment == c.assignment

    def test_thirds_from_singletons(self):
        c = Configuration.singletons([sq(k, F(1, 3)) for k in range(11)])
        final, trace = run_dynamics(c, NFDH)
        assert is_nash(final, NFDH)[0]
        assert trace.is_strictly_increasing()
        below, _ = occupancy_audit(final, F(4, 9))
        assert below <= 2

    def test_infeasible_bin_moves_first(self):
        big = [sq(0, F(2, 3)), sq(1, F(2, 3))]
        c = Configuration.from_bins([[sq(2, F(1, 4))], big])
        assert cost(c, 0, NFDH) == INFINITE
        final, trace = run_dynamics(c, NFDH)
        first = trace.steps[0]
        assert first.source == 1 and first.item in (0, 1)
        assert cost(final, first.item, NFDH) < INFINITE

    def test_step_limit(self):
        c = Configuration.singletons([sq(k, F(1, 4)) for k in range(6)])
        with pytest.raises(StepLimitReached) as info:
            run_dynamics(c, NFDH, max_steps=2)
        assert len(info.value.trace) == 2
        with pytest.raises(ValueError):
            run_dynamics(c, NFDH, max_steps=-1)

    def test_policies_deterministic(self):
        c = random_start(10, 3)
        for pol in (MovePolicy("random", "best", 5), MovePolicy("lowest-id", "first")):
            a = run_dynamics(c, NFDH, pol)
            b = run_dynamics(c, NFDH, pol)
            assert a[0].assignment == b[0].assignment
            assert [s.potential for s in a[1]] == [s.potential for s in b[1]]

    def test_bad_policy(self):
        with pytest.raises(ValueError):
            MovePolicy(order="largest")

    @settings(max_examples=40)
    @given(st.integers(1, 12), st.integers(0, 10**6), st.booleans(), st.sampled_from(["first", "best"]))
    def test_converges_with_rising_potential(self, n, seed, exact, target):
        oracle = ORACLES[exact]
        c = random_start(n, seed, squares=seed % 3 > 0)
        final, trace = run_dynamics(c, oracle, MovePolicy("random", target, seed))
        assert trace.is_strictly_increasing()
        assert is_nash(final, oracle)[0]
        assert brute_is_nash(final, oracle)


class TestNash:
    def test_unbounded(self):
        assert is_nash(gen_unbounded_poa(5).eq_config, NFDH) == (True, None)

    def test_homogeneous_squares(self):
        eps = F(1, 1000)
        classes = []
        for i in (2, 3, 4, 5, 7, 8, 13):
            s = Rect.square(F(1, i) + eps)
            classes.append(BinClass(((s, (i - 1) ** 2),), 1))
        p = Profile(tuple(classes))
        assert is_nash(p, NFDH)[0]
        assert is_nash(p.expand(), EXACT)[0]

    def test_smaller_square_inequality(self):
        eps = F(1, 1000)
        s2, s3 = F(1, 2) + eps, F(1, 3) + eps
        assert s3**2 + 1 * s2**2 < 4 * s3**2

    def test_witness_move(self):
        c = Configuration.singletons([sq(0, F(1, 4)), sq(1, F(1, 4))])
        ok, move = is_nash(c, NFDH)
        assert not ok and move.item in (0, 1)

    def test_profile_witness_is_shape(self):
        p = Profile((BinClass(canonical([Rect.square(F(1, 4))]), 2),))
        ok, move = is_nash(p, NFDH)
        assert not ok and move.item == Rect.square(F(1, 4)) and move.source == move.target == 0

    @settings(max_examples=60)
    @given(st.integers(1, 9), st.integers(0, 10**6), st.booleans())
    def test_grouped_matches_brute_force(self, n, seed, exact):
        oracle = ORACLES[exact]
        c = random_start(n, seed, squares=seed % 2 == 0)
        assert is_nash(c, oracle)[0] == brute_is_nash(c, oracle)

    @settings(max_examples=40)
    @given(st.integers(2, 9), st.integers(0, 10**6))
    def test_relabeling_invariance(self, n, seed):
        c = random_start(n, seed)
        rng = random.Random(seed)
        ids = list(c.items)
        perm = ids[:]
        rng.shuffle(perm)
        bins = sorted(set(c.assignment.values()))
        shuffled = bins[:]
        rng.shuffle(shuffled)
        d = c.relabeled(dict(zip(ids, perm)), dict(zip(bins, [b + 100 for b in shuffled])))
        for oracle in ORACLES:
            assert is_nash(c, oracle)[0] == is_nash(d, oracle)[0]


class TestCoalitions:
    def test_size_one_is_single_move(self):
        for seed in range(40):
            c = random_start(7, seed)
            assert (find_coalition(c, NFDH, 1) is None) == is_nash(c, NFDH)[0]

    def test_seven_fifths_into_quarter_bin(self):
        eps = F(1, 1000)
        quarter = [sq(k, F(1, 4) + eps) for k in range(9)]
        bins = [quarter]
        k = 9
        for _ in range(7):
            bins.append([sq(k + j, F(1, 5) + eps) for j in range(16)])
            k += 16
        c = Configuration.from_bins(bins)
        members = [bins[b][0].id for b in range(1, 8)]
        assert is_improving_coalition(c, members, 0, EXACT)
        # NFDH cannot stack seven fifths beside a 3x3 block of quarters
        assert not is_improving_coalition(c, members, 0, NFDH)

    def test_square_equilibrium_not_strong(self):
        out = gen_square_poa()
        coal = find_coalition(out.eq, NFDH, 7)
        assert coal is not None and coal.size == 2
        assert not is_strong_nash_bounded(out.eq, NFDH, 7)

    def test_strong_construction(self):
        out = gen_strong_poa(4, F(1, 7))
        assert is_strong_nash_bounded(out.eq, NFDH, 8)
        assert is_strong_nash_bounded(out.eq, EXACT, 8)

    def test_non_nash_is_not_strong(self):
        c = Configuration.singletons([sq(0, F(1, 4)), sq(1, F(1, 4))])
        assert not is_strong_nash_bounded(c, NFDH, 3)

    def test_coalition_to_new_bin(self):
        # three lonely 1/3 squares in mostly empty bins gain by leaving together
        bins = [[sq(0, F(1, 3)), sq(1, F(1, 2) + F(1, 100))], [sq(2, F(1, 3)), sq(3, F(1, 2) + F(1, 100))]]
        c = Configuration.from_bins(bins)
        assert is_improving_coalition(c, [0, 2], NEW_BIN, NFDH) is False
        c2 = Configuration.from_bins([[sq(k, F(1, 5))] for k in range(4)])
        assert is_improving_coalition(c2, [0, 1], NEW_BIN, NFDH)

    def test_budget(self):
        c = Configuration.singletons([sq(k, F(k + 1, 32)) for k in range(12)])
        with pytest.raises(SearchSpaceTooLarge):
            find_coalition(run_dynamics(c, NFDH)[0], NFDH, 6, budget=10)

    def test_max_size_validated(self):
        with pytest.raises(ValueError):
            find_coalition(Configuration.singletons([sq(0, F(1, 2))]), NFDH, 0)

    @settings(max_examples=60)
    @given(st.integers(1, 7), st.integers(0, 10**6), st.integers(1, 3))
    def test_matches_brute_force(self, n, seed, size):
        c = random_start(n, seed, max_side=F(1, 2))
        coal = find_coalition(c, NFDH, size)
        assert (coal is not None) == brute_has_coalition(c, NFDH, size)
        if coal is not None:
            assert is_improving_coalition(c, coal.members, coal.target, NFDH)

    @settings(max_examples=25)
    @given(st.integers(2, 10), st.integers(0, 10**6))
    def test_strong_dynamics(self, n, seed):
        c = random_start(n, seed, max_side=F(1, 2))
        final, trace = run_strong_dynamics(c, NFDH, 3)
        assert trace.is_strictly_increasing()
        assert find_coalition(final, NFDH, 3) is None


class TestPotential:
    def test_infeasible_counts_zero(self):
        c = Configuration.from_bins([[sq(0, F(2, 3)), sq(1, F(2, 3))], [sq(2, F(1, 2))]])
        assert potential(c, NFDH) == (F(1, 4), 0)

    def test_violation_is_raised(self, monkeypatch):
        import selfish_packing.game as game

        c = Configuration.singletons([sq(0, F(1, 4)), sq(1, F(1, 4))])
        monkeypatch.setattr(game, "potential", lambda *_: (F(0),))
        with pytest.raises(PotentialViolation):
            game.run_dynamics(c, NFDH)
