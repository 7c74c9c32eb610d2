import math
import random
from fractions import Fraction as F

import pytest

from randmodels import random_market, random_payoff
from superhedge.market import (
    EventTree,
    Market,
    MartingalePair,
    MixedStoppingTime,
    PayoffProcess,
    Strategy,
    TreeTooLargeError,
    american_put_physical,
    build_binomial,
    build_trinomial,
    cash_basket,
    chi_star,
    enumerate_stopping_times,
    is_self_financing,
    liquidation_value,
    no_arbitrage_check,
    pure_stopping_time,
    setup_cost,
    stopped_value,
    two_step_example,
    verify_approx_martingale,
)


def random_mixed_time(rng, tree):
    """Masses spending a random share of the remaining mass at each node."""
    mass = [[None] * n for n in tree.sizes]
    star = [[None] * n for n in tree.sizes]
    star[0][0] = F(1)
    for t, i in tree.nodes():
        left = star[t][i]
        m = left if t == tree.horizon else left * F(rng.randint(0, 4), 4)
        mass[t][i] = m
        for c in tree.children(t, i):
            star[t + 1][c] = left - m
    return MixedStoppingTime(tuple(tuple(level) for level in mass))


class TestEventTree:
    def test_shape(self):
        tree = EventTree.from_branching([[2], [1, 2]])
        assert tree.sizes == (1, 2, 3)
        assert tree.parent[2] == (0, 1, 1)
        assert tree.path_count() == 3

    def test_rejects_bad_indices(self):
        with pytest.raises(ValueError):
            EventTree((((0, 2),),))
        with pytest.raises(ValueError):
            EventTree((((0, 1),), ((0,), (0,))))

    def test_expand_lattice(self):
        m = build_binomial(100, 0.2, 0.25, 3, 0.1, 0.01)
        tree, origin = m.tree.expand()
        assert tree.sizes == (1, 2, 4, 8)
        assert origin[3] == (0, 1, 1, 2, 1, 2, 2, 3)
        big = build_binomial(100, 0.2, 0.25, 30, 0.1, 0.01)
        with pytest.raises(TreeTooLargeError):
            big.expand(1000)

    def test_recombinant_needs_expansion(self):
        m = build_binomial(100, 0.2, 0.25, 2, 0.1, 0.0)
        with pytest.raises(ValueError):
            m.tree.require_tree()


class TestLiquidation:
    def test_values(self):
        assert liquidation_value(F(5), F(2), F(8), F(16)) == 21
        assert liquidation_value(F(5), F(-2), F(8), F(16)) == -27
        assert setup_cost(F(5), F(2), F(8), F(16)) == 37

    def test_bad_spread(self):
        with pytest.raises(ValueError):
            liquidation_value(0, 1, F(9), F(8))

    def test_market_rejects_inverted_band(self):
        tree = EventTree.from_branching([[1]])
        with pytest.raises(ValueError):
            Market(tree, ((F(10),), (F(10),)), ((F(10),), (F(9),)))

    def test_self_financing(self):
        market, _ = two_step_example()
        good = Strategy((F(9, 2), F(0)), (((F(-3), F(3, 4)),), ((F(-3), F(3, 4)), (F(3, 2), F(0)))))
        assert is_self_financing(market, good)
        greedy = Strategy((F(0), F(0)), (((F(-9), F(1)),), ((F(-9), F(1)), (F(-9), F(1)))))
        report = is_self_financing(market, greedy)
        assert not report and report.violations[0][0] == (0, 0)


class TestLattices:
    def test_one_step_up_price(self):
        m = build_binomial(100, 0.2, 0.25, 1, 0.1, 0.0)
        assert m.mid[1][1] == pytest.approx(100 * math.exp(0.1))

    def test_zero_cost_has_no_spread(self):
        m = build_trinomial(100, 0.2, 0.25, 5, 0.1, 0.0)
        assert all(m.bid[t][i] == m.ask[t][i] for t, i in m.tree.nodes())

    def test_undiscounted_when_rate_is_zero(self):
        m = build_binomial(100, 0.2, 0.25, 4, 0.0, 0.0, no_cost_at_time0=False)
        assert all(m.bid[t][i] == pytest.approx(m.mid[t][i]) for t, i in m.tree.nodes())

    def test_cost_and_root(self):
        m = build_binomial(100, 0.2, 0.25, 4, 0.1, 0.02)
        assert m.bid[0][0] == m.ask[0][0] == 100
        df = math.exp(-0.1 * 0.25 / 4)
        assert m.bid[1][0] == pytest.approx(0.98 * m.mid[1][0] * df)
        assert m.ask[1][0] == pytest.approx(1.02 * m.mid[1][0] * df)
        with pytest.raises(ValueError):
            build_binomial(100, 0.2, 0.25, 4, 0.1, 1.0)

    def test_trinomial_middle_path(self):
        m = build_trinomial(100, 0.2, 0.25, 3, 0.1, 0.0)
        assert m.tree.sizes == (1, 3, 5, 7)
        for t in range(4):
            assert m.mid[t][t] == pytest.approx(100)

    def test_appended_step(self):
        m = build_binomial(100, 0.2, 0.25, 3, 0.1, 0.01, extra_no_exercise_step=True)
        assert m.horizon == 4 and m.tree.sizes[-1] == 4
        assert m.bid[4] == m.bid[3]
        put = american_put_physical(m, 100)
        assert put.at(4, 0) == (0, 0)
        assert put.at(3, 0) == pytest.approx((100 * m.discount[3], -1))

    def test_bull_spread_values(self):
        m = build_trinomial(100, 0.2, 0.25, 2, 0.1, 0.0)
        spread = cash_basket(m, [(95, 1), (105, -1)])
        df = m.discount[2]
        assert spread.at(2, 2)[0] == pytest.approx(5 * df)
        assert spread.at(0, 0) == (5.0, 0)
        top = m.mid[2][4]
        assert spread.at(2, 4)[0] == pytest.approx(df * (max(top - 95, 0) - max(top - 105, 0)))

    def test_bull_spread_at_120(self):
        tree = EventTree.from_branching([[1]])
        m = Market(tree, ((120.0,), (120.0,)), ((120.0,), (120.0,)), mid=((120.0,), (120.0,)),
                   discount=(1.0, 0.5))
        spread = cash_basket(m, [(95, 1), (105, -1)])
        assert spread.at(0, 0) == (10.0, 0)
        assert spread.at(1, 0) == (5.0, 0)


class TestStoppingTimes:
    def test_enumerate(self):
        tree = EventTree.from_branching([[2]])
        times = enumerate_stopping_times(tree)
        assert set(times) == {frozenset({(0, 0)}), frozenset({(1, 0), (1, 1)})}
        only_late = enumerate_stopping_times(tree, lambda t, i: t == 1)
        assert only_late == [frozenset({(1, 0), (1, 1)})]

    def test_enumeration_cap(self):
        tree = EventTree.from_branching([[3], [3, 3, 3]])
        with pytest.raises(TreeTooLargeError):
            enumerate_stopping_times(tree, limit=5)

    def test_pure_time_embedding(self):
        rng = random.Random(4)
        market = random_market(rng, horizon=3)
        tree = market.tree
        Z = tuple(tuple(F(rng.randint(-9, 9)) for _ in range(n)) for n in tree.sizes)
        for tau in enumerate_stopping_times(tree)[:40]:
            chi = pure_stopping_time(tree, tau)
            star = chi_star(tree, chi)
            for t, i in tree.nodes():
                before = any((s, j) in tau for s, j in _ancestors(tree, t, i))
                assert star[t][i] == (0 if before else 1)
            for leaf, value in enumerate(stopped_value(tree, chi, Z)):
                (s, j), = [(s, j) for s, j in _ancestors(tree, tree.horizon, leaf) + [(tree.horizon, leaf)]
                           if (s, j) in tau]
                assert value == Z[s][j]

    def test_pure_time_rejects_bad_sets(self):
        tree = EventTree.from_branching([[2]])
        with pytest.raises(ValueError):
            pure_stopping_time(tree, {(1, 0)})
        with pytest.raises(ValueError):
            pure_stopping_time(tree, {(0, 0), (1, 0)})

    def test_mixed_validation(self):
        tree = EventTree.from_branching([[2]])
        MixedStoppingTime(((F(1, 2),), (F(1, 2), F(1, 2)))).validate(tree)
        with pytest.raises(ValueError):
            MixedStoppingTime(((F(1, 2),), (F(1, 2), F(1, 4)))).validate(tree)


def _ancestors(tree, t, i):
    out = []
    while t > 0:
        i = tree.parent[t][i]
        t -= 1
        out.append((t, i))
    return out


class TestNoArbitrage:
    def test_zero_spread_binomial(self):
        tree = EventTree.from_branching([[2]])
        m = Market(tree, ((F(10),), (F(12), F(9))), ((F(10),), (F(12), F(9))))
        res = no_arbitrage_check(m)
        assert res
        pair = res.pair(tree)
        assert pair.P[1] == (F(1, 3), F(2, 3))

    def test_increasing_price(self):
        tree = EventTree.from_branching([[1], [1]])
        prices = ((F(1),), (F(2),), (F(3),))
        assert not no_arbitrage_check(Market(tree, prices, prices))

    def test_worked_example(self):
        market, _ = two_step_example()
        res = no_arbitrage_check(market)
        assert res
        pair = res.pair(market.tree)
        chi = pure_stopping_time(market.tree, {(2, j) for j in range(4)})
        assert verify_approx_martingale(market, pair, chi, equivalent=True)

    def test_witnesses_pass_for_mixed_times(self):
        rng = random.Random(12)
        for _ in range(20):
            market = random_market(rng)
            pair = no_arbitrage_check(market).pair(market.tree)
            assert all(pair.P[t][i] > 0 for t, i in market.tree.nodes())
            for _ in range(5):
                chi = random_mixed_time(rng, market.tree)
                chi.validate(market.tree)
                assert verify_approx_martingale(market, pair, chi)

    def test_band_violation(self):
        market, _ = two_step_example()
        tree = market.tree
        P = ((F(1),), (F(1, 2), F(1, 2)), (F(1, 4),) * 4)
        S = tuple(tuple(a + 1 for a in level) for level in market.ask)
        chi = pure_stopping_time(tree, {(0, 0)})
        report = verify_approx_martingale(market, MartingalePair(P, S), chi)
        assert not report and report.band_violations


class TestPayoffProcess:
    def test_restricted_and_reflected(self):
        _, payoff = two_step_example()
        r = payoff.restricted({(1, 0), (1, 1)})
        assert r.at(0, 0) is None and r.at(1, 0) == (3, 0)
        ref = payoff.reflected({(1, 0)})
        assert ref.at(1, 0) == (-3, 0) and ref.at(1, 1) is None

    def test_shape_check(self):
        rng = random.Random(2)
        market = random_market(rng, horizon=2)
        payoff = random_payoff(rng, market.tree)
        payoff.check(market.tree)
        with pytest.raises(ValueError):
            PayoffProcess(payoff.values[:-1]).check(market.tree)
