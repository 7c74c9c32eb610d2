import random
from fractions import Fraction as F

import pytest

from randmodels import random_market, random_payoff
from superhedge.buyer import (
    buyer_payoff_fn,
    check_buyer_superhedge,
    construct_buyer_certificate,
    hedge_buyer,
    price_buyer,
)
from superhedge.errors import DegeneratePayoffError, InsufficientEndowmentError
from superhedge.market import (
    PayoffProcess,
    enumerate_stopping_times,
    is_self_financing,
    two_step_example,
    verify_approx_martingale,
)
from superhedge.pl_algebra import BOTTOM, PLFunction
from superhedge.seller import price_seller_dual


@pytest.fixture
def example():
    return two_step_example()


class TestPayoffFunction:
    def test_zero_payoff_zero_spread(self):
        assert buyer_payoff_fn(F(0), F(0), F(7), F(7)) == PLFunction.linear(F(-7), F(0))

    def test_example_node_u(self):
        u = buyer_payoff_fn(F(3), F(0), F(8), F(16))
        assert u(F(-1)) == 13 and u(F(1)) == -11

    def test_not_exercisable(self):
        assert buyer_payoff_fn(None, None, F(8), F(16)) is BOTTOM


class TestPricing:
    def test_example(self, example):
        market, payoff = example
        bid, fns = price_buyer(market, payoff)
        assert bid == F(6, 5)
        assert -fns.z[0][0](0) == F(6, 5)

    def test_zero_payoff(self, example):
        market, _ = example
        assert price_buyer(market, PayoffProcess.constant(market.tree, F(0), F(0)))[0] == 0

    def test_path_without_exercise(self, example):
        market, payoff = example
        # the d branch is never exercisable
        partial = payoff.restricted({(1, 0), (2, 0), (2, 1)})
        with pytest.raises(DegeneratePayoffError):
            price_buyer(market, partial)

    def test_bid_below_ask(self):
        rng = random.Random(200)
        for _ in range(40):
            market = random_market(rng)
            payoff = random_payoff(rng, market.tree)
            assert price_buyer(market, payoff)[0] <= price_seller_dual(market, payoff)[0]

    def test_representation_over_pure_times(self):
        rng = random.Random(201)
        for _ in range(15):
            market = random_market(rng, max_horizon=2)
            payoff = random_payoff(rng, market.tree)
            best = max(-price_seller_dual(market, payoff.reflected(tau))[0]
                       for tau in enumerate_stopping_times(market.tree, payoff.exercisable))
            assert best == price_buyer(market, payoff)[0]


class TestHedge:
    def test_example(self, example):
        market, payoff = example
        bid, fns = price_buyer(market, payoff)
        strategy, stop = hedge_buyer(fns, (-bid, F(0)))
        assert strategy.initial == (F(-6, 5), F(0))
        assert strategy.rebalanced[0][0] == (F(9, 5), F(-3, 10))
        assert stop == frozenset({(1, 0), (1, 1)})
        assert check_buyer_superhedge(market, payoff, strategy, stop)
        assert is_self_financing(market, strategy)

    def test_zero_payoff_stops_at_once(self, example):
        market, _ = example
        zero = PayoffProcess.constant(market.tree, F(0), F(0))
        _, fns = price_buyer(market, zero)
        _, stop = hedge_buyer(fns, (F(0), F(0)))
        assert stop == frozenset({(0, 0)})

    def test_insufficient_endowment(self, example):
        market, payoff = example
        _, fns = price_buyer(market, payoff)
        with pytest.raises(InsufficientEndowmentError):
            hedge_buyer(fns, (F(-2), F(0)))

    def test_random_trees(self):
        rng = random.Random(202)
        for _ in range(40):
            market = random_market(rng)
            payoff = random_payoff(rng, market.tree)
            bid, fns = price_buyer(market, payoff)
            strategy, stop = hedge_buyer(fns, (-bid, F(0)))
            assert check_buyer_superhedge(market, payoff, strategy, stop)
            assert is_self_financing(market, strategy)


class TestCertificate:
    def test_example(self, example):
        market, payoff = example
        bid, fns = price_buyer(market, payoff)
        _, stop = hedge_buyer(fns, (-bid, F(0)))
        cert = construct_buyer_certificate(market, payoff, stop)
        assert cert.P[1] == (F(2, 5), F(3, 5))
        assert cert.S[1] == (F(16), F(6))
        assert cert.expected_payoff() == F(6, 5)
        assert cert.tau.is_pure
        assert verify_approx_martingale(market, cert.pair, cert.tau)

    def test_exercise_only_at_horizon(self, example):
        market, payoff = example
        T = market.horizon
        late = payoff.restricted({(T, i) for i in range(market.tree.sizes[T])})
        bid, fns = price_buyer(market, late)
        _, stop = hedge_buyer(fns, (-bid, F(0)))
        assert stop == frozenset((T, i) for i in range(market.tree.sizes[T]))
        cert = construct_buyer_certificate(market, late, stop)
        assert cert.expected_payoff() == bid

    def test_random_trees(self):
        rng = random.Random(203)
        for _ in range(80):
            # horizons up to 4 reach subtrees that carry mass after the stop
            market = random_market(rng, max_horizon=4)
            payoff = random_payoff(rng, market.tree)
            bid, fns = price_buyer(market, payoff)
            _, stop = hedge_buyer(fns, (-bid, F(0)))
            cert = construct_buyer_certificate(market, payoff, stop)
            assert cert.tau.is_pure
            assert cert.expected_payoff() == bid
            assert not cert.seller_certificate.identity_residuals()
            assert all(isinstance(cert.P[t][i], F) for t, i in market.tree.nodes())
            assert verify_approx_martingale(market, cert.pair, cert.tau)
