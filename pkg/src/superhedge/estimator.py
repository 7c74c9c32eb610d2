"""Estimator-style front end for pricing American options on the numerical
lattices.

``AmericanOptionPricer`` holds the model and instrument as constructor
parameters (so ``get_params``/``set_params``/``clone`` work) and ``fit``
builds the lattice and computes both prices.
"""

from __future__ import annotations

import numbers
from fractions import Fraction

from sklearn.base import BaseEstimator
from sklearn.utils import check_scalar
from sklearn.utils.validation import check_is_fitted

from .buyer import hedge_buyer, price_buyer
from .market import Market, PayoffProcess, american_put_physical, build_binomial, build_trinomial, cash_basket
from .seller import hedge_seller, price_seller_dual, price_seller_primal

__all__ = ["AmericanOptionPricer", "LATTICES", "PAYOFFS", "MODES"]

LATTICES = ("binomial", "trinomial")
PAYOFFS = ("put", "basket")
MODES = ("float", "rational")

_REAL = (numbers.Real,)


def _check_choice(value, name, options):
    if value not in options:
        raise ValueError(f"{name} must be one of {options}, got {value!r}")


def _check_legs(legs):
    if not legs:
        raise ValueError("a basket payoff needs at least one (strike, sign) leg")
    out = []
    for leg in legs:
        try:
            strike, sign = leg
        except (TypeError, ValueError):
            raise ValueError(f"basket leg {leg!r} is not a (strike, sign) pair") from None
        check_scalar(strike, "leg strike", _REAL, min_val=0, include_boundaries="neither")
        check_scalar(sign, "leg sign", _REAL)
        out.append((strike, sign))
    return tuple(out)


class AmericanOptionPricer(BaseEstimator):
    """Ask and bid prices of an American option under proportional costs.

    Parameters
    ----------
    lattice : {"binomial", "trinomial"}
    S0, sigma, maturity, n_steps, rate : lattice parameters (maturity in years).
    cost : proportional transaction cost rate ``k`` (0.005 means 0.5%).
    payoff : {"put", "basket"}
        ``put`` delivers the portfolio ``(strike, -1)``; ``basket`` settles
        ``sum sign * (S - strike)^+`` in cash.
    strike : put strike.
    legs : sequence of ``(strike, sign)`` for the basket.
    never_exercise_step : bool or None
        Append a step with a zero payoff so the holder may decline to
        exercise.  None turns it on for the put only.
    no_cost_at_time0 : bool
    mode : {"float", "rational"}
    method : {"dual", "primal"}
        Which seller recursion computes ``ask_price_``.
    """

    def __init__(self, lattice="binomial", S0=100.0, sigma=0.2, maturity=0.25, n_steps=20, rate=0.1,
                 cost=0.0, payoff="put", strike=100.0, legs=None, never_exercise_step=None,
                 no_cost_at_time0=True, mode="float", method="dual"):
        self.lattice = lattice
        self.S0 = S0
        self.sigma = sigma
        self.maturity = maturity
        self.n_steps = n_steps
        self.rate = rate
        self.cost = cost
        self.payoff = payoff
        self.strike = strike
        self.legs = legs
        self.never_exercise_step = never_exercise_step
        self.no_cost_at_time0 = no_cost_at_time0
        self.mode = mode
        self.method = method

    def _validate_params(self):
        _check_choice(self.lattice, "lattice", LATTICES)
        _check_choice(self.payoff, "payoff", PAYOFFS)
        _check_choice(self.mode, "mode", MODES)
        _check_choice(self.method, "method", ("dual", "primal"))
        check_scalar(self.S0, "S0", _REAL, min_val=0, include_boundaries="neither")
        check_scalar(self.sigma, "sigma", _REAL, min_val=0, include_boundaries="neither")
        check_scalar(self.maturity, "maturity", _REAL, min_val=0, include_boundaries="neither")
        check_scalar(self.n_steps, "n_steps", numbers.Integral, min_val=1)
        check_scalar(self.rate, "rate", _REAL)
        check_scalar(self.cost, "cost", _REAL, min_val=0, max_val=1, include_boundaries="left")
        if self.payoff == "put":
            check_scalar(self.strike, "strike", _REAL, min_val=0, include_boundaries="neither")
            return None
        return _check_legs(self.legs)

    def build(self):
        """``(market, payoff)`` described by the parameters."""
        legs = self._validate_params()
        builder = build_binomial if self.lattice == "binomial" else build_trinomial
        extra = self.never_exercise_step
        if extra is None:
            extra = self.payoff == "put"
        exact = self.mode == "rational"
        market = builder(self.S0, self.sigma, self.maturity, self.n_steps, self.rate, self.cost,
                         no_cost_at_time0=self.no_cost_at_time0, extra_no_exercise_step=extra, exact=exact)
        if self.payoff == "put":
            strike = Fraction(self.strike) if exact else float(self.strike)
            return market, american_put_physical(market, strike)
        return market, cash_basket(market, legs)

    def fit(self, market: Market | None = None, payoff: PayoffProcess | None = None, keep_all=False):
        """Price the option.

        With no arguments the lattice is built from the parameters; an
        explicit ``market`` and ``payoff`` may be passed instead.  With
        ``keep_all`` every node's value functions are kept, which hedging
        needs.
        """
        if (market is None) != (payoff is None):
            raise ValueError("pass both market and payoff, or neither")
        if market is None:
            market, payoff = self.build()
        else:
            _check_choice(self.method, "method", ("dual", "primal"))
        seller = price_seller_dual if self.method == "dual" else price_seller_primal
        self.ask_price_, self.seller_fns_ = seller(market, payoff, keep_all=keep_all)
        self.bid_price_, self.buyer_fns_ = price_buyer(market, payoff, keep_all=keep_all)
        self.market_ = market
        self.payoff_ = payoff
        return self

    def prices(self):
        """``(ask, bid)``."""
        check_is_fitted(self, ("ask_price_", "bid_price_"))
        return self.ask_price_, self.bid_price_

    def seller_hedge(self, rule="hold"):
        """Seller's superhedge started from ``(ask, 0)``; needs the primal
        recursion with ``keep_all``."""
        check_is_fitted(self, "seller_fns_")
        fns = self.seller_fns_
        if fns.w is None:
            _, fns = price_seller_primal(self.market_, self.payoff_, keep_all=True)
        return hedge_seller(fns, (self.ask_price_, self.ask_price_ * 0), rule=rule)

    def buyer_hedge(self, rule="hold"):
        """``(strategy, stop_nodes)`` started from ``(-bid, 0)``."""
        check_is_fitted(self, "buyer_fns_")
        fns = self.buyer_fns_
        if fns.w is None:
            _, fns = price_buyer(self.market_, self.payoff_, keep_all=True)
        return hedge_buyer(fns, (-self.bid_price_, self.bid_price_ * 0), rule=rule)
