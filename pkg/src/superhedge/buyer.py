"""Bid price, hedging strategy and optimal pure stopping time for the buyer
(long position) of an American option."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ._num import close, le, lt
from .errors import DegeneratePayoffError, InsufficientEndowmentError, ModelError
from .market import (
    Market,
    MartingalePair,
    MixedStoppingTime,
    PayoffProcess,
    Strategy,
    liquidation_value,
    pure_stopping_time,
)
from .pl_algebra import BOTTOM, UNBOUNDED_BELOW, PLFunction, gradient_restrict, pl_max, pl_min
from .seller import (
    SellerCertificate,
    _expanded,
    construct_seller_certificate,
    price_seller_dual,
    rebalance,
)

__all__ = [
    "BuyerCertificate",
    "BuyerValueFunctions",
    "check_buyer_superhedge",
    "construct_buyer_certificate",
    "hedge_buyer",
    "price_buyer",
    "buyer_payoff_fn",
]


def buyer_payoff_fn(xi, zeta, bid, ask):
    """``u(y) = -xi + (y + zeta)^- ask - (y + zeta)^+ bid``.

    A portfolio ``(alpha, beta)`` held on exercise leaves the buyer solvent
    iff ``alpha >= u(beta)``.  Returns BOTTOM when ``xi`` is None (the option
    cannot be exercised there); the pricing recursion reads that as "no
    exercise branch".
    """
    if xi is None:
        return BOTTOM
    if lt(ask, bid):
        raise ValueError(f"ask {ask} is below bid {bid}")
    return PLFunction((-zeta,), (-xi,), -ask, -bid)


@dataclass
class BuyerValueFunctions:
    """Per-node ``z, v, w, u`` of the buyer's recursion.

    None stands for ``+inf`` (no exercise possible anywhere below the node);
    ``u`` is BOTTOM where the option cannot be exercised.
    """

    market: Market
    price: object
    z: list
    v: list
    w: list
    u: list


def _max_or_top(f, g):
    if f is None or g is None:
        return None
    return pl_max(f, g)


def price_buyer(market: Market, payoff: PayoffProcess, keep_all: bool = True):
    """Bid price ``-z_0(0)``; returns ``(price, BuyerValueFunctions)``."""
    tree = market.tree
    payoff.check(tree)
    T = tree.horizon

    def node_u(t, i):
        p = payoff.at(t, i)
        if p is None:
            return BOTTOM
        return buyer_payoff_fn(p[0], p[1], market.bid[t][i], market.ask[t][i])

    u_T = [node_u(T, i) for i in range(tree.sizes[T])]
    z_next = [None if u is BOTTOM else u for u in u_T]
    store = {k: [None] * (T + 1) for k in "zvwu"}
    if keep_all:
        store["z"][T] = list(z_next)
        store["v"][T] = list(z_next)
        store["w"][T] = list(z_next)
        store["u"][T] = u_T
    for t in range(T - 1, -1, -1):
        zs, vs, ws, us = [], [], [], []
        for i, cs in enumerate(tree.succ[t]):
            w = BOTTOM
            for c in cs:
                w = _max_or_top(w, z_next[c])
            if w is None:
                v = None
            else:
                v = gradient_restrict(w, market.bid[t][i], market.ask[t][i])
                if v is UNBOUNDED_BELOW:
                    raise ModelError(f"value function unbounded below at node {t}:{i}; the model admits arbitrage")
            u = node_u(t, i)
            if u is BOTTOM:
                z = v
            elif v is None:
                z = u
            else:
                z = pl_min(v, u)
            zs.append(z)
            if keep_all:
                vs.append(v)
                ws.append(w)
                us.append(u)
        z_next = zs
        if keep_all:
            store["z"][t], store["v"][t], store["w"][t], store["u"][t] = zs, vs, ws, us
    z0 = z_next[0]
    if z0 is None or z0 is BOTTOM:
        raise DegeneratePayoffError("some path never allows exercise; the bid price is -inf")
    price = -z0(z0.xs[0] * 0)
    if not keep_all:
        store = {"z": [[z0]], "v": None, "w": None, "u": None}
    return price, BuyerValueFunctions(market, price, **store)


def _in_epi(f, alpha, beta) -> bool:
    if f is BOTTOM:
        return True
    if f is None:
        return False
    return le(f(beta), alpha)


def hedge_buyer(
    value_fns: BuyerValueFunctions, initial, market: Optional[Market] = None, rule: str = "hold"
):
    """Strategy and exercise time for the buyer starting from ``initial``.

    Exercise happens at the first node where the portfolio covers the
    exercise obligation; afterwards the portfolio is frozen.  Returns
    ``(Strategy, stop_nodes)`` with ``stop_nodes`` a frozenset of ``(t, i)``
    on the (expanded) tree.
    """
    if value_fns.w is None:
        raise ValueError("buyer value functions with keep_all=True are required")
    market, origin = _expanded(value_fns.market, market)
    tree = market.tree
    T = tree.horizon
    alpha, beta = initial
    if not _in_epi(value_fns.z[0][0], alpha, beta):
        raise InsufficientEndowmentError(f"initial portfolio ({alpha}, {beta}) is outside epi z_0")
    uf, wf = value_fns.u, value_fns.w

    def exercisable_here(t, i, a, b):
        u = uf[t][origin[t][i]]
        return u is not BOTTOM and le(u(b), a)

    stop = set()
    stopped = [exercisable_here(0, 0, alpha, beta)]
    if stopped[0]:
        stop.add((0, 0))
    entering = [(alpha, beta)]
    rebalanced = []
    for t in range(T):
        level = []
        nxt = [None] * tree.sizes[t + 1]
        nxt_stopped = [False] * tree.sizes[t + 1]
        for i, cs in enumerate(tree.succ[t]):
            a, b = entering[i]
            if stopped[i]:
                new = (a, b)
            else:
                w = wf[t][origin[t][i]]
                new = rebalance(a, b, w, market.bid[t][i], market.ask[t][i], rule)
            level.append(new)
            for c in cs:
                nxt[c] = new
                if stopped[i]:
                    nxt_stopped[c] = True
                elif exercisable_here(t + 1, c, *new):
                    nxt_stopped[c] = True
                    stop.add((t + 1, c))
        rebalanced.append(tuple(level))
        entering, stopped = nxt, nxt_stopped
    if not all(stopped):
        raise InsufficientEndowmentError("the hedge never reaches an exercise opportunity on some path")
    return Strategy((alpha, beta), tuple(rebalanced)), frozenset(stop)


@dataclass(frozen=True)
class BuyerHedgeReport:
    ok: bool
    violations: tuple

    def __bool__(self):
        return self.ok


def check_buyer_superhedge(market: Market, payoff: PayoffProcess, strategy: Strategy, stop_nodes) -> BuyerHedgeReport:
    """``liquidation_value(alpha + xi, beta + zeta) >= 0`` at every stop node."""
    tree = market.tree
    tree.require_tree()
    pure_stopping_time(tree, stop_nodes)
    bad = []
    for t, i in sorted(stop_nodes):
        p = payoff.at(t, i)
        if p is None:
            bad.append(((t, i), None))
            continue
        a, b = strategy.entering(tree, t, i)
        val = liquidation_value(a + p[0], b + p[1], market.bid[t][i], market.ask[t][i])
        if lt(val, 0):
            bad.append(((t, i), val))
    return BuyerHedgeReport(not bad, tuple(bad))


@dataclass(frozen=True)
class BuyerCertificate:
    """Pure stopping time with an approximate martingale that minimises the
    expected payoff at that time."""

    market: Market
    payoff: PayoffProcess
    stop_nodes: frozenset
    tau: MixedStoppingTime
    P: tuple
    S: tuple
    seller_certificate: SellerCertificate

    @property
    def pair(self) -> MartingalePair:
        return MartingalePair(self.P, self.S)

    def expected_payoff(self):
        """``E_P(xi_tau + S_tau zeta_tau)``."""
        total = 0
        for t, i in self.stop_nodes:
            if self.P[t][i]:
                xi, zeta = self.payoff.at(t, i)
                total = total + self.P[t][i] * (xi + self.S[t][i] * zeta)
        return total


def construct_buyer_certificate(market: Market, payoff: PayoffProcess, stop_nodes) -> BuyerCertificate:
    """Approximate martingale for the buyer's stopping time.

    The payoff is reflected to ``(-xi, -zeta)`` on the stop nodes and made
    non-exercisable elsewhere; the seller's certificate construction for that
    payoff yields the measure and prices.
    """
    market.tree.require_tree()
    tau = pure_stopping_time(market.tree, stop_nodes)
    reflected = payoff.reflected(stop_nodes)
    _, fns = price_seller_dual(market, reflected)
    cert = construct_seller_certificate(fns, reflected)
    for t, i in market.tree.nodes():
        if cert.P[t][i] and not close(cert.chi.mass[t][i], tau.mass[t][i]):
            raise AssertionError("reflected certificate stopped away from the buyer's time")
    return BuyerCertificate(market, payoff, frozenset(stop_nodes), tau, cert.P, cert.S, cert)
