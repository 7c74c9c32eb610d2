"""Ask price, superhedging strategy and optimal mixed stopping time for the
seller (short position) of an American option."""

from __future__ import annotations

import math
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
    _inside_point,
    _split,
    chi_star,
    enumerate_stopping_times,
    liquidation_value,
    no_arbitrage_check,
)
from .pl_algebra import (
    BOTTOM,
    UNBOUNDED_BELOW,
    ConcavePL,
    PLFunction,
    cap_decompose,
    concave_cap,
    domain_restrict,
    gradient_restrict,
    pl_max,
)

__all__ = [
    "SellerCertificate",
    "SellerValueFunctions",
    "check_pure_stopping_gap",
    "check_seller_superhedge",
    "construct_seller_certificate",
    "hedge_seller",
    "price_seller_dual",
    "price_seller_primal",
    "seller_payoff_fn",
    "seller_payoff_dual",
]


def seller_payoff_fn(xi, zeta, bid, ask):
    """``u(y) = xi + (y - zeta)^- ask - (y - zeta)^+ bid``; BOTTOM when ``xi`` is None.

    A portfolio ``(alpha, beta)`` covers the payoff at this node iff
    ``alpha >= u(beta)``.
    """
    if xi is None:
        return BOTTOM
    if lt(ask, bid):
        raise ValueError(f"ask {ask} is below bid {bid}")
    return PLFunction((zeta,), (xi,), -ask, -bid)


def seller_payoff_dual(xi, zeta, bid, ask):
    """Concave conjugate of :func:`seller_payoff_fn`: ``xi + x zeta`` on ``[bid, ask]``."""
    if xi is None:
        return BOTTOM
    if bid == ask:
        return ConcavePL((bid,), (xi + bid * zeta,), canonical=True)
    return ConcavePL((bid, ask), (xi + bid * zeta, xi + ask * zeta), canonical=True)


@dataclass
class SellerValueFunctions:
    """Per-node value functions indexed ``[t][i]`` like the market.

    The primal recursion fills ``z, v, w, u``; the dual one ``Z, V, W, U``.
    Unfilled families are None.  With ``keep_all=False`` only time 0 is kept.
    """

    market: Market
    price: object
    z: Optional[list] = None
    v: Optional[list] = None
    w: Optional[list] = None
    u: Optional[list] = None
    Z: Optional[list] = None
    V: Optional[list] = None
    W: Optional[list] = None
    U: Optional[list] = None


def _payoff_at(payoff: PayoffProcess, t, i):
    p = payoff.at(t, i)
    return (None, None) if p is None else p


def price_seller_primal(market: Market, payoff: PayoffProcess, keep_all: bool = True):
    """Ask price ``z_0(0)`` from the primal backward induction.

    ``z = max(v, u)``, ``v = gr(w)``, ``w`` the maximum of the successors' ``z``.
    Returns ``(price, SellerValueFunctions)``.
    """
    tree = market.tree
    payoff.check(tree)
    T = tree.horizon
    sizes = tree.sizes

    def node_u(t, i):
        xi, zeta = _payoff_at(payoff, t, i)
        return seller_payoff_fn(xi, zeta, market.bid[t][i], market.ask[t][i])

    u_T = [node_u(T, i) for i in range(sizes[T])]
    store = {k: [None] * (T + 1) for k in "zvwu"} if keep_all else None
    z_next = u_T
    if keep_all:
        for k in "zvwu":
            store[k][T] = list(u_T)
    for t in range(T - 1, -1, -1):
        zs, vs, ws, us = [], [], [], []
        for i, cs in enumerate(tree.succ[t]):
            w = BOTTOM
            for c in cs:
                w = pl_max(w, z_next[c])
            v = gradient_restrict(w, market.bid[t][i], market.ask[t][i], convex=True)
            if v is UNBOUNDED_BELOW:
                raise ModelError(f"value function unbounded below at node {t}:{i}; the model admits arbitrage")
            u = node_u(t, i)
            zs.append(pl_max(v, u))
            if keep_all:
                vs.append(v)
                ws.append(w)
                us.append(u)
        z_next = zs
        if keep_all:
            store["z"][t], store["v"][t], store["w"][t], store["u"][t] = zs, vs, ws, us
    z0 = z_next[0]
    if z0 is BOTTOM:
        raise DegeneratePayoffError("the payoff is never exercisable")
    price = z0(z0.xs[0] * 0)
    if keep_all:
        fns = SellerValueFunctions(market, price, **store)
    else:
        fns = SellerValueFunctions(market, price, z=[[z0]])
    return price, fns


def price_seller_dual(market: Market, payoff: PayoffProcess, keep_all: bool = True):
    """Ask price ``max Z_0`` from the dual (concave) backward induction.

    ``Z = cap{V, U}``, ``V = dr(W)``, ``W`` the cap of the successors' ``Z``.
    """
    tree = market.tree
    payoff.check(tree)
    T = tree.horizon
    sizes = tree.sizes

    def node_U(t, i):
        xi, zeta = _payoff_at(payoff, t, i)
        return seller_payoff_dual(xi, zeta, market.bid[t][i], market.ask[t][i])

    U_T = [node_U(T, i) for i in range(sizes[T])]
    store = {k: [None] * (T + 1) for k in "ZVWU"} if keep_all else None
    Z_next = U_T
    if keep_all:
        for k in "ZVWU":
            store[k][T] = list(U_T)
    for t in range(T - 1, -1, -1):
        Zs, Vs, Ws, Us = [], [], [], []
        for i, cs in enumerate(tree.succ[t]):
            W = concave_cap([Z_next[c] for c in cs])
            V = domain_restrict(W, market.bid[t][i], market.ask[t][i])
            if V is BOTTOM and W is not BOTTOM:
                raise ModelError(f"empty continuation domain at node {t}:{i}; the model admits arbitrage")
            U = node_U(t, i)
            Zs.append(concave_cap([V, U]))
            if keep_all:
                Vs.append(V)
                Ws.append(W)
                Us.append(U)
        Z_next = Zs
        if keep_all:
            store["Z"][t], store["V"][t], store["W"][t], store["U"][t] = Zs, Vs, Ws, Us
    Z0 = Z_next[0]
    if Z0 is BOTTOM:
        raise DegeneratePayoffError("the payoff is never exercisable")
    price = Z0.maximum()[1]
    if keep_all:
        fns = SellerValueFunctions(market, price, **store)
    else:
        fns = SellerValueFunctions(market, price, Z=[[Z0]])
    return price, fns


# --------------------------------------------------------------------------
# Hedging
# --------------------------------------------------------------------------


def _walk(F, kinks, tail_gain, start, sign):
    """First ``x`` from ``start`` in direction ``sign`` with ``F(x) >= 0``.

    ``kinks`` are ordered away from ``start``; ``tail_gain`` is the rate at
    which ``F`` grows beyond the last one per unit of distance.
    """
    px, pv = start, F(start)
    for x in kinks:
        v = F(x)
        if v >= 0 or close(v, 0):
            if close(v, 0) or v == pv:
                return x
            return px + (x - px) * (-pv) / (v - pv)
        px, pv = x, v
    if tail_gain > 0 and not close(tail_gain, 0):
        return px + sign * (-pv) / tail_gain
    return None


def nearest_trade(alpha, beta, w, bid, ask, target=None):
    """Trade ``x`` (shares bought, negative for sold) nearest to ``target``
    (default 0) such that ``alpha + x^- bid - x^+ ask >= w(beta + x)``.

    Returns None when no such trade exists.  ``w`` may be non-convex.
    """
    zero = 0 * beta
    if target is None:
        target = zero
    if w is BOTTOM:
        return target

    def F(x):
        cash = alpha - ask * x if x >= 0 else alpha - bid * x
        return cash - w(beta + x)

    f0 = F(target)
    if f0 >= 0 or close(f0, 0):
        return target
    kinks = sorted(set([x - beta for x in w.xs] + [zero]))
    up = _walk(F, [k for k in kinks if k > target], -ask - w.right_slope, target, 1)
    down = _walk(F, [k for k in reversed(kinks) if k < target], bid + w.left_slope, target, -1)
    if up is None:
        return down
    if down is None:
        return up
    return up if up - target <= target - down else down


REBALANCE_RULES = ("hold", "flatten")


def rebalance(alpha, beta, w, bid, ask, rule="hold"):
    """Portfolio carried forward from ``(alpha, beta)`` into ``epi w``.

    ``hold`` keeps the portfolio when it already lies in ``epi w`` and
    otherwise makes the smallest trade; ``flatten`` moves to the reachable
    position with the smallest stock holding.
    """
    if rule not in REBALANCE_RULES:
        raise ValueError(f"unknown rebalancing rule {rule!r}")
    if w is BOTTOM:
        return alpha, beta
    if rule == "hold":
        if le(w(beta), alpha):
            return alpha, beta
        x = nearest_trade(alpha, beta, w, bid, ask)
    else:
        x = nearest_trade(alpha, beta, w, bid, ask, -beta)
    if x is None:
        raise InsufficientEndowmentError("no self-financing trade reaches the continuation set")
    if x == 0:
        return alpha, beta
    cash = alpha - ask * x if x >= 0 else alpha - bid * x
    return cash, beta + x


def _expanded(fns_market: Market, market: Optional[Market]):
    """Tree to run a forward pass on and the map to the value-function nodes."""
    if market is None:
        market = fns_market
    tree, origin = market.tree.expand()
    if tree is not market.tree:
        market, origin = market.expand()
    return market, origin


def hedge_seller(
    value_fns: SellerValueFunctions, initial, market: Optional[Market] = None, rule: str = "hold"
) -> Strategy:
    """Superhedging strategy starting from ``initial = (cash, shares)``.

    At every node the portfolio is moved into ``epi w`` by :func:`rebalance`
    with the given rule.  Recombinant lattices are expanded into a tree first.
    """
    if value_fns.w is None:
        raise ValueError("primal value functions with keep_all=True are required")
    fm = value_fns.market
    market, origin = _expanded(fm, market)
    tree = market.tree
    alpha, beta = initial
    z0 = value_fns.z[0][0]
    if lt(alpha, z0(beta)):
        raise InsufficientEndowmentError(
            f"initial portfolio ({alpha}, {beta}) is worth less than z_0(beta) = {z0(beta)}"
        )
    rebalanced = []
    entering = [(alpha, beta)]
    for t in range(tree.horizon):
        level = []
        nxt = [None] * tree.sizes[t + 1]
        for i, cs in enumerate(tree.succ[t]):
            a, b = entering[i]
            w = value_fns.w[t][origin[t][i]]
            new = rebalance(a, b, w, market.bid[t][i], market.ask[t][i], rule)
            level.append(new)
            for c in cs:
                nxt[c] = new
        rebalanced.append(tuple(level))
        entering = nxt
    return Strategy((alpha, beta), tuple(rebalanced))


@dataclass(frozen=True)
class SuperhedgeReport:
    ok: bool
    violations: tuple

    def __bool__(self):
        return self.ok


def check_seller_superhedge(market: Market, payoff: PayoffProcess, strategy: Strategy) -> SuperhedgeReport:
    """``liquidation_value(alpha - xi, beta - zeta) >= 0`` at every exercisable node."""
    tree = market.tree
    tree.require_tree()
    bad = []
    for t, i in tree.nodes():
        p = payoff.at(t, i)
        if p is None:
            continue
        a, b = strategy.entering(tree, t, i)
        val = liquidation_value(a - p[0], b - p[1], market.bid[t][i], market.ask[t][i])
        if lt(val, 0):
            bad.append(((t, i), val))
    return SuperhedgeReport(not bad, tuple(bad))


# --------------------------------------------------------------------------
# Optimal mixed stopping time and approximate martingale
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SellerCertificate:
    """Mixed stopping time, measure and auxiliary processes on a tree.

    ``lam[t][i]`` and ``p[t][i]`` are the local weights; ``V_hat``/``U_hat``
    are None where the corresponding function is ``-inf``.
    """

    market: Market
    payoff: PayoffProcess
    chi: MixedStoppingTime
    P: tuple
    S: tuple
    X: tuple
    Y: tuple
    Z_hat: tuple
    U_hat: tuple
    V_hat: tuple
    lam: tuple
    p: tuple

    @property
    def pair(self) -> MartingalePair:
        return MartingalePair(self.P, self.S)

    def expected_payoff(self):
        """``E_P((xi + S zeta)_chi)``."""
        tree = self.market.tree
        total = 0
        for t, i in tree.nodes():
            w = self.P[t][i] * self.chi.mass[t][i]
            if w:
                xi, zeta = self.payoff.at(t, i)
                total = total + w * (xi + self.S[t][i] * zeta)
        return total

    def identity_residuals(self):
        """Nodes where the recorded identities fail (empty when all hold).

        Checks ``chi*_t Y = chi*_{t+1} X + chi_t S`` everywhere, its value
        analogue where ``chi*_t > 0``, and ``X_{t-1} = E(Y_t | F_{t-1})``,
        ``V_{t-1} = E(Z_t | F_{t-1})`` at nodes of positive mass.
        """
        tree = self.market.tree
        star = chi_star(tree, self.chi)
        out = []
        for t, i in tree.nodes():
            cs, cn = star[t][i], star[t][i] - self.chi.mass[t][i]
            if not close(cs * self.Y[t][i], cn * self.X[t][i] + self.chi.mass[t][i] * self.S[t][i]):
                out.append(("prices", t, i))
            # after the stopping mass is spent both sides vanish
            if self.P[t][i] and cs:
                parts = [(cn, self.V_hat[t][i]), (self.chi.mass[t][i], self.U_hat[t][i]), (cs, self.Z_hat[t][i])]
                if any(m and v is None for m, v in parts):
                    out.append(("values", t, i))
                else:
                    rhs = sum((m * v for m, v in parts[:2] if m), 0)
                    if not close(cs * self.Z_hat[t][i], rhs):
                        out.append(("values", t, i))
            if t < tree.horizon and self.P[t][i]:
                kids = tree.succ[t][i]
                ey = sum((self.p[t + 1][c] * self.Y[t + 1][c] for c in kids), 0)
                if not close(ey, self.X[t][i]):
                    out.append(("cond_price", t, i))
                if self.V_hat[t][i] is not None:
                    live = [c for c in kids if self.p[t + 1][c]]
                    if any(self.Z_hat[t + 1][c] is None for c in live):
                        out.append(("cond_value", t, i))
                    elif not close(sum((self.p[t + 1][c] * self.Z_hat[t + 1][c] for c in live), 0), self.V_hat[t][i]):
                        out.append(("cond_value", t, i))
        return out


def _node_split(V, U, y, terminal):
    """Weight on exercise and the continuation/exercise points for ``Z = cap{V, U}`` at ``y``."""
    if terminal:
        return 1, y, y
    if U is BOTTOM:
        return 0, y, y
    if V is BOTTOM:
        return 1, None, y
    cap = concave_cap([V, U])
    atoms = cap_decompose([V, U], cap, y)
    lam, x_pt, s_pt = 0 * y, None, y
    for idx, weight, pt in atoms:
        if idx == 0:
            x_pt = pt
        else:
            lam, s_pt = weight, pt
    if x_pt is None:
        # everything stops here; any continuation point in dom V keeps the
        # conditional expectations below consistent
        x_pt = V.clamp(y)
    return lam, x_pt, s_pt


def construct_seller_certificate(
    value_fns: SellerValueFunctions, payoff: PayoffProcess, market: Optional[Market] = None
) -> SellerCertificate:
    """Optimal mixed stopping time and approximate martingale from the dual
    value functions (which must be kept for every node).

    The root uses the leftmost maximiser of ``Z_0``; ties between continuing
    and exercising go to continuing, except at the horizon.
    """
    if value_fns.Z is None or value_fns.W is None:
        raise ValueError("dual value functions with keep_all=True are required")
    fm = value_fns.market
    market, origin = _expanded(fm, market)
    if market.tree is not fm.tree:
        payoff = payoff.expand(origin)
    tree = market.tree
    T = tree.horizon
    Zf, Vf, Uf, Wf = value_fns.Z, value_fns.V, value_fns.U, value_fns.W
    sizes = tree.sizes
    one = Zf[0][0].xs[0] * 0 + 1
    zero = one * 0
    P = [[zero] * n for n in sizes]
    S = [[None] * n for n in sizes]
    X = [[None] * n for n in sizes]
    Y = [[None] * n for n in sizes]
    Zh = [[None] * n for n in sizes]
    Uh = [[None] * n for n in sizes]
    Vh = [[None] * n for n in sizes]
    lam = [[zero] * n for n in sizes]
    p = [[zero] * n for n in sizes]
    chi = [[zero] * n for n in sizes]
    star = [[zero] * n for n in sizes]

    attainable = None

    def intervals():
        nonlocal attainable
        if attainable is None:
            res = no_arbitrage_check(market)
            attainable = res.intervals if res else False
        return attainable

    def fill(t, i, y, mass_before):
        o = origin[t][i]
        Z, V, U = Zf[t][o], Vf[t][o], Uf[t][o]
        Y[t][i] = y
        l, x_pt, s_pt = _node_split(V, U, y, t == T)
        if x_pt is None:
            # nothing of value remains below this node: continue from a price
            # that some martingale can reach
            x_pt = _inside_point(intervals()[t][i], y) if intervals() else y
        lam[t][i], X[t][i], S[t][i] = l, x_pt, s_pt
        if Z is not BOTTOM and Z.contains(y):
            Zh[t][i] = Z(Z.clamp(y))
        if V is not BOTTOM and V.contains(x_pt):
            Vh[t][i] = V(V.clamp(x_pt))
        if U is not BOTTOM and U.contains(s_pt):
            Uh[t][i] = U(U.clamp(s_pt))
        star[t][i] = mass_before
        chi[t][i] = l * mass_before

    y0 = Zf[0][0].maximum()[0]
    P[0][0] = one
    p[0][0] = one
    fill(0, 0, y0, one)
    for t in range(T):
        for i, cs in enumerate(tree.succ[t]):
            rest = star[t][i] - chi[t][i]
            W = Wf[t][origin[t][i]]
            x = X[t][i]
            weights = {}
            if W is not BOTTOM and W.contains(x):
                kids = [Zf[t + 1][origin[t + 1][c]] for c in cs]
                for idx, weight, pt in cap_decompose(kids, W, x):
                    acc = weights.get(idx)
                    if acc is None:
                        weights[idx] = (weight, weight * pt)
                    else:
                        weights[idx] = (acc[0] + weight, acc[1] + weight * pt)
            elif intervals():
                # subtree without finite value: split x over attainable prices
                probs, pts = _split(x, [intervals()[t + 1][c] for c in cs])
                for idx, (q, pt) in enumerate(zip(probs, pts)):
                    weights[idx] = (q, q * pt)
            else:
                for idx in range(len(cs)):
                    weights[idx] = (one / len(cs), None)
            for idx, c in enumerate(cs):
                bid, ask = market.bid[t + 1][c], market.ask[t + 1][c]
                if idx in weights and weights[idx][0] and weights[idx][1] is not None:
                    wt, moment = weights[idx]
                    y = moment / wt
                else:
                    wt = weights.get(idx, (zero,))[0]
                    Zc = Zf[t + 1][origin[t + 1][c]]
                    y = Zc.clamp(x) if Zc is not BOTTOM else min(max(x, bid), ask)
                p[t + 1][c] = wt
                P[t + 1][c] = wt * P[t][i]
                fill(t + 1, c, y, rest)
    freeze = lambda a: tuple(tuple(level) for level in a)  # noqa: E731
    return SellerCertificate(
        market,
        payoff,
        MixedStoppingTime(freeze(chi)),
        freeze(P),
        freeze(S),
        freeze(X),
        freeze(Y),
        freeze(Zh),
        freeze(Uh),
        freeze(Vh),
        freeze(lam),
        freeze(p),
    )


def check_pure_stopping_gap(market: Market, payoff: PayoffProcess, limit: int = 100_000):
    """Best value over pure stopping times versus the ask price.

    Each pure time ``tau`` is priced as the seller's price of the payoff
    restricted to ``{t = tau}``, which equals the supremum of
    ``E_P(xi_tau + S_tau zeta_tau)`` over approximate martingales for ``tau``.
    Returns ``(pure_max, ask_price)``.
    """
    market.tree.require_tree()
    ask, _ = price_seller_dual(market, payoff, keep_all=False)
    best = -math.inf
    for tau in enumerate_stopping_times(market.tree, payoff.exercisable, limit):
        value, _ = price_seller_dual(market, payoff.restricted(tau), keep_all=False)
        if best == -math.inf or value > best:
            best = value
    return best, ask
