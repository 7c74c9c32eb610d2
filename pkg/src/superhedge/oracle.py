"""Slow, independent reference computations for small models.

Prices are obtained from linear programs over explicit strategy variables
solved with an exact rational simplex method, rather than from the
piecewise-linear recursions.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from gmpy2 import mpq

from ._num import close
from .errors import DegeneratePayoffError, ModelError
from .market import (
    Market,
    MartingalePair,
    MixedStoppingTime,
    PayoffProcess,
    Strategy,
    TreeTooLargeError,
    enumerate_stopping_times,
)

__all__ = [
    "LinearProgram",
    "LPResult",
    "oracle_buyer_price",
    "oracle_seller_price",
    "oracle_seller_strategy",
    "perturb_to_equivalent",
    "snell_envelope",
]

DEFAULT_NODE_BUDGET = 200


# --------------------------------------------------------------------------
# Exact simplex
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    value: Optional[Fraction] = None
    x: Optional[tuple] = None


def _q(v):
    if isinstance(v, Fraction):
        return mpq(v.numerator, v.denominator)
    return mpq(v)


def _fraction(v):
    return Fraction(int(v.numerator), int(v.denominator))


class LinearProgram:
    """Minimise ``c.x`` subject to linear constraints, exactly.

    Variables are non-negative unless declared free (free variables are split
    into positive and negative parts).  Solved by the two-phase tableau
    method with Bland's anti-cycling rule.
    """

    def __init__(self):
        self._cols = []  # per user variable: list of tableau column indices with signs
        self._n = 0
        self._rows = []  # (dict col -> coeff, sense, rhs)
        self._cost = {}

    def add_variable(self, free: bool = False) -> int:
        if free:
            self._cols.append(((self._n, 1), (self._n + 1, -1)))
            self._n += 2
        else:
            self._cols.append(((self._n, 1),))
            self._n += 1
        return len(self._cols) - 1

    def _expand(self, coeffs):
        out = {}
        for var, a in coeffs.items():
            if a == 0:
                continue
            for col, sign in self._cols[var]:
                out[col] = out.get(col, 0) + _q(a) * sign
        return out

    def add_constraint(self, coeffs: dict, sense: str, rhs):
        """``sum coeffs[v] * x_v  (<=, >= or ==)  rhs``."""
        if sense not in ("<=", ">=", "=="):
            raise ValueError(f"unknown constraint sense {sense!r}")
        self._rows.append((self._expand(coeffs), sense, _q(rhs)))

    def minimize(self, coeffs: dict):
        self._cost = self._expand(coeffs)

    def solve(self) -> LPResult:
        n_struct = self._n
        rows = []
        n_slack = sum(1 for _, s, _ in self._rows if s != "==")
        slack_at = n_struct
        for coeffs, sense, rhs in self._rows:
            row = dict(coeffs)
            if sense == "<=":
                row[slack_at] = mpq(1)
                slack_at += 1
            elif sense == ">=":
                row[slack_at] = mpq(-1)
                slack_at += 1
            if rhs < 0:
                row = {k: -v for k, v in row.items()}
                rhs = -rhs
            rows.append((row, rhs))
        n_real = n_struct + n_slack
        m = len(rows)
        width = n_real + m
        tab = []
        basis = []
        for i, (row, rhs) in enumerate(rows):
            line = [mpq(0)] * (width + 1)
            for k, v in row.items():
                line[k] = v
            line[n_real + i] = mpq(1)
            line[width] = rhs
            tab.append(line)
            basis.append(n_real + i)
        # phase 1: minimise the sum of artificials
        cost1 = [mpq(0)] * n_real + [mpq(1)] * m
        if not _run_simplex(tab, basis, cost1, width):
            raise AssertionError("phase 1 cannot be unbounded")
        if sum((tab[i][width] for i in range(m) if basis[i] >= n_real), mpq(0)) != 0:
            return LPResult("infeasible")
        # pivot remaining artificials out, dropping redundant rows
        keep = []
        for i in range(m):
            if basis[i] < n_real:
                keep.append(i)
                continue
            col = next((j for j in range(n_real) if tab[i][j] != 0), None)
            if col is None:
                continue
            _pivot(tab, i, col, width)
            basis[i] = col
            keep.append(i)
        tab = [[r[j] for j in range(n_real)] + [r[width]] for k, r in enumerate(tab) if k in keep]
        basis = [basis[k] for k in keep]
        cost2 = [mpq(0)] * n_real
        for k, v in self._cost.items():
            cost2[k] = v
        if not _run_simplex(tab, basis, cost2, n_real):
            return LPResult("unbounded")
        xcol = [mpq(0)] * n_real
        for i, b in enumerate(basis):
            xcol[b] = tab[i][n_real]
        value = sum((cost2[j] * xcol[j] for j in range(n_real)), mpq(0))
        x = tuple(_fraction(sum((xcol[c] * s for c, s in cols), mpq(0))) for cols in self._cols)
        return LPResult("optimal", _fraction(value), x)


def _pivot(tab, r, c, width):
    row = tab[r]
    p = row[c]
    if p != 1:
        inv = 1 / p
        for j in range(width + 1):
            if row[j]:
                row[j] *= inv
    nz = [j for j in range(width + 1) if row[j]]
    for i, other in enumerate(tab):
        if i == r:
            continue
        f = other[c]
        if f:
            for j in nz:
                other[j] -= f * row[j]


def _run_simplex(tab, basis, cost, width) -> bool:
    """Optimise in place; False when the objective is unbounded below."""
    m = len(tab)
    while True:
        cb = [cost[b] for b in basis]
        entering = None
        for j in range(width):
            if j in basis:
                continue
            r = cost[j] - sum((cb[i] * tab[i][j] for i in range(m) if tab[i][j]), mpq(0))
            if r < 0:
                entering = j
                break
        if entering is None:
            return True
        best, best_ratio = None, None
        for i in range(m):
            a = tab[i][entering]
            if a > 0:
                ratio = tab[i][width] / a
                if best is None or ratio < best_ratio or (ratio == best_ratio and basis[i] < basis[best]):
                    best, best_ratio = i, ratio
        if best is None:
            return False
        _pivot(tab, best, entering, width)
        basis[best] = entering


# --------------------------------------------------------------------------
# Seller and buyer prices as linear programs
# --------------------------------------------------------------------------


def _check_small(market: Market, budget: int):
    market.tree.require_tree()
    if market.tree.n_nodes > budget:
        raise TreeTooLargeError(f"tree has {market.tree.n_nodes} nodes, budget is {budget}")
    if not market.exact:
        market_prices = [market.bid[t][i] for t, i in market.tree.nodes()]
        if any(isinstance(v, float) for v in market_prices):
            raise ValueError("the oracle needs exact rational prices")


def _portfolio_vars(lp: LinearProgram, tree, active):
    """Free ``(alpha, beta)`` variables for the root and each active non-terminal node."""
    init = (lp.add_variable(True), lp.add_variable(True))
    reb = {}
    for t in range(tree.horizon):
        for i in range(tree.sizes[t]):
            if active(t, i):
                reb[(t, i)] = (lp.add_variable(True), lp.add_variable(True))
    return init, reb


def _entering(tree, init, reb, t, i):
    return init if t == 0 else reb[(t - 1, tree.parent[t][i])]


def _add_solvency(lp, a_var, b_var, cash, shares, bid, ask, sign=1):
    """``liquidation_value(sign*alpha + cash, sign*beta + shares) >= 0``."""
    for price in (bid, ask):
        lp.add_constraint({a_var: sign, b_var: sign * price}, ">=", -(cash + price * shares))


def _add_self_financing(lp, tree, market, init, reb, active):
    for (t, i), (a1, b1) in reb.items():
        a0, b0 = _entering(tree, init, reb, t, i)
        for price in (market.bid[t][i], market.ask[t][i]):
            if a0 == a1 and b0 == b1:
                continue
            lp.add_constraint({a0: 1, a1: -1, b0: price, b1: -price}, ">=", 0)


def _seller_lp(market: Market, payoff: PayoffProcess):
    tree = market.tree
    lp = LinearProgram()
    init, reb = _portfolio_vars(lp, tree, lambda t, i: True)
    s = lp.add_variable(True)
    _add_self_financing(lp, tree, market, init, reb, None)
    for t, i in tree.nodes():
        p = payoff.at(t, i)
        if p is None:
            continue
        a, b = _entering(tree, init, reb, t, i)
        _add_solvency(lp, a, b, -p[0], -p[1], market.bid[t][i], market.ask[t][i])
    # s >= setup cost = max(alpha_0 + bid*beta_0, alpha_0 + ask*beta_0)
    for price in (market.bid[0][0], market.ask[0][0]):
        lp.add_constraint({s: 1, init[0]: -1, init[1]: -price}, ">=", 0)
    lp.minimize({s: 1})
    return lp, init, reb, s


def oracle_seller_price(market: Market, payoff: PayoffProcess, budget: int = DEFAULT_NODE_BUDGET):
    """Ask price by linear programming over all strategies (exact)."""
    return oracle_seller_strategy(market, payoff, budget)[0]


def oracle_seller_strategy(market: Market, payoff: PayoffProcess, budget: int = DEFAULT_NODE_BUDGET):
    """``(ask price, optimal Strategy)`` from the seller's linear program."""
    _check_small(market, budget)
    payoff.check(market.tree)
    if not any(payoff.exercisable(t, i) for t, i in market.tree.nodes()):
        raise DegeneratePayoffError("the payoff is never exercisable")
    lp, init, reb, _ = _seller_lp(market, payoff)
    res = lp.solve()
    if res.status == "infeasible":
        raise ModelError("seller linear program is infeasible")
    if res.status == "unbounded":
        raise ModelError("seller linear program is unbounded; the model admits arbitrage")
    tree = market.tree
    x = res.x
    rebalanced = tuple(
        tuple((x[reb[(t, i)][0]], x[reb[(t, i)][1]]) for i in range(tree.sizes[t])) for t in range(tree.horizon)
    )
    return res.value, Strategy((x[init[0]], x[init[1]]), rebalanced)


def _buyer_value_for(market: Market, payoff: PayoffProcess, stop):
    tree = market.tree
    stop = set(stop)
    # nodes strictly before the stopping time rebalance
    before = set()
    for t, i in tree.nodes():
        if (t, i) in stop:
            continue
        if t == 0 or (t - 1, tree.parent[t][i]) in before:
            before.add((t, i))
    lp = LinearProgram()
    init, reb = _portfolio_vars(lp, tree, lambda t, i: (t, i) in before)
    s = lp.add_variable(True)
    _add_self_financing(lp, tree, market, init, reb, None)
    for t, i in stop:
        xi, zeta = payoff.at(t, i)
        a, b = _entering(tree, init, reb, t, i)
        _add_solvency(lp, a, b, xi, zeta, market.bid[t][i], market.ask[t][i])
    # s <= liquidation value of (-alpha_0, -beta_0)
    for price in (market.bid[0][0], market.ask[0][0]):
        lp.add_constraint({s: 1, init[0]: 1, init[1]: price}, "<=", 0)
    lp.minimize({s: -1})
    res = lp.solve()
    if res.status == "unbounded":
        raise ModelError("buyer linear program is unbounded; the model admits arbitrage")
    if res.status == "infeasible":
        return None
    return -res.value


def oracle_buyer_price(market: Market, payoff: PayoffProcess, budget: int = DEFAULT_NODE_BUDGET,
                       limit: int = 100_000):
    """Bid price: best over all pure stopping times of a per-time linear program."""
    _check_small(market, budget)
    payoff.check(market.tree)
    best = None
    for stop in enumerate_stopping_times(market.tree, payoff.exercisable, limit):
        value = _buyer_value_for(market, payoff, stop)
        if value is not None and (best is None or value > best):
            best = value
    if best is None:
        raise DegeneratePayoffError("no stopping time exercises on every path")
    return best


# --------------------------------------------------------------------------
# Frictionless reference and perturbation
# --------------------------------------------------------------------------


def snell_envelope(market: Market, payoff: PayoffProcess):
    """Classical American value on a zero-spread model with at most two
    successors per node (unique risk-neutral weights).

    The payoff is valued as ``xi + S zeta``; non-exercisable nodes only continue.
    """
    tree = market.tree
    T = tree.horizon
    for t, i in tree.nodes():
        if not close(market.bid[t][i], market.ask[t][i]):
            raise ValueError(f"non-zero spread at node {t}:{i}")
    S = market.bid

    def exercise(t, i):
        p = payoff.at(t, i)
        return None if p is None else p[0] + S[t][i] * p[1]

    values = [exercise(T, i) for i in range(tree.sizes[T])]
    if any(v is None for v in values):
        raise DegeneratePayoffError("terminal payoff missing")
    for t in range(T - 1, -1, -1):
        nxt = []
        for i, cs in enumerate(tree.succ[t]):
            if len(cs) == 1:
                cont = values[cs[0]]
            elif len(cs) == 2:
                lo, hi = sorted(cs, key=lambda c: S[t + 1][c])
                s_lo, s_hi = S[t + 1][lo], S[t + 1][hi]
                if not (s_lo < S[t][i] < s_hi) and not close(s_lo, s_hi):
                    raise ModelError(f"no risk-neutral weights at node {t}:{i}")
                q = (S[t][i] - s_lo) / (s_hi - s_lo)
                cont = q * values[hi] + (1 - q) * values[lo]
            else:
                raise ValueError("incomplete model: more than two successors")
            e = exercise(t, i)
            nxt.append(cont if e is None or e < cont else e)
        values = nxt
    return values[0]


def _expected_payoff(tree, pair: MartingalePair, chi: MixedStoppingTime, payoff: PayoffProcess):
    total = 0
    for t, i in tree.nodes():
        w = pair.P[t][i] * chi.mass[t][i]
        if w:
            xi, zeta = payoff.at(t, i)
            total = total + w * (xi + pair.S[t][i] * zeta)
    return total


def perturb_to_equivalent(
    market: Market,
    target: MartingalePair,
    equivalent: MartingalePair,
    chi: MixedStoppingTime,
    payoff: PayoffProcess,
    delta,
) -> MartingalePair:
    """Blend an approximate martingale with an equivalent one.

    Returns ``(P_d, S_d)`` with ``P_d = (1 - e) P_target + e P_equiv`` and
    ``S_d`` the matching mass-weighted average of the two price processes,
    where ``e = min(1, delta / |gap|) / 2`` and ``gap`` is the difference of
    the expected payoffs.  Masses are positive wherever the equivalent
    measure's are, and the expected payoff moves by less than ``delta``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    tree = market.tree
    tree.require_tree()
    if any(not equivalent.P[t][i] > 0 for t, i in tree.nodes()):
        raise ValueError("the second pair must have strictly positive masses")
    gap = abs(_expected_payoff(tree, equivalent, chi, payoff) - _expected_payoff(tree, target, chi, payoff))
    one = Fraction(1) if isinstance(delta, (int, Fraction)) else 1.0
    eps = one / 2 if gap == 0 else min(one, delta / gap) / 2
    P, S = [], []
    for t in range(tree.horizon + 1):
        prow, srow = [], []
        for i in range(tree.sizes[t]):
            pb, pe = target.P[t][i], equivalent.P[t][i]
            m = (1 - eps) * pb + eps * pe
            prow.append(m)
            srow.append(((1 - eps) * target.S[t][i] * pb + eps * equivalent.S[t][i] * pe) / m)
        P.append(tuple(prow))
        S.append(tuple(srow))
    return MartingalePair(tuple(P), tuple(S), equivalent=True)

