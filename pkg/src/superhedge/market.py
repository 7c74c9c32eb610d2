"""Finite market models with a bid-ask spread on a single risky asset.

The filtration is an :class:`EventTree` whose nodes at time ``t`` are the
atoms of ``F_t``.  Recombinant lattices store one logical node per
``(t, level)``; operations that depend on the path (strategies, mixed stopping
times, measures) need a genuine tree and use :meth:`EventTree.expand`.

All prices are discounted; the bond price is 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterator, Optional, Sequence

from ._num import close, is_exact, le, lt, to_number

__all__ = [
    "ApproxMartingaleReport",
    "EventTree",
    "Market",
    "MartingalePair",
    "MixedStoppingTime",
    "NoArbitrageResult",
    "PayoffProcess",
    "SelfFinancingReport",
    "Strategy",
    "american_put_physical",
    "build_binomial",
    "build_trinomial",
    "cash_basket",
    "chi_star",
    "conditional_tail",
    "enumerate_stopping_times",
    "expectation",
    "is_self_financing",
    "liquidation_value",
    "no_arbitrage_check",
    "pure_stopping_time",
    "setup_cost",
    "stopped_sum",
    "stopped_value",
    "two_step_example",
    "verify_approx_martingale",
]


class TreeTooLargeError(ValueError):
    """Raised when expanding or enumerating would exceed a node budget."""


# --------------------------------------------------------------------------
# Event trees
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EventTree:
    """Rooted filtration tree (or recombinant lattice).

    ``succ[t][i]`` lists the indices at time ``t + 1`` of the successors of
    node ``i`` at time ``t``; the horizon is ``len(succ)``.
    """

    succ: tuple
    recombinant: bool = False
    labels: Optional[tuple] = None
    parent: Optional[tuple] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        succ = tuple(tuple(tuple(c) for c in level) for level in self.succ)
        object.__setattr__(self, "succ", succ)
        if not succ or len(succ[0]) != 1:
            raise ValueError("an event tree needs a single root and at least one step")
        counts = [1]
        for t, level in enumerate(succ):
            if len(level) != counts[t]:
                raise ValueError(f"time {t}: expected {counts[t]} nodes, got {len(level)}")
            children = [c for cs in level for c in cs]
            if any(not cs for cs in level):
                raise ValueError(f"time {t}: every non-terminal node needs a successor")
            size = max(children) + 1
            if sorted(set(children)) != list(range(size)):
                raise ValueError(f"time {t + 1}: successor indices must cover 0..{size - 1}")
            if not self.recombinant and len(children) != size:
                raise ValueError(f"time {t + 1}: a node has more than one predecessor")
            counts.append(size)
        if not self.recombinant:
            parent = [(None,)]
            for level in succ:
                par = [0] * sum(len(cs) for cs in level)
                for i, cs in enumerate(level):
                    for c in cs:
                        par[c] = i
                parent.append(tuple(par))
            object.__setattr__(self, "parent", tuple(parent))

    @property
    def horizon(self) -> int:
        return len(self.succ)

    @property
    def sizes(self) -> tuple:
        return (1,) + tuple(sum(len(cs) for cs in level) if not self.recombinant
                            else max(c for cs in level for c in cs) + 1 for level in self.succ)

    @property
    def n_nodes(self) -> int:
        return sum(self.sizes)

    def nodes(self) -> Iterator[tuple]:
        for t, n in enumerate(self.sizes):
            for i in range(n):
                yield t, i

    def children(self, t: int, i: int) -> tuple:
        return self.succ[t][i] if t < self.horizon else ()

    def label(self, t: int, i: int) -> str:
        if self.labels is not None:
            return self.labels[t][i]
        return f"{t}:{i}"

    def require_tree(self):
        if self.recombinant:
            raise ValueError("operation needs a non-recombinant tree; call expand() first")

    def path_count(self) -> int:
        counts = [1] * self.sizes[-1]
        for t in range(self.horizon - 1, -1, -1):
            counts = [sum(counts[c] for c in cs) for cs in self.succ[t]]
        return counts[0]

    def expand(self, max_nodes: int = 200_000):
        """Path-expanded tree and the logical origin of each expanded node."""
        if not self.recombinant:
            return self, tuple(tuple(range(n)) for n in self.sizes)
        succ, origin = [], [(0,)]
        total = 1
        for t in range(self.horizon):
            level, nxt = [], []
            for i in origin[t]:
                cs = []
                for c in self.succ[t][i]:
                    cs.append(len(nxt))
                    nxt.append(c)
                level.append(tuple(cs))
            total += len(nxt)
            if total > max_nodes:
                raise TreeTooLargeError(f"expanded tree exceeds {max_nodes} nodes")
            succ.append(tuple(level))
            origin.append(tuple(nxt))
        labels = None
        if self.labels is not None:
            labels = tuple(tuple(self.labels[t][o] for o in origin[t]) for t in range(len(origin)))
        return EventTree(tuple(succ), False, labels), tuple(origin)

    @classmethod
    def from_branching(cls, branching: Sequence[Sequence[int]]):
        """Tree where ``branching[t][i]`` is the number of successors of node ``(t, i)``."""
        succ, nxt = [], 0
        for level in branching:
            row, nxt = [], 0
            for k in level:
                row.append(tuple(range(nxt, nxt + k)))
                nxt += k
            succ.append(tuple(row))
        return cls(tuple(succ))


# --------------------------------------------------------------------------
# Prices, payoffs, strategies
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Market:
    """Event tree with discounted bid and ask prices at every node.

    ``mid`` (undiscounted lattice prices) and ``discount`` (per-time discount
    factors) are optional metadata used by the payoff builders.
    """

    tree: EventTree
    bid: tuple
    ask: tuple
    mid: Optional[tuple] = None
    discount: Optional[tuple] = None
    appended_step: bool = False

    def __post_init__(self):
        bid = tuple(tuple(level) for level in self.bid)
        ask = tuple(tuple(level) for level in self.ask)
        object.__setattr__(self, "bid", bid)
        object.__setattr__(self, "ask", ask)
        sizes = self.tree.sizes
        if tuple(len(level) for level in bid) != sizes or tuple(len(level) for level in ask) != sizes:
            raise ValueError("price arrays do not match the tree shape")
        for t, i in self.tree.nodes():
            b, a = bid[t][i], ask[t][i]
            if not b > 0:
                raise ValueError(f"bid price at node {t}:{i} must be positive")
            if lt(a, b):
                raise ValueError(f"ask {a} below bid {b} at node {t}:{i}")

    @property
    def exact(self) -> bool:
        return is_exact(self.bid[0][0], self.ask[0][0])

    @property
    def horizon(self) -> int:
        return self.tree.horizon

    def spread(self, t, i):
        return self.bid[t][i], self.ask[t][i]

    def expand(self, max_nodes: int = 200_000):
        tree, origin = self.tree.expand(max_nodes)
        if tree is self.tree:
            return self, origin

        def remap(values):
            if values is None:
                return None
            return tuple(tuple(values[t][o] for o in origin[t]) for t in range(len(origin)))

        return (
            Market(tree, remap(self.bid), remap(self.ask), remap(self.mid), self.discount,
                   self.appended_step),
            origin,
        )

    def to_exact(self) -> "Market":
        conv = lambda levels: tuple(tuple(to_number(x, True) for x in lv) for lv in levels)  # noqa: E731
        return Market(self.tree, conv(self.bid), conv(self.ask), self.mid, self.discount,
                      self.appended_step)


@dataclass(frozen=True)
class PayoffProcess:
    """Per-node payoff ``(xi, zeta)`` in cash and shares, or ``None`` where
    the option cannot be exercised (the ``(-inf, -inf)`` convention)."""

    values: tuple

    def __post_init__(self):
        vals = tuple(tuple(None if v is None else (v[0], v[1]) for v in level) for level in self.values)
        object.__setattr__(self, "values", vals)

    def at(self, t, i):
        return self.values[t][i]

    def exercisable(self, t, i) -> bool:
        return self.values[t][i] is not None

    def check(self, tree: EventTree):
        if tuple(len(level) for level in self.values) != tree.sizes:
            raise ValueError("payoff array does not match the tree shape")

    def expand(self, origin):
        return PayoffProcess(tuple(tuple(self.values[t][o] for o in origin[t]) for t in range(len(origin))))

    def restricted(self, nodes) -> "PayoffProcess":
        """Payoff exercisable only at the given ``(t, i)`` nodes."""
        keep = set(nodes)
        return PayoffProcess(tuple(
            tuple(v if (t, i) in keep else None for i, v in enumerate(level))
            for t, level in enumerate(self.values)
        ))

    def reflected(self, nodes) -> "PayoffProcess":
        """``(-xi, -zeta)`` on the given nodes, not exercisable elsewhere."""
        keep = set(nodes)
        return PayoffProcess(tuple(
            tuple((-v[0], -v[1]) if (t, i) in keep and v is not None else None
                  for i, v in enumerate(level))
            for t, level in enumerate(self.values)
        ))

    def to_exact(self) -> "PayoffProcess":
        return PayoffProcess(tuple(
            tuple(None if v is None else (to_number(v[0], True), to_number(v[1], True)) for v in level)
            for level in self.values
        ))

    @classmethod
    def constant(cls, tree: EventTree, xi, zeta):
        return cls(tuple(tuple((xi, zeta) for _ in range(n)) for n in tree.sizes))


@dataclass(frozen=True)
class Strategy:
    """Predictable cash/stock holdings.

    ``initial`` is ``(alpha_0, beta_0)``; ``rebalanced[t][i]`` is the portfolio
    ``(alpha_{t+1}, beta_{t+1})`` chosen at node ``(t, i)`` and inherited by all
    its successors, so predictability holds by construction.
    """

    initial: tuple
    rebalanced: tuple

    def entering(self, tree: EventTree, t: int, i: int) -> tuple:
        """Holdings ``(alpha_t, beta_t)`` at node ``(t, i)``."""
        if t == 0:
            return self.initial
        return self.rebalanced[t - 1][tree.parent[t][i]]

    def leaving(self, t: int, i: int) -> tuple:
        return self.rebalanced[t][i]


@dataclass(frozen=True)
class MixedStoppingTime:
    """Non-negative adapted exercise masses summing to one along every path."""

    mass: tuple

    def validate(self, tree: EventTree):
        tree.require_tree()
        for t, i in tree.nodes():
            if lt(self.mass[t][i], 0):
                raise ValueError(f"negative mass at {t}:{i}")
        star = chi_star(tree, self)
        T = tree.horizon
        for i in range(tree.sizes[T]):
            if not close(star[T][i], self.mass[T][i]):
                raise ValueError(f"masses along the path to leaf {i} do not sum to one")

    @property
    def is_pure(self) -> bool:
        return all(m == 0 or m == 1 for level in self.mass for m in level)


@dataclass(frozen=True)
class MartingalePair:
    """Probability masses ``P[t][i]`` of every node and a price process ``S``."""

    P: tuple
    S: tuple
    equivalent: bool = False


# --------------------------------------------------------------------------
# Liquidation and self-financing
# --------------------------------------------------------------------------


def liquidation_value(gamma, delta, bid, ask):
    """Cash obtained by closing ``gamma`` cash and ``delta`` shares."""
    if lt(ask, bid) or not bid > 0:
        raise ValueError(f"invalid spread bid={bid}, ask={ask}")
    if delta >= 0:
        return gamma + bid * delta
    return gamma + ask * delta


def setup_cost(gamma, delta, bid, ask):
    """Cost of acquiring the portfolio ``(gamma, delta)``."""
    return -liquidation_value(-gamma, -delta, bid, ask)


@dataclass(frozen=True)
class SelfFinancingReport:
    ok: bool
    violations: tuple

    def __bool__(self):
        return self.ok


def is_self_financing(market: Market, strategy: Strategy) -> SelfFinancingReport:
    """Check that every rebalancing has non-negative liquidation value."""
    tree = market.tree
    tree.require_tree()
    if len(strategy.rebalanced) != tree.horizon or any(
        len(strategy.rebalanced[t]) != tree.sizes[t] for t in range(tree.horizon)
    ):
        raise ValueError("strategy shape does not match the tree")
    bad = []
    for t in range(tree.horizon):
        for i in range(tree.sizes[t]):
            a0, b0 = strategy.entering(tree, t, i)
            a1, b1 = strategy.rebalanced[t][i]
            val = liquidation_value(a0 - a1, b0 - b1, market.bid[t][i], market.ask[t][i])
            if lt(val, 0):
                bad.append(((t, i), val))
    return SelfFinancingReport(not bad, tuple(bad))


# --------------------------------------------------------------------------
# Stopping times
# --------------------------------------------------------------------------


def pure_stopping_time(tree: EventTree, stop_nodes) -> MixedStoppingTime:
    """0/1 masses for the stopping time that stops at the given nodes.

    ``stop_nodes`` must meet every root-to-leaf path exactly once.
    """
    tree.require_tree()
    stop = set(stop_nodes)
    mass = [[0] * n for n in tree.sizes]
    for t, i in stop:
        mass[t][i] = 1
    chi = MixedStoppingTime(tuple(tuple(level) for level in mass))
    # every path must contain exactly one stop node
    hit = [(0, 0) in stop]
    for t in range(tree.horizon):
        nxt = [None] * tree.sizes[t + 1]
        for i, cs in enumerate(tree.succ[t]):
            for c in cs:
                here = (t + 1, c) in stop
                if hit[i] and here:
                    raise ValueError(f"node {t + 1}:{c} lies after another stop node")
                nxt[c] = hit[i] or here
        hit = nxt
    if not all(hit):
        raise ValueError("stop nodes do not cover every path")
    return chi


def enumerate_stopping_times(tree: EventTree, allowed=None, limit: int = 100_000):
    """All pure stopping times as frozensets of stop nodes.

    ``allowed(t, i)`` may exclude nodes; raises :class:`TreeTooLargeError`
    beyond ``limit`` stopping times.
    """
    tree.require_tree()
    T = tree.horizon

    def options(t, i):
        out = []
        if allowed is None or allowed(t, i):
            out.append(frozenset([(t, i)]))
        if t < T:
            child_opts = [options(t + 1, c) for c in tree.succ[t][i]]
            n = 1
            for co in child_opts:
                n *= len(co)
            if n + len(out) > limit:
                raise TreeTooLargeError(f"more than {limit} stopping times")
            for combo in product(*child_opts):
                out.append(frozenset().union(*combo))
        return out

    return options(0, 0)


def chi_star(tree: EventTree, chi: MixedStoppingTime) -> tuple:
    """``chi*_t = sum_{s >= t} chi_s = 1 - sum_{s < t} chi_s`` at every node."""
    tree.require_tree()
    one = chi.mass[0][0] * 0 + 1
    star = [(one,)]
    for t in range(tree.horizon):
        nxt = [None] * tree.sizes[t + 1]
        for i, cs in enumerate(tree.succ[t]):
            rest = star[t][i] - chi.mass[t][i]
            for c in cs:
                nxt[c] = rest
        star.append(tuple(nxt))
    return tuple(star)


def _leaf_paths(tree: EventTree):
    """For each leaf, the node index at every time along its path."""
    T = tree.horizon
    paths = []
    for leaf in range(tree.sizes[T]):
        idx = [0] * (T + 1)
        idx[T] = leaf
        for t in range(T, 0, -1):
            idx[t - 1] = tree.parent[t][idx[t]]
        paths.append(idx)
    return paths


def stopped_sum(tree: EventTree, chi: MixedStoppingTime, Z) -> tuple:
    """For every leaf, ``[Z^{chi*}_0, ..., Z^{chi*}_T]`` along its path."""
    tree.require_tree()
    out = []
    for idx in _leaf_paths(tree):
        acc = chi.mass[0][0] * 0
        tail = []
        for t in range(tree.horizon, -1, -1):
            acc = acc + chi.mass[t][idx[t]] * Z[t][idx[t]]
            tail.append(acc)
        out.append(tuple(reversed(tail)))
    return tuple(out)


def stopped_value(tree: EventTree, chi: MixedStoppingTime, Z) -> tuple:
    """Per-leaf value ``Z_chi = sum_t chi_t Z_t``."""
    return tuple(s[0] for s in stopped_sum(tree, chi, Z))


def expectation(tree: EventTree, P, leaf_values) -> object:
    T = tree.horizon
    total = 0
    for leaf, v in enumerate(leaf_values):
        p = P[T][leaf]
        if p:
            total = total + p * v
    return total


def conditional_tail(tree: EventTree, P, chi: MixedStoppingTime, Z) -> tuple:
    """``E_P(Z^{chi*}_t | F_t)`` at every node of positive mass (``None`` elsewhere)."""
    tree.require_tree()
    T = tree.horizon
    G = [None] * (T + 1)
    G[T] = [P[T][i] * chi.mass[T][i] * Z[T][i] if P[T][i] else 0 for i in range(tree.sizes[T])]
    for t in range(T - 1, -1, -1):
        row = []
        for i, cs in enumerate(tree.succ[t]):
            g = sum((G[t + 1][c] for c in cs), 0)
            if P[t][i]:
                g = g + P[t][i] * chi.mass[t][i] * Z[t][i]
            row.append(g)
        G[t] = row
    return tuple(
        tuple(G[t][i] / P[t][i] if P[t][i] else None for i in range(tree.sizes[t]))
        for t in range(T + 1)
    )


# --------------------------------------------------------------------------
# Approximate martingales
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ApproxMartingaleReport:
    ok: bool
    band_violations: tuple
    sandwich_residuals: tuple
    problems: tuple

    def __bool__(self):
        return self.ok


def _check_measure(tree: EventTree, P):
    problems = []
    if not close(P[0][0], 1):
        problems.append("root mass is not 1")
    for t in range(tree.horizon):
        for i, cs in enumerate(tree.succ[t]):
            s = sum((P[t + 1][c] for c in cs), 0)
            if not close(s, P[t][i]):
                problems.append(f"mass at {t}:{i} differs from the sum over its successors")
    for t, i in tree.nodes():
        if lt(P[t][i], 0):
            problems.append(f"negative mass at {t}:{i}")
    return problems


def verify_approx_martingale(
    market: Market, pair: MartingalePair, chi: MixedStoppingTime, equivalent: Optional[bool] = None
) -> ApproxMartingaleReport:
    """Check ``S`` lies in the bid-ask band and the ``chi``-weighted sandwich

    ``chi*_{t+1} S^b_t <= E_P(S^{chi*}_{t+1} | F_t) <= chi*_{t+1} S^a_t``

    at every node of positive mass.  ``equivalent`` (default: the pair's tag)
    additionally requires strictly positive masses.
    """
    tree = market.tree
    tree.require_tree()
    P, S = pair.P, pair.S
    if equivalent is None:
        equivalent = pair.equivalent
    problems = _check_measure(tree, P)
    if problems:
        raise ValueError("inconsistent measure: " + "; ".join(problems))
    if equivalent:
        problems = [f"zero mass at {t}:{i}" for t, i in tree.nodes() if not P[t][i] > 0]
    band = []
    for t, i in tree.nodes():
        if lt(S[t][i], market.bid[t][i]) or lt(market.ask[t][i], S[t][i]):
            band.append(((t, i), S[t][i]))
    star = chi_star(tree, chi)
    tail = conditional_tail(tree, P, chi, S)
    residuals = []
    for t in range(tree.horizon):
        for i, cs in enumerate(tree.succ[t]):
            if not P[t][i]:
                continue
            nxt = star[t][i] - chi.mass[t][i]
            e = sum((P[t + 1][c] * tail[t + 1][c] for c in cs if P[t + 1][c]), 0) / P[t][i]
            lo = nxt * market.bid[t][i]
            hi = nxt * market.ask[t][i]
            if lt(e, lo) or lt(hi, e):
                residuals.append(((t, i), e, lo, hi))
    ok = not (band or residuals or problems)
    return ApproxMartingaleReport(ok, tuple(band), tuple(residuals), tuple(problems))


# --------------------------------------------------------------------------
# No-arbitrage decision and witness
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Interval:
    lo: object
    lo_closed: bool
    hi: object
    hi_closed: bool

    def empty(self) -> bool:
        if lt(self.hi, self.lo):
            return True
        if close(self.lo, self.hi):
            return not (self.lo_closed and self.hi_closed)
        return False

    def contains(self, x) -> bool:
        if self.lo_closed:
            if lt(x, self.lo):
                return False
        elif le(x, self.lo):
            return False
        if self.hi_closed:
            return le(x, self.hi)
        return lt(x, self.hi)

    def center(self):
        if close(self.lo, self.hi):
            return self.lo
        return (self.lo + self.hi) / 2

    def intersect(self, other) -> "_Interval":
        if lt(self.lo, other.lo):
            lo, lc = other.lo, other.lo_closed
        elif lt(other.lo, self.lo):
            lo, lc = self.lo, self.lo_closed
        else:
            lo, lc = self.lo, self.lo_closed and other.lo_closed
        if lt(self.hi, other.hi):
            hi, hc = self.hi, self.hi_closed
        elif lt(other.hi, self.hi):
            hi, hc = other.hi, other.hi_closed
        else:
            hi, hc = self.hi, self.hi_closed and other.hi_closed
        return _Interval(lo, lc, hi, hc)


def _positive_combinations(children) -> _Interval:
    """Set of ``sum p_k s_k`` with all ``p_k > 0`` and ``s_k`` in the children."""
    lo = min(c.lo for c in children)
    hi = max(c.hi for c in children)
    lo_closed = all(close(c.lo, lo) and c.lo_closed for c in children)
    hi_closed = all(close(c.hi, hi) and c.hi_closed for c in children)
    return _Interval(lo, lo_closed, hi, hi_closed)


@dataclass(frozen=True)
class NoArbitrageResult:
    """Outcome of the backward interval recursion.

    ``intervals[t][i]`` is the set of prices at ``(t, i)`` attainable by a
    martingale under a measure with full support.  When the model is
    arbitrage-free, ``prices`` and ``cond_prob`` describe one such pair
    (conditional probabilities over ``succ``, strictly positive).
    """

    ok: bool
    intervals: tuple
    prices: Optional[tuple] = None
    cond_prob: Optional[tuple] = None

    def __bool__(self):
        return self.ok

    def pair(self, tree: EventTree) -> MartingalePair:
        tree.require_tree()
        one = self.prices[0][0] * 0 + 1
        P = [(one,)]
        for t in range(tree.horizon):
            nxt = [None] * tree.sizes[t + 1]
            for i, cs in enumerate(tree.succ[t]):
                for c, p in zip(cs, self.cond_prob[t][i]):
                    nxt[c] = P[t][i] * p
            P.append(tuple(nxt))
        return MartingalePair(tuple(P), self.prices, equivalent=True)


def _inside_point(iv: _Interval, target):
    """Point of ``iv`` nearest to ``target`` (nudged inside at open ends)."""
    if iv.contains(target):
        return target
    x = iv.lo if target < iv.lo else iv.hi
    if iv.contains(x):
        return x
    return iv.center()


def _split(target, children):
    """Positive weights and points ``s_k`` in the children averaging to ``target``."""
    pts = [_inside_point(c, target) for c in children]
    d = [p - target for p in pts]
    exact = is_exact(target)
    zero = lambda v: (v == 0) if exact else abs(v) <= 1e-12 * max(1.0, abs(target))  # noqa: E731
    pos = [k for k in range(len(d)) if not zero(d[k]) and d[k] > 0]
    neg = [k for k in range(len(d)) if not zero(d[k]) and d[k] < 0]
    if pos and not neg:
        for k, c in enumerate(children):
            if zero(d[k]) and lt(c.lo, target):
                pts[k] = (c.lo + target) / 2
                d[k] = pts[k] - target
                neg = [k]
                break
    elif neg and not pos:
        for k, c in enumerate(children):
            if zero(d[k]) and lt(target, c.hi):
                pts[k] = (c.hi + target) / 2
                d[k] = pts[k] - target
                pos = [k]
                break
    n = len(children)
    if not pos and not neg:
        w = [Fraction(1) if exact else 1.0] * n
    else:
        if not pos or not neg:
            raise ValueError("target price outside the attainable range")
        dpos = sum(d[k] for k in pos)
        dneg = -sum(d[k] for k in neg)
        w = []
        for k in range(n):
            if k in pos:
                w.append(1 / dpos)
            elif k in neg:
                w.append(1 / dneg)
            else:
                w.append(1 / (dpos + dneg))
    total = sum(w)
    probs = tuple(x / total for x in w)
    return probs, pts


def no_arbitrage_check(market: Market) -> NoArbitrageResult:
    """Decide absence of arbitrage and build a full-support martingale witness."""
    tree = market.tree
    T = tree.horizon
    iv = [None] * (T + 1)
    iv[T] = [_Interval(b, True, a, True) for b, a in zip(market.bid[T], market.ask[T])]
    for t in range(T - 1, -1, -1):
        row = []
        for i, cs in enumerate(tree.succ[t]):
            band = _Interval(market.bid[t][i], True, market.ask[t][i], True)
            kids = [iv[t + 1][c] for c in cs]
            if any(k.empty() for k in kids):
                row.append(_Interval(1, False, 0, False))
                continue
            row.append(band.intersect(_positive_combinations(kids)))
        iv[t] = row
    intervals = tuple(tuple(level) for level in iv)
    if any(x.empty() for level in iv for x in level):
        return NoArbitrageResult(False, intervals)
    prices = [[None] * n for n in tree.sizes]
    cond = [[None] * n for n in tree.sizes[:-1]]
    assigned = [[False] * n for n in tree.sizes]
    prices[0][0] = iv[0][0].center()
    assigned[0][0] = True
    for t in range(T):
        for i, cs in enumerate(tree.succ[t]):
            if not assigned[t][i]:
                # recombinant lattice: nodes reached from another parent first
                # keep their price; all nodes are reached from some parent
                continue
            target = prices[t][i]
            kids = [iv[t + 1][c] for c in cs]
            fixed = [assigned[t + 1][c] for c in cs]
            if any(fixed):
                probs, pts = _split_with_fixed(target, kids, [prices[t + 1][c] for c in cs], fixed)
            else:
                probs, pts = _split(target, kids)
            cond[t][i] = probs
            for c, p in zip(cs, pts):
                if not assigned[t + 1][c]:
                    prices[t + 1][c] = p
                    assigned[t + 1][c] = True
    return NoArbitrageResult(
        True,
        intervals,
        tuple(tuple(level) for level in prices),
        tuple(tuple(level) for level in cond),
    )


def _split_with_fixed(target, kids, current, fixed):
    """Weights when some successor prices are already fixed (recombinant lattices)."""
    pinned = [
        _Interval(current[k], True, current[k], True) if fixed[k] else kids[k] for k in range(len(kids))
    ]
    if not _positive_combinations(pinned).contains(target):
        raise ValueError("lattice witness construction failed; expand the lattice first")
    return _split(target, pinned)


# --------------------------------------------------------------------------
# Recombinant lattices of the numerical examples
# --------------------------------------------------------------------------


def _lattice(S0, sigma, T_years, N, rate, k, no_cost_at_time0, extra_no_exercise_step, exact,
             branching):
    if not S0 > 0 or not sigma > 0 or N < 1:
        raise ValueError("need S0 > 0, sigma > 0 and N >= 1")
    if not 0 <= k < 1:
        raise ValueError("transaction cost rate must lie in [0, 1)")
    dt = T_years / N
    step = sigma * math.sqrt(dt)
    num = (lambda x: Fraction(x)) if exact else float
    succ, mid, bid, ask, disc = [], [], [], [], []
    for t in range(N + 1):
        if branching == 2:
            levels = [2 * j - t for j in range(t + 1)]
        else:
            levels = list(range(-t, t + 1))
        s = [S0 * math.exp(step * j) for j in levels]
        df = math.exp(-rate * dt * t)
        mid.append(tuple(num(x) for x in s))
        disc.append(num(df))
        if t == 0 and no_cost_at_time0:
            bid.append((num(S0),))
            ask.append((num(S0),))
        else:
            bid.append(tuple(num((1 - k) * x * df) for x in s))
            ask.append(tuple(num((1 + k) * x * df) for x in s))
        if t < N:
            succ.append(tuple(tuple(i + d for d in range(branching)) for i in range(len(levels))))
    if extra_no_exercise_step:
        n = len(mid[-1])
        succ.append(tuple((i,) for i in range(n)))
        mid.append(mid[-1])
        bid.append(bid[-1])
        ask.append(ask[-1])
        disc.append(disc[-1])
    tree = EventTree(tuple(succ), recombinant=True)
    return Market(tree, tuple(bid), tuple(ask), tuple(mid), tuple(disc), extra_no_exercise_step)


def build_binomial(S0, sigma, T_years, N, rate, k, no_cost_at_time0=True,
                   extra_no_exercise_step=False, exact=False) -> Market:
    """Recombinant binomial lattice with factors ``exp(+-sigma sqrt(T/N))``.

    Bid/ask are ``(1 -+ k)`` times the discounted lattice price; with
    ``no_cost_at_time0`` the root has ``bid = ask = S0``.  The optional extra
    step copies the final prices and carries a zero payoff, letting the holder
    never exercise.
    """
    return _lattice(S0, sigma, T_years, N, rate, k, no_cost_at_time0, extra_no_exercise_step,
                    exact, 2)


def build_trinomial(S0, sigma, T_years, N, rate, k, no_cost_at_time0=True,
                    extra_no_exercise_step=False, exact=False) -> Market:
    """As :func:`build_binomial` with factors ``exp(-sigma sqrt(T/N))``, 1, ``exp(sigma sqrt(T/N))``."""
    return _lattice(S0, sigma, T_years, N, rate, k, no_cost_at_time0, extra_no_exercise_step,
                    exact, 3)


def _payoff_levels(market: Market, fn):
    if market.mid is None or market.discount is None:
        raise ValueError("payoff builders need a lattice market with mid prices and discount factors")
    T = market.horizon
    out = []
    for t in range(T + 1):
        zero = market.discount[t] * 0
        if market.appended_step and t == T:
            out.append(tuple((zero, zero) for _ in market.mid[t]))
        else:
            out.append(tuple(fn(market.mid[t][i], market.discount[t]) for i in range(len(market.mid[t]))))
    return PayoffProcess(tuple(out))


def american_put_physical(market: Market, strike) -> PayoffProcess:
    """Delivery of the portfolio ``(K, -1)``; the cash leg is discounted."""
    if not strike > 0:
        raise ValueError("strike must be positive")
    return _payoff_levels(market, lambda s, df: (strike * df, -1 + df * 0))


def cash_basket(market: Market, legs) -> PayoffProcess:
    """Cash-settled basket of calls ``sum sign * (S_t - K)^+`` on the lattice mid price."""
    legs = list(legs)
    if any(not K > 0 for K, _ in legs):
        raise ValueError("strikes must be positive")

    def fn(s, df):
        value = sum((sign * max(s - K, 0) for K, sign in legs), s * 0)
        return (df * value, df * 0)

    return _payoff_levels(market, fn)


def two_step_example():
    """Two-step binomial model with a spread at the up node only, and the
    cash payoff ``(0, 3, 0, 9, 0, 0, 0)`` used as a hand-checkable fixture.

    Returns ``(market, payoff)`` with exact rational prices.
    """
    F = Fraction
    tree = EventTree(
        (((0, 1),), ((0, 1), (2, 3))),
        labels=(("root",), ("u", "d"), ("uu", "ud", "du", "dd")),
    )
    bid = ((F(10),), (F(8), F(6)), (F(16), F(10), F(10), F(4)))
    ask = ((F(10),), (F(16), F(6)), (F(16), F(10), F(10), F(4)))
    xi = ((F(0),), (F(3), F(0)), (F(9), F(0), F(0), F(0)))
    payoff = PayoffProcess(tuple(tuple((x, F(0)) for x in level) for level in xi))
    return Market(tree, bid, ask), payoff
