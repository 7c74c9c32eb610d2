"""Random arbitrage-free models on small event trees."""

import random
from fractions import Fraction

from superhedge.market import EventTree, Market, PayoffProcess


def random_tree(rng, horizon, max_branch=3):
    succ, size = [], 1
    for _ in range(horizon):
        level, nxt = [], 0
        for _ in range(size):
            k = rng.randint(1, max_branch)
            level.append(tuple(range(nxt, nxt + k)))
            nxt += k
        succ.append(tuple(level))
        size = nxt
    return EventTree(tuple(succ))


def _child_mids(rng, s, k):
    if k == 1:
        return [s]
    up = s * (1 + Fraction(rng.randint(1, 8), 20))
    down = s * (1 - Fraction(rng.randint(1, 8), 20))
    rest = [s * (1 + Fraction(rng.randint(-8, 8), 20)) for _ in range(k - 2)]
    mids = [up, down] + rest
    rng.shuffle(mids)
    return mids


def random_market(rng, horizon=None, max_branch=3, max_spread=Fraction(1, 5), exact=True,
                  max_horizon=3):
    """Market whose mid prices admit a full-support martingale measure.

    Each node's mid lies strictly between two of its children's mids, and
    bid/ask bracket the mid with a random relative spread, so the model is
    free of arbitrage.
    """
    T = horizon if horizon is not None else rng.randint(1, max_horizon)
    tree = random_tree(rng, T, max_branch)
    mids = [[Fraction(rng.randint(5, 20))]]
    for t in range(T):
        row = [None] * tree.sizes[t + 1]
        for i, cs in enumerate(tree.succ[t]):
            for c, m in zip(cs, _child_mids(rng, mids[t][i], len(cs))):
                row[c] = m
        mids.append(row)
    bid, ask = [], []
    for level in mids:
        b_row, a_row = [], []
        for m in level:
            spread = max_spread * Fraction(rng.randint(0, 10), 10)
            lo = Fraction(rng.randint(0, 10), 10)
            b_row.append(m * (1 - spread * lo / 2))
            a_row.append(m * (1 + spread * (1 - lo) / 2))
        bid.append(tuple(b_row))
        ask.append(tuple(a_row))
    if not exact:
        bid = [tuple(float(x) for x in r) for r in bid]
        ask = [tuple(float(x) for x in r) for r in ask]
    return Market(tree, tuple(bid), tuple(ask))


def random_payoff(rng, tree, p_missing=0.2, terminal_exercisable=True):
    """Integer cash/share payoffs; some non-terminal nodes are not exercisable."""
    levels = []
    for t in range(tree.horizon + 1):
        row = []
        for _ in range(tree.sizes[t]):
            if t < tree.horizon or not terminal_exercisable:
                if rng.random() < p_missing:
                    row.append(None)
                    continue
            row.append((Fraction(rng.randint(-10, 10)), Fraction(rng.randint(-2, 2))))
        levels.append(tuple(row))
    return PayoffProcess(tuple(levels))


def float_payoff(payoff):
    return PayoffProcess(tuple(
        tuple(None if v is None else (float(v[0]), float(v[1])) for v in level)
        for level in payoff.values
    ))


def rng_for(seed):
    return random.Random(seed)
