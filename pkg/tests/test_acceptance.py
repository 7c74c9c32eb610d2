"""End-to-end acceptance checks; one test per criterion.

Run ``pytest tests/test_acceptance.py`` to get the PASS/FAIL summary; the
three table reproductions price N up to 1000 and take several minutes each.
"""

import json
import math
import random
import time
from decimal import Decimal
from fractions import Fraction as F
from pathlib import Path

import pytest

from randfuncs import random_convex, random_pl, random_spread, spread_inside
from randmodels import float_payoff, random_market, random_payoff
from superhedge.buyer import check_buyer_superhedge, construct_buyer_certificate, hedge_buyer, price_buyer
from superhedge.cli import PRESETS, format_price, run
from superhedge.estimator import AmericanOptionPricer
from superhedge.market import (
    is_self_financing,
    two_step_example,
    verify_approx_martingale,
)
from superhedge.modelfile import parse_model
from superhedge.oracle import oracle_buyer_price, oracle_seller_price, snell_envelope
from superhedge.pl_algebra import (
    UNBOUNDED_BELOW,
    concave_cap,
    convex_dual,
    domain_restrict,
    dual_inverse,
    gradient_restrict,
    pl_max,
    transaction_kernel,
)
from superhedge.seller import (
    check_pure_stopping_gap,
    check_seller_superhedge,
    construct_seller_certificate,
    hedge_seller,
    price_seller_dual,
    price_seller_primal,
)

TABLES = json.loads((Path(__file__).parent / "data" / "published_tables.json").read_text())
TABLE_K = {"0.00": F(0), "0.25": F(1, 400), "0.50": F(1, 200), "1.00": F(1, 100), "2.00": F(1, 50)}


def agrees(a, b):
    if isinstance(a, F) and isinstance(b, F):
        return a == b
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9)


def to_float(market):
    from superhedge.market import Market

    return Market(market.tree, tuple(tuple(float(x) for x in r) for r in market.bid),
                  tuple(tuple(float(x) for x in r) for r in market.ask))


@pytest.fixture(scope="module")
def random_models():
    """The randomised exact models of the primal/dual criterion."""
    rng = random.Random(20240501)
    models = []
    for _ in range(200):
        market = random_market(rng, max_horizon=4, max_branch=3)
        models.append((market, random_payoff(rng, market.tree)))
    return models


@pytest.fixture(scope="module")
def oracle_models():
    rng = random.Random(20240502)
    models = []
    for _ in range(50):
        market = random_market(rng, max_horizon=3, max_branch=3)
        models.append((market, random_payoff(rng, market.tree)))
    return models


@pytest.fixture(scope="module")
def lattice_models():
    """Small instances of the three published lattice set-ups, every cost level."""
    out = []
    for preset, sizes in (("table1", (2, 5, 8)), ("table2", (2, 5, 8)), ("table3", (2, 4, 6))):
        spec = parse_model(PRESETS[preset])
        for N in sizes:
            for k in spec.k:
                market, payoff = AmericanOptionPricer(**spec.pricer_params(N, k, "float")).build()
                out.append((f"{preset} N={N} k={k}", market, payoff))
    return out


def all_priced_models(random_models, oracle_models, lattice_models):
    market, payoff = two_step_example()
    yield "worked example", market, payoff
    for n, (market, payoff) in enumerate(random_models):
        yield f"random #{n}", market, payoff
    for n, (market, payoff) in enumerate(oracle_models):
        yield f"oracle #{n}", market, payoff
    yield from lattice_models


@pytest.mark.acceptance(1, "worked two-step example, exact")
def test_criterion_1_worked_example():
    start = time.perf_counter()
    market, payoff = two_step_example()
    tree = market.tree
    node = {tree.label(t, i): (t, i) for t, i in tree.nodes()}
    ask, pfns = price_seller_primal(market, payoff)
    bid, bfns = price_buyer(market, payoff)
    assert (ask, bid) == (F(9, 2), F(6, 5))

    _, dfns = price_seller_dual(market, payoff)
    chi = construct_seller_certificate(dfns, payoff).chi.mass
    (_, u), (_, uu), (_, ud) = node["u"], node["uu"], node["ud"]
    assert chi[1][u] == F(3, 4)
    assert chi[2][uu] == chi[2][ud] == F(1, 4)

    seller = hedge_seller(pfns, (ask, F(0)), rule="flatten")
    assert seller.initial == (F(9, 2), 0)
    assert seller.rebalanced[0] == ((F(-3), F(3, 4)),)
    assert seller.rebalanced[1] == ((F(-3), F(3, 4)), (F(3, 2), F(0)))

    buyer, stop = hedge_buyer(bfns, (-bid, F(0)))
    assert stop == frozenset({node["u"], node["d"]})
    assert buyer.initial == (F(-6, 5), 0)
    assert buyer.rebalanced[0] == ((F(9, 5), F(-3, 10)),)

    pure, best = check_pure_stopping_gap(market, payoff)
    assert pure == F(18, 5) and pure < best == F(9, 2)
    elapsed = time.perf_counter() - start
    print(f"criterion 1 runtime {elapsed:.3f} s")
    assert elapsed < 1.0


def _table_mismatches(name):
    published = TABLES[name]
    start = time.perf_counter()
    report = run(None, name)
    elapsed = time.perf_counter() - start
    ours = {(n, k): (ask, bid) for n, k, ask, bid in report.rows}
    bad = []
    for key, k in TABLE_K.items():
        for col, N in enumerate(TABLES["N"]):
            ask, bid = ours[(N, k)]
            for side, value in (("ask", ask), ("bid", bid)):
                want = Decimal(published[key][side][col])
                got = Decimal(format_price(value))
                if abs(got - want) > Decimal("0.0001"):
                    bad.append(f"N={N} k={key}% {side}: {got} vs {want}")
    print(f"{name}: {len(TABLE_K) * len(TABLES['N'])} cells in {elapsed:.0f} s")
    return bad, elapsed


@pytest.mark.acceptance(2, "binomial put table, 60 entries to 1e-4")
def test_criterion_2_put_table():
    bad, elapsed = _table_mismatches("table1")
    assert not bad, bad
    assert elapsed < 600


@pytest.mark.acceptance(3, "binomial bull spread table, 60 entries to 1e-4")
def test_criterion_3_binomial_spread_table():
    bad, _ = _table_mismatches("table2")
    assert not bad, bad


@pytest.mark.acceptance(4, "trinomial bull spread table, 60 entries to 1e-4")
def test_criterion_4_trinomial_spread_table():
    bad, _ = _table_mismatches("table3")
    assert not bad, bad


@pytest.mark.acceptance(5, "primal = dual on 200 random trees, exact and float")
def test_criterion_5_primal_dual(random_models):
    bad = []
    for n, (market, payoff) in enumerate(random_models):
        if price_seller_primal(market, payoff)[0] != price_seller_dual(market, payoff)[0]:
            bad.append(f"exact #{n}")
        fmarket, fpayoff = to_float(market), float_payoff(payoff)
        if not agrees(price_seller_primal(fmarket, fpayoff)[0], price_seller_dual(fmarket, fpayoff)[0]):
            bad.append(f"float #{n}")
    assert not bad, bad


@pytest.mark.acceptance(6, "recursions equal the LP / enumeration oracle on 50 trees")
def test_criterion_6_oracle(oracle_models):
    bad = []
    for n, (market, payoff) in enumerate(oracle_models):
        if oracle_seller_price(market, payoff) != price_seller_primal(market, payoff)[0]:
            bad.append(f"ask #{n}")
        if oracle_buyer_price(market, payoff) != price_buyer(market, payoff)[0]:
            bad.append(f"bid #{n}")
    assert not bad, bad


@pytest.mark.acceptance(7, "seller and buyer certificates on every priced model")
def test_criterion_7_certificates(random_models, oracle_models, lattice_models):
    bad = []
    for name, market, payoff in all_priced_models(random_models, oracle_models, lattice_models):
        tree_market, origin = market.expand()
        tree_payoff = payoff.expand(origin)
        ask, dfns = price_seller_dual(market, payoff)
        cert = construct_seller_certificate(dfns, payoff)
        if not verify_approx_martingale(tree_market, cert.pair, cert.chi):
            bad.append(f"{name}: seller pair")
        if not agrees(cert.expected_payoff(), ask):
            bad.append(f"{name}: seller expectation {cert.expected_payoff()} vs {ask}")
        if cert.identity_residuals():
            bad.append(f"{name}: seller identities {cert.identity_residuals()[:3]}")

        bid, bfns = price_buyer(market, payoff)
        _, stop = hedge_buyer(bfns, (-bid, 0 * bid))
        bcert = construct_buyer_certificate(tree_market, tree_payoff, stop)
        if not verify_approx_martingale(tree_market, bcert.pair, bcert.tau):
            bad.append(f"{name}: buyer pair")
        if not agrees(bcert.expected_payoff(), bid):
            bad.append(f"{name}: buyer expectation {bcert.expected_payoff()} vs {bid}")
        if bcert.seller_certificate.identity_residuals():
            bad.append(f"{name}: buyer identities")
    assert not bad, bad


@pytest.mark.acceptance(8, "seller and buyer hedges superhedge and self-finance")
def test_criterion_8_hedges(random_models, oracle_models, lattice_models):
    bad = []
    for name, market, payoff in all_priced_models(random_models, oracle_models, lattice_models):
        tree_market, origin = market.expand()
        tree_payoff = payoff.expand(origin)
        ask, sfns = price_seller_primal(market, payoff)
        seller = hedge_seller(sfns, (ask, 0 * ask))
        if not (is_self_financing(tree_market, seller) and check_seller_superhedge(tree_market, tree_payoff, seller)):
            bad.append(f"{name}: seller")
        bid, bfns = price_buyer(market, payoff)
        buyer, stop = hedge_buyer(bfns, (-bid, 0 * bid))
        if not (is_self_financing(tree_market, buyer)
                and check_buyer_superhedge(tree_market, tree_payoff, buyer, stop)):
            bad.append(f"{name}: buyer")
    assert not bad, bad


@pytest.mark.acceptance(9, "zero cost equals the Snell envelope; bid <= ask everywhere")
def test_criterion_9_degeneration(random_models, oracle_models):
    bad = []
    for N in (20, 100):
        market, payoff = AmericanOptionPricer(n_steps=N, cost=0.0).build()
        snell = snell_envelope(market, payoff)
        ask, bid = AmericanOptionPricer(n_steps=N, cost=0.0).fit().prices()
        if not (agrees(ask, snell) and agrees(bid, snell)):
            bad.append(f"N={N}: {ask} {bid} vs {snell}")
    for n, (market, payoff) in enumerate(random_models + oracle_models):
        if price_buyer(market, payoff)[0] > price_seller_dual(market, payoff)[0]:
            bad.append(f"bid above ask #{n}")
    assert not bad, bad


def _epigraph_sum_ok(rng, f, b, a, g):
    """Sums of points of epi h and epi f lie in epi g, and g is attained as
    such a sum at sampled arguments."""
    h = transaction_kernel(b, a)
    for _ in range(4):
        y1, y2 = F(rng.randint(-60, 60), 3), F(rng.randint(-60, 60), 3)
        if g(y1 + y2) > h(y1) + f(y2):
            return False
    for _ in range(3):
        y = F(rng.randint(-60, 60), 3)
        if g(y) != min(h(y - z) + f(z) for z in list(f.xs) + [y]):
            return False
    return True


@pytest.mark.acceptance(10, "piecewise-linear algebra properties on 1000 random functions")
def test_criterion_10_pl_algebra():
    rng = random.Random(20240510)
    bad = []
    for n in range(1000):
        f, g = random_convex(rng), random_convex(rng)
        if dual_inverse(convex_dual(f)) != f:
            bad.append(f"#{n} involution")
        if convex_dual(pl_max(f, g)) != concave_cap([convex_dual(f), convex_dual(g)]):
            bad.append(f"#{n} max/cap")
        b, a = spread_inside(rng, f)
        restricted = gradient_restrict(f, b, a)
        if restricted is not UNBOUNDED_BELOW and convex_dual(restricted) != domain_restrict(convex_dual(f), b, a):
            bad.append(f"#{n} gr/dr")
        p = random_pl(rng)
        b, a = random_spread(rng)
        gp = gradient_restrict(p, b, a)
        if gp is not UNBOUNDED_BELOW and not _epigraph_sum_ok(rng, p, b, a, gp):
            bad.append(f"#{n} minkowski")
    assert not bad, bad[:10]
