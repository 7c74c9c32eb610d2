"""Command-line front end: ``superhedge price``.

Exit codes: 0 on success, 1 on errors (bad input, failed pricing), 2 when
``--verify`` finds a mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction

from ._num import close, format_number, lt
from .buyer import check_buyer_superhedge, construct_buyer_certificate, hedge_buyer, price_buyer
from .errors import DegeneratePayoffError, InsufficientEndowmentError, ModelError
from .estimator import AmericanOptionPricer
from .market import (
    Market,
    PayoffProcess,
    TreeTooLargeError,
    is_self_financing,
    two_step_example,
    verify_approx_martingale,
)
from .modelfile import ModelFileError, ModelSpec, parse_model, read_model
from .oracle import oracle_buyer_price, oracle_seller_price
from .seller import (
    check_pure_stopping_gap,
    check_seller_superhedge,
    construct_seller_certificate,
    hedge_seller,
    price_seller_dual,
    price_seller_primal,
)

__all__ = ["PRESETS", "Report", "format_price", "main", "run", "verify_model", "write_csv"]

ORACLE_NODE_BUDGET = 200
CERTIFICATE_NODE_BUDGET = 20_000

_TABLE_N = "20, 40, 100, 250, 500, 1000"
_TABLE_K = "0%, 0.25%, 0.5%, 1%, 2%"
_COMMON = f"S0 = 100\nsigma = 0.2\nT = 0.25\nr = 0.1\nN = {_TABLE_N}\nk = {_TABLE_K}\n"

PRESETS = {
    "table1": "superhedge-model 1\nlattice = binomial\n" + _COMMON
    + "payoff = put\nstrike = 100\nnever_exercise_step = yes\n",
    "table2": "superhedge-model 1\nlattice = binomial\n" + _COMMON
    + "payoff = basket\nlegs = 95:+1, 105:-1\nnever_exercise_step = no\n",
    "table3": "superhedge-model 1\nlattice = trinomial\n" + _COMMON
    + "payoff = basket\nlegs = 95:+1, 105:-1\nnever_exercise_step = no\n",
    "example4": None,
}

CSV_HEADER = ("N", "k", "ask", "bid")


def format_price(x, places=4) -> str:
    """Fixed-point with half-even rounding; negative zero prints as zero."""
    q = Decimal(1).scaleb(-places)
    with localcontext() as ctx:
        ctx.prec = 60
        if isinstance(x, Fraction):
            d = Decimal(x.numerator) / Decimal(x.denominator)
        else:
            d = Decimal(x)
        d = d.quantize(q, rounding=ROUND_HALF_EVEN)
    if d.is_zero():
        d = abs(d)
    return f"{d:.{places}f}"


@dataclass
class Report:
    mode: str
    source: str
    rows: list = field(default_factory=list)  # (N, k percent or None, ask, bid)
    sections: list = field(default_factory=list)  # (title, [lines])
    checks: list = field(default_factory=list)  # (name, ok, detail)

    @property
    def verified(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def csv_rows(self):
        for n, k, ask, bid in self.rows:
            yield (str(n), "" if k is None else format_price(k * 100), format_price(ask), format_price(bid))

    def text(self) -> str:
        out = io.StringIO()
        out.write(f"# superhedge report\n# mode: {self.mode}\n# model: {self.source}\n")
        out.write(",".join(CSV_HEADER) + "\n")
        for row in self.csv_rows():
            out.write(",".join(row) + "\n")
        for title, lines in self.sections:
            out.write(f"[{title}]\n")
            for line in lines:
                out.write(line + "\n")
        for name, ok, detail in self.checks:
            out.write(f"verify {name}: {'ok' if ok else 'MISMATCH'}{' ' + detail if detail else ''}\n")
        return out.getvalue()


def write_csv(report: Report, path):
    """One row per grid cell: ``N,k,ask,bid`` with ``k`` in percent."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(report.csv_rows())


def _pair(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return f"{a} vs {b}"
    return f"{float(a)!r} vs {float(b)!r}"


def _relative_ok(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return close(a, b)


def verify_model(market: Market, payoff: PayoffProcess, ask, bid):
    """Cross-checks for one priced model, as ``(name, ok, detail)`` triples.

    Oracle prices run when the event tree has at most ``ORACLE_NODE_BUDGET``
    nodes; hedges and certificates run when the tree, expanded if it is a
    lattice, has at most ``CERTIFICATE_NODE_BUDGET`` nodes.
    """
    checks = []
    try:
        tree_market, origin = market.expand(CERTIFICATE_NODE_BUDGET)
    except TreeTooLargeError:
        return [("certificates", True, "skipped: tree too large")]
    tree_payoff = payoff.expand(origin)

    if tree_market.tree.n_nodes <= ORACLE_NODE_BUDGET:
        exact_market, exact_payoff = tree_market.to_exact(), tree_payoff.to_exact()
        oa = oracle_seller_price(exact_market, exact_payoff)
        ob = oracle_buyer_price(exact_market, exact_payoff)
        checks.append(("oracle ask", _relative_ok(ask, oa), _pair(ask, oa)))
        checks.append(("oracle bid", _relative_ok(bid, ob), _pair(bid, ob)))

    primal, pfns = price_seller_primal(market, payoff)
    checks.append(("primal ask", _relative_ok(ask, primal), ""))
    strategy = hedge_seller(pfns, (ask, ask * 0))
    checks.append(("seller hedge", bool(check_seller_superhedge(tree_market, tree_payoff, strategy))
                   and bool(is_self_financing(tree_market, strategy)), ""))

    _, dfns = price_seller_dual(market, payoff)
    cert = construct_seller_certificate(dfns, payoff)
    ok = (not cert.identity_residuals() and bool(verify_approx_martingale(tree_market, cert.pair, cert.chi))
          and _relative_ok(cert.expected_payoff(), ask))
    checks.append(("seller certificate", ok, ""))

    _, bfns = price_buyer(market, payoff)
    bstrat, stop = hedge_buyer(bfns, (-bid, bid * 0))
    checks.append(("buyer hedge", bool(check_buyer_superhedge(tree_market, tree_payoff, bstrat, stop))
                   and bool(is_self_financing(tree_market, bstrat)), ""))
    bcert = construct_buyer_certificate(tree_market, tree_payoff, stop)
    ok = (bool(verify_approx_martingale(tree_market, bcert.pair, bcert.tau))
          and _relative_ok(bcert.expected_payoff(), bid))
    checks.append(("buyer certificate", ok, ""))
    checks.append(("bid <= ask", not lt(ask, bid), ""))
    return checks


def _strategy_lines(tree, strategy):
    lines = [f"initial {format_number(strategy.initial[0])} {format_number(strategy.initial[1])}"]
    for t in range(tree.horizon):
        for i in range(tree.sizes[t]):
            a, b = strategy.rebalanced[t][i]
            lines.append(f"{tree.label(t, i)} {format_number(a)} {format_number(b)}")
    return lines


def _run_example(verify: bool) -> Report:
    market, payoff = two_step_example()
    tree = market.tree
    ask, pfns = price_seller_primal(market, payoff)
    bid, bfns = price_buyer(market, payoff)
    _, dfns = price_seller_dual(market, payoff)
    cert = construct_seller_certificate(dfns, payoff)
    seller = hedge_seller(pfns, (ask, 0 * ask), rule="flatten")
    buyer, stop = hedge_buyer(bfns, (-bid, 0 * bid))
    pure, _ = check_pure_stopping_gap(market, payoff)
    report = Report("rational", "preset example4")
    report.rows.append((tree.horizon, None, ask, bid))
    report.sections.append(("prices", [f"ask {ask}", f"bid {bid}", f"pure_stopping_ask {pure}"]))
    report.sections.append(("seller strategy", _strategy_lines(tree, seller)))
    report.sections.append(("seller stopping time", [
        f"{tree.label(t, i)} {format_number(cert.chi.mass[t][i])}" for t, i in tree.nodes()
    ]))
    report.sections.append(("seller martingale", [
        f"{tree.label(t, i)} {format_number(cert.P[t][i])} {format_number(cert.S[t][i])}" for t, i in tree.nodes()
    ]))
    report.sections.append(("buyer strategy", _strategy_lines(tree, buyer)))
    report.sections.append(("buyer stopping time", [" ".join(tree.label(t, i) for t, i in sorted(stop))]))
    if verify:
        report.checks.extend(verify_model(market, payoff, ask, bid))
    return report


def run(spec: ModelSpec | None, preset: str | None = None, mode: str | None = None, verify: bool = False,
        progress=None) -> Report:
    """Price every grid cell of a model description (or the worked example)."""
    if preset == "example4":
        if mode not in (None, "rational"):
            raise ValueError("the example4 preset runs in rational mode only")
        return _run_example(verify)
    if preset is not None:
        spec = parse_model(PRESETS[preset])
    mode = mode or "float"
    report = Report(mode, f"preset {preset}" if preset else "spec file")
    for N, k in spec.grid():
        pricer = AmericanOptionPricer(**spec.pricer_params(N, k, mode)).fit()
        ask, bid = pricer.prices()
        report.rows.append((N, k, ask, bid))
        if progress is not None:
            progress(N, k, ask, bid)
        if verify:
            for name, ok, detail in verify_model(pricer.market_, pricer.payoff_, ask, bid):
                report.checks.append((f"N={N} k={format_price(k * 100)}% {name}", ok, detail))
    return report


def _parser():
    p = argparse.ArgumentParser(prog="superhedge", description="Ask and bid prices of American options "
                                "under proportional transaction costs.")
    sub = p.add_subparsers(dest="command", required=True)
    price = sub.add_parser("price", help="price a model file or a built-in preset")
    price.add_argument("--spec", help="model description file")
    price.add_argument("--preset", choices=sorted(PRESETS))
    price.add_argument("--csv", help="also write N,k,ask,bid rows to this path")
    price.add_argument("--mode", choices=("rational", "float"))
    price.add_argument("--verify", action="store_true", help="run oracle, hedge and certificate checks")
    price.add_argument("--progress", action="store_true", help="print each cell to stderr as it finishes")
    return p


def _print_progress(N, k, ask, bid):
    print(f"N={N} k={format_price(k * 100)}% ask={format_price(ask)} bid={format_price(bid)}",
          file=sys.stderr, flush=True)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if (args.spec is None) == (args.preset is None):
        print("error: give exactly one of --spec and --preset", file=sys.stderr)
        return 1
    progress = _print_progress if args.progress else None
    try:
        spec = read_model(args.spec) if args.spec else None
        report = run(spec, args.preset, args.mode, args.verify, progress)
        if args.csv:
            write_csv(report, args.csv)
    except ModelFileError as exc:
        print(f"{args.spec}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, ModelError, DegeneratePayoffError, InsufficientEndowmentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(report.text())
    return 0 if report.verified else 2


if __name__ == "__main__":
    sys.exit(main())
