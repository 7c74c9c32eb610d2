"""Text model descriptions.

A model file starts with the header line ``superhedge-model 1`` followed by
``key = value`` lines; ``#`` starts a comment.  Example::

    superhedge-model 1
    lattice = binomial          # or trinomial
    S0 = 100
    sigma = 0.2
    T = 0.25
    r = 0.1
    N = 20, 40, 100             # a list gives one run per value
    k = 0%, 0.5%, 1%            # percent, or a plain fraction such as 0.005
    payoff = put               # or basket
    strike = 100
    legs = 95:+1, 105:-1        # basket only
    never_exercise_step = yes   # optional; default yes for a put
    no_cost_at_time0 = yes
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

__all__ = ["HEADER", "ModelFileError", "ModelSpec", "parse_model", "read_model"]

HEADER = "superhedge-model 1"


class ModelFileError(ValueError):
    def __init__(self, message, line, column=1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass
class ModelSpec:
    lattice: str = "binomial"
    S0: Fraction = Fraction(100)
    sigma: Fraction = Fraction(1, 5)
    T: Fraction = Fraction(1, 4)
    r: Fraction = Fraction(1, 10)
    N: tuple = (20,)
    k: tuple = (Fraction(0),)
    payoff: str = "put"
    strike: Fraction = Fraction(100)
    legs: tuple = ()
    never_exercise_step: bool | None = None
    no_cost_at_time0: bool = True
    lines: dict = field(default_factory=dict, repr=False)

    def grid(self):
        """``(N, k)`` pairs in file order, N outermost."""
        return [(n, k) for n in self.N for k in self.k]

    def pricer_params(self, N, k, mode):
        exact = mode == "rational"
        num = (lambda x: x) if exact else float
        return dict(
            lattice=self.lattice, S0=num(self.S0), sigma=num(self.sigma), maturity=num(self.T),
            n_steps=N, rate=num(self.r), cost=num(k), payoff=self.payoff, strike=num(self.strike),
            legs=tuple((num(s), num(w)) for s, w in self.legs) or None,
            never_exercise_step=self.never_exercise_step, no_cost_at_time0=self.no_cost_at_time0,
            mode=mode,
        )


def _number(text, line, col):
    try:
        if text.endswith("%"):
            return Fraction(text[:-1].strip()) / 100
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ModelFileError(f"not a number: {text!r}", line, col) from None


def _flag(text, line, col):
    low = text.lower()
    if low in ("yes", "true", "1", "on"):
        return True
    if low in ("no", "false", "0", "off"):
        return False
    raise ModelFileError(f"expected yes/no, got {text!r}", line, col)


def _items(value, col):
    """Split a comma list, keeping each item's column."""
    out, start = [], 0
    for part in value.split(","):
        lead = len(part) - len(part.lstrip())
        out.append((part.strip(), col + start + lead))
        start += len(part) + 1
    return out


def _positive(x, name, line, col):
    if not x > 0:
        raise ModelFileError(f"{name} must be positive", line, col)
    return x


def parse_model(text: str) -> ModelSpec:
    lines = text.splitlines()
    first = next((n for n, raw in enumerate(lines) if raw.split("#", 1)[0].strip()), None)
    if first is None or lines[first].split("#", 1)[0].strip() != HEADER:
        raise ModelFileError(f"expected header {HEADER!r}", 1 if first is None else first + 1)
    spec = ModelSpec()
    seen = {}
    for n in range(first + 1, len(lines)):
        lineno = n + 1
        body = lines[n].split("#", 1)[0]
        if not body.strip():
            continue
        if "=" not in body:
            raise ModelFileError("expected 'key = value'", lineno, len(body) - len(body.lstrip()) + 1)
        key_part, value_part = body.split("=", 1)
        key = key_part.strip()
        key_col = len(key_part) - len(key_part.lstrip()) + 1
        value = value_part.strip()
        vcol = len(key_part) + 2 + len(value_part) - len(value_part.lstrip())
        if key in seen:
            raise ModelFileError(f"duplicate key {key!r} (first on line {seen[key]})", lineno, key_col)
        if not value:
            raise ModelFileError(f"missing value for {key!r}", lineno, vcol)
        seen[key] = lineno
        if key == "lattice":
            if value not in ("binomial", "trinomial"):
                raise ModelFileError(f"unknown lattice {value!r}", lineno, vcol)
            spec.lattice = value
        elif key == "payoff":
            if value not in ("put", "basket"):
                raise ModelFileError(f"unknown payoff {value!r}", lineno, vcol)
            spec.payoff = value
        elif key in ("S0", "sigma", "T", "strike"):
            setattr(spec, key, _positive(_number(value, lineno, vcol), key, lineno, vcol))
        elif key == "r":
            spec.r = _number(value, lineno, vcol)
        elif key == "N":
            ns = []
            for item, col in _items(value, vcol):
                if not item.isdigit() or int(item) < 1:
                    raise ModelFileError(f"N must be a positive integer, got {item!r}", lineno, col)
                ns.append(int(item))
            spec.N = tuple(ns)
        elif key == "k":
            ks = []
            for item, col in _items(value, vcol):
                k = _number(item, lineno, col)
                if not 0 <= k < 1:
                    raise ModelFileError("k must lie in [0, 1)", lineno, col)
                ks.append(k)
            spec.k = tuple(ks)
        elif key == "legs":
            legs = []
            for item, col in _items(value, vcol):
                strike, sep, sign = item.partition(":")
                if not sep:
                    raise ModelFileError(f"expected strike:sign, got {item!r}", lineno, col)
                legs.append((_positive(_number(strike.strip(), lineno, col), "strike", lineno, col),
                             _number(sign.strip(), lineno, col + len(strike) + 1)))
            spec.legs = tuple(legs)
        elif key in ("never_exercise_step", "no_cost_at_time0"):
            setattr(spec, key, _flag(value, lineno, vcol))
        else:
            raise ModelFileError(f"unknown key {key!r}", lineno, key_col)
    if spec.payoff == "basket" and not spec.legs:
        raise ModelFileError("a basket payoff needs 'legs'", len(lines) or 1)
    spec.lines = seen
    return spec


def read_model(path) -> ModelSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())
