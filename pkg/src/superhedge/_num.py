"""Scalar helpers shared by the exact (Fraction) and float arithmetic modes."""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational

REL_TOL = 1e-9

NEG_INF = -math.inf


def is_exact(*values) -> bool:
    for v in values:
        if v.__class__ is float or not isinstance(v, Rational):
            return False
    return True


def tol(*values) -> float:
    """Absolute tolerance for comparing the given values (0 when all exact)."""
    if not any(v.__class__ is float for v in values) and is_exact(*values):
        return 0
    scale = 1.0
    for v in values:
        a = abs(v)
        if a > scale:
            scale = a
    return REL_TOL * scale


def close(a, b) -> bool:
    if a.__class__ is not float and b.__class__ is not float:
        if isinstance(a, Rational) and isinstance(b, Rational):
            return a == b
    d = a - b
    if d < 0:
        d = -d
    if d <= REL_TOL:
        return True
    return d <= REL_TOL * max(abs(a), abs(b))


def le(a, b) -> bool:
    """a <= b up to the arithmetic mode's tolerance."""
    return a <= b or close(a, b)


def lt(a, b) -> bool:
    """a < b and not merely by rounding noise."""
    return a < b and not close(a, b)


def to_number(x, exact: bool):
    """Coerce a scalar to Fraction (exact mode) or float."""
    if exact:
        if isinstance(x, Fraction):
            return x
        if isinstance(x, str):
            return Fraction(x)
        return Fraction(x)
    return float(x)


def parse_number(text: str):
    """Parse ``3/4``, ``-2`` or ``0.25``; decimals and exponents give floats."""
    text = text.strip()
    if any(c in text for c in ".eEn") and "/" not in text:
        return float(text)
    return Fraction(text)


def format_number(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, int):
        return str(x)
    return repr(float(x))
