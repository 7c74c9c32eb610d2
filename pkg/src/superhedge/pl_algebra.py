"""Exact algebra of one-dimensional polyhedral functions.

Three families are represented:

* :class:`PLFunction` -- real-valued continuous piecewise-linear functions on the
  whole line (convex ones are the primal value functions of the seller).
* :class:`ConcavePL` -- concave polyhedral functions on a compact interval,
  ``-inf`` outside it (the dual value functions).
* :data:`BOTTOM` -- the function identically ``-inf``, shared by all families.

All values are immutable.  Scalars may be ``Fraction`` (exact mode) or
``float``; in float mode redundant breakpoints are merged under a relative
tolerance of ``1e-9``.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from typing import Sequence

from ._num import NEG_INF, REL_TOL, close, format_number, is_exact, le, lt, parse_number

__all__ = [
    "BOTTOM",
    "UNBOUNDED_BELOW",
    "Bottom",
    "ConcavePL",
    "InvalidSpreadError",
    "PLFunction",
    "UnboundedBelow",
    "affine",
    "cap_decompose",
    "concave_cap",
    "convex_dual",
    "domain_restrict",
    "dual_inverse",
    "dumps",
    "evaluate",
    "gradient_restrict",
    "inf_convolve_kernel",
    "loads",
    "pl_add",
    "pl_max",
    "pl_min",
    "transaction_kernel",
]


class InvalidSpreadError(ValueError):
    """Raised when an ask price is below the corresponding bid price."""


class Bottom:
    """The function identically equal to ``-inf``."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __call__(self, y):
        return NEG_INF

    def __repr__(self):
        return "BOTTOM"

    def __reduce__(self):
        return (Bottom, ())

    is_bottom = True


class UnboundedBelow:
    """Marker for a gradient restriction whose infimal convolution is ``-inf``.

    Distinct from :data:`BOTTOM`: it signals an empty dual-domain
    intersection, i.e. a model that admits arbitrage or is mis-specified.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNBOUNDED_BELOW"

    def __reduce__(self):
        return (UnboundedBelow, ())


BOTTOM = Bottom()
UNBOUNDED_BELOW = UnboundedBelow()


def _check_spread(b, a):
    if lt(a, b):
        raise InvalidSpreadError(f"ask {a} is below bid {b}")


# --------------------------------------------------------------------------
# Whole-line piecewise-linear functions
# --------------------------------------------------------------------------


class PLFunction:
    """Continuous piecewise-linear function on the real line.

    ``xs`` are the breakpoints (strictly increasing), ``ys`` the values there,
    ``left_slope``/``right_slope`` the slopes of the two unbounded pieces.  A
    linear function is stored with the single anchor breakpoint ``0``.
    """

    __slots__ = ("xs", "ys", "left_slope", "right_slope")
    is_bottom = False

    def __init__(self, xs, ys, left_slope, right_slope, *, canonical=False):
        if canonical:
            self.xs = tuple(xs)
            self.ys = tuple(ys)
            self.left_slope = left_slope
            self.right_slope = right_slope
            return
        if len(xs) != len(ys) or not xs:
            raise ValueError("need matching, non-empty breakpoint and value lists")
        for x0, x1 in zip(xs, xs[1:]):
            if not x0 < x1:
                raise ValueError("breakpoints must be strictly increasing")
        xs, ys, ls, rs = _canonical(list(xs), list(ys), left_slope, right_slope)
        self.xs = xs
        self.ys = ys
        self.left_slope = ls
        self.right_slope = rs

    @classmethod
    def linear(cls, slope, intercept):
        return cls((intercept * 0,), (intercept,), slope, slope, canonical=True)

    def __call__(self, y):
        xs = self.xs
        if y <= xs[0]:
            return self.ys[0] + self.left_slope * (y - xs[0])
        if y >= xs[-1]:
            return self.ys[-1] + self.right_slope * (y - xs[-1])
        i = bisect_right(xs, y) - 1
        x0, x1 = xs[i], xs[i + 1]
        y0, y1 = self.ys[i], self.ys[i + 1]
        return y0 + (y1 - y0) * (y - x0) / (x1 - x0)

    @property
    def slopes(self) -> tuple:
        """Slopes of all pieces from left to right."""
        xs, ys = self.xs, self.ys
        inner = tuple((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) for i in range(len(xs) - 1))
        return (self.left_slope,) + inner + (self.right_slope,)

    @property
    def is_linear(self) -> bool:
        return len(self.xs) == 1 and self.left_slope == self.right_slope

    @property
    def is_convex(self) -> bool:
        s = self.slopes
        return all(le(s0, s1) for s0, s1 in zip(s, s[1:]))

    def __eq__(self, other):
        if not isinstance(other, PLFunction):
            return NotImplemented
        return (
            self.xs == other.xs
            and self.ys == other.ys
            and self.left_slope == other.left_slope
            and self.right_slope == other.right_slope
        )

    def __hash__(self):
        return hash((self.xs, self.ys, self.left_slope, self.right_slope))

    def __repr__(self):
        return f"PLFunction({dumps(self)})"

    def approx_equal(self, other) -> bool:
        """Pointwise equality up to the float tolerance (exact for Fractions)."""
        if getattr(other, "is_bottom", False):
            return False
        pts = sorted(set(self.xs) | set(other.xs))
        return (
            close(self.left_slope, other.left_slope)
            and close(self.right_slope, other.right_slope)
            and all(close(self(p), other(p)) for p in pts)
        )


def _canonical(xs, ys, ls, rs):
    """Drop breakpoints where the slope does not change."""
    if xs[0].__class__ is float or ys[0].__class__ is float or ls.__class__ is float:
        return _canonical_float(xs, ys, ls, rs)
    n = len(xs)
    kx, ky = [], []
    for i in range(n):
        nxt = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) if i + 1 < n else rs
        left = (ys[i] - ky[-1]) / (xs[i] - kx[-1]) if kx else ls
        if left == nxt:
            continue
        kx.append(xs[i])
        ky.append(ys[i])
    if not kx:
        zero = xs[0] * 0
        return (zero,), (ys[0] + ls * (zero - xs[0]),), ls, ls
    return tuple(kx), tuple(ky), ls, rs


def _canonical_float(xs, ys, ls, rs):
    tol = REL_TOL
    # merge breakpoints closer than rounding noise
    mx, my = [xs[0]], [ys[0]]
    for x, y in zip(xs[1:], ys[1:]):
        d = x - mx[-1]
        if d <= tol or d <= tol * max(abs(x), abs(mx[-1])):
            continue
        mx.append(x)
        my.append(y)
    n = len(mx)
    kx, ky = [], []
    for i in range(n):
        nxt = (my[i + 1] - my[i]) / (mx[i + 1] - mx[i]) if i + 1 < n else rs
        left = (my[i] - ky[-1]) / (mx[i] - kx[-1]) if kx else ls
        d = abs(left - nxt)
        if d <= tol or d <= tol * max(abs(left), abs(nxt)):
            continue
        kx.append(mx[i])
        ky.append(my[i])
    if not kx:
        zero = mx[0] * 0
        return (zero,), (my[0] + ls * (zero - mx[0]),), ls, ls
    return tuple(kx), tuple(ky), ls, rs


def affine(slope, intercept) -> PLFunction:
    """The linear function ``y -> intercept + slope * y``."""
    return PLFunction.linear(slope, intercept)


def transaction_kernel(b, a) -> PLFunction:
    """``h(y) = a y^- - b y^+``: cash needed to absorb a stock position ``y``."""
    _check_spread(b, a)
    zero = b * 0
    return PLFunction((zero,), (zero,), -a, -b)


def evaluate(f, y):
    """Value of any family member at ``y`` (``-inf`` for BOTTOM)."""
    return f(y)


def _values_at(f: PLFunction, pts):
    """Evaluate ``f`` at sorted points with a single merge walk."""
    xs, ys = f.xs, f.ys
    out = []
    j = 0
    x0, y0 = xs[0], ys[0]
    xl, yl = xs[-1], ys[-1]
    ls, rs = f.left_slope, f.right_slope
    for p in pts:
        if p <= x0:
            out.append(y0 + ls * (p - x0))
            continue
        if p >= xl:
            out.append(yl + rs * (p - xl))
            continue
        while xs[j + 1] < p:
            j += 1
        xa, xb = xs[j], xs[j + 1]
        if p == xa:
            out.append(ys[j])
        elif p == xb:
            out.append(ys[j + 1])
        else:
            ya, yb = ys[j], ys[j + 1]
            out.append(ya + (yb - ya) * (p - xa) / (xb - xa))
    return out


def _merge_points(a, b):
    if a == b:
        return list(a)
    return sorted(set(a).union(b))


def _combine(f: PLFunction, g: PLFunction, take_max: bool) -> PLFunction:
    pts = _merge_points(f.xs, g.xs)
    fv = _values_at(f, pts)
    gv = _values_at(g, pts)
    xs, ys = [], []
    n = len(pts)
    d = [a - b for a, b in zip(fv, gv)]
    if is_exact(fv[0], gv[0], f.left_slope, g.left_slope):
        sgn = [0 if di == 0 else (1 if di > 0 else -1) for di in d]
    else:
        sgn = [
            0 if abs(di) <= REL_TOL * max(1.0, abs(a), abs(b)) else (1 if di > 0 else -1)
            for di, a, b in zip(d, fv, gv)
        ]
    fl, gl, fr, gr_ = f.left_slope, g.left_slope, f.right_slope, g.right_slope
    if -1 not in sgn and le(fl, gl) and le(gr_, fr):
        return f if take_max else g
    if 1 not in sgn and le(gl, fl) and le(fr, gr_):
        return g if take_max else f

    # left tail crossing
    dl = f.left_slope - g.left_slope
    if sgn[0] != 0 and dl != 0 and not close(f.left_slope, g.left_slope):
        if (d[0] > 0) == (dl > 0):
            xc = pts[0] - d[0] / dl
            xs.append(xc)
            ys.append(fv[0] + f.left_slope * (xc - pts[0]))
    pick = max if take_max else min
    for i in range(n):
        xs.append(pts[i])
        ys.append(pick(fv[i], gv[i]))
        if i + 1 < n and sgn[i] * sgn[i + 1] < 0:
            t = d[i] / (d[i] - d[i + 1])
            xs.append(pts[i] + (pts[i + 1] - pts[i]) * t)
            ys.append(fv[i] + (fv[i + 1] - fv[i]) * t)
    dr = f.right_slope - g.right_slope
    if sgn[-1] != 0 and dr != 0 and not close(f.right_slope, g.right_slope):
        if (d[-1] > 0) != (dr > 0):
            xc = pts[-1] - d[-1] / dr
            xs.append(xc)
            ys.append(fv[-1] + f.right_slope * (xc - pts[-1]))
    if take_max:
        ls = min(f.left_slope, g.left_slope)
        rs = max(f.right_slope, g.right_slope)
    else:
        ls = max(f.left_slope, g.left_slope)
        rs = min(f.right_slope, g.right_slope)
    xs, ys = _dedupe(xs, ys, take_max)
    kx, ky, ls, rs = _canonical(xs, ys, ls, rs)
    return PLFunction(kx, ky, ls, rs, canonical=True)


def _dedupe(xs, ys, take_max):
    """Make abscissae strictly increasing (float crossings may land on a neighbour)."""
    ox, oy = [xs[0]], [ys[0]]
    for x, y in zip(xs[1:], ys[1:]):
        if x <= ox[-1] or close(x, ox[-1]):
            if x == ox[-1] or close(x, ox[-1]):
                oy[-1] = max(oy[-1], y) if take_max else min(oy[-1], y)
            continue
        ox.append(x)
        oy.append(y)
    return ox, oy


def pl_max(f, g):
    """Pointwise maximum; BOTTOM is the identity."""
    if f is BOTTOM:
        return g
    if g is BOTTOM:
        return f
    return _combine(f, g, True)


def pl_min(f, g):
    """Pointwise minimum; BOTTOM is absorbing."""
    if f is BOTTOM or g is BOTTOM:
        return BOTTOM
    return _combine(f, g, False)


def pl_add(f, g):
    """Pointwise sum of two whole-line functions."""
    if f is BOTTOM or g is BOTTOM:
        return BOTTOM
    pts = _merge_points(f.xs, g.xs)
    ys = [a + b for a, b in zip(_values_at(f, pts), _values_at(g, pts))]
    kx, ky, ls, rs = _canonical(pts, ys, f.left_slope + g.left_slope, f.right_slope + g.right_slope)
    return PLFunction(kx, ky, ls, rs, canonical=True)


def _add_linear(f: PLFunction, c) -> PLFunction:
    ys = [y + c * x for x, y in zip(f.xs, f.ys)]
    kx, ky, ls, rs = _canonical(list(f.xs), ys, f.left_slope + c, f.right_slope + c)
    return PLFunction(kx, ky, ls, rs, canonical=True)


def _reflect(f: PLFunction) -> PLFunction:
    """``y -> f(-y)``."""
    return PLFunction(
        tuple(-x for x in reversed(f.xs)),
        tuple(reversed(f.ys)),
        -f.right_slope,
        -f.left_slope,
        canonical=True,
    )


def _prefix_min(f: PLFunction) -> PLFunction:
    """``y -> min_{s <= y} f(s)``; requires ``f'(-inf) <= 0``."""
    xs, ys = f.xs, f.ys
    ox, oy = [xs[0]], [ys[0]]
    following = True
    cur = ys[0]
    for i in range(len(xs) - 1):
        v0, v1 = ys[i], ys[i + 1]
        if following:
            if le(v1, v0):
                ox.append(xs[i + 1])
                oy.append(v1)
                cur = v1
            else:
                following = False
                ox.append(xs[i + 1])
                oy.append(cur)
        else:
            if lt(v1, cur):
                xc = xs[i] + (cur - v0) * (xs[i + 1] - xs[i]) / (v1 - v0)
                ox.append(xc)
                oy.append(cur)
                ox.append(xs[i + 1])
                oy.append(v1)
                cur = v1
                following = True
            else:
                ox.append(xs[i + 1])
                oy.append(cur)
    rs = f.right_slope
    zero = rs * 0
    if following:
        out_rs = rs if rs <= 0 else zero
    elif rs < 0:
        xc = xs[-1] + (cur - ys[-1]) / rs
        ox.append(xc)
        oy.append(cur)
        out_rs = rs
    else:
        out_rs = zero
    ox, oy = _dedupe(ox, oy, False)
    kx, ky, ls, rs = _canonical(ox, oy, f.left_slope, out_rs)
    return PLFunction(kx, ky, ls, rs, canonical=True)


def inf_convolve_kernel(f, b, a):
    """Infimal convolution of ``f`` with the transaction kernel, by sweeping.

    Valid for non-convex ``f``.  Uses
    ``gr(f)(y) = min(sufmin(f + a.id)(y) - a y, premin(f + b.id)(y) - b y)``.
    """
    _check_spread(b, a)
    if f is BOTTOM:
        return BOTTOM
    if not _bounded_after_restriction(f, b, a):
        return UNBOUNDED_BELOW
    buy = _add_linear(_reflect(_prefix_min(_reflect(_add_linear(f, a)))), -a)
    sell = _add_linear(_prefix_min(_add_linear(f, b)), -b)
    return _combine(buy, sell, False)


def _bounded_after_restriction(f: PLFunction, b, a) -> bool:
    return le(b, -f.left_slope) and le(-f.right_slope, a)


def _clamp_convex(f: PLFunction, b, a) -> PLFunction:
    lo, hi = -a, -b
    slopes = f.slopes
    xs, ys = f.xs, f.ys
    # anchor: a breakpoint whose subdifferential meets [lo, hi]
    anchor = None
    for k in range(len(xs)):
        if le(slopes[k], hi) and le(lo, slopes[k + 1]):
            anchor = k
            break
    clamped = [min(max(s, lo), hi) for s in slopes]
    new_ys = list(ys)
    for k in range(anchor + 1, len(xs)):
        new_ys[k] = new_ys[k - 1] + clamped[k] * (xs[k] - xs[k - 1])
    for k in range(anchor - 1, -1, -1):
        new_ys[k] = new_ys[k + 1] - clamped[k + 1] * (xs[k + 1] - xs[k])
    kx, ky, ls, rs = _canonical(list(xs), new_ys, clamped[0], clamped[-1])
    return PLFunction(kx, ky, ls, rs, canonical=True)


def gradient_restrict(f, b, a, *, convex: bool | None = None):
    """Function whose epigraph is ``epi h_[b,a] + epi f``.

    Convex inputs take the slope-clamping path; anything else goes through
    :func:`inf_convolve_kernel`.  Returns :data:`UNBOUNDED_BELOW` when the
    result would be ``-inf`` everywhere without ``f`` being BOTTOM.
    """
    _check_spread(b, a)
    if f is BOTTOM:
        return BOTTOM
    if convex is None:
        convex = f.is_convex
    if not convex:
        return inf_convolve_kernel(f, b, a)
    if not _bounded_after_restriction(f, b, a):
        return UNBOUNDED_BELOW
    return _clamp_convex(f, b, a)


# --------------------------------------------------------------------------
# Concave functions on a compact domain
# --------------------------------------------------------------------------


class ConcavePL:
    """Concave polyhedral function, ``-inf`` outside ``[xs[0], xs[-1]]``."""

    __slots__ = ("xs", "ys")
    is_bottom = False

    def __init__(self, xs, ys, *, canonical=False):
        if canonical:
            self.xs = tuple(xs)
            self.ys = tuple(ys)
            return
        if len(xs) != len(ys) or not xs:
            raise ValueError("need matching, non-empty vertex lists")
        for x0, x1 in zip(xs, xs[1:]):
            if not x0 < x1:
                raise ValueError("vertices must be strictly increasing")
        self.xs, self.ys = _canonical_concave(list(xs), list(ys))
        s = self.slopes
        if not all(le(s1, s0) for s0, s1 in zip(s, s[1:])):
            raise ValueError("vertices do not describe a concave function")

    @property
    def domain(self):
        return self.xs[0], self.xs[-1]

    @property
    def slopes(self):
        xs, ys = self.xs, self.ys
        return tuple((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) for i in range(len(xs) - 1))

    def __call__(self, x):
        xs = self.xs
        if x < xs[0] or x > xs[-1]:
            return NEG_INF
        if x == xs[-1]:
            return self.ys[-1]
        i = bisect_right(xs, x) - 1
        x0, x1 = xs[i], xs[i + 1]
        y0, y1 = self.ys[i], self.ys[i + 1]
        if x == x0:
            return y0
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0)

    def contains(self, x) -> bool:
        return le(self.xs[0], x) and le(x, self.xs[-1])

    def clamp(self, x):
        return min(max(x, self.xs[0]), self.xs[-1])

    def maximum(self):
        """Leftmost maximiser and the maximum value."""
        best = 0
        for i in range(1, len(self.ys)):
            if lt(self.ys[best], self.ys[i]):
                best = i
        return self.xs[best], self.ys[best]

    def __eq__(self, other):
        if not isinstance(other, ConcavePL):
            return NotImplemented
        return self.xs == other.xs and self.ys == other.ys

    def __hash__(self):
        return hash((self.xs, self.ys))

    def __repr__(self):
        return f"ConcavePL({dumps(self)})"

    def approx_equal(self, other) -> bool:
        if getattr(other, "is_bottom", False) or not isinstance(other, ConcavePL):
            return False
        if not (close(self.xs[0], other.xs[0]) and close(self.xs[-1], other.xs[-1])):
            return False
        pts = sorted(set(self.xs) | set(other.xs))
        lo = max(self.xs[0], other.xs[0])
        hi = min(self.xs[-1], other.xs[-1])
        pts = [min(max(p, lo), hi) for p in pts]
        return all(close(self(p), other(p)) for p in pts)


def _canonical_concave(xs, ys):
    exact = not any(isinstance(v, float) for v in (xs[0], ys[0], xs[-1], ys[-1]))
    if not exact:
        mx, my = [xs[0]], [ys[0]]
        for x, y in zip(xs[1:], ys[1:]):
            if close(x, mx[-1]):
                my[-1] = max(my[-1], y)
                continue
            mx.append(x)
            my.append(y)
        xs, ys = mx, my
    n = len(xs)
    if n <= 2:
        return tuple(xs), tuple(ys)
    kx, ky = [xs[0]], [ys[0]]
    for i in range(1, n - 1):
        left = (ys[i] - ky[-1]) / (xs[i] - kx[-1])
        right = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
        if (left == right) if exact else close(left, right):
            continue
        kx.append(xs[i])
        ky.append(ys[i])
    kx.append(xs[-1])
    ky.append(ys[-1])
    return tuple(kx), tuple(ky)


def _cross(o, p, q):
    return (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0])


def _upper_hull(points):
    """Upper hull of points sorted by x (ties resolved by keeping the highest)."""
    hull = []
    for p in points:
        if hull and p[0] == hull[-1][0]:
            if p[1] > hull[-1][1]:
                hull.pop()
            else:
                continue
        while len(hull) >= 2:
            o, q = hull[-2], hull[-1]
            c = _cross(o, q, p)
            if isinstance(c, float):
                span = (abs(q[0] - o[0]) + abs(q[1] - o[1])) * (abs(p[0] - o[0]) + abs(p[1] - o[1]))
                drop = c >= -REL_TOL * span
            else:
                drop = c >= 0
            if not drop:
                break
            hull.pop()
        hull.append(p)
    return hull


def concave_cap(vs: Sequence):
    """Least concave majorant of a list of concave functions (BOTTOMs ignored)."""
    pts = []
    for v in vs:
        if v is BOTTOM:
            continue
        pts.extend(zip(v.xs, v.ys))
    if not pts:
        return BOTTOM
    if len(pts) == 1:
        return ConcavePL(*zip(*pts), canonical=True)
    pts.sort()
    hull = _upper_hull(pts)
    xs = [p[0] for p in hull]
    ys = [p[1] for p in hull]
    kx, ky = _canonical_concave(xs, ys)
    return ConcavePL(kx, ky, canonical=True)


def cap_decompose(vs: Sequence, cap, x):
    """Write ``cap(x)`` as a convex combination of values of the ``vs``.

    Returns a list of ``(index, weight, point)`` atoms, at most two, with
    weights summing to one, weighted points averaging to ``x`` and weighted
    values averaging to ``cap(x)``.  A single atom is returned whenever some
    ``vs[i]`` touches the cap at ``x`` (lowest such index); otherwise the two
    supporting vertices nearest to ``x`` are used.
    """
    if cap is BOTTOM or not cap.contains(x):
        raise ValueError(f"{x} lies outside the domain of the cap")
    x = cap.clamp(x)
    c = cap(x)
    for i, v in enumerate(vs):
        if v is BOTTOM or not v.contains(x):
            continue
        if close(v(v.clamp(x)), c):
            return [(i, 1 + 0 * c, v.clamp(x))]
    left = right = None
    for i, v in enumerate(vs):
        if v is BOTTOM:
            continue
        for px, py in zip(v.xs, v.ys):
            if not cap.contains(px) or not close(py, cap(cap.clamp(px))):
                continue
            if px < x and (left is None or px > left[1]):
                left = (i, px)
            elif px > x and (right is None or px < right[1]):
                right = (i, px)
    if left is None or right is None:
        raise ValueError("no supporting vertices found; cap does not match inputs")
    (il, xl), (ir, xr) = left, right
    wr = (x - xl) / (xr - xl)
    wl = 1 - wr
    atoms = [(il, wl, xl), (ir, wr, xr)]
    atoms.sort(key=lambda a: (a[0], a[2]))
    return atoms


def domain_restrict(v, b, a):
    """Restrict a concave function's domain to ``[b, a]``."""
    _check_spread(b, a)
    if v is BOTTOM:
        return BOTTOM
    lo = max(v.xs[0], b)
    hi = min(v.xs[-1], a)
    if lo > hi:
        if not close(lo, hi):
            return BOTTOM
        p = v.clamp((lo + hi) / 2)
        return ConcavePL((p,), (v(p),), canonical=True)
    if lo == hi:
        return ConcavePL((lo,), (v(lo),), canonical=True)
    xs = [lo] + [x for x in v.xs if lo < x < hi] + [hi]
    ys = [v(x) for x in xs]
    kx, ky = _canonical_concave(xs, ys)
    return ConcavePL(kx, ky, canonical=True)


# --------------------------------------------------------------------------
# Convex duality
# --------------------------------------------------------------------------


def convex_dual(f):
    """Concave conjugate ``x -> inf_y f(y) + x y`` of a convex function."""
    if f is BOTTOM:
        return BOTTOM
    slopes = f.slopes
    xs, ys = f.xs, f.ys
    n = len(xs)
    # vertex at -s_k for k = n .. 0; the supporting breakpoint is xs[k-1]
    # (xs[0] for the leftmost piece)
    vx, vy = [], []
    for k in range(n, -1, -1):
        j = max(k - 1, 0)
        s = slopes[k]
        vx.append(-s)
        vy.append(ys[j] - s * xs[j])
    vx, vy = _dedupe_concave(vx, vy)
    kx, ky = _canonical_concave(vx, vy)
    return ConcavePL(kx, ky, canonical=True)


def _dedupe_concave(xs, ys):
    ox, oy = [xs[0]], [ys[0]]
    for x, y in zip(xs[1:], ys[1:]):
        if x <= ox[-1] or close(x, ox[-1]):
            oy[-1] = min(oy[-1], y) if x == ox[-1] else oy[-1]
            continue
        ox.append(x)
        oy.append(y)
    return ox, oy


def dual_inverse(v):
    """Convex function ``y -> sup_x v(x) - x y`` recovered from its conjugate."""
    if v is BOTTOM:
        return BOTTOM
    xs, ys = v.xs, v.ys
    m = len(xs)
    if m == 1:
        return PLFunction.linear(-xs[0], ys[0])
    # breakpoints at the slopes of v, from the rightmost piece to the leftmost
    bx, by = [], []
    for j in range(m - 1, 0, -1):
        s = (ys[j] - ys[j - 1]) / (xs[j] - xs[j - 1])
        bx.append(s)
        by.append(ys[j] - xs[j] * s)
    bx, by = _dedupe(bx, by, True)
    kx, ky, ls, rs = _canonical(bx, by, -xs[-1], -xs[0])
    return PLFunction(kx, ky, ls, rs, canonical=True)


# --------------------------------------------------------------------------
# Debug text form
# --------------------------------------------------------------------------


def dumps(f) -> str:
    """Text form: ``BOTTOM``, ``PL <ls> | x:y ... | <rs>`` or ``CAV x:y ...``."""
    if f is BOTTOM:
        return "BOTTOM"
    if f is UNBOUNDED_BELOW:
        return "UNBOUNDED_BELOW"
    pts = " ".join(f"{format_number(x)}:{format_number(y)}" for x, y in zip(f.xs, f.ys))
    if isinstance(f, ConcavePL):
        return f"CAV {pts}"
    return f"PL {format_number(f.left_slope)} | {pts} | {format_number(f.right_slope)}"


def loads(text: str):
    """Inverse of :func:`dumps`."""
    text = text.strip()
    if text == "BOTTOM":
        return BOTTOM
    if text == "UNBOUNDED_BELOW":
        return UNBOUNDED_BELOW

    def pairs(chunk):
        xs, ys = [], []
        for item in chunk.split():
            x, y = item.split(":")
            xs.append(parse_number(x))
            ys.append(parse_number(y))
        return xs, ys

    if text.startswith("CAV"):
        xs, ys = pairs(text[3:])
        return ConcavePL(xs, ys)
    if text.startswith("PL"):
        ls, mid, rs = text[2:].split("|")
        xs, ys = pairs(mid)
        return PLFunction(xs, ys, parse_number(ls), parse_number(rs))
    raise ValueError(f"cannot parse function text {text!r}")


def is_finite_function(f) -> bool:
    return isinstance(f, (PLFunction, ConcavePL))


def sup_value(f):
    """Supremum of a concave function (``-inf`` for BOTTOM)."""
    if f is BOTTOM:
        return -math.inf
    return f.maximum()[1]
