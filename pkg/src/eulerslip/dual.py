"""Tagged, nestable dual numbers over numpy arrays.

A :class:`Dual` carries a real part and a list of first-order
perturbations along ``k`` independent directions.  Both may themselves be
duals of an *older* tag, which is how second (and higher) derivatives are
obtained: seed one level, evaluate, seed again on top.

Tags order the levels.  When two duals with different tags meet, the one
with the newer (larger) tag is the outer level and the other is treated as
a constant with respect to it.  This keeps nested derivative operators from
confusing each other's perturbations.
"""

from __future__ import annotations

import itertools

import numpy as np

_tags = itertools.count(1)


def new_tag() -> int:
    return next(_tags)


class Dual:
    __slots__ = ("re", "du", "tag")
    __array_ufunc__ = None  # make numpy defer to our reflected operators

    def __init__(self, re, du, tag: int):
        self.re = re
        self.du = list(du)
        self.tag = tag

    def __repr__(self) -> str:
        return f"Dual(tag={self.tag}, re={self.re!r}, du={self.du!r})"

    # arithmetic -----------------------------------------------------------
    def __neg__(self):
        return Dual(-self.re, [-d for d in self.du], self.tag)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Dual):
            if other.tag == self.tag:
                return Dual(self.re + other.re, [a + b for a, b in zip(self.du, other.du)], self.tag)
            if other.tag > self.tag:
                return other.__radd__(self)
        return Dual(self.re + other, self.du, self.tag)

    def __radd__(self, other):
        return Dual(other + self.re, self.du, self.tag)

    def __sub__(self, other):
        if isinstance(other, Dual):
            if other.tag == self.tag:
                return Dual(self.re - other.re, [a - b for a, b in zip(self.du, other.du)], self.tag)
            if other.tag > self.tag:
                return other.__rsub__(self)
        return Dual(self.re - other, self.du, self.tag)

    def __rsub__(self, other):
        return Dual(other - self.re, [-d for d in self.du], self.tag)

    def __mul__(self, other):
        if isinstance(other, Dual):
            if other.tag == self.tag:
                return Dual(
                    self.re * other.re,
                    [self.re * b + a * other.re for a, b in zip(self.du, other.du)],
                    self.tag,
                )
            if other.tag > self.tag:
                return other.__rmul__(self)
        return Dual(self.re * other, [d * other for d in self.du], self.tag)

    def __rmul__(self, other):
        return Dual(other * self.re, [other * d for d in self.du], self.tag)

    def reciprocal(self):
        r = 1.0 / self.re
        r2 = r * r
        return Dual(r, [-(d * r2) for d in self.du], self.tag)

    def __truediv__(self, other):
        if isinstance(other, Dual):
            if other.tag >= self.tag:
                return self * other.reciprocal()
        return Dual(self.re / other, [d / other for d in self.du], self.tag)

    def __rtruediv__(self, other):
        return other * self.reciprocal()

    def __pow__(self, n):
        if isinstance(n, Dual):
            return exp(n * log(self))
        if n == 2:
            return self * self
        p = self.re ** (n - 1)
        return Dual(p * self.re, [n * p * d for d in self.du], self.tag)


# ---------------------------------------------------------------------------
# elementary functions (dispatch recursively through the levels)


def _lift(x, f, df):
    if isinstance(x, Dual):
        g = df(x.re)
        return Dual(f(x.re), [g * d for d in x.du], x.tag)
    return f(x)


def sin(x):
    return _lift(x, sin, cos) if isinstance(x, Dual) else np.sin(x)


def cos(x):
    return _lift(x, cos, lambda t: -sin(t)) if isinstance(x, Dual) else np.cos(x)


def exp(x):
    if isinstance(x, Dual):
        v = exp(x.re)
        return Dual(v, [v * d for d in x.du], x.tag)
    return np.exp(x)


def log(x):
    return _lift(x, log, lambda t: 1.0 / t) if isinstance(x, Dual) else np.log(x)


def sqrt(x):
    if isinstance(x, Dual):
        v = sqrt(x.re)
        g = 0.5 / v
        return Dual(v, [g * d for d in x.du], x.tag)
    return np.sqrt(x)


def tan(x):
    return sin(x) / cos(x)


def sinh(x):
    return 0.5 * (exp(x) - exp(-x))


def cosh(x):
    return 0.5 * (exp(x) + exp(-x))


def tanh(x):
    return sinh(x) / cosh(x)


def real(x):
    """Strip every perturbation level, returning the plain value."""
    while isinstance(x, Dual):
        x = x.re
    return x


def where(mask, a, b):
    """Elementwise select that recurses through matching dual levels."""
    if isinstance(a, Dual) or isinstance(b, Dual):
        ta = a.tag if isinstance(a, Dual) else -1
        tb = b.tag if isinstance(b, Dual) else -1
        tag = max(ta, tb)
        k = len(a.du) if ta == tag else len(b.du)
        ar, ad = (a.re, a.du) if ta == tag else (a, [0.0] * k)
        br, bd = (b.re, b.du) if tb == tag else (b, [0.0] * k)
        return Dual(where(mask, ar, br), [where(mask, x, y) for x, y in zip(ad, bd)], tag)
    return np.where(mask, a, b)


def seed(values, tag: int | None = None) -> list[Dual]:
    """Seed one perturbation level over each coordinate of ``values``."""
    tag = new_tag() if tag is None else tag
    k = len(values)
    return [Dual(v, [1.0 if j == i else 0.0 for j in range(k)], tag) for i, v in enumerate(values)]


def split(y, tag: int, k: int):
    """Return ``(value, [d/dx_0, ..., d/dx_{k-1}])`` of ``y`` at level ``tag``."""
    if isinstance(y, Dual) and y.tag == tag:
        return y.re, y.du
    return y, [0.0] * k


def derivative(f, x0):
    """d f / dx at ``x0`` for a scalar function of one variable."""
    (x,) = seed([x0])
    _, (d,) = split(f(x), x.tag, 1)
    return d


def jet2(f, point):
    """Value, gradient and Hessian of ``f`` at ``point`` by nested seeding.

    ``f`` takes ``len(point)`` scalar arguments and returns a tuple of
    scalars.  Returns ``(value[i], grad[i][j], hess[i][j][k])`` as plain
    arrays broadcast to the shape of the inputs.
    """
    k = len(point)
    shape = np.broadcast(*point).shape
    inner = seed([np.broadcast_to(np.asarray(p, dtype=float), shape) for p in point])
    outer = seed(inner)
    out = f(*outer)
    values, grads, hess = [], [], []
    for y in out:
        base, first = split(y, outer[0].tag, k)
        values.append(np.broadcast_to(real(base), shape))
        g_row, h_row = [], []
        for j in range(k):
            gj, hj = split(first[j], inner[0].tag, k)
            g_row.append(np.broadcast_to(real(gj), shape))
            h_row.append([np.broadcast_to(real(h), shape) for h in hj])
        grads.append(g_row)
        hess.append(h_row)
    return values, grads, hess


def jet1(f, point):
    """Value and gradient of ``f`` at ``point`` (one seeding level)."""
    k = len(point)
    shape = np.broadcast(*point).shape
    xs = seed([np.broadcast_to(np.asarray(p, dtype=float), shape) for p in point])
    out = f(*xs)
    values, grads = [], []
    for y in out:
        base, first = split(y, xs[0].tag, k)
        values.append(np.broadcast_to(real(base), shape))
        grads.append([np.broadcast_to(real(d), shape) for d in first])
    return values, grads


# small 3-vector helpers on tuples of scalars (arrays or duals)


def vdot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def vcross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def vnorm(a):
    return sqrt(vdot(a, a))
