"""Forward-mode differentiation with dual numbers.

A :class:`Dual` carries a value and a tangent (both numpy arrays, real or
complex).  Model evaluators are written against the helpers in this module
(``sqrt``, ``conj``, ``prod`` ...) so the same code runs on plain arrays and on
duals.  Only first derivatives are supported.
"""

import numpy as np


class Dual:
    __array_ufunc__ = None
    __slots__ = ("val", "eps")

    def __init__(self, val, eps):
        self.val = np.asarray(val)
        self.eps = np.asarray(eps)

    def __repr__(self):
        return f"Dual({self.val!r}, {self.eps!r})"

    @property
    def shape(self):
        return self.val.shape

    def __len__(self):
        return len(self.val)

    def __getitem__(self, idx):
        return Dual(self.val[idx], self.eps[idx])

    def __neg__(self):
        return Dual(-self.val, -self.eps)

    def __add__(self, other):
        other = _lift(other)
        return Dual(self.val + other.val, self.eps + other.eps)

    __radd__ = __add__

    def __sub__(self, other):
        other = _lift(other)
        return Dual(self.val - other.val, self.eps - other.eps)

    def __rsub__(self, other):
        return _lift(other) - self

    def __mul__(self, other):
        other = _lift(other)
        return Dual(self.val * other.val, self.eps * other.val + self.val * other.eps)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _lift(other)
        val = self.val / other.val
        return Dual(val, (self.eps - val * other.eps) / other.val)

    def __rtruediv__(self, other):
        return _lift(other) / self

    def __pow__(self, k):
        if isinstance(k, Dual):
            return exp(k * log(self))
        return Dual(self.val**k, k * self.val ** (k - 1) * self.eps)

    def __matmul__(self, other):
        other = _lift(other)
        return Dual(self.val @ other.val, self.eps @ other.val + self.val @ other.eps)

    def __rmatmul__(self, other):
        return _lift(other) @ self

    @property
    def real(self):
        return Dual(self.val.real, self.eps.real)

    @property
    def imag(self):
        return Dual(self.val.imag, self.eps.imag)

    def conj(self):
        return Dual(np.conj(self.val), np.conj(self.eps))

    def sum(self, axis=None):
        return Dual(self.val.sum(axis=axis), self.eps.sum(axis=axis))


def _lift(x):
    if isinstance(x, Dual):
        return x
    x = np.asarray(x)
    return Dual(x, np.zeros_like(x))


def value(x):
    return x.val if isinstance(x, Dual) else x


def tangent(x):
    return x.eps if isinstance(x, Dual) else np.zeros_like(np.asarray(x))


def sqrt(x):
    if isinstance(x, Dual):
        r = np.sqrt(x.val)
        return Dual(r, x.eps / (2 * r))
    return np.sqrt(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(np.log(x.val), x.eps / x.val)
    return np.log(x)


def exp(x):
    if isinstance(x, Dual):
        e = np.exp(x.val)
        return Dual(e, e * x.eps)
    return np.exp(x)


def conj(x):
    return x.conj() if isinstance(x, Dual) else np.conj(x)


def real(x):
    return x.real if isinstance(x, Dual) else np.real(x)


def imag(x):
    return x.imag if isinstance(x, Dual) else np.imag(x)


def abs2(x):
    """Elementwise |x|^2 as a real quantity."""
    return real(x * conj(x))


def sum(x, axis=None):
    return x.sum(axis=axis) if isinstance(x, Dual) else np.sum(x, axis=axis)


def prod(x):
    """Product over the first axis (by repeated multiplication, so zeros are safe)."""
    if not isinstance(x, Dual):
        return np.prod(x, axis=0)
    out = x[0]
    for i in range(1, len(x)):
        out = out * x[i]
    return out


def stack(items):
    if any(isinstance(i, Dual) for i in items):
        items = [_lift(i) for i in items]
        return Dual(np.stack([i.val for i in items]), np.stack([i.eps for i in items]))
    return np.stack(items)


def concatenate(items):
    if any(isinstance(i, Dual) for i in items):
        items = [_lift(i) for i in items]
        return Dual(
            np.concatenate([np.atleast_1d(i.val) for i in items]),
            np.concatenate([np.atleast_1d(i.eps) for i in items]),
        )
    return np.concatenate([np.atleast_1d(i) for i in items])


def logdet(a):
    """log det of a square matrix; the tangent is tr(A^{-1} dA)."""
    if isinstance(a, Dual):
        val = np.log(np.linalg.det(a.val))
        return Dual(val, np.trace(np.linalg.solve(a.val, a.eps)))
    return np.log(np.linalg.det(a))


def directional(fun, x, u):
    """Value and exact directional derivative of ``fun`` at ``x`` along ``u``."""
    out = fun(Dual(np.asarray(x, dtype=float), np.asarray(u, dtype=float)))
    out = _lift(out)
    return out.val, out.eps


def jacobian(fun, x):
    """Jacobian of ``fun`` at ``x`` by one forward pass per input coordinate.

    Returns an array of shape ``out_shape + (len(x),)``.
    """
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = 1.0
        cols.append(np.asarray(_lift(fun(Dual(x, e))).eps))
    return np.stack(cols, axis=-1)
