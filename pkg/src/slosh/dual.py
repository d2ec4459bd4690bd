"""Vectorised forward-mode automatic differentiation with dual numbers.

A :class:`Dual` carries a value array of shape ``S`` and a batch of ``K``
tangent arrays of shape ``(K,) + S``, so ``K`` directional derivatives are
propagated in one pass.  Plain ``numpy`` arrays and Python scalars mix freely
with duals; the module-level helpers (:func:`sqrt`, :func:`where`, ...)
dispatch on the argument type so the same numerical code runs on floats and
on duals.
"""

from __future__ import annotations

import numpy as np


class Dual:
    """Array-valued dual number ``val + sum_k tan[k] * eps_k``."""

    __slots__ = ("val", "tan")
    # make ndarray <op> Dual defer to the reflected Dual operator
    __array_ufunc__ = None

    def __init__(self, val, tan):
        self.val = np.asarray(val, dtype=float)
        self.tan = np.asarray(tan, dtype=float)
        if self.tan.shape[1:] != self.val.shape:
            raise ValueError(
                f"tangent shape {self.tan.shape} does not match value shape {self.val.shape}"
            )

    @classmethod
    def constant(cls, val, n_tangents):
        val = np.asarray(val, dtype=float)
        return cls(val, np.zeros((n_tangents,) + val.shape))

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self):
        return self.val.ndim

    @property
    def n_tangents(self):
        return self.tan.shape[0]

    def __len__(self):
        return len(self.val)

    def __repr__(self):
        return f"Dual(val={self.val!r}, n_tangents={self.n_tangents})"

    # --- arithmetic ---------------------------------------------------
    def __neg__(self):
        return Dual(-self.val, -self.tan)

    def __add__(self, other):
        if isinstance(other, Dual):
            val = self.val + other.val
            return Dual(val, _expand(self.tan, self.ndim, val.ndim) + _expand(other.tan, other.ndim, val.ndim))
        val = self.val + other
        return Dual(val, np.broadcast_to(_expand(self.tan, self.ndim, val.ndim), (self.n_tangents,) + val.shape))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            val = self.val * other.val
            tan = _expand(self.tan, self.ndim, val.ndim) * other.val + self.val * _expand(
                other.tan, other.ndim, val.ndim
            )
            return Dual(val, tan)
        other = np.asarray(other, dtype=float)
        val = self.val * other
        return Dual(val, _expand(self.tan, self.ndim, val.ndim) * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return self * other.reciprocal()
        other = np.asarray(other, dtype=float)
        val = self.val / other
        return Dual(val, _expand(self.tan, self.ndim, val.ndim) / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def reciprocal(self):
        inv = 1.0 / self.val
        return Dual(inv, -self.tan * (inv * inv))

    def __pow__(self, exponent):
        if isinstance(exponent, Dual):
            raise TypeError("dual exponents are not supported")
        exponent = float(exponent)
        if exponent == 2.0:
            return self * self
        if exponent == 3.0:
            return self * self * self
        val = self.val**exponent
        return Dual(val, self.tan * (exponent * self.val ** (exponent - 1.0)))

    # comparisons act on the value part only
    def __lt__(self, other):
        return self.val < value(other)

    def __le__(self, other):
        return self.val <= value(other)

    def __gt__(self, other):
        return self.val > value(other)

    def __ge__(self, other):
        return self.val >= value(other)

    # --- indexing / reshaping ----------------------------------------
    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Dual(self.val[idx], self.tan[(slice(None),) + idx])

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        val = self.val.reshape(shape)
        return Dual(val, self.tan.reshape((self.n_tangents,) + val.shape))

    def sum(self, axis=None):
        if axis is None:
            return Dual(self.val.sum(), self.tan.reshape(self.n_tangents, -1).sum(axis=1))
        axis = axis % self.ndim
        return Dual(self.val.sum(axis=axis), self.tan.sum(axis=axis + 1))

    @property
    def T(self):
        axes = (0,) + tuple(range(self.ndim, 0, -1))
        return Dual(self.val.T, self.tan.transpose(axes))


def _expand(tan, ndim, target_ndim):
    """Insert unit axes so a ``(K,)+S`` tangent broadcasts against rank ``target_ndim``."""
    if ndim == target_ndim:
        return tan
    return tan.reshape((tan.shape[0],) + (1,) * (target_ndim - ndim) + tan.shape[1:])


def is_dual(x):
    return isinstance(x, Dual)


def value(x):
    """Strip the tangent part; non-duals are returned unchanged."""
    return x.val if isinstance(x, Dual) else x


def _n_tangents(*xs):
    for x in xs:
        if isinstance(x, Dual):
            return x.n_tangents
    return None


def sqrt(x):
    if isinstance(x, Dual):
        s = np.sqrt(x.val)
        safe = np.where(s > 0.0, s, 1.0)
        return Dual(s, np.where(s > 0.0, x.tan / (2.0 * safe), 0.0))
    return np.sqrt(x)


def sin(x):
    if isinstance(x, Dual):
        return Dual(np.sin(x.val), x.tan * np.cos(x.val))
    return np.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(np.cos(x.val), -x.tan * np.sin(x.val))
    return np.cos(x)


def tanh(x):
    if isinstance(x, Dual):
        t = np.tanh(x.val)
        return Dual(t, x.tan * (1.0 - t * t))
    return np.tanh(x)


def where(cond, a, b):
    """Elementwise select; ``cond`` must be a plain boolean array."""
    cond = np.asarray(cond, dtype=bool)
    k = _n_tangents(a, b)
    if k is None:
        return np.where(cond, a, b)
    val = np.where(cond, value(a), value(b))
    ta = _tangent_like(a, k, val.ndim)
    tb = _tangent_like(b, k, val.ndim)
    return Dual(val, np.where(cond, ta, tb))


def _tangent_like(x, k, ndim):
    if isinstance(x, Dual):
        return _expand(x.tan, x.ndim, ndim)
    return np.zeros((k,) + (1,) * ndim)


def minimum(x, bound):
    """``min(x, bound)`` for a constant ``bound``; derivative 0 where clipped."""
    return where(value(x) < bound, x, np.zeros_like(value(x)) + bound)


def maximum(x, bound):
    return where(value(x) > bound, x, np.zeros_like(value(x)) + bound)


def stack(arrays, axis=0):
    k = _n_tangents(*arrays)
    if k is None:
        return np.stack(arrays, axis=axis)
    vals = [np.asarray(value(a), dtype=float) for a in arrays]
    ndim = vals[0].ndim
    axis = axis % (ndim + 1)
    tans = [
        a.tan if isinstance(a, Dual) else np.zeros((k,) + np.shape(v)) for a, v in zip(arrays, vals)
    ]
    return Dual(np.stack(vals, axis=axis), np.stack(tans, axis=axis + 1))


def concatenate(arrays, axis=0):
    k = _n_tangents(*arrays)
    if k is None:
        return np.concatenate(arrays, axis=axis)
    vals = [np.asarray(value(a), dtype=float) for a in arrays]
    axis = axis % vals[0].ndim
    tans = [
        a.tan if isinstance(a, Dual) else np.zeros((k,) + np.shape(v)) for a, v in zip(arrays, vals)
    ]
    return Dual(np.concatenate(vals, axis=axis), np.concatenate(tans, axis=axis + 1))


def matmul(matrix, x):
    """Left-multiply by a constant (dense or scipy.sparse) matrix along axis 0 of ``x``."""
    if isinstance(x, Dual):
        k = x.n_tangents
        rest = x.val.shape[1:]
        width = int(np.prod(rest))
        val = np.asarray(matrix @ x.val.reshape(x.val.shape[0], width)).reshape((matrix.shape[0],) + rest)
        tan = np.moveaxis(x.tan, 0, -1).reshape(x.val.shape[0], width * k)
        tan = np.asarray(matrix @ tan).reshape((matrix.shape[0],) + rest + (k,))
        return Dual(val, np.moveaxis(tan, -1, 0))
    x = np.asarray(x)
    width = int(np.prod(x.shape[1:]))
    return np.asarray(matrix @ x.reshape(x.shape[0], width)).reshape((matrix.shape[0],) + x.shape[1:])


def seed(x, directions):
    """Build a dual of value ``x`` whose tangents are ``directions`` (shape ``(K,)+x.shape``)."""
    return Dual(np.asarray(x, dtype=float), np.asarray(directions, dtype=float))
