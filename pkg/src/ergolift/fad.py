"""Vectorized forward-mode automatic differentiation on numpy arrays.

A ``Dual`` carries a value array of shape ``S`` together with a tangent
array of shape ``(ndir, *S)`` holding directional derivatives along
``ndir`` independent seed directions.  One evaluation of a numpy-style
pipeline therefore produces the value and a full Jacobian slice at once.

Every helper in this module accepts either plain arrays/scalars or
``Dual`` instances, so numerical code written against these helpers runs
unchanged with and without derivative tracking.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Dual", "value", "seed", "jacobian",
    "sin", "cos", "sqrt", "absolute", "maximum", "where",
    "stack", "concatenate", "solve", "cross3", "dot", "sumsq",
    "rotx", "roty", "rotz", "rpy_matrix",
]


class Dual:
    """Array plus a batch of directional derivatives."""

    __slots__ = ("val", "dot")
    # keep numpy from intercepting `ndarray (op) Dual`
    __array_ufunc__ = None

    def __init__(self, val, dot):
        self.val = np.asarray(val, dtype=float)
        self.dot = np.asarray(dot, dtype=float)
        if self.dot.shape[1:] != self.val.shape:
            self.dot = np.broadcast_to(
                self.dot, (self.dot.shape[0],) + self.val.shape)

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self):
        return self.val.ndim

    @property
    def size(self):
        return self.val.size

    @property
    def ndir(self):
        return self.dot.shape[0]

    def __len__(self):
        return len(self.val)

    def __repr__(self):
        return f"Dual(val={self.val!r}, ndir={self.ndir})"

    # -- arithmetic ----------------------------------------------------
    def __add__(self, other):
        ov, od = _split(other)
        out = self.val + ov
        d = _pad(self.dot, out.ndim)
        if od is not None:
            d = d + _pad(od, out.ndim)
        return Dual(out, d)

    __radd__ = __add__

    def __sub__(self, other):
        ov, od = _split(other)
        out = self.val - ov
        d = _pad(self.dot, out.ndim)
        if od is not None:
            d = d - _pad(od, out.ndim)
        return Dual(out, d)

    def __rsub__(self, other):
        ov, od = _split(other)
        out = ov - self.val
        d = -_pad(self.dot, out.ndim)
        if od is not None:
            d = d + _pad(od, out.ndim)
        return Dual(out, d)

    def __neg__(self):
        return Dual(-self.val, -self.dot)

    def __mul__(self, other):
        ov, od = _split(other)
        out = self.val * ov
        d = _pad(self.dot, out.ndim) * ov
        if od is not None:
            d = d + self.val * _pad(od, out.ndim)
        return Dual(out, d)

    __rmul__ = __mul__

    def __truediv__(self, other):
        ov, od = _split(other)
        out = self.val / ov
        d = _pad(self.dot, out.ndim) / ov
        if od is not None:
            d = d - (self.val / (ov * ov)) * _pad(od, out.ndim)
        return Dual(out, d)

    def __rtruediv__(self, other):
        ov, od = _split(other)
        out = ov / self.val
        d = -(ov / (self.val * self.val)) * _pad(self.dot, out.ndim)
        if od is not None:
            d = d + _pad(od, out.ndim) / self.val
        return Dual(out, d)

    def __pow__(self, n):
        if not np.isscalar(n):
            raise TypeError("Dual ** only supports scalar exponents")
        return Dual(self.val ** n, n * (self.val ** (n - 1)) * self.dot)

    def __matmul__(self, other):
        return _matmul(self, other)

    def __rmatmul__(self, other):
        return _matmul(other, self)

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Dual(self.val[idx], self.dot[(slice(None),) + idx])

    @property
    def T(self):
        if self.val.ndim != 2:
            raise ValueError("T only defined for 2-D duals")
        return Dual(self.val.T, np.transpose(self.dot, (0, 2, 1)))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        new_val = self.val.reshape(shape)
        return Dual(new_val, self.dot.reshape((self.ndir,) + new_val.shape))


def _split(x):
    """Return (value, tangent-or-None) of an operand."""
    if isinstance(x, Dual):
        return x.val, x.dot
    return np.asarray(x, dtype=float), None


def _pad(dot, target_ndim):
    """Insert singleton axes after the direction axis so the tangent
    broadcasts like its value against a result of target_ndim dims."""
    have = dot.ndim - 1
    if have >= target_ndim:
        return dot
    return dot.reshape((dot.shape[0],) + (1,) * (target_ndim - have)
                       + dot.shape[1:])


def value(x):
    """Value part of a Dual, or the input itself."""
    return x.val if isinstance(x, Dual) else np.asarray(x, dtype=float)


def _matmul(a, b):
    av, ad = _split(a)
    bv, bd = _split(b)
    out = av @ bv
    d = None
    if ad is not None:
        # (D, *a) @ b contracts correctly for every a/b rank combination
        d = ad @ bv
    if bd is not None:
        if av.ndim >= 2 and bv.ndim == 1:
            t = np.matmul(av, bd[..., None])[..., 0]
        elif av.ndim == 1 and bv.ndim >= 2:
            t = np.matmul(av, bd)
        elif av.ndim == 1 and bv.ndim == 1:
            t = bd @ av
        else:
            t = av @ bd
        d = t if d is None else d + t
    if d is None:
        return out
    return Dual(out, d)


# -- elementwise functions ---------------------------------------------

def sin(x):
    if isinstance(x, Dual):
        return Dual(np.sin(x.val), np.cos(x.val) * x.dot)
    return np.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(np.cos(x.val), -np.sin(x.val) * x.dot)
    return np.cos(x)


def sqrt(x):
    if isinstance(x, Dual):
        r = np.sqrt(x.val)
        return Dual(r, x.dot / (2.0 * r))
    return np.sqrt(x)


def absolute(x):
    if isinstance(x, Dual):
        return Dual(np.abs(x.val), np.sign(x.val) * x.dot)
    return np.abs(x)


def maximum(x, floor):
    """Elementwise max of x against a plain floor (kink at equality)."""
    if isinstance(x, Dual):
        keep = x.val >= floor
        return Dual(np.maximum(x.val, floor), np.where(keep, x.dot, 0.0))
    return np.maximum(x, floor)


def where(cond, a, b):
    av, ad = _split(a)
    bv, bd = _split(b)
    out = np.where(cond, av, bv)
    if ad is None and bd is None:
        return out
    ndir = ad.shape[0] if ad is not None else bd.shape[0]
    zero = np.zeros((ndir,) + (1,) * out.ndim)
    ad = zero if ad is None else _pad(ad, out.ndim)
    bd = zero if bd is None else _pad(bd, out.ndim)
    return Dual(out, np.where(cond, ad, bd))


# -- structural ops ----------------------------------------------------

def _common_ndir(items):
    for x in items:
        if isinstance(x, Dual):
            return x.ndir
    return None


def stack(items, axis=0):
    ndir = _common_ndir(items)
    vals = [value(x) for x in items]
    out = np.stack(vals, axis=axis)
    if ndir is None:
        return out
    ax = axis if axis >= 0 else out.ndim + axis
    dots = [x.dot if isinstance(x, Dual) else np.zeros((ndir,) + v.shape)
            for x, v in zip(items, vals)]
    return Dual(out, np.stack(dots, axis=ax + 1))


def concatenate(items, axis=0):
    ndir = _common_ndir(items)
    vals = [value(x) for x in items]
    out = np.concatenate(vals, axis=axis)
    if ndir is None:
        return out
    ax = axis if axis >= 0 else out.ndim + axis
    dots = [x.dot if isinstance(x, Dual) else np.zeros((ndir,) + v.shape)
            for x, v in zip(items, vals)]
    return Dual(out, np.concatenate(dots, axis=ax + 1))


def solve(a, b):
    """Linear solve with derivative rule dx = A^-1 (db - dA x)."""
    av, ad = _split(a)
    bv, bd = _split(b)
    x = np.linalg.solve(av, bv)
    if ad is None and bd is None:
        return x
    if bv.ndim != 1:
        raise ValueError("dual solve only supports vector right-hand sides")
    ndir = ad.shape[0] if ad is not None else bd.shape[0]
    rhs = np.zeros((ndir, bv.shape[0]))
    if bd is not None:
        rhs = rhs + bd
    if ad is not None:
        rhs = rhs - ad @ x
    xd = np.linalg.solve(av, rhs.T).T
    return Dual(x, xd)


def cross3(a, b):
    """Cross product of 3-vectors, dual-safe."""
    return stack([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def dot(a, b):
    """Inner product of 1-D operands."""
    return _matmul(a, b)


def sumsq(x):
    """Sum of squares of a 1-D operand."""
    return _matmul(x, x)


# -- rotations ----------------------------------------------------------

def _zero_one_like(t):
    zero = t * 0.0
    return zero, zero + 1.0


def rotx(t):
    c, s = cos(t), sin(t)
    zero, one = _zero_one_like(t)
    return stack([stack([one, zero, zero]),
                  stack([zero, c, -s]),
                  stack([zero, s, c])])


def roty(t):
    c, s = cos(t), sin(t)
    zero, one = _zero_one_like(t)
    return stack([stack([c, zero, s]),
                  stack([zero, one, zero]),
                  stack([-s, zero, c])])


def rotz(t):
    c, s = cos(t), sin(t)
    zero, one = _zero_one_like(t)
    return stack([stack([c, -s, zero]),
                  stack([s, c, zero]),
                  stack([zero, zero, one])])


def rpy_matrix(roll, pitch, yaw):
    """ZYX convention: R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    return _matmul(_matmul(rotz(yaw), roty(pitch)), rotx(roll))


# -- drivers ------------------------------------------------------------

def seed(x, directions=None):
    """Wrap x as a Dual seeded with identity (or given) directions."""
    x = np.asarray(x, dtype=float)
    if directions is None:
        directions = np.eye(x.size).reshape((x.size,) + x.shape)
    return Dual(x, directions)


def jacobian(fn, x):
    """Dense Jacobian of fn at x via one vectorized forward pass.

    fn maps a 1-D array to a scalar or 1-D array; returns (value, jac)
    where jac has shape (out_dim, len(x)) or (len(x),) for scalar fn.
    """
    out = fn(seed(np.asarray(x, dtype=float)))
    if isinstance(out, Dual):
        if out.val.ndim == 0:
            return float(out.val), out.dot.reshape(-1).copy()
        return out.val.copy(), out.dot.T.copy()
    out = np.asarray(out, dtype=float)
    z = np.zeros((np.asarray(x).size,) + out.shape)
    if out.ndim == 0:
        return float(out), z.reshape(-1)
    return out, z.T
