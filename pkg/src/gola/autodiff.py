"""Reverse-mode automatic differentiation over dense numpy arrays.

A :class:`Tensor` wraps an ``ndarray`` and, when it participates in a
computation involving a tensor with ``requires_grad=True``, records its
parents together with a closure that maps the output gradient to parent
gradients. ``Tensor.backward`` walks the recorded graph in reverse
topological order.

Complex quantities are carried as (real, imag) pairs of tensors, see
:func:`complex_mul`.
"""
from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import erf

_SQRT_2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class ShapeError(ValueError):
    """Raised when a primitive receives operands of incompatible shapes."""


def _shape_fail(op, *shapes):
    raise ShapeError(f"{op}: incompatible shapes " + " and ".join(str(tuple(s)) for s in shapes))


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name")
    # ndarray (op) Tensor must defer to the reflected Tensor method.
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    @property
    def T(self):
        return transpose(self)

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return slice_(self, key)

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every tracked leaf."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without an explicit gradient requires a scalar output")
            grad = np.ones_like(self.data)
        order = _topo_order(self)
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _topo_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x)
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    elif arr.dtype.kind != "f":
        arr = arr.astype(np.float64)
    return Tensor(arr)


def _pair(a, b):
    # Python scalars adopt the dtype of the tensor operand.
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = as_tensor(b, a.dtype)
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = as_tensor(a, b.dtype)
    else:
        a, b = as_tensor(a), as_tensor(b)
    return a, b


def _make(data, parents, backward):
    parents = tuple(parents)
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, _parents=parents, _backward=backward)
    return Tensor(data)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _bcast(op, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        _shape_fail(op, a.shape, b.shape)


# ---------------------------------------------------------------- elementwise

def add(a, b):
    a, b = _pair(a, b)
    _bcast("add", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.data + b.data, (a, b), backward)


def sub(a, b):
    a, b = _pair(a, b)
    _bcast("sub", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(a.data - b.data, (a, b), backward)


def mul(a, b):
    a, b = _pair(a, b)
    _bcast("mul", a, b)

    def backward(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return _make(a.data * b.data, (a, b), backward)


def div(a, b):
    a, b = _pair(a, b)
    _bcast("div", a, b)
    out = a.data / b.data

    def backward(g):
        ga = _unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * out / b.data, b.shape) if b.requires_grad else None
        return ga, gb

    return _make(out, (a, b), backward)


def exp(x):
    x = as_tensor(x)
    out = np.exp(x.data)
    return _make(out, (x,), lambda g: (g * out,))


def sqrt(x):
    x = as_tensor(x)
    out = np.sqrt(x.data)
    return _make(out, (x,), lambda g: (g * 0.5 / out,))


def cos(x):
    x = as_tensor(x)
    return _make(np.cos(x.data), (x,), lambda g: (-g * np.sin(x.data),))


def sin(x):
    x = as_tensor(x)
    return _make(np.sin(x.data), (x,), lambda g: (g * np.cos(x.data),))


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0
    return _make(np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,))


def gelu(x):
    """Exact (erf) GELU."""
    x = as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT_2))
    out = (x.data * cdf).astype(x.dtype, copy=False)

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        return (g * (cdf + x.data * pdf),)

    return _make(out, (x,), backward)


def square(x):
    x = as_tensor(x)
    return _make(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,))


# ------------------------------------------------------------------- linear

def matmul(a, b):
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2:
        _shape_fail("matmul", a.shape, b.shape)
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        _shape_fail("matmul", a.shape, b.shape)

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            if b.shape[-1] == 1 and b.ndim > 2:
                # batched mat-vec: the outer product is a broadcast multiply
                ga = _unbroadcast(g * np.swapaxes(b.data, -1, -2), a.shape)
            else:
                ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return _make(out, (a, b), backward)


def transpose(x, axes=None):
    x = as_tensor(x)
    if axes is None:
        axes = tuple(range(x.ndim))[::-1]
    inv = np.argsort(axes)
    return _make(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inv),))


def reshape(x, shape):
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        _shape_fail("reshape", x.shape, shape)
    return _make(out, (x,), lambda g: (g.reshape(x.shape),))


def slice_(x, key):
    x = as_tensor(x)
    out = x.data[key]

    def backward(g):
        full = np.zeros_like(x.data)
        if _needs_add_at(key):
            np.add.at(full, key, g)
        else:
            full[key] = g
        return (full,)

    return _make(out, (x,), backward)


def _needs_add_at(key):
    keys = key if isinstance(key, tuple) else (key,)
    return any(isinstance(k, (list, np.ndarray)) for k in keys)


def concat(tensors: Sequence, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        _shape_fail("concat", *[t.shape for t in tensors])
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _make(out, tensors, backward)


# --------------------------------------------------------------- reductions

def sum(x, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).astype(x.dtype),)

    return _make(out, (x,), backward)


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return sum(x, axis=axis, keepdims=keepdims) * (1.0 / n)


def _extreme(x, axis, keepdims, mask, pick):
    x = as_tensor(x)
    ax = axis % x.ndim
    data = x.data
    if mask is not None:
        mask = np.broadcast_to(mask, x.shape)
        fill = -np.inf if pick is np.argmax else np.inf
        data = np.where(mask, data, fill)
    idx = pick(data, axis=ax)  # first occurrence wins ties
    idx_k = np.expand_dims(idx, ax)
    out = np.take_along_axis(x.data, idx_k, axis=ax)
    valid = None
    if mask is not None:
        valid = np.take_along_axis(mask, idx_k, axis=ax)
        out = np.where(valid, out, 0).astype(x.dtype)
    if not keepdims:
        out = np.squeeze(out, ax)

    def backward(g):
        gk = g if keepdims else np.expand_dims(g, ax)
        if valid is not None:
            gk = np.where(valid, gk, 0)
        full = np.zeros_like(x.data)
        np.put_along_axis(full, idx_k, gk, axis=ax)
        return (full,)

    return _make(out, (x,), backward)


def max(x, axis=-1, keepdims=False, mask=None):  # noqa: A001
    """Max over ``axis``; entries with ``mask == False`` are excluded.

    A group with no valid entry yields 0 and receives no gradient.
    """
    return _extreme(x, axis, keepdims, mask, np.argmax)


def min(x, axis=-1, keepdims=False, mask=None):  # noqa: A001
    return _extreme(x, axis, keepdims, mask, np.argmin)


def softmax(x, axis=-1, mask=None):
    """Softmax with max-subtraction; masked entries get probability 0."""
    x = as_tensor(x)
    data = x.data
    if mask is not None:
        mask = np.broadcast_to(mask, x.shape)
        data = np.where(mask, data, -np.inf)
    top = np.max(data, axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0)
    e = np.exp(data - top)
    z = e.sum(axis=axis, keepdims=True)
    out = (e / np.where(z > 0, z, 1)).astype(x.dtype, copy=False)

    def backward(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return _make(out, (x,), backward)


# ---------------------------------------------------------- gather / scatter

def _segment_sum(values, index, size):
    """Sum rows of ``values`` into ``size`` rows by ``index`` (np.add.at is slow)."""
    flat = values.reshape(len(index), int(np.prod(values.shape[1:], dtype=np.int64)))
    onehot = sp.csr_matrix((np.ones(len(index), dtype=values.dtype), (index, np.arange(len(index)))),
                           shape=(size, len(index)))
    return np.asarray(onehot @ flat).reshape((size,) + values.shape[1:])


def gather(x, index):
    """Rows of ``x`` selected by an integer array of any shape."""
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.intp)
    if index.size and (index.min() < 0 or index.max() >= x.shape[0]):
        raise IndexError(f"gather: index out of range for {x.shape[0]} rows")
    out = x.data[index]

    def backward(g):
        flat = index.reshape(-1)
        return (_segment_sum(g.reshape((len(flat),) + x.shape[1:]), flat, x.shape[0]),)

    return _make(out, (x,), backward)


def scatter_add(x, index, size):
    """Sum rows of ``x`` into ``size`` output rows selected by ``index``."""
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.intp)
    if index.shape != x.shape[:1]:
        _shape_fail("scatter_add", x.shape, index.shape)
    out = _segment_sum(x.data, index, size)
    return _make(out, (x,), lambda g: (g[index],))


# ------------------------------------------------------------------ complex

def complex_mul(ar, ai, br, bi):
    """(ar + i ai)(br + i bi) on real pairs; returns (real, imag)."""
    return ar * br - ai * bi, ar * bi + ai * br


# ------------------------------------------------------------- parameters

class ParamStore:
    """Named learnable tensors, enumerated in sorted-name order."""

    def __init__(self, tensors=None):
        self._t = {}
        for name, value in (tensors or {}).items():
            self.add(name, value)

    def add(self, name, value):
        if name in self._t:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, copy=True), requires_grad=True, name=name)
        self._t[name] = t
        return t

    def __getitem__(self, name):
        return self._t[name]

    def __contains__(self, name):
        return name in self._t

    def __len__(self):
        return len(self._t)

    def names(self):
        return sorted(self._t)

    def items(self):
        return [(n, self._t[n]) for n in self.names()]

    def count(self):
        return int(np.sum([t.size for t in self._t.values()], dtype=np.int64))

    def zero_grad(self):
        for t in self._t.values():
            t.grad = None

    def arrays(self):
        return {n: t.data for n, t in self.items()}

    def astype(self, dtype):
        return ParamStore({n: a.astype(dtype) for n, a in self.arrays().items()})

    def copy(self):
        return ParamStore(self.arrays())

    def prefixed(self, prefix):
        return {n[len(prefix):]: t for n, t in self.items() if n.startswith(prefix)}


def forward_backward(build: Callable[[ParamStore], Tensor], params: ParamStore):
    """Evaluate ``build(params)`` and return ``(loss, grads)``.

    ``grads`` maps every parameter name to an array of its shape; parameters
    the loss does not touch get zeros.
    """
    params.zero_grad()
    loss = build(params)
    if loss.size != 1:
        raise ShapeError(f"forward_backward: loss must be scalar, got shape {loss.shape}")
    if loss.requires_grad:
        loss.backward()
    grads = {}
    for name, t in params.items():
        grads[name] = t.grad if t.grad is not None else np.zeros_like(t.data)
    params.zero_grad()
    return float(loss.data), grads


def grad_check(loss_fn: Callable[[ParamStore], Tensor], params: ParamStore, step=1e-5,
               names: Iterable[str] | None = None):
    """Max over entries of |analytic - central difference| / max(1, |central difference|)."""
    loss0, grads = forward_backward(loss_fn, params)
    if not np.isfinite(loss0):
        raise FloatingPointError("grad_check: non-finite loss")
    worst = 0.0
    for name in names if names is not None else params.names():
        arr = params[name].data
        flat = arr.reshape(-1)
        g = grads[name].reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            up = float(loss_fn(params).data)
            flat[k] = orig - step
            down = float(loss_fn(params).data)
            flat[k] = orig
            fd = (up - down) / (2 * step)
            worst = np.maximum(worst, abs(g[k] - fd) / np.maximum(1.0, abs(fd)))
    return float(worst)
