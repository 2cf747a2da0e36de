"""Minimal reverse-mode tensor algebra on float64 numpy arrays.

Forward ops build a closure graph; `Tensor.backward()` runs an iterative
topological sweep accumulating gradients into `.grad`. Everything is
64-bit and deterministic: no threading, no in-place mutation of live
graph values. Inside a `no_grad()` block no graph is recorded, which is
how evaluation-mode forward passes stay cheap.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, ShapeError


class _GradMode:
    enabled = True


class no_grad:
    """Context manager disabling graph recording."""

    def __enter__(self):
        self._saved = _GradMode.enabled
        _GradMode.enabled = False

    def __exit__(self, *exc):
        _GradMode.enabled = self._saved
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, np.ndarray):
            self.data = data.astype(np.float64, copy=False)
        else:
            self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._backward = None
        self._prev = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- autodiff driver ---------------------------------------------------

    def backward(self) -> None:
        if self.data.size != 1:
            raise ContractError("backward() requires a scalar output")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._prev:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return take(self, idx)

    # -- method sugar --------------------------------------------------------

    def reshape(self, shape):
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    # Re-bind instead of += so shared gradient arrays are never mutated.
    t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _make(data: np.ndarray, parents, backward) -> Tensor:
    req = _GradMode.enabled and any(p.requires_grad for p in parents)
    out = Tensor(data, req)
    if req:
        out._prev = tuple(p for p in parents if p.requires_grad)
        out._backward = backward
    return out


# -- elementwise arithmetic ---------------------------------------------------


def add(x: Tensor, y: Tensor) -> Tensor:
    def backward(g):
        if x.requires_grad:
            _accumulate(x, _unbroadcast(g, x.data.shape))
        if y.requires_grad:
            _accumulate(y, _unbroadcast(g, y.data.shape))

    return _make(x.data + y.data, (x, y), backward)


def sub(x: Tensor, y: Tensor) -> Tensor:
    def backward(g):
        if x.requires_grad:
            _accumulate(x, _unbroadcast(g, x.data.shape))
        if y.requires_grad:
            _accumulate(y, _unbroadcast(-g, y.data.shape))

    return _make(x.data - y.data, (x, y), backward)


def mul(x: Tensor, y: Tensor) -> Tensor:
    def backward(g):
        if x.requires_grad:
            _accumulate(x, _unbroadcast(g * y.data, x.data.shape))
        if y.requires_grad:
            _accumulate(y, _unbroadcast(g * x.data, y.data.shape))

    return _make(x.data * y.data, (x, y), backward)


def div(x: Tensor, y: Tensor) -> Tensor:
    out_data = x.data / y.data

    def backward(g):
        if x.requires_grad:
            _accumulate(x, _unbroadcast(g / y.data, x.data.shape))
        if y.requires_grad:
            _accumulate(y, _unbroadcast(-g * out_data / y.data, y.data.shape))

    return _make(out_data, (x, y), backward)


def neg(x: Tensor) -> Tensor:
    def backward(g):
        if x.requires_grad:
            _accumulate(x, -g)

    return _make(-x.data, (x,), backward)


def power(x: Tensor, p: float) -> Tensor:
    def backward(g):
        if x.requires_grad:
            _accumulate(x, g * p * x.data ** (p - 1.0))

    return _make(x.data ** p, (x,), backward)


def exp(x: Tensor) -> Tensor:
    out_data = np.exp(x.data)

    def backward(g):
        if x.requires_grad:
            _accumulate(x, g * out_data)

    return _make(out_data, (x,), backward)


def log(x: Tensor) -> Tensor:
    def backward(g):
        if x.requires_grad:
            _accumulate(x, g / x.data)

    return _make(np.log(x.data), (x,), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0.0

    def backward(g):
        if x.requires_grad:
            _accumulate(x, g * mask)

    return _make(np.where(mask, x.data, 0.0), (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    out_data = _sigmoid_np(x.data)

    def backward(g):
        if x.requires_grad:
            _accumulate(x, g * out_data * (1.0 - out_data))

    return _make(out_data, (x,), backward)


def _sigmoid_np(x: np.ndarray) -> np.ndarray:
    pos = x >= 0
    out = np.empty_like(x)
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(x: Tensor) -> Tensor:
    def backward(g):
        if x.requires_grad:
            _accumulate(x, g * _sigmoid_np(x.data))

    return _make(_softplus_np(x.data), (x,), backward)


def _softplus_np(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    mask = (x.data >= lo) & (x.data <= hi)

    def backward(g):
        if x.requires_grad:
            _accumulate(x, g * mask)

    return _make(np.clip(x.data, lo, hi), (x,), backward)


# -- linear algebra -----------------------------------------------------------


def matmul(x: Tensor, y: Tensor) -> Tensor:
    if x.data.ndim < 2 or y.data.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {x.data.shape} @ {y.data.shape}")
    if x.data.shape[-1] != y.data.shape[-2]:
        raise ShapeError(f"matmul inner mismatch: {x.data.shape} @ {y.data.shape}")

    def backward(g):
        if x.requires_grad:
            _accumulate(x, _unbroadcast(g @ y.data.swapaxes(-1, -2), x.data.shape))
        if y.requires_grad:
            _accumulate(y, _unbroadcast(x.data.swapaxes(-1, -2) @ g, y.data.shape))

    return _make(x.data @ y.data, (x, y), backward)


def reshape(x: Tensor, shape) -> Tensor:
    def backward(g):
        if x.requires_grad:
            _accumulate(x, g.reshape(x.data.shape))

    return _make(x.data.reshape(shape), (x,), backward)


def transpose(x: Tensor, axes) -> Tensor:
    inverse = tuple(np.argsort(axes))

    def backward(g):
        if x.requires_grad:
            _accumulate(x, g.transpose(inverse))

    return _make(x.data.transpose(axes), (x,), backward)


def broadcast_to(x: Tensor, shape) -> Tensor:
    def backward(g):
        if x.requires_grad:
            _accumulate(x, _unbroadcast(g, x.data.shape))

    return _make(np.broadcast_to(x.data, shape).copy(), (x,), backward)


def concat(tensors, axis: int) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(lo, hi)
                _accumulate(t, g[tuple(index)])

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def take(x: Tensor, idx) -> Tensor:
    def backward(g):
        if x.requires_grad:
            buf = np.zeros_like(x.data)
            np.add.at(buf, idx, g)
            _accumulate(x, buf)

    return _make(x.data[idx], (x,), backward)


def dense_put(base: np.ndarray, rows, cols, values: Tensor) -> Tensor:
    """Dense matrix equal to `base` plus `values` scattered at (rows, cols).

    `base` is a constant; gradients flow only into `values`. Index pairs
    must be unique.
    """
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    data = np.array(base, dtype=np.float64, copy=True)
    data[rows, cols] += values.data

    def backward(g):
        if values.requires_grad:
            _accumulate(values, g[rows, cols])

    return _make(data, (values,), backward)


# -- reductions ----------------------------------------------------------------


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def backward(g):
        if x.requires_grad:
            _accumulate(x, _spread(g, x.data.shape, axis, keepdims))

    return _make(x.data.sum(axis=axis, keepdims=keepdims), (x,), backward)


def tmean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.data.size if axis is None else x.data.shape[axis]

    def backward(g):
        if x.requires_grad:
            _accumulate(x, _spread(g, x.data.shape, axis, keepdims) / count)

    return _make(x.data.mean(axis=axis, keepdims=keepdims), (x,), backward)


def _spread(g: np.ndarray, shape, axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


# -- normalization primitives ---------------------------------------------------


def softmax(x: Tensor, axis: int) -> Tensor:
    """Numerically stabilized softmax along `axis` (max-subtraction)."""
    if not -x.data.ndim <= axis < x.data.ndim:
        raise ShapeError(f"softmax axis {axis} invalid for shape {x.data.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if x.requires_grad:
            inner = (g * out_data).sum(axis=axis, keepdims=True)
            _accumulate(x, out_data * (g - inner))

    return _make(out_data, (x,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each last-axis slice to zero mean / unit variance, then affine."""
    d = x.data.shape[-1] if x.data.ndim else 0
    if d == 0:
        raise ShapeError("layer_norm needs a non-empty last axis")
    if gain.data.shape != (d,) or bias.data.shape != (d,):
        raise ShapeError(f"gain/bias must have shape ({d},)")
    if eps < 0:
        raise ShapeError("eps must be nonnegative")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = gain.data * xhat + bias.data

    def backward(g):
        if bias.requires_grad:
            _accumulate(bias, g.reshape(-1, d).sum(axis=0))
        if gain.requires_grad:
            _accumulate(gain, (g * xhat).reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            gg = g * gain.data
            m1 = gg.mean(axis=-1, keepdims=True)
            m2 = (gg * xhat).mean(axis=-1, keepdims=True)
            _accumulate(x, (gg - m1 - xhat * m2) * inv)

    return _make(out_data, (x, gain, bias), backward)


def scale(x: Tensor, c: float) -> Tensor:
    def backward(g):
        if x.requires_grad:
            _accumulate(x, g * c)

    return _make(x.data * c, (x,), backward)
