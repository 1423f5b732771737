"""Minimal reverse-mode autodiff over float64 numpy arrays.

Just enough surface for the model: matrix products, elementwise ops,
activations, row reductions, L1 distance, log-sum-exp, and a cross-tensor
row gather used by the batched tree executor. Forward values are plain
ndarrays wrapped in Tensor nodes; backward walks the tape in reverse
topological order.

Subgradient conventions (fixed for determinism): d|x|/dx = 0 at x = 0,
dReLU/dx = 0 at x = 0.
"""

from __future__ import annotations

import numpy as np


class ShapeMismatchError(Exception):
    pass


class NonFiniteError(Exception):
    pass


_grad_enabled = True


class no_grad:
    """Context manager disabling tape recording (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._saved = _grad_enabled
        _grad_enabled = False

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._saved


def grad_enabled():
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward", "requires_grad")

    def __init__(self, data, parents=(), backward=None, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents if _grad_enabled else ()
        self._backward = backward if _grad_enabled else None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    def __getstate__(self):
        return self.data

    def __setstate__(self, data):
        self.data = data
        self.grad = None
        self._parents = ()
        self._backward = None
        self.requires_grad = True

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self):
        """Reverse pass seeding d(self)/d(self) = 1; self must be scalar."""
        if self.data.shape != ():
            raise ShapeMismatchError("backward() requires a scalar")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones(())
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # convenience operators
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)


def param(data):
    """Trainable leaf tensor."""
    return Tensor(data, requires_grad=True)


def constant(data):
    return Tensor(data)


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward):
    if not _grad_enabled:
        return Tensor(data)
    return Tensor(data, parents=parents, backward=backward)


def _unbroadcast(g, shape):
    # reverse the limited (vector -> batch of rows) broadcasting of add/mul
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b):
    a, b = _lift(a), _lift(b)
    out_data = a.data + b.data

    def backward(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), backward)


def sub(a, b):
    a, b = _lift(a), _lift(b)
    out_data = a.data - b.data

    def backward(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(-_unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), backward)


def mul(a, b):
    """Elementwise product (with vector-to-rows broadcasting)."""
    a, b = _lift(a), _lift(b)
    out_data = a.data * b.data

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), backward)


def scale(a, s: float):
    a = _lift(a)
    out_data = a.data * s

    def backward(g):
        a._accumulate(g * s)

    return _make(out_data, (a,), backward)


def matmul(x, w):
    """(B, I) @ (I, M) or (I,) @ (I, M)."""
    x, w = _lift(x), _lift(w)
    if x.data.shape[-1] != w.data.shape[0]:
        raise ShapeMismatchError(
            f"matmul: {x.data.shape} @ {w.data.shape}")
    out_data = x.data @ w.data

    def backward(g):
        x._accumulate(g @ w.data.T)
        if x.data.ndim == 1:
            w._accumulate(np.outer(x.data, g))
        else:
            w._accumulate(x.data.T @ g)

    return _make(out_data, (x, w), backward)


def sigmoid(a):
    a = _lift(a)
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        a._accumulate(g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), backward)


def tanh(a):
    a = _lift(a)
    out_data = np.tanh(a.data)

    def backward(g):
        a._accumulate(g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), backward)


def relu(a):
    a = _lift(a)
    out_data = np.maximum(a.data, 0.0)

    def backward(g):
        a._accumulate(g * (a.data > 0.0))

    return _make(out_data, (a,), backward)


def manhattan(a, b, axis=None):
    """L1 distance; axis=1 reduces rows of a batch."""
    a, b = _lift(a), _lift(b)
    if a.data.shape != b.data.shape:
        raise ShapeMismatchError(
            f"manhattan: {a.data.shape} vs {b.data.shape}")
    diff = a.data - b.data
    out_data = np.abs(diff).sum(axis=axis)
    sign = np.sign(diff)

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        a._accumulate(g * sign)
        b._accumulate(-g * sign)

    return _make(out_data, (a, b), backward)


def logsumexp(a, axis=None):
    a = _lift(a)
    m = np.max(a.data, axis=axis, keepdims=True)
    s = np.exp(a.data - m).sum(axis=axis, keepdims=True)
    out_keep = m + np.log(s)
    out_data = (out_keep.reshape(()) if axis is None
                else np.squeeze(out_keep, axis=axis))
    soft = np.exp(a.data - out_keep)

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        a._accumulate(g * soft)

    return _make(out_data, (a,), backward)


def softmax(a, axis=-1):
    a = _lift(a)
    m = np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(a.data - m)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        a._accumulate(out_data * (g - dot))

    return _make(out_data, (a,), backward)


def concat(tensors, axis=-1):
    tensors = [_lift(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis if axis >= 0 else g.ndim + axis] = slice(lo, hi)
            t._accumulate(g[tuple(idx)])

    return _make(out_data, tuple(tensors), backward)


def mean(a):
    a = _lift(a)
    n = a.data.size
    out_data = a.data.mean()

    def backward(g):
        a._accumulate(np.full(a.data.shape, g / n))

    return _make(out_data, (a,), backward)


def total(a):
    a = _lift(a)
    out_data = a.data.sum()

    def backward(g):
        a._accumulate(np.full(a.data.shape, g))

    return _make(out_data, (a,), backward)


def gather_cols(a, idx):
    """Pick a[i, idx[i]] per row; used to select the true-class logit."""
    a = _lift(a)
    idx = np.asarray(idx)
    rows = np.arange(a.data.shape[0])
    out_data = a.data[rows, idx]

    def backward(g):
        full = np.zeros_like(a.data)
        full[rows, idx] = g
        a._accumulate(full)

    return _make(out_data, (a,), backward)


def gather_rows(sources, specs, row_dim):
    """Assemble a (B, M) tensor where row b comes from sources[specs[b]][b].

    specs[b] is an index into sources, or -1 for a zero row. Used by the
    two-stack batch executor to pull child states from earlier steps.
    """
    sources = [_lift(s) for s in sources]
    out_data = np.zeros((len(specs), row_dim))
    for b, s in enumerate(specs):
        if s >= 0:
            out_data[b] = sources[s].data[b]

    def backward(g):
        for b, s in enumerate(specs):
            if s >= 0:
                src = sources[s]
                if src.grad is None:
                    src.grad = np.zeros_like(src.data)
                src.grad[b] += g[b]

    return _make(out_data, tuple(sources), backward)


# spec-facing aliases
matvec = matmul
mul_elementwise = mul


def assert_finite(a):
    data = a.data if isinstance(a, Tensor) else a
    if not np.all(np.isfinite(data)):
        raise NonFiniteError("non-finite value encountered")
    return a


def collect_params(params_dict):
    return [p for _, p in sorted(params_dict.items())]


def zero_grads(params):
    for p in params:
        p.grad = None


def grad_check(f, params, eps=1e-5, tol=1e-4):
    """Central finite differences against tape gradients.

    f() evaluates the scalar loss from the current parameter values.
    Returns a report dict; report['max_rel_error'] is the headline number.
    """
    zero_grads(params)
    loss = f()
    loss.backward()
    grads = [np.array(p.grad if p.grad is not None else np.zeros_like(p.data))
             for p in params]
    max_rel = 0.0
    worst = None
    for pi, p in enumerate(params):
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            up = float(f().data)
            flat[i] = old - eps
            down = float(f().data)
            flat[i] = old
            fd = (up - down) / (2 * eps)
            an = grads[pi].reshape(-1)[i]
            rel = abs(fd - an) / max(1.0, abs(fd), abs(an))
            if rel > max_rel:
                max_rel = rel
                worst = (pi, i, fd, an)
    return {"max_rel_error": max_rel, "worst": worst, "passed": max_rel <= tol}
