"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

Define-by-run: every operation returns a fresh ``Tensor`` holding its value,
references to its inputs, and a closure that pushes gradients back to them.
``backward`` topologically sorts the graph reachable from a scalar loss and
runs the closures in reverse. Gradient accumulation is additive, so a tensor
feeding several consumers receives the sum of their contributions.
"""

import numpy as np
from scipy.special import ndtr

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Tensor:
    """A shaped float64 array with a gradient accumulator and tape linkage."""

    __slots__ = ("data", "grad", "_parents", "_push")

    def __init__(self, data, parents=(), push=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._push = push

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self):
        """Same values, no tape linkage: gradients stop here."""
        return Tensor(self.data.copy())

    # Operator sugar; raw scalars/arrays are wrapped as constants.
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
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, shape):
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad, shape):
    """Sum gradient over axes that were broadcast in the forward pass."""
    grad = np.asarray(grad, dtype=np.float64)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _accumulate(t, grad):
    if grad.shape != t.data.shape:
        grad = _unbroadcast(grad, t.data.shape)
    if t.grad is None:
        # copy: the incoming buffer may be shared with another consumer
        t.grad = np.array(grad, dtype=np.float64)
    else:
        t.grad += grad


def _check_broadcast(a, b, op):
    sa, sb = a.data.shape, b.data.shape
    ra, rb = sa[::-1], sb[::-1]
    for da, db in zip(ra, rb):
        if da != db and da != 1 and db != 1:
            raise ValueError(f"{op}: shapes {sa} and {sb} are not broadcast-compatible")


# ---------------------------------------------------------------------------
# elementwise binary ops


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    out = Tensor(a.data + b.data, parents=(a, b))

    def push(g):
        _accumulate(a, g)
        _accumulate(b, g)

    out._push = push
    return out


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    out = Tensor(a.data - b.data, parents=(a, b))

    def push(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    out._push = push
    return out


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    out = Tensor(a.data * b.data, parents=(a, b))

    def push(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    out._push = push
    return out


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    out = Tensor(a.data / b.data, parents=(a, b))

    def push(g):
        _accumulate(a, g / b.data)
        _accumulate(b, -g * a.data / (b.data * b.data))

    out._push = push
    return out


# ---------------------------------------------------------------------------
# elementwise unary ops


def neg(a):
    a = as_tensor(a)
    out = Tensor(-a.data, parents=(a,))
    out._push = lambda g: _accumulate(a, -g)
    return out


def exp(a):
    a = as_tensor(a)
    out = Tensor(np.exp(a.data), parents=(a,))
    out._push = lambda g: _accumulate(a, g * out.data)
    return out


def log(a):
    a = as_tensor(a)
    out = Tensor(np.log(a.data), parents=(a,))
    out._push = lambda g: _accumulate(a, g / a.data)
    return out


def absolute(a):
    a = as_tensor(a)
    out = Tensor(np.abs(a.data), parents=(a,))
    out._push = lambda g: _accumulate(a, g * np.sign(a.data))
    return out


def square(a):
    a = as_tensor(a)
    out = Tensor(a.data * a.data, parents=(a,))
    out._push = lambda g: _accumulate(a, 2.0 * g * a.data)
    return out


def tanh(a):
    a = as_tensor(a)
    out = Tensor(np.tanh(a.data), parents=(a,))
    out._push = lambda g: _accumulate(a, g * (1.0 - out.data * out.data))
    return out


def sigmoid(a):
    a = as_tensor(a)
    # stable logistic: exp of a non-positive argument on both branches
    x = a.data
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = Tensor(y, parents=(a,))
    out._push = lambda g: _accumulate(a, g * out.data * (1.0 - out.data))
    return out


def relu(a):
    a = as_tensor(a)
    out = Tensor(np.maximum(a.data, 0.0), parents=(a,))
    out._push = lambda g: _accumulate(a, g * (a.data > 0))
    return out


def silu(a):
    """x * sigmoid(x)."""
    a = as_tensor(a)
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(a.data * s, parents=(a,))
    # d/dx [x s(x)] = s(x) (1 + x (1 - s(x)))
    out._push = lambda g: _accumulate(a, g * s * (1.0 + a.data * (1.0 - s)))
    return out


def gelu(a):
    """x * Phi(x) with the exact Gaussian CDF."""
    a = as_tensor(a)
    phi_cdf = ndtr(a.data)
    out = Tensor(a.data * phi_cdf, parents=(a,))

    def push(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * a.data * a.data)
        _accumulate(a, g * (phi_cdf + a.data * pdf))

    out._push = push
    return out


def clip(a, lo, hi):
    """Clamp values; gradient passes only through unclipped entries."""
    a = as_tensor(a)
    out = Tensor(np.clip(a.data, lo, hi), parents=(a,))
    inside = (a.data >= lo) & (a.data <= hi)
    out._push = lambda g: _accumulate(a, g * inside)
    return out


# ---------------------------------------------------------------------------
# linear algebra and shaping


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul: expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: inner dimensions disagree for {a.shape} and {b.shape}")
    out = Tensor(a.data @ b.data, parents=(a, b))

    def push(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    out._push = push
    return out


def transpose(a):
    a = as_tensor(a)
    if a.ndim != 2:
        raise ValueError(f"transpose: expects a 2-D tensor, got {a.shape}")
    out = Tensor(a.data.T.copy(), parents=(a,))
    out._push = lambda g: _accumulate(a, g.T)
    return out


def reshape(a, shape):
    a = as_tensor(a)
    out = Tensor(a.data.reshape(shape), parents=(a,))
    out._push = lambda g: _accumulate(a, g.reshape(a.data.shape))
    return out


def getitem(a, key):
    a = as_tensor(a)
    out = Tensor(np.array(a.data[key], dtype=np.float64), parents=(a,))

    def push(g):
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        _accumulate(a, full)

    out._push = push
    return out


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), parents=tuple(tensors))
    sizes = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def push(g):
        for t, piece in zip(tensors, np.split(g, sizes, axis=axis)):
            _accumulate(t, piece)

    out._push = push
    return out


# ---------------------------------------------------------------------------
# reductions


def tensor_sum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = Tensor(np.sum(a.data, axis=axis, keepdims=keepdims), parents=(a,))

    def push(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape))

    out._push = push
    return out


def tensor_mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    out = Tensor(np.mean(a.data, axis=axis, keepdims=keepdims), parents=(a,))

    def push(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape) / count)

    out._push = push
    return out


def softmax_temp(logits, tau, axis=-1):
    """Row-stochastic softmax of logits / tau along ``axis``; tau must be > 0.

    Numerically stabilized by subtracting the running maximum.
    """
    if tau <= 0:
        raise ValueError(f"softmax_temp: temperature must be positive, got {tau}")
    a = as_tensor(logits)
    scaled = a.data / tau
    scaled = scaled - np.max(scaled, axis=axis, keepdims=True)
    e = np.exp(scaled)
    y = e / np.sum(e, axis=axis, keepdims=True)
    out = Tensor(y, parents=(a,))

    def push(g):
        inner = np.sum(g * y, axis=axis, keepdims=True)
        _accumulate(a, y * (g - inner) / tau)

    out._push = push
    return out


def straight_through(hard, soft):
    """Forward equals ``hard`` bit for bit; gradient flows to ``soft`` unchanged.

    The hard branch receives exactly zero gradient.
    """
    soft = as_tensor(soft)
    hard_data = hard.data if isinstance(hard, Tensor) else np.asarray(hard, dtype=np.float64)
    if hard_data.shape != soft.data.shape:
        raise ValueError(f"straight_through: shapes {hard_data.shape} and {soft.data.shape} differ")
    out = Tensor(hard_data.copy(), parents=(soft,))
    out._push = lambda g: _accumulate(soft, g)
    return out


# ---------------------------------------------------------------------------
# reverse pass


def backward(loss):
    """Populate ``grad`` on every tensor reachable from a scalar loss."""
    if loss.data.size != 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.data.shape}")

    # iterative post-order: each node appears after all of its parents
    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._push is not None and node.grad is not None:
            node._push(node.grad)
