"""Dense tensors with reverse-mode automatic differentiation.

A Tensor wraps a contiguous numpy float array together with an optional
gradient and a record of the operation that produced it.  Graphs are built
define-by-run: every operation allocates a fresh output node, so a new
graph exists for every forward pass and ``backward`` walks it once in
reverse topological order.

Values are float32 by default.  float64 is accepted so that gradient
checks can run at higher precision, but nothing in the library upcasts on
its own: an operation's output dtype is the dtype of its inputs.
"""

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible, naming the offending axis."""


def _require(cond, msg):
    if not cond:
        raise ShapeError(msg)


class Tensor:
    """N-dimensional value container and autodiff graph node.

    Attributes:
        data: numpy array (C-contiguous, float32 or float64).
        grad: accumulated gradient of the same shape, or None.
        requires_grad: whether backward should reach this node.
    """

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        arr = np.asarray(data)
        if dtype is None:
            dtype = arr.dtype if arr.dtype in (np.float32, np.float64) else np.float32
        self.data = np.ascontiguousarray(arr, dtype=dtype)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}{tag})"

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, g):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def backward(self, seed=None):
        """Propagate gradients from this node to every reachable parent.

        Without an explicit seed the node must be a scalar; the seed is then
        an array of ones, i.e. d(self)/d(self) = 1.
        """
        if seed is None:
            _require(self.size == 1,
                     f"backward() without a seed needs a scalar, got shape {self.shape}")
            seed = np.ones_like(self.data)
        else:
            seed = np.asarray(seed, dtype=self.data.dtype)
            _require(seed.shape == self.data.shape,
                     f"seed shape {seed.shape} != tensor shape {self.data.shape}")

        order = _toposort(self)
        self.accumulate_grad(seed)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # Arithmetic sugar used for loss combination; elementwise ops live below.
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    def __rmul__(self, other):
        return scale(self, float(other))


def _toposort(root):
    """Iterative DFS postorder over the backward graph (graphs are acyclic)."""
    order = []
    seen = set()
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
            if id(p) not in seen:
                stack.append((p, False))
    return order


def _result(data, parents, backward):
    needs = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs, dtype=data.dtype)
    if needs:
        out._parents = tuple(parents)
        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# Elementwise and structural operations
# ---------------------------------------------------------------------------

def add(a, b):
    """Elementwise sum of two tensors of identical shape."""
    _require(a.shape == b.shape, f"add: shapes differ {a.shape} vs {b.shape}")

    def backward(grad):
        a.accumulate_grad(grad)
        b.accumulate_grad(grad)

    return _result(a.data + b.data, (a, b), backward)


def mul(a, b):
    """Elementwise product of two tensors of identical shape."""
    _require(a.shape == b.shape, f"mul: shapes differ {a.shape} vs {b.shape}")

    def backward(grad):
        a.accumulate_grad(grad * b.data)
        b.accumulate_grad(grad * a.data)

    return _result(a.data * b.data, (a, b), backward)


def scale(x, s):
    """Multiply by a python scalar."""
    s = x.data.dtype.type(s)

    def backward(grad):
        x.accumulate_grad(grad * s)

    return _result(x.data * s, (x,), backward)


def relu(x):
    out_data = np.maximum(x.data, 0)

    def backward(grad):
        x.accumulate_grad(grad * (out_data > 0))

    return _result(out_data, (x,), backward)


def concat_channels(tensors):
    """Concatenate [N,C,H,W] tensors along the channel axis.

    All inputs must agree on N, H and W.
    """
    _require(len(tensors) >= 1, "concat_channels: empty input list")
    first = tensors[0]
    _require(first.ndim == 4, f"concat_channels: expected 4-d input, got {first.ndim}-d")
    for t in tensors[1:]:
        _require(t.ndim == 4, f"concat_channels: expected 4-d input, got {t.ndim}-d")
        for axis in (0, 2, 3):
            _require(t.shape[axis] == first.shape[axis],
                     f"concat_channels: axis {axis} differs "
                     f"({t.shape[axis]} vs {first.shape[axis]})")
    widths = [t.shape[1] for t in tensors]
    offsets = np.cumsum([0] + widths)

    def backward(grad):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            t.accumulate_grad(grad[:, lo:hi])

    return _result(np.concatenate([t.data for t in tensors], axis=1), tensors, backward)


def sum_all(x):
    """Sum every element into a scalar tensor."""
    def backward(grad):
        x.accumulate_grad(np.full_like(x.data, grad.reshape(-1)[0]))

    return _result(x.data.sum(dtype=x.data.dtype).reshape(()), (x,), backward)
