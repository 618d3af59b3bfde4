"""A small reverse-mode autodiff engine over rank <= 2 float64 arrays.

Each op returns a :class:`Tensor` that remembers its parents and a closure
which, given the output gradient, accumulates gradients into the parents.
:class:`Tape` orders the recorded nodes topologically and replays the closures
in reverse.

Edge weights, arc indices and segment ids enter the graph ops as plain numpy
constants; they are never differentiated.
"""

from __future__ import annotations

import os
from typing import Callable, Sequence

import numpy as np

CHECK_FINITE = bool(os.environ.get("SOFTEDGE_DEBUG"))


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None,
                 _parents: tuple["Tensor", ...] = (), _backward: Callable | None = None):
        value = np.asarray(value, dtype=np.float64)
        if value.ndim > 2:
            raise ValueError(f"tensors have rank <= 2, got shape {value.shape}")
        if CHECK_FINITE and not np.all(np.isfinite(value)):
            raise FloatingPointError(f"non-finite values produced ({name or 'op'})")
        self.value = value
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def numpy(self) -> np.ndarray:
        return self.value

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        Tape.from_output(self).backward(grad)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)


def _accumulate(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def _make(value, parents: Sequence[Tensor], backward, name) -> Tensor:
    req = any(p.requires_grad for p in parents)
    return Tensor(value, requires_grad=req, name=name,
                  _parents=tuple(parents) if req else (), _backward=backward if req else None)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Topologically ordered list of the nodes that produced an output."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_output(cls, out: Tensor) -> "Tape":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(out, False)]
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
        return cls(order)

    def backward(self, grad=None):
        out = self.nodes[-1]
        if not out.requires_grad:
            raise RuntimeError("output does not depend on any tensor requiring grad")
        seed = np.ones_like(out.value) if grad is None else np.asarray(grad, dtype=np.float64)
        out.grad = seed.copy() if out.grad is None else out.grad + seed
        for node in reversed(self.nodes):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                # interior gradients are not needed after propagation
                node.grad = None if node._parents else node.grad


# ---------------------------------------------------------------------------
# dense ops

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    av, bv = a.value, b.value

    def backward(g):
        _accumulate(a, g @ bv.T)
        _accumulate(b, av.T @ g)

    return _make(av @ bv, (a, b), backward, "matmul")


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum with numpy broadcasting (e.g. a 1 x n bias onto m x n)."""
    a, b = as_tensor(a), as_tensor(b)
    out = a.value + b.value

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _make(out, (a, b), backward, "add")


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product with broadcasting; a 1 x 1 tensor scales the other."""
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value

    def backward(g):
        _accumulate(a, _unbroadcast(g * bv, a.shape))
        _accumulate(b, _unbroadcast(g * av, b.shape))

    return _make(av * bv, (a, b), backward, "mul")


def add_scalar(a: Tensor, c: float) -> Tensor:
    def backward(g):
        _accumulate(a, g)

    return _make(a.value + c, (a,), backward, "add_scalar")


def relu(x: Tensor) -> Tensor:
    mask = x.value > 0

    def backward(g):
        _accumulate(x, g * mask)

    return _make(np.where(mask, x.value, 0.0), (x,), backward, "relu")


def total(x: Tensor) -> Tensor:
    """Sum of all entries as a rank-0 tensor."""

    def backward(g):
        _accumulate(x, np.broadcast_to(g, x.shape))

    return _make(x.value.sum(), (x,), backward, "sum")


def dropout(x: Tensor, p: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Inverted dropout: zero with probability ``p`` and rescale by ``1/(1-p)``."""
    if not train or p == 0.0:
        return x
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout probability must lie in [0, 1)")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)

    def backward(g):
        _accumulate(x, g * mask)

    return _make(x.value * mask, (x,), backward, "dropout")


# ---------------------------------------------------------------------------
# graph ops

def _scatter_rows(values: np.ndarray, index: np.ndarray, n: int) -> np.ndarray:
    """``out[index[i]] += values[i]``, accumulating in input order within each row."""
    out = np.zeros((n,) + values.shape[1:])
    if len(index) == 0:
        return out
    order = np.argsort(index, kind="stable")
    idx = index[order]
    starts = np.flatnonzero(np.concatenate(([True], idx[1:] != idx[:-1])))
    out[idx[starts]] = np.add.reduceat(values[order], starts, axis=0)
    return out


def row_gather(x: Tensor, index: np.ndarray) -> Tensor:
    """``out[i] = x[index[i]]``."""
    index = np.asarray(index, dtype=np.int64)
    n = x.shape[0]

    def backward(g):
        if x.requires_grad:
            _accumulate(x, _scatter_rows(g, index, n))

    if len(index) and (index.min() < 0 or index.max() >= n):
        raise IndexError("row_gather index out of range")
    return _make(x.value[index], (x,), backward, "row_gather")


def scatter_weighted_sum(messages: Tensor, targets: np.ndarray, weights: np.ndarray, out_rows: int) -> Tensor:
    """``out[v] = sum over arcs a with targets[a] == v of weights[a] * messages[a]``."""
    targets = np.asarray(targets, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    if len(targets) != messages.shape[0] or len(weights) != len(targets):
        raise ValueError("one target and one weight per message row required")
    if len(targets) and (targets.min() < 0 or targets.max() >= out_rows):
        raise IndexError("scatter target out of range")
    out = _scatter_rows(weights[:, None] * messages.value, targets, out_rows)

    def backward(g):
        _accumulate(messages, g[targets] * weights[:, None])

    return _make(out, (messages,), backward, "scatter_weighted_sum")


def segment_sum(x: Tensor, segments: np.ndarray, num_segments: int) -> Tensor:
    segments = np.asarray(segments, dtype=np.int64)
    out = _scatter_rows(x.value, segments, num_segments)

    def backward(g):
        _accumulate(x, g[segments])

    return _make(out, (x,), backward, "segment_sum")


def segment_mean(x: Tensor, segments: np.ndarray, num_segments: int) -> Tensor:
    segments = np.asarray(segments, dtype=np.int64)
    counts = np.bincount(segments, minlength=num_segments).astype(np.float64)
    inv = 1.0 / np.maximum(counts, 1.0)
    out = _scatter_rows(x.value, segments, num_segments) * inv[:, None]

    def backward(g):
        _accumulate(x, g[segments] * inv[segments][:, None])

    return _make(out, (x,), backward, "segment_mean")


def segment_max(x: Tensor, segments: np.ndarray, num_segments: int) -> Tensor:
    """Column-wise max per segment; the gradient goes to the first maximiser."""
    segments = np.asarray(segments, dtype=np.int64)
    d = x.shape[1]
    out = np.full((num_segments, d), -np.inf)
    np.maximum.at(out, segments, x.value)
    out[np.isneginf(out)] = 0.0
    # first row attaining the max, per (segment, column)
    hit = x.value == out[segments]
    rows = np.arange(x.shape[0])
    arg = np.full((num_segments, d), -1, dtype=np.int64)
    for j in range(d):
        r = rows[hit[:, j]]
        s = segments[r]
        first = np.full(num_segments, -1, dtype=np.int64)
        first[s[::-1]] = r[::-1]
        arg[:, j] = first

    def backward(g):
        if x.requires_grad:
            gx = np.zeros_like(x.value)
            valid = arg >= 0
            cols = np.broadcast_to(np.arange(d), arg.shape)
            gx[arg[valid], cols[valid]] += g[valid]
            _accumulate(x, gx)

    return _make(out, (x,), backward, "segment_max")


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under row-wise softmax."""
    labels = np.asarray(labels, dtype=np.int64)
    z = logits.value
    if z.ndim != 2 or len(labels) != z.shape[0]:
        raise ValueError("logits must be B x C with one label per row")
    if len(labels) and (labels.min() < 0 or labels.max() >= z.shape[1]):
        raise ValueError("label out of range")
    shifted = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logsum
    b = len(labels)
    loss = -logp[np.arange(b), labels].mean()

    def backward(g):
        p = np.exp(logp)
        p[np.arange(b), labels] -= 1.0
        _accumulate(logits, g * p / b)

    return _make(loss, (logits,), backward, "softmax_cross_entropy")


def numeric_grad(f: Callable[[], float], t: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of the scalar ``f()`` with respect to ``t.value``."""
    g = np.zeros_like(t.value)
    flat = t.value.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return g


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-10) -> float:
    """``||a - b|| / max(||a||, ||b||, floor)``."""
    num = float(np.linalg.norm(a - b))
    den = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), floor)
    return num / den
