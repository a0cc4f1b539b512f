"""A small reverse-mode differentiation engine over numpy arrays.

Each :class:`Tensor` records its parents and a closure that pushes the
upstream gradient back to them.  ``backward`` walks the graph in reverse
topological order.  Only the operations the fusion model and its losses need
are provided; everything runs in float64.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        # maps the upstream gradient to (parent, gradient) pairs
        self._backward: Callable[[np.ndarray], tuple] | None = None
        self.name = name

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    @staticmethod
    def _result(data: np.ndarray, parents: tuple["Tensor", ...],
                backward: Callable[[np.ndarray], tuple]) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad = self.grad + g

    def backward(self, grad=None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
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
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accumulate(g)
                continue
            for parent, pg in node._backward(g):
                if not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

    # arithmetic ----------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = as_tensor(other)
        a, b = self, other

        def back(g):
            return ((a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape)))
        return Tensor._result(a.data + b.data, (a, b), back)

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        a = self
        return Tensor._result(-a.data, (a,), lambda g: ((a, -g),))

    def __sub__(self, other) -> "Tensor":
        return self + (-as_tensor(other))

    def __rsub__(self, other) -> "Tensor":
        return as_tensor(other) + (-self)

    def __mul__(self, other) -> "Tensor":
        other = as_tensor(other)
        a, b = self, other

        def back(g):
            return ((a, _unbroadcast(g * b.data, a.shape)), (b, _unbroadcast(g * a.data, b.shape)))
        return Tensor._result(a.data * b.data, (a, b), back)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = as_tensor(other)
        a, b = self, other

        def back(g):
            return ((a, _unbroadcast(g / b.data, a.shape)),
                    (b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape)))
        return Tensor._result(a.data / b.data, (a, b), back)

    def __matmul__(self, w) -> "Tensor":
        """``(..., n) @ (n, m)``; the right operand must be 2-D."""
        w = as_tensor(w)
        if w.ndim != 2:
            raise ValueError("right matmul operand must be 2-D")
        x = self

        def back(g):
            gx = g @ w.data.T
            gw = x.data.reshape(-1, x.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            return ((x, gx), (w, gw))
        return Tensor._result(x.data @ w.data, (x, w), back)

    def __getitem__(self, idx) -> "Tensor":
        a = self

        def back(g):
            full = np.zeros_like(a.data)
            np.add.at(full, idx, g)
            return ((a, full),)
        return Tensor._result(a.data[idx], (a,), back)

    # elementwise -----------------------------------------------------------

    def relu(self) -> "Tensor":
        a = self
        mask = a.data > 0
        return Tensor._result(np.where(mask, a.data, 0.0), (a,), lambda g: ((a, g * mask),))

    def exp(self) -> "Tensor":
        a = self
        out = np.exp(a.data)
        return Tensor._result(out, (a,), lambda g: ((a, g * out),))

    def log(self) -> "Tensor":
        a = self
        return Tensor._result(np.log(a.data), (a,), lambda g: ((a, g / a.data),))

    # shape -----------------------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        a = self
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Tensor._result(a.data.reshape(shape), (a,), lambda g: ((a, g.reshape(a.shape)),))

    # reductions ------------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        a = self

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return ((a, np.broadcast_to(g, a.shape)),)
        return Tensor._result(a.data.sum(axis=axis, keepdims=keepdims), (a,), back)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        n = self.data.size if axis is None else np.prod([self.shape[i] for i in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def _extremum(self, axis: int, pick: Callable) -> "Tensor":
        a = self
        idx = np.expand_dims(pick(a.data, axis=axis), axis)
        out = np.take_along_axis(a.data, idx, axis=axis).squeeze(axis)

        def back(g):
            full = np.zeros_like(a.data)
            np.put_along_axis(full, idx, np.expand_dims(g, axis), axis=axis)
            return ((a, full),)
        return Tensor._result(out, (a,), back)

    def max(self, axis: int) -> "Tensor":
        return self._extremum(axis, np.argmax)

    def min(self, axis: int) -> "Tensor":
        return self._extremum(axis, np.argmin)

    def log_softmax(self, axis: int = -1) -> "Tensor":
        a = self
        shifted = a.data - a.data.max(axis=axis, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        out = shifted - lse
        soft = np.exp(out)

        def back(g):
            return ((a, g - soft * g.sum(axis=axis, keepdims=True)),)
        return Tensor._result(out, (a,), back)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def concat(tensors: Iterable[Tensor], axis: int = -1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    ax = axis % parts[0].ndim
    sizes = [p.shape[ax] for p in parts]
    bounds = np.cumsum([0, *sizes])

    def back(g):
        return tuple((p, np.take(g, np.arange(lo, hi), axis=ax))
                     for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]))
    return Tensor._result(np.concatenate([p.data for p in parts], axis=ax), tuple(parts), back)


def symmetric_mean(x: Tensor, axis: int) -> Tensor:
    """Mean whose floating-point result does not depend on element order.

    Values are summed in sorted order, so any permutation along ``axis``
    yields a bit-identical result.
    """
    n = x.shape[axis]
    out = np.sort(x.data, axis=axis).sum(axis=axis) / n

    def back(g):
        return ((x, np.broadcast_to(np.expand_dims(g, axis) / n, x.shape)),)
    return Tensor._result(out, (x,), back)


def dropout(x: Tensor, p: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity when ``rng`` is None or ``p == 0``."""
    if rng is None or p == 0.0:
        return x
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * keep
