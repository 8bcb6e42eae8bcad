"""Reverse-mode automatic differentiation over dense float64 numpy arrays.

The design is a classic Wengert list: a `Tape` records every primitive as
it executes (value, parent indices, and one vector-Jacobian callback per
parent), and `backward` replays the list once in reverse.  Because nodes
are appended in execution order, the record is already topologically
sorted and each node is visited exactly once.

Operands broadcast under normal numpy rules; the reverse pass sums
gradients back down to each parent's shape.  Values are never mutated
after recording -- rerunning a computation means building a fresh tape,
which is how the training loop uses this module (one tape per step).
"""

import numpy as np

from . import special


class Tape:
    """Append-only record of primitive operations."""

    def __init__(self):
        self._values = []
        self._parents = []
        self._vjps = []
        self._grads = None

    def __len__(self):
        return len(self._values)

    def leaf(self, value):
        """Record an input (or constant) and return its Var handle."""
        return self._record(np.asarray(value, dtype=np.float64), (), ())

    def _record(self, value, parents, vjps):
        if not np.all(np.isfinite(value)):
            raise FloatingPointError("non-finite value recorded on tape")
        self._values.append(value)
        self._parents.append(parents)
        self._vjps.append(vjps)
        return Var(self, len(self._values) - 1)

    def _grad_of(self, index):
        if self._grads is None:
            raise RuntimeError("gradients not computed; call backward first")
        g = self._grads[index]
        if g is None:
            return np.zeros_like(self._values[index])
        return g


class Var:
    """Handle to one tape node: a value plus (after backward) a gradient."""

    __slots__ = ("tape", "index")

    def __init__(self, tape, index):
        self.tape = tape
        self.index = index

    @property
    def value(self):
        return self.tape._values[self.index]

    @property
    def grad(self):
        return self.tape._grad_of(self.index)

    @property
    def shape(self):
        return self.value.shape

    def sum(self, axis=None):
        return vsum(self, axis=axis)

    def mean(self, axis=None):
        return vmean(self, axis=axis)

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Var(shape={self.value.shape}, index={self.index})"


def _lift(tape, x):
    """Return x as a Var on `tape`, recording constants as leaves."""
    if isinstance(x, Var):
        if x.tape is not tape:
            raise ValueError("operands recorded on different tapes")
        return x
    return tape.leaf(x)


def _tape_of(*operands):
    for x in operands:
        if isinstance(x, Var):
            return x.tape
    raise TypeError("at least one operand must be a Var")


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def add(a, b):
    tape = _tape_of(a, b)
    a, b = _lift(tape, a), _lift(tape, b)
    av, bv = a.value, b.value
    return tape._record(
        av + bv,
        (a.index, b.index),
        (lambda g: _unbroadcast(g, av.shape), lambda g: _unbroadcast(g, bv.shape)),
    )


def sub(a, b):
    tape = _tape_of(a, b)
    a, b = _lift(tape, a), _lift(tape, b)
    av, bv = a.value, b.value
    return tape._record(
        av - bv,
        (a.index, b.index),
        (lambda g: _unbroadcast(g, av.shape), lambda g: _unbroadcast(-g, bv.shape)),
    )


def mul(a, b):
    tape = _tape_of(a, b)
    a, b = _lift(tape, a), _lift(tape, b)
    av, bv = a.value, b.value
    return tape._record(
        av * bv,
        (a.index, b.index),
        (lambda g: _unbroadcast(g * bv, av.shape), lambda g: _unbroadcast(g * av, bv.shape)),
    )


def div(a, b):
    tape = _tape_of(a, b)
    a, b = _lift(tape, a), _lift(tape, b)
    av, bv = a.value, b.value
    return tape._record(
        av / bv,
        (a.index, b.index),
        (
            lambda g: _unbroadcast(g / bv, av.shape),
            lambda g: _unbroadcast(-g * av / (bv * bv), bv.shape),
        ),
    )


def neg(a):
    tape = a.tape
    return tape._record(-a.value, (a.index,), (lambda g: -g,))


def matmul(a, b):
    """Matrix product following np.matmul for 1-D and 2-D operands."""
    tape = _tape_of(a, b)
    a, b = _lift(tape, a), _lift(tape, b)
    av, bv = a.value, b.value
    if av.ndim > 2 or bv.ndim > 2:
        raise ValueError("matmul supports 1-D and 2-D operands only")
    value = av @ bv

    def grad_a(g):
        if av.ndim == 1 and bv.ndim == 1:
            return g * bv
        if av.ndim == 1:          # (k,) @ (k,n) -> (n,)
            return bv @ g
        if bv.ndim == 1:          # (m,k) @ (k,) -> (m,)
            return np.outer(g, bv)
        return g @ bv.T

    def grad_b(g):
        if av.ndim == 1 and bv.ndim == 1:
            return g * av
        if av.ndim == 1:
            return np.outer(av, g)
        if bv.ndim == 1:
            return av.T @ g
        return av.T @ g

    return tape._record(value, (a.index, b.index), (grad_a, grad_b))


def _axis_tuple(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def vsum(a, axis=None):
    """Sum over the given axes (all axes when None)."""
    av = a.value
    axes = _axis_tuple(axis, av.ndim)
    value = av.sum(axis=axes) if av.ndim else av.copy()

    def grad(g):
        expanded = np.expand_dims(g, axes) if av.ndim else g
        return np.broadcast_to(expanded, av.shape).copy()

    return a.tape._record(value, (a.index,), (grad,))


def vmean(a, axis=None):
    av = a.value
    axes = _axis_tuple(axis, av.ndim)
    count = int(np.prod([av.shape[i] for i in axes])) if av.ndim else 1
    value = av.mean(axis=axes) if av.ndim else av.copy()

    def grad(g):
        expanded = np.expand_dims(g, axes) if av.ndim else g
        return np.broadcast_to(expanded, av.shape) / count

    return a.tape._record(value, (a.index,), (grad,))


def exp(a):
    value = np.exp(a.value)
    return a.tape._record(value, (a.index,), (lambda g: g * value,))


def log(a):
    av = a.value
    if np.any(av <= 0.0):
        raise ValueError("log requires strictly positive input")
    return a.tape._record(np.log(av), (a.index,), (lambda g: g / av,))


def tanh(a):
    value = np.tanh(a.value)
    return a.tape._record(value, (a.index,), (lambda g: g * (1.0 - value * value),))


def relu(a):
    av = a.value
    return a.tape._record(np.maximum(av, 0.0), (a.index,), (lambda g: g * (av > 0.0),))


def sigmoid(a):
    value = special.sigmoid(a.value)
    value = np.asarray(value)
    return a.tape._record(value, (a.index,), (lambda g: g * value * (1.0 - value),))


def softplus(a):
    av = a.value
    value = np.maximum(av, 0.0) + np.log1p(np.exp(-np.abs(av)))
    sig = np.asarray(special.sigmoid(av))
    return a.tape._record(value, (a.index,), (lambda g: g * sig,))


def log_sigmoid(a):
    av = a.value
    value = np.asarray(special.log_sigmoid(av))
    sig_neg = np.asarray(special.sigmoid(-av))   # d/dx log sigmoid(x) = sigmoid(-x)
    return a.tape._record(value, (a.index,), (lambda g: g * sig_neg,))


def take(a, indices):
    """Gather elements from the flattened parent: result[i] = a.ravel()[indices[i]].

    `indices` is an integer array of any shape; the result has the same
    shape.  The reverse pass scatter-adds, so repeated indices accumulate.
    """
    idx = np.asarray(indices)
    if not np.issubdtype(idx.dtype, np.integer):
        raise TypeError("take requires integer indices")
    av = a.value
    flat = av.reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= flat.size):
        raise IndexError("take index out of range")
    value = flat[idx]

    def grad(g):
        out = np.zeros_like(flat)
        np.add.at(out, idx.reshape(-1), g.reshape(-1))
        return out.reshape(av.shape)

    return a.tape._record(value, (a.index,), (grad,))


def clip(a, lo, hi):
    """Clamp values to [lo, hi]; gradient is identity strictly inside, 0 outside."""
    av = a.value
    inside = (av > lo) & (av < hi)
    return a.tape._record(np.clip(av, lo, hi), (a.index,), (lambda g: g * inside,))


def lgamma(a):
    av = a.value
    if np.any(av <= 0.0):
        raise ValueError("lgamma requires strictly positive input")
    value = np.asarray(special.log_gamma(av))
    dg = np.asarray(special.digamma(av))
    return a.tape._record(value, (a.index,), (lambda g: g * dg,))


def digamma(a):
    av = a.value
    if np.any(av <= 0.0):
        raise ValueError("digamma requires strictly positive input")
    value = np.asarray(special.digamma(av))
    tg = np.asarray(special.trigamma(av))
    return a.tape._record(value, (a.index,), (lambda g: g * tg,))


def backward(loss):
    """Reverse sweep from a scalar Var; fills gradient slots on its tape.

    Every Var reachable from `loss` ends up with d(loss)/d(value); nodes
    the loss does not depend on read back as zeros.
    """
    if loss.value.size != 1:
        raise ValueError("backward requires a scalar loss")
    tape = loss.tape
    grads = [None] * len(tape)
    grads[loss.index] = np.ones_like(loss.value)
    for i in range(loss.index, -1, -1):
        g = grads[i]
        if g is None:
            continue
        for parent, vjp in zip(tape._parents[i], tape._vjps[i]):
            contrib = vjp(g)
            if grads[parent] is None:
                grads[parent] = np.asarray(contrib, dtype=np.float64)
            else:
                grads[parent] = grads[parent] + contrib
    tape._grads = grads
