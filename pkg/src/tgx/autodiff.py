"""Reverse-mode automatic differentiation on dense float64 arrays.

A small tape-style engine: every operation returns a new ``Tensor`` that
remembers its parents and the vector-Jacobian products needed to push
gradients back to them.  The op set is exactly what the recurrent graph
model needs; there is no broadcasting beyond summation adjoints.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "matmul",
    "add",
    "sub",
    "mul",
    "scale",
    "sigmoid",
    "tanh",
    "log",
    "reduce_sum",
    "concat",
    "backward",
    "gradients",
    "Adam",
    "finite_difference",
    "relative_error",
]


class ShapeError(ValueError):
    """Incompatible operand shapes, tagged with the offending op."""


class Tensor:
    """A node of the computation graph holding a float64 ndarray."""

    __slots__ = ("value", "grad", "_parents", "_vjps")

    def __init__(self, value, parents=(), vjps=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._vjps = vjps

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(shape={self.value.shape})"


def _sigmoid(x):
    # split by sign to avoid overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.value, b.value
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul: {av.shape} @ {bv.shape}")
    return Tensor(av @ bv, (a, b), (lambda g: g @ bv.T, lambda g: av.T @ g))


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.value.shape != b.value.shape:
        raise ShapeError(f"add: {a.value.shape} vs {b.value.shape}")
    return Tensor(a.value + b.value, (a, b), (lambda g: g, lambda g: g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.value.shape != b.value.shape:
        raise ShapeError(f"sub: {a.value.shape} vs {b.value.shape}")
    return Tensor(a.value - b.value, (a, b), (lambda g: g, lambda g: -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product."""
    if a.value.shape != b.value.shape:
        raise ShapeError(f"mul: {a.value.shape} vs {b.value.shape}")
    av, bv = a.value, b.value
    return Tensor(av * bv, (a, b), (lambda g: g * bv, lambda g: g * av))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return Tensor(a.value * c, (a,), (lambda g: g * c,))


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid(a.value)
    return Tensor(s, (a,), (lambda g: g * s * (1.0 - s),))


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.value)
    return Tensor(t, (a,), (lambda g: g * (1.0 - t * t),))


def log(a: Tensor) -> Tensor:
    av = a.value
    return Tensor(np.log(av), (a,), (lambda g: g / av,))


def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.value.sum(axis=axis, keepdims=keepdims)
    shape = a.value.shape

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, shape)

    return Tensor(out, (a,), (vjp,))


def concat(tensors, axis: int = 1) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat: empty input")
    values = [t.value for t in tensors]
    base = list(values[0].shape)
    for v in values[1:]:
        other = list(v.shape)
        if len(other) != len(base) or any(
            o != b for i, (o, b) in enumerate(zip(other, base)) if i != axis
        ):
            raise ShapeError(f"concat: {values[0].shape} vs {v.shape} on axis {axis}")
    out = np.concatenate(values, axis=axis)
    offsets = np.cumsum([0] + [v.shape[axis] for v in values])

    def make_vjp(i):
        sl = [slice(None)] * out.ndim
        sl[axis] = slice(offsets[i], offsets[i + 1])
        sl = tuple(sl)
        return lambda g: g[sl]

    return Tensor(out, tuple(tensors), tuple(make_vjp(i) for i in range(len(tensors))))


def _topo_order(root: Tensor):
    """Parents-before-children ordering, iterative to cope with deep tapes."""
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


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(node) into ``.grad`` for every node reaching root.

    The root must hold a single value.  Grad buffers of the traversed
    subgraph are cleared first, so leaves shared across tapes start fresh.
    """
    if root.value.size != 1:
        raise ValueError(f"backward root must be scalar, got shape {root.value.shape}")
    order = _topo_order(root)
    for node in order:
        node.grad = None
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        g = node.grad
        if g is None:
            continue
        for parent, vjp in zip(node._parents, node._vjps):
            contrib = vjp(g)
            parent.grad = contrib if parent.grad is None else parent.grad + contrib


def gradients(root: Tensor, params: dict) -> dict:
    """Run backward and return a gradient per named parameter.

    Parameters the root does not depend on get exact zeros.
    """
    backward(root)
    out = {}
    for name, p in params.items():
        out[name] = np.zeros_like(p.value) if p.grad is None else np.array(p.grad)
    return out


class Adam:
    """Adam with bias correction over a dict of named parameter tensors."""

    def __init__(self, params: dict, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self.m = {k: np.zeros_like(p.value) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.value) for k, p in params.items()}

    def step(self, grads: dict) -> None:
        self.step_count += 1
        t = self.step_count
        for name, p in self.params.items():
            g = grads[name]
            if g.shape != p.value.shape:
                raise ShapeError(f"adam: gradient {g.shape} vs parameter {p.value.shape} for {name}")
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[name] / (1.0 - self.beta1 ** t)
            v_hat = self.v[name] / (1.0 - self.beta2 ** t)
            p.value = p.value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def finite_difference(f, params: dict, step: float = 1e-5) -> dict:
    """Central-difference gradients of the scalar ``f()`` wrt each parameter.

    ``f`` must rebuild its computation from the parameters' current values.
    """
    out = {}
    for name, p in params.items():
        grad = np.zeros_like(p.value)
        flat_p = p.value.ravel()
        flat_g = grad.ravel()
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + step
            f_plus = float(f())
            flat_p[i] = orig - step
            f_minus = float(f())
            flat_p[i] = orig
            flat_g[i] = (f_plus - f_minus) / (2.0 * step)
        out[name] = grad
    return out


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Norm-based relative difference, robust near zero."""
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)
