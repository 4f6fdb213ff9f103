"""Array-valued automatic differentiation.

Two small engines that compose:

* :class:`Var` records a tape for reverse accumulation (``grad``).
* :class:`Dual` carries a tangent for forward accumulation
  (``directional_derivative``).

Functions written against the generic helpers in this module (``tanh``,
``sin``, ``exp`` ...) accept plain floats/ndarrays, ``Var`` and ``Dual``
alike.  A ``Dual`` whose value and tangent are ``Var`` objects gives
reverse-over-forward derivatives, which is how the physics residual (a time
derivative of the surrogate) is differentiated with respect to parameters.
"""
from __future__ import annotations

from typing import Callable

import numpy as np


class NonFiniteError(FloatingPointError):
    """Raised when an operation produces NaN/Inf."""

    def __init__(self, op: str, where: str = "forward"):
        super().__init__(f"non-finite value produced by '{op}' ({where} pass)")
        self.op = op


def _check(value: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(op)
    return value


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ----------------------------------------------------------------------------
# reverse mode
# ----------------------------------------------------------------------------


class Var:
    """A node on the reverse-mode tape."""

    __array_ufunc__ = None
    __slots__ = ("value", "parents", "op", "grad")

    def __init__(self, value, parents=(), op: str = "leaf"):
        self.value = _check(np.asarray(value, dtype=float), op)
        self.parents = parents  # sequence of (Var, vjp)
        self.op = op
        self.grad = None

    shape = property(lambda self: self.value.shape)
    ndim = property(lambda self: self.value.ndim)

    def __repr__(self):
        return f"Var(op={self.op!r}, shape={self.value.shape})"

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        return _binary(self, other, "add", lambda a, b: a + b,
                       lambda g, a, b: g, lambda g, a, b: g)

    __radd__ = __add__

    def __sub__(self, other):
        return _binary(self, other, "sub", lambda a, b: a - b,
                       lambda g, a, b: g, lambda g, a, b: -g)

    def __rsub__(self, other):
        return _binary(other, self, "sub", lambda a, b: a - b,
                       lambda g, a, b: g, lambda g, a, b: -g)

    def __mul__(self, other):
        return _binary(self, other, "mul", lambda a, b: a * b,
                       lambda g, a, b: g * b, lambda g, a, b: g * a)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return _binary(self, other, "div", lambda a, b: a / b,
                       lambda g, a, b: g / b, lambda g, a, b: -g * a / (b * b))

    def __rtruediv__(self, other):
        return _binary(other, self, "div", lambda a, b: a / b,
                       lambda g, a, b: g / b, lambda g, a, b: -g * a / (b * b))

    def __neg__(self):
        return Var(-self.value, ((self, lambda g: -g),), "neg")

    def __pow__(self, k):
        if isinstance(k, (Var, Dual)):
            raise TypeError("only constant exponents are supported")
        v = self.value
        return Var(v ** k, ((self, lambda g: g * k * v ** (k - 1)),), "pow")

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        v = self.value
        out = v[idx]

        def vjp(g):
            full = np.zeros_like(v)
            np.add.at(full, idx, g)
            return full

        return Var(out, ((self, vjp),), "getitem")

    @property
    def T(self):
        return Var(self.value.T, ((self, lambda g: g.T),), "transpose")

    def reshape(self, *shape):
        old = self.value.shape
        return Var(self.value.reshape(*shape),
                   ((self, lambda g: g.reshape(old)),), "reshape")

    def sum(self, axis=None):
        return vsum(self, axis)


def _binary(a, b, op, fwd, ga, gb):
    if isinstance(a, Dual) or isinstance(b, Dual):
        return NotImplemented
    av = a.value if isinstance(a, Var) else np.asarray(a, dtype=float)
    bv = b.value if isinstance(b, Var) else np.asarray(b, dtype=float)
    out = fwd(av, bv)
    parents = []
    if isinstance(a, Var):
        parents.append((a, lambda g: _unbroadcast(ga(g, av, bv), av.shape)))
    if isinstance(b, Var):
        parents.append((b, lambda g: _unbroadcast(gb(g, av, bv), bv.shape)))
    return Var(out, tuple(parents), op)


def _unary(x: Var, op: str, value: np.ndarray, deriv: np.ndarray) -> Var:
    return Var(value, ((x, lambda g: g * deriv),), op)


def matmul(a, b):
    av = a.value if isinstance(a, Var) else np.asarray(a, dtype=float)
    bv = b.value if isinstance(b, Var) else np.asarray(b, dtype=float)
    out = av @ bv
    parents = []
    if isinstance(a, Var):
        def ga(g):
            if bv.ndim == 1:
                return np.multiply.outer(g, bv)
            return g @ bv.T
        parents.append((a, ga))
    if isinstance(b, Var):
        def gb(g):
            if av.ndim == 1:
                return np.multiply.outer(av, g)
            return av.T @ g
        parents.append((b, gb))
    return Var(out, tuple(parents), "matmul")


def vsum(x: Var, axis=None) -> Var:
    v = x.value

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, v.shape).copy()
        return np.broadcast_to(np.expand_dims(g, axis), v.shape).copy()

    return Var(v.sum(axis=axis), ((x, vjp),), "sum")


def backward(out: Var) -> None:
    """Accumulate d out / d node into ``node.grad`` for every ancestor."""
    if out.value.size != 1:
        raise ValueError("backward() needs a scalar output")
    order: list[Var] = []
    seen: set[int] = set()
    stack = [(out, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    for node in order:
        node.grad = None
    out.grad = np.ones_like(out.value)
    for node in reversed(order):
        if node.grad is None:
            continue
        for parent, vjp in node.parents:
            g = vjp(node.grad)
            if not np.all(np.isfinite(g)):
                raise NonFiniteError(node.op, "reverse")
            parent.grad = g if parent.grad is None else parent.grad + g


# ----------------------------------------------------------------------------
# forward mode
# ----------------------------------------------------------------------------


class Dual:
    """Value plus tangent; either slot may hold an ndarray or a ``Var``."""

    __array_ufunc__ = None
    __slots__ = ("val", "tan")

    def __init__(self, val, tan):
        self.val = val
        self.tan = tan

    def __repr__(self):
        return f"Dual({self.val!r}, {self.tan!r})"

    def __add__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val + o.val, self.tan + o.tan)
        return Dual(self.val + o, self.tan)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val - o.val, self.tan - o.tan)
        return Dual(self.val - o, self.tan)

    def __rsub__(self, o):
        return Dual(o - self.val, -self.tan)

    def __mul__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val * o.val, self.tan * o.val + self.val * o.tan)
        return Dual(self.val * o, self.tan * o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val / o.val,
                        (self.tan * o.val - self.val * o.tan) / (o.val * o.val))
        return Dual(self.val / o, self.tan / o)

    def __rtruediv__(self, o):
        return Dual(o / self.val, -o * self.tan / (self.val * self.val))

    def __neg__(self):
        return Dual(-self.val, -self.tan)

    def __pow__(self, k):
        return Dual(self.val ** k, k * self.val ** (k - 1) * self.tan)

    def __matmul__(self, o):
        if isinstance(o, Dual):
            return Dual(matmul_any(self.val, o.val),
                        matmul_any(self.tan, o.val) + matmul_any(self.val, o.tan))
        return Dual(matmul_any(self.val, o), matmul_any(self.tan, o))

    def __rmatmul__(self, o):
        return Dual(matmul_any(o, self.val), matmul_any(o, self.tan))

    def __getitem__(self, idx):
        return Dual(self.val[idx], self.tan[idx])

    @property
    def T(self):
        return Dual(self.val.T, self.tan.T)

    def reshape(self, *shape):
        return Dual(self.val.reshape(*shape), self.tan.reshape(*shape))

    def sum(self, axis=None):
        return Dual(sum_any(self.val, axis), sum_any(self.tan, axis))


# ----------------------------------------------------------------------------
# generic elementwise functions
# ----------------------------------------------------------------------------


def matmul_any(a, b):
    if isinstance(a, Var) or isinstance(b, Var):
        return matmul(a, b)
    return np.asarray(a) @ np.asarray(b)


def sum_any(x, axis=None):
    if isinstance(x, Var):
        return vsum(x, axis)
    return np.sum(x, axis=axis)


def _elementwise(name: str, f: Callable, df: Callable):
    def fn(x):
        if isinstance(x, Dual):
            return Dual(fn(x.val), df_any(x.val) * x.tan)
        if isinstance(x, Var):
            return _unary(x, name, _check(f(x.value), name), df(x.value))
        return f(x)

    def df_any(x):
        # derivative evaluated on a possibly-taped value
        if isinstance(x, Var):
            return _DERIV_TAPED[name](x)
        return df(x)

    fn.__name__ = name
    return fn


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softplus(x):
    return np.logaddexp(0.0, x)


tanh = _elementwise("tanh", np.tanh, lambda x: 1.0 - np.tanh(x) ** 2)
sin = _elementwise("sin", np.sin, np.cos)
cos = _elementwise("cos", np.cos, lambda x: -np.sin(x))
exp = _elementwise("exp", np.exp, np.exp)
log = _elementwise("log", np.log, lambda x: 1.0 / x)
sqrt = _elementwise("sqrt", np.sqrt, lambda x: 0.5 / np.sqrt(x))
softplus = _elementwise("softplus", _softplus, _sigmoid)
sigmoid = _elementwise("sigmoid", _sigmoid, lambda x: _sigmoid(x) * (1.0 - _sigmoid(x)))
log1p = _elementwise("log1p", np.log1p, lambda x: 1.0 / (1.0 + x))

# derivative rules re-expressed with taped ops, so that a Dual over Var can be
# differentiated again in reverse mode
_DERIV_TAPED = {
    "tanh": lambda x: 1.0 - tanh(x) * tanh(x),
    "sin": lambda x: cos(x),
    "cos": lambda x: -sin(x),
    "exp": lambda x: exp(x),
    "log": lambda x: 1.0 / x,
    "sqrt": lambda x: 0.5 / sqrt(x),
    "softplus": lambda x: sigmoid(x),
    "sigmoid": lambda x: sigmoid(x) * (1.0 - sigmoid(x)),
    "log1p": lambda x: 1.0 / (1.0 + x),
}


# ----------------------------------------------------------------------------
# user-facing operations
# ----------------------------------------------------------------------------


def grad(f: Callable, at) -> np.ndarray:
    """Gradient of scalar ``f`` at ``at`` by reverse accumulation."""
    x = Var(np.array(at, dtype=float))
    out = f(x)
    if not isinstance(out, Var):
        return np.zeros_like(x.value)
    backward(out)
    return np.zeros_like(x.value) if x.grad is None else x.grad


def value_and_grad(f: Callable, at):
    x = Var(np.array(at, dtype=float))
    out = f(x)
    if not isinstance(out, Var):
        return float(out), np.zeros_like(x.value)
    backward(out)
    g = np.zeros_like(x.value) if x.grad is None else x.grad
    return float(out.value), g


def directional_derivative(f: Callable, at, direction) -> np.ndarray:
    """Jacobian-vector product ``J_f(at) @ direction`` by forward accumulation."""
    at = np.asarray(at, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if at.shape != direction.shape:
        raise ValueError(f"direction shape {direction.shape} != point shape {at.shape}")
    out = f(Dual(at, direction))
    if not isinstance(out, Dual):
        return np.zeros_like(np.asarray(out, dtype=float))
    return np.asarray(out.tan, dtype=float)


def central_difference(f: Callable, at, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of scalar ``f`` (test oracle)."""
    at = np.asarray(at, dtype=float)
    g = np.empty_like(at)
    flat = at.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        e = np.zeros_like(flat)
        e[i] = step
        gf[i] = (float(f((flat + e).reshape(at.shape)))
                 - float(f((flat - e).reshape(at.shape)))) / (2 * step)
    return g
