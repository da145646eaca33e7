"""A small reverse-mode automatic differentiation engine over numpy arrays.

Each :class:`Tensor` records the op that produced it together with a
closure that maps the output gradient to input gradients. ``backward``
walks the recorded graph in reverse topological order.
"""

from __future__ import annotations

import numpy as np


class UsageError(RuntimeError):
    pass


class ShapeError(ValueError):
    pass


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.shape}, name={self.name!r})"

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    # graph construction -------------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        needs = any(p.requires_grad for p in parents)
        if not needs:
            return Tensor(data)
        return Tensor(data, requires_grad=True, _parents=parents, _backward=backward)

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise UsageError(
                    f"backward() without a seed gradient needs a scalar, got shape {self.shape}"
                )
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
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

        grads = {id(self): np.asarray(grad, dtype=np.float64)}
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
                grads[key] = pg if key not in grads else grads[key] + pg

    # elementwise ----------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        a, b = self.shape, other.shape
        return Tensor._make(self.data + other.data, (self, other),
                            lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)))

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other)
        a, b = self.shape, other.shape
        return Tensor._make(self.data - other.data, (self, other),
                            lambda g: (_unbroadcast(g, a), _unbroadcast(-g, b)))

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        x, y = self.data, other.data
        return Tensor._make(x * y, (self, other),
                            lambda g: (_unbroadcast(g * y, x.shape), _unbroadcast(g * x, y.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        x, y = self.data, other.data
        out = x / y
        return Tensor._make(out, (self, other),
                            lambda g: (_unbroadcast(g / y, x.shape),
                                       _unbroadcast(-g * out / y, y.shape)))

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,))

    def __pow__(self, p):
        x = self.data
        return Tensor._make(x ** p, (self,), lambda g: (g * p * x ** (p - 1),))

    def exp(self):
        out = np.exp(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out,))

    def log(self):
        x = self.data
        return Tensor._make(np.log(x), (self,), lambda g: (g / x,))

    def sqrt(self):
        out = np.sqrt(self.data)
        return Tensor._make(out, (self,), lambda g: (g * 0.5 / out,))

    def gelu(self):
        """Tanh-approximated GELU; smooth everywhere, so finite differences behave."""
        x = self.data
        c = np.sqrt(2.0 / np.pi)
        x2 = x * x
        t = np.tanh(c * x * (1.0 + 0.044715 * x2))
        out = 0.5 * x * (1.0 + t)

        def back(g):
            du = c * (1.0 + 3 * 0.044715 * x2)
            return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du),)

        return Tensor._make(out, (self,), back)

    # reductions / shape ----------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), back)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod(
            [self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        old = self.shape
        return Tensor._make(self.data.reshape(*shape), (self,), lambda g: (g.reshape(old),))

    def swapaxes(self, a, b):
        return Tensor._make(self.data.swapaxes(a, b), (self,), lambda g: (g.swapaxes(a, b),))

    @property
    def T(self):
        return self.swapaxes(-1, -2)

    def __getitem__(self, idx):
        shape = self.shape

        def back(g):
            out = np.zeros(shape)
            np.add.at(out, idx, g)
            return (out,)

        return Tensor._make(self.data[idx], (self,), back)

    def __matmul__(self, other):
        other = as_tensor(other)
        x, y = self.data, other.data
        if x.ndim < 2 or y.ndim < 2:
            raise ShapeError("matmul operands must be at least 2-D")

        def back(g):
            gx = g @ np.swapaxes(y, -1, -2)
            gy = np.swapaxes(x, -1, -2) @ g
            return _unbroadcast(gx, x.shape), _unbroadcast(gy, y.shape)

        return Tensor._make(x @ y, (self, other), back)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name=None):
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def stack(tensors, axis=0):
    datas = [t.data for t in tensors]

    def back(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return Tensor._make(np.stack(datas, axis=axis), tuple(tensors), back)


def l2_normalize(x, axis=-1, eps=1e-12):
    norm = ((x * x).sum(axis=axis, keepdims=True) + eps).sqrt()
    return x / norm


def conv1d_same(x, kernel, bias=None, dilation=1):
    """Zero-padded dilated cross-correlation keeping the time length.

    x: (..., L, C_in); kernel: (C_out, C_in, k) with k odd; returns (..., L, C_out).
    Tap m reads x[t + (m - k//2) * dilation].
    """
    x = as_tensor(x)
    kernel = as_tensor(kernel)
    c_out, c_in, k = kernel.shape
    if k % 2 != 1:
        raise ShapeError(f"kernel size must be odd, got {k}")
    if dilation < 1:
        raise ShapeError(f"dilation must be >= 1, got {dilation}")
    if x.shape[-1] != c_in:
        raise ShapeError(f"input has {x.shape[-1]} channels, kernel expects {c_in}")
    L = x.shape[-2]
    pad = dilation * (k // 2)
    if 2 * pad + 1 >= 2 * L:
        raise ShapeError(f"receptive span {2 * pad + 1} too wide for length {L}")
    lead = x.shape[:-2]
    xd = x.data.reshape(-1, L, c_in)
    xp = np.pad(xd, ((0, 0), (pad, pad), (0, 0)))
    # cols: (B, L, k, C_in)
    cols = np.stack([xp[:, m * dilation:m * dilation + L, :] for m in range(k)], axis=2)
    w2 = kernel.data.transpose(2, 1, 0).reshape(k * c_in, c_out)
    out = cols.reshape(-1, k * c_in) @ w2
    parents = [x, kernel]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents.append(bias)
    out = out.reshape(*lead, L, c_out)

    def back(g):
        g2 = g.reshape(-1, c_out)
        gw = (cols.reshape(-1, k * c_in).T @ g2).reshape(k, c_in, c_out).transpose(2, 1, 0)
        gcols = (g2 @ w2.T).reshape(-1, L, k, c_in)
        gxp = np.zeros_like(xp)
        for m in range(k):
            gxp[:, m * dilation:m * dilation + L, :] += gcols[:, :, m, :]
        gx = gxp[:, pad:pad + L, :].reshape(x.shape)
        grads = [gx, gw]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)

    return Tensor._make(out, tuple(parents), back)


class Adam:
    """Bias-corrected adaptive-moment optimizer over a list of parameters."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        live = [i for i, p in enumerate(self.params) if p.grad is not None]
        if not live:
            return
        state = {"t": self.t, "m": [self.m[i] for i in live], "v": [self.v[i] for i in live]}
        new_p, state = adam_step([self.params[i].data for i in live],
                                 [self.params[i].grad for i in live], state, self.lr,
                                 (self.beta1, self.beta2), self.eps)
        self.t = state["t"]
        for i, p, m, v in zip(live, new_p, state["m"], state["v"]):
            self.params[i].data = p
            self.m[i], self.v[i] = m, v


def adam_step(params, grads, state, lr, betas=(0.9, 0.999), eps=1e-8):
    """Functional Adam update on plain arrays.

    ``state`` is ``{"t": int, "m": [...], "v": [...]}`` or empty to start fresh.
    Returns (new_params, new_state).
    """
    b1, b2 = betas
    t = state.get("t", 0) + 1
    ms = state.get("m") or [np.zeros_like(p) for p in params]
    vs = state.get("v") or [np.zeros_like(p) for p in params]
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, ms, vs):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        step = lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
        new_p.append(p - step)
        new_m.append(m)
        new_v.append(v)
    return new_p, {"t": t, "m": new_m, "v": new_v}
