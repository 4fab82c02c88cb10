"""Reverse-mode automatic differentiation over numpy arrays.

Every primitive builds its output `Tensor` together with a closure that maps
the output gradient to the gradients of its parents.  Nodes that do not
depend on any trainable leaf carry no closure, so constant sub-graphs cost
nothing at backward time.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np

DTYPE = np.float64

_state = threading.local()


class ShapeError(ValueError):
    """Raised when a primitive receives incompatible shapes."""

    def __init__(self, primitive: str, *shapes):
        self.primitive = primitive
        self.shapes = shapes
        shown = ", ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{primitive}: incompatible shapes {shown}")


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Build no graph inside the block (thread-local)."""
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class Tensor:
    __slots__ = ("data", "_grad", "op", "parents", "_backward", "requires_grad", "name")

    def __init__(self, data, parents=(), op="leaf", requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=DTYPE) if not isinstance(data, np.ndarray) else data
        self._grad = None
        self.op = op
        self.parents = parents
        self._backward = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            return np.zeros_like(self.data)
        return self._grad

    @grad.setter
    def grad(self, value):
        if value is not None and np.shape(value) != self.data.shape:
            raise ShapeError("grad", np.shape(value), self.data.shape)
        self._grad = value

    def zero_grad(self):
        self._grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.data.shape})"

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into every reachable leaf's `grad`."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.data)
        order = _topological(self)
        self._grad = grad if self._grad is None else self._grad + grad
        for node in reversed(order):
            if node._backward is None or node._grad is None:
                continue
            pgrads = node._backward(node._grad)
            for parent, g in zip(node.parents, pgrads):
                if g is None or not parent.requires_grad:
                    continue
                parent._grad = g if parent._grad is None else parent._grad + g
            if node.op != "leaf":
                # intermediate gradients are not needed once propagated
                node._grad = None

    # operator sugar
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

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)


def _topological(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=DTYPE))


def parameter(data, name=None) -> Tensor:
    return Tensor(np.array(data, dtype=DTYPE), requires_grad=True, name=name)


def _node(data, parents, op, backward) -> Tensor:
    if grad_enabled() and any(p.requires_grad for p in parents):
        out = Tensor(data, parents, op, requires_grad=True)
        out._backward = backward
        return out
    return Tensor(data, op=op)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(name, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(name, a.shape, b.shape) from None


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(a.data + b.data, (a, b), "add", backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _node(a.data - b.data, (a, b), "sub", backward)


def mul(a, b) -> Tensor:
    """Elementwise product with numpy broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("elementwise-mul", a, b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _node(a.data * b.data, (a, b), "elementwise-mul", backward)


def scale(a: Tensor, c: float) -> Tensor:
    a = as_tensor(a)
    return _node(a.data * c, (a,), "scale", lambda g: (g * c,))


def sigmoid(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return _node(out, (a,), "sigmoid", lambda g: (g * out * (1.0 - out),))


def tanh(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _node(out, (a,), "tanh", lambda g: (g * (1.0 - out * out),))


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    pos = a.data > 0
    return _node(a.data * pos, (a,), "relu", lambda g: (g * pos,))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign to avoid overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------- reductions

def sum(a: Tensor, axis=None, keepdims=False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _node(out, (a,), "sum", backward)


def mean(a: Tensor, axis: int) -> Tensor:
    a = as_tensor(a)
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ShapeError("mean-over-axis", a.shape)
    size = a.shape[axis]
    out = a.data.mean(axis=axis)

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g, axis) / size, a.shape).copy(),)

    return _node(out, (a,), "mean-over-axis", backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    out = _softmax(a.data, axis)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _node(out, (a,), "softmax", backward)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    out = _log_softmax(a.data, axis)
    prob = np.exp(out)

    def backward(g):
        return (g - prob * g.sum(axis=axis, keepdims=True),)

    return _node(out, (a,), "log-softmax", backward)


def _softmax(x, axis=-1):
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(x - m)
    return e / e.sum(axis=axis, keepdims=True)


def _log_softmax(x, axis=-1):
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    z = x - m
    with np.errstate(divide="ignore", invalid="ignore"):  # fully masked rows; callers weight them out
        return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def nll(logits: Tensor, targets: np.ndarray, weights: np.ndarray | None = None) -> Tensor:
    """Summed cross-entropy of `targets` under softmax(`logits`) along the last axis.

    `weights` (same shape as `targets`) zeroes out padded rows.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.shape[:-1] != targets.shape:
        raise ShapeError("nll", logits.shape, targets.shape)
    logp = _log_softmax(logits.data)
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    w = np.ones(targets.shape) if weights is None else np.asarray(weights, dtype=DTYPE)
    # masked entries may be -inf; weight 0 must not turn them into nan
    loss = -np.sum(np.where(w != 0, picked * w, 0.0))

    def backward(g):
        grad = np.exp(logp)
        np.put_along_axis(grad, targets[..., None],
                          np.take_along_axis(grad, targets[..., None], axis=-1) - 1.0, axis=-1)
        return (grad * (w * g)[..., None],)

    return _node(np.asarray(loss), (logits,), "nll", backward)


# ---------------------------------------------------------------- shaping

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 1 or b.data.ndim < 1 or a.shape[-1] != (b.shape[-2] if b.data.ndim > 1 else b.shape[0]):
        raise ShapeError("matmul", a.shape, b.shape)
    out = a.data @ b.data

    def backward(g):
        ad, bd = a.data, b.data
        if bd.ndim == 1:
            ga = np.multiply.outer(g, bd) if a.requires_grad else None
            gb = None
            if b.requires_grad:
                gb = np.tensordot(g, ad, axes=(tuple(range(g.ndim)), tuple(range(ad.ndim - 1))))
            return ga, gb
        ga = g @ np.swapaxes(bd, -1, -2) if a.requires_grad else None
        gb = None
        if b.requires_grad:
            if ad.ndim == 1:
                gb = np.multiply.outer(ad, g)
            else:
                gb = np.swapaxes(ad, -1, -2) @ g
            gb = _unbroadcast(gb, bd.shape)
        if ga is not None:
            ga = _unbroadcast(ga, ad.shape)
        return ga, gb

    return _node(out, (a, b), "matmul", backward)


def einsum(spec: str, *operands) -> Tensor:
    """General einsum; each input index must also appear in another operand or the output."""
    ops = [as_tensor(o) for o in operands]
    ins, out_sub = spec.replace(" ", "").split("->")
    in_subs = ins.split(",")
    if len(in_subs) != len(ops):
        raise ShapeError("einsum", *[o.shape for o in ops])
    try:
        out = np.einsum(spec, *[o.data for o in ops], optimize=True)
    except ValueError:
        raise ShapeError("einsum", *[o.shape for o in ops]) from None

    def backward(g):
        grads = []
        for i, op in enumerate(ops):
            if not op.requires_grad:
                grads.append(None)
                continue
            others = [s for j, s in enumerate(in_subs) if j != i]
            sub = f"{','.join([out_sub] + others)}->{in_subs[i]}"
            grads.append(np.einsum(sub, g, *[o.data for j, o in enumerate(ops) if j != i], optimize=True))
        return tuple(grads)

    return _node(out, tuple(ops), "einsum", backward)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    shapes = [t.shape for t in tensors]
    nd = len(shapes[0])
    ax = axis % nd if nd else 0
    for s in shapes:
        if len(s) != nd or s[:ax] + s[ax + 1:] != shapes[0][:ax] + shapes[0][ax + 1:]:
            raise ShapeError("concat", *shapes)
    out = np.concatenate([t.data for t in tensors], axis=ax)
    bounds = np.cumsum([0] + [s[ax] for s in shapes])

    def backward(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax) for i in range(len(tensors)))

    return _node(out, tuple(tensors), "concat", backward)


def reshape(a: Tensor, shape) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", a.shape, shape) from None
    return _node(out, (a,), "reshape", lambda g: (g.reshape(a.shape),))


def broadcast_to(a: Tensor, shape) -> Tensor:
    a = as_tensor(a)
    try:
        out = np.broadcast_to(a.data, shape)
    except ValueError:
        raise ShapeError("broadcast", a.shape, shape) from None
    return _node(out, (a,), "broadcast", lambda g: (_unbroadcast(g, a.shape),))


def getitem(a: Tensor, idx) -> Tensor:
    """Basic or integer-array indexing; gradients scatter-add back."""
    a = as_tensor(a)
    out = a.data[idx]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _node(np.array(out, copy=True), (a,), "getitem", backward)


def embedding(weight: Tensor, ids) -> Tensor:
    """Row lookup `weight[ids]` for an integer array of any shape."""
    weight = as_tensor(weight)
    ids = np.asarray(ids, dtype=np.int64)
    if weight.data.ndim != 2 or (ids.size and (ids.min() < 0 or ids.max() >= weight.shape[0])):
        raise ShapeError("embedding-lookup", weight.shape, ids.shape)
    out = weight.data[ids]

    def backward(g):
        full = np.zeros_like(weight.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, weight.shape[1]))
        return (full,)

    return _node(out, (weight,), "embedding-lookup", backward)


# ---------------------------------------------------------------- convolution

def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Valid 1-d convolution.

    x: (N, L, Cin); weight: (w, Cin, Cout); bias: (Cout,) -> (N, L - w + 1, Cout)
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.data.ndim != 3 or weight.data.ndim != 3 or x.shape[2] != weight.shape[1] or x.shape[1] < weight.shape[0]:
        raise ShapeError("conv-1d", x.shape, weight.shape)
    n, length, cin = x.shape
    w, _, cout = weight.shape
    cols = np.lib.stride_tricks.sliding_window_view(x.data, w, axis=1)  # (N, L-w+1, Cin, w)
    cols = np.swapaxes(cols, 2, 3).reshape(n, length - w + 1, w * cin)
    wmat = weight.data.reshape(w * cin, cout)
    out = cols @ wmat
    parents = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (cout,):
            raise ShapeError("conv-1d", weight.shape, bias.shape)
        out = out + bias.data
        parents = (x, weight, bias)

    def backward(g):
        gw = np.tensordot(cols, g, axes=([0, 1], [0, 1])).reshape(w, cin, cout) if weight.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = (g @ wmat.T).reshape(n, length - w + 1, w, cin)
            gx = np.zeros_like(x.data)
            for k in range(w):
                gx[:, k:k + length - w + 1] += gcols[:, :, k]
        grads = (gx, gw)
        if bias is not None:
            grads += (g.sum(axis=(0, 1)),)
        return grads

    return _node(out, parents, "conv-1d", backward)


def max_pool1d(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Max over axis 1 of (N, L, C); positions where `mask` (N, L) is False are excluded."""
    x = as_tensor(x)
    if x.data.ndim != 3 or (mask is not None and mask.shape != x.shape[:2]):
        raise ShapeError("max-pool-1d", x.shape, () if mask is None else mask.shape)
    data = x.data if mask is None else np.where(mask[:, :, None], x.data, -np.inf)
    arg = data.argmax(axis=1)  # (N, C)
    out = np.take_along_axis(data, arg[:, None, :], axis=1)[:, 0, :]

    def backward(g):
        full = np.zeros_like(x.data)
        np.put_along_axis(full, arg[:, None, :], g[:, None, :], axis=1)
        return (full,)

    return _node(out, (x,), "max-pool-1d", backward)


# ---------------------------------------------------------------- recurrence

def lstm_layer(xproj: Tensor, U: Tensor, mask: np.ndarray, reverse: bool = False,
               rec_mask: np.ndarray | None = None) -> Tensor:
    """One LSTM direction over a padded batch, with hand-written BPTT.

    xproj: (B, T, 4H) input projections x_t W + b, gate order (i, f, g, o).
    U: (H, 4H) recurrent weights.  mask: (B, T) 1 for real tokens.
    rec_mask: (B, H) variational dropout mask applied to h_{t-1} at every step.
    Padded positions neither update the state nor emit output, so a sentence's
    result does not depend on what it is batched with.
    """
    xproj, U = as_tensor(xproj), as_tensor(U)
    B, T, G = xproj.shape
    H = U.shape[0]
    if G != 4 * H or U.shape != (H, 4 * H) or mask.shape != (B, T):
        raise ShapeError("lstm", xproj.shape, U.shape, mask.shape)
    m = mask.astype(DTYPE)
    rm = np.ones((B, H)) if rec_mask is None else rec_mask
    steps = range(T - 1, -1, -1) if reverse else range(T)
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    Ud = U.data
    xd = xproj.data
    out = np.zeros((B, T, H))
    cache = []
    for t in steps:
        hd = h * rm
        z = xd[:, t] + hd @ Ud
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        gg = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c_new = f * c + i * gg
        tc = np.tanh(c_new)
        h_new = o * tc
        mt = m[:, t:t + 1]
        cache.append((t, hd, c, i, f, gg, o, tc, mt))
        c = mt * c_new + (1 - mt) * c
        h = mt * h_new + (1 - mt) * h
        out[:, t] = h_new * mt

    def backward(gout):
        dx = np.zeros_like(xd)
        dU = np.zeros_like(Ud)
        dh = np.zeros((B, H))
        dc = np.zeros((B, H))
        for t, hd, c_prev, i, f, gg, o, tc, mt in reversed(cache):
            dh_new = (gout[:, t] + dh) * mt
            dc_new = dc * mt
            dh_keep = dh * (1 - mt)
            dc_keep = dc * (1 - mt)
            do = dh_new * tc
            dc_new = dc_new + dh_new * o * (1 - tc * tc)
            di = dc_new * gg
            df = dc_new * c_prev
            dgg = dc_new * i
            dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), dgg * (1 - gg * gg), do * o * (1 - o)], axis=1)
            dx[:, t] = dz
            dU += hd.T @ dz
            dh = (dz @ Ud.T) * rm + dh_keep
            dc = dc_new * f + dc_keep
        return dx, dU

    return _node(out, (xproj, U), "lstm", backward)
