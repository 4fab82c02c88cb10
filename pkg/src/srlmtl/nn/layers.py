"""Parameterized building blocks on top of the autodiff primitives."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .dropout import Dropout
from .optim import ParameterStore


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


def orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


class Linear:
    def __init__(self, store: ParameterStore, name: str, din: int, dout: int, rng, bias: bool = True):
        self.W = store.add(f"{name}.W", glorot(rng, din, dout))
        self.b = store.add(f"{name}.b", np.zeros(dout)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = ad.matmul(x, self.W)
        return y if self.b is None else ad.add(y, self.b)


class MLP:
    """ReLU hidden layers followed by a linear output layer."""

    def __init__(self, store, name, dims: list[int], rng, dropout: Dropout | None = None):
        self.layers = [Linear(store, f"{name}.{i}", a, b, rng) for i, (a, b) in enumerate(zip(dims[:-1], dims[1:]))]
        self.dropout = dropout

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = ad.relu(x)
                if self.dropout is not None:
                    x = self.dropout.apply(x, self.dropout.plan.hidden)
        return x


def lstm_cell_step(x: Tensor, h_prev: Tensor, c_prev: Tensor, W: Tensor, U: Tensor, b: Tensor):
    """One LSTM step from primitives; gate order (i, f, g, o).

    Returns (h, c).  The fused `autodiff.lstm_layer` computes the same recurrence.
    """
    H = U.shape[0]
    if W.shape != (x.shape[-1], 4 * H) or h_prev.shape[-1] != H or c_prev.shape[-1] != H or b.shape != (4 * H,):
        raise ShapeError("lstm-cell", x.shape, h_prev.shape, c_prev.shape, W.shape, U.shape, b.shape)
    z = ad.add(ad.add(ad.matmul(x, W), ad.matmul(h_prev, U)), b)
    i = ad.sigmoid(z[..., :H])
    f = ad.sigmoid(z[..., H:2 * H])
    g = ad.tanh(z[..., 2 * H:3 * H])
    o = ad.sigmoid(z[..., 3 * H:])
    c = ad.add(ad.mul(f, c_prev), ad.mul(i, g))
    h = ad.mul(o, ad.tanh(c))
    return h, c


def highway_combine(x: Tensor, layer_out: Tensor, gate_W: Tensor, gate_b: Tensor) -> Tensor:
    """t = sigmoid(x Wg + bg); t * layer_out + (1 - t) * x."""
    if x.shape != layer_out.shape:
        raise ShapeError("highway", x.shape, layer_out.shape)
    t = ad.sigmoid(ad.add(ad.matmul(x, gate_W), gate_b))
    return ad.add(ad.mul(t, layer_out), ad.mul(ad.sub(1.0, t), x))


class LSTMDirection:
    def __init__(self, store, name, din, hidden, rng):
        self.hidden = hidden
        self.W = store.add(f"{name}.W", glorot(rng, din, 4 * hidden))
        self.U = store.add(f"{name}.U", np.concatenate([orthogonal(rng, hidden) for _ in range(4)], axis=1))
        self.b = store.add(f"{name}.b", np.zeros(4 * hidden))

    def __call__(self, x: Tensor, mask: np.ndarray, reverse: bool, rec_mask=None) -> Tensor:
        xproj = ad.add(ad.matmul(x, self.W), self.b)
        return ad.lstm_layer(xproj, self.U, mask, reverse=reverse, rec_mask=rec_mask)


class HighwayBiLSTMLayer:
    """BiLSTM whose concatenated output is highway-mixed with its (projected) input."""

    def __init__(self, store, name, din, hidden, rng):
        self.fwd = LSTMDirection(store, f"{name}.fwd", din, hidden, rng)
        self.bwd = LSTMDirection(store, f"{name}.bwd", din, hidden, rng)
        dout = 2 * hidden
        self.proj = store.add(f"{name}.proj", glorot(rng, din, dout)) if din != dout else None
        self.gate_W = store.add(f"{name}.gate.W", glorot(rng, dout, dout))
        self.gate_b = store.add(f"{name}.gate.b", np.zeros(dout))

    def bilstm(self, x, mask, dropout: Dropout | None = None) -> Tensor:
        B = x.shape[0]
        masks = (None, None)
        if dropout is not None:
            masks = (dropout.recurrent_mask(B, self.fwd.hidden), dropout.recurrent_mask(B, self.bwd.hidden))
        hf = self.fwd(x, mask, reverse=False, rec_mask=masks[0])
        hb = self.bwd(x, mask, reverse=True, rec_mask=masks[1])
        return ad.concat([hf, hb], axis=-1)

    def __call__(self, x, mask, dropout: Dropout | None = None) -> Tensor:
        out = self.bilstm(x, mask, dropout)
        carry = x if self.proj is None else ad.matmul(x, self.proj)
        y = highway_combine(carry, out, self.gate_W, self.gate_b)
        return ad.mul(y, mask[:, :, None].astype(float))


class HighwayBiLSTM:
    def __init__(self, store, name, din, hidden, layers, rng):
        if layers < 1:
            raise ValueError("need at least one BiLSTM layer")
        self.layers = [HighwayBiLSTMLayer(store, f"{name}.{j}", din if j == 0 else 2 * hidden, hidden, rng)
                       for j in range(layers)]

    def __call__(self, x, mask, dropout: Dropout | None = None) -> list[Tensor]:
        """Return every layer's output sequence, bottom to top."""
        outs = []
        for layer in self.layers:
            x = layer(x, mask, dropout)
            if dropout is not None:
                x = dropout.apply(x, dropout.plan.hidden, shared_axis=1)
            outs.append(x)
        return outs


class CharCNN:
    """Convolutions of several widths over character embeddings, max-pooled and concatenated."""

    def __init__(self, store, name, n_chars, char_dim, windows, channels, rng):
        self.windows = tuple(windows)
        self.emb = store.add(f"{name}.emb", rng.normal(0, 0.1, size=(n_chars, char_dim)))
        self.filters = []
        for w in self.windows:
            W = store.add(f"{name}.conv{w}.W", glorot(rng, w * char_dim, channels, (w, char_dim, channels)))
            b = store.add(f"{name}.conv{w}.b", np.zeros(channels))
            self.filters.append((w, W, b))
        self.out_dim = channels * len(self.windows)

    def __call__(self, char_ids: np.ndarray, lengths: np.ndarray) -> Tensor:
        """char_ids: (N, L) with 0 padding; lengths: (N,) characters per token (>= 1)."""
        if np.any(lengths < 1):
            raise ValueError("char_cnn: empty token")
        N, L = char_ids.shape
        width = max(L, max(self.windows))
        ids = np.zeros((N, width), dtype=np.int64)
        ids[:, :L] = char_ids
        present = (ids != 0)[:, :, None].astype(float)
        x = ad.mul(ad.embedding(self.emb, ids), present)
        padded = np.maximum(lengths, max(self.windows))
        outs = []
        for w, W, b in self.filters:
            conv = ad.conv1d(x, W, b)
            starts = np.arange(width - w + 1)
            valid = starts[None, :] <= (padded - w)[:, None]
            outs.append(ad.max_pool1d(conv, valid))
        return ad.concat(outs, axis=-1)
