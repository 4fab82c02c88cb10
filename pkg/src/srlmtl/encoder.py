"""Input layer (char CNN + word embedding + optional extras) and the highway BiLSTM stack."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import autodiff as ad
from .nn.autodiff import ShapeError, Tensor
from .nn.dropout import Dropout
from .nn.layers import CharCNN, HighwayBiLSTM
from .nn.optim import ParameterStore
from .data.vocab import PAD, Vocabulary


class ConfigError(ValueError):
    pass


@dataclass
class EncoderConfig:
    word_dim: int = 100
    char_dim: int = 100
    char_windows: tuple = (3, 4, 5)
    char_channels: int = 100
    layers: int = 3
    hidden: int = 300
    ext_enabled: bool = False
    ext_k: int = 4
    ext_dim: int = 0
    freeze_words: bool = False

    def __post_init__(self):
        self.char_windows = tuple(self.char_windows)
        dims = [self.word_dim, self.char_dim, self.char_channels, self.layers, self.hidden]
        if min(dims) < 1 or not self.char_windows or min(self.char_windows) < 1:
            raise ConfigError("encoder dimensions, layer count and window sizes must be positive")
        if self.ext_enabled and (self.ext_k < 1 or self.ext_dim < 1):
            raise ConfigError("external representations need ext_k >= 1 and ext_dim >= 1")

    @property
    def output_dim(self) -> int:
        return 2 * self.hidden

    def input_dim(self, extra: int = 0) -> int:
        d = self.char_channels * len(self.char_windows) + self.word_dim + extra
        return d + (self.ext_dim if self.ext_enabled else 0)


@dataclass
class EncodedBatch:
    layers: list  # N tensors of shape (B, T, D), bottom to top
    mask: np.ndarray  # (B, T) bool
    lengths: np.ndarray

    @property
    def top(self) -> Tensor:
        return self.layers[-1]


def fuse_layers(stack: Tensor, logits: Tensor) -> Tensor:
    """sum_k softmax(logits)_k * stack[..., k, :] for stack (..., K, d)."""
    stack, logits = ad.as_tensor(stack), ad.as_tensor(logits)
    if stack.data.ndim < 2 or stack.shape[-2] != logits.shape[0]:
        raise ShapeError("layer-fusion", stack.shape, logits.shape)
    w = ad.softmax(logits, axis=0)
    return ad.einsum("...kd,k->...d", stack, w)


def batch_arrays(batch, vocab: Vocabulary):
    B = len(batch)
    T = max(s.n for s in batch)
    words = np.full((B, T), vocab.words[PAD], dtype=np.int64)
    mask = np.zeros((B, T), dtype=bool)
    Lc = max(len(t) for s in batch for t in s.tokens)
    chars = np.zeros((B * T, Lc), dtype=np.int64)
    clen = np.ones(B * T, dtype=np.int64)
    for b, s in enumerate(batch):
        mask[b, :s.n] = True
        for i, tok in enumerate(s.tokens):
            words[b, i] = vocab.word_id(tok)
            if not tok:
                raise ValueError(f"char_cnn: empty token at position {i + 1}")
            chars[b * T + i, :len(tok)] = [vocab.char_id(c) for c in tok]
            clen[b * T + i] = len(tok)
    return words, chars, clen, mask


class Encoder:
    def __init__(self, store: ParameterStore, prefix: str, vocab: Vocabulary, cfg: EncoderConfig,
                 rng: np.random.Generator, dropout: Dropout | None = None, extra_dim: int = 0,
                 pretrained: np.ndarray | None = None):
        self.cfg = cfg
        self.vocab = vocab
        self.dropout = dropout
        self.extra_dim = extra_dim
        self.prefix = prefix
        names_before = set(store.names())
        if pretrained is not None:
            if pretrained.shape != (len(vocab.words), cfg.word_dim):
                raise ConfigError(f"pretrained embeddings {pretrained.shape} != {(len(vocab.words), cfg.word_dim)}")
            table = pretrained.copy()
        else:
            table = rng.normal(0, 0.1, size=(len(vocab.words), cfg.word_dim))
            table[vocab.words[PAD]] = 0.0
        if cfg.freeze_words:
            self.word_emb = store.add_frozen(f"{prefix}.word_emb", table)
        else:
            self.word_emb = store.add(f"{prefix}.word_emb", table)
        self.char_cnn = CharCNN(store, f"{prefix}.char", len(vocab.chars), cfg.char_dim, cfg.char_windows,
                                cfg.char_channels, rng)
        self.ext_logits = store.add(f"{prefix}.ext_logits", np.zeros(cfg.ext_k)) if cfg.ext_enabled else None
        self.bilstm = HighwayBiLSTM(store, f"{prefix}.lstm", cfg.input_dim(extra_dim), cfg.hidden, cfg.layers, rng)
        self.param_names = [n for n in store.names() if n not in names_before]

    def char_reps(self, chars: np.ndarray, clen: np.ndarray) -> Tensor:
        return self.char_cnn(chars, clen)

    def build_inputs(self, batch, extra: Tensor | None = None):
        """x_i = rep_char ⊕ emb_word [⊕ rep_ext] [⊕ extra] for every position of the padded batch."""
        if (extra is None) != (self.extra_dim == 0):
            raise ConfigError(f"encoder expects {self.extra_dim}-dim extra input, got "
                              f"{'none' if extra is None else extra.shape}")
        words, chars, clen, mask = batch_arrays(batch, self.vocab)
        B, T = words.shape
        parts = []
        rep_char = ad.reshape(self.char_reps(chars, clen), (B, T, -1))
        word = ad.embedding(self.word_emb, words)
        if self.dropout is not None:
            rep_char = self.dropout.apply(rep_char, self.dropout.plan.embedding)
            word = self.dropout.apply(word, self.dropout.plan.embedding)
        parts += [rep_char, word]
        if self.cfg.ext_enabled:
            parts.append(fuse_layers(self._ext_stack(batch, T), self.ext_logits))
        if extra is not None:
            if extra.shape[:2] != (B, T) or extra.shape[2] != self.extra_dim:
                raise ShapeError("build-input", extra.shape, (B, T, self.extra_dim))
            parts.append(extra)
        x = ad.concat(parts, axis=-1)
        return ad.mul(x, mask[:, :, None].astype(float)), mask

    def _ext_stack(self, batch, T) -> np.ndarray:
        K, d = self.cfg.ext_k, self.cfg.ext_dim
        stack = np.zeros((len(batch), T, K, d))
        for b, s in enumerate(batch):
            if s.ext_layers is None:
                raise ConfigError(f"external representations enabled but sentence {b} has none")
            if s.ext_layers.shape != (s.n, K, d):
                raise ConfigError(f"sentence {b}: external layers {s.ext_layers.shape} != {(s.n, K, d)}")
            stack[b, :s.n] = s.ext_layers
        return stack

    def build_input(self, i: int, sentence, extra: Tensor | None = None) -> Tensor:
        """Input vector of token i (1-based) of a single sentence."""
        x, _ = self.build_inputs([sentence], extra)
        return x[0, i - 1]

    def __call__(self, batch, extra: Tensor | None = None) -> EncodedBatch:
        if not batch or any(s.n == 0 for s in batch):
            raise ValueError("encode: empty sentence")
        x, mask = self.build_inputs(batch, extra)
        layers = self.bilstm(x, mask, self.dropout)
        return EncodedBatch(layers, mask, mask.sum(axis=1))
