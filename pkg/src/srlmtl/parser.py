"""Biaffine dependency parser over the shared-style highway BiLSTM encoder (no PoS input)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data.types import AnnotatedSentence, DepTree
from .data.vocab import Vocabulary
from .encoder import EncodedBatch, Encoder, EncoderConfig
from .mst import decode_heads
from .nn import autodiff as ad
from .nn.autodiff import Tensor
from .nn.dropout import Dropout
from .nn.layers import MLP, glorot
from .nn.optim import ParameterStore


@dataclass
class ParserConfig:
    arc_dim: int = 500
    label_dim: int = 100


@dataclass
class ArcScores:
    arc: np.ndarray  # (n+1, n): head 0..n x modifier 1..n, self-heads at -inf
    labels: np.ndarray  # (n+1, n, L)


def self_head_mask(T: int) -> np.ndarray:
    """(T+1, T) additive mask, -inf where head index == modifier index."""
    m = np.zeros((T + 1, T))
    m[np.arange(1, T + 1), np.arange(T)] = -np.inf
    return m


class BiaffineParser:
    def __init__(self, store: ParameterStore, vocab: Vocabulary, enc_cfg: EncoderConfig, cfg: ParserConfig,
                 rng: np.random.Generator, dropout: Dropout | None = None, encoder: Encoder | None = None,
                 prefix: str = "parser", pretrained=None):
        self.cfg = cfg
        self.vocab = vocab
        self.dropout = dropout
        names_before = set(store.names())
        self.encoder = encoder or Encoder(store, f"{prefix}.encoder", vocab, enc_cfg, rng, dropout,
                                          pretrained=pretrained)
        D = self.encoder.cfg.output_dim
        L = max(len(vocab.deprels), 1)
        self.n_labels = len(vocab.deprels)
        self.root = store.add(f"{prefix}.root", rng.normal(0, 0.1, size=D))
        self.arc_head = MLP(store, f"{prefix}.arc_head", [D, cfg.arc_dim], rng)
        self.arc_dep = MLP(store, f"{prefix}.arc_dep", [D, cfg.arc_dim], rng)
        self.lab_head = MLP(store, f"{prefix}.lab_head", [D, cfg.label_dim], rng)
        self.lab_dep = MLP(store, f"{prefix}.lab_dep", [D, cfg.label_dim], rng)
        self.U_arc = store.add(f"{prefix}.U_arc", np.zeros((cfg.arc_dim, cfg.arc_dim)))
        self.b_arc = store.add(f"{prefix}.b_arc", np.zeros(cfg.arc_dim))
        self.U_lab = store.add(f"{prefix}.U_lab", np.zeros((L, cfg.label_dim, cfg.label_dim)))
        self.W_lab_h = store.add(f"{prefix}.W_lab_h", glorot(rng, cfg.label_dim, L))
        self.W_lab_d = store.add(f"{prefix}.W_lab_d", glorot(rng, cfg.label_dim, L))
        self.b_lab = store.add(f"{prefix}.b_lab", np.zeros(L))
        self.head_names = [n for n in store.names() if n not in names_before and n not in self.encoder.param_names]
        self.param_names = list(dict.fromkeys(self.encoder.param_names + self.head_names))

    def _act(self, x):
        x = ad.relu(x)
        if self.dropout is not None:
            x = self.dropout.apply(x, self.dropout.plan.hidden)
        return x

    def projections(self, top: Tensor):
        """Head-side (with root sentinel at index 0) and modifier-side MLP outputs."""
        B, T, D = top.shape
        root = ad.broadcast_to(ad.reshape(self.root, (1, 1, D)), (B, 1, D))
        heads_in = ad.concat([root, top], axis=1)
        return (self._act(self.arc_head(heads_in)), self._act(self.arc_dep(top)),
                self._act(self.lab_head(heads_in)), self._act(self.lab_dep(top)))

    def arc_scores(self, arc_h: Tensor, arc_d: Tensor) -> Tensor:
        """S[b, h, m] = arc_h[h]^T U arc_d[m] + b^T arc_h[h]."""
        bil = ad.einsum("bhi,ij,bmj->bhm", arc_h, self.U_arc, arc_d)
        lin = ad.einsum("bhi,i->bh", arc_h, self.b_arc)
        return ad.add(bil, ad.reshape(lin, (lin.shape[0], lin.shape[1], 1)))

    def label_scores(self, lab_h: Tensor, lab_d: Tensor) -> Tensor:
        """S[b, m, l] for the head rows already aligned to modifiers: lab_h (B, T, d), lab_d (B, T, d)."""
        bil = ad.einsum("bmi,lij,bmj->bml", lab_h, self.U_lab, lab_d)
        lin = ad.add(ad.matmul(lab_h, self.W_lab_h), ad.matmul(lab_d, self.W_lab_d))
        return ad.add(ad.add(bil, lin), self.b_lab)

    def full_label_scores(self, lab_h: Tensor, lab_d: Tensor) -> Tensor:
        """S[b, h, m, l] over every head candidate."""
        bil = ad.einsum("bhi,lij,bmj->bhml", lab_h, self.U_lab, lab_d)
        lh = ad.matmul(lab_h, self.W_lab_h)
        ld = ad.matmul(lab_d, self.W_lab_d)
        B, H1, L = lh.shape
        T = ld.shape[1]
        lin = ad.add(ad.reshape(lh, (B, H1, 1, L)), ad.reshape(ld, (B, 1, T, L)))
        return ad.add(ad.add(bil, lin), self.b_lab)

    def masks(self, mask: np.ndarray) -> np.ndarray:
        """(B, T+1, T) additive mask: self-heads and padded heads -> -inf."""
        B, T = mask.shape
        head_ok = np.concatenate([np.ones((B, 1), dtype=bool), mask], axis=1)
        m = np.where(head_ok[:, :, None], 0.0, -np.inf) + self_head_mask(T)[None]
        return m

    def biaffine_score(self, sentence: AnnotatedSentence) -> ArcScores:
        with ad.no_grad():
            enc = self.encoder([sentence])
            arc_h, arc_d, lab_h, lab_d = self.projections(enc.top)
            arc = ad.add(self.arc_scores(arc_h, arc_d), self.masks(enc.mask)).data[0]
            labels = self.full_label_scores(lab_h, lab_d).data[0]
        return ArcScores(arc, labels)

    def batch_loss(self, enc: EncodedBatch, batch) -> Tensor:
        """Head cross-entropy over all candidates plus label cross-entropy at the gold head."""
        B, T = enc.mask.shape
        gold_heads = np.zeros((B, T), dtype=np.int64)
        gold_labels = np.zeros((B, T), dtype=np.int64)
        for b, s in enumerate(batch):
            if s.gold_dep is None:
                raise ValueError(f"parser_loss: sentence {b} has no gold tree")
            gold_heads[b, :s.n] = s.gold_dep.heads
            gold_labels[b, :s.n] = [self.vocab.deprels.get(l, 0) for l in s.gold_dep.labels]
        arc_h, arc_d, lab_h, lab_d = self.projections(enc.top)
        arc = ad.add(self.arc_scores(arc_h, arc_d), self.masks(enc.mask))
        w = enc.mask.astype(float)
        # (B, T, T+1): per modifier, a distribution over heads
        arc_t = ad.einsum("bhm->bmh", arc)
        loss = ad.nll(arc_t, gold_heads, w)
        lab_at_gold = lab_h[np.arange(B)[:, None], gold_heads]
        lab = self.label_scores(lab_at_gold, lab_d)
        if self.n_labels:
            loss = ad.add(loss, ad.nll(lab, gold_labels, w))
        return loss

    def loss(self, batch) -> Tensor:
        return self.batch_loss(self.encoder(batch), batch)

    def parse(self, batch) -> list[DepTree]:
        names = self.vocab.deprel_names()
        trees = []
        with ad.no_grad():
            enc = self.encoder(batch)
            arc_h, arc_d, lab_h, lab_d = self.projections(enc.top)
            arc = ad.add(self.arc_scores(arc_h, arc_d), self.masks(enc.mask)).data
            for b, s in enumerate(batch):
                n = s.n
                heads = decode_heads(arc[b, :n + 1, :n])
                lab = self.label_scores(ad.Tensor(lab_h.data[b:b + 1, heads]), ad.Tensor(lab_d.data[b:b + 1, :n])).data[0]
                labels = tuple(names[i] if names else "_" for i in lab.argmax(axis=-1))
                trees.append(DepTree(tuple(int(h) for h in heads), labels))
        return trees


def parser_loss(arc: np.ndarray | Tensor, labels, gold: DepTree, label_ids: dict[str, int]) -> Tensor:
    """Loss of one sentence from precomputed scores: arc (n+1, n), labels (n+1, n, L)."""
    arc, labels = ad.as_tensor(arc), ad.as_tensor(labels)
    n = arc.shape[1]
    heads = np.asarray(gold.heads)
    loss = ad.nll(ad.einsum("hm->mh", arc), heads)
    lab = labels[heads, np.arange(n)]
    return ad.add(loss, ad.nll(lab, np.array([label_ids[l] for l in gold.labels])))


def uas_las(pred: list[DepTree], gold: list[DepTree]) -> tuple[float, float]:
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predicted trees for {len(gold)} gold trees")
    total = head_ok = both_ok = 0
    for k, (p, g) in enumerate(zip(pred, gold)):
        if len(p) != len(g):
            raise ValueError(f"sentence {k}: {len(p)} predicted heads for {len(g)} tokens")
        for ph, pl, gh, gl in zip(p.heads, p.labels, g.heads, g.labels):
            total += 1
            if ph == gh:
                head_ok += 1
                both_ok += pl == gl
    if total == 0:
        return 100.0, 100.0
    return 100.0 * head_ok / total, 100.0 * both_ok / total
