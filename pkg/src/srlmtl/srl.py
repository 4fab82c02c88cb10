"""Span-based SRL: candidate enumeration and pruning, tuple scoring, loss and decoding.

Word-based SRL is the same model with the maximum argument width forced to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data.types import AnnotatedSentence, Argument, PredicateFrame
from .data.vocab import Vocabulary
from .encoder import ConfigError, EncodedBatch, Encoder, EncoderConfig
from .nn import autodiff as ad
from .nn.autodiff import Tensor
from .nn.dropout import Dropout
from .nn.layers import MLP, glorot
from .nn.optim import ParameterStore

END_TO_END = "end-to-end"
GOLD_PREDICATES = "gold-predicates"


@dataclass
class SRLConfig:
    mlp_hidden: int = 150
    lambda_p: float = 0.4
    lambda_a: float = 0.8
    max_width: int = 30
    word_mode: bool = False
    force_gold: bool = False

    def __post_init__(self):
        if not (0 < self.lambda_p <= 1 and 0 < self.lambda_a <= 1):
            raise ConfigError("pruning ratios must lie in (0, 1]")
        if self.max_width < 1 or self.mlp_hidden < 1:
            raise ConfigError("max_width and mlp_hidden must be >= 1")
        if self.word_mode:
            self.max_width = 1


def keep_count(n: int, ratio: float, available: int) -> int:
    """min(available, ceil(ratio * n)), robust to float noise such as 0.4 * 15."""
    return min(available, math.ceil(round(ratio * n, 9)))


def enumerate_spans(n: int, max_width: int) -> np.ndarray:
    """All (start, end), 1-based inclusive, with width <= max_width, ordered by start then end."""
    return np.array([(j, k) for j in range(1, n + 1) for k in range(j, min(n, j + max_width - 1) + 1)],
                    dtype=np.int64).reshape(-1, 2)


def span_means(h: Tensor, spans: np.ndarray) -> Tensor:
    """Mean of h rows over each span, as one product with an averaging matrix."""
    n = h.shape[0]
    if spans.size and (spans.min() < 1 or spans.max() > n or np.any(spans[:, 0] > spans[:, 1])):
        raise IndexError(f"span out of bounds for a sentence of {n} tokens")
    avg = np.zeros((len(spans), n))
    for r, (j, k) in enumerate(spans):
        avg[r, j - 1:k] = 1.0 / (k - j + 1)
    return ad.matmul(avg, h)


def represent(h: Tensor, spans: np.ndarray):
    """Predicate representations are the rows of h; argument representations are span means."""
    return h, span_means(h, spans)


def top_candidates(scores: np.ndarray, k: int, keys: np.ndarray) -> np.ndarray:
    """Indices of the k best scores; ties go to the smaller key tuple (start, then end)."""
    order = np.lexsort(tuple(keys[:, c] for c in range(keys.shape[1] - 1, -1, -1)) + (-scores,))
    return np.sort(order[:k])


@dataclass
class CandidateSet:
    predicates: np.ndarray  # 1-based positions, ascending
    spans: np.ndarray  # (A, 2) 1-based
    pred_rows: np.ndarray  # rows into the per-token scores
    span_rows: np.ndarray  # rows into the enumerated spans
    phi_p: np.ndarray
    phi_a: np.ndarray


@dataclass
class SentenceScores:
    candidates: CandidateSet
    logits: Tensor  # (P, A, 1 + |roles|), column 0 is the null label
    gold_total: int = 0
    gold_kept: int = 0


def prune(n: int, phi_p: np.ndarray, phi_a: np.ndarray, spans: np.ndarray, cfg: SRLConfig,
          gold_predicates=None, force=()) -> CandidateSet:
    """Keep the top ceil(λp·n) predicates (or exactly the gold ones) and top ceil(λa·n) spans."""
    if gold_predicates is not None:
        pred_rows = np.array(sorted(set(gold_predicates)), dtype=np.int64) - 1
    else:
        k = keep_count(n, cfg.lambda_p, n)
        pred_rows = top_candidates(phi_p, k, np.arange(n)[:, None])
    k = keep_count(n, cfg.lambda_a, len(spans))
    span_rows = top_candidates(phi_a, k, spans)
    if force:
        fp, fs = force
        pred_rows = np.union1d(pred_rows, np.asarray(list(fp), dtype=np.int64) - 1).astype(np.int64)
        index = {tuple(s): r for r, s in enumerate(spans)}
        extra = [index[s] for s in fs if s in index]
        span_rows = np.union1d(span_rows, np.asarray(extra, dtype=np.int64)).astype(np.int64)
    return CandidateSet(pred_rows + 1, spans[span_rows], pred_rows, span_rows, phi_p, phi_a)


class SRLModel:
    def __init__(self, store: ParameterStore, vocab: Vocabulary, enc_cfg: EncoderConfig, cfg: SRLConfig,
                 rng: np.random.Generator, dropout: Dropout | None = None, encoder: Encoder | None = None,
                 extra_dim: int = 0, prefix: str = "srl", pretrained=None):
        self.cfg = cfg
        self.vocab = vocab
        self.dropout = dropout
        names_before = set(store.names())
        self.encoder = encoder or Encoder(store, f"{prefix}.encoder", vocab, enc_cfg, rng, dropout,
                                          extra_dim=extra_dim, pretrained=pretrained)
        D = self.encoder.cfg.output_dim
        H = cfg.mlp_hidden
        self.n_roles = len(vocab.roles) - 1
        self.mlp_p = MLP(store, f"{prefix}.mlp_p", [D, H, 1], rng, dropout)
        self.mlp_a = MLP(store, f"{prefix}.mlp_a", [D, H, 1], rng, dropout)
        self.role_W = store.add(f"{prefix}.mlp_r.0.W", glorot(rng, 2 * D, H))
        self.role_b = store.add(f"{prefix}.mlp_r.0.b", np.zeros(H))
        self.role_out = MLP(store, f"{prefix}.mlp_r.out", [H, max(self.n_roles, 1)], rng)
        self.head_names = [n for n in store.names() if n not in names_before and n not in self.encoder.param_names]
        self.param_names = list(dict.fromkeys(self.encoder.param_names + self.head_names))

    # ------------------------------------------------------------ scoring

    def unary_scores(self, h: Tensor, spans: np.ndarray):
        rep_p, rep_a = represent(h, spans)
        phi_p = ad.reshape(self.mlp_p(rep_p), (-1,))
        phi_a = ad.reshape(self.mlp_a(rep_a), (-1,))
        return rep_p, rep_a, phi_p, phi_a

    def score_tuples(self, rep_p: Tensor, rep_a: Tensor, phi_p: Tensor, phi_a: Tensor) -> Tensor:
        """phi(p, a, r) = phi_p(p) + phi_a(a) + w_r·MLP_r([rep_p; rep_a]); null column fixed at 0."""
        D = rep_p.shape[1]
        hp = ad.matmul(rep_p, self.role_W[:D])
        ha = ad.matmul(rep_a, self.role_W[D:])
        hidden = ad.relu(ad.add(ad.add(ad.reshape(hp, (hp.shape[0], 1, -1)), ad.reshape(ha, (1, ha.shape[0], -1))),
                                self.role_b))
        if self.dropout is not None:
            hidden = self.dropout.apply(hidden, self.dropout.plan.hidden)
        roles = self.role_out(hidden)[..., :self.n_roles]
        P, A = rep_p.shape[0], rep_a.shape[0]
        unary = ad.add(ad.reshape(phi_p, (P, 1, 1)), ad.reshape(phi_a, (1, A, 1)))
        scored = ad.add(roles, unary)
        return ad.concat([np.zeros((P, A, 1)), scored], axis=-1)

    def sentence_scores(self, h: Tensor, sentence: AnnotatedSentence, setup: str, train: bool = False) -> SentenceScores:
        n = sentence.n
        spans = enumerate_spans(n, self.cfg.max_width)
        rep_p, rep_a, phi_p, phi_a = self.unary_scores(h, spans)
        gold_preds = None
        if setup == GOLD_PREDICATES:
            gold_preds = [f.predicate for f in sentence.frames or []]
        force = ()
        if train and self.cfg.force_gold and sentence.frames:
            force = ({f.predicate for f in sentence.frames},
                     {(a.start, a.end) for f in sentence.frames for a in f.arguments})
        cand = prune(n, phi_p.data, phi_a.data, spans, self.cfg, gold_preds, force)
        if len(cand.pred_rows) == 0:
            return SentenceScores(cand, Tensor(np.zeros((0, len(cand.spans), self.n_roles + 1))))
        logits = self.score_tuples(rep_p[cand.pred_rows], rep_a[cand.span_rows],
                                   phi_p[cand.pred_rows], phi_a[cand.span_rows])
        return SentenceScores(cand, logits)

    def forward(self, batch, setup: str, extra: Tensor | None = None, train: bool = False):
        enc: EncodedBatch = self.encoder(batch, extra)
        out = []
        for b, s in enumerate(batch):
            out.append(self.sentence_scores(enc.top[b, :s.n], s, setup, train))
        return out

    # ------------------------------------------------------------ loss / decode

    def gold_targets(self, sentence: AnnotatedSentence, sc: SentenceScores) -> np.ndarray:
        cand = sc.candidates
        targets = np.full((len(cand.predicates), len(cand.spans)), self.vocab.null_role, dtype=np.int64)
        prow = {int(p): i for i, p in enumerate(cand.predicates)}
        arow = {(int(j), int(k)): i for i, (j, k) in enumerate(cand.spans)}
        total = kept = 0
        for f in sentence.frames or []:
            for a in f.arguments:
                if self.cfg.word_mode and a.start != a.end:
                    continue
                total += 1
                if f.predicate in prow and (a.start, a.end) in arow and a.role in self.vocab.roles:
                    targets[prow[f.predicate], arow[(a.start, a.end)]] = self.vocab.roles[a.role]
                    kept += 1
        sc.gold_total, sc.gold_kept = total, kept
        return targets

    def srl_loss(self, sentence: AnnotatedSentence, sc: SentenceScores) -> Tensor:
        """-log prod over candidate pairs of softmax(phi(p, a, .))[gold role or null]."""
        targets = self.gold_targets(sentence, sc)
        if targets.size == 0:
            return Tensor(np.asarray(0.0))
        return ad.nll(sc.logits, targets)

    def loss(self, batch, setup: str, extra: Tensor | None = None):
        scores = self.forward(batch, setup, extra, train=True)
        losses = [self.srl_loss(s, sc) for s, sc in zip(batch, scores)]
        total = losses[0]
        for l in losses[1:]:
            total = ad.add(total, l)
        gold = sum(sc.gold_total for sc in scores)
        kept = sum(sc.gold_kept for sc in scores)
        return total, {"gold_args": gold, "kept_args": kept}

    def decode(self, sc: SentenceScores, setup: str) -> list[PredicateFrame]:
        return decode_frames(sc.candidates, sc.logits.data, self.vocab.role_names(), setup, self.cfg.word_mode)

    def predict(self, batch, setup: str, extra: Tensor | None = None) -> list[list[PredicateFrame]]:
        with ad.no_grad():
            scores = self.forward(batch, setup, extra)
        return [self.decode(sc, setup) for sc in scores]


def decode_frames(cand: CandidateSet, logits: np.ndarray, role_names: list[str], setup: str,
                  word_mode: bool = False) -> list[PredicateFrame]:
    """Argmax role per pair; overlapping spans of one predicate resolved greedily by score."""
    frames = []
    for pi, p in enumerate(cand.predicates):
        chosen = []
        if logits.size:
            best = logits[pi].argmax(axis=-1)
            for ai in np.nonzero(best != 0)[0]:
                j, k = (int(x) for x in cand.spans[ai])
                chosen.append((float(logits[pi, ai, best[ai]]), j, k, role_names[best[ai]]))
        chosen.sort(key=lambda c: (-c[0], c[1], c[2]))
        kept: list[tuple] = []
        for score, j, k, role in chosen:
            if word_mode and j != k:
                continue
            if not word_mode and any(not (k < kj or j > kk) for _, kj, kk, _ in kept):
                continue
            kept.append((score, j, k, role))
        args = tuple(Argument(j, k, r) for _, j, k, r in sorted(kept, key=lambda c: (c[1], c[2])))
        if args or setup == GOLD_PREDICATES:
            frames.append(PredicateFrame(int(p), args))
    return frames
