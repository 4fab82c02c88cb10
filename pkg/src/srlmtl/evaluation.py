"""SRL scoring (span and word based), breakdowns, and the stratified-shuffling significance test."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data.types import AlignmentError

DEFAULT_BUCKETS = (10, 20, 30, 40)  # upper edges; the last bucket is open


@dataclass
class Counts:
    gold: int = 0
    predicted: int = 0
    matched: int = 0

    def __iadd__(self, other):
        self.gold += other.gold
        self.predicted += other.predicted
        self.matched += other.matched
        return self

    @property
    def precision(self) -> float:
        return 100.0 * self.matched / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return 100.0 * self.matched / self.gold if self.gold else 0.0

    @property
    def f1(self) -> float:
        return f1_score(self.matched, self.gold, self.predicted)


def f1_score(matched, gold, predicted) -> float:
    p = matched / predicted if predicted else 0.0
    r = matched / gold if gold else 0.0
    return 100.0 * 2 * p * r / (p + r) if p + r > 0 else 0.0


def sentence_f1(c: Counts) -> float:
    """Per-sentence F1; a sentence with nothing to find and nothing found scores 100."""
    if c.gold == 0 and c.predicted == 0:
        return 100.0
    return c.f1


@dataclass
class EvalReport:
    counts: Counts
    per_role: dict = field(default_factory=dict)  # role -> Counts
    per_sentence: list = field(default_factory=list)  # Counts per sentence
    per_length: list = field(default_factory=list)  # (label, Counts)

    @property
    def precision(self):
        return self.counts.precision

    @property
    def recall(self):
        return self.counts.recall

    @property
    def f1(self):
        return self.counts.f1

    def headline(self) -> str:
        return f"P {self.precision:.2f}  R {self.recall:.2f}  F1 {self.f1:.2f}"


def _frames(s):
    return s.frames or []


def span_tuples(sentence, count_predicates: bool = False) -> set:
    out = set()
    for f in _frames(sentence):
        out |= {(f.predicate, a.start, a.end, a.role) for a in f.arguments}
        if count_predicates:
            out.add((f.predicate, f.predicate, f.predicate, "V"))
    return out


def word_tuples(sentence, include_sense: bool = False) -> set:
    out = set()
    for f in _frames(sentence):
        out |= {(f.predicate, a.start, a.end, a.role) for a in f.arguments}
        if include_sense:
            out.add((f.predicate, "SENSE", f.sense))
    return out


def _check_aligned(gold, pred):
    if len(gold) != len(pred):
        raise AlignmentError(f"{len(gold)} gold sentences but {len(pred)} predicted")
    for k, (g, p) in enumerate(zip(gold, pred)):
        if list(g.tokens) != list(p.tokens):
            raise AlignmentError(f"sentence {k}: token mismatch")


def _role(t):
    return t[3] if len(t) == 4 else "SENSE"


def score_sets(gold_sets, pred_sets) -> EvalReport:
    total = Counts()
    per_role: dict = defaultdict(Counts)
    per_sentence = []
    for g, p in zip(gold_sets, pred_sets):
        c = Counts(len(g), len(p), len(g & p))
        per_sentence.append(c)
        total += c
        for t in g:
            per_role[_role(t)].gold += 1
        for t in p:
            per_role[_role(t)].predicted += 1
        for t in g & p:
            per_role[_role(t)].matched += 1
    return EvalReport(total, dict(sorted(per_role.items())), per_sentence)


def span_f1(gold, pred, count_predicates: bool = False) -> EvalReport:
    """Exact-match micro P/R/F1 over (predicate, start, end, role) tuples.

    With `count_predicates` (end-to-end setup) every frame also contributes a
    predicate-identification tuple.
    """
    _check_aligned(gold, pred)
    return score_sets([span_tuples(s, count_predicates) for s in gold],
                      [span_tuples(s, count_predicates) for s in pred])


def word_f1(gold, pred, include_sense: bool = False) -> EvalReport:
    """Labeled semantic P/R/F1 over head-word arguments, plus one sense tuple per predicate if asked."""
    _check_aligned(gold, pred)
    return score_sets([word_tuples(s, include_sense) for s in gold],
                      [word_tuples(s, include_sense) for s in pred])


def _bucket_labels(edges):
    labels, lo = [], 1
    for e in edges:
        labels.append(f"{lo}-{e}")
        lo = e + 1
    labels.append(f"{lo}+")
    return labels


def breakdown_by_length(gold, pred, edges=DEFAULT_BUCKETS, scorer=span_f1, **kw) -> list[tuple[str, Counts]]:
    """Micro counts per sentence-length bucket; `edges` are inclusive upper bounds."""
    edges = tuple(edges)
    if any(b <= a for a, b in zip(edges, edges[1:])) or (edges and edges[0] < 1):
        raise ValueError(f"bucket edges must be positive and strictly increasing: {edges}")
    report = scorer(gold, pred, **kw)
    labels = _bucket_labels(edges)
    rows = [Counts() for _ in labels]
    for s, c in zip(gold, report.per_sentence):
        idx = int(np.searchsorted(edges, s.n, side="left"))
        rows[idx] += c
    return list(zip(labels, rows))


def breakdown_by_role(gold, pred, scorer=span_f1, **kw) -> dict:
    return scorer(gold, pred, **kw).per_role


def sentence_scatter(pred_a, pred_b, gold, scorer=span_f1, **kw) -> list[tuple[float, float]]:
    ra = scorer(gold, pred_a, **kw)
    rb = scorer(gold, pred_b, **kw)
    return [(sentence_f1(a), sentence_f1(b)) for a, b in zip(ra.per_sentence, rb.per_sentence)]


def _count_matrix(report: EvalReport) -> np.ndarray:
    return np.array([[c.gold, c.predicted, c.matched] for c in report.per_sentence], dtype=np.float64).reshape(-1, 3)


def _f1_vec(gold, predicted, matched):
    p = np.divide(matched, predicted, out=np.zeros_like(matched), where=predicted > 0)
    r = np.divide(matched, gold, out=np.zeros_like(matched), where=gold > 0)
    return np.divide(200.0 * p * r, p + r, out=np.zeros_like(p), where=(p + r) > 0)


@dataclass
class SignificanceResult:
    f1_a: float
    f1_b: float
    delta: float
    p_value: float
    iterations: int
    seed: int
    exceed: int


def significance(pred_a, pred_b, gold, iterations: int = 10000, seed: int = 0, scorer=span_f1,
                 chunk: int = 2000, **kw) -> SignificanceResult:
    """Stratified shuffling: swap each sentence's two outputs with probability 1/2.

    p = (r + 1) / (N + 1) with r the number of shuffles whose |ΔF1| reaches the observed |ΔF1|.
    Swap decisions for iteration i come from a generator seeded with (seed, i // chunk).
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    ca = _count_matrix(scorer(gold, pred_a, **kw))
    cb = _count_matrix(scorer(gold, pred_b, **kw))
    ta, tb = ca.sum(axis=0), cb.sum(axis=0)
    fa = float(_f1_vec(*ta[:, None])[0])
    fb = float(_f1_vec(*tb[:, None])[0])
    observed = abs(fa - fb)
    diff = cb - ca  # moving sentence s from A to B adds diff[s] to A's totals
    exceed = 0
    done = 0
    block = 0
    while done < iterations:
        m = min(chunk, iterations - done)
        rng = np.random.default_rng([seed, block])
        swaps = rng.random((m, len(ca))) < 0.5
        shift = swaps.astype(np.float64) @ diff
        a = ta[None, :] + shift
        b = tb[None, :] - shift
        d = np.abs(_f1_vec(a[:, 0], a[:, 1], a[:, 2]) - _f1_vec(b[:, 0], b[:, 1], b[:, 2]))
        exceed += int(np.sum(d >= observed - 1e-9))
        done += m
        block += 1
    return SignificanceResult(fa, fb, fb - fa, (exceed + 1) / (iterations + 1), iterations, seed, exceed)


# ------------------------------------------------------------------ report output

def format_counts_table(rows, title: str) -> str:
    header = f"{title:<12} {'gold':>6} {'pred':>6} {'match':>6} {'P':>7} {'R':>7} {'F1':>7}"
    lines = [header, "-" * len(header)]
    for name, c in rows:
        flag = "" if c.predicted else "  (no predictions)"
        lines.append(f"{name:<12} {c.gold:>6} {c.predicted:>6} {c.matched:>6} "
                     f"{c.precision:>7.2f} {c.recall:>7.2f} {c.f1:>7.2f}{flag}")
    return "\n".join(lines)


def counts_tsv(rows, key: str) -> str:
    lines = ["\t".join([key, "gold", "predicted", "matched", "precision", "recall", "f1"])]
    for name, c in rows:
        lines.append("\t".join([str(name), str(c.gold), str(c.predicted), str(c.matched),
                                f"{c.precision:.2f}", f"{c.recall:.2f}", f"{c.f1:.2f}"]))
    return "\n".join(lines) + "\n"


def write_report(out_dir, report: EvalReport, by_role=False, by_length=None, scatter=None) -> dict:
    """Write aligned text plus TSV files; returns {name: path}."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    text = [format_counts_table([("overall", report.counts)], "")]
    (out / "overall.tsv").write_text(counts_tsv([("overall", report.counts)], "scope"))
    paths["overall"] = out / "overall.tsv"
    if by_role:
        rows = list(report.per_role.items())
        text.append(format_counts_table(rows, "role"))
        (out / "by_role.tsv").write_text(counts_tsv(rows, "role"))
        paths["by_role"] = out / "by_role.tsv"
    if by_length is not None:
        text.append(format_counts_table(by_length, "length"))
        (out / "by_length.tsv").write_text(counts_tsv(by_length, "length"))
        paths["by_length"] = out / "by_length.tsv"
    if scatter is not None:
        (out / "scatter.tsv").write_text("".join(f"{a:.2f}\t{b:.2f}\n" for a, b in scatter))
        paths["scatter"] = out / "scatter.tsv"
    (out / "report.txt").write_text("\n\n".join(text) + "\n")
    paths["report"] = out / "report.txt"
    return paths
