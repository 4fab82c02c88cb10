"""Word embedding files and external contextual-representation files."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .types import AlignmentError, ParseError
from .vocab import PAD, Vocabulary

UNKNOWN_RANGE = 0.01


def load_word_embeddings(path, vocab: Vocabulary, seed: int = 0, dim: int | None = None) -> np.ndarray:
    """word2vec text format, optional "V D" header.

    Rows follow vocabulary ids; words missing from the file get seeded
    uniform(-0.01, 0.01) rows and the padding row is zero.
    """
    vectors: dict[str, np.ndarray] = {}
    expected_rows = None
    d = dim
    body_lines = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                expected_rows, hd = int(parts[0]), int(parts[1])
                if d is not None and d != hd:
                    raise ParseError(f"line 1: header dimension {hd} != requested {d}")
                d = hd
                continue
            body_lines += 1
            word, vals = parts[0], parts[1:]
            if d is None:
                d = len(vals)
            if len(vals) != d:
                raise ParseError(f"line {lineno}: expected {d} values, got {len(vals)}")
            try:
                vectors[word] = np.array([float(v) for v in vals])
            except ValueError:
                raise ParseError(f"line {lineno}: non-numeric value") from None
    if expected_rows is not None and body_lines != expected_rows:
        raise ParseError(f"header declares {expected_rows} vectors, file has {body_lines}")
    if d is None:
        raise ParseError(f"{path}: no vectors and no dimension")
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-UNKNOWN_RANGE, UNKNOWN_RANGE, size=(len(vocab.words), d))
    for word, idx in vocab.words.items():
        if word in vectors:
            matrix[idx] = vectors[word]
    matrix[vocab.words[PAD]] = 0.0
    return matrix


def write_external_reps(path, reps: list[np.ndarray]) -> Path:
    """reps: one (n_tokens, K, d_ext) array per sentence."""
    if reps:
        K, d = reps[0].shape[1:]
    else:
        K, d = 0, 0
    lines = [f"{K} {d}"]
    for idx, r in enumerate(reps):
        if r.shape[1:] != (K, d):
            raise AlignmentError(f"sentence {idx}: layer shape {r.shape[1:]} != {(K, d)}")
        lines.append(f"#sent {idx} {r.shape[0]}")
        for t in range(r.shape[0]):
            for k in range(K):
                lines.append(" ".join([str(t), str(k)] + [format(float(v), ".17g") for v in r[t, k]]))
        lines.append("")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)


def load_external_reps(path, corpus=None) -> list[np.ndarray]:
    """Parse an external representation file; attach to `corpus` by position when given."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    header = lines[0].split()
    if len(header) != 2:
        raise ParseError("line 1: expected header 'K d_ext'")
    K, d = int(header[0]), int(header[1])
    reps = []
    i = 1
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        parts = line.split()
        if parts[0] != "#sent" or len(parts) != 3:
            raise ParseError(f"line {i + 1}: expected '#sent <index> <n_tokens>'")
        idx, n = int(parts[1]), int(parts[2])
        if idx != len(reps):
            raise ParseError(f"line {i + 1}: sentence index {idx} out of order")
        arr = np.empty((n, K, d))
        filled = np.zeros((n, K), dtype=bool)
        i += 1
        while i < len(lines) and lines[i].strip():
            vals = lines[i].split()
            if len(vals) != 2 + d:
                raise ParseError(f"line {i + 1}: expected {2 + d} fields, got {len(vals)}")
            t, k = int(vals[0]), int(vals[1])
            if not (0 <= t < n and 0 <= k < K):
                raise AlignmentError(f"line {i + 1}: token {t} / layer {k} outside sentence {idx}")
            arr[t, k] = [float(v) for v in vals[2:]]
            filled[t, k] = True
            i += 1
        if not filled.all():
            raise AlignmentError(f"sentence {idx}: {int(filled.sum())} vector rows for {n} tokens x {K} layers")
        reps.append(arr)
    if corpus is not None:
        attach_external_reps(corpus, reps)
    return reps


def attach_external_reps(corpus, reps) -> None:
    if len(reps) != len(corpus):
        raise AlignmentError(f"{len(reps)} sentences of representations for a corpus of {len(corpus)}")
    for idx, (s, r) in enumerate(zip(corpus, reps)):
        if r.shape[0] != s.n:
            raise AlignmentError(f"sentence {idx}: {r.shape[0]} vectors for {s.n} tokens")
    for s, r in zip(corpus, reps):
        s.ext_layers = r
