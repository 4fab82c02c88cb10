"""Readers and writers for CoNLL-2009, CoNLL-X and CoNLL-2005 style props files."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterator

from .types import AnnotatedSentence, Argument, DepTree, ParseError, PredicateFrame, TreeError, validate_tree

CONLL09_FIXED = 14
CONLLX_COLS = 10


def _blocks(path) -> Iterator[tuple[int, list[tuple[int, str]]]]:
    """Yield (first line number, [(line number, line)]) per blank-line-separated block."""
    block: list[tuple[int, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if line.strip():
                block.append((lineno, line))
            elif block:
                yield block[0][0], block
                block = []
    if block:
        yield block[0][0], block


def _cols(line: str) -> list[str]:
    return line.split("\t") if "\t" in line else line.split()


def _parse_heads(rows, head_col, rel_col, n, what):
    heads_raw = [(lineno, cols[head_col], cols[rel_col]) for lineno, cols in rows]
    if all(h == "_" for _, h, _ in heads_raw):
        return None
    heads, labels = [], []
    for lineno, h, rel in heads_raw:
        try:
            head = int(h)
        except ValueError:
            raise ParseError(f"line {lineno}: bad head {h!r}") from None
        if not 0 <= head <= n:
            raise ParseError(f"line {lineno}: head {head} out of range 0..{n}")
        heads.append(head)
        labels.append(rel)
    try:
        validate_tree(heads)
    except TreeError as exc:
        raise ParseError(f"line {rows[0][0]}: {what} is not a tree: {exc}") from None
    return DepTree(tuple(heads), tuple(labels))


# ------------------------------------------------------------------ CoNLL-2009

def read_conll2009(path) -> list[AnnotatedSentence]:
    """Word-based frames (one per FILLPRED=Y row) plus the gold tree from HEAD/DEPREL."""
    out = []
    for start, block in _blocks(path):
        rows = [(lineno, _cols(line)) for lineno, line in block]
        n = len(rows)
        for lineno, cols in rows:
            if len(cols) < CONLL09_FIXED:
                raise ParseError(f"line {lineno}: expected at least {CONLL09_FIXED} columns, got {len(cols)}")
        n_pred = sum(cols[12] == "Y" for _, cols in rows)
        for i, (lineno, cols) in enumerate(rows, start=1):
            if len(cols) != CONLL09_FIXED + n_pred:
                raise ParseError(f"line {lineno}: {len(cols) - CONLL09_FIXED} APRED columns "
                                 f"but {n_pred} FILLPRED=Y rows in block starting at line {start}")
            if cols[0] != str(i):
                raise ParseError(f"line {lineno}: token id {cols[0]!r} out of sequence")
        tokens = [cols[1] for _, cols in rows]
        tree = _parse_heads(rows, 8, 10, n, "HEAD/DEPREL")
        preds = [i for i, (_, cols) in enumerate(rows, start=1) if cols[12] == "Y"]
        frames = []
        for k, p in enumerate(preds):
            sense = rows[p - 1][1][13]
            args = tuple(Argument(i, i, cols[CONLL09_FIXED + k])
                         for i, (_, cols) in enumerate(rows, start=1) if cols[CONLL09_FIXED + k] != "_")
            frames.append(PredicateFrame(p, args, None if sense == "_" else sense))
        out.append(AnnotatedSentence(tokens, tree, frames))
    return out


def write_conll2009(path, sentences) -> Path:
    lines = []
    for s in sentences:
        frames = sorted(s.frames or [], key=lambda f: f.predicate)
        by_pred = {f.predicate: f for f in frames}
        for i, tok in enumerate(s.tokens, start=1):
            head = rel = "_"
            if s.gold_dep is not None:
                head, rel = str(s.gold_dep.heads[i - 1]), s.gold_dep.labels[i - 1]
            f = by_pred.get(i)
            cols = [str(i), tok, "_", "_", "_", "_", "_", "_", head, head, rel, rel,
                    "Y" if f else "_", (f.sense or "_") if f else "_"]
            for fr in frames:
                role = "_"
                for a in fr.arguments:
                    if a.start != a.end:
                        raise ValueError("CoNLL-2009 output needs width-1 arguments")
                    if a.start == i:
                        role = a.role
                cols.append(role)
            lines.append("\t".join(cols))
        lines.append("")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return Path(path)


# ------------------------------------------------------------------ CoNLL-X

def read_dep_treebank(path) -> list[AnnotatedSentence]:
    out = []
    for ordinal, (start, block) in enumerate(_blocks(path), start=1):
        rows = [(lineno, _cols(line)) for lineno, line in block]
        for lineno, cols in rows:
            if len(cols) < 8:
                raise ParseError(f"line {lineno}: expected {CONLLX_COLS} columns, got {len(cols)}")
        n = len(rows)
        tokens = [cols[1] for _, cols in rows]
        tree = _parse_heads(rows, 6, 7, n, f"sentence {ordinal}")
        if tree is None:
            raise ParseError(f"line {start}: sentence {ordinal} has no heads")
        out.append(AnnotatedSentence(tokens, tree, None))
    return out


def write_dep_treebank(path, sentences, trees=None) -> Path:
    """Write CoNLL-X; `trees` overrides each sentence's gold tree (predictions)."""
    lines = []
    for k, s in enumerate(sentences):
        tree = trees[k] if trees is not None else s.gold_dep
        if tree is None:
            raise ValueError(f"sentence {k + 1} has no tree to write")
        for i, tok in enumerate(s.tokens, start=1):
            lines.append("\t".join([str(i), tok, "_", "_", "_", "_", str(tree.heads[i - 1]),
                                    tree.labels[i - 1], "_", "_"]))
        lines.append("")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return Path(path)


# ------------------------------------------------------------------ props

_CELL = re.compile(r"^((?:\([^()*\s]+)*)\*(\)*)$")
_OPEN = re.compile(r"\(([^()*\s]+)")


def _parse_props_column(cells, ordinal, col):
    stack, spans = [], []
    for i, cell in enumerate(cells, start=1):
        m = _CELL.match(cell)
        if not m:
            raise ParseError(f"sentence {ordinal}: bad props cell {cell!r} (token {i}, column {col})")
        for role in _OPEN.findall(m.group(1)):
            stack.append((role, i))
        for _ in m.group(2):
            if not stack:
                raise ParseError(f"sentence {ordinal}: unbalanced ')' at token {i}, column {col}")
            role, start = stack.pop()
            spans.append((start, i, role))
    if stack:
        raise ParseError(f"sentence {ordinal}: unclosed ({stack[-1][0]} opened at token {stack[-1][1]}, column {col}")
    return spans


def read_span_props(text_path, props_path) -> list[AnnotatedSentence]:
    """Tokens from a one-token-per-line words file; frames from bracketed props columns."""
    words = [[_cols(line)[0] for _, line in block] for _, block in _blocks(text_path)]
    props = list(_blocks(props_path))
    if len(words) != len(props):
        raise ParseError(f"{len(words)} sentences in {text_path} but {len(props)} in {props_path}")
    out = []
    for ordinal, (tokens, (_, block)) in enumerate(zip(words, props), start=1):
        rows = [_cols(line) for _, line in block]
        if len(rows) != len(tokens):
            raise ParseError(f"sentence {ordinal}: {len(tokens)} tokens but {len(rows)} props rows")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ParseError(f"sentence {ordinal}: ragged props columns")
        frames = []
        for col in range(1, width):
            spans = _parse_props_column([r[col] for r in rows], ordinal, col)
            verbs = [s for s in spans if s[2] == "V"]
            if len(verbs) != 1 or verbs[0][0] != verbs[0][1]:
                raise ParseError(f"sentence {ordinal}: column {col} needs exactly one single-token (V*)")
            p = verbs[0][0]
            marker = rows[p - 1][0]
            sense = None if marker in ("-", tokens[p - 1]) else marker
            args = tuple(Argument(a, b, r) for a, b, r in sorted(spans) if r != "V")
            frames.append(PredicateFrame(p, args, sense))
        frames.sort(key=lambda f: f.predicate)
        out.append(AnnotatedSentence(tokens, None, frames))
    return out


def _props_column(n, frame) -> list[str]:
    spans = [(a.start, a.end, a.role) for a in frame.arguments] + [(frame.predicate, frame.predicate, "V")]
    for a in spans:
        for b in spans:
            if a is not b and a[0] < b[0] <= a[1] < b[1]:
                raise ValueError(f"crossing spans {a} and {b} cannot be bracketed")
    opens = {i: [] for i in range(1, n + 1)}
    closes = {i: 0 for i in range(1, n + 1)}
    for start, end, role in sorted(spans, key=lambda s: (s[0], -s[1])):
        opens[start].append(role)
        closes[end] += 1
    return ["".join("(" + r for r in opens[i]) + "*" + ")" * closes[i] for i in range(1, n + 1)]


def write_span_props(text_path, props_path, sentences) -> None:
    wlines, plines = [], []
    for s in sentences:
        frames = sorted(s.frames or [], key=lambda f: f.predicate)
        cols = [_props_column(s.n, f) for f in frames]
        by_pred = {f.predicate: f for f in frames}
        for i, tok in enumerate(s.tokens, start=1):
            wlines.append(tok)
            f = by_pred.get(i)
            marker = "-" if f is None else (f.sense or tok)
            plines.append(" ".join([marker] + [c[i - 1] for c in cols]))
        wlines.append("")
        plines.append("")
    Path(text_path).write_text("\n".join(wlines) + ("\n" if wlines else ""), encoding="utf-8")
    Path(props_path).write_text("\n".join(plines) + ("\n" if plines else ""), encoding="utf-8")
