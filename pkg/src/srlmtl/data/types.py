from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


class ParseError(ValueError):
    """Malformed corpus or resource file; the message carries a location."""


class AlignmentError(ValueError):
    pass


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class Argument:
    start: int  # 1-based, inclusive
    end: int
    role: str


@dataclass(frozen=True)
class PredicateFrame:
    predicate: int  # 1-based token index
    arguments: tuple[Argument, ...] = ()
    sense: str | None = None

    def tuples(self):
        return {(self.predicate, a.start, a.end, a.role) for a in self.arguments}


@dataclass(frozen=True)
class DepTree:
    heads: tuple[int, ...]  # heads[i-1] is the head of token i; 0 is the root
    labels: tuple[str, ...]

    def __len__(self):
        return len(self.heads)


@dataclass
class AnnotatedSentence:
    tokens: list[str]
    gold_dep: DepTree | None = None
    frames: list[PredicateFrame] | None = None
    ext_layers: np.ndarray | None = None  # (n, K, d_ext)

    def __post_init__(self):
        if len(self.tokens) < 1:
            raise ValueError("a sentence needs at least one token")
        if self.gold_dep is not None:
            validate_tree(self.gold_dep.heads)

    @property
    def n(self) -> int:
        return len(self.tokens)

    @property
    def chars(self) -> list[list[str]]:
        return [list(t) for t in self.tokens]

    def with_frames(self, frames) -> "AnnotatedSentence":
        return replace(self, frames=list(frames))


def validate_tree(heads) -> None:
    """Raise TreeError unless `heads` is a single-rooted tree over tokens 1..n."""
    n = len(heads)
    roots = [i + 1 for i, h in enumerate(heads) if h == 0]
    for i, h in enumerate(heads, start=1):
        if not 0 <= h <= n:
            raise TreeError(f"token {i}: head {h} out of range 0..{n}")
        if h == i:
            raise TreeError(f"token {i} is its own head")
    if len(roots) != 1:
        raise TreeError(f"expected exactly one root, found {len(roots)}")
    for i in range(1, n + 1):
        seen = set()
        j = i
        while j != 0:
            if j in seen:
                raise TreeError(f"cycle through token {i}")
            seen.add(j)
            j = heads[j - 1]


def is_tree(heads) -> bool:
    try:
        validate_tree(heads)
    except TreeError:
        return False
    return True


def subtree_span(heads, node: int) -> tuple[int, int]:
    """Smallest and largest token index dominated by `node` (1-based)."""
    members = {node}
    changed = True
    while changed:
        changed = False
        for i, h in enumerate(heads, start=1):
            if h in members and i not in members:
                members.add(i)
                changed = True
    return min(members), max(members)


@dataclass
class Corpus:
    """Named splits produced by the synthetic generator."""

    srl_train: list[AnnotatedSentence] = field(default_factory=list)
    srl_dev: list[AnnotatedSentence] = field(default_factory=list)
    srl_test: list[AnnotatedSentence] = field(default_factory=list)
    dep_train: list[AnnotatedSentence] = field(default_factory=list)
    dep_dev: list[AnnotatedSentence] = field(default_factory=list)
