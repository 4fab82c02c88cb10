"""Templated grammar producing sentences with gold dependency trees and SRL frames.

Each clause is headed by a verb.  Its dependents carry syntactic labels and
the semantic role of every dependent is a fixed function of that label (plus
the passive marker), so frames are recoverable from the tree:

    SBJ -> A0 (A1 when a BEI dependent is present)   OBJ, COMP -> A1
    BEI/POBJ agent -> A0   TMP -> TMP   LOC -> LOC   ADV -> MNR

Argument spans are the dependents' subtrees; word-based arguments are their heads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .types import AnnotatedSentence, Argument, Corpus, DepTree, PredicateFrame

_ONSETS = list("bcdfghjklmnpqrstwxyz")
_VOWELS = list("aeiou")


@dataclass(frozen=True)
class SyntheticConfig:
    n_nouns: int = 40
    n_trans: int = 10
    n_intrans: int = 4
    n_say: int = 3
    n_adj: int = 10
    n_time: int = 5
    n_adv: int = 5
    n_loc_preps: int = 2
    n_nmod_preps: int = 2
    p_time: float = 0.3
    p_adv: float = 0.3
    p_loc: float = 0.3
    p_adj: float = 0.4
    p_det: float = 0.4
    p_nmod: float = 0.0
    p_clause: float = 0.0
    p_bei: float = 0.0
    p_intrans: float = 0.2
    max_depth: int = 1
    lexicon_seed: int = 1234

    @classmethod
    def preset(cls, name: str) -> "SyntheticConfig":
        if name == "simple":
            return cls()
        if name == "hard":
            return cls(n_nouns=150, n_trans=40, n_intrans=10, n_say=8, n_adj=30, n_time=10, n_adv=10,
                       p_nmod=0.3, p_clause=0.35, p_bei=0.3, max_depth=2)
        raise ValueError(f"unknown synthetic preset {name!r}")


@dataclass
class _Node:
    form: str
    label: str
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    roles: list = field(default_factory=list)  # (role, dependent node) for verbs
    index: int = 0


class _Lexicon:
    def __init__(self, cfg: SyntheticConfig):
        rng = np.random.default_rng(cfg.lexicon_seed)
        used = {"de", "bei", "shuo", "ba"}

        def words(k, syl):
            out = []
            while len(out) < k:
                w = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(int(rng.integers(*syl))))
                if w not in used:
                    used.add(w)
                    out.append(w)
            return out

        self.nouns = words(cfg.n_nouns, (1, 4))
        self.trans = words(cfg.n_trans, (1, 3))
        self.intrans = words(cfg.n_intrans, (1, 3))
        self.say = words(cfg.n_say, (1, 3))
        self.adj = words(cfg.n_adj, (1, 3))
        self.time = words(cfg.n_time, (2, 4))
        self.adv = words(cfg.n_adv, (1, 3))
        self.dets = words(3, (1, 2))
        self.loc_preps = words(cfg.n_loc_preps, (1, 2))
        self.nmod_preps = words(cfg.n_nmod_preps, (1, 2))


class SyntheticGrammar:
    def __init__(self, cfg: SyntheticConfig, seed: int):
        self.cfg = cfg
        self.lex = _Lexicon(cfg)
        self.rng = np.random.default_rng(seed)

    def _pick(self, items):
        return items[int(self.rng.integers(len(items)))]

    def _coin(self, p):
        return self.rng.random() < p

    def noun_phrase(self, label, depth) -> _Node:
        cfg = self.cfg
        head = _Node(self._pick(self.lex.nouns), label)
        if self._coin(cfg.p_det):
            head.left.append(_Node(self._pick(self.lex.dets), "DET"))
        if self._coin(cfg.p_adj):
            head.left.append(_Node(self._pick(self.lex.adj), "AMOD"))
        if depth < cfg.max_depth and self._coin(cfg.p_nmod):
            prep = _Node(self._pick(self.lex.nmod_preps), "NMOD")
            prep.right.append(self.noun_phrase("POBJ", depth + 1))
            head.right.append(prep)
        return head

    def clause(self, label, depth) -> _Node:
        cfg = self.cfg
        r = self.rng.random()
        if depth < cfg.max_depth and r < cfg.p_clause:
            kind = "say"
        elif r < cfg.p_clause + cfg.p_intrans:
            kind = "intrans"
        else:
            kind = "trans"
        verb = _Node(self._pick({"say": self.lex.say, "intrans": self.lex.intrans, "trans": self.lex.trans}[kind]), label)
        if self._coin(cfg.p_time):
            t = _Node(self._pick(self.lex.time), "TMP")
            verb.left.append(t)
            verb.roles.append(("TMP", t))
        passive = kind == "trans" and self._coin(cfg.p_bei)
        subj = self.noun_phrase("SBJ", depth)
        verb.left.append(subj)
        if passive:
            bei = _Node("bei", "BEI")
            agent = self.noun_phrase("POBJ", depth)
            bei.right.append(agent)
            verb.left.append(bei)
            verb.roles += [("A1", subj), ("A0", agent)]
        else:
            verb.roles.append(("A0", subj))
        if self._coin(cfg.p_adv):
            a = _Node(self._pick(self.lex.adv), "ADV")
            verb.left.append(a)
            verb.roles.append(("MNR", a))
        if self._coin(cfg.p_loc):
            prep = _Node(self._pick(self.lex.loc_preps), "LOC")
            prep.right.append(self.noun_phrase("POBJ", depth))
            verb.left.append(prep)
            verb.roles.append(("LOC", prep))
        if kind == "trans" and not passive:
            obj = self.noun_phrase("OBJ", depth)
            verb.right.append(obj)
            verb.roles.append(("A1", obj))
        elif kind == "say":
            comp = self.clause("COMP", depth + 1)
            comp.left.insert(0, _Node("shuo", "MARK"))
            verb.right.append(comp)
            verb.roles.append(("A1", comp))
        return verb

    def sentence(self) -> AnnotatedSentence:
        root = self.clause("ROOT", 0)
        root.right.append(_Node("ba", "P"))
        order: list[_Node] = []
        heads: dict[int, int] = {}

        def walk(node):
            for child in node.left:
                walk(child)
            order.append(node)
            node.index = len(order)
            for child in node.right:
                walk(child)

        walk(root)

        def link(node, parent_index):
            heads[node.index] = parent_index
            for child in node.left + node.right:
                link(child, node.index)

        link(root, 0)
        n = len(order)
        tree = DepTree(tuple(heads[i] for i in range(1, n + 1)), tuple(nd.label for nd in order))
        frames = []
        for node in order:
            if node.roles:
                args = []
                for role, dep in node.roles:
                    lo, hi = _span(dep)
                    args.append(Argument(lo, hi, role))
                frames.append(PredicateFrame(node.index, tuple(sorted(args, key=lambda a: (a.start, a.end)))))
        return AnnotatedSentence([nd.form for nd in order], tree, frames)


def _span(node) -> tuple[int, int]:
    lo = hi = node.index
    for child in node.left + node.right:
        a, b = _span(child)
        lo, hi = min(lo, a), max(hi, b)
    return lo, hi


def gen_synthetic(cfg: SyntheticConfig | str = "simple", seed: int = 0, srl_train: int = 50, srl_dev: int = 50,
                  srl_test: int = 0, dep_train: int = 0, dep_dev: int = 0) -> Corpus:
    """Draw distinct sentences and deal them into disjoint splits.

    Dependency splits keep only the tree; SRL splits keep tree and frames.
    """
    if isinstance(cfg, str):
        cfg = SyntheticConfig.preset(cfg)
    sizes = [srl_train, srl_dev, srl_test, dep_train, dep_dev]
    if srl_train < 1 or min(sizes) < 0:
        raise ValueError("synthetic corpus sizes must be >= 1 for srl_train and >= 0 otherwise")
    grammar = SyntheticGrammar(cfg, seed)
    total = sum(sizes)
    seen, sents = set(), []
    attempts = 0
    while len(sents) < total:
        attempts += 1
        if attempts > 50 * total + 1000:
            raise ValueError("grammar too small to produce that many distinct sentences")
        s = grammar.sentence()
        key = tuple(s.tokens)
        if key in seen:
            continue
        seen.add(key)
        sents.append(s)
    corpus = Corpus()
    bounds = np.cumsum([0] + sizes)
    names = ["srl_train", "srl_dev", "srl_test", "dep_train", "dep_dev"]
    for k, name in enumerate(names):
        part = sents[bounds[k]:bounds[k + 1]]
        if name.startswith("dep"):
            part = [replace(s, frames=None) for s in part]
        setattr(corpus, name, part)
    return corpus


def to_word_based(sentence: AnnotatedSentence) -> AnnotatedSentence:
    """Replace every span argument by its syntactic head (the token whose head lies outside the span)."""
    if sentence.gold_dep is None:
        raise ValueError("word-based conversion needs a dependency tree")
    heads = sentence.gold_dep.heads
    frames = []
    for f in sentence.frames or []:
        args = []
        for a in f.arguments:
            inside = [i for i in range(a.start, a.end + 1) if not a.start <= heads[i - 1] <= a.end]
            args.append(Argument(inside[0], inside[0], a.role))
        frames.append(PredicateFrame(f.predicate, tuple(args), f.sense))
    return replace(sentence, frames=frames)
