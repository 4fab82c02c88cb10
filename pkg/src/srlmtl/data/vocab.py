from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

PAD = "<pad>"
UNK = "<unk>"
NULL_ROLE = "<null>"


def _index(counts: Counter, specials: list[str], min_count: int = 1) -> dict[str, int]:
    # frequency first, string second: independent of corpus order
    items = sorted((k for k, c in counts.items() if c >= min_count and k not in specials),
                   key=lambda k: (-counts[k], k))
    return {k: i for i, k in enumerate(specials + items)}


@dataclass
class Vocabulary:
    words: dict[str, int] = field(default_factory=dict)
    chars: dict[str, int] = field(default_factory=dict)
    roles: dict[str, int] = field(default_factory=dict)
    deprels: dict[str, int] = field(default_factory=dict)

    @classmethod
    def build(cls, *corpora, min_count: int = 1) -> "Vocabulary":
        words, chars, roles, rels = Counter(), Counter(), Counter(), Counter()
        for corpus in corpora:
            for s in corpus:
                words.update(s.tokens)
                for t in s.tokens:
                    chars.update(t)
                for f in s.frames or []:
                    roles.update(a.role for a in f.arguments)
                if s.gold_dep is not None:
                    rels.update(s.gold_dep.labels)
        return cls(_index(words, [PAD, UNK], min_count), _index(chars, [PAD, UNK]),
                   _index(roles, [NULL_ROLE]), _index(rels, []))

    @property
    def null_role(self) -> int:
        return self.roles[NULL_ROLE]

    def word_id(self, w: str) -> int:
        return self.words.get(w, self.words[UNK])

    def char_id(self, c: str) -> int:
        return self.chars.get(c, self.chars[UNK])

    def role_names(self) -> list[str]:
        return sorted(self.roles, key=self.roles.get)

    def deprel_names(self) -> list[str]:
        return sorted(self.deprels, key=self.deprels.get)

    def to_dict(self) -> dict:
        return {"words": self.words, "chars": self.chars, "roles": self.roles, "deprels": self.deprels}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(dict(d["words"]), dict(d["chars"]), dict(d["roles"]), dict(d["deprels"]))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
