"""Sparse token features for the linear-chain CRF.

Feature strings are part of the saved model; ``FEATURE_GRAMMAR_VERSION`` must
change whenever their spelling changes.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Document, Sentence, sentence_entities

FEATURE_GRAMMAR_VERSION = 1

BOS = "<BOS>"
EOS = "<EOS>"


@dataclass(frozen=True)
class FeatureConfig:
    window: int = 2
    affix_len: int = 3
    use_shape: bool = True
    use_gazetteer: bool = True

    def __post_init__(self):
        if self.window < 0:
            raise ValueError("window radius must be >= 0")
        if self.affix_len < 1:
            raise ValueError("affix length must be >= 1")


@dataclass(frozen=True)
class Gazetteer:
    """Case-folded surface forms per entity type."""

    phrases: Mapping[str, frozenset] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "phrases", {t: frozenset(p) for t, p in sorted(self.phrases.items())})
        object.__setattr__(
            self, "_max_len", {t: max((len(p.split(" ")) for p in ps), default=0) for t, ps in self.phrases.items()}
        )

    def max_len(self, type_name: str) -> int:
        return self._max_len.get(type_name, 0)

    def __contains__(self, item) -> bool:
        type_name, phrase = item
        return phrase.casefold() in self.phrases.get(type_name, ())

    def matches(self, words: Sequence[str]) -> list[list[str]]:
        """Types whose phrases cover each position, by greedy longest match per type."""
        folded = [w.casefold() for w in words]
        hits: list[list[str]] = [[] for _ in words]
        for type_name, phrases in self.phrases.items():
            longest = self._max_len[type_name]
            i = 0
            while i < len(folded):
                step = 1
                for n in range(min(longest, len(folded) - i), 0, -1):
                    if " ".join(folded[i:i + n]) in phrases:
                        for k in range(i, i + n):
                            hits[k].append(type_name)
                        step = n
                        break
                i += step
        return hits

    def to_lines(self) -> list[str]:
        return [f"{t}\t{p}" for t, ps in self.phrases.items() for p in sorted(ps)]

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> Gazetteer:
        acc: dict[str, set] = {}
        for line in lines:
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            type_name, phrase = line.split("\t", 1)
            acc.setdefault(type_name, set()).add(" ".join(phrase.casefold().split()))
        return cls(acc)

    def merged(self, other: Gazetteer) -> Gazetteer:
        acc = {t: set(p) for t, p in self.phrases.items()}
        for t, p in other.phrases.items():
            acc.setdefault(t, set()).update(p)
        return Gazetteer(acc)


def build_gazetteer(train_docs: Sequence[Document]) -> Gazetteer:
    acc: dict[str, set] = {}
    for doc in train_docs:
        for s, sent in enumerate(doc.sentences):
            for ent in sentence_entities(sent, "gold", s):
                acc.setdefault(ent.type_name, set()).add(ent.surface.casefold())
    return Gazetteer(acc)


def load_gazetteer(path) -> Gazetteer:
    """Read an external ``type<TAB>phrase`` list."""
    return Gazetteer.from_lines(Path(path).read_text(encoding="utf-8").splitlines())


def word_shape(word: str) -> str:
    out = []
    for ch in word:
        if ch.isupper():
            sym = "X"
        elif ch.islower():
            sym = "x"
        elif ch.isdigit():
            sym = "d"
        else:
            sym = ch
        if not out or out[-1] != sym:
            out.append(sym)
    return "".join(out)


def _is_punct(word: str) -> bool:
    return all(unicodedata.category(c).startswith("P") for c in word)


def _word_features(word: str, config: FeatureConfig) -> list[str]:
    low = word.lower()
    feats = [f"w0={low}"]
    if config.use_shape:
        feats.append(f"sh0={word_shape(word)}")
    for k in range(1, min(config.affix_len, len(low)) + 1):
        feats.append(f"p{k}={low[:k]}")
        feats.append(f"s{k}={low[-k:]}")
    if word.isdigit():
        feats.append("isdigit")
    if any(c.isdigit() for c in word):
        feats.append("hasdigit")
    if _is_punct(word):
        feats.append("ispunct")
    if word.istitle():
        feats.append("istitle")
    if word.isupper():
        feats.append("isupper")
    return feats


def sentence_features(words: Sequence[str], config: FeatureConfig, gazetteer: Gazetteer | None) -> list[list[str]]:
    """Feature strings for every position of a sentence."""
    if isinstance(words, Sentence):
        words = words.words
    n = len(words)
    lows = [w.lower() for w in words]
    shapes = [word_shape(w) for w in words]
    gaz = gazetteer.matches(words) if (config.use_gazetteer and gazetteer is not None) else [[] for _ in words]
    out = []
    for i, word in enumerate(words):
        feats = ["bias"] + _word_features(word, config)
        for o in range(-config.window, config.window + 1):
            if o == 0:
                continue
            j = i + o
            if j < 0 or j >= n:
                pad = BOS if j < 0 else EOS
                feats.append(f"w{o:+d}={pad}")
                if config.use_shape:
                    feats.append(f"sh{o:+d}={pad}")
            else:
                feats.append(f"w{o:+d}={lows[j]}")
                if config.use_shape:
                    feats.append(f"sh{o:+d}={shapes[j]}")
        feats.extend(f"gaz={t}" for t in gaz[i])
        out.append(feats)
    return out


def token_features(
    words: Sequence[str], position: int, config: FeatureConfig = FeatureConfig(), gazetteer: Gazetteer | None = None
) -> list[str]:
    if isinstance(words, Sentence):
        words = words.words
    if not 0 <= position < len(words):
        raise IndexError(f"position {position} outside sentence of length {len(words)}")
    return sentence_features(words, config, gazetteer)[position]


class FeatureIndex:
    """Feature string <-> integer id, first-seen order. Frozen indexes never grow."""

    def __init__(self, strings: Iterable[str] = ()):
        self._ids: dict[str, int] = {}
        self.frozen = False
        for s in strings:
            self.add(s)

    def __len__(self):
        return len(self._ids)

    def __contains__(self, s):
        return s in self._ids

    def add(self, s: str) -> int:
        if self.frozen:
            raise RuntimeError("feature index is frozen")
        return self._ids.setdefault(s, len(self._ids))

    def get(self, s: str) -> int | None:
        return self._ids.get(s)

    def lookup(self, s: str) -> int | None:
        if self.frozen:
            return self._ids.get(s)
        return self.add(s)

    def freeze(self) -> FeatureIndex:
        self.frozen = True
        return self

    @property
    def strings(self) -> list[str]:
        return list(self._ids)


def fit_index(train_docs: Sequence[Document], config: FeatureConfig, gazetteer: Gazetteer | None) -> FeatureIndex:
    index = FeatureIndex()
    for doc in train_docs:
        for sent in doc.sentences:
            for feats in sentence_features(sent.words, config, gazetteer):
                for f in feats:
                    index.add(f)
    return index.freeze()


def featurize(
    words: Sequence[str] | Sentence, index: FeatureIndex, config: FeatureConfig, gazetteer: Gazetteer | None
) -> list[np.ndarray]:
    """Sorted, duplicate-free feature ids per position; unseen strings are dropped."""
    if not index.frozen:
        raise ValueError("featurize requires a frozen index")
    out = []
    for feats in sentence_features(words, config, gazetteer):
        ids = {i for i in map(index.get, feats) if i is not None}
        out.append(np.array(sorted(ids), dtype=np.int64))
    return out
