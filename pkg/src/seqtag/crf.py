"""Linear-chain CRF: lattice scoring, log-space forward-backward, Viterbi with
BIO transition constraints, regularized likelihood and AdaGrad training."""
from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Document, LabelScheme, split_tag
from .errors import AllPathsMasked
from .features import FeatureConfig, FeatureIndex, Gazetteer, build_gazetteer, featurize, fit_index
from .optim import minibatch_adagrad

NEG_INF = -np.inf


@dataclass
class Lattice:
    emissions: np.ndarray  # (n, L)
    transitions: np.ndarray  # (L, L), [prev, next]
    begin: np.ndarray  # (L,)
    end: np.ndarray  # (L,)

    def __post_init__(self):
        n, L = self.emissions.shape
        if n == 0:
            raise ValueError("empty lattice")
        if self.transitions.shape != (L, L) or self.begin.shape != (L,) or self.end.shape != (L,):
            raise ValueError("lattice dimension mismatch")

    @property
    def n_labels(self) -> int:
        return self.emissions.shape[1]

    def __len__(self):
        return self.emissions.shape[0]


@dataclass(frozen=True)
class TransitionMask:
    allowed: np.ndarray  # (L, L) bool, [prev, next]
    begin_allowed: np.ndarray  # (L,) bool


def transition_mask(scheme: LabelScheme) -> TransitionMask:
    """Forbid ``start -> I-X`` and ``A -> I-X`` unless ``A`` is ``B-X`` or ``I-X``."""
    L = len(scheme)
    allowed = np.ones((L, L), dtype=bool)
    begin = np.ones(L, dtype=bool)
    for j, tag in enumerate(scheme.tags):
        prefix, typ = split_tag(tag)
        if prefix != "I":
            continue
        begin[j] = False
        for i, prev in enumerate(scheme.tags):
            allowed[i, j] = prev in (f"B-{typ}", f"I-{typ}")
    return TransitionMask(allowed, begin)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def _masked_params(lattice: Lattice, mask: TransitionMask | None):
    if mask is None:
        return lattice.transitions, lattice.begin
    trans = np.where(mask.allowed, lattice.transitions, NEG_INF)
    begin = np.where(mask.begin_allowed, lattice.begin, NEG_INF)
    return trans, begin


def _forward(em: np.ndarray, trans: np.ndarray, begin: np.ndarray) -> np.ndarray:
    alpha = np.empty_like(em)
    alpha[0] = begin + em[0]
    for t in range(1, len(em)):
        alpha[t] = _logsumexp(alpha[t - 1][:, None] + trans, axis=0) + em[t]
    return alpha


def _backward(em: np.ndarray, trans: np.ndarray, end: np.ndarray) -> np.ndarray:
    beta = np.empty_like(em)
    beta[-1] = end
    for t in range(len(em) - 2, -1, -1):
        beta[t] = _logsumexp(trans + (em[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def log_partition(lattice: Lattice, mask: TransitionMask | None = None) -> float:
    trans, begin = _masked_params(lattice, mask)
    alpha = _forward(lattice.emissions, trans, begin)
    log_z = float(_logsumexp(alpha[-1] + lattice.end, axis=0))
    if log_z == NEG_INF:
        raise AllPathsMasked("no label path survives the transition mask")
    return log_z


def _marginals(lattice: Lattice, mask: TransitionMask | None):
    em = lattice.emissions
    trans, begin = _masked_params(lattice, mask)
    alpha = _forward(em, trans, begin)
    log_z = float(_logsumexp(alpha[-1] + lattice.end, axis=0))
    if log_z == NEG_INF:
        raise AllPathsMasked("no label path survives the transition mask")
    beta = _backward(em, trans, lattice.end)
    unary = np.exp(alpha + beta - log_z)
    pairwise = np.exp(
        alpha[:-1, :, None] + trans[None, :, :] + (em[1:] + beta[1:])[:, None, :] - log_z
    )
    return unary, pairwise, log_z


def posterior_marginals(lattice: Lattice, mask: TransitionMask | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Unary ``(n, L)`` and pairwise ``(n-1, L, L)`` posterior marginals."""
    unary, pairwise, _ = _marginals(lattice, mask)
    return unary, pairwise


def path_score(lattice: Lattice, path: Sequence[int]) -> float:
    em = lattice.emissions
    score = lattice.begin[path[0]] + lattice.end[path[-1]]
    score += sum(em[t, y] for t, y in enumerate(path))
    score += sum(lattice.transitions[a, b] for a, b in zip(path[:-1], path[1:]))
    return float(score)


def viterbi_decode(lattice: Lattice, mask: TransitionMask | None = None) -> tuple[list[int], float]:
    """Best label path and its score. Ties go to the lower label index."""
    em = lattice.emissions
    trans, begin = _masked_params(lattice, mask)
    n = len(em)
    delta = begin + em[0]
    back = np.zeros((n, em.shape[1]), dtype=np.int64)
    for t in range(1, n):
        cand = delta[:, None] + trans
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(em.shape[1])] + em[t]
    final = delta + lattice.end
    best = int(np.argmax(final))
    score = float(final[best])
    if score == NEG_INF:
        raise AllPathsMasked("no label path survives the transition mask")
    path = [best]
    for t in range(n - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    return path[::-1], score


# ---------------------------------------------------------------- model


@dataclass
class CrfModel:
    scheme: LabelScheme
    index: FeatureIndex
    feature_config: FeatureConfig
    gazetteer: Gazetteer
    unary: np.ndarray  # (n_features, L)
    transitions: np.ndarray
    begin: np.ndarray
    end: np.ndarray

    @classmethod
    def zeros(cls, scheme, index, feature_config=FeatureConfig(), gazetteer=None) -> CrfModel:
        L = len(scheme)
        return cls(
            scheme, index, feature_config, gazetteer if gazetteer is not None else Gazetteer(),
            np.zeros((len(index), L)), np.zeros((L, L)), np.zeros(L), np.zeros(L),
        )

    def params(self) -> dict[str, np.ndarray]:
        return {"unary": self.unary, "transitions": self.transitions, "begin": self.begin, "end": self.end}

    def featurize(self, words) -> list[np.ndarray]:
        return featurize(words, self.index, self.feature_config, self.gazetteer)

    def tag(self, words: Sequence[str], constrain: bool = True) -> list[str]:
        return tag_words(self, words, constrain)


@dataclass
class CrfGradient:
    unary: np.ndarray
    transitions: np.ndarray
    begin: np.ndarray
    end: np.ndarray

    def params(self) -> dict[str, np.ndarray]:
        return {"unary": self.unary, "transitions": self.transitions, "begin": self.begin, "end": self.end}


def _flatten(features: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    ids = np.concatenate([np.asarray(f, dtype=np.int64) for f in features]) if len(features) else np.zeros(0, np.int64)
    pos = np.repeat(np.arange(len(features)), [len(f) for f in features])
    return ids, pos


def score_lattice(features: Sequence[np.ndarray], model: CrfModel) -> Lattice:
    """Emission ``[t, y]`` is the sum of ``unary[f, y]`` over features firing at ``t``."""
    ids, pos = _flatten(features)
    if ids.size and (ids.min() < 0 or ids.max() >= model.unary.shape[0]):
        raise ValueError("feature id outside the model's index")
    em = np.zeros((len(features), model.unary.shape[1]))
    np.add.at(em, pos, model.unary[ids])
    return Lattice(em, model.transitions, model.begin, model.end)


def sequence_nll(lattice: Lattice, gold: Sequence[int], mask: TransitionMask | None = None):
    """NLL of ``gold`` and its gradient w.r.t. emissions, transitions, begin, end."""
    unary, pairwise, log_z = _marginals(lattice, mask)
    nll = log_z - path_score(lattice, gold)
    n, L = lattice.emissions.shape
    g_em = unary.copy()
    g_em[np.arange(n), gold] -= 1.0
    g_trans = pairwise.sum(axis=0)
    np.subtract.at(g_trans, (np.asarray(gold[:-1], dtype=np.int64), np.asarray(gold[1:], dtype=np.int64)), 1.0)
    g_begin = unary[0].copy()
    g_begin[gold[0]] -= 1.0
    g_end = unary[-1].copy()
    g_end[gold[-1]] -= 1.0
    return nll, g_em, g_trans, g_begin, g_end


def nll_and_gradient(
    model: CrfModel,
    batch: Sequence[tuple[Sequence[np.ndarray], Sequence[int]]],
    wd: float,
    mask: TransitionMask | None = None,
) -> tuple[float, CrfGradient]:
    """Summed NLL plus ``wd/2 * |unary|^2``; transitions are not decayed."""
    grad = CrfGradient(
        wd * model.unary, np.zeros_like(model.transitions), np.zeros_like(model.begin), np.zeros_like(model.end)
    )
    loss = 0.5 * wd * float(np.sum(model.unary ** 2))
    for features, gold in batch:
        lat = score_lattice(features, model)
        nll, g_em, g_trans, g_begin, g_end = sequence_nll(lat, list(gold), mask)
        loss += nll
        ids, pos = _flatten(features)
        np.add.at(grad.unary, ids, g_em[pos])
        grad.transitions += g_trans
        grad.begin += g_begin
        grad.end += g_end
    return loss, grad


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    weight_decay: float = 0.005
    epochs: int = 3
    seed: int = 42
    shuffle: bool = True
    batch_size: int = 1

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning rate must be >= 0")
        if not self.weight_decay >= 0:
            raise ValueError("weight decay must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


def train(
    model: CrfModel,
    data: Sequence[tuple[Sequence[np.ndarray], Sequence[int]]],
    config: TrainConfig = TrainConfig(),
    mask: TransitionMask | None = None,
) -> tuple[CrfModel, list[float]]:
    """AdaGrad on the regularized NLL; returns a trained copy and per-epoch losses."""
    model = copy.deepcopy(model)

    def objective(batch, wd):
        loss, grad = nll_and_gradient(model, batch, wd, mask)
        return loss, grad.params()

    trace = minibatch_adagrad(model.params(), data, objective, config)
    return model, trace


# ---------------------------------------------------------------- end-to-end helpers


def prepare(model: CrfModel, docs: Sequence[Document]) -> list[tuple[list[np.ndarray], list[int]]]:
    return [
        (model.featurize(sent.words), model.scheme.encode(sent.tags("gold")))
        for doc in docs
        for sent in doc.sentences
    ]


def fit_crf(
    train_docs: Sequence[Document],
    scheme: LabelScheme,
    feature_config: FeatureConfig = FeatureConfig(),
    config: TrainConfig = TrainConfig(),
    extra_gazetteer: Gazetteer | None = None,
) -> tuple[CrfModel, list[float]]:
    """Build gazetteer and feature index from ``train_docs`` and train from zero weights."""
    gaz = build_gazetteer(train_docs)
    if extra_gazetteer is not None:
        gaz = gaz.merged(extra_gazetteer)
    index = fit_index(train_docs, feature_config, gaz)
    model = CrfModel.zeros(scheme, index, feature_config, gaz)
    return train(model, prepare(model, train_docs), config)


def tag_words(model: CrfModel, words: Sequence[str], constrain: bool = True) -> list[str]:
    mask = transition_mask(model.scheme) if constrain else None
    path, _ = viterbi_decode(score_lattice(model.featurize(words), model), mask)
    return model.scheme.decode(path)


def tag_documents(model, docs: Sequence[Document], constrain: bool = True) -> list[Document]:
    """Fill ``pred_tag`` on every token; works for any model with a ``tag`` method."""
    return [
        Document(doc.id, tuple(s.with_tags(model.tag(s.words, constrain), "pred") for s in doc.sentences), doc.source_text)
        for doc in docs
    ]


def save_model(model: CrfModel, path) -> None:
    from .modelio import save_crf

    save_crf(model, path)


def load_model(path) -> CrfModel:
    from .modelio import load_crf

    return load_crf(path)
