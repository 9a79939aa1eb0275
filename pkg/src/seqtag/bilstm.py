"""Toy-scale BiLSTM-CRF with hand-written backpropagation.

Word embeddings feed a forward and a backward LSTM; the concatenated hidden
states are projected to label scores, which become the emissions of a
linear-chain CRF lattice shared with :mod:`seqtag.crf`.
"""
from __future__ import annotations

import copy
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .corpus import Document, LabelScheme
from .crf import Lattice, TrainConfig, TransitionMask, sequence_nll, transition_mask, viterbi_decode
from .errors import NonFiniteLoss
from .modelio import BILSTM_MAGIC, read_container, write_container
from .optim import minibatch_adagrad

UNK = "<UNK>"
MAX_DIM = 128


@dataclass(frozen=True)
class BiLstmConfig:
    min_freq: int = 1
    emb_dim: int = 16
    hidden_dim: int = 16
    seed: int = 42

    def __post_init__(self):
        for name in ("emb_dim", "hidden_dim"):
            value = getattr(self, name)
            if not 1 <= value <= MAX_DIM:
                raise ValueError(f"{name} must be in [1, {MAX_DIM}], got {value}")
        if self.min_freq < 1:
            raise ValueError("min_freq must be >= 1")


@dataclass
class LstmParams:
    Wx: np.ndarray  # (4h, d), gate order i, f, g, o
    Wh: np.ndarray  # (4h, h)
    b: np.ndarray  # (4h,)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def recurrent_step(params: LstmParams, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray):
    """One LSTM update; returns ``(hidden, cell)``."""
    h = h_prev.shape[0]
    z = params.Wx @ x + params.Wh @ h_prev + params.b
    i = _sigmoid(z[:h])
    f = _sigmoid(z[h:2 * h])
    g = np.tanh(z[2 * h:3 * h])
    o = _sigmoid(z[3 * h:])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def _run_lstm(params: LstmParams, xs: np.ndarray):
    n = xs.shape[0]
    h = params.Wh.shape[1]
    hs = np.zeros((n + 1, h))  # hs[0] is the initial state
    cs = np.zeros((n + 1, h))
    gates = np.zeros((n, 4 * h))
    for t in range(n):
        z = params.Wx @ xs[t] + params.Wh @ hs[t] + params.b
        act = np.concatenate([_sigmoid(z[:2 * h]), np.tanh(z[2 * h:3 * h]), _sigmoid(z[3 * h:])])
        i, f, g, o = act[:h], act[h:2 * h], act[2 * h:3 * h], act[3 * h:]
        cs[t + 1] = f * cs[t] + i * g
        hs[t + 1] = o * np.tanh(cs[t + 1])
        gates[t] = act
    return hs, cs, gates


def _backprop_lstm(params: LstmParams, xs, hs, cs, gates, d_out):
    """Gradients of the LSTM parameters and inputs given ``d_out = dL/dh_t`` (t = 1..n)."""
    n = xs.shape[0]
    h = params.Wh.shape[1]
    dWx = np.zeros_like(params.Wx)
    dWh = np.zeros_like(params.Wh)
    db = np.zeros_like(params.b)
    dxs = np.zeros_like(xs)
    dh_next = np.zeros(h)
    dc_next = np.zeros(h)
    for t in range(n - 1, -1, -1):
        i, f, g, o = gates[t, :h], gates[t, h:2 * h], gates[t, 2 * h:3 * h], gates[t, 3 * h:]
        tc = np.tanh(cs[t + 1])
        dh = d_out[t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * cs[t] * f * (1.0 - f),
            dc * i * (1.0 - g * g),
            dh * tc * o * (1.0 - o),
        ])
        dWx += np.outer(dz, xs[t])
        dWh += np.outer(dz, hs[t])
        db += dz
        dxs[t] = params.Wx.T @ dz
        dh_next = params.Wh.T @ dz
        dc_next = dc * f
    return dWx, dWh, db, dxs


PARAM_NAMES = (
    "emb", "fwd_Wx", "fwd_Wh", "fwd_b", "bwd_Wx", "bwd_Wh", "bwd_b",
    "proj", "proj_b", "transitions", "begin", "end",
)


@dataclass
class BiLstmCrfModel:
    scheme: LabelScheme
    vocab: dict  # word -> id, UNK is 0
    config: BiLstmConfig
    params: dict  # name -> ndarray, keys PARAM_NAMES

    def lstm(self, direction: str) -> LstmParams:
        p = self.params
        return LstmParams(p[f"{direction}_Wx"], p[f"{direction}_Wh"], p[f"{direction}_b"])

    def word_ids(self, words: Sequence[str]) -> np.ndarray:
        return np.array([self.vocab.get(w, 0) for w in words], dtype=np.int64)

    def tag(self, words: Sequence[str], constrain: bool = True) -> list[str]:
        return decode_bilstm(self, words, transition_mask(self.scheme) if constrain else None)


def build_vocab(docs: Sequence[Document], min_freq: int = 1) -> dict[str, int]:
    counts = Counter(w for d in docs for s in d.sentences for w in s.words)
    vocab = {UNK: 0}
    for d in docs:
        for s in d.sentences:
            for w in s.words:
                if counts[w] >= min_freq and w not in vocab:
                    vocab[w] = len(vocab)
    return vocab


def init_bilstm(scheme: LabelScheme, vocab: dict[str, int], config: BiLstmConfig = BiLstmConfig()) -> BiLstmCrfModel:
    """Uniform(-0.1, 0.1) init from ``config.seed``; forget-gate biases start at 1."""
    rng = np.random.default_rng(config.seed)
    V, d, h, L = len(vocab), config.emb_dim, config.hidden_dim, len(scheme)
    shapes = {
        "emb": (V, d),
        "fwd_Wx": (4 * h, d), "fwd_Wh": (4 * h, h), "fwd_b": (4 * h,),
        "bwd_Wx": (4 * h, d), "bwd_Wh": (4 * h, h), "bwd_b": (4 * h,),
        "proj": (2 * h, L), "proj_b": (L,),
        "transitions": (L, L), "begin": (L,), "end": (L,),
    }
    params = {name: rng.uniform(-0.1, 0.1, shapes[name]) for name in PARAM_NAMES}
    params["fwd_b"][h:2 * h] = 1.0
    params["bwd_b"][h:2 * h] = 1.0
    return BiLstmCrfModel(scheme, dict(vocab), config, params)


def _encode(model: BiLstmCrfModel, word_ids: np.ndarray):
    p = model.params
    xs = p["emb"][word_ids]
    fwd = _run_lstm(model.lstm("fwd"), xs)
    bwd = _run_lstm(model.lstm("bwd"), xs[::-1])
    H = np.concatenate([fwd[0][1:], bwd[0][1:][::-1]], axis=1)
    return H @ p["proj"] + p["proj_b"], (xs, fwd, bwd, H)


def encode(model: BiLstmCrfModel, word_ids: Sequence[int]) -> np.ndarray:
    """Per-position label scores, shape ``(n, L)``."""
    word_ids = np.asarray(word_ids, dtype=np.int64)
    if word_ids.size == 0:
        raise ValueError("cannot encode an empty sentence")
    return _encode(model, word_ids)[0]


def _lattice(model: BiLstmCrfModel, emissions: np.ndarray) -> Lattice:
    p = model.params
    return Lattice(emissions, p["transitions"], p["begin"], p["end"])


def nll_and_gradient_bilstm(
    model: BiLstmCrfModel,
    batch: Sequence[tuple[Sequence[int], Sequence[int]]],
    wd: float,
    mask: TransitionMask | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Summed CRF NLL over ``(word_ids, gold_ids)`` pairs plus ``wd/2`` times the
    squared norm of every parameter block, with gradients for every block."""
    p = model.params
    h = model.config.hidden_dim
    grads = {k: wd * v for k, v in p.items()}
    loss = 0.5 * wd * sum(float(np.sum(v * v)) for v in p.values())
    for word_ids, gold in batch:
        word_ids = np.asarray(word_ids, dtype=np.int64)
        em, (xs, fwd, bwd, H) = _encode(model, word_ids)
        nll, g_em, g_trans, g_begin, g_end = sequence_nll(_lattice(model, em), list(gold), mask)
        loss += nll
        grads["transitions"] += g_trans
        grads["begin"] += g_begin
        grads["end"] += g_end
        grads["proj"] += H.T @ g_em
        grads["proj_b"] += g_em.sum(axis=0)
        dH = g_em @ p["proj"].T
        dWx, dWh, db, dx_f = _backprop_lstm(model.lstm("fwd"), xs, *fwd, dH[:, :h])
        grads["fwd_Wx"] += dWx
        grads["fwd_Wh"] += dWh
        grads["fwd_b"] += db
        dWx, dWh, db, dx_b = _backprop_lstm(model.lstm("bwd"), xs[::-1], *bwd, dH[::-1, h:])
        grads["bwd_Wx"] += dWx
        grads["bwd_Wh"] += dWh
        grads["bwd_b"] += db
        np.add.at(grads["emb"], word_ids, dx_f + dx_b[::-1])
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"non-finite BiLSTM-CRF loss {loss}")
    return loss, grads


def prepare_bilstm(model: BiLstmCrfModel, docs: Sequence[Document]) -> list[tuple[np.ndarray, list[int]]]:
    return [
        (model.word_ids(s.words), model.scheme.encode(s.tags("gold")))
        for d in docs
        for s in d.sentences
    ]


def train_bilstm(
    model: BiLstmCrfModel,
    data: Sequence[tuple[Sequence[int], Sequence[int]]],
    config: TrainConfig = TrainConfig(learning_rate=0.05),
    mask: TransitionMask | None = None,
) -> tuple[BiLstmCrfModel, list[float]]:
    model = copy.deepcopy(model)

    def objective(batch, wd):
        return nll_and_gradient_bilstm(model, batch, wd, mask)

    trace = minibatch_adagrad(model.params, data, objective, config)
    return model, trace


def fit_bilstm(
    train_docs: Sequence[Document],
    scheme: LabelScheme,
    bilstm_config: BiLstmConfig = BiLstmConfig(),
    config: TrainConfig = TrainConfig(learning_rate=0.05),
) -> tuple[BiLstmCrfModel, list[float]]:
    model = init_bilstm(scheme, build_vocab(train_docs, bilstm_config.min_freq), bilstm_config)
    return train_bilstm(model, prepare_bilstm(model, train_docs), config)


def decode_bilstm(model: BiLstmCrfModel, words: Sequence[str], mask: TransitionMask | None = None) -> list[str]:
    path, _ = viterbi_decode(_lattice(model, encode(model, model.word_ids(words))), mask)
    return model.scheme.decode(path)


def save_bilstm(model: BiLstmCrfModel, path) -> None:
    vocab = sorted(model.vocab, key=model.vocab.__getitem__)
    meta = {
        "kind": "bilstm",
        "format_version": 1,
        "entity_types": list(model.scheme.entity_types),
        "config": asdict(model.config),
        "vocab": vocab,
    }
    write_container(path, BILSTM_MAGIC, meta, {k: model.params[k] for k in PARAM_NAMES})


def load_bilstm(path) -> BiLstmCrfModel:
    from .errors import CorruptFile

    header, arrays = read_container(path, BILSTM_MAGIC)
    try:
        scheme = LabelScheme(tuple(header["entity_types"]))
        vocab = {w: i for i, w in enumerate(header["vocab"])}
        config = BiLstmConfig(**header["config"])
        params = {k: arrays[k] for k in PARAM_NAMES}
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"{path}: inconsistent model ({exc})") from None
    ref = init_bilstm(scheme, vocab, config).params
    if any(ref[k].shape != params[k].shape for k in PARAM_NAMES):
        raise CorruptFile(f"{path}: parameter shapes do not match header")
    return BiLstmCrfModel(scheme, vocab, config, params)
