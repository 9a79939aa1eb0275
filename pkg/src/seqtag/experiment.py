"""Model-kind dispatch for training and the (learning rate x weight decay) sweep."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

from .bilstm import BiLstmConfig, fit_bilstm
from .corpus import Document, LabelScheme, lowercase_corpus
from .crf import TrainConfig, fit_crf, tag_documents
from .evaluation import Score, evaluate
from .features import FeatureConfig, Gazetteer

log = logging.getLogger(__name__)

DEFAULT_LR = {"crf": 0.1, "bilstm": 0.05}


@dataclass(frozen=True)
class ModelSpec:
    """Everything needed to train one model besides the data."""

    kind: str = "crf"
    train: TrainConfig = TrainConfig()
    features: FeatureConfig = FeatureConfig()
    bilstm: BiLstmConfig = BiLstmConfig()
    lowercase: bool = False
    constrain: bool = True

    def __post_init__(self):
        if self.kind not in DEFAULT_LR:
            raise ValueError(f"unknown model kind {self.kind!r}")


def train_model(spec: ModelSpec, train_docs: Sequence[Document], scheme: LabelScheme, gazetteer: Gazetteer | None = None):
    if spec.lowercase:
        train_docs = lowercase_corpus(train_docs)
    if spec.kind == "crf":
        return fit_crf(train_docs, scheme, spec.features, spec.train, gazetteer)
    return fit_bilstm(train_docs, scheme, replace(spec.bilstm, seed=spec.train.seed), spec.train)


def predict(model, docs: Sequence[Document], lowercase: bool = False, constrain: bool = True) -> list[Document]:
    """Tag ``docs``; with ``lowercase`` the model sees lowercased text but output keeps original surfaces."""
    seen = lowercase_corpus(docs) if lowercase else docs
    tagged = tag_documents(model, seen, constrain)
    if not lowercase:
        return tagged
    return [
        Document(d.id, tuple(s.with_tags(t.tags("pred"), "pred") for s, t in zip(d.sentences, td.sentences)), d.source_text)
        for d, td in zip(docs, tagged)
    ]


@dataclass
class SweepGrid:
    learning_rates: tuple[float, ...]
    weight_decays: tuple[float, ...]
    results: dict = field(default_factory=dict)  # (lr, wd) -> Score, or None for a failed cell

    def __post_init__(self):
        if not self.learning_rates or not self.weight_decays:
            raise ValueError("sweep grid must be non-empty")

    def cells(self) -> list[tuple[float, float]]:
        return [(lr, wd) for wd in self.weight_decays for lr in self.learning_rates]

    def record(self, lr: float, wd: float, score: Score | None) -> None:
        if (lr, wd) in self.results:
            raise ValueError(f"cell lr={lr} wd={wd} already filled")
        self.results[(lr, wd)] = score

    def best(self) -> tuple[float, float, Score] | None:
        """Highest micro F1; ties go to the first cell in row-major (wd, lr) order."""
        best = None
        for lr, wd in self.cells():
            sc = self.results.get((lr, wd))
            if sc is not None and (best is None or sc.f1 > best[2].f1):
                best = (lr, wd, sc)
        return best

    @property
    def failures(self) -> int:
        return sum(v is None for v in self.results.values())


def _run_cell(args):
    spec, train_docs, dev_docs, scheme, gazetteer = args
    try:
        model, _ = train_model(spec, train_docs, scheme, gazetteer)
        pred = predict(model, dev_docs, spec.lowercase, spec.constrain)
        return evaluate(dev_docs, pred, scheme).micro, None
    except Exception as exc:  # a failed cell is recorded as NaN, the sweep continues
        return None, f"{type(exc).__name__}: {exc}"


def run_sweep(
    spec: ModelSpec,
    learning_rates: Sequence[float],
    weight_decays: Sequence[float],
    train_docs: Sequence[Document],
    dev_docs: Sequence[Document],
    scheme: LabelScheme,
    gazetteer: Gazetteer | None = None,
    jobs: int = 1,
) -> SweepGrid:
    """Train one fresh model per cell on ``train_docs`` and score it on ``dev_docs``."""
    grid = SweepGrid(tuple(learning_rates), tuple(weight_decays))
    tasks = [
        (replace(spec, train=replace(spec.train, learning_rate=lr, weight_decay=wd)), train_docs, dev_docs, scheme, gazetteer)
        for lr, wd in grid.cells()
    ]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            outcomes = list(pool.map(_run_cell, tasks))
    else:
        outcomes = [_run_cell(t) for t in tasks]
    for (lr, wd), (score, err) in zip(grid.cells(), outcomes):
        if err is not None:
            log.warning("sweep cell lr=%g wd=%g failed: %s", lr, wd, err)
        grid.record(lr, wd, score)
    return grid


_CORNER = "wd \\ lr"


def render_sweep(grid: SweepGrid) -> str:
    """Rows are weight decays, columns learning rates, cells dev micro F1."""
    cols = [f"{lr:g}" for lr in grid.learning_rates]
    width = max([len(c) for c in cols] + [6]) + 2
    first = max([len(f"{wd:g}") for wd in grid.weight_decays] + [len(_CORNER)]) + 2
    lines = [f"{_CORNER:<{first}}" + "".join(f"{c:>{width}}" for c in cols)]
    for wd in grid.weight_decays:
        cells = []
        for lr in grid.learning_rates:
            sc = grid.results.get((lr, wd))
            cells.append("NaN" if sc is None or math.isnan(sc.f1) else f"{sc.f1:.4f}")
        lines.append(f"{wd:<{first}g}" + "".join(f"{c:>{width}}" for c in cells))
    best = grid.best()
    if best is None:
        lines.append("best: none")
    else:
        lr, wd, sc = best
        lines.append(f"best: lr={lr:g} wd={wd:g} F1={sc.f1:.4f} P={sc.precision:.4f} R={sc.recall:.4f}")
    return "\n".join(lines) + "\n"
