"""Entity-level exact-match scoring and report rendering."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import WNUT_SCHEME, Document, LabelScheme, tags_to_spans, validate_bio
from .errors import SchemeMismatch, TokenizationMismatch, UnknownTag


@dataclass(frozen=True)
class Score:
    tp: int
    pred: int
    gold: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, pred: int, gold: int) -> Score:
        p = tp / pred if pred else 0.0
        r = tp / gold if gold else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(tp, pred, gold, p, r, f)


@dataclass
class EvalReport:
    types: tuple[str, ...]
    per_type: dict[str, Score]
    micro: Score
    aliases: Mapping[str, str] = field(default_factory=dict)
    repaired: int = 0  # predicted tags rewritten by BIO repair before scoring

    def display_name(self, type_name: str) -> str:
        return self.aliases.get(type_name, type_name)


def _pred_tags(sent) -> list[str]:
    # Predicted files parsed from CoNLL carry their tags in the gold column.
    return [t.pred_tag if t.pred_tag is not None else t.gold_tag for t in sent.tokens]


def _entity_keys(doc_id, s, tags, types):
    keys = set()
    for e in tags_to_spans(tags, strict=False, sent_index=s):
        if e.type_name not in types:
            raise UnknownTag(f"B-{e.type_name}")
        keys.add((doc_id, s, e.start, e.end, e.type_name))
    return keys


def evaluate(
    gold_docs: Sequence[Document],
    pred_docs: Sequence[Document],
    scheme: LabelScheme = WNUT_SCHEME,
    aliases: Mapping[str, str] | None = None,
) -> EvalReport:
    """Score predictions against gold; documents are matched by id.

    An entity is correct iff document, sentence, start, end and type all match.
    Predicted tags are read from ``pred_tag``, falling back to ``gold_tag``.
    """
    gold_by_id = {d.id: d for d in gold_docs}
    pred_by_id = {d.id: d for d in pred_docs}
    if len(gold_by_id) != len(gold_docs) or len(pred_by_id) != len(pred_docs):
        raise TokenizationMismatch("duplicate document ids")
    if gold_by_id.keys() != pred_by_id.keys():
        missing = sorted(gold_by_id.keys() ^ pred_by_id.keys())
        raise TokenizationMismatch(f"document sets differ: {missing[:5]}")

    types = set(scheme.entity_types)
    gold_keys, pred_keys = set(), set()
    repaired = 0
    for doc_id in sorted(gold_by_id):
        g, p = gold_by_id[doc_id], pred_by_id[doc_id]
        if [len(s) for s in g.sentences] != [len(s) for s in p.sentences]:
            raise TokenizationMismatch(f"{doc_id}: sentence lengths differ")
        for s, (gs, ps) in enumerate(zip(g.sentences, p.sentences)):
            gtags, ptags = gs.tags("gold"), _pred_tags(ps)
            if None in gtags or None in ptags:
                raise TokenizationMismatch(f"{doc_id}: sentence {s} has untagged tokens")
            repaired += len(validate_bio(ptags))
            gold_keys |= _entity_keys(doc_id, s, gtags, types)
            pred_keys |= _entity_keys(doc_id, s, ptags, types)

    hits = gold_keys & pred_keys
    per_type = {}
    for t in scheme.entity_types:
        per_type[t] = Score.from_counts(
            sum(k[4] == t for k in hits), sum(k[4] == t for k in pred_keys), sum(k[4] == t for k in gold_keys)
        )
    micro = Score.from_counts(len(hits), len(pred_keys), len(gold_keys))
    return EvalReport(tuple(scheme.entity_types), per_type, micro, dict(aliases or {}), repaired)


def render_report(report: EvalReport) -> str:
    """Fixed-width table: one row per type in scheme order, then ``avg``."""
    names = [report.display_name(t) for t in report.types]
    width = max([len(n) for n in names] + [len("avg")]) + 2
    lines = [f"{'':<{width}}{'precision':>10}{'recall':>10}{'F1':>10}"]
    rows = [(n, report.per_type[t]) for n, t in zip(names, report.types)] + [("avg", report.micro)]
    for name, sc in rows:
        lines.append(f"{name:<{width}}{sc.precision:>10.4f}{sc.recall:>10.4f}{sc.f1:>10.4f}")
    return "\n".join(lines) + "\n"


def render_tsv(report: EvalReport) -> str:
    """Machine-readable ``type tp pred gold P R F1`` lines."""
    lines = ["type\ttp\tpred\tgold\tP\tR\tF1"]
    rows = [(t, report.per_type[t]) for t in report.types] + [("avg", report.micro)]
    for name, sc in rows:
        lines.append(f"{name}\t{sc.tp}\t{sc.pred}\t{sc.gold}\t{sc.precision:.4f}\t{sc.recall:.4f}\t{sc.f1:.4f}")
    return "\n".join(lines) + "\n"


Delta = tuple[float, float, float]


def compare_reports(a: EvalReport, b: EvalReport) -> dict[str, Delta]:
    """Signed ``b - a`` change in (precision, recall, F1) per type and for ``avg``."""
    if a.types != b.types:
        raise SchemeMismatch("reports cover different entity types")
    out = {}
    for name, sa, sb in [(t, a.per_type[t], b.per_type[t]) for t in a.types] + [("avg", a.micro, b.micro)]:
        out[name] = (sb.precision - sa.precision, sb.recall - sa.recall, sb.f1 - sa.f1)
    return out


def format_delta(value: float, percent: bool = False) -> str:
    """``+0.0028`` or, as percentage points, ``+0.28%``; never prints ``-0``."""
    if percent:
        return f"{round(value * 100, 2) + 0.0:+.2f}%"
    return f"{round(value, 4) + 0.0:+.4f}"


def render_comparison(deltas: Mapping[str, Delta], percent: bool = False, aliases: Mapping[str, str] | None = None) -> str:
    aliases = aliases or {}
    width = max([len(aliases.get(n, n)) for n in deltas] + [3]) + 2
    lines = [f"{'':<{width}}{'precision':>10}{'recall':>10}{'F1':>10}"]
    for name, d in deltas.items():
        cells = "".join(f"{format_delta(v, percent):>10}" for v in d)
        lines.append(f"{aliases.get(name, name):<{width}}{cells}")
    return "\n".join(lines) + "\n"
