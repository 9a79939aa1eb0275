import pytest
from hypothesis import given, strategies as st

from seqtag.corpus import DISPLAY_ALIASES, WNUT_SCHEME, Document, LabelScheme, Sentence, Token, tags_to_spans
from seqtag.errors import SchemeMismatch, TokenizationMismatch
from seqtag.evaluation import (
    EvalReport,
    Score,
    compare_reports,
    evaluate,
    format_delta,
    render_comparison,
    render_report,
    render_tsv,
)

SMALL = LabelScheme(("A", "B"))
tag_st = st.sampled_from(SMALL.tags)


def _doc(gold, pred=None, doc_id="d"):
    pred = pred if pred is not None else [None] * len(gold)
    return Document(doc_id, (Sentence(tuple(Token(f"w{i}", g, p) for i, (g, p) in enumerate(zip(gold, pred)))),))


def _score(gold, pred, scheme=SMALL):
    return evaluate([_doc(gold)], [_doc(gold, pred)], scheme)


def test_identical_tags_score_one():
    r = _score(["B-A", "I-A", "O", "B-B"], ["B-A", "I-A", "O", "B-B"])
    assert (r.micro.precision, r.micro.recall, r.micro.f1) == (1.0, 1.0, 1.0)


def test_partial_overlap_counts_as_miss():
    r = _score(["B-A", "I-A", "O"], ["B-A", "O", "O"])
    assert r.micro.tp == 0 and r.micro.f1 == 0.0
    r = _score(["B-A", "O"], ["B-B", "O"])
    assert r.micro.tp == 0


def test_three_gold_four_pred_two_correct():
    gold = ["B-A", "O", "B-B", "I-B", "O", "B-A", "O"]
    pred = ["B-A", "O", "B-B", "I-B", "B-A", "O", "B-B"]
    r = _score(gold, pred)
    assert (r.micro.tp, r.micro.pred, r.micro.gold) == (2, 4, 3)
    assert r.micro.precision == 0.5
    assert r.micro.recall == pytest.approx(2 / 3)
    assert r.micro.f1 == pytest.approx(4 / 7)


def test_empty_side_scores_zero():
    r = _score(["O", "O"], ["O", "O"])
    assert r.micro == Score(0, 0, 0, 0.0, 0.0, 0.0)
    assert "avg" in render_report(r)


def test_predictions_from_gold_column_and_doc_matching():
    gold = [_doc(["B-A", "O"], doc_id="x"), _doc(["O", "B-B"], doc_id="y")]
    pred = [_doc(["O", "B-B"], doc_id="y"), _doc(["B-A", "O"], doc_id="x")]  # tags read from gold_tag
    assert evaluate(gold, pred, SMALL).micro.f1 == 1.0


def test_mismatches_raise():
    with pytest.raises(TokenizationMismatch):
        evaluate([_doc(["O"])], [_doc(["O", "O"])], SMALL)
    with pytest.raises(TokenizationMismatch):
        evaluate([_doc(["O"], doc_id="a")], [_doc(["O"], doc_id="b")], SMALL)
    with pytest.raises(TokenizationMismatch):
        evaluate([_doc(["O"]), _doc(["O"])], [_doc(["O"])], SMALL)


def _set_oracle(gold_seqs, pred_seqs):
    gk = {(s, e.start, e.end, e.type_name) for s, g in enumerate(gold_seqs) for e in tags_to_spans(g)}
    pk = {(s, e.start, e.end, e.type_name) for s, p in enumerate(pred_seqs) for e in tags_to_spans(p)}
    return len(gk & pk), len(pk), len(gk)


pair_st = st.integers(1, 8).flatmap(
    lambda n: st.tuples(st.lists(tag_st, min_size=n, max_size=n), st.lists(tag_st, min_size=n, max_size=n))
)


def _docs(pairs):
    gold = Document("d", tuple(Sentence(tuple(Token("w", g) for g in gs)) for gs, _ in pairs))
    pred = Document("d", tuple(Sentence(tuple(Token("w", p) for p in ps)) for _, ps in pairs))
    return gold, pred


@given(st.lists(pair_st, min_size=1, max_size=4))
def test_counts_match_set_oracle(pairs):
    gold, pred = _docs(pairs)
    r = evaluate([gold], [pred], SMALL)
    assert (r.micro.tp, r.micro.pred, r.micro.gold) == _set_oracle([g for g, _ in pairs], [p for _, p in pairs])
    assert sum(s.tp for s in r.per_type.values()) == r.micro.tp
    assert sum(s.gold for s in r.per_type.values()) == r.micro.gold


@given(st.lists(pair_st, min_size=1, max_size=4))
def test_swapping_gold_and_pred_swaps_p_and_r(pairs):
    gold, pred = _docs(pairs)
    a = evaluate([gold], [pred], SMALL).micro
    b = evaluate([pred], [gold], SMALL).micro
    assert a.precision == pytest.approx(b.recall) and a.recall == pytest.approx(b.precision)
    assert a.f1 == pytest.approx(b.f1)


@given(st.lists(pair_st, min_size=2, max_size=4), st.randoms())
def test_document_order_is_irrelevant(pairs, rnd):
    docs = [Document(f"d{i}", (_docs([p])[0].sentences[0],)) for i, p in enumerate(pairs)]
    preds = [Document(f"d{i}", (_docs([p])[1].sentences[0],)) for i, p in enumerate(pairs)]
    a = evaluate(docs, preds, SMALL)
    rnd.shuffle(preds)
    b = evaluate(docs, preds, SMALL)
    assert a.micro == b.micro and a.per_type == b.per_type


def _report_with_micro(p, r, f, types=("A",)):
    sc = Score(0, 0, 0, p, r, f)
    return EvalReport(types, {t: sc for t in types}, sc)


def test_avg_row_rendering():
    text = render_report(_report_with_micro(0.7549, 0.7332, 0.7439))
    last = text.rstrip("\n").splitlines()[-1]
    assert last.split() == ["avg", "0.7549", "0.7332", "0.7439"]


def test_report_uses_scheme_order_and_aliases():
    gold = _doc(["B-Measure-Type", "B-Generic-Measure", "B-Action"])
    r = evaluate([gold], [gold], WNUT_SCHEME, DISPLAY_ALIASES)
    rows = [line.split()[0] for line in render_report(r).splitlines()[1:]]
    assert rows[0] == "Method" and rows[-1] == "avg" and len(rows) == 19
    assert "Type" in rows and "Measure" in rows and "Measure-Type" not in rows
    assert render_tsv(r).splitlines()[1].startswith("Method\t0\t0\t0\t")


def test_deltas():
    a = _report_with_micro(0.7, 0.7, 0.7)
    assert set(format_delta(v) for v in compare_reports(a, a)["avg"]) == {"+0.0000"}
    b = _report_with_micro(0.7, 0.7, 0.7028)
    d = compare_reports(a, b)["avg"]
    assert format_delta(d[2], percent=True) == "+0.28%"
    assert format_delta(d[2]) == "+0.0028"
    assert format_delta(-0.00001) == "+0.0000"
    assert format_delta(-0.05, percent=True) == "-5.00%"
    assert "+0.28%" in render_comparison({"avg": d}, percent=True)
    with pytest.raises(SchemeMismatch):
        compare_reports(a, _report_with_micro(0.7, 0.7, 0.7, types=("B",)))
