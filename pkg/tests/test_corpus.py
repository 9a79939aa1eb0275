import logging
import sys
import time

import pytest
from hypothesis import given, strategies as st

from seqtag.corpus import (
    WNUT_SCHEME,
    WNUT_TYPES,
    Document,
    Entity,
    LabelScheme,
    Sentence,
    Token,
    align_brat,
    document_entities,
    generate_synthetic,
    lowercase_corpus,
    parse_brat,
    parse_conll,
    repair_bio,
    serialize_conll,
    simple_lower,
    spans_to_tags,
    tags_to_spans,
    validate_bio,
    whitespace_tokenize,
)
from seqtag.errors import (
    EmptyDocument,
    InvalidBio,
    MalformedLine,
    MisalignedSpan,
    MissingTag,
    OffsetOutOfBounds,
    OverlappingEntities,
    SpanOutOfBounds,
    SurfaceMismatch,
    UnknownTag,
)

SMALL = LabelScheme(("Action", "Reagent", "Mention", "Time"))

surfaces = st.text(
    st.characters(blacklist_categories=("Cc", "Cs", "Zs", "Zl", "Zp")), min_size=1, max_size=8
)


@st.composite
def documents(draw, scheme=WNUT_SCHEME, which="gold"):
    sents = []
    for _ in range(draw(st.integers(1, 4))):
        n = draw(st.integers(1, 6))
        toks = [
            Token(draw(surfaces), **{f"{which}_tag": draw(st.sampled_from(scheme.tags))}) for _ in range(n)
        ]
        sents.append(Sentence(tuple(toks)))
    return Document("doc", tuple(sents))


@st.composite
def span_sets(draw, scheme=SMALL, max_len=12):
    """Sorted non-overlapping entities over a sentence of random length."""
    n = draw(st.integers(0, max_len))
    cuts = sorted(draw(st.sets(st.integers(0, n), max_size=2 * n + 2)))
    entities = []
    for a, b in zip(cuts[::2], cuts[1::2]):
        if a < b:
            entities.append(Entity(draw(st.sampled_from(scheme.entity_types)), 0, a, b))
    return entities, n


# ---------------------------------------------------------------- label scheme


def test_wnut_scheme_shape():
    assert len(WNUT_TYPES) == 18
    assert len(WNUT_SCHEME) == 37
    assert WNUT_SCHEME.tag_id("O") == 0
    assert WNUT_SCHEME.decode(WNUT_SCHEME.encode(WNUT_SCHEME.tags)) == list(WNUT_SCHEME.tags)
    assert sorted(WNUT_SCHEME.index.values()) == list(range(37))
    for tag in WNUT_SCHEME.tags:
        if tag.startswith("I-"):
            assert "B-" + tag[2:] in WNUT_SCHEME


def test_scheme_rejects_unknown_tag_and_duplicates():
    with pytest.raises(UnknownTag):
        WNUT_SCHEME.tag_id("B-Protein")
    with pytest.raises(ValueError):
        LabelScheme(("A", "A"))


# ---------------------------------------------------------------- CoNLL


def test_parse_single_token():
    (doc,) = parse_conll("dissect\tB-Action\n")
    assert len(doc.sentences) == 1
    tok = doc.sentences[0].tokens[0]
    assert (tok.surface, tok.gold_tag) == ("dissect", "B-Action")


@pytest.mark.parametrize("text", ["", "\n\n", "\ufeff"])
def test_parse_empty_is_error(text):
    with pytest.raises(EmptyDocument):
        parse_conll(text)


def test_sentence_lengths_and_roundtrip():
    text = "Add\tB-Action\n1.0\tB-Amount\nmL\tI-Amount\n\nMix\tB-Action\nwell\tO\n"
    (doc,) = parse_conll(text)
    assert [len(s) for s in doc.sentences] == [3, 2]
    assert serialize_conll([doc]) == text


def test_parse_tolerates_crlf_bom_and_extra_blank_lines():
    (doc,) = parse_conll("\ufeffa\tO\r\n\r\n\r\nb\tB-Time\r\n")
    assert [s.words for s in doc.sentences] == [["a"], ["b"]]


def test_parse_skips_header_line():
    (doc,) = parse_conll("# seqtag 0.1.0 seed=1 config=abc\nx\tO\n")
    assert doc.sentences[0].words == ["x"]


def test_malformed_and_unknown_report_line_numbers():
    with pytest.raises(MalformedLine) as exc:
        parse_conll("a\tO\nb\tO\textra\n")
    assert exc.value.line_no == 2
    with pytest.raises(MalformedLine):
        parse_conll("lonely\n")
    with pytest.raises(UnknownTag) as exc:
        parse_conll("a\tO\n\nb\tB-Protein\n")
    assert exc.value.line_no == 3


def test_tags_optional_for_tagging_input():
    (doc,) = parse_conll("Add\nwater\n", tags_optional=True)
    assert doc.sentences[0].tags() == [None, None]


def test_serialize_pred_only_and_missing_tag():
    doc = Document("d", (Sentence((Token("Add", pred_tag="B-Action"), Token("it", pred_tag="B-Mention"))),))
    text = serialize_conll([doc], which="pred")
    assert text == "Add\tB-Action\nit\tB-Mention\n"
    (back,) = parse_conll(text)
    assert back.sentences[0].tags() == ["B-Action", "B-Mention"]
    with pytest.raises(MissingTag):
        serialize_conll([doc], which="gold")


@given(documents())
def test_conll_roundtrip_property(doc):
    text = serialize_conll([doc])
    (back,) = parse_conll(text)
    assert back.sentences == doc.sentences
    assert serialize_conll([back]) == text


# ---------------------------------------------------------------- BIO spans


def test_tags_to_spans_basic():
    assert tags_to_spans(["B-Action", "I-Action", "O"]) == [Entity("Action", 0, 0, 2)]


def test_orphan_inside_strict_vs_repair():
    with pytest.raises(InvalidBio) as exc:
        tags_to_spans(["O", "I-Reagent"], strict=True)
    assert exc.value.position == 1
    assert tags_to_spans(["O", "I-Reagent"]) == [Entity("Reagent", 0, 1, 2)]


def test_type_switch_inside_is_invalid():
    with pytest.raises(InvalidBio) as exc:
        tags_to_spans(["B-Action", "I-Mention"], strict=True)
    assert exc.value.position == 1
    assert tags_to_spans(["B-Action", "I-Mention"]) == [Entity("Action", 0, 0, 1), Entity("Mention", 0, 1, 2)]


def test_spans_to_tags_examples():
    assert spans_to_tags([], 3) == ["O", "O", "O"]
    assert spans_to_tags([Entity("Time", 0, 0, 2)], 2) == ["B-Time", "I-Time"]
    with pytest.raises(OverlappingEntities):
        spans_to_tags([Entity("Time", 0, 0, 2), Entity("Action", 0, 1, 3)], 3)
    with pytest.raises(SpanOutOfBounds):
        spans_to_tags([Entity("Time", 0, 2, 4)], 3)
    with pytest.raises(SpanOutOfBounds):
        spans_to_tags([Entity("Time", 0, 1, 1)], 3)


@given(span_sets())
def test_spans_tags_roundtrip(case):
    entities, n = case
    tags = spans_to_tags(entities, n)
    assert tags_to_spans(tags, strict=True) == entities
    assert validate_bio(tags) == []


tag_lists = st.lists(st.sampled_from(SMALL.tags), max_size=10)


@given(tag_lists)
def test_spans_sorted_and_disjoint(tags):
    ents = tags_to_spans(tags)
    for a, b in zip(ents, ents[1:]):
        assert a.end <= b.start
    assert all(0 <= e.start < e.end <= len(tags) for e in ents)


@given(tag_lists)
def test_validate_iff_strict_succeeds(tags):
    valid = validate_bio(tags) == []
    try:
        tags_to_spans(tags, strict=True)
        strict_ok = True
    except InvalidBio:
        strict_ok = False
    assert valid == strict_ok


@given(tag_lists)
def test_repair_yields_valid_and_same_spans(tags):
    fixed = repair_bio(tags)
    assert validate_bio(fixed) == []
    assert tags_to_spans(fixed, strict=True) == tags_to_spans(tags)


def test_validate_bio_examples():
    assert validate_bio(["B-Action", "I-Action"]) == []
    assert [v.position for v in validate_bio(["I-Action"])] == [0]
    (v,) = validate_bio(["B-Action", "I-Mention"])
    assert (v.position, v.prev_tag, v.tag) == (1, "B-Action", "I-Mention")


# ---------------------------------------------------------------- casing


def test_lowercase_examples():
    doc = Document("d", (Sentence((Token("DNA", gold_tag="B-Reagent"), Token("İ", gold_tag="O"))),))
    (low,) = lowercase_corpus([doc])
    assert low.sentences[0].words == ["dna", "i"]
    assert low.sentences[0].tags() == ["B-Reagent", "O"]


@given(documents())
def test_lowercase_idempotent_and_tags_untouched(doc):
    once = lowercase_corpus([doc])
    assert lowercase_corpus(once) == once
    assert once[0].sentences[0].tags() == doc.sentences[0].tags()
    assert [len(w) for s in once[0].sentences for w in s.words] == [len(w) for s in doc.sentences for w in s.words]


def test_simple_lower_is_length_preserving_and_idempotent_everywhere():
    for cp in range(sys.maxunicode + 1):
        if 0xD800 <= cp <= 0xDFFF:
            continue
        ch = chr(cp)
        low = simple_lower(ch)
        assert len(low) == 1 and simple_lower(low) == low, hex(cp)


# ---------------------------------------------------------------- BRAT


def test_tokenizer_splits_edge_punctuation_and_keeps_offsets():
    text = "Add 1.0 mL (host culture)."
    spans = whitespace_tokenize(text)
    assert [s.surface for s in spans] == ["Add", "1.0", "mL", "(", "host", "culture", ")", "."]
    assert all(text[s.start:s.end] == s.surface for s in spans)


def test_brat_single_action():
    doc = parse_brat("dissect the tissue", "T1\tAction 0 7\tdissect\n")
    assert doc.sentences[0].tags() == ["B-Action", "O", "O"]
    assert doc.sentences[0].tokens[2].char_start == 12


def test_brat_empty_ann():
    doc = parse_brat("dissect the tissue", "")
    assert doc.sentences[0].tags() == ["O", "O", "O"]


def test_brat_multi_token_span():
    doc = parse_brat("Add host culture", "T1\tReagent 4 16\thost culture\n")
    assert doc.sentences[0].tags() == ["O", "B-Reagent", "I-Reagent"]


def test_brat_lines_are_sentences():
    txt = "Melt soft agar.\nSit RT for 5 min."
    ann = "T1\tReagent 5 14\tsoft agar\nT2\tTime 27 32\t5 min\n"
    doc = parse_brat(txt, ann)
    assert [s.tags() for s in doc.sentences] == [
        ["O", "B-Reagent", "I-Reagent", "O"],
        ["O", "O", "O", "B-Time", "I-Time", "O"],
    ]


@pytest.mark.parametrize(
    "ann, error",
    [
        ("T1\tAction 0 99\tdissect\n", OffsetOutOfBounds),
        ("T1\tAction 0 7\tDissect\n", SurfaceMismatch),
        ("T1\tAction 0 4\tdiss\n", MisalignedSpan),
        ("T1\tAction 7 8\t \n", MisalignedSpan),
        ("T1\tProtein 0 7\tdissect\n", UnknownTag),
    ],
)
def test_brat_errors(ann, error):
    with pytest.raises(error):
        parse_brat("dissect the tissue", ann)


def test_brat_cross_line_span_is_misaligned():
    with pytest.raises(MisalignedSpan):
        parse_brat("a b\nc d", "T1\tAction 2 5\tb c\n")


def test_brat_overlap_keeps_earlier_then_longer(caplog):
    txt = "Add host culture now"
    ann = "T2\tReagent 4 8\thost\nT1\tReagent 4 16\thost culture\nT3\tTime 9 20\tculture now\n"
    with caplog.at_level(logging.WARNING):
        doc, issues = align_brat(txt, ann)
    assert doc.sentences[0].tags() == ["O", "B-Reagent", "I-Reagent", "O"]
    assert sorted((i.ann_id, i.kind) for i in issues) == [("T2", "overlap"), ("T3", "overlap")]
    assert "overlapping" in caplog.text


def test_brat_ignores_relations_and_drops_discontinuous(caplog):
    ann = "T1\tAction 0 7\tdissect\nR1\tActs-on Arg1:T1 Arg2:T2\nT2\tReagent 4 7;12 18\tx\n"
    with caplog.at_level(logging.WARNING):
        doc, issues = align_brat("dissect the tissue", ann)
    assert doc.sentences[0].tags() == ["B-Action", "O", "O"]
    assert [i.kind for i in issues] == ["unsupported"]
    assert "non-entity" in caplog.text


def test_brat_malformed_t_line():
    with pytest.raises(MalformedLine):
        parse_brat("dissect", "T1\tAction 0\n")


@given(st.lists(st.sampled_from(["Add", "the", "DNA", "to", "tube", "1.0", "mL", "(", ")", "."]), min_size=1, max_size=10),
       st.data())
def test_brat_then_conll_is_bio_valid(words, data):
    txt = " ".join(words)
    spans = whitespace_tokenize(txt)
    lines = []
    for k in range(data.draw(st.integers(0, 4))):
        a = data.draw(st.integers(0, len(spans) - 1))
        b = data.draw(st.integers(a, len(spans) - 1))
        s, e = spans[a].start, spans[b].end
        typ = data.draw(st.sampled_from(WNUT_TYPES))
        lines.append(f"T{k}\t{typ} {s} {e}\t{txt[s:e]}")
    doc = parse_brat(txt, "\n".join(lines))
    (back,) = parse_conll(serialize_conll([doc]))
    for sent in back.sentences:
        assert validate_bio(sent.tags()) == []


# ---------------------------------------------------------------- synthetic corpus


def test_synthetic_deterministic_and_valid():
    a = generate_synthetic(7, 25)
    assert a == generate_synthetic(7, 25)
    assert a != generate_synthetic(8, 25)
    for doc in a:
        for sent in doc.sentences:
            assert validate_bio(sent.tags()) == []


def test_synthetic_covers_every_type():
    docs = generate_synthetic(0, 18)
    seen = {e.type_name for d in docs for e in document_entities(d)}
    assert seen == set(WNUT_TYPES)


def test_synthetic_370_docs_is_fast():
    t0 = time.perf_counter()
    docs = generate_synthetic(42, 370)
    assert time.perf_counter() - t0 < 1.0
    assert len(docs) == 370 and len({d.id for d in docs}) == 370
