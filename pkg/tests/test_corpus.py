import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tcsaug.corpus import (
    Corpus,
    CorpusStats,
    Split,
    load_corpus,
    load_normalized,
    validate_corpus,
    write_normalized,
)
from tcsaug.errors import InputError

from conftest import write_raw_split


def test_single_record(tmp_path):
    path = write_raw_split(tmp_path / "c.jsonl", [{"paper_id": "d1", "source": "x", "target": ["y"]}])
    docs = load_corpus(path, Split.TRAIN)
    assert len(docs) == 1
    doc, summaries = docs[0]
    assert doc.doc_id == "d1"
    assert doc.abstract_text == "x"
    assert [s.summary_text for s in summaries] == ["y"]
    assert summaries[0].summary_index == 0


def test_source_as_sentence_list_is_joined(tmp_path):
    path = write_raw_split(
        tmp_path / "c.jsonl",
        [{"paper_id": "d1", "source": ["First sentence.", "Second sentence."], "target": ["y"]}],
    )
    docs = load_corpus(path, Split.TRAIN)
    assert docs[0][0].abstract_text == "First sentence. Second sentence."


def test_target_as_plain_string(tmp_path):
    path = write_raw_split(tmp_path / "c.jsonl", [{"paper_id": "d1", "source": "x", "target": "just one"}])
    docs = load_corpus(path, Split.TEST)
    assert [s.summary_text for s in docs[0][1]] == ["just one"]


def test_input_order_preserved_and_counts_match(tmp_path):
    records = [{"paper_id": f"d{i}", "source": f"abstract {i}", "target": [f"s{i}"]} for i in range(25)]
    path = write_raw_split(tmp_path / "c.jsonl", records)
    docs = load_corpus(path, Split.TRAIN)
    assert len(docs) == 25
    assert [d.doc_id for d, _ in docs] == [f"d{i}" for i in range(25)]


def test_duplicate_doc_id_rejected_with_line(tmp_path):
    records = [
        {"paper_id": "d1", "source": "x", "target": ["y"]},
        {"paper_id": "d1", "source": "z", "target": ["w"]},
    ]
    path = write_raw_split(tmp_path / "c.jsonl", records)
    with pytest.raises(InputError) as exc:
        load_corpus(path, Split.TRAIN)
    assert exc.value.line_no == 2
    assert "duplicate" in str(exc.value)


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"paper_id": "d1", "source": "x", "target": ["y"]}\n{not json}\n', encoding="utf-8")
    with pytest.raises(InputError) as exc:
        load_corpus(path, Split.TRAIN)
    assert exc.value.line_no == 2


def test_invalid_utf8_is_hard_error(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_bytes(b'{"paper_id": "d1", "source": "\xff\xfe", "target": ["y"]}\n')
    with pytest.raises(InputError) as exc:
        load_corpus(path, Split.TRAIN)
    assert "UTF-8" in str(exc.value)


def test_empty_file_is_error(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text("", encoding="utf-8")
    with pytest.raises(InputError, match="no records"):
        load_corpus(path, Split.TRAIN)


def test_missing_file_is_error(tmp_path):
    with pytest.raises(InputError, match="does not exist"):
        load_corpus(tmp_path / "nope.jsonl", Split.TRAIN)


def test_whitespace_trimmed_but_inner_preserved(tmp_path):
    path = write_raw_split(
        tmp_path / "c.jsonl", [{"paper_id": "d1", "source": "  a  b\tc  ", "target": ["  y  "]}]
    )
    docs = load_corpus(path, Split.TRAIN)
    assert docs[0][0].abstract_text == "a  b\tc"
    assert docs[0][1][0].summary_text == "y"


def test_blank_abstract_rejected(tmp_path):
    path = write_raw_split(tmp_path / "c.jsonl", [{"paper_id": "d1", "source": "   ", "target": ["y"]}])
    with pytest.raises(InputError, match="empty"):
        load_corpus(path, Split.TRAIN)


def test_missing_field_rejected(tmp_path):
    path = write_raw_split(tmp_path / "c.jsonl", [{"paper_id": "d1", "source": "x"}])
    with pytest.raises(InputError, match="target"):
        load_corpus(path, Split.TRAIN)


def test_custom_field_map(tmp_path):
    path = write_raw_split(tmp_path / "c.jsonl", [{"uid": "d1", "body": "x", "tl": ["y"]}])
    docs = load_corpus(path, Split.TRAIN, field_map={"id": "uid", "source": "body", "target": "tl"})
    assert docs[0][0].doc_id == "d1"


def test_multi_summary_train_doc_fails_validation(tmp_path):
    path = write_raw_split(tmp_path / "c.jsonl", [{"paper_id": "d9", "source": "x", "target": ["a", "b"]}])
    corpus = Corpus({Split.TRAIN: load_corpus(path, Split.TRAIN)})
    with pytest.raises(InputError, match="d9"):
        validate_corpus(corpus)


def test_empty_corpus_stats():
    stats = validate_corpus(Corpus())
    assert (stats.n_train, stats.n_validation, stats.n_test) == (0, 0, 0)
    assert stats.summaries_per_test_doc == {}


def test_stats_match_fixture_parameters(corpus_factory):
    fixture = corpus_factory(n_train=10, n_validation=4, n_test=3, test_summary_counts=[1, 2, 3])
    corpus = Corpus(
        {
            Split.TRAIN: load_corpus(fixture.train, Split.TRAIN),
            Split.VALIDATION: load_corpus(fixture.validation, Split.VALIDATION),
            Split.TEST: load_corpus(fixture.test, Split.TEST),
        }
    )
    stats = validate_corpus(corpus)
    assert stats.n_train == fixture.n_train
    assert stats.n_validation == fixture.n_validation
    assert stats.n_test == fixture.n_test
    assert stats.summaries_per_test_doc == {1: 1, 2: 1, 3: 1}


def test_normalized_round_trip_preserves_triples(corpus_factory, tmp_path):
    fixture = corpus_factory(n_train=6, n_test=2, test_summary_counts=[2, 3])
    corpus = Corpus(
        {
            Split.TRAIN: load_corpus(fixture.train, Split.TRAIN),
            Split.TEST: load_corpus(fixture.test, Split.TEST),
        }
    )
    out = tmp_path / "normalized"
    write_normalized(corpus, out)

    for split in (Split.TRAIN, Split.TEST):
        reloaded = load_normalized(out / f"{split.value}.jsonl", split)
        original = corpus.docs(split)
        assert [(d.doc_id, d.abstract_text, tuple(s.summary_text for s in ss)) for d, ss in reloaded] == [
            (d.doc_id, d.abstract_text, tuple(s.summary_text for s in ss)) for d, ss in original
        ]


def test_normalized_rewrite_is_byte_identical(corpus_factory, tmp_path):
    fixture = corpus_factory(n_train=5)
    corpus = Corpus({Split.TRAIN: load_corpus(fixture.train, Split.TRAIN)})
    out1, out2 = tmp_path / "n1", tmp_path / "n2"
    write_normalized(corpus, out1)
    write_normalized(Corpus({Split.TRAIN: load_normalized(out1 / "train.jsonl", Split.TRAIN)}), out2)
    assert (out1 / "train.jsonl").read_bytes() == (out2 / "train.jsonl").read_bytes()


_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=40
).filter(lambda s: s.strip())


@given(
    docs=st.lists(
        st.tuples(_text, st.lists(_text, min_size=1, max_size=3)),
        min_size=1,
        max_size=8,
    )
)
def test_round_trip_property(tmp_path_factory, docs):
    tmp_path = tmp_path_factory.mktemp("rt")
    records = [
        {"paper_id": f"d{i}", "source": abstract, "target": targets}
        for i, (abstract, targets) in enumerate(docs)
    ]
    path = write_raw_split(tmp_path / "c.jsonl", records)
    loaded = load_corpus(path, Split.TEST)
    out = tmp_path / "norm"
    write_normalized(Corpus({Split.TEST: loaded}), out)
    reloaded = load_normalized(out / "test.jsonl", Split.TEST)
    assert [(d.doc_id, d.abstract_text, tuple(s.summary_text for s in ss)) for d, ss in reloaded] == [
        (d.doc_id, d.abstract_text, tuple(s.summary_text for s in ss)) for d, ss in loaded
    ]
