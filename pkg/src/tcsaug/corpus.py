"""Corpus ingestion: abstract/summary records in the SciTLDR-A line format.

A raw corpus file is JSONL with one record per line carrying an id, a
source text (string or list of sentences), and one or more target
summaries. Field names are configurable; defaults follow the SciTLDR
public schema. Loading normalizes everything into SourceDocument and
ReferenceSummary records and preserves input line order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import InputError
from .lineio import load_records, read_records, write_json, write_records

DEFAULT_FIELD_MAP = {"id": "paper_id", "source": "source", "target": "target"}

NORMALIZED_FIELD_MAP = {"id": "doc_id", "source": "abstract", "target": "summaries"}


class Split(str, Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


@dataclass(frozen=True)
class SourceDocument:
    doc_id: str
    abstract_text: str
    split: Split


@dataclass(frozen=True)
class ReferenceSummary:
    doc_id: str
    summary_index: int
    summary_text: str


@dataclass
class CorpusStats:
    n_train: int = 0
    n_validation: int = 0
    n_test: int = 0
    summaries_per_test_doc: dict[int, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "n_train": self.n_train,
            "n_validation": self.n_validation,
            "n_test": self.n_test,
            "summaries_per_test_doc": {str(k): v for k, v in sorted(self.summaries_per_test_doc.items())},
        }


@dataclass
class Corpus:
    """All loaded splits. Read-only after load; safe to share across workers."""

    splits: dict[Split, list[tuple[SourceDocument, list[ReferenceSummary]]]] = field(default_factory=dict)

    def docs(self, split: Split) -> list[tuple[SourceDocument, list[ReferenceSummary]]]:
        return self.splits.get(split, [])


def _coerce_text(value, what: str, line_no: int, path: str) -> str:
    """Accept a plain string or a list of sentence strings (joined by spaces)."""
    if isinstance(value, str):
        text = value
    elif isinstance(value, list) and all(isinstance(s, str) for s in value):
        text = " ".join(s.strip() for s in value)
    else:
        raise InputError(f"{what} must be a string or list of strings", line_no=line_no, path=path)
    text = text.strip()
    if not text:
        raise InputError(f"{what} is empty", line_no=line_no, path=path)
    return text


def load_corpus(
    path: str | Path,
    split: Split,
    field_map: dict[str, str] | None = None,
) -> list[tuple[SourceDocument, list[ReferenceSummary]]]:
    """Load one split from a JSONL corpus file.

    Every line yields exactly one document; input order is preserved.
    Duplicate doc_ids, empty texts, missing fields, and empty files are
    hard errors carrying the line number.
    """
    fmap = dict(DEFAULT_FIELD_MAP)
    if field_map:
        fmap.update(field_map)
    path = Path(path)
    out: list[tuple[SourceDocument, list[ReferenceSummary]]] = []
    seen_ids: set[str] = set()
    for line_no, record in read_records(path):
        for key in ("id", "source", "target"):
            if fmap[key] not in record:
                raise InputError(f"missing field {fmap[key]!r}", line_no=line_no, path=str(path))
        doc_id = record[fmap["id"]]
        if not isinstance(doc_id, str) or not doc_id:
            raise InputError("document id must be a non-empty string", line_no=line_no, path=str(path))
        if doc_id in seen_ids:
            raise InputError(f"duplicate doc_id {doc_id!r}", line_no=line_no, path=str(path))
        seen_ids.add(doc_id)

        abstract = _coerce_text(record[fmap["source"]], "source text", line_no, str(path))

        targets = record[fmap["target"]]
        if isinstance(targets, str):
            targets = [targets]
        if not isinstance(targets, list) or not targets:
            raise InputError("target summaries must be a non-empty string or list", line_no=line_no, path=str(path))
        summaries = [
            ReferenceSummary(doc_id, idx, _coerce_text(t, f"summary {idx}", line_no, str(path)))
            for idx, t in enumerate(targets)
        ]
        out.append((SourceDocument(doc_id, abstract, split), summaries))
    if not out:
        raise InputError("corpus file contains no records", path=str(path))
    return out


def validate_corpus(corpus: Corpus) -> CorpusStats:
    """Count documents per split and enforce the one-summary-per-train-doc rule."""
    stats = CorpusStats()
    for doc, summaries in corpus.docs(Split.TRAIN):
        if len(summaries) != 1:
            raise InputError(
                f"train document {doc.doc_id!r} has {len(summaries)} summaries, expected exactly 1"
            )
        stats.n_train += 1
    stats.n_validation = len(corpus.docs(Split.VALIDATION))
    hist: Counter[int] = Counter()
    for _, summaries in corpus.docs(Split.TEST):
        stats.n_test += 1
        hist[len(summaries)] += 1
    stats.summaries_per_test_doc = dict(hist)
    return stats


def write_normalized(
    corpus: Corpus,
    out_dir: str | Path,
    stats: CorpusStats | None = None,
) -> dict[str, str]:
    """Write per-split normalized JSONL files plus a stats sidecar.

    Canonical field names: doc_id, abstract, summaries. Returns the
    sha256 checksum of each written split file keyed by split name.
    """
    out_dir = Path(out_dir)
    checksums: dict[str, str] = {}
    for split in Split:
        docs = corpus.docs(split)
        if not docs:
            continue
        records = [
            {"doc_id": doc.doc_id, "abstract": doc.abstract_text, "summaries": [s.summary_text for s in summaries]}
            for doc, summaries in docs
        ]
        checksums[split.value] = write_records(out_dir / f"{split.value}.jsonl", records)
    if stats is None:
        stats = validate_corpus(corpus)
    write_json(out_dir / "stats.json", {"stats": stats.as_dict(), "checksums": checksums})
    return checksums


def load_normalized(path: str | Path, split: Split) -> list[tuple[SourceDocument, list[ReferenceSummary]]]:
    """Load a normalized split file (canonical field names)."""
    return load_corpus(path, split, field_map=NORMALIZED_FIELD_MAP)


def load_corpus_dirs(paths: dict[Split, str | Path | None], field_map: dict[str, str] | None = None) -> Corpus:
    """Load every configured split into one Corpus. Missing (None) paths are skipped."""
    corpus = Corpus()
    for split, path in paths.items():
        if path is None:
            continue
        corpus.splits[split] = load_corpus(path, split, field_map=field_map)
    return corpus
