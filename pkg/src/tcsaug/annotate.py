"""Topic annotation: one salient topic label per abstract/summary pair.

Two annotators share one contract (text in, ranked TopicCandidate list out):

* WikifierClient posts text to a Wikification HTTP endpoint that maps text
  to Wikipedia concepts with rank scores. Responses are cached on disk
  keyed by a content hash of the request text, so reruns are offline.
* fallback_annotate is a deterministic, dependency-free stand-in: ranked
  token frequencies after stopword and short-token filtering.

The two methods are never mixed within one run; confidence scales are not
comparable across them.
"""

from __future__ import annotations

import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import requests

from .corpus import ReferenceSummary, SourceDocument
from .errors import AnnotationMissingError, InputError, ServiceError, TransportError
from .lineio import load_records, sha256_text, write_records

_TOKEN_RE = re.compile(r"[a-z0-9]+")

# Small English stopword list for the fallback annotator. Deliberately
# frozen in source: determinism across machines matters more than coverage.
DEFAULT_STOPWORDS = frozenset(
    """a an the and or but if then else for nor so yet of in on at by to from
    with without into onto over under between among through during before
    after above below up down out off again further once here there when
    where why how all any both each few more most other some such no not
    only own same than too very can will just should now is are was were be
    been being have has had having do does did doing this that these those
    it its we our you your they their them he she his her i me my as about
    against because until while what which who whom""".split()
)


@dataclass(frozen=True)
class TopicCandidate:
    label: str
    confidence: float
    method: str  # "wikifier" | "fallback"

    def __post_init__(self):
        if not self.label:
            raise ValueError("topic label must be non-empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class AnnotatedExample:
    doc_id: str
    summary_index: int
    abstract_text: str
    topic: TopicCandidate
    summary_text: str


@dataclass
class WikifierConfig:
    endpoint: str
    credential: str
    timeout_s: float = 30.0
    retries: int = 2
    cache_dir: str | Path | None = None
    rank_field: str = "pageRank"  # which response score ranks concepts
    language: str = "en"


class WikifierClient:
    """HTTP client for a Wikification endpoint with a content-hash cache.

    The cache is consulted before any service call; cache writes are
    atomic (write-temp-then-rename) so concurrent annotators cannot
    leave a torn response behind. `service_calls` counts actual HTTP
    posts, which lets callers verify warm-cache runs stay offline.
    """

    def __init__(self, config: WikifierConfig, session: requests.Session | None = None):
        if not config.endpoint:
            raise InputError("wikifier endpoint is not configured")
        if not config.credential:
            raise InputError("wikifier credential is not configured")
        self.config = config
        self.session = session or requests.Session()
        self.service_calls = 0
        self.cache_hits = 0

    def _cache_path(self, key: str) -> Path | None:
        if self.config.cache_dir is None:
            return None
        return Path(self.config.cache_dir) / f"{key}.json"

    def _cache_get(self, key: str) -> dict | None:
        path = self._cache_path(key)
        if path is None or not path.exists():
            return None
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def _cache_put(self, key: str, payload: dict) -> None:
        path = self._cache_path(key)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + f".tmp{os.getpid()}")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False)
        os.replace(tmp, path)

    def _post(self, text: str) -> dict:
        cfg = self.config
        attempts = cfg.retries + 1
        last_exc: Exception | None = None
        for attempt in range(attempts):
            try:
                self.service_calls += 1
                resp = self.session.post(
                    cfg.endpoint,
                    data={"text": text, "userKey": cfg.credential, "lang": cfg.language},
                    timeout=cfg.timeout_s,
                )
            except requests.RequestException as exc:
                last_exc = exc
                if attempt + 1 < attempts:
                    time.sleep(min(2.0, 0.2 * 2**attempt))
                continue
            if 500 <= resp.status_code < 600 and attempt + 1 < attempts:
                time.sleep(min(2.0, 0.2 * 2**attempt))
                continue
            if resp.status_code != 200:
                raise ServiceError(
                    "wikifier returned non-success response",
                    status=resp.status_code,
                    payload_excerpt=resp.text,
                )
            try:
                return resp.json()
            except ValueError as exc:
                raise ServiceError("wikifier response is not JSON", payload_excerpt=resp.text) from exc
        raise TransportError(f"wikifier unreachable after {attempts} attempts: {last_exc}")

    def _parse(self, payload: dict) -> list[TopicCandidate]:
        annotations = payload.get("annotations")
        if annotations is None:
            if "error" in payload:
                raise ServiceError("wikifier reported an error", payload_excerpt=str(payload["error"]))
            raise ServiceError("wikifier response has no annotations field", payload_excerpt=json.dumps(payload)[:200])
        candidates = []
        for entry in annotations:
            title = entry.get("title")
            score = entry.get(self.config.rank_field)
            if not title or score is None:
                continue
            confidence = min(1.0, max(0.0, float(score)))
            candidates.append(TopicCandidate(title, confidence, "wikifier"))
        candidates.sort(key=lambda c: -c.confidence)
        return candidates

    def wikify(self, text: str) -> list[TopicCandidate]:
        """Return concept candidates sorted by confidence descending.

        An empty candidate list means the service found no concepts; it is
        distinguishable from transport and service failures, which raise.
        """
        if not text.strip():
            raise InputError("cannot wikify empty text")
        key = sha256_text(text)
        payload = self._cache_get(key)
        if payload is not None:
            self.cache_hits += 1
        else:
            payload = self._post(text)
            self._cache_put(key, payload)
        return self._parse(payload)


def fallback_annotate(text: str, stopwords: frozenset[str] | set[str] = DEFAULT_STOPWORDS) -> list[TopicCandidate]:
    """Deterministic offline annotator: ranked kept-token frequencies.

    Lowercase, split on non-alphanumeric runs, drop stopwords and tokens
    shorter than 3 characters, rank by (frequency desc, first occurrence
    asc), and emit the top 5 with confidence = freq / total kept tokens.
    """
    if not text.strip():
        raise InputError("cannot annotate empty text")
    tokens = _TOKEN_RE.findall(text.lower())
    kept = [t for t in tokens if t not in stopwords and len(t) >= 3]
    if not kept:
        return []
    counts: dict[str, int] = {}
    first_seen: dict[str, int] = {}
    for pos, tok in enumerate(kept):
        counts[tok] = counts.get(tok, 0) + 1
        first_seen.setdefault(tok, pos)
    total = len(kept)
    ranked = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
    return [TopicCandidate(t, counts[t] / total, "fallback") for t in ranked[:5]]


def select_salient_topic(candidates: Sequence[TopicCandidate]) -> TopicCandidate:
    """Pick the max-confidence candidate; ties break to the smallest label.

    Invariant under permutation of the input list.
    """
    if not candidates:
        raise AnnotationMissingError("<no candidates>")
    return min(candidates, key=lambda c: (-c.confidence, c.label))


def build_annotation_text(abstract: str, summary: str, target: str = "pair") -> str:
    """Text handed to the annotator: the pair joined by a space, or the abstract alone."""
    if target == "pair":
        return f"{abstract} {summary}"
    if target == "abstract":
        return abstract
    raise InputError(f"unknown annotation target {target!r}")


def annotate_corpus(
    pairs: Iterable[tuple[SourceDocument, list[ReferenceSummary]]],
    annotator: Callable[[str], list[TopicCandidate]],
    *,
    annotation_target: str = "pair",
    on_missing: str = "skip",
    workers: int = 1,
) -> tuple[list[AnnotatedExample], list[str]]:
    """Annotate every (document, summary) pair with its salient topic.

    Output order is fixed by input order regardless of worker count.
    Pairs with no candidates are skipped (and reported) or abort the run,
    per `on_missing`. Returns (examples, skipped doc_ids).
    """
    if on_missing not in ("skip", "abort"):
        raise InputError(f"on_missing must be 'skip' or 'abort', got {on_missing!r}")

    flat: list[tuple[SourceDocument, ReferenceSummary]] = []
    for doc, summaries in pairs:
        for summary in summaries:
            flat.append((doc, summary))

    texts = [build_annotation_text(doc.abstract_text, s.summary_text, annotation_target) for doc, s in flat]
    if workers > 1 and flat:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            candidate_lists = list(pool.map(annotator, texts))
    else:
        candidate_lists = [annotator(t) for t in texts]

    examples: list[AnnotatedExample] = []
    skipped: list[str] = []
    for (doc, summary), candidates in zip(flat, candidate_lists):
        if not candidates:
            if on_missing == "abort":
                raise AnnotationMissingError(doc.doc_id)
            skipped.append(doc.doc_id)
            continue
        topic = select_salient_topic(candidates)
        examples.append(
            AnnotatedExample(doc.doc_id, summary.summary_index, doc.abstract_text, topic, summary.summary_text)
        )
    return examples, skipped


def write_annotated(examples: Sequence[AnnotatedExample], path: str | Path) -> str:
    """Write AnnotatedExample records as JSONL; returns the file checksum."""
    records = [
        {
            "doc_id": ex.doc_id,
            "summary_index": ex.summary_index,
            "abstract": ex.abstract_text,
            "topic": ex.topic.label,
            "topic_confidence": ex.topic.confidence,
            "topic_method": ex.topic.method,
            "summary": ex.summary_text,
        }
        for ex in examples
    ]
    return write_records(path, records)


def load_annotated(path: str | Path) -> list[AnnotatedExample]:
    examples = []
    for record in load_records(path):
        try:
            topic = TopicCandidate(record["topic"], record["topic_confidence"], record["topic_method"])
            examples.append(
                AnnotatedExample(
                    record["doc_id"],
                    int(record["summary_index"]),
                    record["abstract"],
                    topic,
                    record["summary"],
                )
            )
        except (KeyError, ValueError) as exc:
            raise InputError(f"bad annotated record: {exc}", path=str(path)) from exc
    return examples
