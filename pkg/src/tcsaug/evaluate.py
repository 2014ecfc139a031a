"""Win-rate evaluation: contrastive topic alignment of generated summaries.

Test records with multiple reference summaries are expanded into instances
that pit each target's intended topic against an alternative topic from
the same record (cyclic-next-distinct by default, max-similarity
best-of-rest as a sensitivity mode). A generated summary wins when its
embedding is strictly closer (cosine) to the intended topic than to the
alternative; ties are counted separately and are not wins.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .annotate import AnnotatedExample
from .embed import EmbeddingStore, EmbeddingVector
from .errors import InputError
from .lineio import read_records

ALTERNATIVE_MODES = ("cyclic-next", "best-of-rest")

WIN, TIE, LOSS = "win", "tie", "loss"


@dataclass(frozen=True)
class TestRecord:
    record_id: str
    abstract_text: str
    targets: tuple[tuple[str, str], ...]  # (summary_text, topic_label), length >= 1

    def __post_init__(self):
        if not self.targets:
            raise InputError(f"test record {self.record_id!r} has no targets")


@dataclass(frozen=True)
class EvalTemplate:
    """An instance awaiting its generated summary, keyed by (record_id, target_index)."""

    record_id: str
    target_index: int
    intended_topic: str
    alternative_topic: str


@dataclass(frozen=True)
class EvalInstance:
    record_id: str
    target_index: int
    generated_summary: str
    intended_topic: str
    alternative_topic: str

    def __post_init__(self):
        if self.intended_topic == self.alternative_topic:
            raise InputError(
                f"instance {self.record_id}:{self.target_index}: intended and alternative topics are equal"
            )

    @property
    def instance_id(self) -> str:
        return f"{self.record_id}:{self.target_index}"


def build_test_records(annotated: Sequence[AnnotatedExample]) -> list[TestRecord]:
    """Group per-summary annotations of one document into a TestRecord.

    Documents keep first-appearance order; targets are ordered by
    summary_index.
    """
    grouped: dict[str, list[AnnotatedExample]] = {}
    order: list[str] = []
    for ex in annotated:
        if ex.doc_id not in grouped:
            grouped[ex.doc_id] = []
            order.append(ex.doc_id)
        grouped[ex.doc_id].append(ex)
    records = []
    for doc_id in order:
        entries = sorted(grouped[doc_id], key=lambda e: e.summary_index)
        records.append(
            TestRecord(
                record_id=doc_id,
                abstract_text=entries[0].abstract_text,
                targets=tuple((e.summary_text, e.topic.label) for e in entries),
            )
        )
    return records


def _cyclic_next_distinct(topics: Sequence[str], m: int) -> str | None:
    for step in range(1, len(topics)):
        candidate = topics[(m + step) % len(topics)]
        if candidate != topics[m]:
            return candidate
    return None


def _best_of_rest(topics: Sequence[str], m: int, store: EmbeddingStore) -> str | None:
    best: tuple[float, int] | None = None
    for idx, candidate in enumerate(topics):
        if candidate == topics[m]:
            continue
        sim = cosine(store.lookup(topics[m]), store.lookup(candidate))
        if best is None or sim > best[0]:
            best = (sim, idx)
    return topics[best[1]] if best is not None else None


def expand_test_records(
    records: Sequence[TestRecord],
    mode: str = "cyclic-next",
    store: EmbeddingStore | None = None,
) -> tuple[list[EvalTemplate], dict]:
    """Expand records into per-target templates with an alternative topic.

    cyclic-next: the next target's topic in cyclic index order, skipping
    topics equal to the intended one. best-of-rest: the distinct topic
    most cosine-similar to the intended one (needs a store). Records with
    fewer than two distinct topic labels yield no templates and are
    reported in the skip report.
    """
    if mode not in ALTERNATIVE_MODES:
        raise InputError(f"unknown alternative mode {mode!r}, expected one of {ALTERNATIVE_MODES}")
    if mode == "best-of-rest" and store is None:
        raise InputError("best-of-rest expansion requires an embedding store")

    templates: list[EvalTemplate] = []
    skipped_ids: list[str] = []
    for record in records:
        topics = [topic for _, topic in record.targets]
        if len(set(topics)) < 2:
            skipped_ids.append(record.record_id)
            continue
        for m in range(len(topics)):
            if mode == "cyclic-next":
                alternative = _cyclic_next_distinct(topics, m)
            else:
                alternative = _best_of_rest(topics, m, store)
            if alternative is None:  # unreachable with >= 2 distinct topics
                raise InputError(f"record {record.record_id}: no distinct alternative for target {m}")
            templates.append(EvalTemplate(record.record_id, m, topics[m], alternative))
    skip_report = {
        "records_total": len(records),
        "records_skipped": len(skipped_ids),
        "skipped_record_ids": skipped_ids,
        "alternative_mode": mode,
    }
    return templates, skip_report


def load_model_outputs(path: str | Path) -> dict[tuple[str, int], str]:
    """Read the model-output file: {record_id, target_index, generated_summary} lines."""
    outputs: dict[tuple[str, int], str] = {}
    for line_no, record in read_records(path):
        try:
            key = (record["record_id"], int(record["target_index"]))
            text = record["generated_summary"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad model-output record: {exc}", line_no=line_no, path=str(path)) from exc
        if not isinstance(text, str):
            raise InputError("generated_summary must be a string", line_no=line_no, path=str(path))
        if key in outputs:
            raise InputError(f"duplicate model output for {key}", line_no=line_no, path=str(path))
        outputs[key] = text
    if not outputs:
        raise InputError("model-output file contains no records", path=str(path))
    return outputs


def join_model_outputs(
    templates: Sequence[EvalTemplate],
    outputs: dict[tuple[str, int], str],
    valid_keys: set[tuple[str, int]] | None = None,
) -> list[EvalInstance]:
    """Attach generated summaries to templates by (record_id, target_index).

    Templates without an output are a hard error (silent drops would bias
    the win rate). Outputs keyed outside the known test targets are a hard
    error too; outputs for targets skipped at expansion are ignored.
    """
    template_keys = {(t.record_id, t.target_index) for t in templates}
    missing = sorted(template_keys - set(outputs))
    if missing:
        preview = ", ".join(f"{r}:{i}" for r, i in missing[:5])
        raise InputError(f"{len(missing)} evaluation targets have no model output: {preview}")
    if valid_keys is not None:
        unknown = sorted(set(outputs) - valid_keys)
        if unknown:
            preview = ", ".join(f"{r}:{i}" for r, i in unknown[:5])
            raise InputError(f"{len(unknown)} model outputs reference unknown test targets: {preview}")
    return [
        EvalInstance(
            record_id=t.record_id,
            target_index=t.target_index,
            generated_summary=outputs[(t.record_id, t.target_index)],
            intended_topic=t.intended_topic,
            alternative_topic=t.alternative_topic,
        )
        for t in templates
    ]


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """dot(u, v) / (|u||v|), clamped to [-1, 1]. Zero vectors are an error."""
    if u.dim != v.dim:
        raise InputError(f"cosine over mismatched dims {u.dim} and {v.dim}")
    ua, va = u.as_array(), v.as_array()
    nu, nv = float(np.linalg.norm(ua)), float(np.linalg.norm(va))
    if nu == 0.0 or nv == 0.0:
        raise InputError(f"cosine over a zero vector (keys {u.key[:12]}, {v.key[:12]})")
    value = float(np.dot(ua, va)) / (nu * nv)
    if not -1.0 - 1e-9 <= value <= 1.0 + 1e-9:
        raise InputError(f"cosine {value} outside tolerance band")
    return max(-1.0, min(1.0, value))


def score_instance(instance: EvalInstance, store: EmbeddingStore) -> str:
    """win iff cos(s, t) > cos(s, t') strictly; tie iff exactly equal.

    Cosines are compared exactly (no epsilon) so tie semantics are
    reproducible under a deterministic embedder.
    """
    if instance.intended_topic == instance.alternative_topic:
        raise InputError(f"instance {instance.instance_id}: topics are equal at scoring time")
    summary = store.lookup(instance.generated_summary)
    sim_intended = cosine(summary, store.lookup(instance.intended_topic))
    sim_alternative = cosine(summary, store.lookup(instance.alternative_topic))
    if sim_intended > sim_alternative:
        return WIN
    if sim_intended == sim_alternative:
        return TIE
    return LOSS


@dataclass
class WinRateReport:
    wins: int
    ties: int
    losses: int
    total: int
    win_rate_percent: float
    embedder: dict
    config_echo: dict = field(default_factory=dict)
    skips: dict = field(default_factory=dict)
    external_score_mean: float | None = None

    def as_dict(self) -> dict:
        out = {
            "wins": self.wins,
            "ties": self.ties,
            "losses": self.losses,
            "total": self.total,
            "win_rate_percent": self.win_rate_percent,
            "embedder": self.embedder,
            "config_echo": self.config_echo,
            "skips": self.skips,
        }
        if self.external_score_mean is not None:
            out["external_score_mean"] = self.external_score_mean
        return out


def win_rate(
    instances: Sequence[EvalInstance],
    store: EmbeddingStore,
    config_echo: dict | None = None,
    skips: dict | None = None,
) -> WinRateReport:
    """Count wins/ties/losses over all instances; ties are not wins."""
    if not instances:
        raise InputError("no evaluation instances to score")
    wins = ties = losses = 0
    for instance in instances:
        outcome = score_instance(instance, store)
        if outcome == WIN:
            wins += 1
        elif outcome == TIE:
            ties += 1
        else:
            losses += 1
    total = len(instances)
    return WinRateReport(
        wins=wins,
        ties=ties,
        losses=losses,
        total=total,
        win_rate_percent=100.0 * wins / total,
        embedder={"provenance": store.provenance, "dim": store.dim},
        config_echo=dict(config_echo or {}),
        skips=dict(skips or {}),
    )


@dataclass
class RunAggregate:
    win_rates: list[float]
    mean: float
    std: float | None  # sample std (n-1); absent for a single run

    def formatted(self) -> str:
        if self.std is None:
            return f"{self.mean:.2f}"
        return f"{self.mean:.2f} ± {self.std:.4f}"


def aggregate_runs(reports: Sequence[WinRateReport]) -> RunAggregate:
    """Mean and sample standard deviation of win rates across seeds.

    All reports must share a config echo apart from their seed field.
    """
    if not reports:
        raise InputError("no reports to aggregate")

    def echo_without_seed(report: WinRateReport) -> dict:
        echo = dict(report.config_echo)
        echo.pop("seed", None)
        return echo

    reference = echo_without_seed(reports[0])
    for report in reports[1:]:
        if echo_without_seed(report) != reference:
            raise InputError("reports have mixed config echoes; refusing to aggregate")

    rates = [r.win_rate_percent for r in reports]
    mean = statistics.fmean(rates)
    std = statistics.stdev(rates) if len(rates) >= 2 else None
    if not (min(rates) - 1e-12 <= mean <= max(rates) + 1e-12):
        raise AssertionError("mean outside run range")
    return RunAggregate(win_rates=rates, mean=mean, std=std)


def ingest_external_scores(
    path: str | Path,
    known_ids: set[str] | None = None,
) -> tuple[dict[str, float], float]:
    """Read externally computed per-example scores ({example_id, score} lines).

    Scores must lie in [0, 1]; ids must be unique and, when known_ids is
    given, drawn from it. Returns (table, arithmetic mean).
    """
    table: dict[str, float] = {}
    for line_no, record in read_records(path):
        try:
            example_id, score = record["example_id"], float(record["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad score record: {exc}", line_no=line_no, path=str(path)) from exc
        if not 0.0 <= score <= 1.0:
            raise InputError(f"score {score} outside [0, 1]", line_no=line_no, path=str(path))
        if example_id in table:
            raise InputError(f"duplicate example_id {example_id!r}", line_no=line_no, path=str(path))
        if known_ids is not None and example_id not in known_ids:
            raise InputError(f"unknown example_id {example_id!r}", line_no=line_no, path=str(path))
        table[example_id] = score
    if not table:
        raise InputError("score file contains no records", path=str(path))
    return table, statistics.fmean(table.values())
