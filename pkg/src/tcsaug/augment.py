"""Pairwise augmentation: seeded matching plans and trainer-ready datasets.

A plan is k rounds of random perfect matchings over the annotated training
examples. Each matched pair (i, j) yields two training examples, one per
original topic/summary target, over the concatenated context; the XX
variant adds the reversed concatenation order for every emitted example.
The baseline dataset keeps single-abstract contexts.

Randomness comes from numpy's Philox counter-based generator keyed by
(seed, round_index), so plans are reproducible across machines and
independent of any worker scheduling.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .annotate import AnnotatedExample
from .errors import InputError
from .lineio import load_records, sha256_file, write_json, write_records

PROMPT_TEMPLATE = "Summarize: topic = {topic}, context = {context}"

# Partner resampling budget: applies both to repeat-partner avoidance across
# rounds and to same-topic collisions within a pair. After the budget is
# exhausted the collision is accepted rather than failing the run.
RETRY_BUDGET = 16


@dataclass
class PairingPlan:
    """Seeded pairing decisions: k rounds of matchings plus odd-count leftovers.

    Pairs are stored canonically as (min_index, max_index); they are
    unordered, and the canonical form keeps materialization order
    deterministic. leftover_assignments holds (round_index, doc_index,
    partner_index) triples for rounds where n_docs is odd.
    """

    seed: int
    multiplier_k: int
    xx_enabled: bool
    n_docs: int
    rounds: list[list[tuple[int, int]]]
    leftover_assignments: list[tuple[int, int, int]] = field(default_factory=list)
    partner_dedup: bool = False

    def validate(self) -> None:
        if len(self.rounds) != self.multiplier_k:
            raise InputError(f"plan has {len(self.rounds)} rounds, expected {self.multiplier_k}")
        leftovers_by_round: dict[int, list[tuple[int, int]]] = {}
        for round_index, doc, partner in self.leftover_assignments:
            leftovers_by_round.setdefault(round_index, []).append((doc, partner))
        for round_index, pairs in enumerate(self.rounds):
            seen: set[int] = set()
            for i, j in pairs:
                if i == j:
                    raise InputError(f"round {round_index}: self-pair ({i}, {j})")
                if i in seen or j in seen:
                    raise InputError(f"round {round_index}: index appears in more than one pair")
                seen.add(i)
                seen.add(j)
            leftovers = leftovers_by_round.get(round_index, [])
            if len(leftovers) > 1:
                raise InputError(f"round {round_index}: more than one leftover assignment")
            for doc, partner in leftovers:
                if doc == partner:
                    raise InputError(f"round {round_index}: leftover self-assignment ({doc})")
                if doc in seen:
                    raise InputError(f"round {round_index}: leftover doc {doc} already paired")


def _round_rng(seed: int, round_index: int) -> np.random.Generator:
    """Philox keyed by (seed, round_index); draws advance the counter."""
    return np.random.Generator(np.random.Philox(key=[seed, round_index]))


def _sample_partner_pos(
    i: int,
    remaining: list[int],
    rng: np.random.Generator,
    prev_partners: dict[int, set[int]],
    topics: Sequence[str] | None,
    dedup: bool,
) -> int:
    pos = int(rng.integers(len(remaining)))
    for _ in range(RETRY_BUDGET):
        j = remaining[pos]
        repeat = dedup and j in prev_partners.get(i, ())
        collide = topics is not None and topics[i] == topics[j]
        if not (repeat or collide):
            break
        pos = int(rng.integers(len(remaining)))
    return pos


def build_pairing_plan(
    n_docs: int,
    k: int,
    xx: bool,
    seed: int,
    topic_labels: Sequence[str] | None = None,
) -> PairingPlan:
    """Draw k uniform random perfect matchings over n_docs indices.

    Each round shuffles the indices and pairs the first unmatched index
    with a uniformly chosen partner from the rest. With odd n_docs the
    unmatched document is assigned a uniformly chosen other document as a
    leftover partner. When n_docs > 2k, a partner that repeats one of the
    document's partners from earlier rounds is resampled up to the retry
    budget; same-topic partners are likewise resampled when topic labels
    are supplied. Exhausted budgets accept the collision.
    """
    if n_docs < 2:
        raise InputError(f"need at least 2 documents to pair, got {n_docs}")
    if k < 1:
        raise InputError(f"multiplier must be >= 1, got {k}")
    if seed < 0:
        raise InputError(f"seed must be non-negative, got {seed}")
    if topic_labels is not None and len(topic_labels) != n_docs:
        raise InputError(f"got {len(topic_labels)} topic labels for {n_docs} documents")

    dedup = n_docs > 2 * k
    prev_partners: dict[int, set[int]] = {}
    rounds: list[list[tuple[int, int]]] = []
    leftovers: list[tuple[int, int, int]] = []

    for round_index in range(k):
        rng = _round_rng(seed, round_index)
        remaining = [int(x) for x in rng.permutation(n_docs)]
        pairs: list[tuple[int, int]] = []
        while len(remaining) >= 2:
            i = remaining.pop(0)
            pos = _sample_partner_pos(i, remaining, rng, prev_partners, topic_labels, dedup)
            j = remaining.pop(pos)
            pairs.append((min(i, j), max(i, j)))
            prev_partners.setdefault(i, set()).add(j)
            prev_partners.setdefault(j, set()).add(i)
        if remaining:
            i = remaining[0]
            p = int(rng.integers(n_docs - 1))
            if p >= i:
                p += 1
            for _ in range(RETRY_BUDGET):
                if topic_labels is None or topic_labels[i] != topic_labels[p]:
                    break
                p = int(rng.integers(n_docs - 1))
                if p >= i:
                    p += 1
            leftovers.append((round_index, i, p))
            prev_partners.setdefault(i, set()).add(p)
            prev_partners.setdefault(p, set()).add(i)
        rounds.append(pairs)

    plan = PairingPlan(
        seed=seed,
        multiplier_k=k,
        xx_enabled=xx,
        n_docs=n_docs,
        rounds=rounds,
        leftover_assignments=leftovers,
        partner_dedup=dedup,
    )
    plan.validate()
    return plan


@dataclass(frozen=True)
class AugmentedExample:
    input_text: str
    target_text: str
    topic_label: str
    source_doc_ids: tuple[str, str]  # (first-context doc, second-context doc)
    round_index: int
    mirrored: bool


def format_input(topic_label: str, context: str) -> str:
    """Render the trainer prompt. Topic and context pass through verbatim."""
    if not topic_label:
        raise InputError("topic label is empty")
    if not context:
        raise InputError("context is empty")
    return PROMPT_TEMPLATE.format(topic=topic_label, context=context)


def _pair_examples(
    a: AnnotatedExample,
    b: AnnotatedExample,
    targets: Sequence[AnnotatedExample],
    round_index: int,
    mirrored: bool,
    separator: str,
) -> list[AugmentedExample]:
    context = f"{a.abstract_text}{separator}{b.abstract_text}"
    return [
        AugmentedExample(
            input_text=format_input(t.topic.label, context),
            target_text=t.summary_text,
            topic_label=t.topic.label,
            source_doc_ids=(a.doc_id, b.doc_id),
            round_index=round_index,
            mirrored=mirrored,
        )
        for t in targets
    ]


def materialize_examples(
    plan: PairingPlan,
    annotated: Sequence[AnnotatedExample],
    separator: str = " ",
) -> list[AugmentedExample]:
    """Expand a pairing plan into augmented examples.

    Per pair (i, j): contexts carry both abstracts and both topic/summary
    targets are emitted. Per leftover (i, p): one example targeting i.
    With xx_enabled every example also gets an order-mirrored copy.
    Output order: round, then pair position, then (unmirrored, mirrored).
    """
    n = len(annotated)
    for round_index, pairs in enumerate(plan.rounds):
        for i, j in pairs:
            if not (0 <= i < n and 0 <= j < n):
                raise InputError(f"round {round_index}: pair index ({i}, {j}) out of range for {n} examples")
    for round_index, i, p in plan.leftover_assignments:
        if not (0 <= i < n and 0 <= p < n):
            raise InputError(f"round {round_index}: leftover index ({i}, {p}) out of range for {n} examples")

    leftovers_by_round: dict[int, list[tuple[int, int]]] = {}
    for round_index, doc, partner in plan.leftover_assignments:
        leftovers_by_round.setdefault(round_index, []).append((doc, partner))

    out: list[AugmentedExample] = []
    for round_index, pairs in enumerate(plan.rounds):
        for i, j in pairs:
            a, b = annotated[i], annotated[j]
            out.extend(_pair_examples(a, b, (a, b), round_index, False, separator))
            if plan.xx_enabled:
                out.extend(_pair_examples(b, a, (a, b), round_index, True, separator))
        for i, p in leftovers_by_round.get(round_index, []):
            a, b = annotated[i], annotated[p]
            out.extend(_pair_examples(a, b, (a,), round_index, False, separator))
            if plan.xx_enabled:
                out.extend(_pair_examples(b, a, (a,), round_index, True, separator))
    return out


def materialize_baseline(annotated: Sequence[AnnotatedExample]) -> list[AugmentedExample]:
    """One single-abstract example per annotation, in annotation order."""
    if not annotated:
        raise InputError("no annotated examples to materialize")
    return [
        AugmentedExample(
            input_text=format_input(ex.topic.label, ex.abstract_text),
            target_text=ex.summary_text,
            topic_label=ex.topic.label,
            source_doc_ids=(ex.doc_id, ex.doc_id),
            round_index=0,
            mirrored=False,
        )
        for ex in annotated
    ]


@dataclass
class DatasetManifest:
    config: dict
    example_count: int
    per_round_counts: dict[int, int]
    checksum: str
    char_stats: dict[str, float]

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "example_count": self.example_count,
            "per_round_counts": {str(k): v for k, v in sorted(self.per_round_counts.items())},
            "checksum": self.checksum,
            "char_stats": self.char_stats,
        }


def manifest_path_for(dataset_path: str | Path) -> Path:
    dataset_path = Path(dataset_path)
    return dataset_path.with_name(dataset_path.name + ".manifest.json")


def write_dataset(
    examples: Sequence[AugmentedExample],
    path: str | Path,
    config_echo: dict | None = None,
) -> DatasetManifest:
    """Write the dataset JSONL plus its manifest sidecar.

    The manifest checksum is recomputed from the bytes on disk, so two
    identical runs yield equal checksums and byte-identical files. The
    config echo must carry only semantic knobs: no paths, no timestamps.
    Character-length stats are recorded so a downstream trainer can audit
    its tokenizer truncation exposure.
    """
    if not examples:
        raise InputError("refusing to write an empty dataset")
    path = Path(path)
    records = [
        {
            "input": ex.input_text,
            "target": ex.target_text,
            "topic": ex.topic_label,
            "source_ids": list(ex.source_doc_ids),
            "round": ex.round_index,
            "mirrored": ex.mirrored,
        }
        for ex in examples
    ]
    checksum = write_records(path, records)
    on_disk = sha256_file(path)
    if on_disk != checksum:
        raise IOError(f"checksum mismatch after write: {checksum} vs {on_disk}")

    per_round: dict[int, int] = {}
    for ex in examples:
        per_round[ex.round_index] = per_round.get(ex.round_index, 0) + 1
    input_lens = [len(ex.input_text) for ex in examples]
    target_lens = [len(ex.target_text) for ex in examples]
    manifest = DatasetManifest(
        config=dict(config_echo or {}),
        example_count=len(examples),
        per_round_counts=per_round,
        checksum=checksum,
        char_stats={
            "input_chars_max": max(input_lens),
            "input_chars_mean": statistics.fmean(input_lens),
            "target_chars_max": max(target_lens),
            "target_chars_mean": statistics.fmean(target_lens),
        },
    )
    write_json(manifest_path_for(path), manifest.as_dict())
    return manifest


def load_dataset(path: str | Path) -> list[AugmentedExample]:
    examples = []
    for record in load_records(path):
        try:
            ids = record["source_ids"]
            examples.append(
                AugmentedExample(
                    input_text=record["input"],
                    target_text=record["target"],
                    topic_label=record["topic"],
                    source_doc_ids=(ids[0], ids[1]),
                    round_index=int(record["round"]),
                    mirrored=bool(record["mirrored"]),
                )
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise InputError(f"bad dataset record: {exc}", path=str(path)) from exc
    return examples
