import json
from pathlib import Path
from types import SimpleNamespace

import pytest
from click.testing import CliRunner
from hypothesis import settings

from tcsaug.annotate import AnnotatedExample, TopicCandidate

settings.register_profile("ci", deadline=None, max_examples=50)
settings.load_profile("ci")


def _train_abstract(i):
    return f"term{i:04d} term{i:04d} investigates structured prediction under domain shift"


def _train_summary(i):
    return f"summary of term{i:04d} for structured prediction"


def _test_summary(i, m):
    return f"note{i:04d}x{m} note{i:04d}x{m} note{i:04d}x{m} covers the experiment"


def write_raw_split(path, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return path


@pytest.fixture
def corpus_factory(tmp_path):
    """Writes synthetic raw corpora in the SciTLDR public schema.

    Every document carries a dominant token (term####, or note####x# per
    test summary) so the fallback annotator yields distinct topics. The
    returned namespace records the construction parameters, which serve
    as the oracle for stats and counting assertions.
    """

    def make(n_train=10, n_validation=0, n_test=0, test_summary_counts=None, subdir="data"):
        base = tmp_path / subdir
        if test_summary_counts is None:
            test_summary_counts = [2] * n_test
        assert len(test_summary_counts) == n_test

        train = None
        if n_train:
            train = write_raw_split(
                base / "train.jsonl",
                [
                    {"paper_id": f"train{i:04d}", "source": _train_abstract(i), "target": [_train_summary(i)]}
                    for i in range(n_train)
                ],
            )
        validation = None
        if n_validation:
            validation = write_raw_split(
                base / "dev.jsonl",
                [
                    {"paper_id": f"dev{i:04d}", "source": _train_abstract(i), "target": [_train_summary(i)]}
                    for i in range(n_validation)
                ],
            )
        test = None
        if n_test:
            test = write_raw_split(
                base / "test.jsonl",
                [
                    {
                        "paper_id": f"test{i:04d}",
                        "source": _train_abstract(i),
                        "target": [_test_summary(i, m) for m in range(test_summary_counts[i])],
                    }
                    for i in range(n_test)
                ],
            )
        return SimpleNamespace(
            base=base,
            train=train,
            validation=validation,
            test=test,
            n_train=n_train,
            n_validation=n_validation,
            n_test=n_test,
            test_summary_counts=list(test_summary_counts),
            train_topic=lambda i: f"term{i:04d}",
            test_topic=lambda i, m: f"note{i:04d}x{m}",
        )

    return make


@pytest.fixture
def config_factory(tmp_path):
    """Writes a pipeline config YAML next to the fixture data."""

    def make(fixture=None, name="config.yaml", **overrides):
        cfg = {
            "corpus": {},
            "annotate": {"method": "fallback", "splits": ["train"]},
            "augment": {"seed": 13, "multiplier": 1, "xx": False, "separator": " "},
            "embed": {"kind": "toy", "dim": 64},
            "eval": {"alternative_mode": "cyclic-next"},
            "outputs": {
                "corpus_dir": "out/corpus",
                "annotated_dir": "out/annotated",
                "dataset": "out/dataset.jsonl",
                "report": "out/report.json",
            },
            "workers": 1,
        }
        if fixture is not None:
            if fixture.train:
                cfg["corpus"]["train"] = str(fixture.train)
            if fixture.validation:
                cfg["corpus"]["validation"] = str(fixture.validation)
            if fixture.test:
                cfg["corpus"]["test"] = str(fixture.test)
                cfg["annotate"]["splits"] = ["train", "test"]
        for section, value in overrides.items():
            if isinstance(value, dict) and isinstance(cfg.get(section), dict):
                cfg[section].update(value)
            else:
                cfg[section] = value
        import yaml

        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(cfg, fh)
        return path

    return make


@pytest.fixture
def annotated_factory():
    """Builds in-memory annotated training examples with distinct topics."""

    def make(n, topic=None):
        examples = []
        for i in range(n):
            label = topic(i) if topic else f"topic{i:04d}"
            examples.append(
                AnnotatedExample(
                    doc_id=f"doc{i:04d}",
                    summary_index=0,
                    abstract_text=f"abstract {i} studies {label} in depth",
                    topic=TopicCandidate(label, 0.5, "fallback"),
                    summary_text=f"takeaway {i} about {label}",
                )
            )
        return examples

    return make


@pytest.fixture
def runner():
    return CliRunner()
