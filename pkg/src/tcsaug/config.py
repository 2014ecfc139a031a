"""Pipeline configuration: one YAML file describes a whole experiment.

Paths resolve relative to the config file's directory. The Wikifier
credential is referenced by environment-variable name and never stored
inline. Subcommand flags may override individual fields at run time.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .corpus import Split
from .errors import ConfigError

KNOWN_SECTIONS = {"corpus", "annotate", "augment", "embed", "eval", "outputs", "workers"}


@dataclass
class CorpusConfig:
    train: Path | None = None
    validation: Path | None = None
    test: Path | None = None
    field_map: dict[str, str] = field(default_factory=dict)

    def split_paths(self) -> dict[Split, Path | None]:
        return {Split.TRAIN: self.train, Split.VALIDATION: self.validation, Split.TEST: self.test}


@dataclass
class AnnotateConfig:
    method: str = "fallback"  # fallback | wikifier
    splits: list[str] = field(default_factory=lambda: ["train", "test"])
    target: str = "pair"  # pair | abstract
    on_missing: str = "skip"  # skip | abort
    endpoint: str = ""
    api_key_env: str = "WIKIFIER_API_KEY"
    timeout_s: float = 30.0
    retries: int = 2
    rank_field: str = "pageRank"
    cache_dir: Path | None = None
    stopword_file: Path | None = None

    def credential(self) -> str:
        value = os.environ.get(self.api_key_env, "")
        if not value:
            raise ConfigError(f"environment variable {self.api_key_env} is not set")
        return value


@dataclass
class AugmentConfig:
    seed: int = 13
    multiplier: int = 1
    xx: bool = False
    separator: str = " "


@dataclass
class EmbedConfig:
    kind: str = "toy"  # toy | file | adapter
    dim: int = 256
    exchange_dir: Path | None = None
    response_timeout_s: float = 0.0


@dataclass
class EvalConfig:
    alternative_mode: str = "cyclic-next"  # cyclic-next | best-of-rest


@dataclass
class OutputsConfig:
    corpus_dir: Path = Path("out/corpus")
    annotated_dir: Path = Path("out/annotated")
    dataset: Path = Path("out/dataset.jsonl")
    report: Path = Path("out/report.json")


@dataclass
class PipelineConfig:
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    annotate: AnnotateConfig = field(default_factory=AnnotateConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    embed: EmbedConfig = field(default_factory=EmbedConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)
    workers: int = 1

    def annotated_path(self, split: str) -> Path:
        return Path(self.outputs.annotated_dir) / f"{split}.jsonl"

    def normalized_path(self, split: str) -> Path:
        return Path(self.outputs.corpus_dir) / f"{split}.jsonl"


def _resolve(base: Path, value) -> Path | None:
    if value is None:
        return None
    return (base / str(value)).resolve() if not os.path.isabs(str(value)) else Path(value)


def _section(raw: dict, name: str) -> dict:
    value = raw.get(name, {}) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"config section {name!r} must be a mapping")
    return value


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(raw) - KNOWN_SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")
    base = path.parent.resolve()

    c = _section(raw, "corpus")
    corpus = CorpusConfig(
        train=_resolve(base, c.get("train")),
        validation=_resolve(base, c.get("validation")),
        test=_resolve(base, c.get("test")),
        field_map=dict(c.get("field_map", {}) or {}),
    )

    a = _section(raw, "annotate")
    if "api_key" in a:
        raise ConfigError("credentials must be referenced via api_key_env, never stored in the config")
    annotate = AnnotateConfig(
        method=a.get("method", "fallback"),
        splits=list(a.get("splits", ["train", "test"])),
        target=a.get("target", "pair"),
        on_missing=a.get("on_missing", "skip"),
        endpoint=a.get("endpoint", ""),
        api_key_env=a.get("api_key_env", "WIKIFIER_API_KEY"),
        timeout_s=float(a.get("timeout_s", 30.0)),
        retries=int(a.get("retries", 2)),
        rank_field=a.get("rank_field", "pageRank"),
        cache_dir=_resolve(base, a.get("cache_dir")),
        stopword_file=_resolve(base, a.get("stopword_file")),
    )
    if annotate.method not in ("fallback", "wikifier"):
        raise ConfigError(f"annotate.method must be 'fallback' or 'wikifier', got {annotate.method!r}")
    if annotate.on_missing not in ("skip", "abort"):
        raise ConfigError(f"annotate.on_missing must be 'skip' or 'abort', got {annotate.on_missing!r}")
    if annotate.target not in ("pair", "abstract"):
        raise ConfigError(f"annotate.target must be 'pair' or 'abstract', got {annotate.target!r}")
    bad_splits = set(annotate.splits) - {s.value for s in Split}
    if bad_splits:
        raise ConfigError(f"annotate.splits contains unknown splits: {', '.join(sorted(bad_splits))}")

    g = _section(raw, "augment")
    augment = AugmentConfig(
        seed=int(g.get("seed", 13)),
        multiplier=int(g.get("multiplier", 1)),
        xx=bool(g.get("xx", False)),
        separator=str(g.get("separator", " ")),
    )
    if augment.seed < 0:
        raise ConfigError(f"augment.seed must be non-negative, got {augment.seed}")
    if augment.multiplier < 1:
        raise ConfigError(f"augment.multiplier must be >= 1, got {augment.multiplier}")

    e = _section(raw, "embed")
    embed = EmbedConfig(
        kind=e.get("kind", "toy"),
        dim=int(e.get("dim", 256)),
        exchange_dir=_resolve(base, e.get("exchange_dir")),
        response_timeout_s=float(e.get("response_timeout_s", 0.0)),
    )
    if embed.kind not in ("toy", "file", "adapter"):
        raise ConfigError(f"embed.kind must be toy, file, or adapter, got {embed.kind!r}")
    if embed.dim < 8:
        raise ConfigError(f"embed.dim must be >= 8, got {embed.dim}")
    if embed.kind in ("file", "adapter") and embed.exchange_dir is None:
        raise ConfigError(f"embed.kind={embed.kind} requires embed.exchange_dir")

    v = _section(raw, "eval")
    eval_cfg = EvalConfig(alternative_mode=v.get("alternative_mode", "cyclic-next"))
    if eval_cfg.alternative_mode not in ("cyclic-next", "best-of-rest"):
        raise ConfigError(f"eval.alternative_mode must be cyclic-next or best-of-rest")

    o = _section(raw, "outputs")
    outputs = OutputsConfig(
        corpus_dir=_resolve(base, o.get("corpus_dir", "out/corpus")),
        annotated_dir=_resolve(base, o.get("annotated_dir", "out/annotated")),
        dataset=_resolve(base, o.get("dataset", "out/dataset.jsonl")),
        report=_resolve(base, o.get("report", "out/report.json")),
    )

    workers = int(raw.get("workers", 1))
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")

    return PipelineConfig(
        corpus=corpus,
        annotate=annotate,
        augment=augment,
        embed=embed,
        eval=eval_cfg,
        outputs=outputs,
        workers=workers,
    )
