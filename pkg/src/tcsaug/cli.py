"""Command-line pipeline: ingest -> annotate -> augment -> eval -> report.

One YAML config describes an experiment; subcommand flags override
individual knobs. Data artifacts are byte-identical across reruns with
identical inputs. Structured JSON log lines on stderr carry the checksum
of every artifact consumed or produced; errors are emitted as JSON records
on stderr with distinct exit codes per error family (2 config, 3 input,
4 service).
"""

from __future__ import annotations

import functools
import json
import statistics
import sys
from pathlib import Path

import click

from . import annotate as annotate_mod
from . import augment as augment_mod
from . import corpus as corpus_mod
from . import embed as embed_mod
from . import evaluate as eval_mod
from .config import PipelineConfig, load_config
from .errors import ConfigError, InputError, PipelineError, ServiceError, TransportError
from .lineio import read_json, sha256_file, write_json, write_records

EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_SERVICE = 4


def _exit_code(exc: PipelineError) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (TransportError, ServiceError)):
        return EXIT_SERVICE
    return EXIT_INPUT


def _log(event: str, **fields) -> None:
    click.echo(json.dumps({"event": event, **fields}, ensure_ascii=False), err=True)


def handle_pipeline_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PipelineError as exc:
            record = {"error": type(exc).__name__, "message": str(exc)}
            click.echo(json.dumps(record, ensure_ascii=False), err=True)
            sys.exit(_exit_code(exc))

    return wrapper


@click.group()
@click.option("--config", "-c", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--workers", type=int, default=None, help="Override the config worker count.")
@click.option("--seed", type=int, default=None, help="Override the augmentation seed / label this run's seed.")
@click.pass_context
def main(ctx, config_path: Path, workers: int | None, seed: int | None):
    """Topic-controlled augmentation datasets and win-rate evaluation."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["workers"] = workers
    ctx.obj["seed"] = seed


def _load(ctx) -> PipelineConfig:
    cfg = load_config(ctx.obj["config_path"])
    if ctx.obj.get("workers") is not None:
        if ctx.obj["workers"] < 1:
            raise ConfigError(f"workers must be >= 1, got {ctx.obj['workers']}")
        cfg.workers = ctx.obj["workers"]
    return cfg


@main.command("ingest")
@click.pass_context
@handle_pipeline_errors
def cmd_ingest(ctx):
    """Load the raw corpus, validate it, and write the normalized splits."""
    cfg = _load(ctx)
    paths = cfg.corpus.split_paths()
    if all(p is None for p in paths.values()):
        raise ConfigError("no corpus paths configured under corpus:")
    corpus = corpus_mod.load_corpus_dirs(paths, field_map=cfg.corpus.field_map)
    stats = corpus_mod.validate_corpus(corpus)
    checksums = corpus_mod.write_normalized(corpus, cfg.outputs.corpus_dir, stats)
    for split, checksum in checksums.items():
        _log("artifact_written", path=str(cfg.normalized_path(split)), checksum=checksum)
    click.echo(json.dumps(stats.as_dict(), ensure_ascii=False))


def _build_annotator(cfg: PipelineConfig):
    acfg = cfg.annotate
    if acfg.method == "fallback":
        stopwords = annotate_mod.DEFAULT_STOPWORDS
        if acfg.stopword_file is not None:
            with open(acfg.stopword_file, "r", encoding="utf-8") as fh:
                stopwords = frozenset(w.strip().lower() for w in fh if w.strip())
        return lambda text: annotate_mod.fallback_annotate(text, stopwords), None
    client = annotate_mod.WikifierClient(
        annotate_mod.WikifierConfig(
            endpoint=acfg.endpoint,
            credential=acfg.credential(),
            timeout_s=acfg.timeout_s,
            retries=acfg.retries,
            cache_dir=acfg.cache_dir,
            rank_field=acfg.rank_field,
        )
    )
    return client.wikify, client


@main.command("annotate")
@click.pass_context
@handle_pipeline_errors
def cmd_annotate(ctx):
    """Attach one salient topic to every (document, summary) pair."""
    cfg = _load(ctx)
    annotator, client = _build_annotator(cfg)
    for split in cfg.annotate.splits:
        normalized = cfg.normalized_path(split)
        if not normalized.exists():
            raise InputError(f"normalized corpus for split {split!r} not found; run ingest first", path=str(normalized))
        pairs = corpus_mod.load_normalized(normalized, corpus_mod.Split(split))
        examples, skipped = annotate_mod.annotate_corpus(
            pairs,
            annotator,
            annotation_target=cfg.annotate.target,
            on_missing=cfg.annotate.on_missing,
            workers=cfg.workers,
        )
        checksum = annotate_mod.write_annotated(examples, cfg.annotated_path(split))
        _log(
            "annotate_done",
            split=split,
            method=cfg.annotate.method,
            examples=len(examples),
            skipped=len(skipped),
            service_calls=client.service_calls if client else 0,
            cache_hits=client.cache_hits if client else 0,
            path=str(cfg.annotated_path(split)),
            checksum=checksum,
        )
        click.echo(json.dumps({"split": split, "examples": len(examples), "skipped": len(skipped)}))


def _annotator_method(annotated) -> str:
    methods = {ex.topic.method for ex in annotated}
    if len(methods) > 1:
        raise InputError(f"annotated file mixes topic methods {sorted(methods)}; one method per run")
    return next(iter(methods))


@main.command("augment")
@click.option("--multiplier", "-k", type=int, default=None, help="Pairing rounds (kX).")
@click.option("--xx/--no-xx", "xx", default=None, help="Also emit order-mirrored contexts.")
@click.option("--seed", type=int, default=None)
@click.option("--separator", type=str, default=None, help="String joining the two abstracts.")
@click.option("--baseline", is_flag=True, help="Emit the unpaired single-abstract dataset.")
@click.option("--output", type=click.Path(path_type=Path), default=None, help="Dataset path override.")
@click.pass_context
@handle_pipeline_errors
def cmd_augment(ctx, multiplier, xx, seed, separator, baseline, output):
    """Materialize the baseline or pairwise-augmented training dataset."""
    cfg = _load(ctx)
    k = multiplier if multiplier is not None else cfg.augment.multiplier
    use_xx = xx if xx is not None else cfg.augment.xx
    use_seed = seed if seed is not None else (ctx.obj.get("seed") if ctx.obj.get("seed") is not None else cfg.augment.seed)
    sep = separator if separator is not None else cfg.augment.separator
    out_path = output if output is not None else cfg.outputs.dataset

    annotated_path = cfg.annotated_path("train")
    if not annotated_path.exists():
        raise InputError("annotated train file not found; run annotate first", path=str(annotated_path))
    annotated = annotate_mod.load_annotated(annotated_path)
    if not annotated:
        raise InputError("annotated train file is empty", path=str(annotated_path))
    method = _annotator_method(annotated)
    _log("artifact_consumed", path=str(annotated_path), checksum=sha256_file(annotated_path))

    config_echo = {
        "baseline": baseline,
        "seed": use_seed,
        "multiplier": k,
        "xx": use_xx,
        "separator": sep,
        "annotator_method": method,
    }
    if baseline:
        examples = augment_mod.materialize_baseline(annotated)
    else:
        plan = augment_mod.build_pairing_plan(
            len(annotated), k, use_xx, use_seed, topic_labels=[ex.topic.label for ex in annotated]
        )
        config_echo["partner_dedup"] = plan.partner_dedup
        config_echo["retry_budget"] = augment_mod.RETRY_BUDGET
        examples = augment_mod.materialize_examples(plan, annotated, separator=sep)

    manifest = augment_mod.write_dataset(examples, out_path, config_echo)
    _log("artifact_written", path=str(out_path), checksum=manifest.checksum, examples=manifest.example_count)
    click.echo(json.dumps({"example_count": manifest.example_count, "checksum": manifest.checksum}))


def _build_store(cfg: PipelineConfig, texts: list[str]) -> embed_mod.EmbeddingStore:
    ecfg = cfg.embed
    if ecfg.kind == "toy":
        return embed_mod.make_toy_store(ecfg.dim)
    if ecfg.kind == "file":
        return embed_mod.read_response_file(Path(ecfg.exchange_dir) / embed_mod.RESPONSE_FILENAME)
    return embed_mod.request_embeddings(texts, ecfg.exchange_dir, timeout_s=ecfg.response_timeout_s)


@main.command("eval")
@click.argument("model_outputs", type=click.Path(path_type=Path), required=False)
@click.option("--emit-prompts", type=click.Path(path_type=Path), default=None,
              help="Write test prompts ({record_id, target_index, input}) and exit.")
@click.option("--scores", type=click.Path(path_type=Path), default=None,
              help="Externally computed per-example scores to fold into the report.")
@click.option("--output", type=click.Path(path_type=Path), default=None, help="Report path override.")
@click.pass_context
@handle_pipeline_errors
def cmd_eval(ctx, model_outputs, emit_prompts, scores, output):
    """Score generated summaries with the contrastive win-rate metric."""
    cfg = _load(ctx)
    annotated_path = cfg.annotated_path("test")
    if not annotated_path.exists():
        raise InputError("annotated test file not found; run annotate first", path=str(annotated_path))
    records = eval_mod.build_test_records(annotate_mod.load_annotated(annotated_path))

    if emit_prompts is not None:
        prompt_records = [
            {
                "record_id": r.record_id,
                "target_index": m,
                "input": augment_mod.format_input(topic, r.abstract_text),
            }
            for r in records
            for m, (_, topic) in enumerate(r.targets)
        ]
        checksum = write_records(emit_prompts, prompt_records)
        _log("artifact_written", path=str(emit_prompts), checksum=checksum, prompts=len(prompt_records))
        click.echo(json.dumps({"prompts": len(prompt_records)}))
        return

    if model_outputs is None:
        raise InputError("model-output file argument is required (or use --emit-prompts)")
    outputs = eval_mod.load_model_outputs(model_outputs)
    valid_keys = {(r.record_id, m) for r in records for m in range(len(r.targets))}

    topic_texts = [topic for r in records for _, topic in r.targets]
    store = _build_store(cfg, topic_texts + list(outputs.values()))

    mode = cfg.eval.alternative_mode
    templates, skip_report = eval_mod.expand_test_records(
        records, mode=mode, store=store if mode == "best-of-rest" else None
    )
    instances = eval_mod.join_model_outputs(templates, outputs, valid_keys)

    config_echo = {
        "alternative_mode": mode,
        "embedder_kind": cfg.embed.kind,
        "embedder_dim": cfg.embed.dim,
        "seed": ctx.obj.get("seed"),
    }
    report = eval_mod.win_rate(instances, store, config_echo=config_echo, skips=skip_report)
    if scores is not None:
        known = {inst.instance_id for inst in instances}
        _, mean = eval_mod.ingest_external_scores(scores, known_ids=known)
        report.external_score_mean = mean

    out_path = output if output is not None else cfg.outputs.report
    write_json(out_path, report.as_dict())
    _log("artifact_written", path=str(out_path), wins=report.wins, ties=report.ties, losses=report.losses)
    click.echo(json.dumps(report.as_dict(), ensure_ascii=False))


@main.command("report")
@click.argument("report_paths", type=click.Path(path_type=Path), nargs=-1, required=True)
@click.option("--output", type=click.Path(path_type=Path), default=None, help="Aggregate JSON path.")
@click.pass_context
@handle_pipeline_errors
def cmd_report(ctx, report_paths, output):
    """Aggregate multi-seed win-rate reports into a mean +/- std table."""
    _load(ctx)  # validates the config even though only reports are read
    reports = []
    for path in report_paths:
        if not Path(path).exists():
            raise InputError("report file not found", path=str(path))
        raw = read_json(path)
        try:
            reports.append(
                eval_mod.WinRateReport(
                    wins=raw["wins"],
                    ties=raw["ties"],
                    losses=raw["losses"],
                    total=raw["total"],
                    win_rate_percent=raw["win_rate_percent"],
                    embedder=raw.get("embedder", {}),
                    config_echo=raw.get("config_echo", {}),
                    skips=raw.get("skips", {}),
                    external_score_mean=raw.get("external_score_mean"),
                )
            )
        except KeyError as exc:
            raise InputError(f"report missing field {exc}", path=str(path)) from exc

    agg = eval_mod.aggregate_runs(reports)
    ext_values = [r.external_score_mean for r in reports]
    external = None
    if all(v is not None for v in ext_values):
        external = {
            "runs": ext_values,
            "mean": statistics.fmean(ext_values),
            "std": statistics.stdev(ext_values) if len(ext_values) >= 2 else None,
        }

    echo = dict(reports[0].config_echo)
    echo.pop("seed", None)
    result = {
        "n_runs": len(reports),
        "win_rate": {"runs": agg.win_rates, "mean": agg.mean, "std": agg.std},
        "external_score": external,
        "config_echo": echo,
    }
    if output is not None:
        write_json(output, result)
        _log("artifact_written", path=str(output))

    lines = [f"runs: {len(reports)}", f"win rate (%): {agg.formatted()}"]
    if external is not None:
        if external["std"] is None:
            lines.append(f"external score: {external['mean']:.4f}")
        else:
            lines.append(f"external score: {external['mean']:.4f} ± {external['std']:.4f}")
    click.echo("\n".join(lines))
    click.echo(json.dumps(result, ensure_ascii=False))


if __name__ == "__main__":
    main()
