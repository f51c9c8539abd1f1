# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Command-line front end.

Every subcommand reads files, calls the library and writes files. Exit codes:
0 on success, 1 on validation or usage errors, 2 on I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import importlib
import importlib.util
import logging
import sys
from collections import defaultdict
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import __version__
from .agreement import reliability_by_source, reliability_records
from .cm_metrics import (
    MetricRow,
    Segmenter,
    fertility,
    fertility_by_script,
    metric_rows,
    read_metric_csv,
    summarize_rows,
    write_metric_csv,
)
from .config import RunConfig, resolve_config
from .corpus_model import (
    AnnotationTriple,
    Perturbation,
    RatingSummary,
    TaggedSentence,
    filter_exclusions,
    load_annotations,
    load_corpus,
    load_scores,
    save_corpus,
    summarize,
)
from .curation import PerturbSpec, Split, extract_mixed_ngrams, perturb_corpus, prune_by_disagreement, stratified_split
from .errors import CmlabError, CorpusFormatError, DegenerateDataError
from .log_config import DEFAULT_LOG_LEVEL, LOG_LEVEL_CHOICES, configure_logging, resolve_level
from .predictor import (
    EvalResult,
    PredictorModel,
    TrainConfig,
    evaluate,
    fit_predictor,
    human_baseline,
    load_model,
    random_baseline,
    save_model,
    transfer_evaluate,
)
from .reports import (
    anova_markdown,
    correlation_markdown,
    dataset_markdown,
    error_markdown,
    eval_markdown,
    impact_markdown,
    read_predictions_csv,
    regression_markdown,
    reliability_markdown,
    render_histogram,
    write_correlation_csv,
    write_predictions_csv,
    write_reliability_csv,
    write_report,
)
from .stats_analysis import (
    ERROR_HIST_RANGE,
    anova_by_pos,
    correlation_matrix,
    error_analysis,
    perturbation_impact,
    regression_from_rows,
)
from .translators import DictionaryTranslator, HttpTranslator, TranslatorPort

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2

TARGET_COLUMNS = ("average", "disagreement")
MIN_TRAIN_SAMPLES = 10
_PATH_ARGS = (
    "input",
    "out",
    "out_dir",
    "scores",
    "metrics",
    "ratings",
    "corpus",
    "features",
    "dev",
    "model",
    "predictions",
    "predictions_out",
    "history_out",
    "offline_stub",
    "segmenter",
    "transfer_corpus",
    "transfer_ratings",
)
_OVERRIDES = {
    "seed": "seed",
    "jobs": "jobs",
    "pairs": "swap_pairs",
    "fraction": "delete_fraction",
    "threshold": "disagreement_threshold",
    "hidden": "hidden",
    "learning_rate": "learning_rate",
    "epochs": "epochs",
    "patience": "patience",
    "batch_size": "batch_size",
    "include_external": "include_external",
    "error_bin_width": "error_bin_width",
}


class _UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors by raising, so ``main`` can map them to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _train_config(config: RunConfig) -> TrainConfig:
    return TrainConfig(
        hidden=config.hidden,
        learning_rate=config.learning_rate,
        epochs=config.epochs,
        patience=config.patience,
        batch_size=config.batch_size,
        seed=config.seed,
    )


def _summaries(triples: Sequence[AnnotationTriple]) -> dict[str, RatingSummary]:
    kept, _ = filter_exclusions(list(triples))
    return {t.sample_id: summarize(t) for t in kept}


def _corpus_triples(corpus: Sequence[TaggedSentence]) -> list[AnnotationTriple]:
    return [s.annotation for s in corpus if s.annotation is not None]


def _read_features(path: str) -> tuple[list[MetricRow], dict[str, float]]:
    rows, extra = read_metric_csv(path)
    if "average" not in extra:
        raise CorpusFormatError("feature CSV needs an 'average' column (written by 'cmlab split')", path)
    targets = {}
    for sid, raw in extra["average"].items():
        try:
            targets[sid] = float(raw)
        except ValueError:
            raise CorpusFormatError(f"average for '{sid}' is not a number: {raw!r}", path) from None
    return rows, targets


def _write_feature_split(rows: Sequence[MetricRow], summaries: dict[str, RatingSummary], path: Path) -> None:
    extra = {
        "average": {r.sample_id: repr(summaries[r.sample_id].average) for r in rows},
        "disagreement": {r.sample_id: summaries[r.sample_id].disagreement for r in rows},
    }
    write_metric_csv(list(rows), path, extra)


def _translator(args) -> TranslatorPort:
    if args.offline_stub:
        return DictionaryTranslator.from_tsv(args.offline_stub)
    try:
        return HttpTranslator(url=args.translator_url)
    except OSError as e:
        raise CmlabError(f"backtranslate has no translator: {e}") from e


def load_segmenter(spec: str) -> Segmenter:
    """Resolve ``path/to/file.py:func`` or ``package.module:func`` to a callable."""
    target, sep, attr = spec.rpartition(":")
    if not sep or not target or not attr:
        raise CmlabError(f"Segmenter '{spec}' must look like FILE.py:func or module:func.")
    if target.endswith(".py"):
        path = Path(target)
        if not path.is_file():
            raise FileNotFoundError(2, "No such file or directory", str(path))
        module_spec = importlib.util.spec_from_file_location("cmlab_segmenter", str(path))
        if module_spec is None or module_spec.loader is None:
            raise CmlabError(f"Cannot load segmenter module from {path}.")
        module = importlib.util.module_from_spec(module_spec)
        module_spec.loader.exec_module(module)
    else:
        module = importlib.import_module(target)
    func = getattr(module, attr, None)
    if not callable(func):
        raise CmlabError(f"Segmenter '{spec}': '{attr}' is not a callable in {target}.")
    return func


def _sibling(out: Path, suffix: str) -> Path:
    return out.with_name(f"{out.stem}_{suffix}")


def _groups_by_source(corpus: Optional[Sequence[TaggedSentence]], ids: Sequence[str]) -> dict[str, list[str]]:
    """Ids grouped by source value in enum order, followed by 'all'."""
    groups: dict[str, list[str]] = defaultdict(list)
    if corpus is not None:
        source_of = {s.id: s.source.value for s in corpus}
        for sid in ids:
            if sid in source_of:
                groups[source_of[sid]].append(sid)
    ordered = {name: groups[name] for name in sorted(groups)}
    ordered["all"] = list(ids)
    return ordered


def _print_eval(label: str, result: EvalResult) -> None:
    print(f"{label}: rmse={result.rmse:.4f} mae={result.mae:.4f} n={result.n}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_metrics(args, config: RunConfig) -> int:
    corpus = load_corpus(args.input)
    scores = load_scores(args.scores) if args.scores else None
    rows = metric_rows(corpus, scores, jobs=config.jobs)
    write_metric_csv(rows, args.out)
    logger.info(f"Wrote {len(rows)} metric row(s) to {args.out}")
    return EXIT_OK


def cmd_perturb(args, config: RunConfig) -> int:
    corpus = load_corpus(args.input)
    kind = Perturbation(args.kind)
    spec = PerturbSpec(kind, config.seed, config.swap_pairs, args.count, config.delete_fraction)
    translator = _translator(args) if kind is Perturbation.BACK_TRANSLATE else None
    out = perturb_corpus(corpus, spec, translator, jobs=config.jobs)
    save_corpus(out, args.out)
    return EXIT_OK


def cmd_ngrams(args, config: RunConfig) -> int:
    corpus = load_corpus(args.input)
    ngrams = extract_mixed_ngrams(corpus, args.n)
    if args.top:
        ngrams = ngrams[: args.top]
    with open(args.out, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["ngram", "frequency"])
        for gram, count in ngrams:
            writer.writerow([" ".join(gram), count])
    logger.info(f"Wrote {len(ngrams)} mixed {args.n}-gram(s) to {args.out}")
    return EXIT_OK


def _reliability_tables(triples: Sequence[AnnotationTriple], corpus: Optional[Sequence[TaggedSentence]]):
    kept, _ = filter_exclusions(list(triples))
    by_id = {t.sample_id: t for t in kept}
    groups = _groups_by_source(corpus, [t.sample_id for t in kept])
    return reliability_by_source({name: reliability_records([by_id[i] for i in ids]) for name, ids in groups.items()})


def cmd_agree(args, config: RunConfig) -> int:
    triples = load_annotations(args.input)
    corpus = load_corpus(args.corpus) if args.corpus else None
    tables = _reliability_tables(triples, corpus)
    write_reliability_csv(tables, args.out)
    if args.markdown:
        Path(args.markdown).write_text(reliability_markdown(tables) + "\n", encoding="utf-8")
    return EXIT_OK


def _split_rows(rows: Sequence[MetricRow], summaries: dict[str, RatingSummary], config: RunConfig):
    """Prune high-disagreement samples and stratify the rest. Returns ``{Split: rows}``."""
    rated = [(r.sample_id, summaries[r.sample_id]) for r in rows if r.sample_id in summaries]
    retained = set(prune_by_disagreement(rated, config.disagreement_threshold))
    threshold = config.disagreement_threshold
    logger.info(f"Kept {len(retained)}/{len(rated)} rated sample(s) with disagreement <= {threshold}")
    records = [(sid, s) for sid, s in rated if sid in retained]
    assignment = stratified_split(records, config.split_ratios, config.rating_bins, config.seed, config.split_tolerance)
    return assignment, {split: [r for r in rows if assignment.assignment.get(r.sample_id) is split] for split in Split}


def cmd_split(args, config: RunConfig) -> int:
    rows, _ = read_metric_csv(args.metrics)
    summaries = _summaries(load_annotations(args.ratings))
    assignment, parts = _split_rows(rows, summaries, config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for split, part in parts.items():
        _write_feature_split(part, summaries, out_dir / f"{split.value}.csv")
    with open(out_dir / "split.csv", "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["id", "split"])
        for row in rows:
            if row.sample_id in assignment.assignment:
                writer.writerow([row.sample_id, assignment[row.sample_id].value])
    sizes = assignment.sizes()
    logger.info(f"Split sizes: train={sizes[Split.TRAIN]} dev={sizes[Split.DEV]} test={sizes[Split.TEST]}")
    return EXIT_OK


# (file suffix, title, bin width, range, value getter)
_METRIC_HISTOGRAMS = [
    ("cmi", "CMI", 5.0, (0.0, 50.0), lambda r: r.cmi),
    ("switch_points", "Switch points", 1.0, None, lambda r: r.switch_points),
    ("burstiness", "Burstiness", 0.1, (-1.0, 1.0), lambda r: r.burstiness),
    ("symcom", "Sentence SyMCoM", 0.1, (0.0, 1.0), lambda r: r.symcom_sentence),
]


def _metric_histograms(rows: Sequence[MetricRow], group: str, out: Path) -> None:
    """Per-metric distribution charts for one source group; metrics absent on every row are skipped."""
    for suffix, title, width, value_range, value in _METRIC_HISTOGRAMS:
        series = [float(v) for v in map(value, rows) if v is not None]
        if not series:
            logger.info(f"No {title} values for '{group}'; histogram skipped")
            continue
        chart = _sibling(out, f"{group}_{suffix}.svg")
        render_histogram(series, width, chart, f"{title} ({group})", title, value_range)


def _analysis_sections(
    rows: Sequence[MetricRow],
    summaries: dict[str, RatingSummary],
    corpus: Optional[Sequence[TaggedSentence]],
    out: Path,
    config: RunConfig,
) -> list[tuple[str, str]]:
    rated = [r for r in rows if r.sample_id in summaries]
    if not rated:
        raise DegenerateDataError("No metric row has a rating; check that ids match between files.")
    averages = {r.sample_id: summaries[r.sample_id].average for r in rated}
    sections: list[tuple[str, str]] = []

    all_by_id = {r.sample_id: r for r in rows}
    dataset = {}
    for name, ids in _groups_by_source(corpus, list(all_by_id)).items():
        subset = [all_by_id[i] for i in ids]
        if not subset:
            continue
        dataset[name] = summarize_rows(subset)
        _metric_histograms(subset, name, out)
    sections.append(("Dataset statistics", dataset_markdown(dataset)))

    render_histogram(
        list(averages.values()),
        config.rating_bin_width,
        _sibling(out, "ratings.svg"),
        "Average rating",
        "average rating",
        (1.0, 5.0),
    )
    render_histogram(
        [summaries[r.sample_id].disagreement for r in rated],
        1.0,
        _sibling(out, "disagreement.svg"),
        "Disagreement",
        "sum of pairwise differences",
    )

    cells = correlation_matrix(
        rated,
        {
            "average": [averages[r.sample_id] for r in rated],
            "disagreement": [float(summaries[r.sample_id].disagreement) for r in rated],
        },
    )
    write_correlation_csv(cells, _sibling(out, "correlations.csv"))
    sections.append(("Correlations", correlation_markdown(cells)))

    groups = _groups_by_source(corpus, [r.sample_id for r in rated])
    by_id = {r.sample_id: r for r in rated}
    regressions = {}
    anovas = {}
    for name, ids in groups.items():
        subset = [by_id[i] for i in ids]
        try:
            regressions[name] = regression_from_rows(subset, averages)
        except CmlabError as e:
            logger.warning(f"Regression for '{name}' skipped: {e}")
        anovas[name] = anova_by_pos(averages, subset)
    if regressions:
        sections.append(("Regression on normalized metrics", regression_markdown(regressions)))
    sections.append(("ANOVA of average rating by SyMCoM category", anova_markdown(anovas)))
    if corpus is not None:
        sections.append(("Perturbation impact", impact_markdown(perturbation_impact(averages, corpus))))
    return sections


def cmd_analyze(args, config: RunConfig) -> int:
    rows, _ = read_metric_csv(args.metrics)
    summaries = _summaries(load_annotations(args.ratings))
    corpus = load_corpus(args.corpus) if args.corpus else None
    out = Path(args.out)
    sections = _analysis_sections(rows, summaries, corpus, out, config)
    if args.predictions:
        predictions, truths = read_predictions_csv(args.predictions)
        source_of = {s.id: s.source.value for s in corpus} if corpus is not None else None
        report = error_analysis(predictions, truths, rows, config.error_bin_width, config.rating_bins, source_of)
        render_histogram(
            list(report.errors.values()),
            config.error_bin_width,
            _sibling(out, "errors.svg"),
            "Prediction error",
            "truth - prediction",
            ERROR_HIST_RANGE,
        )
        sections.append(("Error analysis", error_markdown(report)))
    write_report(out, "cmlab analysis", config, sections)
    return EXIT_OK


def cmd_train(args, config: RunConfig) -> int:
    train_rows, train_targets = _read_features(args.features)
    dev_rows, dev_targets = _read_features(args.dev)
    result = fit_predictor(
        train_rows, train_targets, dev_rows, dev_targets, _train_config(config), config.include_external
    )
    save_model(result.model, args.out)
    if args.history_out:
        with open(args.history_out, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["epoch", "train_loss", "dev_rmse", "best_dev_rmse"])
            for rec in result.history:
                writer.writerow([rec.epoch, repr(rec.train_loss), repr(rec.dev_rmse), repr(rec.best_dev_rmse)])
    print(f"best dev rmse={result.best_dev_rmse:.4f} epochs={len(result.history)}")
    return EXIT_OK


def cmd_eval(args, config: RunConfig) -> int:
    model = load_model(args.model)
    rows, targets = _read_features(args.features)
    result = transfer_evaluate(model, rows, targets)
    if args.predictions_out:
        predictions = model.predict(rows)
        write_predictions_csv(
            [r.sample_id for r in rows], predictions, [targets[r.sample_id] for r in rows], args.predictions_out
        )
    _print_eval("model", result)
    return EXIT_OK


def cmd_baseline(args, config: RunConfig) -> int:
    if args.kind == "random":
        if not args.features:
            raise CmlabError("baseline --kind random needs --features (a split CSV with an 'average' column).")
        _, targets = _read_features(args.features)
        _print_eval("random", random_baseline([targets[k] for k in sorted(targets)], config.seed))
        return EXIT_OK
    if not args.ratings:
        raise CmlabError("baseline --kind human needs --ratings (an annotation CSV).")
    triples, _ = filter_exclusions(load_annotations(args.ratings))
    if args.features:
        _, targets = _read_features(args.features)
        triples = [t for t in triples if t.sample_id in targets]
    _print_eval("human", human_baseline(triples))
    return EXIT_OK


def cmd_fertility(args, config: RunConfig) -> int:
    corpus = load_corpus(args.input)
    segmenter = load_segmenter(args.segmenter)
    overall = fertility(corpus, segmenter)
    by_script = fertility_by_script(corpus, segmenter)
    lines = [("all", overall)] + [(form.value, value) for form, value in by_script.items()]
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["script", "fertility"])
            for label, value in lines:
                writer.writerow([label, f"{value:.6f}"])
    for label, value in lines:
        print(f"{label}: fertility={value:.4f}")
    return EXIT_OK


def _evaluate_group(
    name: str,
    rows: Sequence[MetricRow],
    summaries: dict[str, RatingSummary],
    triples_by_id: dict[str, AnnotationTriple],
    config: RunConfig,
    out_dir: Path,
) -> tuple[dict[str, Optional[EvalResult]], Optional[PredictorModel], list[tuple[str, str]]]:
    """Split, train and evaluate one source group against both baselines."""
    _, parts = _split_rows(rows, summaries, config)
    train_rows, dev_rows, test_rows = parts[Split.TRAIN], parts[Split.DEV], parts[Split.TEST]
    for split, part in parts.items():
        _write_feature_split(part, summaries, out_dir / f"{name}_{split.value}.csv")
    results: dict[str, Optional[EvalResult]] = {}
    if len(train_rows) < MIN_TRAIN_SAMPLES or not dev_rows or not test_rows:
        logger.warning(f"Source '{name}' has too few samples to train ({len(train_rows)} train); skipped")
        return results, None, []
    averages = {sid: s.average for sid, s in summaries.items()}
    truths = [averages[r.sample_id] for r in test_rows]
    results["Random"] = random_baseline(truths, config.seed)
    results["Human"] = human_baseline([triples_by_id[r.sample_id] for r in test_rows])

    trained = fit_predictor(train_rows, averages, dev_rows, averages, _train_config(config), False)
    save_model(trained.model, out_dir / f"{name}_model.cmlab")
    predictions = trained.model.predict(test_rows)
    results["FFN (metrics)"] = evaluate(predictions, truths)
    if config.include_external and all(r.external_score is not None for r in rows):
        with_external = fit_predictor(train_rows, averages, dev_rows, averages, _train_config(config), True)
        results["FFN (metrics + external score)"] = evaluate(with_external.model.predict(test_rows), truths)

    ids = [r.sample_id for r in test_rows]
    write_predictions_csv(ids, predictions, truths, out_dir / f"{name}_predictions.csv")
    errors = error_analysis(
        dict(zip(ids, (float(p) for p in predictions))),
        dict(zip(ids, truths)),
        test_rows,
        config.error_bin_width,
        config.rating_bins,
    )
    render_histogram(
        list(errors.errors.values()),
        config.error_bin_width,
        out_dir / f"{name}_errors.svg",
        f"Prediction error ({name})",
        "truth - prediction",
        ERROR_HIST_RANGE,
    )
    return results, trained.model, [(f"Error analysis ({name})", error_markdown(errors))]


def cmd_report(args, config: RunConfig) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = load_corpus(args.corpus)
    triples = load_annotations(args.ratings) if args.ratings else _corpus_triples(corpus)
    if not triples:
        raise CmlabError("No annotations: pass --ratings or embed 'ratings' in the corpus records.")
    scores = load_scores(args.scores) if args.scores else None
    rows = metric_rows(corpus, scores, jobs=config.jobs)
    write_metric_csv(rows, out_dir / "metrics.csv")

    tables = _reliability_tables(triples, corpus)
    write_reliability_csv(tables, out_dir / "reliability.csv")
    sections = [("Inter-annotator agreement (ICC1k)", reliability_markdown(tables))]

    summaries = _summaries(triples)
    sections += _analysis_sections(rows, summaries, corpus, out_dir / "report.md", config)

    kept = {t.sample_id: t for t in filter_exclusions(list(triples))[0]}
    groups = _groups_by_source(corpus, [r.sample_id for r in rows])
    by_id = {r.sample_id: r for r in rows}
    evals: dict[str, dict[str, Optional[EvalResult]]] = defaultdict(dict)
    models: dict[str, PredictorModel] = {}
    error_sections: list[tuple[str, str]] = []
    for name, ids in groups.items():
        results, model, extra = _evaluate_group(name, [by_id[i] for i in ids], summaries, kept, config, out_dir)
        for label, result in results.items():
            evals[label][name] = result
        if model is not None:
            models[name] = model
        error_sections += extra
    if evals:
        sections.append(("Acceptability prediction", eval_markdown(evals)))
    sections += error_sections

    if args.transfer_corpus and models:
        foreign = load_corpus(args.transfer_corpus)
        foreign_triples = load_annotations(args.transfer_ratings) if args.transfer_ratings else _corpus_triples(foreign)
        foreign_avg = {sid: s.average for sid, s in _summaries(foreign_triples).items()}
        foreign_rows = [r for r in metric_rows(foreign, jobs=config.jobs) if r.sample_id in foreign_avg]
        transfer: dict[str, dict[str, Optional[EvalResult]]] = {"Random": {}}
        for name, model in models.items():
            transfer[f"FFN ({name})"] = {"transfer": transfer_evaluate(model, foreign_rows, foreign_avg)}
        transfer["Random"]["transfer"] = random_baseline([foreign_avg[r.sample_id] for r in foreign_rows], config.seed)
        sections.append(("Transfer evaluation", eval_markdown(transfer)))

    write_report(out_dir / "report.md", "cmlab report", config, sections)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser and dispatch
# ---------------------------------------------------------------------------


def _common_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Seed for every random choice (default 0)")
    common.add_argument("--config", default=None, help="key=value configuration file; flags override it")
    common.add_argument("--jobs", type=int, default=None, help="Worker threads for per-sentence work")
    common.add_argument(
        "--log-level",
        choices=LOG_LEVEL_CHOICES,
        default=None,
        help=f"Root logger level (default: {DEFAULT_LOG_LEVEL})",
    )
    common.add_argument("--quiet", action="store_true", help="Only log errors")
    return common


def _add_training_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hidden", type=int, default=None, help="Hidden units (default 32)")
    p.add_argument("--learning-rate", type=float, default=None, help="Adam learning rate (default 1e-3)")
    p.add_argument("--epochs", type=int, default=None, help="Epoch budget (default 500)")
    p.add_argument("--patience", type=int, default=None, help="Epochs without dev improvement before stopping")
    p.add_argument("--batch-size", type=int, default=None, help="Minibatch size (default 32)")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = _ArgumentParser(
        prog="cmlab",
        description="Code-mixing corpus analysis toolkit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s metrics --in corpus.jsonl --out metrics.csv
  %(prog)s perturb --in corpus.jsonl --kind swap --seed 7 --out swapped.jsonl
  %(prog)s agree --in annotations.csv --corpus corpus.jsonl --out reliability.csv
  %(prog)s split --metrics metrics.csv --ratings annotations.csv --out-dir splits/
  %(prog)s train --features splits/train.csv --dev splits/dev.csv --out model.cmlab
  %(prog)s eval --model model.cmlab --features splits/test.csv --predictions-out preds.csv
  %(prog)s report --corpus corpus.jsonl --ratings annotations.csv --out-dir report/
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, handler: Callable, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(handler=handler)
        return p

    p = add("metrics", cmd_metrics, "Compute per-sentence code-mixing metrics")
    p.add_argument("--in", dest="input", required=True, help="Corpus JSONL")
    p.add_argument("--scores", help="Optional external score CSV (id,score)")
    p.add_argument("--out", required=True, help="Metric CSV to write")

    p = add("perturb", cmd_perturb, "Create perturbed negative samples")
    p.add_argument("--in", dest="input", required=True, help="Corpus JSONL")
    p.add_argument("--out", required=True, help="Perturbed corpus JSONL to write")
    p.add_argument("--kind", required=True, choices=[k.value for k in Perturbation])
    p.add_argument("--pairs", type=int, default=None, help="Token pairs to swap (default 1)")
    p.add_argument("--count", type=int, default=None, help="Tokens to delete (default: from --fraction)")
    p.add_argument("--fraction", type=float, default=None, help="Delete fraction, rounded half up (default 0.1)")
    p.add_argument("--offline-stub", default=None, help="Tab-separated word map used instead of the HTTP translator")
    p.add_argument("--translator-url", default=None, help="Translator endpoint (default $CMLAB_TRANSLATOR_URL)")

    p = add("ngrams", cmd_ngrams, "Extract code-mixed n-grams")
    p.add_argument("--in", dest="input", required=True, help="Corpus JSONL")
    p.add_argument("--n", type=int, default=2, choices=[2, 3, 4])
    p.add_argument("--top", type=int, default=0, help="Keep only the N most frequent (0 = all)")
    p.add_argument("--out", required=True, help="CSV to write (ngram,frequency)")

    p = add("agree", cmd_agree, "Inter-annotator reliability table")
    p.add_argument("--in", dest="input", required=True, help="Annotation CSV")
    p.add_argument("--corpus", help="Corpus JSONL; adds one table per source")
    p.add_argument("--out", required=True, help="Reliability CSV to write")
    p.add_argument("--markdown", help="Optional markdown table to write")

    p = add("split", cmd_split, "Prune by disagreement and make stratified train/dev/test splits")
    p.add_argument("--metrics", required=True, help="Metric CSV")
    p.add_argument("--ratings", required=True, help="Annotation CSV")
    p.add_argument("--out-dir", required=True, help="Directory for train/dev/test/split CSVs")
    p.add_argument("--threshold", type=int, default=None, help="Max disagreement kept (default 4)")

    p = add("analyze", cmd_analyze, "Correlations, regression, ANOVA and error analysis")
    p.add_argument("--metrics", required=True, help="Metric CSV")
    p.add_argument("--ratings", required=True, help="Annotation CSV")
    p.add_argument("--corpus", help="Corpus JSONL; adds per-source tables and perturbation impact")
    p.add_argument("--predictions", help="Prediction CSV (id,prediction,truth) for error analysis")
    p.add_argument("--error-bin-width", type=float, default=None, help="Error histogram bin width (default 0.25)")
    p.add_argument("--out", required=True, help="Markdown report; sibling CSV/SVG files share its stem")

    p = add("train", cmd_train, "Train the feature-based predictor")
    p.add_argument("--features", required=True, help="Training split CSV")
    p.add_argument("--dev", required=True, help="Dev split CSV")
    p.add_argument("--out", required=True, help="Model file to write")
    p.add_argument("--history-out", help="Optional per-epoch loss CSV")
    p.add_argument("--include-external", action="store_true", default=None, help="Use external_score as a feature")
    _add_training_args(p)

    p = add("eval", cmd_eval, "Evaluate a trained model")
    p.add_argument("--model", required=True, help="Model file")
    p.add_argument("--features", required=True, help="Split CSV with an 'average' column")
    p.add_argument("--predictions-out", help="Optional prediction CSV (id,prediction,truth)")

    p = add("baseline", cmd_baseline, "Random or human-annotator baseline")
    p.add_argument("--kind", required=True, choices=["random", "human"])
    p.add_argument("--features", help="Split CSV: targets for random, id filter for human")
    p.add_argument("--ratings", help="Annotation CSV (human baseline)")

    p = add("fertility", cmd_fertility, "Tokenizer fertility via a pluggable segmenter")
    p.add_argument("--in", dest="input", required=True, help="Corpus JSONL")
    p.add_argument("--segmenter", required=True, help="FILE.py:func or module:func returning pieces per word")
    p.add_argument("--out", help="Optional CSV (script,fertility)")

    p = add("report", cmd_report, "Run the whole pipeline and write report.md")
    p.add_argument("--corpus", required=True, help="Corpus JSONL")
    p.add_argument("--ratings", help="Annotation CSV (default: ratings embedded in the corpus)")
    p.add_argument("--scores", help="Optional external score CSV")
    p.add_argument("--transfer-corpus", help="Foreign corpus JSONL for transfer evaluation")
    p.add_argument("--transfer-ratings", help="Annotation CSV for the foreign corpus")
    p.add_argument("--include-external", action="store_true", default=None, help="Also train with external_score")
    _add_training_args(p)
    p.add_argument("--out-dir", required=True, help="Output directory")
    return parser


def _resolve(args) -> RunConfig:
    overrides = {key: getattr(args, attr) for attr, key in _OVERRIDES.items() if hasattr(args, attr)}
    if args.log_level is not None or args.quiet:
        overrides["log_level"] = resolve_level(args.log_level or DEFAULT_LOG_LEVEL, args.quiet)
    paths = {name: getattr(args, name) for name in _PATH_ARGS if getattr(args, name, None) is not None}
    return resolve_config(args.config, overrides, paths)


def dispatch(argv: Sequence[str]) -> int:
    """Parse ``argv``, run one subcommand and map failures to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging(args.log_level or DEFAULT_LOG_LEVEL, args.quiet)
    try:
        config = _resolve(args)
        if args.log_level is None and not args.quiet and config.log_level != DEFAULT_LOG_LEVEL:
            configure_logging(config.log_level)
        return args.handler(args, config)
    except OSError as e:
        name = getattr(e, "filename", None)
        detail = e.strerror or str(e)
        logger.error(f"I/O error on {name}: {detail}" if name else f"I/O error: {e}")
        return EXIT_IO
    except UnicodeError as e:
        logger.error(f"Undecodable input: {e}")
        return EXIT_VALIDATION
    except CmlabError as e:
        logger.error(str(e))
        return EXIT_VALIDATION


def main(argv: Optional[Sequence[str]] = None) -> int:
    return dispatch(sys.argv[1:] if argv is None else list(argv))
