# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Report artifacts: SVG histograms, CSV tables and the markdown report.

Tables keep a fixed layout: one block of columns per source, one row per bin,
variable or PoS tag. Nothing time-dependent is written, so identical inputs
and configuration give byte-identical files.
"""

from __future__ import annotations

import csv
import logging
from html import escape
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from . import __version__
from .agreement import ReliabilityRow
from .cm_metrics import DatasetSummary
from .config import RunConfig
from .corpus_model import PosTag, open_text
from .errors import AlignmentError, CorpusFormatError, DegenerateDataError, DuplicateIdError
from .predictor import EvalResult
from .stats_analysis import (
    AnovaReport,
    CorrelationCell,
    ErrorReport,
    HistogramBin,
    PerturbationImpact,
    RegressionReport,
    histogram_counts,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
ABSENT = "NA"
PREDICTION_HEADER = ["id", "prediction", "truth"]

_SVG_WIDTH = 640
_SVG_HEIGHT = 400
_PAD = 56


def fmt(value: Optional[float], digits: int = 2) -> str:
    return ABSENT if value is None else f"{value:.{digits}f}"


def render_histogram(
    series: Sequence[float],
    bin_width: float,
    path: PathLike,
    title: str = "",
    x_label: str = "value",
    value_range: Optional[tuple[float, float]] = None,
) -> list[HistogramBin]:
    """Write a standalone SVG bar chart and return the bin counts it draws.

    Each non-empty bin becomes one ``<rect class="bar">`` carrying its count
    in ``data-count``.
    """
    if len(series) == 0:
        raise DegenerateDataError(f"Cannot draw histogram '{title or path}' of an empty series.")
    bins = histogram_counts(series, bin_width, value_range)
    peak = max(b.count for b in bins)
    plot_w = _SVG_WIDTH - 2 * _PAD
    plot_h = _SVG_HEIGHT - 2 * _PAD
    bar_w = plot_w / len(bins)
    base_y = _SVG_HEIGHT - _PAD

    svg = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_WIDTH}" height="{_SVG_HEIGHT}" '
        f'viewBox="0 0 {_SVG_WIDTH} {_SVG_HEIGHT}">',
        f'<rect width="{_SVG_WIDTH}" height="{_SVG_HEIGHT}" fill="white"/>',
        f'<text x="{_SVG_WIDTH / 2:.1f}" y="28" font-family="sans-serif" font-size="16" '
        f'text-anchor="middle">{escape(title)}</text>',
        f'<line x1="{_PAD}" y1="{base_y}" x2="{_SVG_WIDTH - _PAD}" y2="{base_y}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{base_y}" stroke="black"/>',
    ]
    for i, b in enumerate(bins):
        x = _PAD + i * bar_w
        if b.count:
            h = b.count / peak * plot_h
            svg.append(
                f'<rect class="bar" data-count="{b.count}" x="{x:.2f}" y="{base_y - h:.2f}" '
                f'width="{bar_w:.2f}" height="{h:.2f}" fill="#4c72b0" stroke="white">'
                f"<title>[{b.low:g}, {b.high:g}): {b.count}</title></rect>"
            )
    step = max(1, len(bins) // 8)
    for i in range(0, len(bins) + 1, step):
        x = _PAD + i * bar_w
        svg.append(
            f'<text x="{x:.2f}" y="{base_y + 16}" font-family="sans-serif" font-size="11" '
            f'text-anchor="middle">{bins[0].low + i * bin_width:g}</text>'
        )
    for frac in (0.0, 0.5, 1.0):
        y = base_y - frac * plot_h
        svg.append(
            f'<text x="{_PAD - 6}" y="{y + 4:.2f}" font-family="sans-serif" font-size="11" '
            f'text-anchor="end">{round(frac * peak):d}</text>'
        )
    svg.append(
        f'<text x="{_SVG_WIDTH / 2:.1f}" y="{_SVG_HEIGHT - 12}" font-family="sans-serif" font-size="13" '
        f'text-anchor="middle">{escape(x_label)}</text>'
    )
    svg.append(
        f'<text x="16" y="{_SVG_HEIGHT / 2:.1f}" font-family="sans-serif" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 16 {_SVG_HEIGHT / 2:.1f})">count</text>'
    )
    svg.append("</svg>")
    Path(path).write_text("\n".join(svg) + "\n", encoding="utf-8")
    logger.debug(f"Wrote histogram {path} ({len(bins)} bin(s))")
    return bins


def markdown_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(headers) + " |", "|" + "|".join("---" for _ in headers) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return "\n".join(lines)


def reliability_markdown(tables: Mapping[str, Sequence[ReliabilityRow]]) -> str:
    """Disagreement bins down the side, ICC1k and coverage per source across."""
    names = list(tables)
    headers = ["Disagreement"] + [f"{name} {col}" for name in names for col in ("ICC1k", "coverage")]
    labels = [row.label for row in next(iter(tables.values()))] if tables else []
    rows = []
    for i, label in enumerate(labels):
        cells = [label]
        for name in names:
            row = tables[name][i]
            cells += [fmt(row.icc1k, 4), fmt(row.coverage, 3)]
        rows.append(cells)
    return markdown_table(headers, rows)


def write_reliability_csv(tables: Mapping[str, Sequence[ReliabilityRow]], path: PathLike) -> None:
    names = list(tables)
    labels = [row.label for row in next(iter(tables.values()))] if tables else []
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["disagreement"] + [f"{name}_{col}" for name in names for col in ("icc1k", "coverage", "n")])
        for i, label in enumerate(labels):
            cells = [label]
            for name in names:
                row = tables[name][i]
                cells += ["" if row.icc1k is None else f"{row.icc1k:.6f}", f"{row.coverage:.6f}", str(row.n)]
            writer.writerow(cells)


def write_correlation_csv(cells: Sequence[CorrelationCell], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["feature", "target", "pearson", "spearman", "n"])
        for c in cells:
            writer.writerow(
                [
                    c.feature,
                    c.target,
                    "" if c.pearson is None else f"{c.pearson:.6f}",
                    "" if c.spearman is None else f"{c.spearman:.6f}",
                    c.n,
                ]
            )


def dataset_markdown(summaries: Mapping[str, DatasetSummary]) -> str:
    """One row per source group."""
    rows = [
        [name, str(s.sentences), fmt(s.mean_length), fmt(s.mean_cmi), fmt(s.mean_switch_points), fmt(s.tagged_fraction)]
        for name, s in summaries.items()
    ]
    return markdown_table(["Source", "Sentences", "Mean length", "Mean CMI", "Mean switch points", "PoS-tagged"], rows)


def correlation_markdown(cells: Sequence[CorrelationCell]) -> str:
    rows = [[c.feature, c.target, fmt(c.pearson, 3), fmt(c.spearman, 3), str(c.n)] for c in cells]
    return markdown_table(["Feature", "Target", "Pearson", "Spearman", "n"], rows)


def regression_markdown(reports: Mapping[str, RegressionReport]) -> str:
    """Variables down the side, ``coefficient stars`` per source across, then R² and n."""
    names = list(reports)
    variables: list[str] = []
    for report in reports.values():
        variables += [t.name for t in report.terms if t.name not in variables]
    rows = []
    for var in variables:
        cells = [var]
        for name in names:
            terms = {t.name: t for t in reports[name].terms}
            term = terms.get(var)
            cells.append(ABSENT if term is None else f"{term.coefficient:.2f}{term.stars}")
        rows.append(cells)
    rows.append(["R²"] + [f"{reports[name].r_squared:.3f}" for name in names])
    rows.append(["n"] + [str(reports[name].n) for name in names])
    return markdown_table(["Variable"] + names, rows)


def anova_markdown(reports: Mapping[str, AnovaReport]) -> str:
    """PoS tags down the side, ``F stars`` per source across."""
    names = list(reports)
    tags = [pos for pos in PosTag if any(pos in r.results for r in reports.values())]
    rows = []
    for pos in tags:
        cells = [pos.value]
        for name in names:
            result = reports[name].results.get(pos)
            cells.append(ABSENT if result is None else f"{result.f_stat:.2f}{result.stars}")
        rows.append(cells)
    return markdown_table(["PoS"] + [f"{name} F" for name in names], rows)


def eval_markdown(results: Mapping[str, Mapping[str, Optional[EvalResult]]]) -> str:
    """Model rows by source columns: ``{model: {source: EvalResult}}``."""
    sources: list[str] = []
    for per_source in results.values():
        sources += [s for s in per_source if s not in sources]
    headers = ["Model"] + [f"{s} {m}" for s in sources for m in ("RMSE", "MAE")]
    rows = []
    for model, per_source in results.items():
        cells = [model]
        for s in sources:
            r = per_source.get(s)
            cells += [fmt(None if r is None else r.rmse, 3), fmt(None if r is None else r.mae, 3)]
        rows.append(cells)
    return markdown_table(headers, rows)


def error_markdown(report: ErrorReport) -> str:
    parts = [
        markdown_table(
            ["Rating bin", "n", "mean error", "mean |error|"],
            [[b.label, str(b.n), fmt(b.mean_error, 3), fmt(b.mean_abs_error, 3)] for b in report.by_rating_bin],
        )
    ]
    if report.by_group:
        parts.append(
            markdown_table(
                ["Group", "n", "mean error", "mean |error|"],
                [[b.label, str(b.n), fmt(b.mean_error, 3), fmt(b.mean_abs_error, 3)] for b in report.by_group.values()],
            )
        )
    parts.append(correlation_markdown(report.correlations))
    if report.anova.results:
        parts.append(anova_markdown({"error": report.anova}))
    return "\n\n".join(parts)


def impact_markdown(impacts: Sequence[PerturbationImpact]) -> str:
    return markdown_table(
        ["Perturbation", "n", "mean rating"], [[i.kind, str(i.n), fmt(i.mean_rating, 3)] for i in impacts]
    )


def write_report(path: PathLike, title: str, config: RunConfig, sections: Sequence[tuple[str, str]]) -> None:
    """Markdown report: title, version and config stamp, then ``(heading, body)`` sections."""
    lines = [f"# {title}", "", f"cmlab {__version__}", "", "```", *config.to_lines(), "```", ""]
    for heading, body in sections:
        lines += [f"## {heading}", "", body.rstrip(), ""]
    Path(path).write_text("\n".join(lines), encoding="utf-8")
    logger.info(f"Wrote report {path}")


def write_predictions_csv(
    ids: Sequence[str], predictions: Sequence[float], truths: Sequence[float], path: PathLike
) -> None:
    if not len(ids) == len(predictions) == len(truths):
        raise AlignmentError("ids, predictions and truths must have equal length.")
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(PREDICTION_HEADER)
        for sid, p, t in zip(ids, predictions, truths):
            writer.writerow([sid, repr(float(p)), repr(float(t))])


def read_predictions_csv(path: PathLike) -> tuple[dict[str, float], dict[str, float]]:
    """Return ``(predictions, truths)`` keyed by id."""
    predictions: dict[str, float] = {}
    truths: dict[str, float] = {}
    with open_text(path) as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != PREDICTION_HEADER:
            raise CorpusFormatError(f"expected header {','.join(PREDICTION_HEADER)}, got {header}", str(path), 1)
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise CorpusFormatError(f"expected 3 columns, got {len(row)}", str(path), reader.line_num)
            if row[0] in predictions:
                raise DuplicateIdError(row[0], f"{path}:{reader.line_num}")
            try:
                predictions[row[0]], truths[row[0]] = float(row[1]), float(row[2])
            except ValueError:
                raise CorpusFormatError("prediction and truth must be numbers", str(path), reader.line_num) from None
    return predictions, truths
