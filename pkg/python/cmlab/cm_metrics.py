# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Code-mixing metrics over tagged sentences.

Every metric works on the token LID sequence. Neutral tokens (punctuation,
numerals, URLs, mentions, emoji) are counted in the sentence length but are
transparent to spans and switch points: they neither break nor extend a span.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import groupby
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .corpus_model import LanguageTag, PosTag, ScriptForm, TaggedSentence, open_text
from .errors import CorpusFormatError, DegenerateDataError, DuplicateIdError, MissingPosError, SegmenterError

logger = logging.getLogger(__name__)

Segmenter = Callable[[str], int]

BASE_COLUMNS = ["id", "length", "cmi", "switch_points", "burstiness", "symcom_sentence"]
POS_COLUMNS = [f"symcom_{pos.value}" for pos in PosTag]
METRIC_COLUMNS = BASE_COLUMNS + POS_COLUMNS + ["external_score"]


def _language_lids(sentence: TaggedSentence) -> list[LanguageTag]:
    return [t.lid for t in sentence.tokens if t.lid.is_language]


def cmi(sentence: TaggedSentence) -> float:
    """Code-Mixing Index in [0, 100]; 0 when every token is Neutral."""
    lids = _language_lids(sentence)
    if not lids:
        return 0.0
    # n - u == len(lids)
    dominant = max(Counter(lids).values())
    return 100.0 * (1.0 - dominant / len(lids))


def switch_points(sentence: TaggedSentence) -> int:
    lids = _language_lids(sentence)
    return sum(1 for prev, cur in zip(lids, lids[1:]) if prev is not cur)


def language_spans(sentence: TaggedSentence) -> list[int]:
    return [len(list(run)) for _, run in groupby(_language_lids(sentence))]


def burstiness(sentence: TaggedSentence) -> Optional[float]:
    """(sigma - mean) / (sigma + mean) over span lengths, sigma with n-1 denominator.

    None when the sentence has fewer than two spans.
    """
    spans = language_spans(sentence)
    if len(spans) < 2:
        return None
    lengths = np.asarray(spans, dtype=np.float64)
    sigma = float(np.std(lengths, ddof=1))
    mean = float(lengths.mean())
    return (sigma - mean) / (sigma + mean)


def _pos_counts(sentence: TaggedSentence) -> dict[PosTag, list[int]]:
    counts: dict[PosTag, list[int]] = {}
    for i, token in enumerate(sentence.tokens):
        if not token.lid.is_language:
            continue
        if token.pos is None:
            raise MissingPosError(
                f"Sentence '{sentence.id}' token {i} ('{token.surface}') has no PoS tag; "
                "SyMCoM needs tags on every language-bearing token."
            )
        pair = counts.setdefault(token.pos, [0, 0])
        pair[0 if token.lid is LanguageTag.LANG_A else 1] += 1
    return counts


def _symcom(count_a: int, count_b: int) -> Optional[float]:
    total = count_a + count_b
    if total == 0:
        return None
    return (count_a - count_b) / total


def symcom_pos(sentence: TaggedSentence, pos: PosTag) -> Optional[float]:
    """Signed balance of one PoS group: +1 all LangA, -1 all LangB, None if absent."""
    count_a, count_b = _pos_counts(sentence).get(pos, (0, 0))
    return _symcom(count_a, count_b)


def symcom_by_pos(sentence: TaggedSentence) -> dict[PosTag, float]:
    """Per-PoS scores for every PoS group present among language-bearing tokens."""
    return {pos: (a - b) / (a + b) for pos, (a, b) in _pos_counts(sentence).items()}


def symcom_sentence(sentence: TaggedSentence) -> Optional[float]:
    """Count-weighted mean of absolute per-PoS scores."""
    counts = _pos_counts(sentence)
    total = sum(a + b for a, b in counts.values())
    if total == 0:
        return None
    return sum((a + b) / total * abs(_symcom(a, b) or 0.0) for a, b in counts.values())


def fertility(sentences: list[TaggedSentence], segmenter: Segmenter) -> float:
    """Average subword pieces per word over the whole corpus."""
    words = 0
    pieces = 0
    for sentence in sentences:
        for token in sentence.tokens:
            try:
                count = int(segmenter(token.surface))
            except Exception as e:  # noqa: BLE001
                raise SegmenterError(token.surface, str(e) or type(e).__name__) from e
            if count < 0:
                raise SegmenterError(token.surface, f"returned negative piece count {count}")
            pieces += count
            words += 1
    if words == 0:
        raise DegenerateDataError("Fertility needs at least one word; the corpus is empty.")
    return pieces / words


def fertility_by_script(sentences: list[TaggedSentence], segmenter: Segmenter) -> dict[ScriptForm, float]:
    """Fertility per script form present in the corpus, in enum order."""
    result: dict[ScriptForm, float] = {}
    for form in ScriptForm:
        subset = [s for s in sentences if s.script_form is form]
        if subset:
            result[form] = fertility(subset, segmenter)
    return result


@dataclass(frozen=True)
class MetricRow:
    sample_id: str
    length: int
    cmi: float
    switch_points: int
    burstiness: Optional[float]
    symcom_sentence: Optional[float]
    symcom_by_pos: Mapping[PosTag, float] = field(default_factory=dict)
    external_score: Optional[float] = None


def metric_row(sentence: TaggedSentence, external_score: Optional[float] = None) -> MetricRow:
    """All metrics for one sentence. Untagged sentences get no SyMCoM fields."""
    try:
        by_pos = symcom_by_pos(sentence)
        sentence_score = symcom_sentence(sentence)
    except MissingPosError:
        logger.debug(f"Sentence '{sentence.id}' lacks PoS tags; SyMCoM left absent")
        by_pos, sentence_score = {}, None
    return MetricRow(
        sample_id=sentence.id,
        length=len(sentence.tokens),
        cmi=cmi(sentence),
        switch_points=switch_points(sentence),
        burstiness=burstiness(sentence),
        symcom_sentence=sentence_score,
        symcom_by_pos=by_pos,
        external_score=external_score,
    )


def metric_rows(
    corpus: list[TaggedSentence],
    external_scores: Optional[Mapping[str, float]] = None,
    jobs: int = 1,
) -> list[MetricRow]:
    """One MetricRow per sentence, in input order."""
    scores = dict(external_scores or {})
    ids = {s.id for s in corpus}
    unknown = sorted(set(scores) - ids)
    if unknown:
        raise CorpusFormatError(
            f"external scores reference {len(unknown)} id(s) not in the corpus: {', '.join(unknown[:10])}"
        )
    tasks = [(s, scores.get(s.id)) for s in corpus]
    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda task: metric_row(*task), tasks))
    else:
        rows = [metric_row(s, score) for s, score in tasks]
    partly = [s.id for s in corpus if _partly_tagged(s)]
    if partly:
        shown = ", ".join(partly[:10]) + (", ..." if len(partly) > 10 else "")
        logger.warning(f"{len(partly)} sentence(s) have PoS tags on only some tokens; SyMCoM left absent: {shown}")
    untagged = sum(1 for r in rows if r.symcom_sentence is None) - len(partly)
    if untagged:
        logger.info(f"{untagged} sentence(s) have no SyMCoM score (no tagged language tokens)")
    return rows


def _partly_tagged(sentence: TaggedSentence) -> bool:
    tags = [t.pos is not None for t in sentence.tokens if t.lid.is_language]
    return any(tags) and not all(tags)


@dataclass(frozen=True)
class DatasetSummary:
    sentences: int
    mean_length: float
    mean_cmi: float
    mean_switch_points: float
    tagged_fraction: float


def summarize_rows(rows: Sequence[MetricRow]) -> DatasetSummary:
    """Corpus-level averages; ``tagged_fraction`` is the share of rows with a SyMCoM score."""
    if not rows:
        raise DegenerateDataError("Dataset statistics need at least one sentence.")
    n = len(rows)
    return DatasetSummary(
        sentences=n,
        mean_length=float(np.mean([r.length for r in rows])),
        mean_cmi=float(np.mean([r.cmi for r in rows])),
        mean_switch_points=float(np.mean([r.switch_points for r in rows])),
        tagged_fraction=sum(r.symcom_sentence is not None for r in rows) / n,
    )


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _parse_optional(raw: str, column: str, path: str, lineno: int) -> Optional[float]:
    if raw == "":
        return None
    try:
        value = float(raw)
    except ValueError:
        raise CorpusFormatError(f"column '{column}' value {raw!r} is not a number", path, lineno) from None
    if math.isnan(value):
        raise CorpusFormatError(f"column '{column}' is NaN", path, lineno)
    return value


def write_metric_csv(
    rows: list[MetricRow],
    path: Union[str, Path],
    extra: Optional[Mapping[str, Mapping[str, object]]] = None,
) -> None:
    """Write rows in the fixed metric column order, then any ``extra`` columns.

    ``extra`` maps column name to a per-id value; ids without a value get an
    empty field.
    """
    extra = extra or {}
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(METRIC_COLUMNS + list(extra))
        for row in rows:
            cells = [
                row.sample_id,
                str(row.length),
                _fmt(row.cmi),
                str(row.switch_points),
                _fmt(row.burstiness),
                _fmt(row.symcom_sentence),
            ]
            cells += [_fmt(row.symcom_by_pos.get(pos)) for pos in PosTag]
            cells.append(_fmt(row.external_score))
            for values in extra.values():
                value = values.get(row.sample_id)
                cells.append("" if value is None else str(value))
            writer.writerow(cells)


def read_metric_csv(path: Union[str, Path]) -> tuple[list[MetricRow], dict[str, dict[str, str]]]:
    """Read a metric CSV. Returns the rows and any extra columns as ``{column: {id: raw}}``."""
    path_str = str(path)
    rows: list[MetricRow] = []
    with open_text(path) as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or header[: len(METRIC_COLUMNS)] != METRIC_COLUMNS:
            raise CorpusFormatError(
                f"metric CSV must start with columns {','.join(BASE_COLUMNS)},symcom_<POS>...,external_score",
                path_str,
                1,
            )
        extra_names = header[len(METRIC_COLUMNS) :]
        extra: dict[str, dict[str, str]] = {name: {} for name in extra_names}
        seen: set[str] = set()
        for cells in reader:
            if not cells:
                continue
            lineno = reader.line_num
            if len(cells) != len(header):
                raise CorpusFormatError(f"expected {len(header)} columns, got {len(cells)}", path_str, lineno)
            record = dict(zip(header, cells))
            sample_id = record["id"]
            if sample_id in seen:
                raise DuplicateIdError(sample_id, f"{path_str}:{lineno}")
            seen.add(sample_id)
            try:
                length = int(record["length"])
                sp = int(record["switch_points"])
            except ValueError:
                raise CorpusFormatError("length and switch_points must be integers", path_str, lineno) from None
            by_pos = {}
            for pos, column in zip(PosTag, POS_COLUMNS):
                value = _parse_optional(record[column], column, path_str, lineno)
                if value is not None:
                    by_pos[pos] = value
            rows.append(
                MetricRow(
                    sample_id=sample_id,
                    length=length,
                    cmi=_parse_optional(record["cmi"], "cmi", path_str, lineno) or 0.0,
                    switch_points=sp,
                    burstiness=_parse_optional(record["burstiness"], "burstiness", path_str, lineno),
                    symcom_sentence=_parse_optional(record["symcom_sentence"], "symcom_sentence", path_str, lineno),
                    symcom_by_pos=by_pos,
                    external_score=_parse_optional(record["external_score"], "external_score", path_str, lineno),
                )
            )
            for name in extra_names:
                extra[name][sample_id] = record[name]
    return rows, extra
