# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Inter-annotator reliability: ICC(1,k) and the disagreement-binned reliability table."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .corpus_model import AnnotationTriple, RatingSummary, summarize
from .errors import DegenerateDataError

logger = logging.getLogger(__name__)

# (label, max disagreement); each bin holds every record with disagreement <= max.
DEFAULT_RELIABILITY_BINS: tuple[tuple[str, int], ...] = (
    ("0", 0),
    ("0-2", 2),
    ("0-4", 4),
    ("0-6", 6),
    ("0-8", 8),
)


@dataclass(frozen=True)
class RatingMatrix:
    """n items x k ratings, rectangular, no missing cells."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DegenerateDataError(f"Rating matrix must be 2-D, got shape {values.shape}.")
        n, k = values.shape
        if n < 2 or k < 2:
            raise DegenerateDataError(f"ICC needs at least 2 items and 2 raters, got {n} x {k}.")
        if not np.all(np.isfinite(values)):
            raise DegenerateDataError("Rating matrix contains missing or non-finite cells.")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> RatingMatrix:
        widths = {len(row) for row in rows}
        if len(widths) > 1:
            raise DegenerateDataError(f"Rating rows have differing lengths {sorted(widths)}; rows must be rectangular.")
        return cls(np.asarray(rows, dtype=np.float64))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]


def icc1k(matrix: RatingMatrix) -> float:
    """One-way random-effects, average-measure ICC: (MSB - MSW) / MSB."""
    values = matrix.values
    n, k = values.shape
    item_means = values.mean(axis=1)
    grand = values.mean()
    ssb = k * float(np.sum((item_means - grand) ** 2))
    ssw = float(np.sum((values - item_means[:, None]) ** 2))
    msb = ssb / (n - 1)
    msw = ssw / (n * (k - 1))
    if msb == 0.0:
        raise DegenerateDataError("ICC is undefined: items show no between-item variance (MSB = 0).")
    return (msb - msw) / msb


@dataclass(frozen=True)
class ReliabilityRow:
    label: str
    icc1k: Optional[float]
    coverage: float
    n: int


def reliability_records(triples: Sequence[AnnotationTriple]) -> list[tuple[RatingSummary, tuple[int, int, int]]]:
    return [(summarize(t), t.ratings) for t in triples]


def reliability_table(
    records: Sequence[tuple[RatingSummary, Sequence[int]]],
    bins: Sequence[tuple[str, int]] = DEFAULT_RELIABILITY_BINS,
) -> list[ReliabilityRow]:
    """ICC(1,k) and coverage for each cumulative disagreement bin.

    Bins with fewer than two records, or with no between-item variance, get
    ``icc1k=None``.
    """
    total = len(records)
    rows = []
    for label, limit in bins:
        subset = [list(ratings) for summary, ratings in records if summary.disagreement <= limit]
        value: Optional[float] = None
        if len(subset) >= 2:
            try:
                value = icc1k(RatingMatrix.from_rows(subset))
            except DegenerateDataError as e:
                logger.info(f"Reliability bin {label}: {e}")
        if value is not None and value < 0:
            logger.warning(f"Reliability bin {label}: negative ICC1k {value:.4f} (reported unclamped)")
        rows.append(ReliabilityRow(label, value, len(subset) / total if total else 0.0, len(subset)))
    return rows


def reliability_by_source(
    groups: Mapping[str, Sequence[tuple[RatingSummary, Sequence[int]]]],
    bins: Sequence[tuple[str, int]] = DEFAULT_RELIABILITY_BINS,
) -> dict[str, list[ReliabilityRow]]:
    """One reliability table per group, keyed like ``groups`` and in its order."""
    return {name: reliability_table(records, bins) for name, records in groups.items()}
