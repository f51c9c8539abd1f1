# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Statistical analyses over metric rows and ratings.

Covers correlation tables (Pearson and Spearman), min-max normalized OLS with
t-test p-values, one-way ANOVA of a response over SyMCoM categories, and the
prediction-error analysis built on top of them. Distribution functions come
from the regularized incomplete beta function.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import linalg, special, stats

from .cm_metrics import MetricRow, symcom_pos
from .corpus_model import Perturbation, PosTag, TaggedSentence
from .curation import DEFAULT_BIN_EDGES, rating_bin
from .errors import AlignmentError, CmlabError, DegenerateDataError, NumericalError, RankDeficiencyError

logger = logging.getLogger(__name__)

REGRESSION_FEATURES = ("length", "cmi", "switch_points", "burstiness", "symcom_sentence")
CORRELATION_FEATURES = REGRESSION_FEATURES + ("external_score",)
ERROR_HIST_RANGE = (-4.0, 4.0)
ERROR_HIST_WIDTH = 0.25


def _as_array(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise CmlabError(f"{name} must be a 1-D series, got shape {arr.shape}.")
    return arr


def _paired(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    xa, ya = _as_array(x, "x"), _as_array(y, "y")
    if xa.shape != ya.shape:
        raise AlignmentError(f"Series lengths differ: {xa.size} vs {ya.size}.")
    if xa.size < 2:
        raise DegenerateDataError(f"Correlation needs at least 2 pairs, got {xa.size}.")
    if np.ptp(xa) == 0 or np.ptp(ya) == 0:
        raise DegenerateDataError("Correlation is undefined for a zero-variance series.")
    return xa, ya


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    xa, ya = _paired(x, y)
    r = float(stats.pearsonr(xa, ya)[0])
    return min(1.0, max(-1.0, r))


def rank(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; ties share their mean rank."""
    return stats.rankdata(_as_array(values, "values"), method="average")


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    xa, ya = _paired(x, y)
    return pearson(rank(xa), rank(ya))


def feature_value(row: MetricRow, name: str) -> Optional[float]:
    value = getattr(row, name)
    return None if value is None else float(value)


@dataclass(frozen=True)
class CorrelationCell:
    feature: str
    target: str
    pearson: Optional[float]
    spearman: Optional[float]
    n: int


def _correlate(feature: str, target: str, xs: Sequence[Optional[float]], ys: Sequence[Optional[float]]):
    pairs = [(x, y) for x, y in zip(xs, ys) if x is not None and y is not None]
    px = [p[0] for p in pairs]
    py = [p[1] for p in pairs]
    try:
        return CorrelationCell(feature, target, pearson(px, py), spearman(px, py), len(pairs))
    except DegenerateDataError:
        return CorrelationCell(feature, target, None, None, len(pairs))


def correlation_matrix(
    rows: Sequence[MetricRow],
    targets: Mapping[str, Sequence[Optional[float]]],
    features: Sequence[str] = CORRELATION_FEATURES,
) -> list[CorrelationCell]:
    """Pearson and Spearman for every (feature, target) pair over pairwise-complete samples.

    ``targets`` maps a target name to a series aligned with ``rows``.
    """
    for name, series in targets.items():
        if len(series) != len(rows):
            raise AlignmentError(f"Target '{name}' has {len(series)} values for {len(rows)} rows.")
    cells = []
    for feature in features:
        xs = [feature_value(row, feature) for row in rows]
        for target, ys in targets.items():
            cells.append(_correlate(feature, target, xs, ys))
    return cells


def minmax_normalize(column: Sequence[float]) -> np.ndarray:
    arr = _as_array(column, "column")
    lo, hi = float(arr.min()), float(arr.max())
    if hi <= lo:
        raise DegenerateDataError(f"Cannot min-max normalize a constant column (value {lo}).")
    return (arr - lo) / (hi - lo)


def t_cdf(t: float, df: float) -> float:
    """Student-t CDF."""
    if df < 1:
        raise CmlabError(f"Degrees of freedom must be >= 1, got {df}.")
    tail = 0.5 * _betainc(df / 2.0, 0.5, df / (df + t * t)) if math.isfinite(t) else 0.0
    return 1.0 - tail if t > 0 else tail


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|), computed from the tail directly to keep precision for large |t|."""
    if df < 1:
        raise CmlabError(f"Degrees of freedom must be >= 1, got {df}.")
    if not math.isfinite(t):
        return 0.0
    return min(1.0, _betainc(df / 2.0, 0.5, df / (df + t * t)))


def f_cdf(f: float, df1: float, df2: float) -> float:
    """F-distribution CDF."""
    if df1 < 1 or df2 < 1:
        raise CmlabError(f"Degrees of freedom must be >= 1, got ({df1}, {df2}).")
    if f < 0:
        raise CmlabError(f"F statistic must be >= 0, got {f}.")
    if not math.isfinite(f):
        return 1.0
    return _betainc(df1 / 2.0, df2 / 2.0, df1 * f / (df1 * f + df2))


def f_sf(f: float, df1: float, df2: float) -> float:
    """1 - f_cdf, evaluated through the complementary beta argument."""
    if df1 < 1 or df2 < 1:
        raise CmlabError(f"Degrees of freedom must be >= 1, got ({df1}, {df2}).")
    if f < 0:
        raise CmlabError(f"F statistic must be >= 0, got {f}.")
    if not math.isfinite(f):
        return 0.0
    return _betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))


def _betainc(a: float, b: float, x: float) -> float:
    value = float(special.betainc(a, b, min(1.0, max(0.0, x))))
    if not math.isfinite(value):
        raise NumericalError(f"Incomplete beta I_{x}({a}, {b}) did not converge.")
    return value


def stars(p: float) -> str:
    """Significance marker: *** below 0.005, ** below 0.05, * below 0.1."""
    if p < 0.005:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


@dataclass(frozen=True)
class RegressionTerm:
    name: str
    coefficient: float
    std_error: float
    t_stat: float
    p_value: float

    @property
    def stars(self) -> str:
        return stars(self.p_value)


@dataclass(frozen=True)
class RegressionReport:
    terms: tuple[RegressionTerm, ...]
    r_squared: float
    n: int
    residuals: tuple[float, ...] = ()

    @property
    def intercept(self) -> RegressionTerm:
        return self.terms[0]

    def term(self, name: str) -> RegressionTerm:
        for term in self.terms:
            if term.name == name:
                return term
        raise KeyError(name)

    def predict(self, features: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        beta = np.array([t.coefficient for t in self.terms])
        return beta[0] + x @ beta[1:]


def _collinear_columns(x: np.ndarray, names: Sequence[str]) -> list[str]:
    collinear = []
    kept: list[int] = []
    for j in range(x.shape[1]):
        trial = kept + [j]
        if np.linalg.matrix_rank(x[:, trial]) == len(trial):
            kept = trial
        else:
            collinear.append(names[j])
    return collinear


def ols_fit(features: np.ndarray, y: Sequence[float], names: Optional[Sequence[str]] = None) -> RegressionReport:
    """Least squares with an intercept, solved through QR.

    Standard errors use the residual variance times the diagonal of the
    inverse Gram matrix; p-values are two-sided with n - p - 1 degrees of freedom.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    ya = _as_array(y, "y")
    n, p = x.shape
    if ya.size != n:
        raise AlignmentError(f"Design has {n} rows but response has {ya.size} values.")
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(p)]
    if len(names) != p:
        raise CmlabError(f"Got {len(names)} names for {p} feature columns.")
    if n <= p + 1:
        raise DegenerateDataError(f"OLS needs more than {p + 1} samples for {p} features, got {n}.")
    design = np.column_stack([np.ones(n), x])
    all_names = ["Intercept"] + names
    if np.linalg.matrix_rank(design) < p + 1:
        raise RankDeficiencyError(_collinear_columns(design, all_names))

    q, r = np.linalg.qr(design)
    beta = linalg.solve_triangular(r, q.T @ ya)
    residuals = ya - design @ beta
    dof = n - p - 1
    sse = float(residuals @ residuals)
    centered = ya - ya.mean()
    sst = float(centered @ centered)
    r_squared = 0.0 if sst == 0.0 else max(0.0, 1.0 - sse / sst)
    r_inv = linalg.solve_triangular(r, np.eye(p + 1))
    std_errors = np.sqrt((sse / dof) * np.sum(r_inv**2, axis=1))
    scale = max(1.0, float(np.max(np.abs(ya))))

    terms = []
    for name, coef, se in zip(all_names, beta, std_errors):
        coef, se = float(coef), float(se)
        if se > 0:
            t_stat = coef / se
        elif abs(coef) <= 1e-12 * scale:
            t_stat = 0.0
        else:
            t_stat = math.copysign(math.inf, coef)
        terms.append(RegressionTerm(name, coef, se, t_stat, t_two_sided_p(t_stat, dof)))
    return RegressionReport(tuple(terms), r_squared, n, tuple(float(v) for v in residuals))


def regression_from_rows(
    rows: Sequence[MetricRow],
    ratings: Mapping[str, float],
    features: Sequence[str] = REGRESSION_FEATURES,
) -> RegressionReport:
    """Regress average rating on min-max normalized metric columns.

    Rows missing a rating or any selected feature are dropped.
    """
    design = []
    y = []
    dropped = 0
    for row in rows:
        values = [feature_value(row, name) for name in features]
        if row.sample_id not in ratings or any(v is None for v in values):
            dropped += 1
            continue
        design.append(values)
        y.append(ratings[row.sample_id])
    if dropped:
        logger.info(f"Regression dropped {dropped} row(s) with absent values")
    if not design:
        raise DegenerateDataError("No complete rows to regress on.")
    matrix = np.asarray(design, dtype=np.float64)
    normalized = np.column_stack([minmax_normalize(matrix[:, j]) for j in range(matrix.shape[1])])
    return ols_fit(normalized, y, list(features))


class SymcomCategory(Enum):
    MONOLINGUAL = "Monolingual"
    MIXED = "Mixed"
    ABSENT = "Absent"


def category_from_score(score: Optional[float]) -> SymcomCategory:
    if score is None:
        return SymcomCategory.ABSENT
    if abs(score) == 1.0:
        return SymcomCategory.MONOLINGUAL
    return SymcomCategory.MIXED


def symcom_category(sentence: TaggedSentence, pos: PosTag) -> SymcomCategory:
    return category_from_score(symcom_pos(sentence, pos))


@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    p_value: float
    df_between: int
    df_within: int
    group_sizes: Mapping[str, int] = field(default_factory=dict)

    @property
    def stars(self) -> str:
        return stars(self.p_value)


def anova_groups(samples: Mapping[str, Sequence[float]]) -> AnovaResult:
    """One-way ANOVA over named samples."""
    arrays = {name: _as_array(values, name) for name, values in samples.items()}
    empty = [name for name, arr in arrays.items() if arr.size == 0]
    if empty:
        raise DegenerateDataError(f"ANOVA group(s) {', '.join(empty)} are empty.")
    if len(arrays) < 2:
        raise DegenerateDataError(f"ANOVA needs at least 2 groups, got {len(arrays)}.")
    n = sum(arr.size for arr in arrays.values())
    g = len(arrays)
    if n <= g:
        raise DegenerateDataError(f"ANOVA needs more samples ({n}) than groups ({g}).")
    ssw = sum(float(np.sum((arr - arr.mean()) ** 2)) for arr in arrays.values())
    if ssw == 0.0:
        raise DegenerateDataError("ANOVA is undefined: no within-group variance (MSW = 0).")
    f_stat = max(0.0, float(stats.f_oneway(*arrays.values()).statistic))
    df_between, df_within = g - 1, n - g
    return AnovaResult(
        f_stat,
        f_sf(f_stat, df_between, df_within),
        df_between,
        df_within,
        {name: int(arr.size) for name, arr in arrays.items()},
    )


def anova_oneway(values: Sequence[float], groups: Sequence[object]) -> AnovaResult:
    """One-way ANOVA of ``values`` grouped by the aligned labels in ``groups``."""
    if len(values) != len(groups):
        raise AlignmentError(f"{len(values)} values but {len(groups)} group labels.")
    samples: dict[str, list[float]] = defaultdict(list)
    for value, group in zip(values, groups):
        label = group.value if isinstance(group, Enum) else str(group)
        samples[label].append(float(value))
    return anova_groups(dict(sorted(samples.items())))


@dataclass(frozen=True)
class AnovaReport:
    results: Mapping[PosTag, AnovaResult]
    skipped: tuple[PosTag, ...] = ()


def anova_by_pos(values: Mapping[str, float], rows: Sequence[MetricRow]) -> AnovaReport:
    """ANOVA of a per-sample response over SyMCoM category, for each PoS tag.

    Tags with fewer than two non-empty categories, or with no within-group
    variance, are skipped.
    """
    present = [row for row in rows if row.sample_id in values]
    response = [values[row.sample_id] for row in present]
    results: dict[PosTag, AnovaResult] = {}
    skipped: list[PosTag] = []
    for pos in PosTag:
        labels = [category_from_score(row.symcom_by_pos.get(pos)) for row in present]
        if len(set(labels)) < 2:
            skipped.append(pos)
            continue
        try:
            results[pos] = anova_oneway(response, labels)
        except DegenerateDataError as e:
            logger.debug(f"ANOVA for {pos.value} skipped: {e}")
            skipped.append(pos)
    return AnovaReport(results, tuple(skipped))


@dataclass(frozen=True)
class HistogramBin:
    low: float
    high: float
    count: int


def histogram_counts(
    values: Sequence[float], width: float, value_range: Optional[tuple[float, float]] = None
) -> list[HistogramBin]:
    """Fixed-width bins ``[low, low + width)``.

    With ``value_range`` the bins tile that range and out-of-range values fall
    into the edge bins; otherwise the bins start at a multiple of ``width``
    covering the data. Values on the top edge belong to the last bin.
    """
    arr = _as_array(values, "values")
    if arr.size == 0:
        raise DegenerateDataError("Histogram needs at least one value.")
    if width <= 0:
        raise CmlabError(f"Histogram bin width must be positive, got {width}.")
    if value_range is not None:
        low, high = value_range
        count = max(1, int(round((high - low) / width)))
    else:
        low = math.floor(float(arr.min()) / width + 1e-9) * width
        count = int(math.floor((float(arr.max()) - low) / width + 1e-9)) + 1
    index = np.floor((arr - low) / width + 1e-9).astype(np.int64)
    index = np.clip(index, 0, count - 1)
    tally = Counter(int(i) for i in index)
    return [HistogramBin(low + i * width, low + (i + 1) * width, tally.get(i, 0)) for i in range(count)]


@dataclass(frozen=True)
class BinErrorSummary:
    label: str
    n: int
    mean_error: float
    mean_abs_error: float


@dataclass(frozen=True)
class ErrorReport:
    errors: Mapping[str, float]
    histogram: list[HistogramBin]
    by_rating_bin: list[BinErrorSummary]
    correlations: list[CorrelationCell]
    anova: AnovaReport
    by_group: Mapping[str, BinErrorSummary] = field(default_factory=dict)


def _summary(label: str, errs: Sequence[float]) -> BinErrorSummary:
    arr = np.asarray(errs, dtype=np.float64)
    return BinErrorSummary(label, int(arr.size), float(arr.mean()), float(np.abs(arr).mean()))


def error_analysis(
    predictions: Mapping[str, float],
    truths: Mapping[str, float],
    rows: Sequence[MetricRow],
    bin_width: float = ERROR_HIST_WIDTH,
    bins: Sequence[float] = DEFAULT_BIN_EDGES,
    groups: Optional[Mapping[str, str]] = None,
) -> ErrorReport:
    """Distribution and drivers of ``truth - prediction``.

    ``groups`` optionally maps id to a group name (e.g. source) for per-group
    summaries.
    """
    if set(predictions) != set(truths):
        missing = sorted(set(predictions) ^ set(truths))
        raise AlignmentError(f"Predictions and truths cover different ids: {', '.join(missing[:10])}.")
    row_ids = {row.sample_id for row in rows}
    missing_rows = sorted(set(truths) - row_ids)
    if missing_rows:
        raise AlignmentError(f"No metric row for id(s): {', '.join(missing_rows[:10])}.")
    if not truths:
        raise DegenerateDataError("Error analysis needs at least one prediction.")
    errors = {sid: float(truths[sid]) - float(predictions[sid]) for sid in sorted(truths)}
    aligned = [row for row in rows if row.sample_id in errors]
    series = [errors[row.sample_id] for row in aligned]

    per_bin: dict[int, list[float]] = defaultdict(list)
    for sid, err in errors.items():
        per_bin[rating_bin(truths[sid], bins)].append(err)
    by_bin = [_summary(f"{bins[i]:g}-{bins[i + 1]:g}", per_bin[i]) for i in sorted(per_bin)]

    by_group: dict[str, BinErrorSummary] = {}
    if groups:
        grouped: dict[str, list[float]] = defaultdict(list)
        for sid, err in errors.items():
            if sid in groups:
                grouped[groups[sid]].append(err)
        by_group = {name: _summary(name, errs) for name, errs in sorted(grouped.items())}

    return ErrorReport(
        errors=errors,
        histogram=histogram_counts(list(errors.values()), bin_width, ERROR_HIST_RANGE),
        by_rating_bin=by_bin,
        correlations=correlation_matrix(aligned, {"error": series}, CORRELATION_FEATURES),
        anova=anova_by_pos(errors, aligned),
        by_group=by_group,
    )


@dataclass(frozen=True)
class PerturbationImpact:
    kind: str
    n: int
    mean_rating: Optional[float]


def perturbation_impact(ratings: Mapping[str, float], corpus: Sequence[TaggedSentence]) -> list[PerturbationImpact]:
    """Mean average rating of unperturbed samples and of each perturbation kind."""
    groups: dict[str, list[float]] = {"none": []}
    groups.update({kind.value: [] for kind in Perturbation})
    for sentence in corpus:
        if sentence.id not in ratings:
            continue
        key = sentence.perturbation.value if sentence.perturbation is not None else "none"
        groups[key].append(ratings[sentence.id])
    return [
        PerturbationImpact(kind, len(values), float(np.mean(values)) if values else None)
        for kind, values in groups.items()
    ]
