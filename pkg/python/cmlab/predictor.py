# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Feature-based acceptability predictor and its baselines.

The predictor is a single-hidden-layer ReLU network over the sentence metric
features, trained with Adam on MSE with early stopping on dev RMSE. Features
are min-max scaled with statistics frozen from the training split.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import torch
from torch import nn

from .cm_metrics import MetricRow
from .corpus_model import AnnotationTriple, open_text
from .errors import (
    AlignmentError,
    CorpusFormatError,
    DegenerateDataError,
    ExclusionPresentError,
    SchemaMismatchError,
    TrainingError,
)

logger = logging.getLogger(__name__)

BASE_FEATURES = ("length", "cmi", "switch_points", "burstiness", "burstiness_absent", "symcom_sentence")
EXTERNAL_FEATURE = "external_score"
MODEL_HEADER = "cmlab-model 1"
RATING_RANGE = (1.0, 5.0)


def feature_names(include_external: bool = False) -> tuple[str, ...]:
    return BASE_FEATURES + ((EXTERNAL_FEATURE,) if include_external else ())


def _row_features(row: MetricRow, names: Sequence[str]) -> list[float]:
    values = []
    for name in names:
        if name == "burstiness":
            values.append(row.burstiness if row.burstiness is not None else 0.0)
        elif name == "burstiness_absent":
            values.append(1.0 if row.burstiness is None else 0.0)
        elif name == "symcom_sentence":
            values.append(row.symcom_sentence if row.symcom_sentence is not None else 0.0)
        elif name == EXTERNAL_FEATURE:
            if row.external_score is None:
                raise SchemaMismatchError(
                    f"Row '{row.sample_id}' has no external_score but the feature set requires it."
                )
            values.append(row.external_score)
        elif name in ("length", "cmi", "switch_points"):
            values.append(float(getattr(row, name)))
        else:
            raise SchemaMismatchError(f"Unknown feature '{name}'; expected one of {feature_names(True)}.")
    return values


def feature_matrix(rows: Sequence[MetricRow], names: Sequence[str]) -> np.ndarray:
    """Raw (unscaled) feature matrix, one row per MetricRow."""
    return np.asarray([_row_features(row, names) for row in rows], dtype=np.float64).reshape(len(rows), len(names))


@dataclass(frozen=True)
class FeatureScaler:
    """Min-max statistics frozen from a training matrix. Constant columns scale to 0."""

    minimum: np.ndarray
    maximum: np.ndarray

    @classmethod
    def fit(cls, matrix: np.ndarray, names: Optional[Sequence[str]] = None) -> FeatureScaler:
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] == 0:
            raise DegenerateDataError("Scaler needs a non-empty 2-D training matrix.")
        minimum, maximum = matrix.min(axis=0), matrix.max(axis=0)
        for j in np.flatnonzero(maximum <= minimum):
            label = names[j] if names is not None else str(j)
            logger.warning(f"Feature '{label}' is constant on the training split; it will scale to 0")
        return cls(minimum, maximum)

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape[-1] != self.minimum.size:
            raise SchemaMismatchError(f"Scaler expects {self.minimum.size} features, got {matrix.shape[-1]}.")
        span = self.maximum - self.minimum
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (matrix - self.minimum) / safe, 0.0)


@dataclass(frozen=True)
class TrainConfig:
    hidden: int = 32
    learning_rate: float = 1e-3
    epochs: int = 500
    patience: int = 10
    batch_size: int = 32
    seed: int = 0


class FeedForward(nn.Module):
    def __init__(self, input_width: int, hidden_width: int):
        super().__init__()
        self.hidden = nn.Linear(input_width, hidden_width, dtype=torch.float64)
        self.output = nn.Linear(hidden_width, 1, dtype=torch.float64)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.output(torch.relu(self.hidden(x))).squeeze(-1)


def _glorot_uniform(shape: tuple[int, int], generator: torch.Generator) -> torch.Tensor:
    fan_out, fan_in = shape
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return (torch.rand(shape, generator=generator, dtype=torch.float64) * 2.0 - 1.0) * limit


class PredictorModel:
    """Network plus the feature schema and frozen scaler it was trained with."""

    def __init__(
        self,
        network: FeedForward,
        features: Sequence[str] = BASE_FEATURES,
        scaler: Optional[FeatureScaler] = None,
    ):
        self.network = network
        self.features = tuple(features)
        self.scaler = scaler

    @classmethod
    def create(
        cls,
        input_width: int,
        hidden_width: int = 32,
        seed: int = 0,
        features: Optional[Sequence[str]] = None,
        scaler: Optional[FeatureScaler] = None,
    ) -> PredictorModel:
        if input_width < 1 or hidden_width < 1:
            raise SchemaMismatchError(f"Model widths must be positive, got d={input_width}, H={hidden_width}.")
        network = FeedForward(input_width, hidden_width)
        generator = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            network.hidden.weight.copy_(_glorot_uniform((hidden_width, input_width), generator))
            network.hidden.bias.zero_()
            network.output.weight.copy_(_glorot_uniform((1, hidden_width), generator))
            network.output.bias.zero_()
        names = tuple(features) if features is not None else tuple(f"x{j + 1}" for j in range(input_width))
        if len(names) != input_width:
            raise SchemaMismatchError(f"{len(names)} feature names for input width {input_width}.")
        return cls(network, names, scaler)

    @property
    def input_width(self) -> int:
        return self.network.hidden.in_features

    @property
    def hidden_width(self) -> int:
        return self.network.hidden.out_features

    @property
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.network.parameters())

    def set_parameters(self, w1, b1, w2, b2) -> None:
        h, d = self.hidden_width, self.input_width
        values = [
            (self.network.hidden.weight, w1, (h, d)),
            (self.network.hidden.bias, b1, (h,)),
            (self.network.output.weight, w2, (1, h)),
            (self.network.output.bias, b2, (1,)),
        ]
        with torch.no_grad():
            for param, value, shape in values:
                param.copy_(torch.as_tensor(np.asarray(value, dtype=np.float64).reshape(shape)))

    def forward(self, x) -> Union[float, np.ndarray]:
        """Output for one scaled feature vector (float) or a batch (array)."""
        arr = np.asarray(x, dtype=np.float64)
        if arr.shape[-1] != self.input_width:
            raise SchemaMismatchError(f"Model expects {self.input_width} features, got {arr.shape[-1]}.")
        with torch.no_grad():
            out = self.network(torch.from_numpy(np.ascontiguousarray(np.atleast_2d(arr)))).numpy()
        return float(out[0]) if arr.ndim == 1 else out

    def predict(self, rows: Sequence[MetricRow]) -> np.ndarray:
        """Predict ratings for metric rows using the frozen scaler."""
        if not rows:
            return np.zeros(0)
        raw = feature_matrix(rows, self.features)
        scaled = self.scaler.transform(raw) if self.scaler is not None else raw
        return np.asarray(self.forward(scaled), dtype=np.float64).reshape(len(rows))


def forward(model: PredictorModel, x) -> Union[float, np.ndarray]:
    return model.forward(x)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    dev_rmse: float
    best_dev_rmse: float


@dataclass
class TrainResult:
    model: PredictorModel
    history: list[EpochRecord] = field(default_factory=list)

    @property
    def best_dev_rmse(self) -> float:
        return self.history[-1].best_dev_rmse if self.history else math.inf


def _tensor(values, name: str) -> torch.Tensor:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise DegenerateDataError(f"{name} is empty.")
    return torch.from_numpy(arr.copy())


def train(
    model: PredictorModel,
    train_x,
    train_y,
    dev_x,
    dev_y,
    config: Optional[TrainConfig] = None,
) -> TrainResult:
    """Adam on MSE with early stopping; returns the best-dev checkpoint.

    ``train_x`` and ``dev_x`` must already be scaled. The output bias starts at
    the mean training target.
    """
    config = config or TrainConfig()
    xt, yt = _tensor(train_x, "training features"), _tensor(train_y, "training targets")
    xd, yd = _tensor(dev_x, "dev features"), _tensor(dev_y, "dev targets")
    if xt.shape[0] != yt.shape[0] or xd.shape[0] != yd.shape[0]:
        raise AlignmentError("Feature and target counts differ in the training or dev set.")
    for name, x in (("training", xt), ("dev", xd)):
        if x.ndim != 2 or x.shape[1] != model.input_width:
            raise SchemaMismatchError(f"{name} features must be (n, {model.input_width}), got {tuple(x.shape)}.")

    net = model.network
    with torch.no_grad():
        net.output.bias.fill_(float(yt.mean()))
    optimizer = torch.optim.Adam(net.parameters(), lr=config.learning_rate, betas=(0.9, 0.999), eps=1e-8)
    loss_fn = nn.MSELoss()
    generator = torch.Generator().manual_seed(config.seed)
    n = xt.shape[0]
    batch = max(1, config.batch_size)

    best = math.inf
    best_state = copy.deepcopy(net.state_dict())
    stale = 0
    history: list[EpochRecord] = []
    for epoch in range(1, config.epochs + 1):
        net.train()
        order = torch.randperm(n, generator=generator)
        total = 0.0
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            optimizer.zero_grad()
            loss = loss_fn(net(xt[idx]), yt[idx])
            if not torch.isfinite(loss):
                raise TrainingError(epoch, f"loss became {loss.item()}")
            loss.backward()
            optimizer.step()
            total += loss.item() * idx.numel()
        net.eval()
        with torch.no_grad():
            dev_rmse = math.sqrt(loss_fn(net(xd), yd).item())
        if not math.isfinite(dev_rmse):
            raise TrainingError(epoch, f"dev RMSE became {dev_rmse}")
        if dev_rmse < best:
            best = dev_rmse
            best_state = copy.deepcopy(net.state_dict())
            stale = 0
        else:
            stale += 1
        history.append(EpochRecord(epoch, total / n, dev_rmse, best))
        if stale >= config.patience:
            logger.debug(f"Early stop at epoch {epoch}: no dev improvement for {config.patience} epoch(s)")
            break
    net.load_state_dict(best_state)
    logger.info(f"Training finished after {len(history)} epoch(s); best dev RMSE {best:.4f}")
    return TrainResult(model, history)


def fit_predictor(
    train_rows: Sequence[MetricRow],
    train_targets: Mapping[str, float],
    dev_rows: Sequence[MetricRow],
    dev_targets: Mapping[str, float],
    config: Optional[TrainConfig] = None,
    include_external: bool = False,
) -> TrainResult:
    """Build features, freeze the scaler on the training rows, create and train a model."""
    config = config or TrainConfig()
    names = feature_names(include_external)
    raw_train = feature_matrix(train_rows, names)
    scaler = FeatureScaler.fit(raw_train, names)
    model = PredictorModel.create(len(names), config.hidden, config.seed, names, scaler)
    return train(
        model,
        scaler.transform(raw_train),
        _targets(train_rows, train_targets),
        scaler.transform(feature_matrix(dev_rows, names)),
        _targets(dev_rows, dev_targets),
        config,
    )


def _targets(rows: Sequence[MetricRow], targets: Mapping[str, float]) -> np.ndarray:
    missing = [row.sample_id for row in rows if row.sample_id not in targets]
    if missing:
        raise AlignmentError(f"No target for id(s): {', '.join(missing[:10])}.")
    return np.asarray([targets[row.sample_id] for row in rows], dtype=np.float64)


def gradient_check(model: PredictorModel, x, y, h: float = 1e-5) -> float:
    """Max relative gap between autograd and central-difference gradients of the MSE.

    Relative error is ``|a - n| / max(|a|, |n|, 1e-4)``; the floor keeps
    near-zero gradients from dominating.
    """
    xs, ys = _tensor(x, "batch features"), _tensor(y, "batch targets")
    net = model.network
    loss_fn = nn.MSELoss()
    net.zero_grad()
    loss_fn(net(xs), ys).backward()
    worst = 0.0
    with torch.no_grad():
        for param in net.parameters():
            analytic = param.grad.detach().clone().reshape(-1)
            flat = param.data.view(-1)
            for i in range(flat.numel()):
                saved = flat[i].item()
                flat[i] = saved + h
                plus = loss_fn(net(xs), ys).item()
                flat[i] = saved - h
                minus = loss_fn(net(xs), ys).item()
                flat[i] = saved
                numeric = (plus - minus) / (2.0 * h)
                a = analytic[i].item()
                worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), 1e-4))
    net.zero_grad()
    return worst


@dataclass(frozen=True)
class EvalResult:
    rmse: float
    mae: float
    n: int


def evaluate(predictions: Sequence[float], truths: Sequence[float]) -> EvalResult:
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    t = np.asarray(truths, dtype=np.float64).reshape(-1)
    if p.size != t.size:
        raise AlignmentError(f"{p.size} predictions for {t.size} truths.")
    if t.size == 0:
        raise DegenerateDataError("Cannot evaluate an empty set.")
    diff = p - t
    return EvalResult(float(np.sqrt(np.mean(diff**2))), float(np.mean(np.abs(diff))), int(t.size))


def random_baseline(targets: Sequence[float], seed: int = 0) -> EvalResult:
    """Uniform-random predictions on the rating range."""
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    if t.size == 0:
        raise DegenerateDataError("Random baseline needs at least one target.")
    rng = np.random.default_rng(seed)
    return evaluate(rng.uniform(*RATING_RANGE, size=t.size), t)


def human_baseline(triples: Sequence[AnnotationTriple]) -> EvalResult:
    """RMSE and MAE between each pair of annotators, averaged over the three pairs."""
    if not triples:
        raise DegenerateDataError("Human baseline needs at least one annotated sample.")
    excluded = [t.sample_id for t in triples if t.has_exclusion]
    if excluded:
        raise ExclusionPresentError(
            f"{len(excluded)} sample(s) carry exclusion labels (e.g. '{excluded[0]}'); filter exclusions first."
        )
    ratings = np.asarray([t.ratings for t in triples], dtype=np.float64)
    pairs = [evaluate(ratings[:, i], ratings[:, j]) for i, j in combinations(range(3), 2)]
    return EvalResult(
        float(np.mean([r.rmse for r in pairs])),
        float(np.mean([r.mae for r in pairs])),
        len(triples),
    )


def transfer_evaluate(model: PredictorModel, rows: Sequence[MetricRow], targets: Mapping[str, float]) -> EvalResult:
    """Apply a trained model, unchanged, to a foreign set with the same feature schema."""
    if not rows:
        raise DegenerateDataError("Transfer set is empty.")
    return evaluate(model.predict(rows), _targets(rows, targets))


def _floats(values) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(values, dtype=np.float64).reshape(-1))


def save_model(model: PredictorModel, path: Union[str, Path]) -> None:
    """Write the versioned plain-text model file.

    Layout: header, dimensions, feature names, scaler min and max, then W1
    (row-major, one row per line), b1, w2 and b2 as decimal text.
    """
    net = model.network
    scaler = model.scaler or FeatureScaler(np.zeros(model.input_width), np.ones(model.input_width))
    lines = [
        MODEL_HEADER,
        f"dims {model.input_width} {model.hidden_width}",
        "features " + " ".join(model.features),
        "scaler_min " + _floats(scaler.minimum),
        "scaler_max " + _floats(scaler.maximum),
    ]
    weights = net.hidden.weight.detach().numpy()
    lines += ["W1 " + _floats(row) for row in weights]
    lines.append("b1 " + _floats(net.hidden.bias.detach().numpy()))
    lines.append("w2 " + _floats(net.output.weight.detach().numpy()))
    lines.append("b2 " + _floats(net.output.bias.detach().numpy()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _expect(lines: list[tuple[int, str]], index: int, key: str, path: str) -> tuple[int, list[str]]:
    if index >= len(lines):
        last = lines[-1][0] if lines else 0
        raise CorpusFormatError(f"model file ends before '{key}'", path, last + 1)
    lineno, text = lines[index]
    parts = text.split()
    if not parts or parts[0] != key:
        raise CorpusFormatError(f"expected '{key}' line", path, lineno)
    return lineno, parts[1:]


def _parse_floats(lines: list[tuple[int, str]], index: int, key: str, count: int, path: str) -> np.ndarray:
    lineno, parts = _expect(lines, index, key, path)
    if len(parts) != count:
        raise CorpusFormatError(f"'{key}' needs {count} value(s), got {len(parts)}", path, lineno)
    try:
        values = np.asarray([float(p) for p in parts], dtype=np.float64)
    except ValueError:
        raise CorpusFormatError(f"'{key}' has a non-numeric value", path, lineno) from None
    if not np.all(np.isfinite(values)):
        raise CorpusFormatError(f"'{key}' has a non-finite value", path, lineno)
    return values


def load_model(path: Union[str, Path]) -> PredictorModel:
    """Read a model written by :func:`save_model`; every block is checked against ``dims``."""
    path_str = str(path)
    with open_text(path) as f:
        lines = [(lineno, text.strip()) for lineno, text in enumerate(f, start=1) if text.strip()]
    if not lines or lines[0][1] != MODEL_HEADER:
        raise CorpusFormatError(f"not a cmlab model file (expected header '{MODEL_HEADER}')", path_str, 1)
    dims_line, dims = _expect(lines, 1, "dims", path_str)
    try:
        d, hidden = (int(v) for v in dims)
    except ValueError:
        raise CorpusFormatError("'dims' needs two integers", path_str, dims_line) from None
    if d < 1 or hidden < 1:
        raise CorpusFormatError(f"'dims' must be positive, got {d} x {hidden}", path_str, dims_line)
    features_line, features = _expect(lines, 2, "features", path_str)
    if len(features) != d:
        raise CorpusFormatError(f"{len(features)} feature names for input width {d}", path_str, features_line)
    minimum = _parse_floats(lines, 3, "scaler_min", d, path_str)
    maximum = _parse_floats(lines, 4, "scaler_max", d, path_str)
    w1 = np.vstack([_parse_floats(lines, 5 + i, "W1", d, path_str) for i in range(hidden)])
    at = 5 + hidden
    b1 = _parse_floats(lines, at, "b1", hidden, path_str)
    w2 = _parse_floats(lines, at + 1, "w2", hidden, path_str)
    b2 = _parse_floats(lines, at + 2, "b2", 1, path_str)
    if len(lines) > at + 3:
        extra_line = lines[at + 3][0]
        raise CorpusFormatError(f"unexpected content after 'b2' ({hidden} hidden rows declared)", path_str, extra_line)
    model = PredictorModel(FeedForward(d, hidden), features, FeatureScaler(minimum, maximum))
    model.set_parameters(w1, b1, w2, b2)
    return model
