# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Run configuration: defaults, ``key=value`` config files and command-line overrides.

Precedence is flag > config file > default. The resolved :class:`RunConfig`
serializes to sorted ``key=value`` lines that every report embeds.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from .corpus_model import open_text
from .curation import SEED_MAX
from .errors import CmlabError
from .log_config import LOG_LEVEL_CHOICES

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    split_ratios: tuple[float, ...] = (0.7, 0.1, 0.2)
    split_tolerance: float = 0.05
    rating_bins: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 5.0)
    disagreement_threshold: int = 4
    swap_pairs: int = 1
    delete_fraction: float = 0.1
    hidden: int = 32
    learning_rate: float = 1e-3
    epochs: int = 500
    patience: int = 10
    batch_size: int = 32
    include_external: bool = False
    error_bin_width: float = 0.25
    rating_bin_width: float = 0.5
    jobs: int = 1
    log_level: str = "info"
    paths: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not 0 <= self.seed <= SEED_MAX:
            raise CmlabError(f"seed {self.seed} must be an unsigned 64-bit integer (0..{SEED_MAX}).")
        if len(self.split_ratios) != 3 or abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise CmlabError(f"split_ratios {self.split_ratios} must be three values summing to 1.")
        if len(self.rating_bins) < 2:
            raise CmlabError(f"rating_bins {self.rating_bins} needs at least two edges.")
        for name in ("hidden", "epochs", "patience", "batch_size", "jobs", "swap_pairs"):
            if getattr(self, name) < 1:
                raise CmlabError(f"{name} must be >= 1, got {getattr(self, name)}.")
        for name in ("learning_rate", "error_bin_width", "rating_bin_width"):
            if getattr(self, name) <= 0:
                raise CmlabError(f"{name} must be positive, got {getattr(self, name)}.")
        if not 0.0 < self.delete_fraction < 1.0:
            raise CmlabError(f"delete_fraction must lie in (0, 1), got {self.delete_fraction}.")
        if self.log_level not in LOG_LEVEL_CHOICES:
            raise CmlabError(f"log_level must be one of {LOG_LEVEL_CHOICES}, got '{self.log_level}'.")

    def to_lines(self) -> list[str]:
        """Deterministic ``key=value`` serialization, keys sorted."""
        lines = []
        for f in sorted(dataclasses.fields(self), key=lambda f: f.name):
            value = getattr(self, f.name)
            if f.name == "paths":
                lines += [f"paths.{key}={path}" for key, path in sorted(value)]
                continue
            lines.append(f"{f.name}={_format(value)}")
        return lines


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    return str(value)


_TYPES = {
    "seed": int,
    "split_ratios": "floats",
    "split_tolerance": float,
    "rating_bins": "floats",
    "disagreement_threshold": int,
    "swap_pairs": int,
    "delete_fraction": float,
    "hidden": int,
    "learning_rate": float,
    "epochs": int,
    "patience": int,
    "batch_size": int,
    "include_external": bool,
    "error_bin_width": float,
    "rating_bin_width": float,
    "jobs": int,
    "log_level": str,
}


def _coerce(key: str, raw: str, where: str) -> Any:
    kind = _TYPES[key]
    text = raw.strip()
    try:
        if kind == "floats":
            return tuple(float(v) for v in text.split(",") if v.strip())
        if kind is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text.lower()
    except ValueError:
        type_name = getattr(kind, "__name__", kind)
        raise CmlabError(f"{where}: value '{text}' for '{key}' is not a valid {type_name}.") from None


def load_config_file(path: Union[str, Path]) -> dict[str, Any]:
    """Parse a ``key = value`` file. ``#`` starts a comment; unknown keys are an error."""
    values: dict[str, Any] = {}
    with open_text(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            if "=" not in line:
                raise CmlabError(f"{where}: expected 'key = value', got '{line}'.")
            key, raw = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _TYPES:
                raise CmlabError(f"{where}: unknown config key '{key}'; known keys: {', '.join(sorted(_TYPES))}.")
            values[key] = _coerce(key, raw, where)
    logger.debug(f"Loaded {len(values)} setting(s) from {path}")
    return values


def resolve_config(
    config_file: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    paths: Optional[Mapping[str, Optional[str]]] = None,
) -> RunConfig:
    """Merge defaults, an optional config file and command-line overrides (None means unset)."""
    values: dict[str, Any] = {}
    if config_file is not None:
        values.update(load_config_file(config_file))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _TYPES:
            raise CmlabError(f"Unknown setting '{key}'.")
        values[key] = tuple(value) if isinstance(value, list) else value
    path_items = tuple(sorted((k, str(v)) for k, v in (paths or {}).items() if v is not None))
    return RunConfig(**values, paths=path_items)
