# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Shared CLI log-level helper.

The ``cmlab`` entry point wires ``--log-level``/``--quiet`` through here and
defaults to INFO. The chosen level is also exported as ``CMLAB_LOG_LEVEL`` so
worker threads and child tools started by the pipeline inherit it.
"""

import logging
import os

LOG_LEVEL_CHOICES = ["error", "warn", "info", "debug"]
DEFAULT_LOG_LEVEL = "info"
LOG_LEVEL_ENV = "CMLAB_LOG_LEVEL"

_LEVEL_MAP = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def resolve_level(log_level: str = DEFAULT_LOG_LEVEL, quiet: bool = False) -> str:
    """Normalize a user-supplied level name. ``quiet`` forces ``error``."""
    if quiet:
        return "error"
    name = (log_level or DEFAULT_LOG_LEVEL).lower()
    return name if name in _LEVEL_MAP else DEFAULT_LOG_LEVEL


def configure_logging(log_level: str = DEFAULT_LOG_LEVEL, quiet: bool = False) -> None:
    """Configure root logger for a CLI entry point.

    Args:
        log_level: one of "error" / "warn" / "info" / "debug" (case-insensitive).
            Unknown values fall back to INFO.
        quiet: suppress everything below ERROR regardless of ``log_level``.
    """
    name = resolve_level(log_level, quiet)
    logging.basicConfig(
        level=_LEVEL_MAP[name],
        format="[%(levelname)s] %(message)s",
        force=True,
    )
    os.environ[LOG_LEVEL_ENV] = name
