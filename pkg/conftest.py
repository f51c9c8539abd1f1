# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Root conftest: CLI options and slow-test selection."""

from __future__ import annotations

import pytest


def pytest_addoption(parser):
    """Register CLI options."""
    parser.addoption(
        "--skip-slow",
        action="store_true",
        default=False,
        help="Skip exhaustive and training-heavy tests marked 'slow'",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: exhaustive or training-heavy checks")


def pytest_collection_modifyitems(session, config, items):
    if not config.getoption("--skip-slow"):
        return
    skip = pytest.mark.skip(reason="--skip-slow given")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
