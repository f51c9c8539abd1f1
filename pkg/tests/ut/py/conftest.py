# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Pytest configuration for Python unit tests (tests/ut/py/).

Adds python/ to sys.path so ``cmlab`` imports without installing the package.
"""

import sys
from pathlib import Path

_ROOT = Path(__file__).parent.parent.parent.parent
_s = str(_ROOT / "python")
if _s not in sys.path:
    sys.path.insert(0, _s)
