# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Environment settings read once per process.

A value is looked up on first use and kept until :func:`clear`, so a run sees
one endpoint even if the environment changes underneath it.
"""

import os

TRANSLATOR_URL = "CMLAB_TRANSLATOR_URL"

_cache: dict[str, str] = {}


def require(name: str, hint: str = "") -> str:
    """Cached value of ``name``. OSError if it is unset or blank; ``hint`` is appended to the message."""
    if name in _cache:
        return _cache[name]
    value = os.environ.get(name, "").strip()
    if not value:
        raise OSError(f"Environment variable '{name}' is not set{'; ' + hint if hint else ''}.")
    _cache[name] = value
    return value


def translator_url() -> str:
    """Endpoint for the HTTP back-translation client."""
    return require(TRANSLATOR_URL, "set it or pass --translator-url / --offline-stub FILE")


def clear() -> None:
    """Forget every cached value so the next lookup re-reads the environment."""
    _cache.clear()
