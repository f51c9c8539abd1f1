# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Translator backends used by back-translation perturbation.

A translator is anything with ``translate(text, source, target) -> str``.
Implementations must be deterministic for a fixed input so perturbed corpora
are reproducible.
"""

from __future__ import annotations

import logging
import threading
from pathlib import Path
from typing import Optional, Protocol, Union

import requests

from . import env_manager
from .corpus_model import LanguageTag, open_text
from .errors import CorpusFormatError, TranslatorError

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 30.0


class TranslatorPort(Protocol):
    def translate(self, text: str, source: LanguageTag, target: LanguageTag) -> str: ...


class IdentityTranslator:
    """Returns the input unchanged. Useful as a no-op round trip."""

    def translate(self, text: str, source: LanguageTag, target: LanguageTag) -> str:
        return text


class DictionaryTranslator:
    """Word-by-word lookup in a bidirectional LangA<->LangB word map.

    Words missing from the map pass through unchanged.
    """

    def __init__(self, pairs: list[tuple[str, str]]):
        self._a_to_b: dict[str, str] = {}
        self._b_to_a: dict[str, str] = {}
        for word_a, word_b in pairs:
            self._a_to_b.setdefault(word_a, word_b)
            self._b_to_a.setdefault(word_b, word_a)

    @classmethod
    def from_tsv(cls, path: Union[str, Path]) -> DictionaryTranslator:
        """Load ``langA_word<TAB>langB_word`` lines; ``#`` starts a comment line."""
        pairs = []
        with open_text(path) as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                    raise CorpusFormatError("expected exactly two tab-separated words", str(path), lineno)
                pairs.append((parts[0].strip(), parts[1].strip()))
        logger.debug(f"Loaded {len(pairs)} word pair(s) from {path}")
        return cls(pairs)

    def translate(self, text: str, source: LanguageTag, target: LanguageTag) -> str:
        if source is target:
            return text
        if source is LanguageTag.LANG_A and target is LanguageTag.LANG_B:
            table = self._a_to_b
        elif source is LanguageTag.LANG_B and target is LanguageTag.LANG_A:
            table = self._b_to_a
        else:
            raise TranslatorError(text, f"cannot translate {source.value} -> {target.value}")
        return " ".join(table.get(word, word) for word in text.split())


class HttpTranslator:
    """POSTs ``{"text", "from", "to"}`` JSON to a translation endpoint and reads ``text`` back.

    The endpoint defaults to ``$CMLAB_TRANSLATOR_URL``. Each calling thread gets its own
    ``requests.Session`` unless one is injected, in which case it is shared.
    """

    def __init__(
        self,
        url: Optional[str] = None,
        timeout: float = DEFAULT_TIMEOUT_S,
        session: Optional[requests.Session] = None,
    ):
        self.url = url or env_manager.translator_url()
        self.timeout = timeout
        self._shared = session
        self._local = threading.local()

    @property
    def session(self) -> requests.Session:
        if self._shared is not None:
            return self._shared
        session = getattr(self._local, "session", None)
        if session is None:
            session = self._local.session = requests.Session()
        return session

    def translate(self, text: str, source: LanguageTag, target: LanguageTag) -> str:
        payload = {"text": text, "from": source.value, "to": target.value}
        try:
            response = self.session.post(self.url, json=payload, timeout=self.timeout)
            response.raise_for_status()
            body = response.json()
        except requests.RequestException as e:
            raise TranslatorError(text, f"request to {self.url} failed: {e}") from e
        except ValueError as e:
            raise TranslatorError(text, f"response from {self.url} is not JSON") from e
        if not isinstance(body, dict) or not isinstance(body.get("text"), str):
            raise TranslatorError(text, f"response from {self.url} has no string field 'text'")
        return body["text"]
