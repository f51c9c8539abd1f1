# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Shared fixtures: small tagged sentences and corpus files."""

import json
import logging
import os
import sys
from pathlib import Path

import pytest

PROJECT_ROOT = Path(__file__).parent.parent

_python_dir = str(PROJECT_ROOT / "python")
if _python_dir not in sys.path:
    sys.path.insert(0, _python_dir)


def tagged(spec: str, sample_id: str = "s1", source: str = "gcm", script: str = "roman"):
    """Build a TaggedSentence from ``surface/lid/pos`` items, e.g. ``"mera/l1/PRON ghar/l1/NOUN"``.

    ``lid`` is ``a`` / ``b`` / ``n`` (or the full tag value); pos may be omitted.
    """
    from cmlab.corpus_model import LanguageTag, PosTag, ScriptForm, Source, TaggedSentence, Token  # noqa: PLC0415

    short = {"a": LanguageTag.LANG_A, "b": LanguageTag.LANG_B, "n": LanguageTag.NEUTRAL}
    tokens = []
    for item in spec.split():
        parts = item.split("/")
        lid = short.get(parts[1]) or LanguageTag(parts[1])
        pos = PosTag(parts[2]) if len(parts) > 2 else None
        tokens.append(Token(parts[0], lid, pos))
    return TaggedSentence(sample_id, tuple(tokens), Source(source), ScriptForm(script))


def lid_sentence(lids: str, sample_id: str = "s1", **kwargs):
    """Sentence with one token per character of ``lids`` (``a``/``b``/``n``) and no PoS."""
    return tagged(" ".join(f"w{i}/{c}" for i, c in enumerate(lids)), sample_id, **kwargs)


def write_jsonl(path: Path, records) -> Path:
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records), encoding="utf-8")
    return path


_LID_VALUES = {"a": "l1", "b": "l2", "n": "neutral"}


def record(sample_id: str, lids: str, source: str = "gcm", pos: str = "NOUN", ratings=None) -> dict:
    """Corpus JSONL record with one token per character of ``lids``."""
    rec = {
        "id": sample_id,
        "tokens": [{"surface": f"w{i}", "lid": _LID_VALUES[c], "pos": pos} for i, c in enumerate(lids)],
        "source": source,
        "script": "roman",
    }
    if ratings is not None:
        rec["ratings"] = list(ratings)
    return rec


@pytest.fixture
def make_sentence():
    return tagged


@pytest.fixture
def make_lids():
    return lid_sentence


@pytest.fixture
def make_record():
    return record


@pytest.fixture
def write_corpus(tmp_path):
    def _write(records, name: str = "corpus.jsonl") -> Path:
        return write_jsonl(tmp_path / name, records)

    return _write


@pytest.fixture(autouse=True)
def _isolated_process_state(monkeypatch):
    """Empty env cache, no translator endpoint, and root logging restored after CLI runs."""
    from cmlab import env_manager  # noqa: PLC0415

    root = logging.getLogger()
    level, handlers = root.level, list(root.handlers)
    saved_level_env = os.environ.get("CMLAB_LOG_LEVEL")
    monkeypatch.delenv("CMLAB_TRANSLATOR_URL", raising=False)
    env_manager.clear()
    yield
    env_manager.clear()
    root.setLevel(level)
    for handler in list(root.handlers):
        # basicConfig(force=True) handlers; pytest's own capture handlers are subclasses.
        if handler not in handlers and type(handler) is logging.StreamHandler:
            root.removeHandler(handler)
    if saved_level_env is None:
        os.environ.pop("CMLAB_LOG_LEVEL", None)
    else:
        os.environ["CMLAB_LOG_LEVEL"] = saved_level_env
