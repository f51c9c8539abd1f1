# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Tagged code-mixed sentences, annotation triples and their file formats.

Corpus files are JSON Lines, one sentence per line::

    {"id": "s1", "text": "mera research", "source": "gcm", "script": "roman",
     "tokens": [{"surface": "mera", "lid": "l1", "pos": "PRON"},
                {"surface": "research", "lid": "l2", "pos": "NOUN"}]}

Annotation files are CSV with header ``sample_id,r1,r2,r3``. Each label is an
integer rating 1..5 or one of the exclusion tokens ``ABUSIVE``, ``MONO`` and
``OTHERLANG``.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, BinaryIO, Iterator, Optional, Union

from .errors import (
    CorpusFormatError,
    DuplicateIdError,
    ExclusionPresentError,
    RatingRangeError,
)

logger = logging.getLogger(__name__)

RATING_MIN = 1
RATING_MAX = 5
ANNOTATION_HEADER = ["sample_id", "r1", "r2", "r3"]
SCORE_HEADER = ["id", "score"]

_DEVANAGARI = ("\u0900", "\u097f")


class LanguageTag(Enum):
    LANG_A = "l1"
    LANG_B = "l2"
    NEUTRAL = "neutral"

    @property
    def is_language(self) -> bool:
        return self is not LanguageTag.NEUTRAL


class PosTag(Enum):
    ADJ = "ADJ"
    ADP = "ADP"
    ADV = "ADV"
    AUX = "AUX"
    CCONJ = "CCONJ"
    DET = "DET"
    INTJ = "INTJ"
    NOUN = "NOUN"
    NUM = "NUM"
    PART = "PART"
    PRON = "PRON"
    PROPN = "PROPN"
    PUNCT = "PUNCT"
    SCONJ = "SCONJ"
    SYM = "SYM"
    VERB = "VERB"
    X = "X"


_POS_ALIASES = {"PPRON": PosTag.PROPN}


class Source(Enum):
    SYNTHETIC = "gcm"
    SOCIAL = "osn"


class ScriptForm(Enum):
    ROMANISED = "roman"
    NORMALISED = "norm"


class Perturbation(Enum):
    SWAP = "swap"
    DELETE = "delete"
    BACK_TRANSLATE = "backtranslate"


class Exclusion(Enum):
    ABUSIVE = "ABUSIVE"
    MONOLINGUAL = "MONO"
    OTHER_LANGUAGE = "OTHERLANG"


Label = Union[int, Exclusion]


@dataclass(frozen=True)
class Token:
    surface: str
    lid: LanguageTag
    pos: Optional[PosTag] = None

    def __post_init__(self):
        if not self.surface:
            raise CorpusFormatError("Token surface must be a non-empty string.")
        if any(ch.isspace() for ch in self.surface):
            raise CorpusFormatError(f"Token surface '{self.surface}' contains whitespace.")


def parse_label(raw: Union[str, int, Exclusion], where: str = "") -> Label:
    """Parse one annotation label: an integer rating 1..5 or an exclusion token."""
    if isinstance(raw, Exclusion):
        return raw
    prefix = f"{where}: " if where else ""
    if isinstance(raw, bool):
        raise RatingRangeError(f"{prefix}rating label {raw!r} is not an integer in 1..5 or an exclusion token.")
    if isinstance(raw, int):
        value = raw
    else:
        text = str(raw).strip()
        for exclusion in Exclusion:
            if text.upper() == exclusion.value:
                return exclusion
        try:
            value = int(text)
        except ValueError:
            raise RatingRangeError(
                f"{prefix}rating label '{text}' is not an integer in 1..5 or one of "
                f"{', '.join(e.value for e in Exclusion)}."
            ) from None
    if not RATING_MIN <= value <= RATING_MAX:
        raise RatingRangeError(f"{prefix}rating {value} is outside {RATING_MIN}..{RATING_MAX}.")
    return value


def _label_text(label: Label) -> str:
    return label.value if isinstance(label, Exclusion) else str(label)


@dataclass(frozen=True)
class AnnotationTriple:
    sample_id: str
    labels: tuple[Label, Label, Label]

    def __post_init__(self):
        labels = tuple(self.labels)
        if len(labels) != 3:
            raise RatingRangeError(
                f"Sample '{self.sample_id}' has {len(labels)} labels; exactly 3 are required."
            )
        object.__setattr__(self, "labels", tuple(parse_label(label, self.sample_id) for label in labels))

    @property
    def has_exclusion(self) -> bool:
        return any(isinstance(label, Exclusion) for label in self.labels)

    @property
    def ratings(self) -> tuple[int, int, int]:
        """The three numeric ratings. Raises if any label is an exclusion."""
        if self.has_exclusion:
            raise ExclusionPresentError(
                f"Sample '{self.sample_id}' carries exclusion label(s) "
                f"{[_label_text(label) for label in self.labels]}; filter exclusions first."
            )
        return tuple(int(label) for label in self.labels)  # type: ignore[return-value]


@dataclass(frozen=True)
class RatingSummary:
    average: float
    disagreement: int


def summarize(triple: AnnotationTriple) -> RatingSummary:
    """Average rating and sum of absolute pairwise differences."""
    a, b, c = triple.ratings
    return RatingSummary(average=(a + b + c) / 3.0, disagreement=abs(a - b) + abs(a - c) + abs(b - c))


@dataclass(frozen=True)
class TaggedSentence:
    id: str
    tokens: tuple[Token, ...]
    source: Source
    script_form: ScriptForm
    perturbation: Optional[Perturbation] = None
    text: str = ""
    annotation: Optional[AnnotationTriple] = None

    def __post_init__(self):
        tokens = tuple(self.tokens)
        if not tokens:
            raise CorpusFormatError(f"Sentence '{self.id}' has no tokens.")
        object.__setattr__(self, "tokens", tokens)
        if not self.text:
            object.__setattr__(self, "text", " ".join(t.surface for t in tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def lids(self) -> list[LanguageTag]:
        return [t.lid for t in self.tokens]


def script_lid(surface: str) -> LanguageTag:
    """Script-block LID: Devanagari wins over Latin letters; anything else is Neutral."""
    lo, hi = _DEVANAGARI
    if any(lo <= ch <= hi for ch in surface):
        return LanguageTag.LANG_A
    if any(("a" <= ch <= "z") or ("A" <= ch <= "Z") for ch in surface):
        return LanguageTag.LANG_B
    return LanguageTag.NEUTRAL


class _PosIngest:
    """Maps raw tagger strings to PosTag and tallies aliases/unknowns for one load."""

    def __init__(self):
        self.aliased = 0
        self.unknown: Counter[str] = Counter()

    def __call__(self, raw: Optional[str]) -> Optional[PosTag]:
        if raw is None or raw == "":
            return None
        name = str(raw).strip().upper()
        if name in _POS_ALIASES:
            self.aliased += 1
            return _POS_ALIASES[name]
        try:
            return PosTag(name)
        except ValueError:
            self.unknown[name] += 1
            return PosTag.X

    def report(self, path: str) -> None:
        if self.aliased:
            logger.warning(f"{path}: {self.aliased} PPRON tag(s) read as PROPN")
        if self.unknown:
            names = ", ".join(sorted(self.unknown))
            logger.warning(f"{path}: {sum(self.unknown.values())} unknown PoS tag(s) mapped to X: {names}")


def _decoded_lines(f: BinaryIO, path: str) -> Iterator[str]:
    for lineno, raw in enumerate(f, start=1):
        try:
            yield raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise CorpusFormatError(f"not valid UTF-8 ({e.reason} at byte {e.start})", path, lineno) from None


@contextmanager
def open_text(path: Union[str, Path]) -> Iterator[Iterator[str]]:
    """Open an input file as UTF-8 lines (endings kept); an undecodable line raises CorpusFormatError."""
    with open(path, "rb") as f:
        yield _decoded_lines(f, str(path))


def _require(record: dict, key: str, path: str, lineno: int) -> Any:
    if key not in record:
        raise CorpusFormatError(f"missing required field '{key}'", path, lineno)
    return record[key]


def _enum_field(enum_cls, raw: Any, key: str, path: str, lineno: int):
    try:
        return enum_cls(raw)
    except ValueError:
        allowed = ", ".join(repr(e.value) for e in enum_cls)
        raise CorpusFormatError(f"field '{key}' has value {raw!r}; expected one of {allowed}", path, lineno) from None


def _parse_record(record: Any, pos_ingest: _PosIngest, path: str, lineno: int) -> TaggedSentence:
    if not isinstance(record, dict):
        raise CorpusFormatError("record is not a JSON object", path, lineno)
    sample_id = _require(record, "id", path, lineno)
    if not isinstance(sample_id, str) or not sample_id:
        raise CorpusFormatError("field 'id' must be a non-empty string", path, lineno)
    raw_tokens = _require(record, "tokens", path, lineno)
    if not isinstance(raw_tokens, list) or not raw_tokens:
        raise CorpusFormatError("field 'tokens' must be a non-empty array", path, lineno)
    tokens = []
    for i, raw in enumerate(raw_tokens):
        if not isinstance(raw, dict) or "surface" not in raw or "lid" not in raw:
            raise CorpusFormatError(f"token {i} must be an object with 'surface' and 'lid'", path, lineno)
        lid = _enum_field(LanguageTag, raw["lid"], f"tokens[{i}].lid", path, lineno)
        try:
            tokens.append(Token(str(raw["surface"]), lid, pos_ingest(raw.get("pos"))))
        except CorpusFormatError as e:
            raise CorpusFormatError(f"token {i}: {e}", path, lineno) from None
    source = _enum_field(Source, _require(record, "source", path, lineno), "source", path, lineno)
    script = _enum_field(ScriptForm, _require(record, "script", path, lineno), "script", path, lineno)
    perturbation = None
    if record.get("perturbation") is not None:
        perturbation = _enum_field(Perturbation, record["perturbation"], "perturbation", path, lineno)
    annotation = None
    if record.get("ratings") is not None:
        ratings = record["ratings"]
        if not isinstance(ratings, list) or len(ratings) != 3:
            raise CorpusFormatError("field 'ratings' must be an array of exactly 3 labels", path, lineno)
        where = f"{path}:{lineno}"
        annotation = AnnotationTriple(sample_id, tuple(parse_label(r, where) for r in ratings))
    text = record.get("text") or ""
    if not isinstance(text, str):
        raise CorpusFormatError("field 'text' must be a string", path, lineno)
    return TaggedSentence(sample_id, tuple(tokens), source, script, perturbation, text, annotation)


def load_corpus(path: Union[str, Path], fmt: str = "jsonl") -> list[TaggedSentence]:
    """Read a corpus file. Raises CorpusFormatError naming the offending line."""
    if fmt != "jsonl":
        raise CorpusFormatError(f"unsupported corpus format '{fmt}'; only 'jsonl' is supported", str(path))
    path_str = str(path)
    pos_ingest = _PosIngest()
    sentences: list[TaggedSentence] = []
    seen: set[str] = set()
    with open_text(path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"malformed JSON ({e.msg})", path_str, lineno) from None
            sentence = _parse_record(record, pos_ingest, path_str, lineno)
            if sentence.id in seen:
                raise DuplicateIdError(sentence.id, f"{path_str}:{lineno}")
            seen.add(sentence.id)
            sentences.append(sentence)
    if not sentences:
        raise CorpusFormatError("corpus file is empty", path_str)
    pos_ingest.report(path_str)
    logger.debug(f"Loaded {len(sentences)} sentence(s) from {path_str}")
    return sentences


def sentence_to_record(sentence: TaggedSentence) -> dict:
    tokens = []
    for t in sentence.tokens:
        tok: dict[str, Any] = {"surface": t.surface, "lid": t.lid.value}
        if t.pos is not None:
            tok["pos"] = t.pos.value
        tokens.append(tok)
    record: dict[str, Any] = {
        "id": sentence.id,
        "text": sentence.text,
        "tokens": tokens,
        "source": sentence.source.value,
        "script": sentence.script_form.value,
    }
    if sentence.perturbation is not None:
        record["perturbation"] = sentence.perturbation.value
    if sentence.annotation is not None:
        record["ratings"] = [
            label.value if isinstance(label, Exclusion) else label for label in sentence.annotation.labels
        ]
    return record


def save_corpus(sentences: list[TaggedSentence], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for sentence in sentences:
            f.write(json.dumps(sentence_to_record(sentence), ensure_ascii=False, sort_keys=False))
            f.write("\n")


def load_annotations(path: Union[str, Path]) -> list[AnnotationTriple]:
    path_str = str(path)
    triples: list[AnnotationTriple] = []
    seen: set[str] = set()
    with open_text(path) as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ANNOTATION_HEADER:
            raise CorpusFormatError(f"expected header {','.join(ANNOTATION_HEADER)}, got {header}", path_str, 1)
        for row in reader:
            lineno = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 4:
                raise CorpusFormatError(f"expected 4 columns, got {len(row)}", path_str, lineno)
            sample_id = row[0].strip()
            if sample_id in seen:
                raise DuplicateIdError(sample_id, f"{path_str}:{lineno}")
            seen.add(sample_id)
            where = f"{path_str}:{lineno}"
            triples.append(AnnotationTriple(sample_id, tuple(parse_label(cell, where) for cell in row[1:])))
    return triples


def filter_exclusions(triples: list[AnnotationTriple]) -> tuple[list[AnnotationTriple], list[str]]:
    """Drop every triple with at least one exclusion label."""
    kept = [t for t in triples if not t.has_exclusion]
    dropped = [t.sample_id for t in triples if t.has_exclusion]
    if dropped:
        logger.warning(f"Dropped {len(dropped)} sample(s) carrying exclusion labels")
    return kept, dropped


def load_scores(path: Union[str, Path]) -> dict[str, float]:
    """Read an external per-sentence score file (CSV header ``id,score``)."""
    path_str = str(path)
    scores: dict[str, float] = {}
    with open_text(path) as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != SCORE_HEADER:
            raise CorpusFormatError(f"expected header {','.join(SCORE_HEADER)}, got {header}", path_str, 1)
        for row in reader:
            if not row:
                continue
            lineno = reader.line_num
            if len(row) != 2:
                raise CorpusFormatError(f"expected 2 columns, got {len(row)}", path_str, lineno)
            sample_id = row[0].strip()
            if sample_id in scores:
                raise DuplicateIdError(sample_id, f"{path_str}:{lineno}")
            try:
                scores[sample_id] = float(row[1])
            except ValueError:
                raise CorpusFormatError(f"score {row[1]!r} is not a number", path_str, lineno) from None
    return scores
