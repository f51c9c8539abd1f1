# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Corpus curation: negative-sample perturbations, mixed n-grams, pruning and splitting.

Every random choice is drawn from a per-sample generator seeded with
``hash(seed, sample_id)``, so results do not depend on processing order or on
how many worker threads run.
"""

from __future__ import annotations

import bisect
import dataclasses
import hashlib
import logging
import math
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .corpus_model import LanguageTag, Perturbation, RatingSummary, TaggedSentence, Token, script_lid
from .errors import CmlabError, DuplicateIdError, PerturbationError, TranslatorError
from .translators import TranslatorPort

logger = logging.getLogger(__name__)

SEED_MAX = 2**64 - 1
DEFAULT_RATIOS = (0.7, 0.1, 0.2)
DEFAULT_BIN_EDGES = (1.0, 2.0, 3.0, 4.0, 5.0)
DEFAULT_DISAGREEMENT_THRESHOLD = 4
DEFAULT_DELETE_FRACTION = 0.1


def check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= SEED_MAX:
        raise CmlabError(f"Seed {seed!r} must be an unsigned 64-bit integer (0..{SEED_MAX}).")
    return seed


def sample_hash(seed: int, sample_id: str) -> int:
    digest = hashlib.blake2b(f"{seed}:{sample_id}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def sample_rng(seed: int, sample_id: str) -> np.random.Generator:
    return np.random.default_rng(sample_hash(seed, sample_id))


@dataclass(frozen=True)
class PerturbSpec:
    """What perturbation to apply. ``count`` None means a fraction-derived delete count."""

    kind: Perturbation
    seed: int = 0
    pairs: int = 1
    count: Optional[int] = None
    fraction: float = DEFAULT_DELETE_FRACTION

    def __post_init__(self):
        check_seed(self.seed)
        if self.pairs < 1:
            raise CmlabError(f"Swap pairs must be >= 1, got {self.pairs}.")
        if self.count is not None and self.count < 1:
            raise CmlabError(f"Delete count must be >= 1, got {self.count}.")
        if not 0.0 < self.fraction < 1.0:
            raise CmlabError(f"Delete fraction must lie in (0, 1), got {self.fraction}.")


def _rebuild(sentence: TaggedSentence, tokens: list[Token], kind: Perturbation) -> TaggedSentence:
    # Ratings describe the original text, not the perturbed one.
    return dataclasses.replace(
        sentence,
        tokens=tuple(tokens),
        perturbation=kind,
        text=" ".join(t.surface for t in tokens),
        annotation=None,
    )


def perturb_swap(sentence: TaggedSentence, pairs: int = 1, seed: int = 0) -> TaggedSentence:
    """Swap ``pairs`` random token pairs. Each pair is two distinct positions."""
    n = len(sentence.tokens)
    if n < 2:
        raise PerturbationError(f"Sentence '{sentence.id}' has {n} token(s); swapping needs at least 2.")
    if pairs < 1:
        raise PerturbationError(f"Swap pairs must be >= 1, got {pairs}.")
    rng = sample_rng(seed, sentence.id)
    tokens = list(sentence.tokens)
    for _ in range(pairs):
        i, j = (int(k) for k in rng.choice(n, size=2, replace=False))
        tokens[i], tokens[j] = tokens[j], tokens[i]
    return _rebuild(sentence, tokens, Perturbation.SWAP)


def perturb_delete(sentence: TaggedSentence, count: int, seed: int = 0) -> TaggedSentence:
    """Remove ``count`` random tokens, keeping the survivors in order."""
    n = len(sentence.tokens)
    if not 1 <= count < n:
        raise PerturbationError(
            f"Sentence '{sentence.id}' has {n} token(s); delete count must lie in [1, {n - 1}], got {count}."
        )
    rng = sample_rng(seed, sentence.id)
    dropped = {int(k) for k in rng.choice(n, size=count, replace=False)}
    return _rebuild(sentence, [t for i, t in enumerate(sentence.tokens) if i not in dropped], Perturbation.DELETE)


def delete_count_from_fraction(length: int, fraction: float = DEFAULT_DELETE_FRACTION) -> int:
    """Round-half-up of ``fraction * length``, clamped to [1, length - 1]."""
    if length < 2:
        raise PerturbationError(f"A sentence of {length} token(s) cannot lose tokens and stay non-empty.")
    count = math.floor(fraction * length + 0.5)
    return min(max(count, 1), length - 1)


def longest_mono_span(sentence: TaggedSentence) -> tuple[int, int, LanguageTag]:
    """Longest contiguous same-language run (inclusive indices); Neutral tokens break runs."""
    best: Optional[tuple[int, int, LanguageTag]] = None
    start = 0
    tokens = sentence.tokens
    for i in range(1, len(tokens) + 1):
        if i < len(tokens) and tokens[i].lid is tokens[start].lid:
            continue
        lid = tokens[start].lid
        if lid.is_language and (best is None or i - start > best[1] - best[0] + 1):
            best = (start, i - 1, lid)
        start = i
    if best is None:
        raise PerturbationError(f"Sentence '{sentence.id}' has no LangA/LangB token to back-translate.")
    return best


def _other(lid: LanguageTag) -> LanguageTag:
    return LanguageTag.LANG_B if lid is LanguageTag.LANG_A else LanguageTag.LANG_A


def perturb_backtranslate(sentence: TaggedSentence, translator: TranslatorPort) -> TaggedSentence:
    """Round-trip translate the longest single-language span and splice it back.

    New tokens get LIDs from :func:`script_lid` and no PoS tag. In romanised
    text every Latin word therefore comes back as LangB.
    """
    start, end, lid = longest_mono_span(sentence)
    span = " ".join(t.surface for t in sentence.tokens[start : end + 1])
    try:
        forward = translator.translate(span, lid, _other(lid))
        back = translator.translate(forward, _other(lid), lid)
    except TranslatorError as e:
        raise TranslatorError(span, e.reason) from e
    except Exception as e:  # noqa: BLE001
        raise TranslatorError(span, str(e) or type(e).__name__) from e
    words = back.split()
    if not words:
        raise TranslatorError(span, "round trip returned empty text")
    new_tokens = [Token(word, script_lid(word)) for word in words]
    tokens = list(sentence.tokens[:start]) + new_tokens + list(sentence.tokens[end + 1 :])
    return _rebuild(sentence, tokens, Perturbation.BACK_TRANSLATE)


def perturb_sentence(
    sentence: TaggedSentence, spec: PerturbSpec, translator: Optional[TranslatorPort] = None
) -> TaggedSentence:
    if spec.kind is Perturbation.SWAP:
        return perturb_swap(sentence, spec.pairs, spec.seed)
    if spec.kind is Perturbation.DELETE:
        count = spec.count if spec.count is not None else delete_count_from_fraction(len(sentence), spec.fraction)
        return perturb_delete(sentence, count, spec.seed)
    if translator is None:
        raise CmlabError("Back-translation needs a translator.")
    return perturb_backtranslate(sentence, translator)


def perturb_corpus(
    corpus: list[TaggedSentence],
    spec: PerturbSpec,
    translator: Optional[TranslatorPort] = None,
    jobs: int = 1,
) -> list[TaggedSentence]:
    """Perturb every sentence the perturbation applies to; inapplicable ones are skipped and logged.

    Translator failures are not skipped: they abort the run.
    """

    def _one(sentence: TaggedSentence) -> Optional[TaggedSentence]:
        try:
            return perturb_sentence(sentence, spec, translator)
        except PerturbationError as e:
            logger.info(f"Skipped: {e}")
            return None

    if jobs > 1 and len(corpus) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one, corpus))
    else:
        results = [_one(s) for s in corpus]
    out = [s for s in results if s is not None]
    logger.info(f"Perturbed {len(out)}/{len(corpus)} sentence(s) with {spec.kind.value}")
    return out


def extract_mixed_ngrams(corpus: list[TaggedSentence], n: int) -> list[tuple[tuple[str, ...], int]]:
    """Count n-grams holding at least one LangA and one LangB token.

    Sorted by descending frequency, then lexicographically.
    """
    if n not in (2, 3, 4):
        raise CmlabError(f"n-gram order must be 2, 3 or 4, got {n}.")
    counts: Counter[tuple[str, ...]] = Counter()
    for sentence in corpus:
        tokens = sentence.tokens
        for i in range(len(tokens) - n + 1):
            window = tokens[i : i + n]
            lids = {t.lid for t in window}
            if LanguageTag.LANG_A in lids and LanguageTag.LANG_B in lids:
                counts[tuple(t.surface for t in window)] += 1
    return sorted(counts.items(), key=lambda item: (-item[1], item[0]))


def prune_by_disagreement(
    records: Sequence[tuple[str, RatingSummary]], threshold: int = DEFAULT_DISAGREEMENT_THRESHOLD
) -> list[str]:
    return [sample_id for sample_id, summary in records if summary.disagreement <= threshold]


class Split(Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


@dataclass(frozen=True)
class SplitAssignment:
    assignment: dict[str, Split]

    def ids(self, split: Split) -> list[str]:
        return [sample_id for sample_id, s in self.assignment.items() if s is split]

    def sizes(self) -> dict[Split, int]:
        counts = Counter(self.assignment.values())
        return {split: counts.get(split, 0) for split in Split}

    def __getitem__(self, sample_id: str) -> Split:
        return self.assignment[sample_id]

    def __len__(self) -> int:
        return len(self.assignment)


def rating_bin(average: float, edges: Sequence[float] = DEFAULT_BIN_EDGES) -> int:
    """Index of the half-open bin holding ``average``; the last bin is closed."""
    index = bisect.bisect_right(list(edges), average) - 1
    return min(max(index, 0), len(edges) - 2)


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def stratified_split(
    records: Sequence[tuple[str, RatingSummary]],
    ratios: Sequence[float] = DEFAULT_RATIOS,
    bins: Sequence[float] = DEFAULT_BIN_EDGES,
    seed: int = 0,
    tolerance: float = 0.05,
) -> SplitAssignment:
    """Assign ids to train/dev/test so every rating bin follows ``ratios``.

    Records are ordered by rating bin, then by per-id hash. Walking that order,
    a record goes to train whenever the running train quota (round-half-up of
    ratio times position) grows; the rest are shared between dev and test the
    same way. Quotas telescope, so both the global sizes and every bin stay
    within one sample of their targets.
    """
    check_seed(seed)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise CmlabError(f"Split ratios must be three non-negative numbers summing to 1, got {tuple(ratios)}.")
    if len(bins) < 2 or any(b >= c for b, c in zip(bins, bins[1:])):
        raise CmlabError(f"Rating bin edges must be strictly increasing with at least 2 entries, got {tuple(bins)}.")
    seen: set[str] = set()
    by_bin: dict[int, list[str]] = defaultdict(list)
    for sample_id, summary in records:
        if sample_id in seen:
            raise DuplicateIdError(sample_id, "split records")
        seen.add(sample_id)
        by_bin[rating_bin(summary.average, bins)].append(sample_id)

    train_ratio = ratios[0]
    rest = ratios[1] + ratios[2]
    dev_share = ratios[1] / rest if rest > 0 else 0.0
    assignment: dict[str, Split] = {}
    position = 0
    held_out = 0
    for index in sorted(by_bin):
        members = sorted(by_bin[index], key=lambda sid: (sample_hash(seed, sid), sid))
        if len(members) < 3:
            logger.warning(
                f"Rating bin {bins[index]}-{bins[index + 1]} has {len(members)} sample(s); "
                "it cannot be represented in all three splits"
            )
        for sample_id in members:
            if _round_half_up((position + 1) * train_ratio) > _round_half_up(position * train_ratio):
                assignment[sample_id] = Split.TRAIN
            elif _round_half_up((held_out + 1) * dev_share) > _round_half_up(held_out * dev_share):
                assignment[sample_id] = Split.DEV
                held_out += 1
            else:
                assignment[sample_id] = Split.TEST
                held_out += 1
            position += 1

    result = SplitAssignment(assignment)
    _check_bin_balance(result, by_bin, ratios[0], tolerance)
    return result


def _check_bin_balance(result: SplitAssignment, by_bin: dict[int, list[str]], train_ratio: float, tolerance: float):
    for index, members in sorted(by_bin.items()):
        if len(members) < 3:
            continue
        share = sum(1 for sid in members if result[sid] is Split.TRAIN) / len(members)
        if abs(share - train_ratio) > tolerance:
            logger.warning(
                f"Rating bin {index} train share {share:.3f} deviates from {train_ratio:.3f} by more than {tolerance}"
            )
