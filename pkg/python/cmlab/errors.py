# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Exception hierarchy for cmlab.

Every validation failure raised by the library derives from :class:`CmlabError`
(itself a ``ValueError``), so the CLI can map all of them to exit code 1 while
``OSError`` keeps its own exit code.
"""

from __future__ import annotations

from typing import Optional


class CmlabError(ValueError):
    """Base class for all cmlab validation errors."""


class CorpusFormatError(CmlabError):
    """A corpus, annotation, score, metric or model file does not follow its schema."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


class DuplicateIdError(CmlabError):
    def __init__(self, sample_id: str, where: str = ""):
        self.sample_id = sample_id
        suffix = f" ({where})" if where else ""
        super().__init__(f"Duplicate sample id '{sample_id}'{suffix}; ids must be unique within a file.")


class RatingRangeError(CmlabError):
    """A rating label is neither an integer in 1..5 nor a known exclusion token."""


class ExclusionPresentError(CmlabError):
    """An operation that needs three numeric ratings received an exclusion label."""


class MissingPosError(CmlabError):
    """A language-bearing token has no PoS tag but the metric needs one."""


class PerturbationError(CmlabError):
    """A perturbation cannot be applied to the given sentence."""


class TranslatorError(CmlabError):
    def __init__(self, span: str, reason: str):
        self.span = span
        self.reason = reason
        super().__init__(f"Translation of span '{span}' failed: {reason}")


class SegmenterError(CmlabError):
    def __init__(self, surface: str, reason: str):
        self.surface = surface
        super().__init__(f"Segmenter failed on surface '{surface}': {reason}")


class DegenerateDataError(CmlabError):
    """Input has no variance (or too few samples) for the requested statistic."""


class RankDeficiencyError(CmlabError):
    def __init__(self, columns: list[str]):
        self.columns = list(columns)
        super().__init__(
            f"Design matrix is rank deficient; collinear columns: {', '.join(self.columns)}. "
            "Drop or combine these features before fitting."
        )


class NumericalError(CmlabError):
    """A numeric kernel produced a non-finite result."""


class TrainingError(CmlabError):
    def __init__(self, epoch: int, reason: str):
        self.epoch = epoch
        super().__init__(f"Training diverged at epoch {epoch}: {reason}")


class SchemaMismatchError(CmlabError):
    """Feature columns do not match what a model was trained on."""


class AlignmentError(CmlabError):
    """Two aligned series disagree in length or id set."""
