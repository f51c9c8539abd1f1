# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""cmlab: code-mixing corpus analysis toolkit.

Metrics, curation, annotation agreement, statistical analyses and a
metric-feature acceptability predictor. See ``cmlab --help`` for the CLI.
"""

__version__ = "0.1.0"

from .corpus_model import (  # noqa: E402
    AnnotationTriple,
    Exclusion,
    LanguageTag,
    Perturbation,
    PosTag,
    RatingSummary,
    ScriptForm,
    Source,
    TaggedSentence,
    Token,
    load_annotations,
    load_corpus,
    save_corpus,
    script_lid,
    summarize,
)
from .errors import CmlabError  # noqa: E402

__all__ = [
    "AnnotationTriple",
    "CmlabError",
    "Exclusion",
    "LanguageTag",
    "Perturbation",
    "PosTag",
    "RatingSummary",
    "ScriptForm",
    "Source",
    "TaggedSentence",
    "Token",
    "__version__",
    "load_annotations",
    "load_corpus",
    "save_corpus",
    "script_lid",
    "summarize",
]
