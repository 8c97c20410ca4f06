# Copyright 2026 The gchk Authors.
# SPDX-License-Identifier: Apache-2.0
"""Trace extraction from vision-language models into gchk bundles."""

from .adapter import ForwardPass, ModelAdapter, TokenSpan
from .bundle import (
    BundleSummary,
    ConsistencyError,
    FormatError,
    InvariantError,
    LayerSlice,
    TokenPairing,
    TokenTrace,
    read_bundle,
    record_bytes,
    write_bundle,
    write_labels,
)
from .extract import (
    ExtractionResult,
    GridMismatchError,
    Skipped,
    extract,
    find_word,
    first_subword,
    generate_captions,
    pope_extract,
)
from .spec import Decoding, ExtractionSpec, ObjectSpan, PopeQuestion, SpecError, load_captions, load_pope, load_spans
