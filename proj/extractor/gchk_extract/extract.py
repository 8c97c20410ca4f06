# Copyright 2026 The gchk Authors.
# SPDX-License-Identifier: Apache-2.0
"""Captures attention and hidden-state traces for object tokens and writes a bundle."""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .adapter import ForwardPass, ModelAdapter, TokenSpan
from .bundle import BundleSummary, LayerSlice, TokenPairing, TokenTrace, write_bundle
from .spec import ExtractionSpec, ObjectSpan, PopeQuestion, SpecError

log = logging.getLogger("gchk_extract")


class GridMismatchError(RuntimeError):
    """The requested grid disagrees with the model's vision tower."""


class SkipToken(Exception):
    """One object cannot be extracted; the run continues without it."""


@dataclass
class Skipped:
    token_id: str
    reason: str


@dataclass
class ExtractionResult:
    summary: BundleSummary
    skipped: list[Skipped] = field(default_factory=list)


def find_word(text: str, word: str) -> Optional[tuple[int, int]]:
    """First case-insensitive whole-word occurrence of word in text."""
    m = re.search(r"(?<!\w)" + re.escape(word) + r"(?!\w)", text, re.IGNORECASE)
    return (m.start(), m.end()) if m else None


def first_subword(tokens: Sequence[TokenSpan], start: int, end: int) -> Optional[int]:
    """Sequence position of the first token overlapping [start, end)."""
    for t in tokens:
        if t.end > t.start and t.end > start and t.start < end:
            return t.position
    return None


def patch_attention(fp: ForwardPass, layer: int, query: int, tolerance: float) -> np.ndarray:
    """Head-averaged attention of one query over the patch keys, renormalized over patches."""
    heads = np.asarray(fp.attentions[layer - 1], dtype=np.float64)
    row = heads[:, query, fp.patch_positions.start : fp.patch_positions.stop].mean(axis=0)
    total = row.sum()
    if not np.isfinite(total) or total <= 0:
        raise SkipToken(f"layer {layer}: no attention mass on image patches")
    grid = (row / total).astype(np.float32).reshape(fp.grid)
    error = abs(float(grid.sum(dtype=np.float64)) - 1.0)
    if error > tolerance:
        raise SkipToken(f"layer {layer}: renormalized attention sums to 1 +- {error:.2e}")
    return grid


def layer_slices(fp: ForwardPass, spec: ExtractionSpec, attention_query: int, embedding_query: int) -> list[LayerSlice]:
    patches = slice(fp.patch_positions.start, fp.patch_positions.stop)
    out = []
    for layer in spec.layers:
        hidden = np.asarray(fp.hidden_states[layer])
        out.append(
            LayerSlice(
                layer,
                patch_attention(fp, layer, attention_query, spec.sum_tolerance),
                hidden[patches],
                hidden[embedding_query],
            )
        )
    return out


def check_grid(spec: ExtractionSpec, adapter: ModelAdapter) -> None:
    if spec.grid is not None and tuple(spec.grid) != tuple(adapter.grid):
        raise GridMismatchError(f"requested grid {tuple(spec.grid)} but {adapter.name} reports {tuple(adapter.grid)}")


def _check_pass(fp: ForwardPass, adapter: ModelAdapter) -> None:
    h, w = fp.grid
    if (h, w) != tuple(adapter.grid) or len(fp.patch_positions) != h * w:
        raise GridMismatchError(
            f"forward pass has {len(fp.patch_positions)} patch positions for grid {fp.grid}; "
            f"{adapter.name} reports {tuple(adapter.grid)}"
        )


def _unique_ids(ids: Sequence[str]) -> None:
    repeated = sorted(i for i, n in Counter(ids).items() if n > 1)
    if repeated:
        raise SpecError(f"repeated token ids: {', '.join(repeated)}")


def _skip(skipped: list[Skipped], token_id: str, reason: str) -> None:
    log.warning("skipping %s: %s", token_id, reason)
    skipped.append(Skipped(token_id, reason))


def generate_captions(spec: ExtractionSpec, images: Mapping[str, Any], adapter: ModelAdapter) -> dict[str, str]:
    """Decodes one caption per image with the spec's prompt."""
    spec.check(adapter.depth)
    return {key: adapter.generate(images[key], spec.prompt, spec.decoding) for key in sorted(images)}


def extract(
    spec: ExtractionSpec,
    spans: Sequence[ObjectSpan],
    captions: Mapping[str, str],
    images: Mapping[str, Any],
    adapter: ModelAdapter,
    out_bundle: str,
) -> ExtractionResult:
    """Re-forwards each caption prefix through its object word and records the first subword.

    Objects that cannot be placed are skipped with a reason; the others are written.
    """
    spec.check(adapter.depth)
    check_grid(spec, adapter)
    _unique_ids([s.token_id for s in spans])
    traces: list[TokenTrace] = []
    skipped: list[Skipped] = []
    for obj in spans:
        try:
            if obj.image not in captions:
                raise SkipToken(f"no caption for image '{obj.image}'")
            if obj.image not in images:
                raise SkipToken(f"image '{obj.image}' not found")
            caption = captions[obj.image]
            if obj.span is None:
                where = find_word(caption, obj.object_text)
                if where is None:
                    raise SkipToken(f"object word '{obj.object_text}' absent from the generated text")
            else:
                where = obj.span
                if where[1] > len(caption) or caption[where[0] : where[1]].lower() != obj.object_text.lower():
                    raise SkipToken(f"span {list(where)} does not hold '{obj.object_text}'")
            fp = adapter.forward(images[obj.image], spec.prompt, caption[: where[1]])
            _check_pass(fp, adapter)
            query = first_subword(fp.continuation_tokens, *where)
            if query is None:
                raise SkipToken(f"object word '{obj.object_text}' maps to no token")
            traces.append(TokenTrace(obj.token_id, obj.object_text, obj.label, layer_slices(fp, spec, query, query)))
        except SkipToken as e:
            _skip(skipped, obj.token_id, str(e))
    return ExtractionResult(write_bundle(traces, out_bundle, spec.model), skipped)


ANSWER = re.compile(r"\s*(yes|no)(?!\w)", re.IGNORECASE)


def pope_extract(
    spec: ExtractionSpec,
    questions: Sequence[PopeQuestion],
    images: Mapping[str, Any],
    adapter: ModelAdapter,
    out_bundle: str,
) -> ExtractionResult:
    """Yes/no probing: attention at the answer token, embeddings at the object named in the question."""
    spec.check(adapter.depth)
    check_grid(spec, adapter)
    _unique_ids([q.question_id for q in questions])
    traces: list[TokenTrace] = []
    skipped: list[Skipped] = []
    for q in questions:
        try:
            if q.image not in images:
                raise SkipToken(f"image '{q.image}' not found")
            answer = adapter.generate(images[q.image], q.question, spec.decoding)
            m = ANSWER.match(answer)
            if m is None:
                raise SkipToken(f"answer is not yes or no: {answer[:40]!r}")
            where = find_word(q.question, q.object_text)
            if where is None:
                raise SkipToken(f"object word '{q.object_text}' absent from the question")
            fp = adapter.forward(images[q.image], q.question, answer[: m.end(1)])
            _check_pass(fp, adapter)
            answer_query = first_subword(fp.continuation_tokens, m.start(1), m.end(1))
            object_query = first_subword(fp.prompt_tokens, *where)
            if answer_query is None or object_query is None:
                raise SkipToken("answer or object word maps to no token")
            pairing = TokenPairing(f"{q.question_id}/{m.group(1)}", f"{q.question_id}/{q.object_text}")
            traces.append(
                TokenTrace(q.question_id, q.object_text, q.label, layer_slices(fp, spec, answer_query, object_query), pairing)
            )
        except SkipToken as e:
            _skip(skipped, q.question_id, str(e))
    return ExtractionResult(write_bundle(traces, out_bundle, spec.model), skipped)
