# Copyright 2026 The gchk Authors.
# SPDX-License-Identifier: Apache-2.0
"""Extraction settings and the JSONL inputs the extractor consumes."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

DEFAULT_PROMPT = "Describe this image."


class SpecError(ValueError):
    """An extraction setting or input record is invalid."""


@dataclass(frozen=True)
class Decoding:
    """Sampling is off by default; temperature and top-p/top-k apply only when sampling."""

    do_sample: bool = False
    temperature: float = 0.1
    top_p: Optional[float] = None
    top_k: Optional[int] = None
    max_new_tokens: int = 256

    def check(self) -> None:
        if self.temperature <= 0:
            raise SpecError("decoding.temperature must be > 0")
        if self.top_p is not None and not 0 < self.top_p <= 1:
            raise SpecError("decoding.top_p must lie in (0, 1]")
        if self.top_k is not None and self.top_k < 1:
            raise SpecError("decoding.top_k must be >= 1")
        if self.max_new_tokens < 1:
            raise SpecError("decoding.max_new_tokens must be >= 1")


@dataclass(frozen=True)
class ExtractionSpec:
    """What to extract. Layers are 1-based decoder layer numbers in increasing order."""

    model: str
    layers: tuple[int, ...]
    prompt: str = DEFAULT_PROMPT
    decoding: Decoding = field(default_factory=Decoding)
    grid: Optional[tuple[int, int]] = None  # expected patch grid; checked against the model
    sum_tolerance: float = 1e-5

    def check(self, model_depth: int) -> None:
        if not self.layers:
            raise SpecError("layer list is empty")
        if any(b <= a for a, b in zip(self.layers, self.layers[1:])):
            raise SpecError("layer list must be strictly increasing")
        bad = [l for l in self.layers if not 1 <= l <= model_depth]
        if bad:
            raise SpecError(f"layers {bad} lie outside the model depth 1..{model_depth}")
        self.decoding.check()


@dataclass(frozen=True)
class ObjectSpan:
    """One labeled object word in a generated caption. span is [start, end) in characters."""

    token_id: str
    image: str
    object_text: str
    label: str = "unknown"
    span: Optional[tuple[int, int]] = None


@dataclass(frozen=True)
class PopeQuestion:
    question_id: str
    image: str
    question: str
    object_text: str
    label: str = "unknown"


def _records(path: str):
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise SpecError(f"{path}:{number}: invalid JSON: {e}") from e
            if not isinstance(record, dict):
                raise SpecError(f"{path}:{number}: expected a JSON object")
            yield number, record


def _label(record: dict, where: str) -> str:
    label = record.get("label", "unknown")
    if label not in ("grounded", "hallucinated", "unknown"):
        raise SpecError(f"{where}: unknown label '{label}'")
    return label


def _require(record: dict, key: str, where: str) -> str:
    value = record.get(key)
    if not isinstance(value, str) or not value:
        raise SpecError(f"{where}: field '{key}' must be a non-empty string")
    return value


def load_spans(path: str) -> list[ObjectSpan]:
    """Reads {"token_id", "image", "object", "label"?, "span"?: [start, end]} records."""
    out = []
    for number, r in _records(path):
        where = f"{path}:{number}"
        span = r.get("span")
        if span is not None:
            if not (isinstance(span, list) and len(span) == 2 and all(isinstance(v, int) for v in span)):
                raise SpecError(f"{where}: 'span' must be [start, end]")
            if not 0 <= span[0] < span[1]:
                raise SpecError(f"{where}: 'span' must satisfy 0 <= start < end")
            span = (span[0], span[1])
        out.append(
            ObjectSpan(
                _require(r, "token_id", where),
                _require(r, "image", where),
                _require(r, "object", where),
                _label(r, where),
                span,
            )
        )
    return out


def load_captions(path: str) -> dict[str, str]:
    """Reads {"image", "caption"} records; a repeated image keeps the last caption."""
    out = {}
    for number, r in _records(path):
        where = f"{path}:{number}"
        caption = r.get("caption")
        if not isinstance(caption, str):
            raise SpecError(f"{where}: field 'caption' must be a string")
        out[_require(r, "image", where)] = caption
    return out


def load_pope(path: str) -> list[PopeQuestion]:
    """Reads {"question_id", "image", "question", "object", "label"?} records."""
    out = []
    for number, r in _records(path):
        where = f"{path}:{number}"
        q = PopeQuestion(
            _require(r, "question_id", where),
            _require(r, "image", where),
            _require(r, "question", where),
            _require(r, "object", where),
            _label(r, where),
        )
        out.append(q)
    return out
