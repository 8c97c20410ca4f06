# Copyright 2026 The gchk Authors.
# SPDX-License-Identifier: Apache-2.0
"""The interface a vision-language model exposes to the extractor."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Protocol, Sequence

import numpy as np

from .spec import Decoding


@dataclass
class TokenSpan:
    """A sequence position and the [start, end) characters of its source text."""

    position: int
    start: int
    end: int


@dataclass
class ForwardPass:
    """One forward pass over image + prompt + continuation.

    attentions[l - 1] is decoder layer l with shape (heads, seq, seq).
    hidden_states[l] is the output of decoder layer l with shape (seq, d);
    hidden_states[0] is the input embedding.
    Offsets in prompt_tokens index the prompt text and offsets in continuation_tokens
    index the continuation text.
    """

    attentions: Sequence[np.ndarray]
    hidden_states: Sequence[np.ndarray]
    patch_positions: range
    grid: tuple[int, int]
    prompt_tokens: list[TokenSpan]
    continuation_tokens: list[TokenSpan]


class ModelAdapter(Protocol):
    name: str

    @property
    def depth(self) -> int:
        """Number of decoder layers."""

    @property
    def grid(self) -> tuple[int, int]:
        """Patch grid of the vision tower."""

    def generate(self, image: Any, prompt: str, decoding: Decoding) -> str:
        """Decodes an answer for the image and prompt."""

    def forward(self, image: Any, prompt: str, continuation: str) -> ForwardPass:
        """Runs one pass with the continuation placed in the answer slot."""
