# Copyright 2026 The gchk Authors.
# SPDX-License-Identifier: Apache-2.0

import os
import re
import shutil
import subprocess

import numpy as np
import pytest

from gchk_extract import ForwardPass, TokenSpan

PIECE = re.compile(r"\w{1,3}|[^\w\s]")


def tokenize(text):
    """Words split into pieces of at most three characters; punctuation stands alone."""
    return [(m.start(), m.end()) for m in PIECE.finditer(text)]


class FakeAdapter:
    """Deterministic stand-in for a model.

    Sequence layout: [bos] + patches + prompt pieces + continuation pieces.
    hidden_states[l][pos] starts with (l, pos) so tests can tell which row was recorded.
    """

    name = "fake-vlm"

    def __init__(self, grid=(4, 5), depth=4, dim=8, heads=3, answers=None):
        self._grid = grid
        self._depth = depth
        self.dim = dim
        self.heads = heads
        self.answers = answers or {}
        self.calls = []

    @property
    def depth(self):
        return self._depth

    @property
    def grid(self):
        return self._grid

    def generate(self, image, prompt, decoding):
        return self.answers[image]

    def forward(self, image, prompt, continuation):
        self.calls.append((image, prompt, continuation))
        patches = self._grid[0] * self._grid[1]
        patch_positions = range(1, 1 + patches)
        prompt_tokens = [TokenSpan(1 + patches + i, s, e) for i, (s, e) in enumerate(tokenize(prompt))]
        start = 1 + patches + len(prompt_tokens)
        continuation_tokens = [TokenSpan(start + i, s, e) for i, (s, e) in enumerate(tokenize(continuation))]
        seq = start + len(continuation_tokens)
        rng = np.random.default_rng(seq)
        attentions, hidden = [], []
        causal = np.tril(np.ones((seq, seq)))
        for _ in range(self._depth):
            logits = rng.normal(size=(self.heads, seq, seq))
            weights = np.exp(logits) * causal
            attentions.append((weights / weights.sum(axis=-1, keepdims=True)).astype(np.float32))
        for l in range(self._depth + 1):
            h = rng.normal(size=(seq, self.dim)).astype(np.float32)
            h[:, 0] = l
            h[:, 1] = np.arange(seq)
            hidden.append(h)
        return ForwardPass(attentions, hidden, patch_positions, self._grid, prompt_tokens, continuation_tokens)


@pytest.fixture
def gchk_tool():
    path = os.environ.get("GCHK_TOOL") or shutil.which("gchk")
    if not path:
        pytest.skip("gchk binary not available (set GCHK_TOOL)")
    return path


def run_tool(tool, *args):
    return subprocess.run([tool, *args], capture_output=True, text=True, timeout=300)
