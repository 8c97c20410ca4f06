# Copyright 2026 The gchk Authors.
# SPDX-License-Identifier: Apache-2.0
"""Adapter for LLaVA-style models from the transformers library.

The image occupies one contiguous block of placeholder tokens, one per vision patch.
Each text segment is tokenized on its own so character offsets stay local to it.
"""

from __future__ import annotations

from typing import Any, Callable

import numpy as np

from .adapter import ForwardPass, TokenSpan
from .spec import Decoding

LLAVA_TEMPLATE = "USER: <image>\n{prompt} ASSISTANT:"


class HuggingFaceAdapter:
    def __init__(
        self,
        model: Any,
        tokenizer: Callable,
        image_processor: Callable[[Any], Any],
        *,
        name: str,
        template: str = LLAVA_TEMPLATE,
        image_token_id: int | None = None,
    ) -> None:
        import torch

        self._torch = torch
        if template.count("<image>") != 1 or template.count("{prompt}") != 1:
            raise ValueError("template needs exactly one <image> and one {prompt}")
        head, rest = template.split("<image>")
        if "{prompt}" not in rest:
            raise ValueError("{prompt} must follow <image> in the template")
        middle, tail = rest.split("{prompt}")
        self._segments = (head, middle, tail)
        self.model = model.eval()
        if hasattr(self.model, "set_attn_implementation"):
            self.model.set_attn_implementation("eager")  # attention weights need the eager path
        self.tokenizer = tokenizer
        self.image_processor = image_processor
        self.name = name
        config = model.config
        self._image_token = image_token_id if image_token_id is not None else config.image_token_index
        vision = config.vision_config
        side = vision.image_size // vision.patch_size
        self._grid = (side, side)
        self._depth = config.text_config.num_hidden_layers

    @classmethod
    def from_pretrained(cls, model_id: str, device: str = "cpu", **kwargs: Any) -> "HuggingFaceAdapter":
        from transformers import AutoProcessor, LlavaForConditionalGeneration

        processor = AutoProcessor.from_pretrained(model_id)
        model = LlavaForConditionalGeneration.from_pretrained(model_id, attn_implementation="eager").to(device)
        return cls(
            model,
            processor.tokenizer,
            lambda image: processor.image_processor(images=image, return_tensors="pt")["pixel_values"],
            name=model_id,
            **kwargs,
        )

    @property
    def depth(self) -> int:
        return self._depth

    @property
    def grid(self) -> tuple[int, int]:
        return self._grid

    def _encode(self, text: str) -> tuple[list[int], list[tuple[int, int]]]:
        if not text:
            return [], []
        enc = self.tokenizer(text, add_special_tokens=False, return_offsets_mapping=True)
        return list(enc["input_ids"]), [tuple(o) for o in enc["offset_mapping"]]

    def _sequence(self, prompt: str, continuation: str):
        head, middle, tail = self._segments
        ids: list[int] = []
        bos = getattr(self.tokenizer, "bos_token_id", None)
        if bos is not None:
            ids.append(bos)
        ids += self._encode(head)[0]
        patches = self._grid[0] * self._grid[1]
        patch_positions = range(len(ids), len(ids) + patches)
        ids += [self._image_token] * patches
        ids += self._encode(middle)[0]
        prompt_ids, prompt_offsets = self._encode(prompt)
        prompt_tokens = [TokenSpan(len(ids) + i, s, e) for i, (s, e) in enumerate(prompt_offsets)]
        ids += prompt_ids
        ids += self._encode(tail)[0]
        cont_ids, cont_offsets = self._encode(continuation)
        continuation_tokens = [TokenSpan(len(ids) + i, s, e) for i, (s, e) in enumerate(cont_offsets)]
        ids += cont_ids
        return ids, patch_positions, prompt_tokens, continuation_tokens

    def _pixels(self, image: Any):
        pixels = self.image_processor(image)
        if isinstance(pixels, dict) or hasattr(pixels, "keys"):
            pixels = pixels["pixel_values"]
        return pixels.to(next(self.model.parameters()).device)

    def generate(self, image: Any, prompt: str, decoding: Decoding) -> str:
        torch = self._torch
        ids, *_ = self._sequence(prompt, "")
        device = next(self.model.parameters()).device
        input_ids = torch.tensor([ids], device=device)
        options = {"do_sample": decoding.do_sample, "max_new_tokens": decoding.max_new_tokens}
        if decoding.do_sample:
            options["temperature"] = decoding.temperature
            if decoding.top_p is not None:
                options["top_p"] = decoding.top_p
            if decoding.top_k is not None:
                options["top_k"] = decoding.top_k
        with torch.no_grad():
            out = self.model.generate(input_ids=input_ids, pixel_values=self._pixels(image), **options)
        return self.tokenizer.decode(out[0, len(ids) :].tolist(), skip_special_tokens=True)

    def forward(self, image: Any, prompt: str, continuation: str) -> ForwardPass:
        torch = self._torch
        ids, patch_positions, prompt_tokens, continuation_tokens = self._sequence(prompt, continuation)
        device = next(self.model.parameters()).device
        with torch.no_grad():
            out = self.model(
                input_ids=torch.tensor([ids], device=device),
                pixel_values=self._pixels(image),
                output_attentions=True,
                output_hidden_states=True,
            )
        attentions = [a[0].float().cpu().numpy() for a in out.attentions]
        hidden = [h[0].float().cpu().numpy() for h in out.hidden_states]
        return ForwardPass(attentions, hidden, patch_positions, self._grid, prompt_tokens, continuation_tokens)
