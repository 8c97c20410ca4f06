# Copyright 2026 The gchk Authors.
# SPDX-License-Identifier: Apache-2.0
"""Command line: captions, extract and pope."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections.abc import Mapping

from .extract import extract, generate_captions, pope_extract
from .spec import Decoding, ExtractionSpec, SpecError, load_captions, load_pope, load_spans


class ImageFolder(Mapping):
    """Maps an image id to the file <id>.<ext> in a directory, loaded on access."""

    EXTENSIONS = (".jpg", ".jpeg", ".png", ".webp")

    def __init__(self, root: str) -> None:
        self._paths = {}
        for name in sorted(os.listdir(root)):
            stem, ext = os.path.splitext(name)
            if ext.lower() in self.EXTENSIONS:
                self._paths.setdefault(stem, os.path.join(root, name))

    def __getitem__(self, key: str):
        from PIL import Image

        with Image.open(self._paths[key]) as image:
            return image.convert("RGB")

    def __iter__(self):
        return iter(self._paths)

    def __len__(self) -> int:
        return len(self._paths)


def parse_layers(text: str) -> tuple[int, ...]:
    if "-" in text and "," not in text:
        first, last = (int(v) for v in text.split("-"))
        return tuple(range(first, last + 1))
    return tuple(int(v) for v in text.split(","))


def parse_grid(text: str) -> tuple[int, int]:
    h, w = text.lower().split("x")
    return int(h), int(w)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="gchk-extract", description="Extract gchk trace bundles from a vision-language model")
    parser.add_argument("--model", required=True, help="transformers model id or local path")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--images", required=True, help="directory of <image id>.jpg|png files")
    parser.add_argument("--layers", default=None, help="a-b or a comma list of 1-based layers (default: all)")
    parser.add_argument("--grid", type=parse_grid, default=None, help="expected patch grid, e.g. 24x24")
    parser.add_argument("--prompt", default=None)
    parser.add_argument("--do-sample", action="store_true")
    parser.add_argument("--temperature", type=float, default=0.1)
    parser.add_argument("--top-p", type=float, default=None)
    parser.add_argument("--top-k", type=int, default=None)
    parser.add_argument("--max-new-tokens", type=int, default=256)
    sub = parser.add_subparsers(dest="command", required=True)
    cap = sub.add_parser("captions", help="decode one caption per image into JSONL")
    cap.add_argument("--out", required=True)
    ext = sub.add_parser("extract", help="trace labeled object words of the captions")
    ext.add_argument("--spans", required=True, help="object span JSONL")
    ext.add_argument("--captions", required=True, help="caption JSONL")
    ext.add_argument("--out", required=True, help="bundle directory")
    pope = sub.add_parser("pope", help="trace yes/no probing questions")
    pope.add_argument("--questions", required=True)
    pope.add_argument("--out", required=True, help="bundle directory")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    from .hf import HuggingFaceAdapter

    try:
        adapter = HuggingFaceAdapter.from_pretrained(args.model, args.device)
        decoding = Decoding(args.do_sample, args.temperature, args.top_p, args.top_k, args.max_new_tokens)
        layers = parse_layers(args.layers) if args.layers else tuple(range(1, adapter.depth + 1))
        options = {"grid": args.grid}
        if args.prompt is not None:
            options["prompt"] = args.prompt
        spec = ExtractionSpec(args.model, layers, decoding=decoding, **options)
        images = ImageFolder(args.images)
        if args.command == "captions":
            captions = generate_captions(spec, images, adapter)
            with open(args.out, "w", encoding="utf-8") as f:
                for key, caption in captions.items():
                    f.write(json.dumps({"image": key, "caption": caption}, ensure_ascii=False) + "\n")
            return 0
        if args.command == "extract":
            result = extract(spec, load_spans(args.spans), load_captions(args.captions), images, adapter, args.out)
        else:
            result = pope_extract(spec, load_pope(args.questions), images, adapter, args.out)
    except SpecError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    logging.info("wrote %d tokens to %s, skipped %d", result.summary.token_count, args.out, len(result.skipped))
    return 0


if __name__ == "__main__":
    sys.exit(main())
