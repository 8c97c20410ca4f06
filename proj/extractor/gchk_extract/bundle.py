# Copyright 2026 The gchk Authors.
# SPDX-License-Identifier: Apache-2.0
"""Trace bundle reader and writer, byte-compatible with the gchk C++ library.

A bundle is a directory holding manifest.json and tensors.bin. tensors.bin starts
with b"GCHK" and a u16 LE version, followed by one record per token. A record holds,
per layer: attention (|P| f32), patch embeddings (|P| x d f32, row-major) and the
token embedding (d f32), all little-endian.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

MAGIC = b"GCHK"
VERSION = 1
HEADER_BYTES = 6
MANIFEST_FILE = "manifest.json"
TENSOR_FILE = "tensors.bin"
LABELS = ("grounded", "hallucinated", "unknown")

_F32 = np.dtype("<f4")


class BundleError(Exception):
    """Base class for bundle failures."""


class InvariantError(BundleError):
    """A trace violates a structural invariant."""


class FormatError(BundleError):
    """Bad magic, version or manifest field."""


class ConsistencyError(BundleError):
    """Manifest and payload disagree."""


@dataclass
class LayerSlice:
    layer_index: int
    attention: np.ndarray  # (h, w)
    patch_embeddings: np.ndarray  # (h * w, d)
    token_embedding: np.ndarray  # (d,)

    def __post_init__(self) -> None:
        self.attention = np.asarray(self.attention, dtype=np.float32)
        self.patch_embeddings = np.asarray(self.patch_embeddings, dtype=np.float32)
        self.token_embedding = np.asarray(self.token_embedding, dtype=np.float32)


@dataclass
class TokenPairing:
    attention_token: str
    embedding_token: str


@dataclass
class TokenTrace:
    token_id: str
    object_text: str
    label: str = "unknown"
    layers: list[LayerSlice] = field(default_factory=list)
    pairing: Optional[TokenPairing] = None


@dataclass
class BundleSummary:
    token_count: int = 0
    num_layers: int = 0
    grid_height: int = 0
    grid_width: int = 0
    embed_dim: int = 0
    payload_bytes: int = 0


def record_bytes(num_layers: int, patch_count: int, embed_dim: int) -> int:
    return 4 * num_layers * (patch_count + patch_count * embed_dim + embed_dim)


def validate(trace: TokenTrace) -> None:
    def reject(why: str) -> None:
        raise InvariantError(f"token '{trace.token_id}': {why}")

    if trace.label not in LABELS:
        reject(f"unknown label '{trace.label}'")
    if not trace.layers:
        reject("no layers")
    first = trace.layers[0]
    if first.attention.ndim != 2 or first.attention.size == 0:
        reject("empty attention grid")
    dim = first.token_embedding.shape[0] if first.token_embedding.ndim == 1 else 0
    if dim == 0:
        reject("empty token embedding")
    patches = first.attention.size
    for i, s in enumerate(trace.layers):
        where = f"layer {s.layer_index}: "
        if i > 0 and s.layer_index <= trace.layers[i - 1].layer_index:
            reject(where + "layer indices must be strictly increasing")
        if s.attention.shape != first.attention.shape:
            reject(where + "grid dimensions differ between layers")
        if s.token_embedding.shape != (dim,):
            reject(where + "embedding dimension differs between layers")
        if s.patch_embeddings.shape != (patches, dim):
            reject(where + "patch embedding matrix is not |P| x d")
        if not np.all(np.isfinite(s.attention)) or np.any(s.attention < 0):
            reject(where + "attention must be finite and non-negative")
        if not np.all(np.isfinite(s.patch_embeddings)) or not np.all(np.isfinite(s.token_embedding)):
            reject(where + "embeddings must be finite")
    if trace.pairing is not None and (not trace.pairing.attention_token or not trace.pairing.embedding_token):
        reject("pairing names an empty token")


def _shape(trace: TokenTrace) -> tuple:
    first = trace.layers[0]
    return (
        tuple(s.layer_index for s in trace.layers),
        first.attention.shape,
        first.token_embedding.shape[0],
    )


def write_bundle(traces: Sequence[TokenTrace], destination: str, model: str = "unknown") -> BundleSummary:
    """Validates every trace, then writes the bundle. Nothing is written on failure."""
    seen: set[str] = set()
    shape = None
    for t in traces:
        validate(t)
        if t.token_id in seen:
            raise InvariantError(f"token '{t.token_id}': duplicate token_id")
        seen.add(t.token_id)
        s = _shape(t)
        if shape is None:
            shape = s
        elif s[0] != shape[0]:
            raise InvariantError(f"token '{t.token_id}': layer indices differ from the first token")
        elif s[1] != shape[1]:
            raise InvariantError(f"token '{t.token_id}': grid differs from the first token")
        elif s[2] != shape[2]:
            raise InvariantError(f"token '{t.token_id}': embedding dimension differs from the first token")

    layers, (height, width), dim = shape if shape else ((), (0, 0), 0)
    length = record_bytes(len(layers), height * width, dim) if traces else 0

    chunks = [MAGIC, struct.pack("<H", VERSION)]
    offset = HEADER_BYTES
    tokens = []
    for t in traces:
        for s in t.layers:
            chunks.append(s.attention.astype(_F32).tobytes())
            chunks.append(s.patch_embeddings.astype(_F32).tobytes())
            chunks.append(s.token_embedding.astype(_F32).tobytes())
        entry = {
            "token_id": t.token_id,
            "object_text": t.object_text,
            "label": t.label,
            "offset_bytes": offset,
            "length_bytes": length,
        }
        if t.pairing is not None:
            entry["pairing"] = {
                "attention_token": t.pairing.attention_token,
                "embedding_token": t.pairing.embedding_token,
            }
        tokens.append(entry)
        offset += length

    manifest = {
        "version": VERSION,
        "model": model,
        "num_layers": len(layers),
        "layer_indices": list(layers),
        "grid": [height, width],
        "embed_dim": dim,
        "tokens": tokens,
    }
    payload = b"".join(chunks)
    os.makedirs(destination, exist_ok=True)
    with open(os.path.join(destination, MANIFEST_FILE), "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n")
    with open(os.path.join(destination, TENSOR_FILE), "wb") as f:
        f.write(payload)
    return BundleSummary(len(traces), len(layers), height, width, dim, len(payload))


def read_bundle(source: str) -> tuple[str, list[TokenTrace]]:
    """Reads and re-validates a bundle; returns (model, traces)."""
    manifest_path = os.path.join(source, MANIFEST_FILE)
    with open(manifest_path, encoding="utf-8") as f:
        try:
            m = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"{manifest_path}: invalid JSON: {e}") from e
    if m.get("version") != VERSION:
        raise FormatError(f"{manifest_path}: unsupported bundle version {m.get('version')}")
    with open(os.path.join(source, TENSOR_FILE), "rb") as f:
        payload = f.read()
    if payload[:4] != MAGIC:
        raise FormatError(f"{source}: bad magic")
    if len(payload) < HEADER_BYTES or struct.unpack_from("<H", payload, 4)[0] != VERSION:
        raise FormatError(f"{source}: unsupported payload version")

    layers = m["layer_indices"]
    if m["num_layers"] != len(layers):
        raise ConsistencyError(f"{manifest_path}: num_layers does not match layer_indices")
    height, width = m["grid"]
    dim = m["embed_dim"]
    patches = height * width
    length = record_bytes(len(layers), patches, dim)
    cursor = HEADER_BYTES
    traces = []
    for i, e in enumerate(m["tokens"]):
        if e["offset_bytes"] != cursor or e["length_bytes"] != length:
            raise ConsistencyError(f"{manifest_path}: tokens[{i}] offset or length disagrees with the layout")
        if cursor + length > len(payload):
            raise ConsistencyError(f"{source}: payload truncated in tokens[{i}]")
        values = np.frombuffer(payload, dtype=_F32, count=length // 4, offset=cursor)
        slices = []
        step = patches + patches * dim + dim
        for l, index in enumerate(layers):
            block = values[l * step : (l + 1) * step]
            slices.append(
                LayerSlice(
                    index,
                    block[:patches].reshape(height, width).copy(),
                    block[patches : patches + patches * dim].reshape(patches, dim).copy(),
                    block[patches + patches * dim :].copy(),
                )
            )
        pairing = None
        if "pairing" in e:
            pairing = TokenPairing(e["pairing"]["attention_token"], e["pairing"]["embedding_token"])
        trace = TokenTrace(e["token_id"], e["object_text"], e["label"], slices, pairing)
        validate(trace)
        traces.append(trace)
        cursor += length
    if cursor != len(payload):
        raise ConsistencyError(f"{source}: {len(payload) - cursor} trailing payload bytes")
    return m["model"], traces


def write_labels(labels: Iterable[tuple[str, str]], path: str) -> None:
    """Writes label JSONL sorted by token_id, in the form gchk reads."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for token_id, label in sorted(labels):
            if label not in ("grounded", "hallucinated"):
                raise InvariantError(f"token '{token_id}': cannot write label '{label}'")
            f.write(json.dumps({"token_id": token_id, "label": label}, ensure_ascii=False, separators=(",", ":")) + "\n")

