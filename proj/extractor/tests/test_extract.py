# Copyright 2026 The gchk Authors.
# SPDX-License-Identifier: Apache-2.0

import json

import numpy as np
import pytest

from conftest import FakeAdapter, run_tool, tokenize
from gchk_extract import (
    Decoding,
    ExtractionSpec,
    ForwardPass,
    GridMismatchError,
    ObjectSpan,
    PopeQuestion,
    SpecError,
    TokenSpan,
    extract,
    find_word,
    first_subword,
    generate_captions,
    load_captions,
    load_pope,
    load_spans,
    pope_extract,
    read_bundle,
)
from gchk_extract.extract import patch_attention

CAPTION = "A wooden table stands next to a chair."
IMAGES = {"img1": "img1", "img2": "img2"}  # the fake model takes ids as images


def spec(layers=(1, 2, 3, 4), **kw):
    return ExtractionSpec("fake-vlm", tuple(layers), **kw)


def test_one_object_gives_one_token_with_every_layer(tmp_path):
    adapter = FakeAdapter()
    spans = [ObjectSpan("t1", "img1", "table", "grounded")]
    result = extract(spec(), spans, {"img1": CAPTION}, IMAGES, adapter, str(tmp_path / "b"))
    assert result.summary.token_count == 1 and result.skipped == []
    model, traces = read_bundle(str(tmp_path / "b"))
    assert model == "fake-vlm"
    assert [s.layer_index for s in traces[0].layers] == [1, 2, 3, 4]
    assert traces[0].layers[0].attention.shape == (4, 5)
    assert traces[0].label == "grounded"


def test_prefix_is_reforwarded_through_the_first_subword(tmp_path):
    adapter = FakeAdapter()
    extract(spec(), [ObjectSpan("t1", "img1", "table")], {"img1": CAPTION}, IMAGES, adapter, str(tmp_path / "b"))
    assert adapter.calls == [("img1", "Describe this image.", "A wooden table")]
    # bos + 20 patches + 4 prompt pieces, then A / woo / den / tab / le
    expected = 1 + 20 + len(tokenize("Describe this image.")) + 3
    _, traces = read_bundle(str(tmp_path / "b"))
    for s in traces[0].layers:
        assert s.token_embedding[0] == s.layer_index
        assert s.token_embedding[1] == expected
        assert list(s.patch_embeddings[:, 1]) == list(range(1, 21))


def test_absent_object_is_skipped_and_run_continues(tmp_path):
    spans = [
        ObjectSpan("t1", "img1", "giraffe", "hallucinated"),
        ObjectSpan("t2", "img1", "chair", "grounded"),
        ObjectSpan("t3", "img1", "tab"),  # a piece of a word, not a word
        ObjectSpan("t4", "missing", "chair"),
    ]
    result = extract(spec(), spans, {"img1": CAPTION, "missing": CAPTION}, IMAGES, FakeAdapter(), str(tmp_path / "b"))
    assert [t.token_id for t in read_bundle(str(tmp_path / "b"))[1]] == ["t2"]
    reasons = {s.token_id: s.reason for s in result.skipped}
    assert "absent" in reasons["t1"] and "absent" in reasons["t3"]
    assert "not found" in reasons["t4"]


def test_explicit_span_must_hold_the_object(tmp_path):
    spans = [ObjectSpan("t1", "img1", "chair", span=(32, 37)), ObjectSpan("t2", "img1", "chair", span=(2, 8))]
    result = extract(spec(), spans, {"img1": CAPTION}, IMAGES, FakeAdapter(), str(tmp_path / "b"))
    assert result.summary.token_count == 1
    assert [s.token_id for s in result.skipped] == ["t2"]


def test_renormalized_rows_sum_to_one(tmp_path):
    spans = [ObjectSpan(f"t{i}", "img1", w) for i, w in enumerate(["wooden", "table", "chair", "next"])]
    extract(spec(grid=(4, 5)), spans, {"img1": CAPTION}, IMAGES, FakeAdapter(), str(tmp_path / "b"))
    for t in read_bundle(str(tmp_path / "b"))[1]:
        for s in t.layers:
            assert abs(float(s.attention.sum(dtype=np.float64)) - 1.0) <= 1e-5


def handmade_pass(rows):
    """Two heads, sequence of 6: bos, 4 patches (2x2), one query."""
    attn = np.zeros((2, 6, 6))
    attn[:, 5, :] = rows
    hidden = [np.zeros((6, 3)), np.ones((6, 3))]
    return ForwardPass([attn], hidden, range(1, 5), (2, 2), [], [TokenSpan(5, 0, 3)])


def test_patch_attention_averages_heads_then_renormalizes():
    rows = np.array([[0.5, 0.1, 0.1, 0.2, 0.0, 0.1], [0.1, 0.3, 0.1, 0.0, 0.2, 0.3]])
    got = patch_attention(handmade_pass(rows), 1, 5, 1e-5)
    mean = (rows[0, 1:5] + rows[1, 1:5]) / 2
    np.testing.assert_allclose(got, (mean / mean.sum()).reshape(2, 2), rtol=1e-6)


def test_no_patch_mass_skips_the_token(tmp_path):
    class Blind(FakeAdapter):
        def forward(self, *args):
            fp = super().forward(*args)
            for a in fp.attentions:
                a[:, :, fp.patch_positions.start : fp.patch_positions.stop] = 0
            return fp

    result = extract(spec(), [ObjectSpan("t1", "img1", "chair")], {"img1": CAPTION}, IMAGES, Blind(), str(tmp_path / "b"))
    assert result.summary.token_count == 0
    assert "no attention mass" in result.skipped[0].reason


def test_grid_and_layer_checks(tmp_path):
    args = ([ObjectSpan("t1", "img1", "chair")], {"img1": CAPTION}, IMAGES, FakeAdapter(), str(tmp_path / "b"))
    with pytest.raises(GridMismatchError, match="24, 24"):
        extract(spec(grid=(24, 24)), *args)
    with pytest.raises(SpecError, match="depth"):
        extract(spec(layers=(1, 5)), *args)
    with pytest.raises(SpecError, match="increasing"):
        extract(spec(layers=(2, 1)), *args)
    with pytest.raises(SpecError, match="repeated"):
        extract(spec(), args[0] * 2, *args[1:])

    class Liar(FakeAdapter):
        @property
        def grid(self):
            return (5, 5)

    with pytest.raises(GridMismatchError):
        extract(spec(), args[0], args[1], IMAGES, Liar(), str(tmp_path / "b"))


def test_word_helpers():
    assert find_word(CAPTION, "TABLE") == (9, 14)
    assert find_word(CAPTION, "tab") is None
    assert find_word("a hot-dog.", "hot-dog") == (2, 9)
    tokens = [TokenSpan(7, 0, 1), TokenSpan(8, 1, 4), TokenSpan(9, 4, 6)]
    assert first_subword(tokens, 2, 6) == 8
    assert first_subword(tokens, 6, 8) is None


def test_pope_pairs_answer_attention_with_object_embedding(tmp_path):
    adapter = FakeAdapter(answers={"img1": "Yes, there is.", "img2": "I cannot tell."})
    questions = [
        PopeQuestion("q1", "img1", "Is there a dog in the image?", "dog", "grounded"),
        PopeQuestion("q2", "img2", "Is there a cat in the image?", "cat", "hallucinated"),
    ]
    result = pope_extract(spec(), questions, IMAGES, adapter, str(tmp_path / "b"))
    assert result.summary.token_count == 1
    assert result.skipped[0].token_id == "q2" and "yes or no" in result.skipped[0].reason
    assert adapter.calls == [("img1", "Is there a dog in the image?", "Yes")]
    trace = read_bundle(str(tmp_path / "b"))[1][0]
    assert trace.pairing.attention_token == "q1/Yes"
    assert trace.pairing.embedding_token == "q1/dog"
    object_position = 1 + 20 + 4  # Is / the / re / a / dog
    assert all(s.token_embedding[1] == object_position for s in trace.layers)


def test_pope_bundle_is_read_by_gchk(tmp_path, gchk_tool):
    adapter = FakeAdapter(answers={"img1": "No", "img2": "yes"})
    questions = [
        PopeQuestion("q1", "img1", "Is there a dog?", "dog", "grounded"),
        PopeQuestion("q2", "img2", "Is there a cat?", "cat", "hallucinated"),
    ]
    pope_extract(spec(), questions, IMAGES, adapter, str(tmp_path / "b"))
    result = run_tool(gchk_tool, "features", "--bundle", str(tmp_path / "b"), "--out", str(tmp_path / "f.csv"))
    assert result.returncode == 0, result.stderr
    assert len((tmp_path / "f.csv").read_text().splitlines()) == 3


def test_captions_use_the_spec_prompt():
    adapter = FakeAdapter(answers={"img1": "one", "img2": "two"})
    assert generate_captions(spec(), IMAGES, adapter) == {"img1": "one", "img2": "two"}


def test_loaders(tmp_path):
    spans = tmp_path / "spans.jsonl"
    spans.write_text(
        json.dumps({"token_id": "a", "image": "img1", "object": "table", "label": "grounded", "span": [9, 14]})
        + "\n\n"
        + json.dumps({"token_id": "b", "image": "img1", "object": "dog"})
        + "\n"
    )
    loaded = load_spans(str(spans))
    assert loaded[0] == ObjectSpan("a", "img1", "table", "grounded", (9, 14))
    assert loaded[1].label == "unknown" and loaded[1].span is None

    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps({"token_id": "a", "image": "i", "object": "x"}) + "\n" + json.dumps({"token_id": "b", "image": "i", "object": "x", "label": "maybe"}) + "\n")
    with pytest.raises(SpecError, match="bad.jsonl:2"):
        load_spans(str(bad))
    bad.write_text(json.dumps({"token_id": "a", "image": "i", "object": "x", "span": [5, 2]}) + "\n")
    with pytest.raises(SpecError, match="span"):
        load_spans(str(bad))

    caps = tmp_path / "caps.jsonl"
    caps.write_text(json.dumps({"image": "img1", "caption": "x"}) + "\n" + json.dumps({"image": "img1", "caption": "y"}) + "\n")
    assert load_captions(str(caps)) == {"img1": "y"}

    pope = tmp_path / "pope.jsonl"
    pope.write_text(json.dumps({"question_id": "q", "image": "i", "question": "Is there a dog?", "object": "dog"}) + "\n")
    assert load_pope(str(pope))[0].object_text == "dog"


def test_decoding_checks():
    with pytest.raises(SpecError):
        spec(decoding=Decoding(temperature=0)).check(4)
    with pytest.raises(SpecError):
        spec(decoding=Decoding(top_p=1.5)).check(4)
    spec(decoding=Decoding(do_sample=True, top_k=40)).check(4)
