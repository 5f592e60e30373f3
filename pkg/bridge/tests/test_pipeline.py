"""Image pipeline: determinism, conditioning sensitivity, shape errors."""

from __future__ import annotations

import numpy as np
import pytest

from embedbridge.emblib import EmbeddingFile, write_embeddings
from embedbridge.errors import EncoderUnavailable, InvalidInput, ShapeMismatch
from embedbridge.pipeline import LatentPipeline, inject_and_generate


def conditioning(pipeline, count: int = 4, seed: int = 3) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((count, pipeline.cross_attention_dim)).astype(np.float32)


def test_generate_returns_rgb_uint8(pipeline):
    image = pipeline.generate(conditioning(pipeline), seed=5)
    size = int(pipeline.config["image_size"])
    assert image.shape == (size, size, 3)
    assert image.dtype == np.uint8


def test_generate_is_deterministic(pipeline):
    a = pipeline.generate(conditioning(pipeline), seed=5)
    b = pipeline.generate(conditioning(pipeline), seed=5)
    assert np.array_equal(a, b)


def test_noise_seed_changes_image(pipeline):
    a = pipeline.generate(conditioning(pipeline), seed=5)
    b = pipeline.generate(conditioning(pipeline), seed=6)
    assert not np.array_equal(a, b)


def test_conditioning_changes_image(pipeline):
    """The prompt embeddings must actually steer generation, not just ride along."""
    a = pipeline.generate(conditioning(pipeline, seed=3), seed=5)
    b = pipeline.generate(conditioning(pipeline, seed=4), seed=5)
    assert not np.array_equal(a, b)


def test_token_count_changes_image(pipeline):
    a = pipeline.generate(conditioning(pipeline, count=4), seed=5)
    b = pipeline.generate(conditioning(pipeline, count=5), seed=5)
    assert not np.array_equal(a, b)


def test_save_load_round_trip_preserves_output(pipeline, tmp_path, asset_dirs):
    reloaded = LatentPipeline.load(asset_dirs[1])
    a = pipeline.generate(conditioning(pipeline), seed=9)
    b = reloaded.generate(conditioning(pipeline), seed=9)
    assert np.array_equal(a, b)


def test_wrong_dim_error_lists_expected_and_actual(pipeline):
    bad = np.zeros((4, pipeline.cross_attention_dim + 3), dtype=np.float32)
    with pytest.raises(ShapeMismatch) as excinfo:
        pipeline.generate(bad)
    message = str(excinfo.value)
    assert f"dim={pipeline.cross_attention_dim}" in message
    assert f"dim={pipeline.cross_attention_dim + 3}" in message
    assert "count=4" in message


def test_too_many_tokens_is_shape_error(pipeline):
    bad = np.zeros((pipeline.max_token_count + 1, pipeline.cross_attention_dim), dtype=np.float32)
    with pytest.raises(ShapeMismatch, match=f"count={pipeline.max_token_count + 1}"):
        pipeline.generate(bad)


def test_one_dimensional_input_is_shape_error(pipeline):
    with pytest.raises(ShapeMismatch, match="count, dim"):
        pipeline.generate(np.zeros(pipeline.cross_attention_dim, dtype=np.float32))


def test_non_finite_conditioning_is_rejected(pipeline):
    bad = conditioning(pipeline)
    bad[0, 0] = np.inf
    with pytest.raises(InvalidInput, match="NaN or Inf"):
        pipeline.generate(bad)


def test_bad_step_count_is_rejected(pipeline):
    with pytest.raises(InvalidInput, match="steps"):
        pipeline.generate(conditioning(pipeline), steps=0)


def test_missing_pipeline_directory_has_setup_hint(tmp_path):
    with pytest.raises(EncoderUnavailable, match="make-assets"):
        LatentPipeline.load(str(tmp_path / "nowhere"))


def test_inject_and_generate_writes_valid_png(pipeline, tmp_path):
    from PIL import Image

    emb_path = str(tmp_path / "cond.emb")
    write_embeddings(EmbeddingFile(vectors=conditioning(pipeline)), emb_path)
    out = str(tmp_path / "image.png")
    result = inject_and_generate(pipeline, emb_path, out, seed=2)
    assert result == out
    with Image.open(out) as image:
        assert image.mode == "RGB"
        assert image.size == (int(pipeline.config["image_size"]),) * 2


def test_inject_and_generate_is_byte_deterministic(pipeline, tmp_path):
    emb_path = str(tmp_path / "cond.embjson")
    write_embeddings(EmbeddingFile(vectors=conditioning(pipeline)), emb_path)
    out_a = str(tmp_path / "a.png")
    out_b = str(tmp_path / "b.png")
    inject_and_generate(pipeline, emb_path, out_a, seed=2)
    inject_and_generate(pipeline, emb_path, out_b, seed=2)
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_inject_wrong_dim_file_is_shape_error(pipeline, tmp_path):
    emb_path = str(tmp_path / "bad.embjson")
    write_embeddings(
        EmbeddingFile(vectors=np.ones((2, 8), dtype=np.float32)), emb_path
    )
    with pytest.raises(ShapeMismatch, match="got \\(count=2, dim=8\\)"):
        inject_and_generate(pipeline, emb_path, str(tmp_path / "x.png"))
