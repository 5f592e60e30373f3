"""Shared fixtures: one set of deterministic local assets per test session."""

from __future__ import annotations

import shutil

import pytest

from embedbridge import assets
from embedbridge.encoder import LocalTextEncoder
from embedbridge.pipeline import LatentPipeline

ASSET_SEED = assets.DEFAULT_SEED


@pytest.fixture(scope="session")
def asset_dirs(tmp_path_factory) -> tuple[str, str]:
    root = tmp_path_factory.mktemp("bridge-assets")
    encoder_dir = str(root / "encoder")
    pipeline_dir = str(root / "pipeline")
    assets.create_text_encoder(encoder_dir, seed=ASSET_SEED)
    assets.create_pipeline(pipeline_dir, seed=ASSET_SEED)
    return encoder_dir, pipeline_dir


@pytest.fixture(scope="session")
def encoder(asset_dirs) -> LocalTextEncoder:
    return LocalTextEncoder.load(asset_dirs[0])


@pytest.fixture(scope="session")
def pipeline(asset_dirs) -> LatentPipeline:
    return LatentPipeline.load(asset_dirs[1])


@pytest.fixture(scope="session")
def screening_cli() -> str:
    """Path to the installed screening-toolkit CLI the bridge interoperates with."""
    path = shutil.which("embedpurify")
    if path is None:
        pytest.fail(
            "the 'embedpurify' CLI is not on PATH; install the screening toolkit "
            "(pip install -e <repo root>) before running the bridge tests"
        )
    return path
