"""A small latent-diffusion image pipeline conditioned on prompt embeddings.

The pipeline mirrors the structure of full text-to-image systems at toy scale:
a denoiser predicts noise on a latent tensor while cross-attending to the
injected per-token prompt embeddings, a deterministic DDIM loop walks the
latent from seeded Gaussian noise to a sample, and a small decoder maps the
final latent to an RGB image. Weights are seeded at creation and stored on
disk, so the same embeddings and seed always produce the same image bytes.

The conditioning tensor is supplied as an embedding file — typically one
written by the screening toolkit's purify step — never as text, which is what
makes the pipeline a useful injection target.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np
import torch
from torch import nn

from .emblib import atomic_write_bytes, atomic_write_text, canonical_json, read_embeddings
from .errors import EncoderUnavailable, FormatError, InvalidInput, IoError, ShapeMismatch

CONFIG_FILENAME = "pipeline_config.json"
DENOISER_FILENAME = "denoiser.safetensors"
DECODER_FILENAME = "decoder.safetensors"
PIPELINE_KIND = "tiny-latent-diffusion-v1"

TRAIN_TIMESTEPS = 100
BETA_START = 1e-4
BETA_END = 0.02


def _sinusoidal_embedding(timestep: torch.Tensor, dim: int) -> torch.Tensor:
    """Classic sin/cos timestep features, shape (batch, dim)."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32) / max(half - 1, 1))
    angles = timestep.to(torch.float32)[:, None] * freqs[None, :]
    return torch.cat([torch.sin(angles), torch.cos(angles)], dim=1)


class TinyDenoiser(nn.Module):
    """Noise predictor over a latent grid with cross-attention to prompt embeddings."""

    def __init__(self, latent_channels: int, channels: int, cross_dim: int) -> None:
        super().__init__()
        self.channels = channels
        self.conv_in = nn.Conv2d(latent_channels, channels, kernel_size=3, padding=1)
        self.time_mlp = nn.Sequential(nn.Linear(channels, channels), nn.SiLU(), nn.Linear(channels, channels))
        self.norm_attn = nn.GroupNorm(4, channels)
        self.to_q = nn.Linear(channels, channels, bias=False)
        self.to_k = nn.Linear(cross_dim, channels, bias=False)
        self.to_v = nn.Linear(cross_dim, channels, bias=False)
        self.to_out = nn.Linear(channels, channels)
        self.norm_mid = nn.GroupNorm(4, channels)
        self.conv_mid = nn.Conv2d(channels, channels, kernel_size=3, padding=1)
        self.conv_out = nn.Conv2d(channels, latent_channels, kernel_size=3, padding=1)

    def forward(self, latent: torch.Tensor, timestep: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        batch, _, height, width = latent.shape
        hidden = self.conv_in(latent)
        hidden = hidden + self.time_mlp(_sinusoidal_embedding(timestep, self.channels))[:, :, None, None]

        # Cross-attention: latent positions query the prompt embeddings.
        tokens = self.norm_attn(hidden).flatten(2).transpose(1, 2)  # (B, HW, C)
        query = self.to_q(tokens)
        key = self.to_k(context)
        value = self.to_v(context)
        scale = 1.0 / math.sqrt(query.shape[-1])
        attention = torch.softmax(query @ key.transpose(1, 2) * scale, dim=-1)
        attended = self.to_out(attention @ value)
        hidden = hidden + attended.transpose(1, 2).reshape(batch, self.channels, height, width)

        hidden = hidden + self.conv_mid(torch.nn.functional.silu(self.norm_mid(hidden)))
        return self.conv_out(torch.nn.functional.silu(hidden))


class TinyDecoder(nn.Module):
    """Latent (C, S, S) to RGB (3, 4S, 4S) in [0, 1]."""

    def __init__(self, latent_channels: int) -> None:
        super().__init__()
        self.up1 = nn.ConvTranspose2d(latent_channels, 16, kernel_size=4, stride=2, padding=1)
        self.up2 = nn.ConvTranspose2d(16, 3, kernel_size=4, stride=2, padding=1)

    def forward(self, latent: torch.Tensor) -> torch.Tensor:
        hidden = torch.nn.functional.silu(self.up1(latent))
        return torch.sigmoid(self.up2(hidden))


class LatentPipeline:
    """Denoiser + decoder + sampling schedule, loadable from a directory."""

    def __init__(self, config: dict, denoiser: TinyDenoiser, decoder: TinyDecoder) -> None:
        self.config = config
        self.denoiser = denoiser
        self.decoder = decoder
        self.denoiser.eval()
        self.decoder.eval()
        for module in (self.denoiser, self.decoder):
            for parameter in module.parameters():
                parameter.requires_grad_(False)

    @property
    def pipeline_id(self) -> str:
        return str(self.config["pipeline_id"])

    @property
    def cross_attention_dim(self) -> int:
        return int(self.config["cross_attention_dim"])

    @property
    def max_token_count(self) -> int:
        return int(self.config["max_token_count"])

    @classmethod
    def create(
        cls,
        *,
        cross_attention_dim: int,
        max_token_count: int,
        latent_channels: int,
        latent_size: int,
        channels: int,
        image_size: int,
        steps_default: int,
        seed: int,
    ) -> "LatentPipeline":
        if image_size != 4 * latent_size:
            raise InvalidInput(
                f"decoder upsamples 4x, so image_size must be {4 * latent_size}, got {image_size}"
            )
        config = {
            "kind": PIPELINE_KIND,
            "pipeline_id": f"{PIPELINE_KIND}-seed{seed}",
            "cross_attention_dim": cross_attention_dim,
            "max_token_count": max_token_count,
            "latent_channels": latent_channels,
            "latent_size": latent_size,
            "channels": channels,
            "image_size": image_size,
            "steps_default": steps_default,
            "seed": seed,
        }
        torch.manual_seed(seed)
        denoiser = TinyDenoiser(latent_channels, channels, cross_attention_dim)
        decoder = TinyDecoder(latent_channels)
        return cls(config, denoiser, decoder)

    def save(self, directory: str) -> None:
        from safetensors.torch import save_file

        os.makedirs(directory, exist_ok=True)
        atomic_write_text(os.path.join(directory, CONFIG_FILENAME), canonical_json(self.config))
        save_file(self.denoiser.state_dict(), os.path.join(directory, DENOISER_FILENAME))
        save_file(self.decoder.state_dict(), os.path.join(directory, DECODER_FILENAME))

    @classmethod
    def load(cls, directory: str) -> "LatentPipeline":
        from safetensors.torch import load_file

        config_path = os.path.join(directory, CONFIG_FILENAME)
        if not os.path.isfile(config_path):
            raise EncoderUnavailable(
                f"pipeline directory {directory!r} has no {CONFIG_FILENAME}; "
                f"create one first with 'embedbridge make-assets'"
            )
        try:
            with open(config_path, "r", encoding="utf-8") as handle:
                config = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise EncoderUnavailable(f"cannot read pipeline config {config_path!r}: {exc}") from exc
        if config.get("kind") != PIPELINE_KIND:
            raise FormatError(
                f"{config_path!r} describes kind {config.get('kind')!r}, expected {PIPELINE_KIND!r}"
            )
        denoiser = TinyDenoiser(
            int(config["latent_channels"]), int(config["channels"]), int(config["cross_attention_dim"])
        )
        decoder = TinyDecoder(int(config["latent_channels"]))
        try:
            denoiser.load_state_dict(load_file(os.path.join(directory, DENOISER_FILENAME)))
            decoder.load_state_dict(load_file(os.path.join(directory, DECODER_FILENAME)))
        except (OSError, RuntimeError) as exc:
            raise EncoderUnavailable(f"cannot load pipeline weights from {directory!r}: {exc}") from exc
        return cls(config, denoiser, decoder)

    def _check_conditioning(self, count: int, dim: int) -> None:
        if dim != self.cross_attention_dim or not (1 <= count <= self.max_token_count):
            raise ShapeMismatch(
                "conditioning shape mismatch: expected "
                f"(count between 1 and {self.max_token_count}, dim={self.cross_attention_dim}), "
                f"got (count={count}, dim={dim})"
            )

    def generate(self, embeddings: np.ndarray, *, seed: int = 0, steps: int | None = None) -> np.ndarray:
        """Run the DDIM loop conditioned on ``embeddings``; returns uint8 (H, W, 3)."""
        array = np.asarray(embeddings, dtype=np.float32)
        if array.ndim != 2:
            raise ShapeMismatch(
                f"conditioning must be a (count, dim) array, got shape {array.shape}"
            )
        self._check_conditioning(array.shape[0], array.shape[1])
        if not np.all(np.isfinite(array)):
            raise InvalidInput("conditioning embeddings contain NaN or Inf")
        num_steps = int(steps) if steps is not None else int(self.config["steps_default"])
        if num_steps < 1:
            raise InvalidInput(f"steps must be >= 1, got {num_steps}")

        betas = torch.linspace(BETA_START, BETA_END, TRAIN_TIMESTEPS, dtype=torch.float64)
        alpha_bar = torch.cumprod(1.0 - betas, dim=0)
        timesteps = sorted(
            {int(round(t)) for t in np.linspace(TRAIN_TIMESTEPS - 1, 0, num_steps)}, reverse=True
        )

        context = torch.from_numpy(array)[None, :, :]
        size = int(self.config["latent_size"])
        channels = int(self.config["latent_channels"])
        generator = torch.Generator(device="cpu").manual_seed(seed)
        latent = torch.randn((1, channels, size, size), generator=generator, dtype=torch.float32)

        with torch.no_grad():
            for index, t in enumerate(timesteps):
                a_t = float(alpha_bar[t])
                a_prev = float(alpha_bar[timesteps[index + 1]]) if index + 1 < len(timesteps) else 1.0
                eps = self.denoiser(latent, torch.tensor([t]), context)
                x0 = (latent - math.sqrt(1.0 - a_t) * eps) / math.sqrt(a_t)
                latent = math.sqrt(a_prev) * x0 + math.sqrt(1.0 - a_prev) * eps
            image = self.decoder(latent)[0]

        pixels = (image.clamp(0.0, 1.0) * 255.0).round().to(torch.uint8)
        return pixels.permute(1, 2, 0).numpy().copy()


def inject_and_generate(
    pipeline: LatentPipeline,
    embeddings_path: str,
    image_out: str,
    *,
    seed: int = 0,
    steps: int | None = None,
) -> str:
    """Condition the pipeline on an embedding file and write a PNG image."""
    import io

    from PIL import Image

    embedding_file = read_embeddings(embeddings_path)
    image = pipeline.generate(embedding_file.vectors, seed=seed, steps=steps)
    buffer = io.BytesIO()
    Image.fromarray(image, mode="RGB").save(buffer, format="PNG")
    directory = os.path.dirname(os.path.abspath(image_out))
    if not os.path.isdir(directory):
        raise IoError(f"output directory {directory!r} does not exist")
    atomic_write_bytes(image_out, buffer.getvalue())
    return image_out
