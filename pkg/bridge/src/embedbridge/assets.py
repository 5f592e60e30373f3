"""Deterministic creation of the small local models the bridge drives.

There is no network access in the environments this package targets, so the
encoder and the image pipeline are generated on disk from fixed recipes:

* a byte-level BPE tokenizer whose vocabulary covers every byte (so any text
  tokenizes) plus whole-word merges for a small curated word list, and
* a small causal text encoder and a small latent-diffusion pipeline, both
  initialized from a seeded generator and saved as the fixed local revision.

Re-running creation with the same seed reproduces the same files, which makes
every downstream export and generation reproducible.
"""

from __future__ import annotations

import json
import os

from .emblib import atomic_write_text, canonical_json
from .errors import InvalidInput

META_FILENAME = "bridge_meta.json"

# Words that tokenize as single whole-word tokens; everything else falls back
# to byte pieces. Kept small on purpose: the point is readable token labels
# for common demo prompts, not linguistic coverage.
CURATED_WORDS = (
    "a", "acts", "at", "ball", "boat", "bridge", "cat", "children", "clock",
    "day", "dog", "flows", "gets", "in", "killed", "library", "man", "mat",
    "modesty", "murder", "of", "old", "on", "painting", "park", "person",
    "play", "pornography", "purity", "quiet", "river", "scene", "sea",
    "sexual", "sits", "sunny", "the", "ticks", "under", "violence", "with",
)

DEFAULT_SEED = 20260817
HIDDEN_SIZE = 32
NUM_LAYERS = 2
NUM_HEADS = 4
MAX_POSITIONS = 32

LATENT_CHANNELS = 4
LATENT_SIZE = 8
PIPELINE_CHANNELS = 32
IMAGE_SIZE = 32
DEFAULT_STEPS = 6


def _byte_alphabet() -> list[str]:
    """Printable stand-ins for all 256 byte values, as used by byte-level BPE."""
    bs = list(range(ord("!"), ord("~") + 1)) + list(range(0xA1, 0xAD)) + list(range(0xAE, 0x100))
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return [chr(c) for c in cs]


def build_vocab_and_merges(words: tuple[str, ...] = CURATED_WORDS) -> tuple[dict[str, int], list[tuple[str, str]]]:
    """Build a complete byte-level vocabulary plus left-to-right merges for ``words``."""
    vocab: dict[str, int] = {}

    def add(token: str) -> None:
        if token not in vocab:
            vocab[token] = len(vocab)

    add("<|startoftext|>")
    add("<|endoftext|>")
    alphabet = _byte_alphabet()
    for ch in alphabet:
        add(ch)
    for ch in alphabet:
        add(ch + "</w>")

    merges: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    for word in sorted(set(words)):
        if not word or word != word.lower():
            raise InvalidInput(f"curated words must be non-empty lowercase, got {word!r}")
        symbols = list(word[:-1]) + [word[-1] + "</w>"]
        while len(symbols) > 1:
            pair = (symbols[0], symbols[1])
            if pair not in seen:
                seen.add(pair)
                merges.append(pair)
            merged = symbols[0] + symbols[1]
            add(merged)
            symbols = [merged] + symbols[2:]
    return vocab, merges


def create_text_encoder(directory: str, seed: int = DEFAULT_SEED) -> str:
    """Create the tokenizer + text encoder under ``directory`` and return its id."""
    import torch
    from transformers import CLIPTextConfig, CLIPTextModel, CLIPTokenizer

    os.makedirs(directory, exist_ok=True)
    vocab, merges = build_vocab_and_merges()
    vocab_path = os.path.join(directory, "vocab.json")
    merges_path = os.path.join(directory, "merges.txt")
    atomic_write_text(vocab_path, json.dumps(vocab, ensure_ascii=False))
    atomic_write_text(merges_path, "#version: 0.2\n" + "\n".join(f"{a} {b}" for a, b in merges) + "\n")

    tokenizer = CLIPTokenizer(vocab_path, merges_path)
    config = CLIPTextConfig(
        vocab_size=len(vocab),
        hidden_size=HIDDEN_SIZE,
        intermediate_size=2 * HIDDEN_SIZE,
        num_hidden_layers=NUM_LAYERS,
        num_attention_heads=NUM_HEADS,
        max_position_embeddings=MAX_POSITIONS,
        bos_token_id=tokenizer.bos_token_id,
        eos_token_id=tokenizer.eos_token_id,
    )
    torch.manual_seed(seed)
    model = CLIPTextModel(config)
    model.eval()
    model.save_pretrained(directory)
    tokenizer.save_pretrained(directory)

    encoder_id = f"tiny-clip-text-v1-seed{seed}"
    meta = {
        "encoder_id": encoder_id,
        "tokenizer_id": "tiny-clip-bpe-v1",
        "hidden_size": HIDDEN_SIZE,
        "max_positions": MAX_POSITIONS,
        "seed": seed,
    }
    atomic_write_text(os.path.join(directory, META_FILENAME), canonical_json(meta))
    return encoder_id


def create_pipeline(directory: str, seed: int = DEFAULT_SEED) -> str:
    """Create the latent-diffusion pipeline under ``directory`` and return its id."""
    from .pipeline import LatentPipeline

    pipeline = LatentPipeline.create(
        cross_attention_dim=HIDDEN_SIZE,
        max_token_count=MAX_POSITIONS,
        latent_channels=LATENT_CHANNELS,
        latent_size=LATENT_SIZE,
        channels=PIPELINE_CHANNELS,
        image_size=IMAGE_SIZE,
        steps_default=DEFAULT_STEPS,
        seed=seed,
    )
    pipeline.save(directory)
    return pipeline.pipeline_id
