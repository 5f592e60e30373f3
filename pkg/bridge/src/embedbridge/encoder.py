"""Text-encoder exports: per-token prompt embeddings and concept lists.

The encoder lives in a local directory (see ``assets.create_text_encoder``).
Exports write the shared embedding file formats plus a JSON manifest that
records exactly how the vectors were produced, so files stay auditable after
they leave this package.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .emblib import (
    EmbeddingFile,
    atomic_write_text,
    canonical_json,
    default_manifest_path,
    write_embeddings,
)
from .errors import EncoderUnavailable, InvalidInput

POOLING_POOLED = "pooled"
POOLING_MEAN_TOKENS = "mean-tokens"

_ROLES = ("toxic", "clean")


@dataclass(eq=False)
class ExportManifest:
    """Record of one prompt export: what was encoded and what the file holds."""

    encoder_id: str
    tokenizer_id: str
    prompt_text: str
    token_strings: list[str]
    dim: int
    includes_special_tokens: bool
    special_token_mask: list[bool] | None = field(default=None)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise InvalidInput(f"manifest dim must be positive, got {self.dim}")
        if self.special_token_mask is not None and len(self.special_token_mask) != len(
            self.token_strings
        ):
            raise InvalidInput(
                f"{len(self.special_token_mask)} mask entries for {len(self.token_strings)} tokens"
            )

    def to_dict(self) -> dict:
        doc = {
            "encoder_id": self.encoder_id,
            "tokenizer_id": self.tokenizer_id,
            "prompt_text": self.prompt_text,
            "token_strings": list(self.token_strings),
            "dim": self.dim,
            "includes_special_tokens": self.includes_special_tokens,
        }
        if self.special_token_mask is not None:
            doc["special_token_mask"] = list(self.special_token_mask)
        return doc


class LocalTextEncoder:
    """A tokenizer + text encoder loaded from a local directory."""

    def __init__(self, tokenizer, model, encoder_id: str, tokenizer_id: str) -> None:
        self.tokenizer = tokenizer
        self.model = model
        self.encoder_id = encoder_id
        self.tokenizer_id = tokenizer_id

    @classmethod
    def load(cls, directory: str) -> "LocalTextEncoder":
        import json as _json

        import torch
        from transformers import CLIPTextModel, CLIPTokenizer

        if not os.path.isdir(directory):
            raise EncoderUnavailable(
                f"encoder directory {directory!r} does not exist; "
                f"create one first with 'embedbridge make-assets'"
            )
        try:
            tokenizer = CLIPTokenizer.from_pretrained(directory)
            model = CLIPTextModel.from_pretrained(directory)
        except Exception as exc:  # transformers raises a zoo of types here
            raise EncoderUnavailable(
                f"cannot load encoder from {directory!r}: {exc}; "
                f"re-create it with 'embedbridge make-assets'"
            ) from exc
        model.eval()
        for parameter in model.parameters():
            parameter.requires_grad_(False)

        encoder_id = os.path.basename(os.path.normpath(directory))
        tokenizer_id = encoder_id + "-tokenizer"
        meta_path = os.path.join(directory, "bridge_meta.json")
        if os.path.isfile(meta_path):
            with open(meta_path, "r", encoding="utf-8") as handle:
                meta = _json.load(handle)
            encoder_id = str(meta.get("encoder_id", encoder_id))
            tokenizer_id = str(meta.get("tokenizer_id", tokenizer_id))
        instance = cls(tokenizer, model, encoder_id, tokenizer_id)
        instance._torch = torch
        return instance

    @property
    def hidden_size(self) -> int:
        return int(self.model.config.hidden_size)

    @property
    def max_positions(self) -> int:
        return int(self.model.config.max_position_embeddings)

    def tokenize(self, text: str) -> tuple[list[int], list[str], list[bool]]:
        """Token ids, token strings, and a per-token special-token mask."""
        if not text or not text.strip():
            raise InvalidInput("prompt text must be non-empty")
        ids = self.tokenizer(text)["input_ids"]
        if len(ids) > self.max_positions:
            raise InvalidInput(
                f"prompt tokenizes to {len(ids)} tokens but the encoder accepts at most "
                f"{self.max_positions}"
            )
        tokens = self.tokenizer.convert_ids_to_tokens(ids)
        special_ids = set(self.tokenizer.all_special_ids)
        mask = [token_id in special_ids for token_id in ids]
        return list(ids), list(tokens), mask

    def contextualized(self, ids: list[int]) -> np.ndarray:
        """Encoder output vectors, one row per token, float32 (count, dim)."""
        torch = self._torch
        with torch.no_grad():
            batch = torch.tensor([ids], dtype=torch.long)
            output = self.model(input_ids=batch)
        return output.last_hidden_state[0].to(torch.float32).numpy().copy()

    def raw_table(self, ids: list[int]) -> np.ndarray:
        """Embedding-table rows for ``ids`` (no contextualization), float32."""
        torch = self._torch
        with torch.no_grad():
            table = self.model.get_input_embeddings()
            rows = table(torch.tensor(ids, dtype=torch.long))
        return rows.to(torch.float32).numpy().copy()

    def pooled(self, text: str) -> np.ndarray:
        """The encoder's pooled sentence vector for ``text``, float32 (dim,)."""
        ids, _, _ = self.tokenize(text)
        torch = self._torch
        with torch.no_grad():
            batch = torch.tensor([ids], dtype=torch.long)
            output = self.model(input_ids=batch)
        return output.pooler_output[0].to(torch.float32).numpy().copy()


def export_prompt_embeddings(
    encoder: LocalTextEncoder,
    prompt_text: str,
    out_path: str,
    *,
    include_special_tokens: bool = False,
    use_raw_table: bool = False,
    manifest_path: str | None = None,
) -> ExportManifest:
    """Write one embedding vector per tokenizer token of ``prompt_text``.

    Labels are the tokenizer's token strings, in order. Special tokens
    (begin/end markers) carry no user semantics, so by default they are left
    out of the exported file; pass ``include_special_tokens=True`` to keep
    them, in which case the manifest's ``special_token_mask`` marks which rows
    they are. Vectors are the encoder's contextualized outputs unless
    ``use_raw_table`` asks for the static embedding-table rows.
    """
    ids, tokens, mask = encoder.tokenize(prompt_text)
    vectors = encoder.raw_table(ids) if use_raw_table else encoder.contextualized(ids)
    if not include_special_tokens:
        keep = [i for i, is_special in enumerate(mask) if not is_special]
        if not keep:
            raise InvalidInput(
                f"prompt {prompt_text!r} has no content tokens once special tokens are removed"
            )
        vectors = vectors[keep]
        tokens = [tokens[i] for i in keep]
        mask = None
    manifest = ExportManifest(
        encoder_id=encoder.encoder_id,
        tokenizer_id=encoder.tokenizer_id,
        prompt_text=prompt_text,
        token_strings=tokens,
        dim=encoder.hidden_size,
        includes_special_tokens=include_special_tokens,
        special_token_mask=mask,
    )
    write_embeddings(EmbeddingFile(vectors=vectors, labels=tokens), out_path)
    sidecar = manifest_path if manifest_path is not None else default_manifest_path(out_path)
    atomic_write_text(sidecar, canonical_json(manifest.to_dict()))
    return manifest


def export_concept_list(
    encoder: LocalTextEncoder,
    phrases: list[str],
    role: str,
    out_path: str,
    *,
    pooling: str = POOLING_POOLED,
    manifest_path: str | None = None,
) -> dict:
    """Write one embedding vector per concept phrase, labeled by the phrase.

    ``pooling`` picks how a multi-token phrase becomes one vector: "pooled"
    uses the encoder's pooled sentence vector; "mean-tokens" averages the
    contextualized content-token vectors. The choice is recorded in the
    manifest so downstream readers know what the rows mean.
    """
    if role not in _ROLES:
        raise InvalidInput(f"role must be one of {_ROLES}, got {role!r}")
    if pooling not in (POOLING_POOLED, POOLING_MEAN_TOKENS):
        raise InvalidInput(
            f"pooling must be {POOLING_POOLED!r} or {POOLING_MEAN_TOKENS!r}, got {pooling!r}"
        )
    if not phrases:
        raise InvalidInput("at least one concept phrase is required")
    cleaned = [str(p) for p in phrases]
    if any(not p.strip() for p in cleaned):
        raise InvalidInput("concept phrases must be non-empty")
    if len(set(cleaned)) != len(cleaned):
        raise InvalidInput("concept phrases must be unique")

    rows = []
    for phrase in cleaned:
        if pooling == POOLING_POOLED:
            rows.append(encoder.pooled(phrase))
        else:
            ids, _, mask = encoder.tokenize(phrase)
            vectors = encoder.contextualized(ids)
            content = vectors[[i for i, is_special in enumerate(mask) if not is_special]]
            if content.shape[0] == 0:
                raise InvalidInput(f"phrase {phrase!r} has no content tokens")
            rows.append(content.mean(axis=0))
    vectors = np.stack(rows).astype(np.float32)
    write_embeddings(EmbeddingFile(vectors=vectors, labels=cleaned), out_path)
    manifest = {
        "encoder_id": encoder.encoder_id,
        "tokenizer_id": encoder.tokenizer_id,
        "role": role,
        "labels": cleaned,
        "dim": encoder.hidden_size,
        "pooling": pooling,
    }
    sidecar = manifest_path if manifest_path is not None else default_manifest_path(out_path)
    atomic_write_text(sidecar, canonical_json(manifest))
    return manifest
