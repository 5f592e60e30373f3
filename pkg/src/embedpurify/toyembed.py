"""A tiny deterministic text embedder for fixtures, demos, and pipeline tests.

This is NOT a learned model. Tokens are lowercased whitespace-split words.
Each token either hits a lexicon anchor (an exact stored unit vector) or gets
a pseudo-random unit vector derived only from (token text, seed, dim):

  * hash: the first 8 bytes of SHA-256(utf-8 token), read big-endian.
  * stream: splitmix64 seeded with `hash XOR (seed * 0x9E3779B97F4A7C15 mod 2^64)`.
  * components: each 64-bit draw maps to (z >> 11) * 2^-53 in [0, 1), then to
    2u - 1 in [-1, 1); both steps are exact in float64.
  * normalization: math.fsum of squares and math.sqrt, both correctly rounded,
    then one division per component.

Every step is integer math or correctly-rounded float math, so the same
(token, seed, dim) yields bit-identical vectors across runs and platforms.
Changing the hash or generator would silently invalidate stored fixtures, so
treat the scheme above as frozen: version any change in the file labels.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .concepts import EmbeddingFile, TokenizedPrompt
from .errors import DimensionError, InvalidData, InvalidInput

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

UNIT_NORM_TOL = 1e-6


@dataclass(eq=False)
class ToyLexicon:
    """Anchor vectors for chosen tokens; anchors must be unit norm."""

    dim: int
    anchors: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        for token, vec in self.anchors.items():
            v = np.asarray(vec, dtype=np.float64)
            if v.shape != (self.dim,):
                raise DimensionError(
                    f"lexicon anchor {token!r} has shape {v.shape}, expected ({self.dim},)"
                )
            norm = float(np.linalg.norm(v))
            if abs(norm - 1.0) > UNIT_NORM_TOL:
                raise InvalidData(f"lexicon anchor {token!r} has norm {norm}, expected 1")
            self.anchors[token] = v


def lexicon_from_file(embedding_file: EmbeddingFile) -> ToyLexicon:
    """Build a lexicon from an embedding file whose labels are the anchor tokens."""
    if embedding_file.labels is None:
        raise InvalidData("a lexicon file needs labels naming the anchored tokens")
    anchors = {
        label: row.astype(np.float64)
        for label, row in zip(embedding_file.labels, embedding_file.vectors)
    }
    if len(anchors) != embedding_file.count:
        raise InvalidData("lexicon labels must be unique")
    return ToyLexicon(dim=embedding_file.dim, anchors=anchors)


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return state, z


def _token_seed(token: str, seed: int) -> int:
    token_hash = int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "big")
    return token_hash ^ ((seed % (1 << 64)) * _GOLDEN & _MASK64)


def _random_unit_vector(token: str, dim: int, seed: int) -> np.ndarray:
    state = _token_seed(token, seed)
    components = []
    for _ in range(dim):
        state, z = _splitmix64(state)
        u = (z >> 11) * 2.0**-53  # exact: 53-bit integer scaled by a power of two
        components.append(2.0 * u - 1.0)
    norm = math.sqrt(math.fsum(c * c for c in components))
    if norm < 1e-12:  # astronomically unlikely; keep the contract anyway
        components[0] = 1.0
        norm = 1.0
    return np.array([c / norm for c in components], dtype=np.float64)


def tokenize(text: str) -> list[str]:
    """Lowercased whitespace tokenization; the only splitting this embedder does."""
    return text.lower().split()


def embed_tokens(
    text: str,
    dim: int,
    seed: int = 0,
    lexicon: ToyLexicon | None = None,
) -> TokenizedPrompt:
    """Embed a text deterministically, one unit vector per whitespace token.

    Args:
        text: raw prompt text; must contain at least one token.
        dim: embedding dimension, >= 2.
        seed: stream selector for non-anchored tokens.
        lexicon: optional anchors consulted before the pseudo-random path.

    Returns:
        TokenizedPrompt with (N, dim) unit-norm vectors and the token texts.

    Raises:
        InvalidInput: dim < 2.
        InvalidData: no tokens survive tokenization.
        DimensionError: lexicon dimension does not match `dim`.
    """
    if dim < 2:
        raise InvalidInput(f"dim must be >= 2, got {dim}")
    tokens = tokenize(text)
    if not tokens:
        raise InvalidData("text contains no tokens")
    if lexicon is not None and lexicon.dim != dim:
        raise DimensionError(f"lexicon dim {lexicon.dim} does not match requested dim {dim}")
    rows = []
    for token in tokens:
        if lexicon is not None and token in lexicon.anchors:
            rows.append(lexicon.anchors[token].copy())
        else:
            rows.append(_random_unit_vector(token, dim, seed))
    return TokenizedPrompt(vectors=np.vstack(rows), texts=tokens)
