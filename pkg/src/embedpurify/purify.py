"""Dual-space purification of risky token embeddings.

The transform removes whatever part of a token lies in the toxic concept span
and reinforces whatever part lies in the clean concept span:

    out = (I - P_toxic) p  +  P_clean p

With `sum` mode (the default) a token already inside the clean span comes out
doubled — both terms contribute the full vector. That amplification is part
of the method, not a bug; `averaged` mode halves the sum for callers who want
the purified token on the original scale instead. The transform is linear, so
it is precomputed once per bundle as a dense matrix and applied per token.

Purification is selective: tokens labeled safe pass through bit-identical,
and only tokens labeled risky are substituted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .concepts import TokenizedPrompt
from .errors import DimensionError, InvalidData, InvalidInput
from .risk import LABEL_RISKY, LABEL_SAFE, ProjectorBundle, TokenRisk

# An output this small relative to the input counts as collapsed to zero.
ZERO_NORM_REL_TOL = 1e-9


class PurifyMode(str, Enum):
    SUM = "sum"
    AVERAGED = "averaged"


class ZeroFallback(str, Enum):
    KEEP = "keep"
    CLEAN_CENTROID = "clean_centroid"


@dataclass(frozen=True)
class PurifyConfig:
    """How purified vectors are post-processed.

    Attributes:
        mode: SUM applies the transform as-is; AVERAGED halves the result.
        preserve_norm: rescale a non-zero output back to the input norm.
        zero_fallback: what to do when the output collapses to (near) zero —
            KEEP returns it unchanged, CLEAN_CENTROID substitutes the mean
            clean concept vector rescaled to the input norm.
    """

    mode: PurifyMode = PurifyMode.SUM
    preserve_norm: bool = False
    zero_fallback: ZeroFallback = ZeroFallback.KEEP

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", PurifyMode(self.mode))
        object.__setattr__(self, "zero_fallback", ZeroFallback(self.zero_fallback))


@dataclass(eq=False)
class PurifiedPrompt:
    """The purified token matrix plus, per token, whether it was substituted."""

    vectors: np.ndarray
    substituted: np.ndarray
    texts: list[str] | None = field(default=None)

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.substituted = np.asarray(self.substituted, dtype=bool)
        if self.vectors.ndim != 2 or self.substituted.shape != (self.vectors.shape[0],):
            raise InvalidData("purified vectors and substitution flags are misaligned")

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


def purify_embedding(
    bundle: ProjectorBundle,
    token: np.ndarray,
    config: PurifyConfig = PurifyConfig(),
) -> np.ndarray:
    """Apply the dual-space transform to a single token embedding.

    Args:
        bundle: projectors to purify against.
        token: (D,) embedding.
        config: post-processing options; defaults keep the raw transform.

    Returns:
        (D,) float64 purified embedding.

    Raises:
        DimensionError: token length does not match the bundle.
        InvalidData: CLEAN_CENTROID fallback requested but the bundle carries
            no clean centroid.
    """
    p = np.asarray(token, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] != bundle.dim:
        raise DimensionError(f"token embedding has shape {p.shape}, expected ({bundle.dim},)")
    out = bundle.purify_matrix @ p
    if config.mode is PurifyMode.AVERAGED:
        out = out / 2.0
    in_norm = float(np.linalg.norm(p))
    out_norm = float(np.linalg.norm(out))
    if out_norm <= ZERO_NORM_REL_TOL * max(1.0, in_norm):
        if config.zero_fallback is ZeroFallback.CLEAN_CENTROID:
            if bundle.clean_centroid is None:
                raise InvalidData(
                    "zero_fallback=clean_centroid needs a bundle with a clean centroid"
                )
            centroid = bundle.clean_centroid
            centroid_norm = float(np.linalg.norm(centroid))
            if centroid_norm == 0.0:
                return np.zeros_like(p)
            return centroid * (in_norm / centroid_norm)
        return out
    if config.preserve_norm:
        out = out * (in_norm / out_norm)
    return out


def purify_prompt(
    bundle: ProjectorBundle,
    prompt: TokenizedPrompt,
    risks: list[TokenRisk],
    config: PurifyConfig = PurifyConfig(),
) -> PurifiedPrompt:
    """Substitute purified vectors for risky tokens; copy safe tokens exactly.

    `risks` must align index-for-index with the prompt (as produced by
    `risk.assess_prompt` on the same prompt).
    """
    if prompt.dim != bundle.dim:
        raise DimensionError(
            f"prompt embeddings have dim {prompt.dim} but the bundle expects {bundle.dim}"
        )
    if len(risks) != len(prompt):
        raise InvalidData(f"{len(risks)} risk entries for a {len(prompt)}-token prompt")
    out = prompt.vectors.copy()
    substituted = np.zeros(len(prompt), dtype=bool)
    for i, entry in enumerate(risks):
        if entry.index != i:
            raise InvalidData(f"risk entry {i} carries index {entry.index}; lists are misaligned")
        if entry.label == LABEL_RISKY:
            out[i] = purify_embedding(bundle, prompt.vectors[i], config)
            substituted[i] = True
        elif entry.label != LABEL_SAFE:
            raise InvalidData(f"unknown token label {entry.label!r}")
    return PurifiedPrompt(vectors=out, substituted=substituted, texts=prompt.texts)
