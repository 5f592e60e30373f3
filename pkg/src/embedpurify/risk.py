"""Token-level risk scoring against a pair of concept subspaces.

A ProjectorBundle freezes two orthogonal projectors: one onto the span of
toxic concept embeddings, one onto the span of clean concept embeddings. A
token embedding p is scored by its distance to each span,

    d_toxic = ||(I - P_toxic) p||_2      d_clean = ||(I - P_clean) p||_2

and flagged risky when it sits at least as close to the toxic span as to the
clean one (ties go to risky by default, which is the conservative choice).
A prompt is safe only when no token is risky, unsafe once the risky fraction
reaches the block threshold, and merely risky in between.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from . import subspace
from .concepts import ConceptList, Role, TokenizedPrompt, assemble_matrix, content_fingerprint
from .errors import DimensionError, InvalidData, InvalidInput

LABEL_RISKY = "risky"
LABEL_SAFE = "safe"

VERDICT_SAFE = "safe"
VERDICT_RISKY = "risky"
VERDICT_UNSAFE = "unsafe"

DEFAULT_BLOCK_THRESHOLD = 0.5


class TiePolicy(str, Enum):
    RISKY_ON_TIE = "risky-on-tie"
    SAFE_ON_TIE = "safe-on-tie"


@dataclass(eq=False)
class ProjectorBundle:
    """Everything needed to score tokens, precomputed once from concept lists.

    Attributes:
        dim: shared embedding dimension D.
        toxic_projector / clean_projector: D x D orthogonal projectors onto
            the respective concept spans, with ranks and tolerance attached.
        rel_tol: the rank tolerance both projectors were built with.
        fingerprint: SHA-256 hex digest of the source concept lists; "" when
            the provenance is unknown (e.g. an old bundle file).
        clean_centroid: mean clean concept vector, kept so purification can
            offer a non-zero fallback; None when unavailable.
    """

    dim: int
    toxic_projector: subspace.Projector
    clean_projector: subspace.Projector
    rel_tol: float
    fingerprint: str = ""
    clean_centroid: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        if self.toxic_projector.dim != self.dim or self.clean_projector.dim != self.dim:
            raise DimensionError(
                f"projector dims ({self.toxic_projector.dim}, {self.clean_projector.dim}) "
                f"do not match bundle dim {self.dim}"
            )
        if self.clean_centroid is not None:
            self.clean_centroid = np.asarray(self.clean_centroid, dtype=np.float64)
            if self.clean_centroid.shape != (self.dim,):
                raise DimensionError(
                    f"clean centroid has shape {self.clean_centroid.shape}, expected ({self.dim},)"
                )

    @property
    def toxic_rank(self) -> int:
        return self.toxic_projector.rank

    @property
    def clean_rank(self) -> int:
        return self.clean_projector.rank

    def validate(self) -> None:
        self.toxic_projector.validate()
        self.clean_projector.validate()

    @cached_property
    def purify_matrix(self) -> np.ndarray:
        """The dense purification transform I - P_toxic + P_clean (see purify)."""
        return np.eye(self.dim) - self.toxic_projector.matrix + self.clean_projector.matrix


@dataclass(eq=False)
class TokenRisk:
    """Distances and the resulting label for one token position."""

    index: int
    token_text: str | None
    d_toxic: float
    d_clean: float
    label: str


@dataclass(eq=False)
class PromptVerdict:
    verdict: str
    risky_fraction: float
    block_threshold: float


def build_bundle(
    toxic: ConceptList,
    clean: ConceptList,
    rel_tol: float = subspace.DEFAULT_REL_TOL,
) -> ProjectorBundle:
    """Build both range projectors and fingerprint the inputs.

    Raises:
        InvalidData: roles are wrong or a list is degenerate.
        DimensionError: the two lists disagree on embedding dimension.
    """
    if toxic.role is not Role.TOXIC:
        raise InvalidData(f"first concept list must have role 'toxic', got {toxic.role.value!r}")
    if clean.role is not Role.CLEAN:
        raise InvalidData(f"second concept list must have role 'clean', got {clean.role.value!r}")
    if toxic.dim != clean.dim:
        raise DimensionError(
            f"toxic concepts have dim {toxic.dim} but clean concepts have dim {clean.dim}"
        )
    toxic_p = subspace.range_projector(assemble_matrix(toxic), rel_tol)
    clean_p = subspace.range_projector(assemble_matrix(clean), rel_tol)
    centroid = clean.vectors.astype(np.float64).mean(axis=0)
    return ProjectorBundle(
        dim=toxic.dim,
        toxic_projector=toxic_p,
        clean_projector=clean_p,
        rel_tol=rel_tol,
        fingerprint=content_fingerprint(toxic, clean),
        clean_centroid=centroid,
    )


def token_distances(bundle: ProjectorBundle, token: np.ndarray) -> tuple[float, float]:
    """Distances from one token embedding to the toxic and clean spans.

    Both distances lie in [0, ||p||]; a distance is (numerically) zero exactly
    when p lies inside the corresponding span.
    """
    p = np.asarray(token, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] != bundle.dim:
        raise DimensionError(
            f"token embedding has shape {p.shape}, expected ({bundle.dim},)"
        )
    d_toxic = float(np.linalg.norm(p - bundle.toxic_projector.matrix @ p))
    d_clean = float(np.linalg.norm(p - bundle.clean_projector.matrix @ p))
    return d_toxic, d_clean


def classify_token(
    d_toxic: float,
    d_clean: float,
    tie_policy: TiePolicy = TiePolicy.RISKY_ON_TIE,
) -> str:
    """Label a token from its two distances; only exact ties consult the policy."""
    if d_toxic < d_clean:
        return LABEL_RISKY
    if d_toxic > d_clean:
        return LABEL_SAFE
    return LABEL_RISKY if TiePolicy(tie_policy) is TiePolicy.RISKY_ON_TIE else LABEL_SAFE


def classify_prompt(
    labels: list[str],
    block_threshold: float = DEFAULT_BLOCK_THRESHOLD,
) -> PromptVerdict:
    """Aggregate per-token labels into a prompt verdict.

    safe: no risky token. unsafe: risky fraction >= block_threshold.
    risky: anything in between.
    """
    if not labels:
        raise InvalidData("cannot classify an empty prompt")
    if not (0.0 < block_threshold <= 1.0):
        raise InvalidInput(f"block_threshold must be in (0, 1], got {block_threshold}")
    for label in labels:
        if label not in (LABEL_RISKY, LABEL_SAFE):
            raise InvalidInput(f"unknown token label {label!r}")
    fraction = sum(1 for label in labels if label == LABEL_RISKY) / len(labels)
    if fraction == 0.0:
        verdict = VERDICT_SAFE
    elif fraction >= block_threshold:
        verdict = VERDICT_UNSAFE
    else:
        verdict = VERDICT_RISKY
    return PromptVerdict(verdict=verdict, risky_fraction=fraction, block_threshold=block_threshold)


def assess_prompt(
    bundle: ProjectorBundle,
    prompt: TokenizedPrompt,
    tie_policy: TiePolicy = TiePolicy.RISKY_ON_TIE,
    block_threshold: float = DEFAULT_BLOCK_THRESHOLD,
) -> tuple[list[TokenRisk], PromptVerdict]:
    """Score every token of a prompt and fold the labels into a verdict."""
    if prompt.dim != bundle.dim:
        raise DimensionError(
            f"prompt embeddings have dim {prompt.dim} but the bundle expects {bundle.dim}"
        )
    tokens: list[TokenRisk] = []
    for i in range(len(prompt)):
        d_toxic, d_clean = token_distances(bundle, prompt.vectors[i])
        label = classify_token(d_toxic, d_clean, tie_policy)
        text = prompt.texts[i] if prompt.texts is not None else None
        tokens.append(
            TokenRisk(index=i, token_text=text, d_toxic=d_toxic, d_clean=d_clean, label=label)
        )
    verdict = classify_prompt([t.label for t in tokens], block_threshold)
    return tokens, verdict
