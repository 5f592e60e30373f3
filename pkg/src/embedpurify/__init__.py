"""embedpurify: subspace-based risk screening and purification for embeddings.

The pipeline in one paragraph: two labeled concept lists (toxic and clean)
are compiled into a pair of orthogonal range projectors. Each token embedding
of a prompt is scored by its distance to the two spans and flagged risky when
it sits at least as close to the toxic span as to the clean one. Risky tokens
are rewritten by the dual-space transform (I - P_toxic + P_clean); safe
tokens pass through untouched. Everything is deterministic and file-driven,
so runs can be reproduced byte for byte.
"""

__version__ = "0.1.0"

from .concepts import (
    ConceptList,
    EmbeddingFile,
    Role,
    TokenizedPrompt,
    assemble_matrix,
    concept_list_from_file,
    content_fingerprint,
    load_embeddings,
    make_embedding_file,
    prompt_from_file,
    save_embeddings,
)
from .errors import (
    DimensionError,
    FormatError,
    InvalidData,
    InvalidInput,
    IoError,
    NumericalFailure,
    ToolkitError,
)
from .purify import (
    PurifiedPrompt,
    PurifyConfig,
    PurifyMode,
    ZeroFallback,
    purify_embedding,
    purify_prompt,
)
from .risk import (
    ProjectorBundle,
    PromptVerdict,
    TiePolicy,
    TokenRisk,
    assess_prompt,
    build_bundle,
    classify_prompt,
    classify_token,
    token_distances,
)
from .subspace import (
    Projector,
    SvdResult,
    complement_projector,
    numerical_rank,
    oracle_projector,
    pseudoinverse,
    range_projector,
    svd,
)
from .toyembed import ToyLexicon, embed_tokens, lexicon_from_file, tokenize

__all__ = [
    "__version__",
    "ConceptList",
    "EmbeddingFile",
    "Role",
    "TokenizedPrompt",
    "assemble_matrix",
    "concept_list_from_file",
    "content_fingerprint",
    "load_embeddings",
    "make_embedding_file",
    "prompt_from_file",
    "save_embeddings",
    "ToolkitError",
    "InvalidInput",
    "NumericalFailure",
    "FormatError",
    "InvalidData",
    "DimensionError",
    "IoError",
    "PurifiedPrompt",
    "PurifyConfig",
    "PurifyMode",
    "ZeroFallback",
    "purify_embedding",
    "purify_prompt",
    "ProjectorBundle",
    "PromptVerdict",
    "TiePolicy",
    "TokenRisk",
    "assess_prompt",
    "build_bundle",
    "classify_prompt",
    "classify_token",
    "token_distances",
    "Projector",
    "SvdResult",
    "complement_projector",
    "numerical_rank",
    "oracle_projector",
    "pseudoinverse",
    "range_projector",
    "svd",
    "ToyLexicon",
    "embed_tokens",
    "lexicon_from_file",
    "tokenize",
]
