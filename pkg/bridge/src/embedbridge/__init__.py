"""Bridge between local text encoders, embedding files, and an image pipeline.

Exports per-token prompt embeddings and pooled concept vectors to the shared
embedding file formats, and injects (possibly purified) embedding files back
into a small latent-diffusion pipeline as the conditioning tensor.
"""

from .assets import DEFAULT_SEED, create_pipeline, create_text_encoder
from .emblib import EmbeddingFile, read_embeddings, write_embeddings
from .encoder import (
    POOLING_MEAN_TOKENS,
    POOLING_POOLED,
    ExportManifest,
    LocalTextEncoder,
    export_concept_list,
    export_prompt_embeddings,
)
from .errors import (
    BridgeError,
    EncoderUnavailable,
    FormatError,
    InvalidInput,
    IoError,
    ShapeMismatch,
)
from .pipeline import LatentPipeline, inject_and_generate

__version__ = "0.1.0"

__all__ = [
    "BridgeError",
    "DEFAULT_SEED",
    "EmbeddingFile",
    "EncoderUnavailable",
    "ExportManifest",
    "FormatError",
    "InvalidInput",
    "IoError",
    "LatentPipeline",
    "LocalTextEncoder",
    "POOLING_MEAN_TOKENS",
    "POOLING_POOLED",
    "ShapeMismatch",
    "__version__",
    "create_pipeline",
    "create_text_encoder",
    "export_concept_list",
    "export_prompt_embeddings",
    "inject_and_generate",
    "read_embeddings",
    "write_embeddings",
]
