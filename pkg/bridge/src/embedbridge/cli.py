"""Command-line interface for the model bridge.

Subcommands:

* ``make-assets``     create the local text encoder and image pipeline
* ``export-prompt``   write per-token embeddings of a prompt to an embedding file
* ``export-concepts`` write one pooled vector per concept phrase
* ``generate``        condition the image pipeline on an embedding file

Exit codes: 0 success, 1 setup/input/format/I-O errors, 2 conditioning shape
mismatch.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import assets
from .encoder import (
    POOLING_MEAN_TOKENS,
    POOLING_POOLED,
    LocalTextEncoder,
    export_concept_list,
    export_prompt_embeddings,
)
from .errors import BridgeError, ShapeMismatch
from .pipeline import LatentPipeline, inject_and_generate

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SHAPE = 2

ENCODER_SUBDIR = "encoder"
PIPELINE_SUBDIR = "pipeline"


def cmd_make_assets(args: argparse.Namespace) -> int:
    encoder_dir = os.path.join(args.out, ENCODER_SUBDIR)
    pipeline_dir = os.path.join(args.out, PIPELINE_SUBDIR)
    encoder_id = assets.create_text_encoder(encoder_dir, seed=args.seed)
    pipeline_id = assets.create_pipeline(pipeline_dir, seed=args.seed)
    print(f"encoder ready: {encoder_dir} ({encoder_id})")
    print(f"pipeline ready: {pipeline_dir} ({pipeline_id})")
    return EXIT_OK


def cmd_export_prompt(args: argparse.Namespace) -> int:
    encoder = LocalTextEncoder.load(args.encoder)
    manifest = export_prompt_embeddings(
        encoder,
        args.text,
        args.out,
        include_special_tokens=args.include_special_tokens,
        use_raw_table=args.raw_table,
        manifest_path=args.manifest,
    )
    print(
        f"exported {len(manifest.token_strings)} token vectors (dim={manifest.dim}) to {args.out}"
    )
    return EXIT_OK


def cmd_export_concepts(args: argparse.Namespace) -> int:
    encoder = LocalTextEncoder.load(args.encoder)
    manifest = export_concept_list(
        encoder,
        args.phrase,
        args.role,
        args.out,
        pooling=args.pooling,
        manifest_path=args.manifest,
    )
    print(
        f"exported {len(manifest['labels'])} {args.role} concept vectors "
        f"(dim={manifest['dim']}, pooling={manifest['pooling']}) to {args.out}"
    )
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    pipeline = LatentPipeline.load(args.pipeline)
    path = inject_and_generate(
        pipeline, args.embeddings, args.out, seed=args.seed, steps=args.steps
    )
    print(f"image written: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embedbridge",
        description="Bridge text encoders and an image pipeline to embedding files.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    make = subparsers.add_parser("make-assets", help="create the local encoder and pipeline")
    make.add_argument("--out", required=True, help="directory to create assets under")
    make.add_argument("--seed", type=int, default=assets.DEFAULT_SEED, help="weight seed")
    make.set_defaults(func=cmd_make_assets)

    prompt = subparsers.add_parser("export-prompt", help="export per-token prompt embeddings")
    prompt.add_argument("--encoder", required=True, help="local encoder directory")
    prompt.add_argument("--text", required=True, help="prompt text to encode")
    prompt.add_argument("--out", required=True, help="output .emb/.emb.json/.embjson path")
    prompt.add_argument("--manifest", default=None, help="manifest path (default: <out>.manifest.json)")
    prompt.add_argument(
        "--include-special-tokens",
        action="store_true",
        help="keep begin/end marker tokens in the export (marked in the manifest)",
    )
    prompt.add_argument(
        "--raw-table",
        action="store_true",
        help="export static embedding-table rows instead of contextualized outputs",
    )
    prompt.set_defaults(func=cmd_export_prompt)

    concepts = subparsers.add_parser("export-concepts", help="export pooled concept vectors")
    concepts.add_argument("--encoder", required=True, help="local encoder directory")
    concepts.add_argument("--role", required=True, choices=["toxic", "clean"], help="concept role")
    concepts.add_argument(
        "--phrase", action="append", required=True, help="concept phrase (repeatable)"
    )
    concepts.add_argument("--out", required=True, help="output .emb/.emb.json/.embjson path")
    concepts.add_argument(
        "--pooling",
        choices=[POOLING_POOLED, POOLING_MEAN_TOKENS],
        default=POOLING_POOLED,
        help="how a phrase becomes one vector",
    )
    concepts.add_argument("--manifest", default=None, help="manifest path (default: <out>.manifest.json)")
    concepts.set_defaults(func=cmd_export_concepts)

    generate = subparsers.add_parser("generate", help="generate an image from an embedding file")
    generate.add_argument("--pipeline", required=True, help="local pipeline directory")
    generate.add_argument("--embeddings", required=True, help="conditioning embedding file")
    generate.add_argument("--out", required=True, help="output PNG path")
    generate.add_argument("--seed", type=int, default=0, help="noise seed")
    generate.add_argument("--steps", type=int, default=None, help="denoising steps")
    generate.set_defaults(func=cmd_generate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ShapeMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except BridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
