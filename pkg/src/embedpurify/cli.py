"""Command-line front end: build a projector bundle, classify, purify, embed.

Subcommands:
  build      compile toxic + clean concept files into a .pgb1 bundle
  classify   score a prompt embedding file against a bundle, write a report
  purify     classify, then substitute purified vectors for risky tokens
  embed-toy  deterministically embed a text into an EMB1-JSON prompt file

Exit codes: 0 success / safe prompt, 1 I/O or malformed input, 2 embedding
dimension mismatch, 3 risky prompt, 4 unsafe (blocked) prompt. All file
writes happen via temp-file + rename, so a failing command leaves no partial
outputs behind.
"""

from __future__ import annotations

import argparse
import struct
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .concepts import (
    Role,
    atomic_write_bytes,
    atomic_write_text,
    canonical_json,
    concept_list_from_file,
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
from .purify import PurifyConfig, PurifyMode, ZeroFallback, purify_prompt
from .risk import (
    DEFAULT_BLOCK_THRESHOLD,
    VERDICT_RISKY,
    VERDICT_SAFE,
    ProjectorBundle,
    TiePolicy,
    assess_prompt,
    build_bundle,
)
from .subspace import DEFAULT_REL_TOL, Projector
from .toyembed import embed_tokens, lexicon_from_file

EXIT_OK = 0
EXIT_IO = 1
EXIT_DIMENSION = 2
EXIT_RISKY = 3
EXIT_UNSAFE = 4

REPORT_SCHEMA_VERSION = "1"

_BUNDLE_MAGIC = b"PGB1"


@dataclass(frozen=True)
class RunConfig:
    """Every knob a run can turn, echoed verbatim into each report."""

    rel_tol: float = DEFAULT_REL_TOL
    tie_policy: TiePolicy = TiePolicy.RISKY_ON_TIE
    block_threshold: float = DEFAULT_BLOCK_THRESHOLD
    purify: PurifyConfig = field(default_factory=PurifyConfig)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "rel_tol": self.rel_tol,
            "tie_policy": self.tie_policy.value,
            "block_threshold": self.block_threshold,
            "purify": {
                "mode": self.purify.mode.value,
                "preserve_norm": self.purify.preserve_norm,
                "zero_fallback": self.purify.zero_fallback.value,
            },
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# Bundle file format (PGB1)
# ---------------------------------------------------------------------------
#
# Little-endian throughout:
#   magic "PGB1" | u32 dim | u32 toxic_rank | u32 clean_rank | f64 rel_tol |
#   u32 fingerprint_len | fingerprint utf-8 |
#   dim*dim f32 toxic projector (row-major) | dim*dim f32 clean projector |
#   u8 has_centroid | [dim f32 clean centroid]


def save_bundle(bundle: ProjectorBundle, path) -> None:
    """Serialize a bundle to its binary file, atomically."""
    fingerprint = bundle.fingerprint.encode("utf-8")
    parts = [
        _BUNDLE_MAGIC,
        struct.pack(
            "<IIId", bundle.dim, bundle.toxic_rank, bundle.clean_rank, bundle.rel_tol
        ),
        struct.pack("<I", len(fingerprint)),
        fingerprint,
        np.ascontiguousarray(bundle.toxic_projector.matrix, dtype="<f4").tobytes(),
        np.ascontiguousarray(bundle.clean_projector.matrix, dtype="<f4").tobytes(),
    ]
    if bundle.clean_centroid is not None:
        parts.append(b"\x01")
        parts.append(np.ascontiguousarray(bundle.clean_centroid, dtype="<f4").tobytes())
    else:
        parts.append(b"\x00")
    atomic_write_bytes(path, b"".join(parts))


def load_bundle(path) -> ProjectorBundle:
    """Read a bundle file back; projector invariants are re-checked on load."""
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read bundle {p}: {exc}") from exc

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(raw):
            raise FormatError(f"{p}: truncated bundle while reading {what}")
        chunk = raw[offset : offset + n]
        offset += n
        return chunk

    offset = 0
    if take(4, "magic") != _BUNDLE_MAGIC:
        raise FormatError(f"{p}: not a {_BUNDLE_MAGIC.decode()} bundle")
    dim, toxic_rank, clean_rank, rel_tol = struct.unpack("<IIId", take(20, "header"))
    if dim < 1:
        raise FormatError(f"{p}: dim must be >= 1, got {dim}")
    (fp_len,) = struct.unpack("<I", take(4, "fingerprint length"))
    fingerprint = take(fp_len, "fingerprint").decode("utf-8")
    block = dim * dim * 4
    toxic_m = np.frombuffer(take(block, "toxic projector"), dtype="<f4")
    clean_m = np.frombuffer(take(block, "clean projector"), dtype="<f4")
    (has_centroid,) = struct.unpack("<B", take(1, "centroid flag"))
    centroid = None
    if has_centroid:
        centroid = np.frombuffer(take(dim * 4, "clean centroid"), dtype="<f4").astype(np.float64)
    if offset != len(raw):
        raise FormatError(f"{p}: {len(raw) - offset} trailing bytes after bundle payload")

    bundle = ProjectorBundle(
        dim=dim,
        toxic_projector=Projector(
            matrix=toxic_m.astype(np.float64).reshape(dim, dim),
            rank=toxic_rank,
            tolerance_used=rel_tol,
        ),
        clean_projector=Projector(
            matrix=clean_m.astype(np.float64).reshape(dim, dim),
            rank=clean_rank,
            tolerance_used=rel_tol,
        ),
        rel_tol=rel_tol,
        fingerprint=fingerprint,
        clean_centroid=centroid,
    )
    bundle.validate()
    return bundle


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def build_report(config: RunConfig, bundle: ProjectorBundle, tokens, verdict) -> dict:
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": config.to_dict(),
        "bundle_fingerprint": bundle.fingerprint,
        "tokens": [
            {
                "index": t.index,
                "token_text": t.token_text,
                "d_toxic": t.d_toxic,
                "d_clean": t.d_clean,
                "label": t.label,
            }
            for t in tokens
        ],
        "verdict": {
            "verdict": verdict.verdict,
            "risky_fraction": verdict.risky_fraction,
            "block_threshold": verdict.block_threshold,
        },
    }


def _load_bundle_checked(path) -> ProjectorBundle:
    bundle = load_bundle(path)
    if not bundle.fingerprint:
        print(
            "warning: bundle carries no concept fingerprint; provenance unknown",
            file=sys.stderr,
        )
    return bundle


def _verdict_exit_code(verdict: str) -> int:
    if verdict == VERDICT_SAFE:
        return EXIT_OK
    if verdict == VERDICT_RISKY:
        return EXIT_RISKY
    return EXIT_UNSAFE


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_build(args: argparse.Namespace) -> int:
    toxic = concept_list_from_file(load_embeddings(args.toxic), Role.TOXIC)
    clean = concept_list_from_file(load_embeddings(args.clean), Role.CLEAN)
    bundle = build_bundle(toxic, clean, rel_tol=args.rel_tol)
    save_bundle(bundle, args.out)
    print(
        f"bundle written: dim={bundle.dim} toxic_rank={bundle.toxic_rank} "
        f"clean_rank={bundle.clean_rank} fingerprint={bundle.fingerprint[:12]}..."
    )
    return EXIT_OK


def _make_run_config(args: argparse.Namespace, bundle: ProjectorBundle) -> RunConfig:
    purify_cfg = PurifyConfig(
        mode=PurifyMode(getattr(args, "mode", PurifyMode.SUM.value)),
        preserve_norm=bool(getattr(args, "preserve_norm", False)),
        zero_fallback=ZeroFallback(getattr(args, "zero_fallback", ZeroFallback.KEEP.value)),
    )
    return RunConfig(
        rel_tol=bundle.rel_tol,
        tie_policy=TiePolicy(args.tie_policy),
        block_threshold=args.block_threshold,
        purify=purify_cfg,
        seed=getattr(args, "seed", 0),
    )


def cmd_classify(args: argparse.Namespace) -> int:
    bundle = _load_bundle_checked(args.bundle)
    prompt = prompt_from_file(load_embeddings(args.prompt))
    config = _make_run_config(args, bundle)
    tokens, verdict = assess_prompt(
        bundle, prompt, tie_policy=config.tie_policy, block_threshold=config.block_threshold
    )
    report = build_report(config, bundle, tokens, verdict)
    atomic_write_text(args.report, canonical_json(report))
    print(f"verdict: {verdict.verdict} (risky_fraction={verdict.risky_fraction:.4f})")
    return _verdict_exit_code(verdict.verdict)


def cmd_purify(args: argparse.Namespace) -> int:
    bundle = _load_bundle_checked(args.bundle)
    embedding_file = load_embeddings(args.prompt)
    prompt = prompt_from_file(embedding_file)
    config = _make_run_config(args, bundle)
    tokens, verdict = assess_prompt(
        bundle, prompt, tie_policy=config.tie_policy, block_threshold=config.block_threshold
    )
    report = build_report(config, bundle, tokens, verdict)
    atomic_write_text(args.report, canonical_json(report))
    if verdict.verdict == VERDICT_RISKY or verdict.verdict == VERDICT_SAFE:
        purified = purify_prompt(bundle, prompt, tokens, config.purify)
        # Start from the original f32 rows so untouched tokens stay bit-identical.
        out_vectors = embedding_file.vectors.copy()
        for i in range(len(purified)):
            if purified.substituted[i]:
                out_vectors[i] = purified.vectors[i].astype(np.float32)
        variant = "json" if str(args.out).endswith(".embjson") else "binary"
        tag = "EMB1-JSON" if variant == "json" else "EMB1"
        out_file = make_embedding_file(out_vectors, labels=embedding_file.labels, format_tag=tag)
        save_embeddings(out_file, args.out, variant=variant)
        n_sub = int(purified.substituted.sum())
        print(f"verdict: {verdict.verdict}; substituted {n_sub}/{len(purified)} tokens")
    else:
        print(f"verdict: {verdict.verdict}; prompt blocked, no embedding written")
    return _verdict_exit_code(verdict.verdict)


def cmd_embed_toy(args: argparse.Namespace) -> int:
    lexicon = None
    if args.lexicon is not None:
        lexicon = lexicon_from_file(load_embeddings(args.lexicon))
    prompt = embed_tokens(args.text, dim=args.dim, seed=args.seed, lexicon=lexicon)
    out_file = make_embedding_file(prompt.vectors, labels=prompt.texts, format_tag="EMB1-JSON")
    save_embeddings(out_file, args.out, variant="json")
    print(f"embedded {len(prompt)} tokens at dim={args.dim} seed={args.seed}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_classify_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--bundle", required=True, help="projector bundle (.pgb1)")
    sub.add_argument("--prompt", required=True, help="prompt embedding file")
    sub.add_argument("--report", required=True, help="where to write the risk report JSON")
    sub.add_argument(
        "--tie-policy",
        choices=[p.value for p in TiePolicy],
        default=TiePolicy.RISKY_ON_TIE.value,
        help="label for exact distance ties (default: %(default)s)",
    )
    sub.add_argument(
        "--block-threshold",
        type=float,
        default=DEFAULT_BLOCK_THRESHOLD,
        help="risky fraction at which the whole prompt is blocked (default: %(default)s)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embedpurify",
        description="Subspace-based risk screening and purification for prompt embeddings.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    p_build = commands.add_parser("build", help="compile concept files into a projector bundle")
    p_build.add_argument("--toxic", required=True, help="toxic concept embedding file")
    p_build.add_argument("--clean", required=True, help="clean concept embedding file")
    p_build.add_argument("--out", required=True, help="output bundle path (.pgb1)")
    p_build.add_argument(
        "--rel-tol",
        type=float,
        default=DEFAULT_REL_TOL,
        dest="rel_tol",
        help="relative singular-value cutoff for rank decisions (default: %(default)s)",
    )
    p_build.set_defaults(func=cmd_build)

    p_classify = commands.add_parser("classify", help="score a prompt and write a risk report")
    _add_classify_args(p_classify)
    p_classify.set_defaults(func=cmd_classify)

    p_purify = commands.add_parser(
        "purify", help="classify, then rewrite risky tokens via the purification transform"
    )
    _add_classify_args(p_purify)
    p_purify.add_argument("--out", required=True, help="output embedding file (.emb or .embjson)")
    p_purify.add_argument(
        "--mode",
        choices=[m.value for m in PurifyMode],
        default=PurifyMode.SUM.value,
        help="purification arithmetic (default: %(default)s)",
    )
    p_purify.add_argument(
        "--preserve-norm",
        action="store_true",
        dest="preserve_norm",
        help="rescale purified tokens back to their original norm",
    )
    p_purify.add_argument(
        "--zero-fallback",
        choices=[z.value for z in ZeroFallback],
        default=ZeroFallback.KEEP.value,
        dest="zero_fallback",
        help="what to substitute when purification collapses a token to zero",
    )
    p_purify.set_defaults(func=cmd_purify)

    p_embed = commands.add_parser("embed-toy", help="deterministically embed text for fixtures")
    p_embed.add_argument("--text", required=True, help="prompt text (whitespace tokenized)")
    p_embed.add_argument("--dim", type=int, required=True, help="embedding dimension (>= 2)")
    p_embed.add_argument("--out", required=True, help="output prompt file (.embjson)")
    p_embed.add_argument("--seed", type=int, default=0, help="PRNG stream selector")
    p_embed.add_argument("--lexicon", default=None, help="optional anchor lexicon file")
    p_embed.set_defaults(func=cmd_embed_toy)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DimensionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except (IoError, FormatError, InvalidData, InvalidInput, NumericalFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ToolkitError as exc:  # pragma: no cover - future error classes
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
