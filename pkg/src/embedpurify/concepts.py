"""Concept lists, tokenized prompts, and the bit-exact embedding file formats.

Two interchangeable on-disk layouts carry the same payload:

  * Binary (`EMB1`): a JSON manifest `<name>.emb.json` holding
    ``{"format": "EMB1", "dtype": "f32le", "dim": D, "count": N,
    "labels": [...]?}`` next to a raw sidecar `<name>.emb` of exactly
    N * D * 4 bytes of little-endian float32, row-major.
  * JSON (`EMB1-JSON`): a single `<name>.embjson` document with the same
    header fields plus ``"vectors"``, floats rendered with shortest
    round-trip decimals.

Vectors are stored as float32 and promoted to float64 for numerics; that
promotion is exact, so a load/compute/save cycle that never rewrites a row
reproduces it bit for bit.

All JSON this package writes is canonical: UTF-8, sorted keys, compact
separators, no NaN/Inf, and a trailing newline, so equal documents are
equal byte strings.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidData, InvalidInput, IoError

FORMAT_BINARY = "EMB1"
FORMAT_JSON = "EMB1-JSON"
DTYPE_TAG = "f32le"

_BINARY_SUFFIX = ".emb"
_MANIFEST_SUFFIX = ".emb.json"
_JSON_SUFFIX = ".embjson"


class Role(str, Enum):
    TOXIC = "toxic"
    CLEAN = "clean"


# ---------------------------------------------------------------------------
# Canonical JSON and atomic file writes
# ---------------------------------------------------------------------------


def canonical_json(document) -> str:
    """Serialize to the canonical JSON form used for every artifact we write."""
    return (
        json.dumps(
            document,
            ensure_ascii=False,
            sort_keys=True,
            separators=(",", ":"),
            allow_nan=False,
        )
        + "\n"
    )


def atomic_write_bytes(path, data: bytes) -> None:
    """Write a file via a temp sibling + rename so readers never see a partial file."""
    target = Path(path)
    try:
        fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=target.name + ".", suffix=".tmp")
    except OSError as exc:
        raise IoError(f"cannot create file in {target.parent}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, target)
    except OSError as exc:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise IoError(f"cannot write {target}: {exc}") from exc


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Embedding files
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class EmbeddingFile:
    """In-memory image of one embedding file, either on-disk variant.

    Attributes:
        format_tag: FORMAT_BINARY or FORMAT_JSON (the variant it came from or
            is destined for).
        dtype: always "f32le".
        dim: embedding dimension, >= 1.
        count: number of vectors, >= 1.
        labels: optional list of `count` strings (token text / concept names).
        vectors: (count, dim) float32 array, finite.
    """

    format_tag: str
    dtype: str
    dim: int
    count: int
    labels: list[str] | None
    vectors: np.ndarray

    def validate(self) -> None:
        if self.format_tag not in (FORMAT_BINARY, FORMAT_JSON):
            raise FormatError(f"unknown format tag {self.format_tag!r}")
        if self.dtype != DTYPE_TAG:
            raise FormatError(f"unsupported dtype {self.dtype!r}, expected {DTYPE_TAG!r}")
        if self.dim < 1 or self.count < 1:
            raise FormatError(f"dim and count must be >= 1, got dim={self.dim} count={self.count}")
        if self.vectors.shape != (self.count, self.dim):
            raise FormatError(
                f"vector block has shape {self.vectors.shape}, expected ({self.count}, {self.dim})"
            )
        if self.labels is not None:
            if len(self.labels) != self.count:
                raise FormatError(
                    f"{len(self.labels)} labels for {self.count} vectors"
                )
            if not all(isinstance(label, str) for label in self.labels):
                raise FormatError("labels must be strings")
        if not np.all(np.isfinite(self.vectors)):
            raise InvalidData("embedding vectors contain NaN or Inf")


def make_embedding_file(vectors, labels=None, format_tag: str = FORMAT_BINARY) -> EmbeddingFile:
    """Build a validated EmbeddingFile from an array-like of row vectors."""
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInput(f"expected a 2-D (count, dim) array, got shape {arr.shape}")
    out = EmbeddingFile(
        format_tag=format_tag,
        dtype=DTYPE_TAG,
        dim=int(arr.shape[1]),
        count=int(arr.shape[0]),
        labels=list(labels) if labels is not None else None,
        vectors=arr.astype(np.float32),
    )
    out.validate()
    return out


def _classify_path(path: Path) -> tuple[str, Path, Path | None]:
    """Map a user path to (variant, manifest_or_json_path, payload_path)."""
    name = path.name
    if name.endswith(_JSON_SUFFIX):
        return "json", path, None
    if name.endswith(_MANIFEST_SUFFIX):
        return "binary", path, path.parent / name[: -len(".json")]
    if name.endswith(_BINARY_SUFFIX):
        return "binary", path.parent / (name + ".json"), path
    raise FormatError(
        f"unrecognized embedding file name {name!r}; expected *{_JSON_SUFFIX}, "
        f"*{_MANIFEST_SUFFIX}, or *{_BINARY_SUFFIX}"
    )


def _require_positive_int(doc: dict, key: str, where: str) -> int:
    value = doc.get(key)
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise FormatError(f"{where}: field {key!r} must be a positive integer, got {value!r}")
    return value


def _optional_labels(doc: dict, count: int, where: str) -> list[str] | None:
    labels = doc.get("labels")
    if labels is None:
        return None
    if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
        raise FormatError(f"{where}: labels must be a list of strings")
    if len(labels) != count:
        raise FormatError(f"{where}: {len(labels)} labels for count={count}")
    return labels


def _load_binary(manifest_path: Path, payload_path: Path) -> EmbeddingFile:
    try:
        doc = json.loads(_read_bytes(manifest_path).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{manifest_path}: manifest is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{manifest_path}: manifest must be a JSON object")
    if doc.get("format") != FORMAT_BINARY:
        raise FormatError(
            f"{manifest_path}: format is {doc.get('format')!r}, expected {FORMAT_BINARY!r}"
        )
    if doc.get("dtype") != DTYPE_TAG:
        raise FormatError(f"{manifest_path}: dtype is {doc.get('dtype')!r}, expected {DTYPE_TAG!r}")
    dim = _require_positive_int(doc, "dim", str(manifest_path))
    count = _require_positive_int(doc, "count", str(manifest_path))
    labels = _optional_labels(doc, count, str(manifest_path))

    payload = _read_bytes(payload_path)
    expected = count * dim * 4
    if len(payload) != expected:
        raise FormatError(
            f"{payload_path}: payload is {len(payload)} bytes, expected exactly {expected} "
            f"for count={count} dim={dim}"
        )
    vectors = np.frombuffer(payload, dtype="<f4").reshape(count, dim).copy()
    out = EmbeddingFile(
        format_tag=FORMAT_BINARY, dtype=DTYPE_TAG, dim=dim, count=count,
        labels=labels, vectors=vectors,
    )
    out.validate()
    return out


def _load_json(path: Path) -> EmbeddingFile:
    try:
        doc = json.loads(_read_bytes(path).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: document must be a JSON object")
    if doc.get("format") != FORMAT_JSON:
        raise FormatError(f"{path}: format is {doc.get('format')!r}, expected {FORMAT_JSON!r}")
    if doc.get("dtype", DTYPE_TAG) != DTYPE_TAG:
        raise FormatError(f"{path}: dtype is {doc.get('dtype')!r}, expected {DTYPE_TAG!r}")
    dim = _require_positive_int(doc, "dim", str(path))
    rows = doc.get("vectors")
    if not isinstance(rows, list) or not rows:
        raise FormatError(f"{path}: vectors must be a non-empty list of rows")
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != dim:
            raise FormatError(f"{path}: vectors[{i}] is not a list of length dim={dim}")
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in row):
            raise FormatError(f"{path}: vectors[{i}] contains non-numeric entries")
    count = len(rows)
    if "count" in doc and doc["count"] != count:
        raise FormatError(f"{path}: count={doc['count']} but {count} vectors present")
    labels = _optional_labels(doc, count, str(path))
    vectors = np.asarray(rows, dtype=np.float64).astype(np.float32)
    out = EmbeddingFile(
        format_tag=FORMAT_JSON, dtype=DTYPE_TAG, dim=dim, count=count,
        labels=labels, vectors=vectors,
    )
    out.validate()
    return out


def load_embeddings(path) -> EmbeddingFile:
    """Load either embedding file variant, validating structure and finiteness.

    Raises:
        IoError: missing/unreadable path.
        FormatError: wrong magic, malformed fields, or payload length mismatch.
        InvalidData: structurally valid but non-finite vectors.
    """
    p = Path(path)
    variant, manifest_path, payload_path = _classify_path(p)
    if variant == "json":
        return _load_json(manifest_path)
    return _load_binary(manifest_path, payload_path)


def save_embeddings(embedding_file: EmbeddingFile, path, variant: str = "binary") -> None:
    """Write an embedding file in the requested variant, atomically.

    The path must use the matching naming convention: `*.emb` / `*.emb.json`
    for the binary variant, `*.embjson` for the JSON variant. Round trips are
    bit-exact in both directions; empty files are rejected.
    """
    embedding_file.validate()
    p = Path(path)
    path_variant, manifest_path, payload_path = _classify_path(p)
    if variant not in ("binary", "json"):
        raise InvalidInput(f"variant must be 'binary' or 'json', got {variant!r}")
    if variant != path_variant:
        raise InvalidInput(
            f"variant {variant!r} does not match path {p.name!r}"
        )
    payload_f32 = np.ascontiguousarray(embedding_file.vectors, dtype="<f4")
    if variant == "binary":
        header = {
            "format": FORMAT_BINARY,
            "dtype": DTYPE_TAG,
            "dim": embedding_file.dim,
            "count": embedding_file.count,
        }
        if embedding_file.labels is not None:
            header["labels"] = embedding_file.labels
        atomic_write_bytes(payload_path, payload_f32.tobytes())
        atomic_write_text(manifest_path, canonical_json(header))
    else:
        doc = {
            "format": FORMAT_JSON,
            "dtype": DTYPE_TAG,
            "dim": embedding_file.dim,
            "count": embedding_file.count,
            "vectors": [[float(x) for x in row] for row in payload_f32],
        }
        if embedding_file.labels is not None:
            doc["labels"] = embedding_file.labels
        atomic_write_text(manifest_path, canonical_json(doc))


# ---------------------------------------------------------------------------
# Concept lists and prompts
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ConceptList:
    """Labeled concept embeddings for one role (toxic or clean).

    Attributes:
        role: which side of the comparison these concepts define.
        labels: unique, non-empty names, one per vector.
        vectors: (K, D) float32, K >= 1, finite.
    """

    role: Role
    labels: list[str]
    vectors: np.ndarray

    def __post_init__(self) -> None:
        self.role = Role(self.role)
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1 or self.vectors.shape[1] < 1:
            raise InvalidData(
                f"concept vectors must form a non-empty (K, D) array, got shape {self.vectors.shape}"
            )
        if not np.all(np.isfinite(self.vectors)):
            raise InvalidData("concept vectors contain NaN or Inf")
        if len(self.labels) != self.vectors.shape[0]:
            raise InvalidData(
                f"{len(self.labels)} labels for {self.vectors.shape[0]} concept vectors"
            )
        if any(not isinstance(label, str) or not label for label in self.labels):
            raise InvalidData("concept labels must be non-empty strings")
        if len(set(self.labels)) != len(self.labels):
            raise InvalidData("concept labels must be unique within a list")

    @property
    def count(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


def concept_list_from_file(embedding_file: EmbeddingFile, role: Role) -> ConceptList:
    """Interpret an embedding file as a concept list; labels are mandatory here."""
    if embedding_file.labels is None:
        raise InvalidData("concept lists require labels, but the file has none")
    return ConceptList(role=role, labels=list(embedding_file.labels), vectors=embedding_file.vectors)


def assemble_matrix(concepts: ConceptList) -> np.ndarray:
    """Stack concept vectors as the columns of a (D, K) float64 matrix, in list order."""
    return concepts.vectors.T.astype(np.float64)


@dataclass(eq=False)
class TokenizedPrompt:
    """Per-token embeddings for one prompt, promoted to float64 for numerics."""

    vectors: np.ndarray
    texts: list[str] | None = field(default=None)

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1:
            raise InvalidData(
                f"a prompt needs a non-empty (N, D) token array, got shape {self.vectors.shape}"
            )
        if not np.all(np.isfinite(self.vectors)):
            raise InvalidData("prompt embeddings contain NaN or Inf")
        if self.texts is not None and len(self.texts) != self.vectors.shape[0]:
            raise InvalidData(
                f"{len(self.texts)} token texts for {self.vectors.shape[0]} token vectors"
            )

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


def prompt_from_file(embedding_file: EmbeddingFile) -> TokenizedPrompt:
    """Interpret an embedding file as a prompt: one vector per token, labels optional."""
    return TokenizedPrompt(
        vectors=embedding_file.vectors.astype(np.float64),
        texts=list(embedding_file.labels) if embedding_file.labels is not None else None,
    )


def content_fingerprint(toxic: ConceptList, clean: ConceptList) -> str:
    """SHA-256 over both concept lists' labels and exact f32 bytes.

    Any change to any vector component or label, in either list, changes the
    digest; the hash is independent of where the lists were stored.
    """
    digest = hashlib.sha256()
    digest.update(b"CFP1")
    for concepts in (toxic, clean):
        digest.update(concepts.role.value.encode("utf-8"))
        digest.update(struct.pack("<II", concepts.count, concepts.dim))
        for label, row in zip(concepts.labels, concepts.vectors):
            encoded = label.encode("utf-8")
            digest.update(struct.pack("<I", len(encoded)))
            digest.update(encoded)
            digest.update(np.ascontiguousarray(row, dtype="<f4").tobytes())
    return digest.hexdigest()
