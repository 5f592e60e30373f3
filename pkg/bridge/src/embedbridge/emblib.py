"""Reading and writing labeled embedding files.

Two interchangeable on-disk variants carry the same payload:

* binary pair: ``name.emb`` holds raw little-endian float32 vectors in
  row-major order, and ``name.emb.json`` is its manifest with ``format``
  ("EMB1"), ``dtype`` ("f32le"), ``dim``, ``count``, and optional ``labels``;
* single JSON document: ``name.embjson`` with ``format`` "EMB1-JSON" and the
  vectors inlined as lists of numbers.

This module is a self-contained implementation of that contract so the bridge
shares files with the screening toolkit without importing it. All JSON is
written canonically (sorted keys, compact separators, UTF-8 text, trailing
newline) so identical content yields identical bytes.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InvalidInput, IoError

FORMAT_BINARY = "EMB1"
FORMAT_JSON = "EMB1-JSON"
DTYPE_TAG = "f32le"


def canonical_json(doc: object) -> str:
    """Serialize ``doc`` to the canonical JSON text used for all sidecar files."""
    return (
        json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)
        + "\n"
    )


def atomic_write_bytes(path: str, payload: bytes) -> None:
    """Write ``payload`` to ``path`` via a temp file + rename so readers never see partial files."""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    except OSError as exc:
        raise IoError(f"cannot create temporary file next to {path!r}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoError(f"failed to write {path!r}: {exc}") from exc


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


@dataclass(eq=False)
class EmbeddingFile:
    """In-memory form of one embedding file: float32 vectors plus optional labels."""

    vectors: np.ndarray
    labels: list[str] | None = field(default=None)

    def __post_init__(self) -> None:
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1 or self.vectors.shape[1] < 1:
            raise FormatError(
                f"embedding data must be a non-empty (count, dim) array, got shape {self.vectors.shape}"
            )
        if not np.all(np.isfinite(self.vectors)):
            raise FormatError("embedding data contains NaN or Inf")
        if self.labels is not None:
            self.labels = [str(label) for label in self.labels]
            if len(self.labels) != self.vectors.shape[0]:
                raise FormatError(
                    f"{len(self.labels)} labels for {self.vectors.shape[0]} vectors"
                )

    @property
    def count(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


def _classify_path(path: str) -> tuple[str, str, str]:
    """Map ``path`` to (variant, manifest_path, payload_path).

    ``variant`` is "json" for ``.embjson`` documents and "binary" for either
    half of a ``.emb`` / ``.emb.json`` pair.
    """
    if path.endswith(".embjson"):
        return "json", path, path
    if path.endswith(".emb.json"):
        return "binary", path, path[: -len(".json")]
    if path.endswith(".emb"):
        return "binary", path + ".json", path
    raise FormatError(
        f"unrecognized embedding path {path!r}: expected .emb, .emb.json, or .embjson"
    )


def _read_file(path: str) -> bytes:
    try:
        with open(path, "rb") as handle:
            return handle.read()
    except OSError as exc:
        raise IoError(f"cannot read {path!r}: {exc}") from exc


def _parse_json(raw: bytes, path: str) -> dict:
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path!r} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path!r} must hold a JSON object, got {type(doc).__name__}")
    return doc


def _common_header(doc: dict, path: str, expected_format: str) -> tuple[int, int, list[str] | None]:
    if doc.get("format") != expected_format:
        raise FormatError(
            f"{path!r} declares format {doc.get('format')!r}, expected {expected_format!r}"
        )
    dim = doc.get("dim")
    count = doc.get("count")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise FormatError(f"{path!r} has invalid dim {dim!r}")
    labels = doc.get("labels")
    if labels is not None:
        if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
            raise FormatError(f"{path!r} labels must be a list of strings")
    return dim, count, labels


def read_embeddings(path: str) -> EmbeddingFile:
    """Load an embedding file in either variant, returning float32 vectors."""
    variant, manifest_path, payload_path = _classify_path(path)
    doc = _parse_json(_read_file(manifest_path), manifest_path)
    if variant == "json":
        dim, count, labels = _common_header(doc, path, FORMAT_JSON)
        rows = doc.get("vectors")
        if not isinstance(rows, list) or not rows:
            raise FormatError(f"{path!r} must carry a non-empty 'vectors' list")
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != dim:
                raise FormatError(f"{path!r} row {i} is not a list of {dim} numbers")
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in row):
                raise FormatError(f"{path!r} row {i} contains non-numeric entries")
        if count is not None and count != len(rows):
            raise FormatError(f"{path!r} says count={count} but holds {len(rows)} vectors")
        if labels is not None and len(labels) != len(rows):
            raise FormatError(f"{path!r} has {len(labels)} labels for {len(rows)} vectors")
        vectors = np.array(rows, dtype=np.float32)
        return EmbeddingFile(vectors=vectors, labels=labels)

    dim, count, labels = _common_header(doc, manifest_path, FORMAT_BINARY)
    if doc.get("dtype") != DTYPE_TAG:
        raise FormatError(f"{manifest_path!r} declares dtype {doc.get('dtype')!r}, expected {DTYPE_TAG!r}")
    if not isinstance(count, int) or isinstance(count, bool) or count < 1:
        raise FormatError(f"{manifest_path!r} has invalid count {count!r}")
    if labels is not None and len(labels) != count:
        raise FormatError(f"{manifest_path!r} has {len(labels)} labels for count={count}")
    payload = _read_file(payload_path)
    expected = count * dim * 4
    if len(payload) != expected:
        raise FormatError(
            f"{payload_path!r} holds {len(payload)} bytes but count={count}, dim={dim} requires {expected}"
        )
    vectors = np.frombuffer(payload, dtype="<f4").reshape(count, dim).copy()
    return EmbeddingFile(vectors=vectors, labels=labels)


def write_embeddings(embedding_file: EmbeddingFile, path: str) -> None:
    """Write ``embedding_file`` to ``path``; the suffix picks the variant."""
    variant, manifest_path, payload_path = _classify_path(path)
    if variant == "json":
        doc = {
            "format": FORMAT_JSON,
            "dim": embedding_file.dim,
            "count": embedding_file.count,
            "vectors": [[float(x) for x in row] for row in embedding_file.vectors],
        }
        if embedding_file.labels is not None:
            doc["labels"] = list(embedding_file.labels)
        atomic_write_text(path, canonical_json(doc))
        return
    manifest = {
        "format": FORMAT_BINARY,
        "dtype": DTYPE_TAG,
        "dim": embedding_file.dim,
        "count": embedding_file.count,
    }
    if embedding_file.labels is not None:
        manifest["labels"] = list(embedding_file.labels)
    payload = embedding_file.vectors.astype("<f4", copy=False).tobytes(order="C")
    atomic_write_bytes(payload_path, payload)
    atomic_write_text(manifest_path, canonical_json(manifest))


def default_manifest_path(out_path: str) -> str:
    """Sidecar path used for export manifests when the caller gives none."""
    if not out_path:
        raise InvalidInput("output path must be non-empty")
    return out_path + ".manifest.json"
