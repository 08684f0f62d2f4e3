"""Vector-based metrics over precomputed embeddings.

The engine never runs an encoder itself; embeddings arrive through
interchange files produced elsewhere. Two formats are accepted:

* line-delimited JSON records ``{"id": ..., "kind": ..., "vectors": ...}``
  where ``vectors`` is a flat list for single-vector kinds ("image",
  "caption") or a list of rows for the "token-sequence" kind;
* a packed binary variant for single-vector kinds: the magic bytes
  ``EMB1``, an unsigned 32-bit little-endian dimension, then records of
  (unsigned 32-bit little-endian id length, utf-8 id bytes, ``dim``
  little-endian 32-bit floats).

Vectors are stored as float32 so both loaders yield identical tables
for the same logical content. Id conventions used across the toolkit:
image vectors are keyed by image id, candidate caption vectors by
sample id, and reference caption or token vectors by ``{sample_id}:ref{k}``.

Score channels are per-sample scalars in line-delimited JSON records
``{"sample_id": ..., "value": ...}``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

EMBEDDING_KINDS = ("image", "caption", "token-sequence")
BINARY_MAGIC = b"EMB1"
CLIP_WEIGHT = 2.5


class EmbeddingFormatError(ValueError):
    pass


def reference_id(sample_id: str, index: int) -> str:
    """Interchange id under which reference ``index`` of a sample is stored."""
    return f"{sample_id}:ref{index}"


@dataclass
class EmbeddingTable:
    """Embedding vectors of one kind, keyed by id."""

    kind: str
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in EMBEDDING_KINDS:
            raise EmbeddingFormatError(
                f"unknown embedding kind {self.kind!r}; expected one of {EMBEDDING_KINDS}"
            )

    def __contains__(self, key: str) -> bool:
        return key in self.vectors

    def __getitem__(self, key: str) -> np.ndarray:
        try:
            return self.vectors[key]
        except KeyError:
            raise KeyError(f"no {self.kind} embedding for id {key!r}") from None

    def __len__(self) -> int:
        return len(self.vectors)

    def add(self, record_id: str, vector) -> None:
        if record_id in self.vectors:
            raise EmbeddingFormatError(f"duplicate embedding id {record_id!r}")
        arr = np.asarray(vector, dtype=np.float32)
        expected_ndim = 2 if self.kind == "token-sequence" else 1
        if arr.ndim != expected_ndim:
            raise EmbeddingFormatError(
                f"id {record_id!r}: expected {expected_ndim}-d vectors for kind "
                f"{self.kind!r}, got shape {arr.shape}"
            )
        if arr.shape[-1] != self.dim:
            raise EmbeddingFormatError(
                f"id {record_id!r}: dimension {arr.shape[-1]} does not match table "
                f"dimension {self.dim}"
            )
        if expected_ndim == 2 and arr.shape[0] == 0:
            raise EmbeddingFormatError(f"id {record_id!r}: empty token sequence")
        if not np.isfinite(arr).all():
            raise EmbeddingFormatError(f"id {record_id!r}: non-finite values")
        self.vectors[record_id] = arr

    def missing(self, ids: Iterable[str]) -> list[str]:
        return sorted(i for i in set(ids) if i not in self.vectors)


def load_embedding_table(path, kind: str | None = None) -> EmbeddingTable:
    """Load embeddings from a text or packed binary file (sniffed by magic)."""
    with open(path, "rb") as handle:
        magic = handle.read(4)
    if magic == BINARY_MAGIC:
        if kind == "token-sequence":
            raise EmbeddingFormatError(
                "the packed binary format holds single vectors only"
            )
        return _load_binary(path, kind or "image")
    return _load_jsonl(path, kind)


def _load_jsonl(path, kind: str | None) -> EmbeddingTable:
    table: EmbeddingTable | None = None
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EmbeddingFormatError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            for key in ("id", "kind", "vectors"):
                if key not in record:
                    raise EmbeddingFormatError(f"{path}:{line_no}: missing field {key!r}")
            if kind is not None and record["kind"] != kind:
                continue
            arr = np.asarray(record["vectors"], dtype=np.float32)
            if table is None:
                table = EmbeddingTable(kind=record["kind"], dim=int(arr.shape[-1]))
            elif record["kind"] != table.kind:
                raise EmbeddingFormatError(
                    f"{path}:{line_no}: mixed kinds in one table "
                    f"({record['kind']!r} after {table.kind!r}); pass kind= to select one"
                )
            try:
                table.add(str(record["id"]), arr)
            except EmbeddingFormatError as exc:
                raise EmbeddingFormatError(f"{path}:{line_no}: {exc}") from exc
    if table is None:
        raise EmbeddingFormatError(f"{path}: no embedding records" + (f" of kind {kind!r}" if kind else ""))
    return table


def _load_binary(path, kind: str) -> EmbeddingTable:
    with open(path, "rb") as handle:
        data = handle.read()
    if data[:4] != BINARY_MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic")
    if len(data) < 8:
        raise EmbeddingFormatError(f"{path}: truncated header")
    (dim,) = struct.unpack_from("<I", data, 4)
    table = EmbeddingTable(kind=kind, dim=int(dim))
    offset = 8
    while offset < len(data):
        if offset + 4 > len(data):
            raise EmbeddingFormatError(f"{path}: truncated record header at byte {offset}")
        (id_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if offset + id_len + 4 * dim > len(data):
            raise EmbeddingFormatError(f"{path}: truncated record at byte {offset}")
        record_id = data[offset : offset + id_len].decode("utf-8")
        offset += id_len
        vector = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += 4 * dim
        table.add(record_id, vector)
    return table


def write_embedding_table(table: EmbeddingTable, path) -> None:
    """Write the line-delimited JSON form, sorted by id for determinism."""
    with open(path, "w", encoding="utf-8") as handle:
        for record_id in sorted(table.vectors):
            record = {
                "id": record_id,
                "kind": table.kind,
                "vectors": table.vectors[record_id].tolist(),
            }
            handle.write(json.dumps(record, sort_keys=True) + "\n")


def write_embedding_table_binary(table: EmbeddingTable, path) -> None:
    if table.kind == "token-sequence":
        raise EmbeddingFormatError("the packed binary format holds single vectors only")
    with open(path, "wb") as handle:
        handle.write(BINARY_MAGIC)
        handle.write(struct.pack("<I", table.dim))
        for record_id in sorted(table.vectors):
            encoded = record_id.encode("utf-8")
            handle.write(struct.pack("<I", len(encoded)))
            handle.write(encoded)
            handle.write(table.vectors[record_id].astype("<f4").tobytes())


@dataclass
class EmbeddingFamily:
    """Image and caption tables produced by one encoder in a shared space."""

    images: EmbeddingTable
    captions: EmbeddingTable

    def __post_init__(self) -> None:
        if self.images.dim != self.captions.dim:
            raise EmbeddingFormatError(
                f"image dimension {self.images.dim} does not match caption "
                f"dimension {self.captions.dim}"
            )


# ---------------------------------------------------------------------------
# Scalar score channels


@dataclass
class ScoreChannel:
    """Per-sample scalar scores produced by an external model."""

    name: str
    values: dict[str, float] = field(default_factory=dict)

    def __contains__(self, sample_id: str) -> bool:
        return sample_id in self.values

    def __getitem__(self, sample_id: str) -> float:
        try:
            return self.values[sample_id]
        except KeyError:
            raise KeyError(f"channel {self.name!r} has no value for sample {sample_id!r}") from None

    def missing(self, ids: Iterable[str]) -> list[str]:
        return sorted(i for i in set(ids) if i not in self.values)


def load_score_channel(path, name: str) -> ScoreChannel:
    channel = ScoreChannel(name=name)
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EmbeddingFormatError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            if "sample_id" not in record or "value" not in record:
                raise EmbeddingFormatError(f"{path}:{line_no}: records need sample_id and value")
            sample_id = str(record["sample_id"])
            value = float(record["value"])
            if not np.isfinite(value):
                raise EmbeddingFormatError(
                    f"{path}:{line_no}: non-finite value for sample {sample_id!r}"
                )
            if sample_id in channel.values:
                raise EmbeddingFormatError(f"{path}:{line_no}: duplicate sample {sample_id!r}")
            channel.values[sample_id] = value
    return channel


def write_score_channel(channel: ScoreChannel, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for sample_id in sorted(channel.values):
            record = {"sample_id": sample_id, "value": channel.values[sample_id]}
            handle.write(json.dumps(record, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Similarity scores


def cosine(u, v) -> float:
    """Cosine similarity; zero-norm inputs are an error."""
    a = np.asarray(u, dtype=np.float64).ravel()
    b = np.asarray(v, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine is undefined for zero-norm vectors")
    return float(np.dot(a, b) / (norm_a * norm_b))


def clip_score(image_vec, caption_vec, weight: float = CLIP_WEIGHT) -> float:
    """Weighted rectified cosine between an image and a caption vector."""
    return weight * max(cosine(image_vec, caption_vec), 0.0)


def clip_score_ref(image_vec, caption_vec, reference_vecs: Sequence) -> float:
    """Harmonic mean of the capped image-caption score and the best
    reference similarity; zero when either term is zero."""
    if len(reference_vecs) == 0:
        raise ValueError("clip_score_ref requires at least one reference vector")
    image_term = min(clip_score(image_vec, caption_vec), 1.0)
    ref_term = max(0.0, max(cosine(caption_vec, ref) for ref in reference_vecs))
    if image_term <= 0.0 or ref_term <= 0.0:
        return 0.0
    return 2.0 * image_term * ref_term / (image_term + ref_term)


class BertScore(NamedTuple):
    precision: float
    recall: float
    f1: float


def bert_score(candidate_matrix, reference_matrices: Sequence) -> BertScore:
    """Greedy token matching over a pairwise cosine matrix.

    Precision averages the per-candidate-token best similarity, recall
    the per-reference-token best. With several references the triple of
    the F1-maximising reference is returned.
    """
    if len(reference_matrices) == 0:
        raise ValueError("bert_score requires at least one reference matrix")
    cand = _normalised_rows(np.asarray(candidate_matrix, dtype=np.float64), "candidate")
    best: BertScore | None = None
    for index, ref_matrix in enumerate(reference_matrices):
        ref = _normalised_rows(np.asarray(ref_matrix, dtype=np.float64), f"reference {index}")
        if ref.shape[1] != cand.shape[1]:
            raise ValueError(
                f"reference {index}: dimension {ref.shape[1]} does not match candidate "
                f"dimension {cand.shape[1]}"
            )
        similarity = cand @ ref.T
        precision = float(similarity.max(axis=1).mean())
        recall = float(similarity.max(axis=0).mean())
        if precision + recall == 0.0:
            f1 = 0.0
        else:
            f1 = 2.0 * precision * recall / (precision + recall)
        candidate_score = BertScore(precision, recall, f1)
        if best is None or candidate_score.f1 > best.f1:
            best = candidate_score
    assert best is not None
    return best


def _normalised_rows(matrix: np.ndarray, name: str) -> np.ndarray:
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise ValueError(f"{name}: token matrices must be 2-d and non-empty")
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError(f"{name}: zero-norm token vector")
    return matrix / norms
