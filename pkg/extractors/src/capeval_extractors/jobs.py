"""Extraction jobs: corpus plus images in, interchange files out.

One job covers any subset of the output families. Files are written
atomically (tmp then rename) in the exact formats the engine loads, a
sidecar records how they were produced, and images that cannot be
found are collected into a gaps report instead of aborting the run.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from capeval.corpus import CaptionSample, ingest_corpus
from capeval.embeddings import (
    EmbeddingTable,
    ScoreChannel,
    reference_id,
    write_embedding_table,
    write_score_channel,
)
from capeval.pool import write_detections

from . import encoder

BACKEND = "offline-projection-v1"
DETECTOR = "offline-palette"
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")
DEFAULT_FAMILIES = ("clip", "mcip", "bert", "vilt", "detections")
CHOICES = ("clip", "mcip", "bert", "vilt", "grammar", "detections")


@dataclass(frozen=True)
class ExtractionJob:
    corpus: Path
    image_root: Path
    out_dir: Path
    families: tuple[str, ...] = DEFAULT_FAMILIES
    dim: int = 64
    batch_size: int = 16
    device: str = "cpu"
    detector_threshold: float = 0.5

    def __post_init__(self):
        unknown = [f for f in self.families if f not in CHOICES]
        if unknown:
            raise ValueError(
                f"unknown families {unknown}; expected a subset of {CHOICES}"
            )
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


@dataclass
class ExtractionResult:
    written: dict[str, Path]
    meta: Path
    gaps: list[str] = field(default_factory=list)


def find_image(root: Path, image_id: str) -> Path | None:
    for suffix in IMAGE_SUFFIXES:
        candidate = root / f"{image_id}{suffix}"
        if candidate.is_file():
            return candidate
    return None


def _batches(items: list, size: int):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def _write_atomic(write, path: Path) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    write(tmp)
    os.replace(tmp, path)


def _caption_table(
    family: str, samples: list[CaptionSample], dim: int
) -> EmbeddingTable:
    table = EmbeddingTable(kind="caption", dim=dim)
    for sample in samples:
        table.add(sample.sample_id, encoder.text_vector(family, sample.candidate, dim))
        for k, ref in enumerate(sample.references):
            table.add(
                reference_id(sample.sample_id, k),
                encoder.text_vector(family, ref, dim),
            )
    return table


def _image_table(
    family: str, images: dict[str, Path], dim: int, batch_size: int
) -> EmbeddingTable:
    table = EmbeddingTable(kind="image", dim=dim)
    for batch in _batches(sorted(images), batch_size):
        for image_id in batch:
            table.add(image_id, encoder.image_vector(family, images[image_id], dim))
    return table


def run_job(job: ExtractionJob) -> ExtractionResult:
    """Produce every requested family; returns what was written and the
    image ids that had no readable file."""
    samples = ingest_corpus(job.corpus)
    job.out_dir.mkdir(parents=True, exist_ok=True)

    image_paths: dict[str, Path] = {}
    gaps: list[str] = []
    for image_id in sorted({s.image_id for s in samples}):
        path = find_image(job.image_root, image_id)
        if path is None:
            gaps.append(image_id)
        else:
            image_paths[image_id] = path
    covered = [s for s in samples if s.image_id in image_paths]

    written: dict[str, Path] = {}

    def emit(name: str, write) -> None:
        path = job.out_dir / name
        _write_atomic(write, path)
        written[name] = path

    for family in ("clip", "mcip"):
        if family not in job.families:
            continue
        images = _image_table(family, image_paths, job.dim, job.batch_size)
        captions = _caption_table(family, samples, job.dim)
        emit(f"{family}.images.jsonl", lambda p, t=images: write_embedding_table(t, p))
        emit(
            f"{family}.captions.jsonl",
            lambda p, t=captions: write_embedding_table(t, p),
        )

    if "bert" in job.families:
        tokens = EmbeddingTable(kind="token-sequence", dim=job.dim)
        for sample in samples:
            tokens.add(
                sample.sample_id,
                encoder.token_matrix("bert", sample.candidate, job.dim),
            )
            for k, ref in enumerate(sample.references):
                tokens.add(
                    reference_id(sample.sample_id, k),
                    encoder.token_matrix("bert", ref, job.dim),
                )
        emit("bert.tokens.jsonl", lambda p: write_embedding_table(tokens, p))

    if "vilt" in job.families:
        channel = ScoreChannel(name="vilt")
        for batch in _batches(covered, job.batch_size):
            for sample in batch:
                image_vec = encoder.image_vector(
                    "vilt", image_paths[sample.image_id], job.dim
                )
                text_vec = encoder.text_vector("vilt", sample.candidate, job.dim)
                channel.values[sample.sample_id] = encoder.pair_score(
                    image_vec, text_vec
                )
        emit("vilt.jsonl", lambda p: write_score_channel(channel, p))

    if "grammar" in job.families:
        channel = ScoreChannel(name="grammar")
        for sample in samples:
            channel.values[sample.sample_id] = encoder.grammar_score(sample.candidate)
        emit("grammar.jsonl", lambda p: write_score_channel(channel, p))

    if "detections" in job.families:
        labels = {
            image_id: encoder.detect_labels(path, job.detector_threshold)
            for image_id, path in image_paths.items()
        }
        emit(
            "detections.jsonl",
            lambda p: write_detections(labels, p, detector=DETECTOR),
        )

    meta = job.out_dir / "extraction.meta.json"
    payload = {
        "backend": BACKEND,
        "families": list(job.families),
        "dim": job.dim,
        "batch_size": job.batch_size,
        "device": job.device,
        "detector": {"name": DETECTOR, "threshold": job.detector_threshold},
        "checkpoints": {
            family: f"{BACKEND}/{family}-d{job.dim}"
            for family in job.families
            if family != "detections"
        },
        "corpus_samples": len(samples),
        "covered_images": len(image_paths),
        "gaps": gaps,
    }

    def write_meta(path):
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, sort_keys=True, indent=1)
            handle.write("\n")

    _write_atomic(write_meta, meta)

    if gaps:
        def write_gaps(path):
            with open(path, "w", encoding="utf-8") as handle:
                json.dump({"missing_images": gaps}, handle, sort_keys=True, indent=1)
                handle.write("\n")

        gaps_path = job.out_dir / "gaps.json"
        _write_atomic(write_gaps, gaps_path)
        written["gaps.json"] = gaps_path

    return ExtractionResult(written=written, meta=meta, gaps=gaps)
