"""Deterministic synthetic fixtures for tests, demos, and benchmarks.

Real caption corpora need encoder checkpoints and hours of annotation.
These generators build a corpus with the same shape from a seed: captions
whose wording, embeddings, auxiliary channels, and human ratings all
derive from a latent per-sample quality, so a metric that tracks quality
well will also track the synthetic raters well.
"""

from dataclasses import dataclass
from pathlib import Path
from zlib import crc32

import numpy as np

from .corpus import CaptionSample, OWN_SCALE, RawScore, write_corpus
from .embeddings import (
    EmbeddingFamily,
    EmbeddingTable,
    ScoreChannel,
    reference_id,
    write_embedding_table,
    write_score_channel,
)
from .pool import write_detections
from .vcrscore import FeatureInputs

DEFAULT_MODEL_SKILLS = {
    "gen-a": 0.90,
    "gen-b": 0.75,
    "gen-c": 0.60,
    "gen-d": 0.45,
    "gen-e": 0.30,
}
TAGGER_NOISE = {"t1": 0.05, "t2": 0.15, "t3": 0.08, "t4": 0.10}
PHASES = (1, 2)

_CONSONANTS = "bcdfghklmnprstvz"
_VOWELS = "aeiou"


def _word_list(count: int) -> list[str]:
    """A fixed pronounceable vocabulary, independent of any seed."""
    words = []
    for c1 in _CONSONANTS:
        for v1 in _VOWELS:
            for c2 in _CONSONANTS:
                words.append(c1 + v1 + c2 + "a")
                if len(words) == count:
                    return words
    raise ValueError(f"cannot build {count} words from the syllable grid")


def _word_vector(word: str, dim: int) -> np.ndarray:
    """A stable unit vector per word, derived from a checksum seed."""
    rng = np.random.default_rng(crc32(word.encode("utf-8")))
    v = rng.normal(size=dim)
    return (v / np.linalg.norm(v)).astype(np.float32)


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def _nearest_level(value: float) -> float:
    return min(OWN_SCALE, key=lambda level: abs(level - value))


@dataclass
class SyntheticDataset:
    """A generated corpus plus every side input the pipeline consumes."""

    samples: list[CaptionSample]
    inputs: FeatureInputs
    quality: dict[str, float]


def make_synthetic_dataset(
    n_images: int = 40,
    model_skills: dict[str, float] | None = None,
    seed: int = 11,
    dim: int = 16,
    n_references: int = 4,
) -> SyntheticDataset:
    """Build a full corpus whose signals share one latent quality.

    Each image gets a topic vector and a private vocabulary; references
    draw from that vocabulary. Each generator model has a skill level,
    and every sample's quality is its model's skill plus noise. Quality
    drives the fraction of in-vocabulary words in the candidate, the
    candidate embedding's alignment with the image topic, the auxiliary
    channel, and the simulated raters.
    """
    skills = dict(model_skills or DEFAULT_MODEL_SKILLS)
    if not skills:
        raise ValueError("need at least one generator model")
    rng = np.random.default_rng(seed)
    vocabulary = _word_list(240)

    images = EmbeddingTable(kind="image", dim=dim)
    captions = EmbeddingTable(kind="caption", dim=dim)
    tokens = EmbeddingTable(kind="token-sequence", dim=dim)
    channel = ScoreChannel(name="vilt")
    detections: dict[str, list[str]] = {}
    samples: list[CaptionSample] = []
    quality: dict[str, float] = {}

    for i in range(n_images):
        image_id = f"img{i:03d}"
        topic = _unit(rng, dim)
        images.add(image_id, topic.astype(np.float32))
        image_words = list(rng.choice(vocabulary, size=18, replace=False))
        distractors = [w for w in vocabulary if w not in image_words]
        detections[image_id] = sorted(rng.choice(image_words, size=5, replace=False))

        references = []
        for _ in range(n_references):
            length = int(rng.integers(8, 12))
            references.append(" ".join(rng.choice(image_words, size=length)))

        for model_id in sorted(skills):
            sample_id = f"{image_id}:{model_id}"
            q = float(np.clip(skills[model_id] + rng.normal(0, 0.08), 0.02, 0.98))
            quality[sample_id] = q

            length = 9
            n_on_topic = int(round(q * length))
            words = list(rng.choice(image_words, size=n_on_topic))
            words += list(rng.choice(distractors, size=length - n_on_topic))
            rng.shuffle(words)
            candidate = " ".join(words)

            caption_vec = _unit(rng, dim)
            caption_vec = q * topic + (1.0 - q) * caption_vec
            captions.add(sample_id, (caption_vec / np.linalg.norm(caption_vec)).astype(np.float32))
            tokens.add(sample_id, np.stack([_word_vector(w, dim) for w in words]))
            for k, reference in enumerate(references):
                key = reference_id(sample_id, k)
                ref_vec = topic + 0.2 * rng.normal(size=dim)
                captions.add(key, (ref_vec / np.linalg.norm(ref_vec)).astype(np.float32))
                tokens.add(key, np.stack([_word_vector(w, dim) for w in reference.split()]))

            channel.values[sample_id] = float(np.clip(q + rng.normal(0, 0.07), 0.0, 1.0))

            raw_scores = [
                RawScore(tagger=tagger, phase=phase, score=_nearest_level(q + rng.normal(0, noise)))
                for tagger, noise in sorted(TAGGER_NOISE.items())
                for phase in PHASES
            ]
            samples.append(
                CaptionSample(
                    sample_id=sample_id,
                    image_id=image_id,
                    model_id=model_id,
                    candidate=candidate,
                    references=list(references),
                    raw_scores=raw_scores,
                )
            )

    inputs = FeatureInputs(
        families={"mcip": EmbeddingFamily(images=images, captions=captions)},
        channels={"vilt": channel},
        detections=detections,
        token_embeddings={"bert": tokens},
    )
    return SyntheticDataset(samples=samples, inputs=inputs, quality=quality)


def write_synthetic_dataset(dataset: SyntheticDataset, directory) -> dict[str, Path]:
    """Write the dataset in the interchange formats the CLI consumes."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": directory / "corpus.jsonl",
        "images": directory / "mcip.images.jsonl",
        "captions": directory / "mcip.captions.jsonl",
        "tokens": directory / "bert.tokens.jsonl",
        "vilt": directory / "vilt.jsonl",
        "detections": directory / "detections.jsonl",
    }
    write_corpus(dataset.samples, paths["corpus"])
    family = dataset.inputs.families["mcip"]
    write_embedding_table(family.images, paths["images"])
    write_embedding_table(family.captions, paths["captions"])
    write_embedding_table(dataset.inputs.token_embeddings["bert"], paths["tokens"])
    write_score_channel(dataset.inputs.channels["vilt"], paths["vilt"])
    write_detections(dataset.inputs.detections, paths["detections"], detector="synthetic")
    return paths


def make_feature_fixture(
    n_samples: int = 600,
    seed: int = 7,
    weights: tuple[float, ...] = (0.4, 0.3, 0.2, 0.1),
    noise: float = 0.05,
) -> tuple[np.ndarray, np.ndarray]:
    """Feature rows with a clamped, noisy, monotone target.

    The target is a weighted sum of uniform features plus Gaussian noise,
    clipped to the unit interval, so no single column explains it as well
    as a model over all of them can.
    """
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n_samples, len(weights)))
    y = np.clip(X @ np.asarray(weights) + rng.normal(0.0, noise, size=n_samples), 0.0, 1.0)
    return X, y
