"""Deterministic offline featurizer.

Every function here is a pure function of its inputs and the family
name: images go through a fixed 8x8 RGB thumbnail and a seeded random
projection, words get hash-seeded unit vectors. No weights, no network,
no global state, so re-running an extraction reproduces every byte.
Distinct family names get distinct projections, standing in for
distinct checkpoints.
"""

from __future__ import annotations

import zlib
from functools import lru_cache

import numpy as np
from PIL import Image

from capeval.lexical import tokenize

THUMB_SIZE = 8
PIXEL_DIM = THUMB_SIZE * THUMB_SIZE * 3

PALETTE = ("red", "yellow", "green", "cyan", "blue", "magenta")


def _seed(text: str) -> int:
    return zlib.crc32(text.encode("utf-8"))


@lru_cache(maxsize=32)
def _projection(family: str, dim: int) -> np.ndarray:
    rng = np.random.default_rng(_seed(f"{family}:{PIXEL_DIM}:{dim}"))
    matrix = rng.standard_normal((PIXEL_DIM, dim)).astype(np.float32)
    return matrix / np.sqrt(PIXEL_DIM)


def _normalize(vector: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vector))
    if norm < 1e-12:
        fallback = np.zeros_like(vector)
        fallback[0] = 1.0
        return fallback
    return (vector / norm).astype(np.float32)


def _thumbnail(path) -> np.ndarray:
    with Image.open(path) as img:
        rgb = img.convert("RGB").resize((THUMB_SIZE, THUMB_SIZE), Image.BILINEAR)
    return np.asarray(rgb, dtype=np.float32).reshape(-1) / 255.0


def image_vector(family: str, path, dim: int) -> np.ndarray:
    """Unit vector for an image file under the family's projection."""
    return _normalize(_thumbnail(path) @ _projection(f"{family}:image", dim))


@lru_cache(maxsize=4096)
def _word_vector(family: str, word: str, dim: int) -> np.ndarray:
    rng = np.random.default_rng(_seed(f"{family}:word:{word}"))
    return _normalize(rng.standard_normal(dim).astype(np.float32))


def text_vector(family: str, text: str, dim: int) -> np.ndarray:
    """Unit vector for a text: the normalized sum of its word vectors."""
    tokens = tokenize(text)
    if not tokens:
        raise ValueError("cannot embed empty text")
    total = np.zeros(dim, dtype=np.float32)
    for token in tokens:
        total += _word_vector(family, token, dim)
    return _normalize(total)


def token_matrix(family: str, text: str, dim: int) -> np.ndarray:
    """One row per token, each the token's unit vector."""
    tokens = tokenize(text)
    if not tokens:
        raise ValueError("cannot embed empty text")
    return np.stack([_word_vector(family, t, dim) for t in tokens])


def pair_score(image_vec: np.ndarray, text_vec: np.ndarray) -> float:
    """Image-text match score in [0, 1]: cosine mapped up from [-1, 1]."""
    cos = float(np.dot(image_vec, text_vec))
    return float(np.clip((cos + 1.0) / 2.0, 0.0, 1.0))


def grammar_score(text: str) -> float:
    """Fraction of tokens that are purely alphabetic."""
    tokens = tokenize(text)
    if not tokens:
        return 0.0
    return sum(t.isalpha() for t in tokens) / len(tokens)


def detect_labels(path, threshold: float = 0.5, max_labels: int = 5) -> list[str]:
    """Color-bucket labels for an image, strongest first.

    The label score is each hue bucket's saturation-weighted mass
    relative to the strongest bucket; buckets at or above ``threshold``
    make the cut, plus "dark" or "bright" when the mean value is
    extreme. Deterministic for a given file.
    """
    with Image.open(path) as img:
        hsv = img.convert("HSV").resize((THUMB_SIZE, THUMB_SIZE), Image.BILINEAR)
    pixels = np.asarray(hsv, dtype=np.float32).reshape(-1, 3)
    hue, saturation, value = pixels[:, 0], pixels[:, 1], pixels[:, 2]

    buckets = np.zeros(len(PALETTE))
    bucket_index = (hue / 256.0 * len(PALETTE)).astype(int) % len(PALETTE)
    for index, weight in zip(bucket_index, saturation / 255.0):
        buckets[index] += weight

    labels = []
    strongest = float(buckets.max())
    if strongest > 0:
        order = sorted(range(len(PALETTE)), key=lambda i: (-buckets[i], i))
        for i in order[:max_labels]:
            if buckets[i] / strongest >= threshold:
                labels.append(PALETTE[i])
    mean_value = float(value.mean()) / 255.0
    if mean_value < 0.25:
        labels.append("dark")
    elif mean_value > 0.75:
        labels.append("bright")
    return labels[:max_labels]
