"""Offline extractors for the capeval interchange formats.

The engine consumes embeddings, score channels, and detection labels as
files; this package produces them from a corpus plus an image directory.
The bundled backend is a deterministic featurizer with no model weights
or network use, so outputs are bit-reproducible; a real encoder drops in
behind the same functions.
"""

from .encoder import (
    detect_labels,
    grammar_score,
    image_vector,
    pair_score,
    text_vector,
    token_matrix,
)
from .jobs import (
    BACKEND,
    DEFAULT_FAMILIES,
    ExtractionJob,
    ExtractionResult,
    run_job,
)

__all__ = [
    "BACKEND",
    "DEFAULT_FAMILIES",
    "ExtractionJob",
    "ExtractionResult",
    "detect_labels",
    "grammar_score",
    "image_vector",
    "pair_score",
    "run_job",
    "text_vector",
    "token_matrix",
]
