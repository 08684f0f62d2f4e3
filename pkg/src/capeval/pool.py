"""Word-pool precision and recall.

The pool for an image is the set of unique words seen across its
reference captions plus the labels an object detector produced for it.
A candidate is scored by how many of its unique words hit the pool
(precision) and how much of the pool it covers (recall).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .lexical import Tokens, tokenize

# Small closed-class list used only when stop-word removal is requested;
# scoring keeps every word by default.
STOPWORDS = frozenset(
    "a an the of in on at to and or with for from by is are was were be been".split()
)


class DetectionFormatError(ValueError):
    pass


@dataclass(frozen=True)
class WordPool:
    image_id: str
    words: frozenset[str]

    def __len__(self) -> int:
        return len(self.words)


def build_pool(
    references: Sequence[Tokens],
    detection_labels: Iterable[str] = (),
    image_id: str = "",
    remove_stopwords: bool = False,
) -> WordPool:
    """Unique union of reference words and detector labels.

    Multi-word labels are tokenized, so "hot dog" contributes both words.
    """
    words: set[str] = set()
    for ref in references:
        words.update(ref)
    for label in detection_labels:
        words.update(tokenize(label))
    if remove_stopwords:
        words -= STOPWORDS
    return WordPool(image_id=image_id, words=frozenset(words))


def pool_precision_recall(
    candidate: Tokens, pool: WordPool, remove_stopwords: bool = False
) -> tuple[float, float]:
    """(precision, recall) of the candidate's unique words against the pool.

    Both values lie in [0, 1]: hits / unique candidate words and
    hits / pool size.
    """
    unique = set(candidate)
    if remove_stopwords:
        unique -= STOPWORDS
    if not unique:
        raise ValueError("candidate has no words to score")
    if not pool.words:
        raise ValueError(f"empty word pool for image {pool.image_id!r}")
    hits = len(unique & pool.words)
    return hits / len(unique), hits / len(pool.words)


def load_detections(path) -> dict[str, list[str]]:
    """Read detector labels, merged per image across detectors.

    Line-delimited JSON records ``{"image_id": ..., "detector": ...,
    "labels": [...]}``. Label order follows first appearance; duplicates
    within an image are dropped.
    """
    merged: dict[str, list[str]] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DetectionFormatError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            for key in ("image_id", "detector", "labels"):
                if key not in record:
                    raise DetectionFormatError(f"{path}:{line_no}: missing field {key!r}")
            if not isinstance(record["labels"], list):
                raise DetectionFormatError(f"{path}:{line_no}: labels must be a list")
            image_labels = merged.setdefault(str(record["image_id"]), [])
            for label in record["labels"]:
                if label not in image_labels:
                    image_labels.append(str(label))
    return merged


def write_detections(detections: dict[str, list[str]], path, detector: str = "merged") -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for image_id in sorted(detections):
            record = {
                "image_id": image_id,
                "detector": detector,
                "labels": list(detections[image_id]),
            }
            handle.write(json.dumps(record, sort_keys=True) + "\n")
