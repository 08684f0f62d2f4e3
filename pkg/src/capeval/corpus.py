"""Corpus ingestion, score normalization, aggregation and splits.

The interchange format is line-delimited JSON, one caption sample per
line: ``sample_id``, ``image_id``, ``model_id``, ``candidate``,
``references`` (list of strings), ``source`` (which dataset the human
ratings come from) and ``raw_scores`` (list of ``{tagger, phase,
score}``). Raw ratings are kept on their native scale until
:func:`normalize_scores` maps them onto [0, 1].
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

OWN_SCALE = (0.0, 0.25, 0.5, 0.75, 1.0)


class CorpusFormatError(ValueError):
    pass


@dataclass(frozen=True)
class RawScore:
    tagger: str
    phase: int
    score: float


@dataclass
class CaptionSample:
    sample_id: str
    image_id: str
    model_id: str
    candidate: str
    references: list[str]
    source: str = "own"
    raw_scores: list[RawScore] = field(default_factory=list)


@dataclass(frozen=True)
class NormalizationRule:
    """How one source's native rating scale maps onto [0, 1]."""

    kind: str  # "linear" | "fraction" | "discrete"
    low: float = 0.0
    high: float = 1.0
    levels: tuple[float, ...] = ()

    def apply(self, value: float) -> float:
        if self.kind == "linear":
            if not self.low <= value <= self.high:
                raise ValueError(
                    f"score {value} outside declared scale [{self.low}, {self.high}]"
                )
            return (value - self.low) / (self.high - self.low)
        if self.kind == "fraction":
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"score {value} outside [0, 1]")
            return value
        if self.kind == "discrete":
            if value not in self.levels:
                raise ValueError(f"score {value} not one of {self.levels}")
            return value
        raise ValueError(f"unknown rule kind {self.kind!r}")


# Native scales of the rating sources the toolkit understands out of the
# box. "own" is the five-option annotation scale used by the bundled
# collection service; the others are external corpora.
DEFAULT_RULES: dict[str, NormalizationRule] = {
    "own": NormalizationRule(kind="discrete", levels=OWN_SCALE),
    "vicr": NormalizationRule(kind="linear", low=1.0, high=5.0),
    "composite": NormalizationRule(kind="linear", low=1.0, high=5.0),
    "flickr8k-expert": NormalizationRule(kind="linear", low=1.0, high=4.0),
    "flickr8k-cf": NormalizationRule(kind="fraction"),
}


# ---------------------------------------------------------------------------
# Ingest and persist


def ingest_corpus(path) -> list[CaptionSample]:
    """Parse a captions file; duplicate ids and malformed lines are errors."""
    samples: list[CaptionSample] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            try:
                sample = _sample_from_record(record)
            except (KeyError, TypeError, ValueError) as exc:
                raise CorpusFormatError(f"{path}:{line_no}: {exc}") from exc
            if sample.sample_id in seen:
                raise CorpusFormatError(
                    f"{path}:{line_no}: duplicate sample_id {sample.sample_id!r}"
                )
            seen.add(sample.sample_id)
            samples.append(sample)
    return samples


def _sample_from_record(record: Mapping) -> CaptionSample:
    for key in ("sample_id", "image_id", "model_id", "candidate", "references"):
        if key not in record:
            raise KeyError(f"missing required field {key!r}")
    references = record["references"]
    if not isinstance(references, list) or not all(isinstance(r, str) for r in references):
        raise ValueError("references must be a list of strings")
    raw_scores = []
    for entry in record.get("raw_scores", []):
        for key in ("tagger", "phase", "score"):
            if key not in entry:
                raise KeyError(f"raw_scores entries need field {key!r}")
        raw_scores.append(
            RawScore(
                tagger=str(entry["tagger"]),
                phase=int(entry["phase"]),
                score=float(entry["score"]),
            )
        )
    return CaptionSample(
        sample_id=str(record["sample_id"]),
        image_id=str(record["image_id"]),
        model_id=str(record["model_id"]),
        candidate=str(record["candidate"]),
        references=list(references),
        source=str(record.get("source", "own")),
        raw_scores=raw_scores,
    )


def sample_to_record(sample: CaptionSample) -> dict:
    return {
        "sample_id": sample.sample_id,
        "image_id": sample.image_id,
        "model_id": sample.model_id,
        "candidate": sample.candidate,
        "references": list(sample.references),
        "source": sample.source,
        "raw_scores": [
            {"tagger": rs.tagger, "phase": rs.phase, "score": rs.score}
            for rs in sample.raw_scores
        ],
    }


def write_corpus(samples: Iterable[CaptionSample], path) -> None:
    """Write the line-delimited interchange form to a path or stream."""
    if hasattr(path, "write"):
        for sample in samples:
            path.write(json.dumps(sample_to_record(sample), sort_keys=True) + "\n")
        return
    with open(path, "w", encoding="utf-8") as handle:
        for sample in samples:
            handle.write(json.dumps(sample_to_record(sample), sort_keys=True) + "\n")


def source_counts(samples: Iterable[CaptionSample]) -> Counter:
    return Counter(sample.source for sample in samples)


# ---------------------------------------------------------------------------
# Normalization and aggregation


def normalize_scores(
    samples: Sequence[CaptionSample],
    rules: Mapping[str, NormalizationRule] = DEFAULT_RULES,
) -> list[CaptionSample]:
    """Map every raw score onto [0, 1] according to its sample's source."""
    normalized = []
    for sample in samples:
        rule = rules.get(sample.source)
        if rule is None:
            raise ValueError(
                f"sample {sample.sample_id!r}: no normalization rule for source "
                f"{sample.source!r}"
            )
        try:
            scores = [
                replace(rs, score=rule.apply(rs.score)) for rs in sample.raw_scores
            ]
        except ValueError as exc:
            raise ValueError(f"sample {sample.sample_id!r}: {exc}") from exc
        normalized.append(replace(sample, raw_scores=scores))
    return normalized


def _selected_scores(
    sample: CaptionSample,
    taggers: Iterable[str] | None,
    phases: Iterable[int] | None,
) -> list[float]:
    tagger_set = set(taggers) if taggers is not None else None
    phase_set = set(phases) if phases is not None else None
    return [
        rs.score
        for rs in sample.raw_scores
        if (tagger_set is None or rs.tagger in tagger_set)
        and (phase_set is None or rs.phase in phase_set)
    ]


def aggregate_scores(
    samples: Sequence[CaptionSample],
    method: str = "mean",
    tie_seed: int = 0,
    taggers: Iterable[str] | None = None,
    phases: Iterable[int] | None = None,
) -> dict[str, float]:
    """One score per sample: the mean of its ratings, or the modal vote.

    Vote ties are broken by a uniform choice among the tied values,
    seeded per sample so reruns agree. ``taggers``/``phases`` restrict
    which ratings count (for example to use a single rating channel).
    """
    if method not in ("mean", "vote"):
        raise ValueError(f"unknown aggregation method {method!r}")
    aggregated: dict[str, float] = {}
    for sample in samples:
        values = _selected_scores(sample, taggers, phases)
        if not values:
            raise ValueError(f"sample {sample.sample_id!r} has no ratings to aggregate")
        if method == "mean":
            aggregated[sample.sample_id] = sum(values) / len(values)
        else:
            aggregated[sample.sample_id] = _vote(values, tie_seed, sample.sample_id)
    return aggregated


def _vote(values: Sequence[float], tie_seed: int, sample_id: str) -> float:
    counts = Counter(values)
    top = max(counts.values())
    tied = sorted(v for v, c in counts.items() if c == top)
    if len(tied) == 1:
        return tied[0]
    return random.Random(f"{tie_seed}:{sample_id}").choice(tied)


def filter_zero_scores(
    samples: Sequence[CaptionSample],
    taggers: Iterable[str] | None = None,
    phases: Iterable[int] | None = None,
) -> tuple[list[CaptionSample], int]:
    """Drop samples whose mean normalized score is exactly zero.

    Returns the kept samples and how many were removed.
    """
    kept = []
    removed = 0
    for sample in samples:
        values = _selected_scores(sample, taggers, phases)
        if not values:
            raise ValueError(f"sample {sample.sample_id!r} has no ratings to aggregate")
        if sum(values) / len(values) == 0.0:
            removed += 1
        else:
            kept.append(sample)
    return kept, removed


# ---------------------------------------------------------------------------
# Splits


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    seed: int = 0
    by_image: bool = False


def split_corpus(
    samples: Sequence[CaptionSample], spec: SplitSpec
) -> tuple[list[CaptionSample], list[CaptionSample]]:
    """Deterministic train/test split.

    Per-sample splits land within one sample of the requested fraction;
    per-image splits keep all captions of an image on one side and land
    within one image group of it.
    """
    if not 0.0 < spec.train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {spec.train_fraction}")
    n = len(samples)
    if n < 2:
        raise ValueError("cannot split fewer than two samples")
    target = n * spec.train_fraction
    if spec.by_image:
        in_train = _train_images(samples, spec.seed, target)
        train = [s for s in samples if s.image_id in in_train]
        test = [s for s in samples if s.image_id not in in_train]
    else:
        order = list(range(n))
        random.Random(spec.seed).shuffle(order)
        n_train = int(target + 0.5)
        chosen = set(order[:n_train])
        train = [s for i, s in enumerate(samples) if i in chosen]
        test = [s for i, s in enumerate(samples) if i not in chosen]
    if not train or not test:
        raise ValueError(
            f"corpus of {n} samples cannot honor train_fraction={spec.train_fraction}"
        )
    return train, test


def _train_images(samples: Sequence[CaptionSample], seed: int, target: float) -> set[str]:
    group_sizes = Counter(s.image_id for s in samples)
    images = sorted(group_sizes)
    random.Random(seed).shuffle(images)
    chosen: set[str] = set()
    count = 0
    for image in images:
        if count >= target:
            break
        chosen.add(image)
        count += group_sizes[image]
    return chosen


# ---------------------------------------------------------------------------
# Bridge to the agreement statistics


def rating_rows(
    samples: Sequence[CaptionSample],
    taggers: Iterable[str] | None = None,
    phases: Iterable[int] | None = None,
) -> tuple[list[list[float | None]], list[tuple[str, int]]]:
    """Arrange raw scores as a units x raters grid.

    One row per sample, one column per (tagger, phase) pair actually
    present; missing ratings are ``None``. Returns (rows, columns).
    """
    tagger_set = set(taggers) if taggers is not None else None
    phase_set = set(phases) if phases is not None else None
    columns: set[tuple[str, int]] = set()
    for sample in samples:
        for rs in sample.raw_scores:
            if (tagger_set is None or rs.tagger in tagger_set) and (
                phase_set is None or rs.phase in phase_set
            ):
                columns.add((rs.tagger, rs.phase))
    ordered = sorted(columns)
    position = {col: i for i, col in enumerate(ordered)}
    rows = []
    for sample in samples:
        row: list[float | None] = [None] * len(ordered)
        for rs in sample.raw_scores:
            key = (rs.tagger, rs.phase)
            if key in position:
                row[position[key]] = rs.score
        rows.append(row)
    return rows, ordered
