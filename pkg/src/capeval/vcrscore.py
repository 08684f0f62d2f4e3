"""VCRScore: a learned caption quality metric.

A boosted-tree regressor is trained to predict the aggregated human
score of a caption from a small feature vector. The default features
are the word-pool precision and recall, an external image-text matching
channel (ViLT), and the reference-aware embedding score of the "mcip"
family; the embedding family and whether references enter the score are
configurable. Predictions are clamped to [0, 1].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import CaptionSample
from .embeddings import (
    EmbeddingFamily,
    EmbeddingTable,
    ScoreChannel,
    bert_score,
    clip_score,
    clip_score_ref,
    reference_id,
)
from .gbr import (
    GradientBoostedRegressor,
    ModelFormatError,
    model_from_dict,
    model_to_dict,
)
from .lexical import tokenize
from .pool import build_pool, pool_precision_recall
from .validation import check_matrix, check_vector

FORMAT_VERSION = 1
DEFAULT_FEATURES = ("pool_precision", "pool_recall", "vilt", "mcip_score_ref")


class MissingInputError(ValueError):
    """A requested feature has no backing input for a sample."""


@dataclass
class FeatureInputs:
    """Everything the feature extractor may draw on.

    ``families`` maps an encoder family name (for example "clip" or
    "mcip") to its image/caption tables; ``channels`` holds per-sample
    scalar channels keyed by name; ``detections`` maps image ids to
    detector labels; ``token_embeddings`` maps a family name to a
    token-sequence table used for greedy-matching features.
    """

    families: dict[str, EmbeddingFamily] = field(default_factory=dict)
    channels: dict[str, ScoreChannel] = field(default_factory=dict)
    detections: dict[str, list[str]] = field(default_factory=dict)
    token_embeddings: dict[str, EmbeddingTable] = field(default_factory=dict)


@dataclass
class FeatureMatrix:
    X: np.ndarray
    feature_names: list[str]
    sample_ids: list[str]
    skipped: list[tuple[str, str]] = field(default_factory=list)


def compute_feature(sample: CaptionSample, name: str, inputs: FeatureInputs) -> float:
    """One feature value for one sample; missing inputs raise."""
    if name in ("pool_precision", "pool_recall"):
        references = [tokenize(ref) for ref in sample.references]
        labels = inputs.detections.get(sample.image_id, [])
        pool = build_pool(references, labels, image_id=sample.image_id)
        try:
            precision, recall = pool_precision_recall(tokenize(sample.candidate), pool)
        except ValueError as exc:
            raise MissingInputError(f"sample {sample.sample_id!r}: {exc}") from exc
        return precision if name == "pool_precision" else recall

    if name in inputs.channels:
        channel = inputs.channels[name]
        if sample.sample_id not in channel:
            raise MissingInputError(
                f"sample {sample.sample_id!r}: channel {name!r} has no value"
            )
        return channel.values[sample.sample_id]

    token_family, component = _parse_token_feature(name)
    if token_family is not None and token_family in inputs.token_embeddings:
        table = inputs.token_embeddings[token_family]
        candidate = _token_matrix(table, sample.sample_id, sample, "candidate")
        reference_mats = [
            _token_matrix(table, reference_id(sample.sample_id, k), sample, f"reference {k}")
            for k in range(len(sample.references))
        ]
        if not reference_mats:
            raise MissingInputError(
                f"sample {sample.sample_id!r}: no references to match against"
            )
        result = bert_score(candidate, reference_mats)
        return getattr(result, component)

    family_name, with_references = _parse_embedding_feature(name)
    if family_name is not None:
        if family_name not in inputs.families:
            raise MissingInputError(
                f"sample {sample.sample_id!r}: no embedding family {family_name!r} loaded"
            )
        family = inputs.families[family_name]
        if sample.image_id not in family.images:
            raise MissingInputError(
                f"sample {sample.sample_id!r}: no {family_name} embedding for image "
                f"{sample.image_id!r}"
            )
        if sample.sample_id not in family.captions:
            raise MissingInputError(
                f"sample {sample.sample_id!r}: no {family_name} caption embedding"
            )
        image_vec = family.images[sample.image_id]
        caption_vec = family.captions[sample.sample_id]
        if not with_references:
            return clip_score(image_vec, caption_vec)
        reference_vecs = []
        for k in range(len(sample.references)):
            key = reference_id(sample.sample_id, k)
            if key not in family.captions:
                raise MissingInputError(
                    f"sample {sample.sample_id!r}: no {family_name} embedding for "
                    f"reference {k}"
                )
            reference_vecs.append(family.captions[key])
        if not reference_vecs:
            raise MissingInputError(
                f"sample {sample.sample_id!r}: no references to embed"
            )
        return clip_score_ref(image_vec, caption_vec, reference_vecs)

    raise MissingInputError(f"unknown feature {name!r} and no channel of that name")


def _parse_embedding_feature(name: str) -> tuple[str | None, bool]:
    if name.endswith("_score_ref"):
        return name[: -len("_score_ref")], True
    if name.endswith("_score"):
        return name[: -len("_score")], False
    return None, False


def _parse_token_feature(name: str) -> tuple[str | None, str]:
    """Split names like "bert_f1" into (family, component)."""
    for suffix, component in (
        ("_f1", "f1"),
        ("_precision", "precision"),
        ("_recall", "recall"),
    ):
        if name.endswith(suffix):
            family = name[: -len(suffix)]
            if family:
                return family, component
    return None, ""


def _token_matrix(
    table: EmbeddingTable, key: str, sample: CaptionSample, what: str
) -> np.ndarray:
    if key not in table:
        raise MissingInputError(
            f"sample {sample.sample_id!r}: no token embeddings for {what}"
        )
    return table.vectors[key]


def build_features(
    samples: Sequence[CaptionSample],
    inputs: FeatureInputs,
    feature_names: Sequence[str] = DEFAULT_FEATURES,
    on_missing: str = "error",
) -> FeatureMatrix:
    """Assemble the feature matrix in declared column order.

    ``on_missing`` is "error" to raise on the first gap (training) or
    "skip" to drop affected samples and record why (evaluation).
    """
    if on_missing not in ("error", "skip"):
        raise ValueError(f"on_missing must be 'error' or 'skip', got {on_missing!r}")
    rows = []
    kept_ids = []
    skipped: list[tuple[str, str]] = []
    for sample in samples:
        try:
            rows.append([compute_feature(sample, name, inputs) for name in feature_names])
        except MissingInputError as exc:
            if on_missing == "error":
                raise
            skipped.append((sample.sample_id, str(exc)))
            continue
        kept_ids.append(sample.sample_id)
    X = np.asarray(rows, dtype=np.float64).reshape(len(kept_ids), len(feature_names))
    return FeatureMatrix(X=X, feature_names=list(feature_names), sample_ids=kept_ids, skipped=skipped)


def align_targets(matrix: FeatureMatrix, targets: Mapping[str, float]) -> tuple[np.ndarray, np.ndarray]:
    """Rows of the matrix that have a target, in matrix order."""
    rows = [i for i, sample_id in enumerate(matrix.sample_ids) if sample_id in targets]
    if not rows:
        raise ValueError("no overlap between feature rows and target ids")
    X = matrix.X[rows]
    y = np.asarray([targets[matrix.sample_ids[i]] for i in rows])
    return X, y


# ---------------------------------------------------------------------------
# The trained metric


@dataclass
class VCRScoreModel:
    ensemble: GradientBoostedRegressor
    feature_names: list[str]
    clamp: bool = True
    target: str = "mean"

    def predict(self, X) -> np.ndarray:
        X = check_matrix(X, "X")
        if X.shape[1] != len(self.feature_names):
            raise ValueError(
                f"X has {X.shape[1]} columns, the model expects "
                f"{len(self.feature_names)} ({', '.join(self.feature_names)})"
            )
        raw = self.ensemble.predict(X)
        if self.clamp:
            return np.clip(raw, 0.0, 1.0)
        return raw


def train_score_model(
    X,
    y,
    feature_names: Sequence[str] = DEFAULT_FEATURES,
    config: Mapping | None = None,
    clamp: bool = True,
    target: str = "mean",
) -> VCRScoreModel:
    """Fit the metric on feature rows X against aggregated human scores y."""
    X = check_matrix(X, "X", min_rows=2)
    y = check_vector(y, "y", length=X.shape[0])
    if X.shape[1] != len(feature_names):
        raise ValueError(
            f"feature_names lists {len(feature_names)} columns but X has {X.shape[1]}"
        )
    ensemble = GradientBoostedRegressor(**dict(config or {}))
    ensemble.fit(X, y)
    return VCRScoreModel(
        ensemble=ensemble,
        feature_names=list(feature_names),
        clamp=clamp,
        target=target,
    )


def score_model_to_dict(model: VCRScoreModel) -> dict:
    return {
        "version": FORMAT_VERSION,
        "feature_names": model.feature_names,
        "clamp": model.clamp,
        "target": model.target,
        "ensemble": model_to_dict(model.ensemble),
    }


def score_model_from_dict(payload: dict) -> VCRScoreModel:
    if not isinstance(payload, dict):
        raise ModelFormatError("metric payload must be a JSON object")
    if payload.get("version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported metric format version {payload.get('version')!r}"
        )
    for key in ("feature_names", "ensemble"):
        if key not in payload:
            raise ModelFormatError(f"metric payload lacks {key!r}")
    return VCRScoreModel(
        ensemble=model_from_dict(payload["ensemble"]),
        feature_names=[str(n) for n in payload["feature_names"]],
        clamp=bool(payload.get("clamp", True)),
        target=str(payload.get("target", "mean")),
    )


def save_score_model(model: VCRScoreModel, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(score_model_to_dict(model), handle, sort_keys=True, indent=1)
        handle.write("\n")


def load_score_model(path) -> VCRScoreModel:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not valid JSON: {exc}") from exc
    return score_model_from_dict(payload)
