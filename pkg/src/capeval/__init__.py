"""Caption evaluation toolkit.

Lexical and embedding-based caption metrics, a gradient-boosted learned
metric, rater-agreement statistics, an evaluation harness, and an HTTP
annotation service, all sharing one corpus interchange format.
"""

from .agreement import (
    DegenerateSeriesError,
    InsufficientDataError,
    UndefinedAgreementError,
    kendall_tau,
    krippendorff_alpha,
    spearman_rho,
)
from .corpus import (
    CaptionSample,
    RawScore,
    SplitSpec,
    aggregate_scores,
    filter_zero_scores,
    ingest_corpus,
    normalize_scores,
    split_corpus,
    write_corpus,
)
from .embeddings import (
    EmbeddingFamily,
    EmbeddingTable,
    ScoreChannel,
    bert_score,
    clip_score,
    clip_score_ref,
    cosine,
    load_embedding_table,
    load_score_channel,
    reference_id,
    write_embedding_table,
    write_embedding_table_binary,
    write_score_channel,
)
from .gbr import GradientBoostedRegressor, load_model, save_model
from .harness import (
    MetricReport,
    RankingView,
    agreement_tables,
    correlate_with_humans,
    emit_report,
    evaluate_corpus,
    load_report,
    model_heatmap,
    rank_models,
    ranking_correlation,
    score_histogram,
)
from .lexical import bleu4, bleu4_corpus, cider, meteor, rouge_l, tokenize
from .pool import WordPool, build_pool, load_detections, pool_precision_recall, write_detections
from .service import AnnotationService, EventStore, ScoreEvent, create_app
from .synthetic import make_feature_fixture, make_synthetic_dataset, write_synthetic_dataset
from .vcrscore import (
    DEFAULT_FEATURES,
    FeatureInputs,
    VCRScoreModel,
    align_targets,
    build_features,
    compute_feature,
    load_score_model,
    save_score_model,
    train_score_model,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationService",
    "CaptionSample",
    "DEFAULT_FEATURES",
    "DegenerateSeriesError",
    "EmbeddingFamily",
    "EmbeddingTable",
    "EventStore",
    "FeatureInputs",
    "GradientBoostedRegressor",
    "InsufficientDataError",
    "MetricReport",
    "RankingView",
    "RawScore",
    "ScoreChannel",
    "ScoreEvent",
    "SplitSpec",
    "UndefinedAgreementError",
    "VCRScoreModel",
    "WordPool",
    "aggregate_scores",
    "agreement_tables",
    "align_targets",
    "bert_score",
    "bleu4",
    "bleu4_corpus",
    "build_features",
    "build_pool",
    "cider",
    "clip_score",
    "clip_score_ref",
    "compute_feature",
    "correlate_with_humans",
    "cosine",
    "create_app",
    "emit_report",
    "evaluate_corpus",
    "filter_zero_scores",
    "ingest_corpus",
    "kendall_tau",
    "krippendorff_alpha",
    "load_detections",
    "load_embedding_table",
    "load_model",
    "load_report",
    "load_score_channel",
    "load_score_model",
    "make_feature_fixture",
    "make_synthetic_dataset",
    "meteor",
    "model_heatmap",
    "normalize_scores",
    "pool_precision_recall",
    "rank_models",
    "ranking_correlation",
    "reference_id",
    "rouge_l",
    "save_model",
    "save_score_model",
    "score_histogram",
    "spearman_rho",
    "split_corpus",
    "tokenize",
    "train_score_model",
    "write_corpus",
    "write_detections",
    "write_embedding_table",
    "write_embedding_table_binary",
    "write_score_channel",
    "write_synthetic_dataset",
]
