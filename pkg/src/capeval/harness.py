"""Corpus-level evaluation: score tables, correlations, and rankings.

This module orchestrates the individual metrics over a whole corpus and
reduces the results to the tables an evaluation run needs: per-sample
scores, per-model means, agreement with human ratings, per-model
correlation grids, and model rankings under several aggregation views.
All reductions are deterministic so emitted reports are byte-stable.
"""

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .agreement import (
    ALPHA_LEVELS,
    DegenerateSeriesError,
    InsufficientDataError,
    UndefinedAgreementError,
    kendall_tau,
    krippendorff_alpha,
    spearman_rho,
)
from .corpus import CaptionSample, aggregate_scores
from .lexical import bleu4, cider, meteor, rouge_l, tokenize
from .vcrscore import (
    FeatureInputs,
    MissingInputError,
    VCRScoreModel,
    build_features,
    compute_feature,
)

LEXICAL_METRICS = ("bleu4", "rouge_l", "meteor", "cider")
RANKING_VIEWS = ("voting-sum", "mean-sum", "trimmed-sum")
HISTOGRAM_BINS = 20


@dataclass
class MetricReport:
    """Everything an evaluation run produces, in plain containers."""

    metrics: list[str]
    sample_ids: list[str]
    models: dict[str, str]
    scores: dict[str, dict[str, float]]
    model_means: dict[str, dict[str, float]] = field(default_factory=dict)
    rankings: dict[str, list[str]] = field(default_factory=dict)
    correlations: dict[str, float] = field(default_factory=dict)
    heatmap: dict[str, dict[str, float]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


@dataclass
class RankingView:
    """Models ordered by a per-image aggregate of human scores."""

    kind: str
    totals: dict[str, float]
    per_hundred: dict[str, float]
    ranking: list[str]
    tied_groups: list[list[str]]
    n_images: int


def known_metrics(inputs: FeatureInputs, score_model: VCRScoreModel | None = None) -> list[str]:
    """Every metric name the given inputs can support."""
    names = list(LEXICAL_METRICS) + ["pool_precision", "pool_recall"]
    names += sorted(inputs.channels)
    for family in sorted(inputs.families):
        names += [f"{family}_score", f"{family}_score_ref"]
    for family in sorted(inputs.token_embeddings):
        names += [f"{family}_precision", f"{family}_recall", f"{family}_f1"]
    if score_model is not None:
        names.append("vcr")
    return names


def evaluate_corpus(
    samples: Sequence[CaptionSample],
    metrics: Sequence[str],
    inputs: FeatureInputs | None = None,
    score_model: VCRScoreModel | None = None,
) -> MetricReport:
    """Compute the requested metric columns over the corpus.

    Metrics a sample lacks inputs for get an absent cell plus a warning,
    never a zero. Requesting a metric whose backing structure (channel,
    embedding family, trained model) is not loaded at all is an error.
    """
    inputs = inputs or FeatureInputs()
    seen: set[str] = set()
    for sample in samples:
        if sample.sample_id in seen:
            raise ValueError(f"duplicate sample id {sample.sample_id!r}")
        seen.add(sample.sample_id)
    supported = known_metrics(inputs, score_model)
    unknown = [m for m in metrics if m not in supported]
    if unknown:
        raise ValueError(
            f"cannot compute {', '.join(sorted(unknown))}; "
            f"available here: {', '.join(supported)}"
        )

    report = MetricReport(
        metrics=list(metrics),
        sample_ids=[s.sample_id for s in samples],
        models={s.sample_id: s.model_id for s in samples},
        scores={},
    )
    tokens = {s.sample_id: tokenize(s.candidate) for s in samples}
    reference_tokens = {
        s.sample_id: [tokenize(r) for r in s.references] for s in samples
    }

    for metric in metrics:
        if metric == "cider":
            result = cider(
                tokens,
                reference_tokens,
                groups={s.sample_id: s.image_id for s in samples},
            )
            if result.degenerate_idf:
                report.warnings.append(
                    "cider: fewer than two image groups, idf is degenerate; "
                    "column omitted"
                )
                continue
            report.scores[metric] = dict(result.scores)
        elif metric in ("bleu4", "rouge_l", "meteor"):
            fn = {"bleu4": bleu4, "rouge_l": rouge_l, "meteor": meteor}[metric]
            report.scores[metric] = {
                s.sample_id: fn(tokens[s.sample_id], reference_tokens[s.sample_id])
                for s in samples
            }
        elif metric == "vcr":
            matrix = build_features(
                samples, inputs, score_model.feature_names, on_missing="skip"
            )
            column: dict[str, float] = {}
            if matrix.sample_ids:
                predictions = score_model.predict(matrix.X)
                column = dict(zip(matrix.sample_ids, predictions.tolist()))
            for sample_id, reason in matrix.skipped:
                report.warnings.append(f"vcr: {reason}")
            report.scores[metric] = column
        else:
            column = {}
            for sample in samples:
                try:
                    column[sample.sample_id] = compute_feature(sample, metric, inputs)
                except MissingInputError as exc:
                    report.warnings.append(f"{metric}: {exc}")
            report.scores[metric] = column

    _fill_model_means(report)
    return report


def _fill_model_means(report: MetricReport) -> None:
    by_model: dict[str, list[str]] = {}
    for sample_id in report.sample_ids:
        by_model.setdefault(report.models[sample_id], []).append(sample_id)
    for metric, column in report.scores.items():
        means: dict[str, float] = {}
        for model in sorted(by_model):
            values = [column[s] for s in by_model[model] if s in column]
            if values:
                means[model] = float(np.mean(values))
            else:
                report.warnings.append(
                    f"{metric}: model {model!r} has no scored samples; mean omitted"
                )
        report.model_means[metric] = means
        report.rankings[metric] = sorted(means, key=lambda m: (-means[m], m))


def correlate_with_humans(
    report: MetricReport,
    human_scores: Mapping[str, float],
    on_degenerate: str = "error",
) -> dict[str, float]:
    """Spearman of each metric column against the human scores.

    Every sample in the report must have a human score. A constant
    metric column either raises or, with ``on_degenerate="skip"``, is
    omitted with a warning. The result is also stored on the report.
    """
    if on_degenerate not in ("error", "skip"):
        raise ValueError(f"on_degenerate must be 'error' or 'skip', got {on_degenerate!r}")
    missing = [s for s in report.sample_ids if s not in human_scores]
    if missing:
        raise ValueError(
            f"{len(missing)} samples have no human score, first {missing[0]!r}"
        )
    correlations: dict[str, float] = {}
    for metric in report.metrics:
        column = report.scores.get(metric, {})
        pairs = [(column[s], human_scores[s]) for s in report.sample_ids if s in column]
        if len(pairs) < 2:
            report.warnings.append(f"{metric}: fewer than two scored samples; rho omitted")
            continue
        x, y = zip(*pairs)
        try:
            correlations[metric] = spearman_rho(x, y)
        except DegenerateSeriesError as exc:
            if on_degenerate == "error":
                raise
            report.warnings.append(f"{metric}: {exc}; rho omitted")
    report.correlations = correlations
    return correlations


def model_heatmap(
    report: MetricReport,
    human_scores: Mapping[str, float],
    min_samples: int = 30,
) -> dict[str, dict[str, float]]:
    """Per-model Spearman of each metric against the human scores.

    Slices with fewer than ``min_samples`` samples still correlate but
    get a warning; degenerate slices are omitted with a warning.
    """
    by_model: dict[str, list[str]] = {}
    for sample_id in report.sample_ids:
        by_model.setdefault(report.models[sample_id], []).append(sample_id)
    grid: dict[str, dict[str, float]] = {}
    for model in sorted(by_model):
        if len(by_model[model]) < min_samples:
            report.warnings.append(
                f"heatmap: model {model!r} has only {len(by_model[model])} samples"
            )
        row: dict[str, float] = {}
        for metric in report.metrics:
            column = report.scores.get(metric, {})
            pairs = [
                (column[s], human_scores[s])
                for s in by_model[model]
                if s in column and s in human_scores
            ]
            if len(pairs) < 2:
                continue
            x, y = zip(*pairs)
            try:
                row[metric] = spearman_rho(x, y)
            except DegenerateSeriesError:
                report.warnings.append(
                    f"heatmap: model {model!r} metric {metric!r} is degenerate; omitted"
                )
        grid[model] = row
    report.heatmap = grid
    return grid


def rank_models(
    samples: Sequence[CaptionSample],
    view: str = "mean-sum",
    tie_seed: int = 0,
) -> RankingView:
    """Order the generator models by summed per-image human scores.

    Per (image, model) the ratings aggregate by majority vote for the
    voting view and by mean otherwise. The trimmed view additionally
    drops, within each image, the single best and single worst model
    entry before summing; score ties there resolve by model name so the
    result is deterministic.
    """
    if view not in RANKING_VIEWS:
        raise ValueError(f"unknown view {view!r}; expected one of {RANKING_VIEWS}")
    method = "vote" if view == "voting-sum" else "mean"
    per_sample = aggregate_scores(samples, method=method, tie_seed=tie_seed)
    cells: dict[str, dict[str, float]] = {}
    for sample in samples:
        row = cells.setdefault(sample.image_id, {})
        if sample.model_id in row:
            raise ValueError(
                f"image {sample.image_id!r} has two entries for model {sample.model_id!r}"
            )
        row[sample.model_id] = per_sample[sample.sample_id]

    models = sorted({m for row in cells.values() for m in row})
    for image_id, row in cells.items():
        gaps = [m for m in models if m not in row]
        if gaps:
            raise ValueError(f"image {image_id!r} has no entry for model {gaps[0]!r}")
    if view == "trimmed-sum" and len(models) < 3:
        raise ValueError("trimmed-sum needs at least three models per image")

    totals = {model: 0.0 for model in models}
    for image_id in sorted(cells):
        row = cells[image_id]
        kept = list(row.items())
        if view == "trimmed-sum":
            drop_max = max(kept, key=lambda item: (item[1], item[0]))
            kept.remove(drop_max)
            drop_min = min(kept, key=lambda item: (item[1], item[0]))
            kept.remove(drop_min)
        for model, value in kept:
            totals[model] += value

    ranking = sorted(models, key=lambda m: (-totals[m], m))
    groups: dict[float, list[str]] = {}
    for model in ranking:
        groups.setdefault(totals[model], []).append(model)
    tied_groups = [group for group in groups.values() if len(group) > 1]
    n_images = len(cells)
    per_hundred = {m: totals[m] * 100.0 / n_images for m in models}
    return RankingView(
        kind=view,
        totals=totals,
        per_hundred=per_hundred,
        ranking=ranking,
        tied_groups=tied_groups,
        n_images=n_images,
    )


def ranking_correlation(ranking_a: Sequence[str], ranking_b: Sequence[str]) -> float:
    """Spearman over the positions two rankings give the same models."""
    if sorted(ranking_a) != sorted(ranking_b):
        raise ValueError("rankings cover different model sets")
    if len(set(ranking_a)) != len(ranking_a):
        raise ValueError("rankings contain repeated models")
    pos_a = {model: i for i, model in enumerate(ranking_a)}
    pos_b = {model: i for i, model in enumerate(ranking_b)}
    models = sorted(ranking_a)
    return spearman_rho(
        [pos_a[m] for m in models], [pos_b[m] for m in models]
    )


def agreement_tables(
    records: Sequence[tuple[str, str, int, float]],
    level: str = "interval",
    variant: str = "a",
) -> dict:
    """Rater reliability tables from (sample, tagger, phase, score) rows.

    Per tagger: alpha and tau between that tagger's phase-1 and phase-2
    scores over the samples rated in both. Overall: alpha across every
    (tagger, phase) column. Cells without enough usable data carry an
    insufficiency marker instead of a number; nothing raises.
    """
    if level not in ALPHA_LEVELS:
        raise ValueError(f"unknown level {level!r}; expected one of {ALPHA_LEVELS}")
    if variant not in ("a", "b"):
        raise ValueError(f"unknown variant {variant!r}; expected 'a' or 'b'")

    by_tagger: dict[str, dict[int, dict[str, float]]] = {}
    for sample_id, tagger, phase, score in records:
        by_tagger.setdefault(tagger, {}).setdefault(phase, {})[sample_id] = score

    per_tagger: dict[str, dict] = {}
    for tagger in sorted(by_tagger):
        first = by_tagger[tagger].get(1, {})
        second = by_tagger[tagger].get(2, {})
        paired = sorted(set(first) & set(second))
        if len(paired) < 2:
            per_tagger[tagger] = {
                "insufficient": f"only {len(paired)} samples scored in both phases"
            }
            continue
        x = [first[s] for s in paired]
        y = [second[s] for s in paired]
        cell: dict = {"n_paired": len(paired)}
        try:
            cell["alpha"] = krippendorff_alpha(list(zip(x, y)), level=level)
        except (InsufficientDataError, UndefinedAgreementError) as exc:
            cell["alpha"] = None
            cell["alpha_insufficient"] = str(exc)
        try:
            cell["tau"] = kendall_tau(x, y, variant=variant)
        except DegenerateSeriesError as exc:
            cell["tau"] = None
            cell["tau_insufficient"] = str(exc)
        per_tagger[tagger] = cell

    columns = sorted({(tagger, phase) for _, tagger, phase, _ in records})
    grid: dict[str, dict[tuple[str, int], float]] = {}
    for sample_id, tagger, phase, score in records:
        grid.setdefault(sample_id, {})[(tagger, phase)] = score
    units = [
        [grid[sample_id].get(column) for column in columns]
        for sample_id in sorted(grid)
    ]
    overall: dict = {"n_units": len(units), "n_raters": len(columns)}
    try:
        overall["alpha"] = krippendorff_alpha(units, level=level)
    except (InsufficientDataError, UndefinedAgreementError) as exc:
        overall["alpha"] = None
        overall["insufficient"] = str(exc)
    return {
        "level": level,
        "variant": variant,
        "per_tagger": per_tagger,
        "overall": overall,
    }


def score_histogram(values: Sequence[float], bins: int = HISTOGRAM_BINS) -> list[int]:
    """Counts over uniform bins spanning [0, 1]; outliers clip inward."""
    if bins < 1:
        raise ValueError("bins must be positive")
    counts = [0] * bins
    for value in values:
        index = int(np.clip(value, 0.0, 1.0) * bins)
        counts[min(index, bins - 1)] += 1
    return counts


# ---------------------------------------------------------------------------
# Report files


def emit_report(
    report: MetricReport,
    out_dir,
    views: Sequence[RankingView] = (),
    bins: int = HISTOGRAM_BINS,
) -> dict[str, Path]:
    """Write the report as structured text files, byte-deterministically.

    ``report.json`` holds full fidelity for round-tripping; the CSV
    files are convenient flat views of the same numbers.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out_dir / "report.json",
        "scores": out_dir / "scores.csv",
        "model_means": out_dir / "model_means.csv",
        "correlations": out_dir / "correlations.csv",
        "heatmap": out_dir / "heatmap.csv",
        "rankings": out_dir / "rankings.json",
        "histograms": out_dir / "histograms.json",
    }

    with open(paths["report"], "w", encoding="utf-8") as handle:
        json.dump(asdict(report), handle, sort_keys=True, indent=1)
        handle.write("\n")

    with open(paths["scores"], "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["sample_id", "model_id"] + report.metrics)
        for sample_id in report.sample_ids:
            row = [sample_id, report.models[sample_id]]
            for metric in report.metrics:
                value = report.scores.get(metric, {}).get(sample_id)
                row.append("" if value is None else repr(value))
            writer.writerow(row)

    models = sorted({report.models[s] for s in report.sample_ids})
    with open(paths["model_means"], "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["model"] + report.metrics)
        for model in models:
            row = [model]
            for metric in report.metrics:
                value = report.model_means.get(metric, {}).get(model)
                row.append("" if value is None else repr(value))
            writer.writerow(row)

    with open(paths["correlations"], "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["metric", "spearman_vs_human"])
        ordered = sorted(
            report.correlations, key=lambda m: (-report.correlations[m], m)
        )
        for metric in ordered:
            writer.writerow([metric, repr(report.correlations[metric])])

    with open(paths["heatmap"], "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["model"] + report.metrics)
        for model in sorted(report.heatmap):
            row = [model]
            for metric in report.metrics:
                value = report.heatmap[model].get(metric)
                row.append("" if value is None else repr(value))
            writer.writerow(row)

    with open(paths["rankings"], "w", encoding="utf-8") as handle:
        payload = {
            "metric_rankings": report.rankings,
            "views": [asdict(view) for view in views],
        }
        json.dump(payload, handle, sort_keys=True, indent=1)
        handle.write("\n")

    histograms: dict[str, dict[str, list[int]]] = {}
    for metric in report.metrics:
        column = report.scores.get(metric, {})
        per_model: dict[str, list[int]] = {
            "all": score_histogram(list(column.values()), bins)
        }
        for model in models:
            values = [
                column[s]
                for s in report.sample_ids
                if report.models[s] == model and s in column
            ]
            per_model[model] = score_histogram(values, bins)
        histograms[metric] = per_model
    with open(paths["histograms"], "w", encoding="utf-8") as handle:
        json.dump({"bins": bins, "histograms": histograms}, handle, sort_keys=True, indent=1)
        handle.write("\n")

    return paths


def load_report(out_dir) -> MetricReport:
    """Rebuild a report from ``emit_report`` output."""
    with open(Path(out_dir) / "report.json", "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    return MetricReport(**payload)
