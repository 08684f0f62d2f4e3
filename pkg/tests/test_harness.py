"""Corpus evaluation, rankings, and report emission."""

import numpy as np
import pytest

from capeval.agreement import DegenerateSeriesError, spearman_rho
from capeval.corpus import CaptionSample, RawScore, aggregate_scores
from capeval.harness import (
    MetricReport,
    correlate_with_humans,
    emit_report,
    evaluate_corpus,
    load_report,
    model_heatmap,
    rank_models,
    ranking_correlation,
    score_histogram,
)
from capeval.synthetic import make_synthetic_dataset
from capeval.vcrscore import DEFAULT_FEATURES, build_features, train_score_model

ALL_METRICS = [
    "bleu4",
    "rouge_l",
    "meteor",
    "cider",
    "pool_precision",
    "pool_recall",
    "vilt",
    "mcip_score",
    "mcip_score_ref",
    "bert_f1",
]


@pytest.fixture(scope="module")
def dataset():
    return make_synthetic_dataset(n_images=8)


@pytest.fixture(scope="module")
def trained(dataset):
    matrix = build_features(dataset.samples, dataset.inputs, DEFAULT_FEATURES)
    agg = aggregate_scores(dataset.samples)
    y = np.array([agg[s] for s in matrix.sample_ids])
    return train_score_model(matrix.X, y, config={"n_estimators": 30})


class TestEvaluateCorpus:
    def test_full_table_shape(self, dataset, trained):
        report = evaluate_corpus(
            dataset.samples, ALL_METRICS + ["vcr"], dataset.inputs, trained
        )
        assert report.metrics == ALL_METRICS + ["vcr"]
        n = len(dataset.samples)
        for metric in report.metrics:
            assert len(report.scores[metric]) == n
        models = {s.model_id for s in dataset.samples}
        for metric in report.metrics:
            assert set(report.model_means[metric]) == models
            assert set(report.rankings[metric]) == models

    def test_model_mean_is_the_arithmetic_mean(self, dataset):
        report = evaluate_corpus(dataset.samples, ["rouge_l"], dataset.inputs)
        column = report.scores["rouge_l"]
        for model, mean in report.model_means["rouge_l"].items():
            values = [
                column[s.sample_id]
                for s in dataset.samples
                if s.model_id == model
            ]
            assert mean == float(np.mean(values))
            assert min(values) <= mean <= max(values)

    def test_cider_needs_two_image_groups(self, dataset):
        one_image = [s for s in dataset.samples if s.image_id == "img000"]
        report = evaluate_corpus(one_image, ["cider", "rouge_l"], dataset.inputs)
        assert "cider" not in report.scores
        assert any("degenerate" in w for w in report.warnings)
        assert len(report.scores["rouge_l"]) == len(one_image)

    def test_unknown_metric_is_an_error(self, dataset):
        with pytest.raises(ValueError, match="spice"):
            evaluate_corpus(dataset.samples, ["spice"], dataset.inputs)

    def test_vcr_requires_a_trained_model(self, dataset):
        with pytest.raises(ValueError, match="vcr"):
            evaluate_corpus(dataset.samples, ["vcr"], dataset.inputs)

    def test_missing_input_gives_absent_cell_not_zero(self, dataset):
        victim = dataset.samples[0].sample_id
        family = dataset.inputs.families["mcip"]
        saved = family.captions.vectors.pop(victim)
        try:
            report = evaluate_corpus(dataset.samples, ["mcip_score"], dataset.inputs)
        finally:
            family.captions.vectors[victim] = saved
        assert victim not in report.scores["mcip_score"]
        assert len(report.scores["mcip_score"]) == len(dataset.samples) - 1
        assert any(victim in w for w in report.warnings)

    def test_duplicate_sample_ids_rejected(self, dataset):
        doubled = [dataset.samples[0], dataset.samples[0]]
        with pytest.raises(ValueError, match="duplicate"):
            evaluate_corpus(doubled, ["rouge_l"], dataset.inputs)


class TestCorrelateWithHumans:
    def test_identical_column_gives_one(self, dataset):
        agg = aggregate_scores(dataset.samples)
        report = evaluate_corpus(dataset.samples, ["vilt"], dataset.inputs)
        report.scores["vilt"] = dict(agg)
        result = correlate_with_humans(report, agg)
        assert result["vilt"] == pytest.approx(1.0)

    def test_reversed_column_gives_minus_one(self, dataset):
        agg = aggregate_scores(dataset.samples)
        report = evaluate_corpus(dataset.samples, ["vilt"], dataset.inputs)
        report.scores["vilt"] = {s: -v for s, v in agg.items()}
        result = correlate_with_humans(report, agg)
        assert result["vilt"] == pytest.approx(-1.0)

    def test_missing_human_score_is_an_error(self, dataset):
        report = evaluate_corpus(dataset.samples, ["vilt"], dataset.inputs)
        agg = aggregate_scores(dataset.samples)
        agg.pop(dataset.samples[0].sample_id)
        with pytest.raises(ValueError, match="human score"):
            correlate_with_humans(report, agg)

    def test_constant_column_raises_or_skips(self, dataset):
        agg = aggregate_scores(dataset.samples)
        report = evaluate_corpus(dataset.samples, ["vilt"], dataset.inputs)
        report.scores["vilt"] = {s: 0.5 for s in report.sample_ids}
        with pytest.raises(DegenerateSeriesError):
            correlate_with_humans(report, agg)
        result = correlate_with_humans(report, agg, on_degenerate="skip")
        assert "vilt" not in result
        assert any("rho omitted" in w for w in report.warnings)

    def test_result_is_stored_on_the_report(self, dataset):
        agg = aggregate_scores(dataset.samples)
        report = evaluate_corpus(dataset.samples, ["rouge_l"], dataset.inputs)
        result = correlate_with_humans(report, agg)
        assert report.correlations == result


class TestModelHeatmap:
    def test_matches_direct_per_slice_spearman(self, dataset):
        agg = aggregate_scores(dataset.samples)
        report = evaluate_corpus(dataset.samples, ["rouge_l"], dataset.inputs)
        grid = model_heatmap(report, agg, min_samples=2)
        for model, row in grid.items():
            ids = [s.sample_id for s in dataset.samples if s.model_id == model]
            expected = spearman_rho(
                [report.scores["rouge_l"][s] for s in ids], [agg[s] for s in ids]
            )
            assert row["rouge_l"] == expected

    def test_small_slices_warn(self, dataset):
        agg = aggregate_scores(dataset.samples)
        report = evaluate_corpus(dataset.samples, ["rouge_l"], dataset.inputs)
        model_heatmap(report, agg, min_samples=1000)
        assert any(w.startswith("heatmap:") for w in report.warnings)


def rated_sample(sample_id, image_id, model_id, ratings):
    return CaptionSample(
        sample_id=sample_id,
        image_id=image_id,
        model_id=model_id,
        candidate="x",
        references=["x"],
        raw_scores=[
            RawScore(tagger=f"t{i}", phase=1, score=v) for i, v in enumerate(ratings)
        ],
    )


def hand_corpus():
    return [
        rated_sample("i1:a", "i1", "a", [1.0, 1.0, 0.5]),
        rated_sample("i1:b", "i1", "b", [0.5, 0.5]),
        rated_sample("i1:c", "i1", "c", [0.0, 0.25, 0.25]),
        rated_sample("i2:a", "i2", "a", [0.75]),
        rated_sample("i2:b", "i2", "b", [1.0, 0.0, 0.0]),
        rated_sample("i2:c", "i2", "c", [0.25]),
    ]


class TestRankModels:
    def test_mean_sum_totals(self):
        view = rank_models(hand_corpus(), "mean-sum")
        assert view.totals["a"] == 2.5 / 3 + 0.75
        assert view.totals["b"] == 0.5 + 1.0 / 3
        assert view.totals["c"] == 0.5 / 3 + 0.25
        assert view.ranking == ["a", "b", "c"]
        assert view.tied_groups == []
        assert view.n_images == 2
        assert view.per_hundred["a"] == view.totals["a"] * 50.0

    def test_voting_sum_uses_the_mode(self):
        view = rank_models(hand_corpus(), "voting-sum")
        assert view.totals["a"] == 1.0 + 0.75
        assert view.totals["b"] == 0.5 + 0.0
        assert view.totals["c"] == 0.25 + 0.25
        assert view.ranking == ["a", "b", "c"]
        assert view.tied_groups == [["b", "c"]]

    def test_trimmed_sum_drops_best_and_worst_per_image(self):
        view = rank_models(hand_corpus(), "trimmed-sum")
        assert view.totals["a"] == 0.0
        assert view.totals["b"] == 0.5 + 1.0 / 3
        assert view.totals["c"] == 0.0
        assert view.ranking == ["b", "a", "c"]
        assert view.tied_groups == [["a", "c"]]

    def test_trimmed_mass_invariant_on_equal_scores(self):
        samples = []
        rng = np.random.default_rng(4)
        models = ["a", "b", "c", "d", "e"]
        for i in range(10):
            value = float(rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]))
            for model in models:
                samples.append(
                    rated_sample(f"i{i}:{model}", f"i{i}", model, [value, value])
                )
        plain = rank_models(samples, "mean-sum")
        trimmed = rank_models(samples, "trimmed-sum")
        expected = (len(models) - 2) / len(models) * sum(plain.totals.values())
        assert sum(trimmed.totals.values()) == pytest.approx(expected, abs=1e-12)

    def test_missing_coverage_is_an_error(self):
        corpus = hand_corpus()[:-1]
        with pytest.raises(ValueError, match="i2"):
            rank_models(corpus, "mean-sum")

    def test_trimmed_needs_three_models(self):
        corpus = [s for s in hand_corpus() if s.model_id != "c"]
        with pytest.raises(ValueError, match="three models"):
            rank_models(corpus, "trimmed-sum")

    def test_unknown_view_rejected(self):
        with pytest.raises(ValueError, match="view"):
            rank_models(hand_corpus(), "median-sum")


class TestRankingCorrelation:
    def test_identity_is_one(self):
        ranking = ["m1", "m2", "m3", "m4", "m5", "m6"]
        assert ranking_correlation(ranking, ranking) == pytest.approx(1.0)

    def test_adjacent_swap_among_six(self):
        a = ["m1", "m2", "m3", "m4", "m5", "m6"]
        b = ["m1", "m2", "m4", "m3", "m5", "m6"]
        assert ranking_correlation(a, b) == pytest.approx(1 - 12 / 210, abs=1e-12)

    def test_full_reversal_is_minus_one(self):
        a = ["m1", "m2", "m3", "m4", "m5", "m6"]
        assert ranking_correlation(a, list(reversed(a))) == pytest.approx(-1.0)

    def test_mismatched_sets_rejected(self):
        with pytest.raises(ValueError, match="model sets"):
            ranking_correlation(["a", "b"], ["a", "c"])


class TestScoreHistogram:
    def test_bin_boundaries(self):
        counts = score_histogram([0.0, 0.049, 0.05, 0.999, 1.0], bins=20)
        assert counts[0] == 2
        assert counts[1] == 1
        assert counts[19] == 2
        assert sum(counts) == 5

    def test_outliers_clip_inward(self):
        counts = score_histogram([-5.0, 7.0], bins=20)
        assert counts[0] == 1
        assert counts[19] == 1

    def test_bad_bins_rejected(self):
        with pytest.raises(ValueError):
            score_histogram([0.5], bins=0)


class TestReportFiles:
    def test_round_trip_identity(self, dataset, tmp_path):
        agg = aggregate_scores(dataset.samples)
        report = evaluate_corpus(dataset.samples, ["rouge_l", "vilt"], dataset.inputs)
        correlate_with_humans(report, agg)
        model_heatmap(report, agg, min_samples=2)
        emit_report(report, tmp_path)
        assert load_report(tmp_path) == report

    def test_double_emission_is_byte_identical(self, dataset, tmp_path):
        report = evaluate_corpus(dataset.samples, ["rouge_l"], dataset.inputs)
        views = [rank_models(dataset.samples, view) for view in ("mean-sum", "voting-sum")]
        paths_a = emit_report(report, tmp_path / "a", views=views)
        paths_b = emit_report(report, tmp_path / "b", views=views)
        for key in paths_a:
            assert paths_a[key].read_bytes() == paths_b[key].read_bytes()

    def test_empty_metric_set_gives_headers(self, dataset, tmp_path):
        report = evaluate_corpus(dataset.samples, [], dataset.inputs)
        paths = emit_report(report, tmp_path)
        lines = paths["model_means"].read_text().splitlines()
        assert lines[0] == "model"
        corr = paths["correlations"].read_text().splitlines()
        assert corr == ["metric,spearman_vs_human"]
        assert load_report(tmp_path) == report

    def test_absent_cells_emit_empty_fields(self, dataset, tmp_path):
        report = MetricReport(
            metrics=["m"],
            sample_ids=["s1", "s2"],
            models={"s1": "a", "s2": "a"},
            scores={"m": {"s1": 0.5}},
        )
        paths = emit_report(report, tmp_path)
        rows = paths["scores"].read_text().splitlines()
        assert rows[1] == "s1,a,0.5"
        assert rows[2] == "s2,a,"
