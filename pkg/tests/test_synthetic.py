"""The deterministic fixture generators."""

import numpy as np

from capeval.corpus import OWN_SCALE, aggregate_scores, ingest_corpus
from capeval.embeddings import load_embedding_table, load_score_channel
from capeval.pool import load_detections
from capeval.synthetic import (
    DEFAULT_MODEL_SKILLS,
    PHASES,
    TAGGER_NOISE,
    make_feature_fixture,
    make_synthetic_dataset,
    write_synthetic_dataset,
)
from capeval.vcrscore import DEFAULT_FEATURES, build_features


class TestSyntheticDataset:
    def test_shape_and_coverage(self):
        ds = make_synthetic_dataset(n_images=6)
        assert len(ds.samples) == 6 * len(DEFAULT_MODEL_SKILLS)
        for sample in ds.samples:
            assert len(sample.references) == 4
            assert len(sample.raw_scores) == len(TAGGER_NOISE) * len(PHASES)
            assert all(rs.score in OWN_SCALE for rs in sample.raw_scores)
            assert sample.sample_id in ds.quality

    def test_same_seed_same_dataset(self):
        a = make_synthetic_dataset(n_images=4, seed=5)
        b = make_synthetic_dataset(n_images=4, seed=5)
        assert [s.candidate for s in a.samples] == [s.candidate for s in b.samples]
        assert a.quality == b.quality
        assert a.inputs.channels["vilt"].values == b.inputs.channels["vilt"].values
        fam_a = a.inputs.families["mcip"]
        fam_b = b.inputs.families["mcip"]
        for key in fam_a.captions.vectors:
            assert np.array_equal(fam_a.captions.vectors[key], fam_b.captions.vectors[key])

    def test_different_seed_differs(self):
        a = make_synthetic_dataset(n_images=4, seed=5)
        b = make_synthetic_dataset(n_images=4, seed=6)
        assert [s.candidate for s in a.samples] != [s.candidate for s in b.samples]

    def test_every_default_feature_is_computable(self):
        ds = make_synthetic_dataset(n_images=5)
        matrix = build_features(ds.samples, ds.inputs, DEFAULT_FEATURES)
        assert matrix.X.shape == (len(ds.samples), len(DEFAULT_FEATURES))
        assert matrix.skipped == []
        assert np.all(np.isfinite(matrix.X))

    def test_signals_track_latent_quality(self):
        ds = make_synthetic_dataset(n_images=20)
        matrix = build_features(ds.samples, ds.inputs, DEFAULT_FEATURES)
        q = np.array([ds.quality[s] for s in matrix.sample_ids])
        for j in range(matrix.X.shape[1]):
            assert np.corrcoef(matrix.X[:, j], q)[0, 1] > 0.5
        agg = aggregate_scores(ds.samples)
        h = np.array([agg[s] for s in matrix.sample_ids])
        assert np.corrcoef(h, q)[0, 1] > 0.9

    def test_rater_noise_orders_taggers(self):
        ds = make_synthetic_dataset(n_images=30)
        errors = {}
        for tagger in TAGGER_NOISE:
            diffs = [
                rs.score - ds.quality[s.sample_id]
                for s in ds.samples
                for rs in s.raw_scores
                if rs.tagger == tagger
            ]
            errors[tagger] = float(np.std(diffs))
        assert errors["t2"] > errors["t1"]

    def test_written_files_round_trip(self, tmp_path):
        ds = make_synthetic_dataset(n_images=3)
        paths = write_synthetic_dataset(ds, tmp_path)
        loaded = ingest_corpus(paths["corpus"])
        assert [s.sample_id for s in loaded] == [s.sample_id for s in ds.samples]
        assert loaded[0].raw_scores == ds.samples[0].raw_scores
        images = load_embedding_table(paths["images"], kind="image")
        assert set(images.vectors) == set(ds.inputs.families["mcip"].images.vectors)
        captions = load_embedding_table(paths["captions"], kind="caption")
        for key, vec in ds.inputs.families["mcip"].captions.vectors.items():
            assert np.array_equal(captions.vectors[key], vec)
        tokens = load_embedding_table(paths["tokens"], kind="token-sequence")
        assert len(tokens) == len(ds.inputs.token_embeddings["bert"])
        channel = load_score_channel(paths["vilt"], name="vilt")
        assert channel.values == ds.inputs.channels["vilt"].values
        detections = load_detections(paths["detections"])
        assert detections == ds.inputs.detections


class TestFeatureFixture:
    def test_shape_and_range(self):
        X, y = make_feature_fixture()
        assert X.shape == (600, 4)
        assert y.shape == (600,)
        assert y.min() >= 0.0 and y.max() <= 1.0

    def test_deterministic(self):
        X1, y1 = make_feature_fixture(seed=7)
        X2, y2 = make_feature_fixture(seed=7)
        assert np.array_equal(X1, X2)
        assert np.array_equal(y1, y2)

    def test_each_column_carries_signal(self):
        X, y = make_feature_fixture()
        for j in range(X.shape[1]):
            assert np.corrcoef(X[:, j], y)[0, 1] > 0.1

    def test_no_single_column_explains_everything(self):
        X, y = make_feature_fixture()
        for j in range(X.shape[1]):
            assert np.corrcoef(X[:, j], y)[0, 1] < 0.9
