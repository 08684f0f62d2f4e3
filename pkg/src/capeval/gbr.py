"""Gradient-boosted regression trees, written from first principles.

Squared-error boosting: the model starts at the training mean, then
each stage fits a depth-limited regression tree to the current
residuals and adds its predictions scaled by the learning rate. Split
search is exhaustive over midpoint thresholds; SSE ties are broken by
the lowest feature index, then the lowest threshold, so fits are
deterministic.

Fitted models serialize to a versioned JSON payload with full-precision
reals; loading reproduces the predictions bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .validation import check_matrix, check_vector

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def find_best_split(X, y, min_samples_leaf: int):
    """Exhaustive least-squares split search.

    Candidate thresholds are midpoints between consecutive distinct
    values of each feature. Returns (sse, feature, threshold) for the
    split minimising the summed squared error of the two children, or
    None when no split leaves ``min_samples_leaf`` rows on both sides.
    Ties keep the lowest feature index, then the lowest threshold.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, n_features = X.shape
    best: tuple[float, int, float] | None = None
    for feature in range(n_features):
        order = np.argsort(X[:, feature], kind="stable")
        xs = X[order, feature]
        ys = y[order]
        boundaries = np.nonzero(xs[:-1] < xs[1:])[0]
        left_sizes = boundaries + 1
        valid = (left_sizes >= min_samples_leaf) & (n - left_sizes >= min_samples_leaf)
        boundaries = boundaries[valid]
        if boundaries.size == 0:
            continue
        cumulative = np.cumsum(ys)
        cumulative_sq = np.cumsum(ys * ys)
        n_left = boundaries + 1.0
        n_right = n - n_left
        sum_left = cumulative[boundaries]
        sq_left = cumulative_sq[boundaries]
        sum_right = cumulative[-1] - sum_left
        sq_right = cumulative_sq[-1] - sq_left
        sse = (sq_left - sum_left**2 / n_left) + (sq_right - sum_right**2 / n_right)
        j = int(np.argmin(sse))  # first minimum keeps the lowest threshold
        if best is None or sse[j] < best[0]:
            threshold = float((xs[boundaries[j]] + xs[boundaries[j] + 1]) / 2.0)
            best = (float(sse[j]), feature, threshold)
    return best


@dataclass
class RegressionTree:
    """A fitted tree as flat node arrays (children index into them)."""

    is_leaf: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    value: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if rows.size == 0:
                continue
            if self.is_leaf[node]:
                out[rows] = self.value[node]
                continue
            goes_left = X[rows, self.feature[node]] <= self.threshold[node]
            stack.append((self.left[node], rows[goes_left]))
            stack.append((self.right[node], rows[~goes_left]))
        return out

    @property
    def n_nodes(self) -> int:
        return int(self.is_leaf.shape[0])


class _TreeBuilder:
    def __init__(self, max_depth: int, min_samples_leaf: int):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.nodes: list[dict] = []

    def build(self, X: np.ndarray, y: np.ndarray) -> RegressionTree:
        self.nodes = []
        self._grow(X, y, depth=0)
        n = len(self.nodes)
        tree = RegressionTree(
            is_leaf=np.array([node["kind"] == "leaf" for node in self.nodes]),
            feature=np.array([node.get("feature", -1) for node in self.nodes], dtype=np.intp),
            threshold=np.array([node.get("threshold", 0.0) for node in self.nodes]),
            value=np.array([node.get("value", 0.0) for node in self.nodes]),
            left=np.array([node.get("left", -1) for node in self.nodes], dtype=np.intp),
            right=np.array([node.get("right", -1) for node in self.nodes], dtype=np.intp),
        )
        assert tree.n_nodes == n
        return tree

    def _grow(self, X: np.ndarray, y: np.ndarray, depth: int) -> int:
        index = len(self.nodes)
        self.nodes.append({})
        split = None
        if depth < self.max_depth and y.shape[0] >= 2 * self.min_samples_leaf and not np.all(y == y[0]):
            split = find_best_split(X, y, self.min_samples_leaf)
        if split is None:
            self.nodes[index] = {"kind": "leaf", "value": float(y.mean())}
            return index
        _, feature, threshold = split
        goes_left = X[:, feature] <= threshold
        node = {"kind": "split", "feature": feature, "threshold": threshold}
        self.nodes[index] = node
        node["left"] = self._grow(X[goes_left], y[goes_left], depth + 1)
        node["right"] = self._grow(X[~goes_left], y[~goes_left], depth + 1)
        return index


class GradientBoostedRegressor(BaseEstimator, RegressorMixin):
    """Least-squares gradient boosting over depth-limited trees.

    Parameters mirror the usual boosting knobs: number of stages,
    learning rate, tree depth, minimum leaf size, and an optional
    per-stage row subsample. With ``subsample=1.0`` the fit is fully
    deterministic; otherwise rows are drawn with the seeded generator.
    ``n_iter_no_change`` switches on validation-based early stopping.
    """

    def __init__(
        self,
        n_estimators: int = 500,
        learning_rate: float = 0.05,
        max_depth: int = 3,
        min_samples_leaf: int = 5,
        subsample: float = 1.0,
        random_state: int = 0,
        n_iter_no_change: int | None = None,
        validation_fraction: float = 0.1,
        tol: float = 1e-7,
    ):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.subsample = subsample
        self.random_state = random_state
        self.n_iter_no_change = n_iter_no_change
        self.validation_fraction = validation_fraction
        self.tol = tol

    def fit(self, X, y) -> "GradientBoostedRegressor":
        X = check_matrix(X, "X", min_rows=2)
        y = check_vector(y, "y", length=X.shape[0])
        self._check_config()

        rng = np.random.default_rng(self.random_state)
        X_valid = y_valid = None
        if self.n_iter_no_change is not None:
            n_valid = max(1, int(round(X.shape[0] * self.validation_fraction)))
            if n_valid >= X.shape[0]:
                raise ValueError("validation_fraction leaves no training rows")
            order = rng.permutation(X.shape[0])
            valid_rows, train_rows = order[:n_valid], order[n_valid:]
            X_valid, y_valid = X[valid_rows], y[valid_rows]
            X, y = X[train_rows], y[train_rows]

        n = X.shape[0]
        self.n_features_in_ = X.shape[1]
        self.base_score_ = float(y.mean())
        self.trees_: list[RegressionTree] = []
        train_mse_path = []

        builder = _TreeBuilder(self.max_depth, self.min_samples_leaf)
        prediction = np.full(n, self.base_score_)
        best_valid = np.inf
        stale = 0
        for _ in range(self.n_estimators):
            residual = y - prediction
            if self.subsample < 1.0:
                size = max(1, int(round(self.subsample * n)))
                rows = rng.choice(n, size=size, replace=False)
                rows.sort()
            else:
                rows = slice(None)
            tree = builder.build(X[rows], residual[rows])
            self.trees_.append(tree)
            prediction = prediction + self.learning_rate * tree.predict(X)
            train_mse_path.append(float(np.mean((y - prediction) ** 2)))
            if X_valid is not None:
                valid_mse = float(np.mean((y_valid - self._raw_predict(X_valid)) ** 2))
                if valid_mse < best_valid - self.tol:
                    best_valid = valid_mse
                    stale = 0
                else:
                    stale += 1
                    if stale >= self.n_iter_no_change:
                        break
        self.train_mse_path_ = np.asarray(train_mse_path)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "trees_")
        X = check_matrix(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, the model was fit with {self.n_features_in_}"
            )
        return self._raw_predict(X)

    def _raw_predict(self, X: np.ndarray) -> np.ndarray:
        out = np.full(X.shape[0], self.base_score_)
        for tree in self.trees_:
            out += self.learning_rate * tree.predict(X)
        return out

    def _check_config(self) -> None:
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be at least 1")
        if not 0.0 < self.learning_rate <= 2.0:
            raise ValueError("learning_rate must lie in (0, 2]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be at least 1")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample must lie in (0, 1]")


# ---------------------------------------------------------------------------
# Serialization


def _tree_to_nodes(tree: RegressionTree) -> list[dict]:
    nodes = []
    for i in range(tree.n_nodes):
        if tree.is_leaf[i]:
            nodes.append({"kind": "leaf", "value": float(tree.value[i])})
        else:
            nodes.append(
                {
                    "kind": "split",
                    "feature": int(tree.feature[i]),
                    "threshold": float(tree.threshold[i]),
                    "left": int(tree.left[i]),
                    "right": int(tree.right[i]),
                }
            )
    return nodes


def _tree_from_nodes(nodes: list[dict]) -> RegressionTree:
    if not nodes:
        raise ModelFormatError("a tree needs at least one node")
    is_leaf, feature, threshold, value, left, right = [], [], [], [], [], []
    for i, node in enumerate(nodes):
        kind = node.get("kind")
        if kind == "leaf":
            if "value" not in node:
                raise ModelFormatError(f"leaf node {i} lacks a value")
            is_leaf.append(True)
            feature.append(-1)
            threshold.append(0.0)
            value.append(float(node["value"]))
            left.append(-1)
            right.append(-1)
        elif kind == "split":
            for key in ("feature", "threshold", "left", "right"):
                if key not in node:
                    raise ModelFormatError(f"split node {i} lacks {key!r}")
            if not 0 <= node["left"] < len(nodes) or not 0 <= node["right"] < len(nodes):
                raise ModelFormatError(f"split node {i} references a missing child")
            is_leaf.append(False)
            feature.append(int(node["feature"]))
            threshold.append(float(node["threshold"]))
            value.append(0.0)
            left.append(int(node["left"]))
            right.append(int(node["right"]))
        else:
            raise ModelFormatError(f"node {i} has unknown kind {kind!r}")
    return RegressionTree(
        is_leaf=np.array(is_leaf),
        feature=np.array(feature, dtype=np.intp),
        threshold=np.array(threshold),
        value=np.array(value),
        left=np.array(left, dtype=np.intp),
        right=np.array(right, dtype=np.intp),
    )


def model_to_dict(estimator: GradientBoostedRegressor) -> dict:
    check_is_fitted(estimator, "trees_")
    return {
        "version": FORMAT_VERSION,
        "config": estimator.get_params(),
        "base_score": estimator.base_score_,
        "n_features": estimator.n_features_in_,
        "trees": [{"nodes": _tree_to_nodes(tree)} for tree in estimator.trees_],
    }


def model_from_dict(payload: dict) -> GradientBoostedRegressor:
    if not isinstance(payload, dict):
        raise ModelFormatError("model payload must be a JSON object")
    version = payload.get("version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format version {version!r} (expected {FORMAT_VERSION})"
        )
    for key in ("config", "base_score", "n_features", "trees"):
        if key not in payload:
            raise ModelFormatError(f"model payload lacks {key!r}")
    estimator = GradientBoostedRegressor(**payload["config"])
    estimator.base_score_ = float(payload["base_score"])
    estimator.n_features_in_ = int(payload["n_features"])
    estimator.trees_ = [
        _tree_from_nodes(tree.get("nodes", [])) for tree in payload["trees"]
    ]
    estimator.train_mse_path_ = np.asarray(payload.get("train_mse_path", []))
    return estimator


def save_model(estimator: GradientBoostedRegressor, path) -> None:
    """Write the versioned JSON payload; byte-stable for identical fits."""
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(model_to_dict(estimator), handle, sort_keys=True, indent=1)
        handle.write("\n")


def load_model(path) -> GradientBoostedRegressor:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not valid JSON: {exc}") from exc
    return model_from_dict(payload)
