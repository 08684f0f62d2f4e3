"""Inter- and intra-annotator agreement statistics.

Krippendorff's alpha is computed through the coincidence-matrix
formulation and supports missing ratings; Kendall's tau and Spearman's
rho operate on paired series. All three are cross-checked in the test
suite against brute-force pairwise enumerations.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .validation import check_paired

ALPHA_LEVELS = ("nominal", "ordinal", "interval")


class InsufficientDataError(ValueError):
    """Raised when no unit carries two or more ratings."""


class UndefinedAgreementError(ValueError):
    """Raised when expected disagreement is zero (all ratings identical)."""


class DegenerateSeriesError(ValueError):
    """Raised when a correlation input has zero variance."""


def krippendorff_alpha(units: Sequence[Sequence[float | None]], level: str = "interval") -> float:
    """Krippendorff's alpha over a units x raters grid.

    ``units`` holds one row per unit; ``None`` marks a missing rating.
    Units with fewer than two ratings are ignored. ``level`` selects the
    difference function: nominal, ordinal or interval.
    """
    if level not in ALPHA_LEVELS:
        raise ValueError(f"unknown level {level!r}; expected one of {ALPHA_LEVELS}")
    pairable = []
    for row in units:
        values = [float(v) for v in row if v is not None]
        if len(values) >= 2:
            pairable.append(values)
    if not pairable:
        raise InsufficientDataError("no unit has two or more ratings")

    categories = sorted({v for values in pairable for v in values})
    index = {c: i for i, c in enumerate(categories)}
    k = len(categories)

    coincidence = np.zeros((k, k))
    for values in pairable:
        m = len(values)
        counts = np.zeros(k)
        for v in values:
            counts[index[v]] += 1
        coincidence += (np.outer(counts, counts) - np.diag(counts)) / (m - 1)

    totals = coincidence.sum(axis=0)
    n = totals.sum()
    delta = _difference_matrix(categories, totals, level)

    observed = float((coincidence * delta).sum()) / n
    expected = float((np.outer(totals, totals) * delta).sum()) / (n * (n - 1))
    if expected == 0.0:
        raise UndefinedAgreementError("all ratings are identical; alpha is undefined")
    return 1.0 - observed / expected


def _difference_matrix(categories: list[float], totals: np.ndarray, level: str) -> np.ndarray:
    k = len(categories)
    if level == "nominal":
        return 1.0 - np.eye(k)
    if level == "interval":
        values = np.asarray(categories)
        return (values[:, None] - values[None, :]) ** 2
    # Ordinal: squared count of coincidences ranked between the two
    # categories, with the endpoints half-weighted.
    delta = np.zeros((k, k))
    cumulative = np.concatenate([[0.0], np.cumsum(totals)])
    for a in range(k):
        for b in range(a + 1, k):
            between = cumulative[b + 1] - cumulative[a]
            value = (between - (totals[a] + totals[b]) / 2.0) ** 2
            delta[a, b] = delta[b, a] = value
    return delta


def kendall_tau(x, y, variant: str = "a") -> float:
    """Kendall's rank correlation over paired series.

    Variant "a" divides the concordant-discordant surplus by all pairs;
    variant "b" applies the tie correction in both series.
    """
    a, b = check_paired(x, y)
    n = a.shape[0]
    if n < 2:
        raise ValueError("kendall_tau needs at least two pairs")
    dx = np.sign(a[:, None] - a[None, :])
    dy = np.sign(b[:, None] - b[None, :])
    upper = np.triu_indices(n, k=1)
    products = dx[upper] * dy[upper]
    concordant = int((products > 0).sum())
    discordant = int((products < 0).sum())
    m = n * (n - 1) / 2.0
    if variant == "a":
        return (concordant - discordant) / m
    if variant == "b":
        tied_x = int((dx[upper] == 0).sum())
        tied_y = int((dy[upper] == 0).sum())
        denominator = math.sqrt((m - tied_x) * (m - tied_y))
        if denominator == 0.0:
            raise DegenerateSeriesError("a fully tied series leaves tau-b undefined")
        return (concordant - discordant) / denominator
    raise ValueError(f"unknown variant {variant!r}; expected 'a' or 'b'")


def spearman_rho(x, y) -> float:
    """Spearman's rank correlation with mid-ranks for ties.

    Equals 1 - 6 * sum(d^2) / (n * (n^2 - 1)) whenever all ranks are
    unique.
    """
    a, b = check_paired(x, y)
    n = a.shape[0]
    if n < 2:
        raise ValueError("spearman_rho needs at least two pairs")
    ranks_a = _midranks(a)
    ranks_b = _midranks(b)
    da = ranks_a - ranks_a.mean()
    db = ranks_b - ranks_b.mean()
    var_a = float(np.dot(da, da))
    var_b = float(np.dot(db, db))
    if var_a == 0.0 or var_b == 0.0:
        raise DegenerateSeriesError("constant series leaves spearman_rho undefined")
    return float(np.dot(da, db) / math.sqrt(var_a * var_b))


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.shape[0])
    i = 0
    while i < values.shape[0]:
        j = i
        while j + 1 < values.shape[0] and values[order[j + 1]] == values[order[i]]:
            j += 1
        # Average of 1-based positions i+1 .. j+1.
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks
