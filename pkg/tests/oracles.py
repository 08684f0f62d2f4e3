"""Independent brute-force oracles used to cross-check the package.

Everything here is written the slow, obvious way on purpose: plain
loops, plain dicts, direct transcriptions of the defining formulas.
None of it shares code with the implementations under test beyond the
Porter stemmer, which both sides treat as shared vocabulary.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

from capeval.stem import stem

# ---------------------------------------------------------------------------
# Longest common subsequence (recursive formulation)


def lcs_oracle(a, b) -> int:
    a = tuple(a)
    b = tuple(b)

    @lru_cache(maxsize=None)
    def rec(i: int, j: int) -> int:
        if i == 0 or j == 0:
            return 0
        if a[i - 1] == b[j - 1]:
            return rec(i - 1, j - 1) + 1
        return max(rec(i - 1, j), rec(i, j - 1))

    return rec(len(a), len(b))


def rouge_l_oracle(candidate, references, beta: float = 1.2) -> float:
    if not candidate:
        return 0.0
    best = 0.0
    for ref in references:
        length = lcs_oracle(candidate, ref)
        if length == 0:
            continue
        p = length / len(candidate)
        r = length / len(ref)
        f = ((1 + beta * beta) * p * r) / (r + beta * beta * p)
        best = max(best, f)
    return best


# ---------------------------------------------------------------------------
# BLEU (independent n-gram bookkeeping)


def bleu4_oracle(candidate, references, epsilon: float = 1e-9) -> float:
    candidate = list(candidate)
    if not candidate:
        return 0.0
    logs = []
    for n in range(1, 5):
        guesses = len(candidate) - n + 1
        if guesses <= 0:
            logs.append(math.log(epsilon))
            continue
        cand_grams: dict = {}
        for i in range(guesses):
            gram = tuple(candidate[i : i + n])
            cand_grams[gram] = cand_grams.get(gram, 0) + 1
        clipped = 0
        for gram, count in cand_grams.items():
            limit = 0
            for ref in references:
                ref_count = 0
                for i in range(len(ref) - n + 1):
                    if tuple(ref[i : i + n]) == gram:
                        ref_count += 1
                limit = max(limit, ref_count)
            clipped += min(count, limit)
        if n == 1 and clipped == 0:
            return 0.0
        logs.append(math.log(max(clipped, epsilon) / guesses))
    c = len(candidate)
    r = sorted((abs(len(ref) - c), len(ref)) for ref in references)[0][1]
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return bp * math.exp(sum(logs) / 4.0)


# ---------------------------------------------------------------------------
# METEOR (exhaustive alignment enumeration; inputs must stay tiny)


def meteor_oracle(candidate, references) -> float:
    if not candidate:
        return 0.0
    return max(_meteor_oracle_single(candidate, ref) for ref in references)


def _meteor_oracle_single(candidate, reference) -> float:
    options = []
    for i in range(len(candidate)):
        opts: list[int | None] = [None]
        for j in range(len(reference)):
            if candidate[i] == reference[j] or stem(candidate[i]) == stem(reference[j]):
                opts.append(j)
        options.append(opts)

    best_key = None
    best = None
    for assignment in itertools.product(*options):
        chosen = [j for j in assignment if j is not None]
        if len(chosen) != len(set(chosen)):
            continue
        pairs = [(i, j) for i, j in enumerate(assignment) if j is not None]
        exact = sum(candidate[i] == reference[j] for i, j in pairs)
        chunks = 0
        previous = None
        for pair in pairs:
            if previous is None or (pair[0] - 1, pair[1] - 1) != previous:
                chunks += 1
            previous = pair
        key = (exact, len(pairs), -chunks)
        if best_key is None or key > best_key:
            best_key = key
            best = (len(pairs), chunks)

    assert best is not None
    matches, chunks = best
    if matches == 0:
        return 0.0
    p = matches / len(candidate)
    r = matches / len(reference)
    fmean = 10.0 * p * r / (r + 9.0 * p)
    penalty = 0.5 * (chunks / matches) ** 3
    return fmean * (1.0 - penalty)


# ---------------------------------------------------------------------------
# CIDEr (direct tf-idf vectors)


def cider_oracle(candidates, references, groups=None, scale: float = 10.0):
    """Returns {sample_id: score}. Mirrors the defining formulas only."""
    if groups is None:
        groups = {s: s for s in candidates}

    def grams_of(tokens, n):
        stems = [stem(t) for t in tokens]
        out: dict = {}
        for i in range(len(stems) - n + 1):
            gram = tuple(stems[i : i + n])
            out[gram] = out.get(gram, 0) + 1
        return out

    group_ids = sorted(set(groups[s] for s in candidates))
    n_groups = len(group_ids)
    if n_groups < 2:
        return {s: 0.0 for s in candidates}

    df = [dict() for _ in range(4)]
    for group in group_ids:
        seen = [set() for _ in range(4)]
        for sample_id in candidates:
            if groups[sample_id] != group:
                continue
            for ref in references[sample_id]:
                for n in range(1, 5):
                    seen[n - 1].update(grams_of(ref, n))
        for n in range(4):
            for gram in seen[n]:
                df[n][gram] = df[n].get(gram, 0) + 1

    def tfidf_vector(tokens, n):
        vec = {}
        for gram, count in grams_of(tokens, n + 1).items():
            vec[gram] = count * math.log(n_groups / max(df[n].get(gram, 0), 1))
        return vec

    def cos(u, v):
        dot = sum(u[g] * v[g] for g in u if g in v)
        nu = math.sqrt(sum(x * x for x in u.values()))
        nv = math.sqrt(sum(x * x for x in v.values()))
        if nu == 0 or nv == 0:
            return 0.0
        return dot / (nu * nv)

    scores = {}
    for sample_id, cand in candidates.items():
        total = 0.0
        for n in range(4):
            cand_vec = tfidf_vector(cand, n)
            sims = [cos(cand_vec, tfidf_vector(ref, n)) for ref in references[sample_id]]
            total += sum(sims) / len(sims)
        scores[sample_id] = scale * total / 4.0
    return scores


# ---------------------------------------------------------------------------
# Word-pool precision and recall (membership counted by loop)


def pool_oracle(candidate_tokens, reference_token_lists, detection_labels):
    pool = []
    for ref in reference_token_lists:
        for token in ref:
            if token not in pool:
                pool.append(token)
    for token in detection_labels:
        if token not in pool:
            pool.append(token)
    unique = []
    for token in candidate_tokens:
        if token not in unique:
            unique.append(token)
    hits = sum(1 for token in unique if token in pool)
    return hits / len(unique), hits / len(pool)


# ---------------------------------------------------------------------------
# Agreement statistics (pairwise enumeration)


def alpha_oracle(rows, level: str = "interval") -> float:
    units = [[v for v in row if v is not None] for row in rows]
    units = [u for u in units if len(u) >= 2]
    if not units:
        raise ValueError("no unit has two or more ratings")
    values = [v for u in units for v in u]
    n = len(values)

    if level == "ordinal":
        categories = sorted(set(values))
        counts = {c: values.count(c) for c in categories}

        def delta(a, b):
            if a == b:
                return 0.0
            lo, hi = min(a, b), max(a, b)
            between = sum(counts[c] for c in categories if lo <= c <= hi)
            return (between - (counts[a] + counts[b]) / 2.0) ** 2
    elif level == "nominal":
        def delta(a, b):
            return 0.0 if a == b else 1.0
    elif level == "interval":
        def delta(a, b):
            return (a - b) ** 2
    else:
        raise ValueError(level)

    observed = 0.0
    for u in units:
        m = len(u)
        within = sum(delta(a, b) for a, b in itertools.permutations(u, 2))
        observed += within / (m - 1)
    observed /= n

    expected = sum(delta(a, b) for a, b in itertools.permutations(values, 2))
    expected /= n * (n - 1)
    if expected == 0.0:
        raise ZeroDivisionError("expected disagreement is zero")
    return 1.0 - observed / expected


def tau_oracle(x, y, variant: str = "a") -> float:
    n = len(x)
    concordant = discordant = 0
    tied_x = tied_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                tied_x += 1
                tied_y += 1
            elif dx == 0:
                tied_x += 1
            elif dy == 0:
                tied_y += 1
            elif (dx > 0) == (dy > 0):
                concordant += 1
            else:
                discordant += 1
    m = n * (n - 1) / 2
    if variant == "a":
        return (concordant - discordant) / m
    if variant == "b":
        denom = math.sqrt((m - tied_x) * (m - tied_y))
        return (concordant - discordant) / denom
    raise ValueError(variant)


def spearman_oracle(x, y) -> float:
    def midranks(values):
        ranks = []
        for v in values:
            less = sum(1 for u in values if u < v)
            equal = sum(1 for u in values if u == v)
            ranks.append(less + (equal + 1) / 2.0)
        return ranks

    rx = midranks(list(x))
    ry = midranks(list(y))
    n = len(rx)
    mean_x = sum(rx) / n
    mean_y = sum(ry) / n
    cov = sum((a - mean_x) * (b - mean_y) for a, b in zip(rx, ry))
    var_x = sum((a - mean_x) ** 2 for a in rx)
    var_y = sum((b - mean_y) ** 2 for b in ry)
    return cov / math.sqrt(var_x * var_y)


# ---------------------------------------------------------------------------
# Regression tree split search (exhaustive)


def best_split_oracle(X, y, min_samples_leaf: int):
    """Returns (sse, feature, threshold) or None, trying every midpoint."""
    n = len(y)
    p = len(X[0])
    best = None
    for feature in range(p):
        column = [X[i][feature] for i in range(n)]
        values = sorted(set(column))
        for lo, hi in zip(values, values[1:]):
            threshold = (lo + hi) / 2.0
            left = [y[i] for i in range(n) if column[i] <= threshold]
            right = [y[i] for i in range(n) if column[i] > threshold]
            if len(left) < min_samples_leaf or len(right) < min_samples_leaf:
                continue
            mean_left = sum(left) / len(left)
            mean_right = sum(right) / len(right)
            sse = sum((v - mean_left) ** 2 for v in left)
            sse += sum((v - mean_right) ** 2 for v in right)
            if best is None or sse < best[0]:
                best = (sse, feature, threshold)
    return best
