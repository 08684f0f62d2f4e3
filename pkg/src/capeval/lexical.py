"""Reference-based caption metrics computed from surface tokens.

Every metric shares one tokenizer: lowercase the text, turn punctuation
into spaces, split on whitespace. Metrics that compare words in root
form use the Porter stemmer from :mod:`capeval.stem`.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Iterable, Mapping, NamedTuple, Sequence

from .stem import stem

Tokens = Sequence[str]

# Additive constant keeping log-precisions defined when a higher-order
# n-gram count is zero.
BLEU_EPSILON = 1e-9
ROUGE_BETA = 1.2
CIDER_SCALE = 10.0
METEOR_PENALTY_WEIGHT = 0.5
METEOR_PENALTY_POWER = 3
# Beyond this many explored states the aligner falls back to a greedy
# matching; realistic captions stay far below it.
_ALIGN_NODE_BUDGET = 200_000


def tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation to spaces, split on whitespace."""
    cleaned = "".join(ch if ch.isalnum() else " " for ch in text.lower())
    return cleaned.split()


def stem_tokens(tokens: Tokens) -> list[str]:
    return [stem(t) for t in tokens]


def ngram_counts(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _check_references(references: Sequence[Tokens], metric: str) -> None:
    if not references:
        raise ValueError(f"{metric} requires at least one reference")
    for ref in references:
        if not ref:
            raise ValueError(f"{metric} received an empty reference")


# ---------------------------------------------------------------------------
# BLEU


def bleu4(candidate: Tokens, references: Sequence[Tokens]) -> float:
    """Sentence BLEU with n-grams up to 4 and the brevity penalty.

    Clipped n-gram precisions are combined by geometric mean; zero
    counts are replaced by ``BLEU_EPSILON`` so the logs stay defined.
    A candidate with no unigram overlap scores exactly 0.
    """
    _check_references(references, "bleu4")
    if not candidate:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        guesses = len(candidate) - n + 1
        if guesses <= 0:
            log_sum += math.log(BLEU_EPSILON)
            continue
        clipped = _clipped_matches(candidate, references, n)
        if n == 1 and clipped == 0:
            return 0.0
        log_sum += math.log(max(clipped, BLEU_EPSILON) / guesses)
    return _brevity_penalty(len(candidate), references) * math.exp(log_sum / 4.0)


def _clipped_matches(candidate: Tokens, references: Sequence[Tokens], n: int) -> int:
    counts = ngram_counts(candidate, n)
    limits: Counter = Counter()
    for ref in references:
        for gram, count in ngram_counts(ref, n).items():
            if count > limits[gram]:
                limits[gram] = count
    return sum(min(count, limits[gram]) for gram, count in counts.items())


def _closest_reference_length(candidate_len: int, references: Sequence[Tokens]) -> int:
    return min((abs(len(ref) - candidate_len), len(ref)) for ref in references)[1]


def _brevity_penalty(candidate_len: int, references: Sequence[Tokens]) -> float:
    ref_len = _closest_reference_length(candidate_len, references)
    if candidate_len >= ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / candidate_len)


def bleu4_corpus(
    candidates: Sequence[Tokens], references: Sequence[Sequence[Tokens]]
) -> float:
    """Corpus BLEU: n-gram counts pooled over all samples before combining."""
    if len(candidates) != len(references):
        raise ValueError("candidates and references must pair up one to one")
    if not candidates:
        raise ValueError("bleu4_corpus requires at least one sample")
    clipped = [0] * 4
    guesses = [0] * 4
    candidate_total = 0
    reference_total = 0
    for cand, refs in zip(candidates, references):
        _check_references(refs, "bleu4_corpus")
        if not cand:
            continue
        candidate_total += len(cand)
        reference_total += _closest_reference_length(len(cand), refs)
        for n in range(1, 5):
            guesses[n - 1] += max(len(cand) - n + 1, 0)
            clipped[n - 1] += _clipped_matches(cand, refs, n)
    if candidate_total == 0 or clipped[0] == 0:
        return 0.0
    log_sum = sum(
        math.log(max(c, BLEU_EPSILON) / max(g, BLEU_EPSILON))
        for c, g in zip(clipped, guesses)
    )
    if candidate_total >= reference_total:
        bp = 1.0
    else:
        bp = math.exp(1.0 - reference_total / candidate_total)
    return bp * math.exp(log_sum / 4.0)


# ---------------------------------------------------------------------------
# ROUGE-L


def lcs_length(a: Tokens, b: Tokens) -> int:
    """Length of the longest common subsequence, O(len(a) * len(b))."""
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        current = [0] * (len(b) + 1)
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            if ai == b[j - 1]:
                current[j] = previous[j - 1] + 1
            else:
                current[j] = max(previous[j], current[j - 1])
        previous = current
    return previous[len(b)]


def rouge_l(candidate: Tokens, references: Sequence[Tokens], beta: float = ROUGE_BETA) -> float:
    """LCS-based F-measure, maximised over the references."""
    _check_references(references, "rouge_l")
    if not candidate:
        return 0.0
    best = 0.0
    for ref in references:
        length = lcs_length(candidate, ref)
        if length == 0:
            continue
        precision = length / len(candidate)
        recall = length / len(ref)
        score = ((1 + beta**2) * precision * recall) / (recall + beta**2 * precision)
        if score > best:
            best = score
    return best


# ---------------------------------------------------------------------------
# METEOR (exact and stem matching stages, no synonym table)


class _Alignment(NamedTuple):
    exact: int
    total: int
    chunks: int
    pairs: tuple[tuple[int, int], ...]


def meteor(candidate: Tokens, references: Sequence[Tokens]) -> float:
    """Unigram alignment score with a fragmentation penalty.

    Tokens are aligned exact-first, then by stem. Among alignments of
    maximal size the one with the fewest chunks is used.
    """
    _check_references(references, "meteor")
    if not candidate:
        return 0.0
    return max(_meteor_single(candidate, ref) for ref in references)


def _meteor_single(candidate: Tokens, reference: Tokens) -> float:
    alignment = align_tokens(candidate, reference)
    matches = alignment.total
    if matches == 0:
        return 0.0
    precision = matches / len(candidate)
    recall = matches / len(reference)
    fmean = 10.0 * precision * recall / (recall + 9.0 * precision)
    penalty = METEOR_PENALTY_WEIGHT * (alignment.chunks / matches) ** METEOR_PENALTY_POWER
    return fmean * (1.0 - penalty)


def align_tokens(candidate: Tokens, reference: Tokens) -> _Alignment:
    """Best unigram alignment between candidate and reference positions.

    Preference order: most exact matches, then most matches overall,
    then fewest chunks (runs contiguous on both sides). The search is
    exhaustive with pruning; if the state budget is exceeded it falls
    back to a greedy left-to-right matching.
    """
    cand_stems = stem_tokens(candidate)
    ref_stems = stem_tokens(reference)
    # 2 marks an exact match, 1 a stem-only match.
    compatible: list[list[tuple[int, int]]] = []
    for i, token in enumerate(candidate):
        row = []
        for j, ref_token in enumerate(reference):
            if token == ref_token:
                row.append((j, 2))
            elif cand_stems[i] == ref_stems[j]:
                row.append((j, 1))
        compatible.append(row)

    best: list[_Alignment | None] = [None]
    nodes = [0]

    def better(a: _Alignment, b: _Alignment | None) -> bool:
        if b is None:
            return True
        return (a.exact, a.total, -a.chunks) > (b.exact, b.total, -b.chunks)

    def visit(i: int, used: int, exact: int, total: int, chunks: int,
              last: tuple[int, int] | None, pairs: tuple[tuple[int, int], ...]) -> None:
        nodes[0] += 1
        if nodes[0] > _ALIGN_NODE_BUDGET:
            return
        if i == len(candidate):
            candidate_alignment = _Alignment(exact, total, chunks, pairs)
            if better(candidate_alignment, best[0]):
                best[0] = candidate_alignment
            return
        remaining = len(candidate) - i
        current = best[0]
        if current is not None and exact + remaining < current.exact:
            return
        for j, strength in compatible[i]:
            if used & (1 << j):
                continue
            contiguous = last is not None and last == (i - 1, j - 1)
            visit(
                i + 1,
                used | (1 << j),
                exact + (strength == 2),
                total + 1,
                chunks + (0 if contiguous else 1),
                (i, j),
                pairs + ((i, j),),
            )
        visit(i + 1, used, exact, total, chunks, last, pairs)

    visit(0, 0, 0, 0, 0, None, ())
    if nodes[0] > _ALIGN_NODE_BUDGET:
        return _greedy_alignment(compatible, len(candidate))
    assert best[0] is not None
    return best[0]


def _greedy_alignment(compatible: list[list[tuple[int, int]]], n_candidate: int) -> _Alignment:
    used = set()
    pairs = []
    exact = 0
    # Exact matches first, preferring the reference position that keeps
    # the alignment contiguous.
    for target_strength in (2, 1):
        for i in range(n_candidate):
            if any(p[0] == i for p in pairs):
                continue
            options = [
                j for j, strength in compatible[i]
                if strength == target_strength and j not in used
            ]
            if not options:
                continue
            prev = next((pj for pi, pj in pairs if pi == i - 1), None)
            if prev is not None and prev + 1 in options:
                j = prev + 1
            else:
                j = options[0]
            used.add(j)
            pairs.append((i, j))
            if target_strength == 2:
                exact += 1
    pairs.sort()
    return _Alignment(exact, len(pairs), count_chunks(pairs), tuple(pairs))


def count_chunks(pairs: Sequence[tuple[int, int]]) -> int:
    """Number of maximal runs contiguous in both sequences."""
    chunks = 0
    previous = None
    for i, j in sorted(pairs):
        if previous is None or previous != (i - 1, j - 1):
            chunks += 1
        previous = (i, j)
    return chunks


# ---------------------------------------------------------------------------
# CIDEr


class CiderResult(NamedTuple):
    scores: dict[str, float]
    degenerate_idf: bool


def cider(
    candidates: Mapping[str, Tokens],
    references: Mapping[str, Sequence[Tokens]],
    groups: Mapping[str, str] | None = None,
    scale: float = CIDER_SCALE,
) -> CiderResult:
    """tf-idf n-gram consensus score, stemmed, n = 1..4, scaled by 10.

    ``groups`` maps sample ids to the unit used for document-frequency
    counting (typically the image id, so that several candidates for one
    image share a single reference document). Without it every sample is
    its own group. A corpus with fewer than two groups has a degenerate
    idf; all scores are 0 and the result is flagged.
    """
    if set(candidates) - set(references):
        missing = sorted(set(candidates) - set(references))[0]
        raise ValueError(f"no references for sample {missing!r}")
    for sample_id, refs in references.items():
        _check_references(refs, f"cider (sample {sample_id!r})")
    if groups is None:
        groups = {sample_id: sample_id for sample_id in candidates}

    stemmed_candidates = {s: stem_tokens(c) for s, c in candidates.items()}
    stemmed_references = {
        s: [stem_tokens(r) for r in refs] for s, refs in references.items()
    }

    group_grams: dict[str, list[set]] = {}
    for sample_id in candidates:
        group = groups[sample_id]
        grams = group_grams.setdefault(group, [set(), set(), set(), set()])
        for ref in stemmed_references[sample_id]:
            for n in range(1, 5):
                grams[n - 1].update(ngram_counts(ref, n))

    n_groups = len(group_grams)
    if n_groups < 2:
        return CiderResult({s: 0.0 for s in candidates}, degenerate_idf=True)

    df: list[Counter] = [Counter() for _ in range(4)]
    for grams in group_grams.values():
        for n in range(4):
            df[n].update(grams[n])

    log_n = math.log(n_groups)

    def tfidf(counts: Counter, n: int) -> dict:
        return {
            gram: count * (log_n - math.log(max(df[n][gram], 1)))
            for gram, count in counts.items()
        }

    scores = {}
    for sample_id, cand in stemmed_candidates.items():
        per_n = []
        for n in range(4):
            cand_vec = tfidf(ngram_counts(cand, n + 1), n)
            ref_cosines = [
                _cosine_sparse(cand_vec, tfidf(ngram_counts(ref, n + 1), n))
                for ref in stemmed_references[sample_id]
            ]
            per_n.append(sum(ref_cosines) / len(ref_cosines))
        scores[sample_id] = scale * sum(per_n) / 4.0
    return CiderResult(scores, degenerate_idf=False)


def _cosine_sparse(u: Mapping, v: Mapping) -> float:
    dot = sum(weight * v[gram] for gram, weight in u.items() if gram in v)
    norm_u = math.sqrt(sum(w * w for w in u.values()))
    norm_v = math.sqrt(sum(w * w for w in v.values()))
    if norm_u == 0.0 or norm_v == 0.0:
        return 0.0
    return dot / (norm_u * norm_v)
