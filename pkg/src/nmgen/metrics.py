"""Evaluation: corpus BLEU, token F1, exact match, sample statistics, entropy."""
from __future__ import annotations

import bisect
import math
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from .tree import average_span


class EmptyHypotheses(ValueError):
    pass


def ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


class NGramIndex:
    """Max-count n-gram table over a set of references (orders 1..max_n)."""

    def __init__(self, references, max_n=4):
        if not references:
            raise ValueError("need at least one reference")
        self.max_n = max_n
        self.max_counts = [dict() for _ in range(max_n + 1)]
        for ref in references:
            ref = tuple(ref)
            for n in range(1, max_n + 1):
                table = self.max_counts[n]
                for gram, c in ngrams(ref, n).items():
                    if c > table.get(gram, 0):
                        table[gram] = c
        self.lengths = sorted(len(r) for r in references)

    def clipped(self, hyp, n):
        table = self.max_counts[n]
        counts = ngrams(hyp, n)
        return sum(min(c, table.get(g, 0)) for g, c in counts.items()), sum(counts.values())

    def closest_length(self, c):
        """Reference length nearest to ``c``; ties go to the shorter one."""
        i = bisect.bisect_left(self.lengths, c)
        cands = self.lengths[max(0, i - 1):i + 1]
        return min(cands, key=lambda r: (abs(r - c), r))


@dataclass
class BleuResult:
    score: float
    brevity_penalty: float
    precisions: list
    hyp_len: int
    ref_len: int

    def __float__(self):
        return self.score


def _combine(matches, totals, c, r, max_n):
    precisions = [m / t if t else 0.0 for m, t in zip(matches, totals)]
    if c == 0:
        bp = 0.0
    elif c >= r:
        bp = 1.0
    else:
        bp = math.exp(1.0 - r / c)
    if min(matches) == 0:
        warnings.warn("zero n-gram matches at some order; BLEU is 0 (no smoothing)",
                      RuntimeWarning, stacklevel=3)
        return BleuResult(0.0, bp, precisions, c, r)
    log_p = sum(math.log(m / t) for m, t in zip(matches, totals)) / max_n
    return BleuResult(100.0 * bp * math.exp(log_p), bp, precisions, c, r)


def bleu(hypotheses, references, max_n=4):
    """Corpus BLEU; ``references[i]`` is the list of references for hypothesis ``i``.

    Uniform weights, clipped counts, closest-reference-length brevity penalty,
    no smoothing. Scores are on a 0-100 scale.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    if not hypotheses:
        raise EmptyHypotheses("no hypotheses")
    if len(references) != len(hypotheses):
        raise ValueError("one reference list per hypothesis is required")
    matches = [0] * max_n
    totals = [0] * max_n
    c = r = 0
    for hyp, refs in zip(hypotheses, references):
        hyp = tuple(hyp)
        index = NGramIndex([tuple(x) for x in refs], max_n)
        for n in range(1, max_n + 1):
            m, t = index.clipped(hyp, n)
            matches[n - 1] += m
            totals[n - 1] += t
        c += len(hyp)
        r += index.closest_length(len(hyp))
    return _combine(matches, totals, c, r, max_n)


def sample_bleu(hypotheses, reference_set, max_n=4):
    """BLEU of free samples with the whole ``reference_set`` as references for each."""
    if not hypotheses:
        raise EmptyHypotheses("no hypotheses")
    index = NGramIndex([tuple(r) for r in reference_set], max_n)
    matches = [0] * max_n
    totals = [0] * max_n
    c = r = 0
    for hyp in hypotheses:
        hyp = tuple(hyp)
        for n in range(1, max_n + 1):
            m, t = index.clipped(hyp, n)
            matches[n - 1] += m
            totals[n - 1] += t
        c += len(hyp)
        r += index.closest_length(len(hyp))
    return _combine(matches, totals, c, r, max_n)


def token_f1(pred, ref):
    pred, ref = Counter(pred), Counter(ref)
    if not pred and not ref:
        return 1.0
    overlap = sum((pred & ref).values())
    if overlap == 0:
        return 0.0
    p = overlap / sum(pred.values())
    r = overlap / sum(ref.values())
    return 2 * p * r / (p + r)


def exact_match(pred, ref):
    return tuple(pred) == tuple(ref)


def exact_match_rate(preds, refs):
    if not preds:
        return 0.0
    return sum(exact_match(p, r) for p, r in zip(preds, refs, strict=True)) / len(preds)


def pair_report(preds, refs, max_n=4):
    """BLEU / mean F1 / EM over aligned prediction-reference pairs."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        b = bleu(preds, [[r] for r in refs], max_n)
    return {
        "bleu": b.score,
        "bp": b.brevity_penalty,
        "f1": float(np.mean([token_f1(p, r) for p, r in zip(preds, refs, strict=True)])),
        "em": exact_match_rate(preds, refs),
        "n": len(preds),
    }


def sample_stats(sentences, trees, training_set):
    """Novelty, uniqueness (percent), mean length and mean span of samples."""
    sentences = [tuple(s) for s in sentences]
    train = {tuple(s) for s in training_set}
    n = len(sentences)
    if n == 0:
        return {"pct_novel": 0.0, "pct_unique": 0.0, "avg_tokens": 0.0, "avg_span": None}
    spans = [s for s in (average_span(t) for t in trees) if s is not None]
    return {
        "pct_novel": 100.0 * sum(s not in train for s in sentences) / n,
        "pct_unique": 100.0 * len(set(sentences)) / n,
        "avg_tokens": sum(len(s) for s in sentences) / n,
        "avg_span": sum(spans) / len(spans) if spans else None,
    }


def normalized_entropy(probs):
    probs = np.asarray(probs, dtype=np.float64)
    nz = probs[probs > 0]
    return float(-(nz * np.log(nz)).sum() / math.log(len(probs)))


def entropy_by_depth(traces, n_actions=None):
    """Mean ``H(pi) / ln|actions|`` per tree depth.

    ``traces`` is an iterable of ``(depth, distribution)`` pairs, or of lists
    of them (one list per decode). Returns ``{depth: (entropy, count)}``.
    """
    sums = defaultdict(float)
    counts = defaultdict(int)
    for item in traces:
        pairs = [item] if _is_pair(item) else item
        for depth, dist in pairs:
            dist = np.asarray(dist, dtype=np.float64)
            if n_actions is not None and len(dist) != n_actions:
                raise ValueError("distribution size does not match n_actions")
            sums[depth] += normalized_entropy(dist)
            counts[depth] += 1
    return {d: (sums[d] / counts[d], counts[d]) for d in sorted(sums)}


def _is_pair(item):
    return (isinstance(item, tuple) and len(item) == 2 and isinstance(item[0], (int, np.integer)))


def entropy_csv(table):
    lines = ["depth,entropy,count"]
    lines += [f"{d},{h:.6f},{c}" for d, (h, c) in table.items()]
    return "\n".join(lines) + "\n"
