"""Brute-force corpus BLEU used as an independent check of the library.

Deliberately naive: n-grams are compared as lists by scanning every window.
"""
import math


def _windows(seq, n):
    return [list(seq[i:i + n]) for i in range(len(seq) - n + 1)]


def _count(gram, windows):
    return sum(1 for w in windows if w == gram)


def brute_bleu(hyps, refs, max_n=4):
    matched = [0] * max_n
    total = [0] * max_n
    c = r = 0
    for hyp, rs in zip(hyps, refs):
        for n in range(1, max_n + 1):
            hw = _windows(hyp, n)
            seen = []
            for g in hw:
                if g in seen:
                    continue
                seen.append(g)
                best = max(_count(g, _windows(ref, n)) for ref in rs)
                matched[n - 1] += min(_count(g, hw), best)
            total[n - 1] += len(hw)
        c += len(hyp)
        best_len = None
        for ref in rs:
            d = abs(len(ref) - len(hyp))
            if best_len is None or d < abs(best_len - len(hyp)) or (
                    d == abs(best_len - len(hyp)) and len(ref) < best_len):
                best_len = len(ref)
        r += best_len
    if min(matched) == 0:
        return 0.0
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return 100 * bp * math.exp(sum(math.log(m / t) for m, t in zip(matched, total)) / max_n)


def random_corpus(rng, n_sent=None):
    """A tiny random corpus with heavy n-gram overlap between hyps and refs."""
    words = list("abcd")
    n_sent = n_sent or int(rng.integers(1, 6))
    hyps, refs = [], []
    for _ in range(n_sent):
        base = [words[i] for i in rng.integers(0, 4, size=rng.integers(4, 10))]
        hyp = [w if rng.random() < 0.8 else words[rng.integers(0, 4)] for w in base]
        rs = []
        for _ in range(rng.integers(1, 4)):
            ref = [w if rng.random() < 0.8 else words[rng.integers(0, 4)] for w in base]
            ref = ref[: max(1, len(ref) - int(rng.integers(0, 3)))] + ["a"] * int(rng.integers(0, 3))
            rs.append(ref)
        hyps.append(hyp)
        refs.append(rs)
    return hyps, refs
