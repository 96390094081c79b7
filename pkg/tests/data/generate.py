"""Regenerate the small synthetic corpora used by the test-suite.

    python tests/data/generate.py
"""
import pathlib
import random

HERE = pathlib.Path(__file__).parent

SUBJECTS = ["i", "you", "we", "they", "my dog", "my sister", "he", "she"]
VERBS_S = ["likes", "hates", "wants", "has"]
VERBS_P = ["like", "hate", "want", "have"]
OBJECTS = ["pizza", "music", "cats", "books", "red apples", "hot tea", "the park", "green tea",
           "old books", "the beach"]
TAILS = ["", "a lot", "too", "so much", "today"]
ENDS = [".", "!"]


def sentence(rng):
    subj = rng.choice(SUBJECTS)
    third = subj in ("my dog", "my sister", "he", "she")
    verb = rng.choice(VERBS_S if third else VERBS_P)
    words = f"{subj} {verb} {rng.choice(OBJECTS)} {rng.choice(TAILS)} {rng.choice(ENDS)}".split()
    return " ".join(words)


def corpus(n, seed, max_len=8):
    rng = random.Random(seed)
    seen = []
    while len(seen) < n:
        s = sentence(rng)
        if s not in seen and len(s.split()) <= max_len:
            seen.append(s)
    return seen


if __name__ == "__main__":
    toy = corpus(50, seed=1)
    (HERE / "toy50.txt").write_text("\n".join(toy) + "\n")
    pairs = corpus(500, seed=2)
    (HERE / "reorder500.txt").write_text("\n".join(pairs) + "\n")
    vocab = {w for s in toy for w in s.split()}
    print(len(vocab), max(len(s.split()) for s in toy))
