"""Vocabulary with reserved ids and a content hash."""
from __future__ import annotations

import hashlib
import re
from collections import Counter

END_TOKEN = "<end>"
UNK_TOKEN = "<unk>"
UNK = 1

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


class EmptyCorpus(ValueError):
    pass


def tokenize(text):
    """Split on whitespace and punctuation: ``"hi, you!"`` -> ``hi , you !``."""
    return _TOKEN_RE.findall(text)


class Vocab:
    def __init__(self, tokens):
        tokens = list(tokens)
        if tokens[:2] != [END_TOKEN, UNK_TOKEN]:
            tokens = [END_TOKEN, UNK_TOKEN] + [t for t in tokens if t not in (END_TOKEN, UNK_TOKEN)]
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}
        if len(self.index) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, tok):
        return tok in self.index

    def __getitem__(self, tok):
        return self.index[tok]

    def __iter__(self):
        return iter(self.tokens)

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.tokens == other.tokens

    def encode(self, tokens):
        return tuple(self.index.get(t, UNK) for t in tokens)

    def decode(self, ids):
        return tuple(self.tokens[i] for i in ids)

    @property
    def content_hash(self):
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()

    @classmethod
    def from_sentences(cls, sentences, min_count=1):
        counts = Counter(tok for s in sentences for tok in s)
        for reserved in (END_TOKEN, UNK_TOKEN):
            if reserved in counts:
                raise ValueError(f"reserved token {reserved} found in corpus")
        kept = sorted((t for t, c in counts.items() if c >= min_count),
                      key=lambda t: (-counts[t], t))
        return cls([END_TOKEN, UNK_TOKEN] + kept)


def read_corpus(path):
    """Pre-tokenized text: one sentence per line, whitespace separated."""
    with open(path, encoding="utf-8") as fh:
        return [tuple(line.split()) for line in fh if line.strip()]


def build_vocab(path, min_count=1):
    sentences = read_corpus(path)
    if not sentences:
        raise EmptyCorpus(f"{path} contains no sentences")
    return Vocab.from_sentences(sentences, min_count)
