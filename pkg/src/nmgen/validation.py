"""Input checking shared by the estimators and the CLI."""
from __future__ import annotations

from sklearn.exceptions import NotFittedError


def check_corpus(X, name="X", allow_empty_sentences=True):
    """Normalise sentences to tuples of string tokens.

    Strings are split on whitespace; any other iterable is taken as a token
    sequence.
    """
    if X is None:
        raise ValueError(f"{name} is None")
    out = []
    for i, s in enumerate(X):
        toks = tuple(s.split()) if isinstance(s, str) else tuple(s)
        if not all(isinstance(t, str) for t in toks):
            raise TypeError(f"{name}[{i}] must contain string tokens")
        if not toks and not allow_empty_sentences:
            raise ValueError(f"{name}[{i}] is empty")
        out.append(toks)
    if not out:
        raise ValueError(f"{name} has no sentences")
    return out


def check_pairs(X, y):
    X = check_corpus(X, "X", allow_empty_sentences=False)
    y = check_corpus(y, "y")
    if len(X) != len(y):
        raise ValueError(f"X and y have different lengths ({len(X)} != {len(y)})")
    return X, y


def check_is_fitted(est, attr="policy_"):
    if getattr(est, attr, None) is None:
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")
