"""Estimator front-ends.

:class:`TreeLM` fits an unconditional binary-tree generator on sentences and
samples or completes from it. :class:`WordReorderer` fits the conditional
variant on (bag of words, sentence) pairs and predicts sentences from bags.
Both follow the scikit-learn conventions: hyperparameters in ``__init__``,
learned state in trailing-underscore attributes, ``fit`` returns ``self``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import checkpoint
from .decoder import DecodeConfig, batch_sample, decode
from .metrics import pair_report, sample_bleu, sample_stats, token_f1
from .policy import LSTMPolicy, PolicyConfig, read_embeddings
from .trainer import TrainConfig, train
from .tree import build_seed_tree, parse_template
from .validation import check_corpus, check_is_fitted, check_pairs
from .vocab import Vocab

_TRAIN_KEYS = (
    "oracle", "epochs", "batch_size", "lr", "lr_halve_every", "clip_norm",
    "beta_burn_in", "beta_rate", "rollin", "split", "seed", "aux_end", "tree_enc",
    "val_samples",
)


class TreeLM(BaseEstimator):
    conditional = False

    def __init__(self, oracle="annealed", epochs=10, batch_size=32, lr=1e-3,
                 lr_halve_every=20, clip_norm=1.0, beta_burn_in=20, beta_rate=0.05,
                 rollin="stochastic", split="random", aux_end=False, tree_enc=False,
                 d_emb=64, d_hidden=64, n_layers=1, d_enc=64, max_depth=None,
                 min_count=1, embeddings=None, val_samples=100, seed=0):
        self.oracle = oracle
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.lr_halve_every = lr_halve_every
        self.clip_norm = clip_norm
        self.beta_burn_in = beta_burn_in
        self.beta_rate = beta_rate
        self.rollin = rollin
        self.split = split
        self.aux_end = aux_end
        self.tree_enc = tree_enc
        self.d_emb = d_emb
        self.d_hidden = d_hidden
        self.n_layers = n_layers
        self.d_enc = d_enc
        self.max_depth = max_depth
        self.min_count = min_count
        self.embeddings = embeddings
        self.val_samples = val_samples
        self.seed = seed

    # -- construction ---------------------------------------------------------

    def train_config(self):
        return TrainConfig(**{k: getattr(self, k) for k in _TRAIN_KEYS})

    def _build(self, sentences, extra_tokens=()):
        self.vocab_ = Vocab.from_sentences(list(sentences) + [tuple(extra_tokens)], self.min_count)
        self.max_len_ = max(len(s) for s in sentences)
        vectors, d_emb = (None, self.d_emb)
        if self.embeddings is not None:
            vectors, d_emb = read_embeddings(self.embeddings)
        cfg = PolicyConfig(
            n_actions=len(self.vocab_),
            d_emb=d_emb,
            d_hidden=self.d_hidden,
            n_layers=self.n_layers,
            aux_end=self.aux_end,
            tree_enc=self.tree_enc,
            max_depth=self.max_depth or max(self.max_len_, 1),
            conditional=self.conditional,
            d_enc=self.d_enc,
        )
        self.policy_ = LSTMPolicy(cfg, seed=self.seed)
        if vectors is not None:
            self.policy_.load_embeddings(vectors, self.vocab_)

    def fit(self, X, y=None, valid=None, on_epoch=None):
        """Fit on sentences ``X`` (strings or token sequences)."""
        X = check_corpus(X)
        config = self.train_config()
        self._build(X)
        ids = [self.vocab_.encode(s) for s in X]
        validate = None
        if valid is not None:
            valid = check_corpus(valid, "valid")
            validate = self._sample_validator(valid)
        self.history_ = train(self.policy_, ids, config, validate=validate, on_epoch=on_epoch)
        return self

    def _sample_validator(self, valid):
        def run(policy, epoch):
            cfg = DecodeConfig(mode="sample", seed=self.seed + epoch, max_nodes=self.default_max_nodes())
            outs = batch_sample(policy, self.val_samples, cfg)
            hyps = [self.vocab_.decode(o.sentence) for o in outs]
            return sample_bleu(hyps, valid).score
        return run

    # -- generation -----------------------------------------------------------

    def default_max_nodes(self):
        return 2 * self.max_len_ + 1

    def decode_config(self, mode="sample", temperature=1.0, top_k=None, tau=0.5,
                      max_nodes=None, max_depth=None, seed=None):
        return DecodeConfig(
            mode=mode, temperature=temperature, top_k=top_k, tau=tau,
            max_nodes=max_nodes if max_nodes is not None else self.default_max_nodes(),
            max_depth=max_depth, seed=self.seed if seed is None else seed,
        )

    def sample(self, n, record=False, **decode_kw):
        """``n`` sampled trees; returns the decoder's ``Decoded`` records."""
        check_is_fitted(self)
        return batch_sample(self.policy_, n, self.decode_config(**decode_kw), record=record)

    def sample_sentences(self, n, **decode_kw):
        return [" ".join(self.vocab_.decode(d.sentence)) for d in self.sample(n, **decode_kw)]

    def complete(self, template, n, **decode_kw):
        """Fill the empty slots of a seed-tree template ``n`` times."""
        check_is_fitted(self)
        if isinstance(template, str):
            template = parse_template(template)
        seed = build_seed_tree(template, self.vocab_)
        cfg = self.decode_config(**decode_kw)
        # the seed tree already holds nodes; leave room for a full-length completion
        if "max_nodes" not in decode_kw:
            cfg.max_nodes = len(seed.nodes) + 2 * self.max_len_
        return batch_sample(self.policy_, n, cfg, seed_tree=seed)

    def stats(self, decoded, training_set, validation_set=None):
        sents = [self.vocab_.decode(d.sentence) for d in decoded]
        out = sample_stats(sents, [d.tree for d in decoded], check_corpus(training_set))
        if validation_set is not None:
            out["bleu"] = sample_bleu(sents, check_corpus(validation_set)).score
        return out

    # -- persistence ----------------------------------------------------------

    def save(self, path):
        check_is_fitted(self)
        extra = {
            "estimator": type(self).__name__,
            "params": self.get_params(),
            "max_len": self.max_len_,
            "train_config": self.train_config().to_dict(),
        }
        checkpoint.save(path, self.policy_, self.vocab_, extra)

    @classmethod
    def load(cls, path):
        policy, vocab, meta = checkpoint.load(path)
        kind = {"TreeLM": TreeLM, "WordReorderer": WordReorderer}.get(meta.get("estimator"), cls)
        est = kind(**meta.get("params", {}))
        est.policy_, est.vocab_ = policy, vocab
        est.max_len_ = meta.get("max_len", policy.config.max_depth)
        est.history_ = []
        return est


class WordReorderer(TreeLM):
    """Reconstruct a sentence from its unordered words."""

    conditional = True

    def __init__(self, oracle="annealed", epochs=10, batch_size=32, lr=1e-3,
                 lr_halve_every=20, clip_norm=1.0, beta_burn_in=20, beta_rate=0.05,
                 rollin="greedy", split="random", aux_end=False, tree_enc=False,
                 d_emb=64, d_hidden=64, n_layers=1, d_enc=64, max_depth=None,
                 min_count=1, embeddings=None, val_samples=100, seed=0,
                 strict_permutation=False):
        super().__init__(
            oracle=oracle, epochs=epochs, batch_size=batch_size, lr=lr,
            lr_halve_every=lr_halve_every, clip_norm=clip_norm, beta_burn_in=beta_burn_in,
            beta_rate=beta_rate, rollin=rollin, split=split, aux_end=aux_end,
            tree_enc=tree_enc, d_emb=d_emb, d_hidden=d_hidden, n_layers=n_layers,
            d_enc=d_enc, max_depth=max_depth, min_count=min_count, embeddings=embeddings,
            val_samples=val_samples, seed=seed,
        )
        self.strict_permutation = strict_permutation

    def fit(self, X, y=None, valid=None, on_epoch=None):
        """Fit on bags ``X`` and sentences ``y`` (``y`` defaults to ``X``).

        ``valid`` is an optional ``(X_valid, y_valid)`` pair; when given, the
        epoch with the best validation BLEU is kept.
        """
        X, y = check_pairs(X, X if y is None else y)
        config = self.train_config()
        self._build(y, extra_tokens=[t for bag in X for t in bag])
        targets = [self.vocab_.encode(s) for s in y]
        bags = [self.vocab_.encode(b) for b in X]
        validate = None
        if valid is not None:
            Xv, yv = check_pairs(*valid)
            validate = lambda policy, epoch: self._report(policy, Xv, yv)["bleu"]
        self.history_ = train(self.policy_, targets, config, bags=bags, validate=validate,
                              on_epoch=on_epoch, select_best=validate is not None)
        return self

    def _predict_ids(self, policy, X, mode="greedy", **decode_kw):
        cfg = self.decode_config(mode=mode, **decode_kw)
        cfg.strict_permutation = self.strict_permutation
        out = []
        for i, bag in enumerate(X):
            ids = self.vocab_.encode(bag)
            rng = np.random.default_rng([cfg.seed, i])
            out.append(decode(policy, cfg, bag=ids, rng=rng))
        return out

    def predict(self, X, mode="greedy", **decode_kw):
        """Predicted token tuples, one per bag."""
        check_is_fitted(self)
        X = check_corpus(X, allow_empty_sentences=False)
        return [self.vocab_.decode(d.sentence)
                for d in self._predict_ids(self.policy_, X, mode, **decode_kw)]

    def _report(self, policy, X, y):
        preds = [self.vocab_.decode(d.sentence) for d in self._predict_ids(policy, X)]
        return pair_report(preds, y)

    def evaluate(self, X, y=None):
        """BLEU, mean token F1 and exact-match rate of greedy predictions."""
        check_is_fitted(self)
        X, y = check_pairs(X, X if y is None else y)
        return pair_report(self.predict(X), y)

    def score(self, X, y=None):
        X, y = check_pairs(X, X if y is None else y)
        return float(np.mean([token_f1(p, r) for p, r in zip(self.predict(X), y)]))
