"""LSTM policy over level-order action sequences.

The partial tree is read as the flat sequence of actions in fill order. An
LSTM summarises that sequence into ``h_t``; a linear head over the top layer
gives ``pi(a | s_t) ∝ exp(u_a . h_t + b_a)`` over all actions, ``END``
included. With the auxiliary end head, termination is a separate Bernoulli
``sigmoid(u_e . h_t + b_e)`` and the softmax covers tokens only.

All methods are batched: states hold ``(batch, d_hidden)`` tensors.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import numerics as nx
from .tree import END, path_bits, path_exponents

MASK_LOGIT = -1e9


class PolicyError(Exception):
    pass


class BadTemperature(PolicyError, ValueError):
    pass


class AuxHeadDisabled(PolicyError):
    pass


class EmptyBag(PolicyError, ValueError):
    pass


class DimensionMismatch(PolicyError, ValueError):
    pass


@dataclass
class PolicyConfig:
    n_actions: int
    d_emb: int = 64
    d_hidden: int = 64
    n_layers: int = 1
    aux_end: bool = False
    tree_enc: bool = False
    max_depth: int = 32
    conditional: bool = False
    d_enc: int = 64

    @property
    def d_input(self):
        return self.d_emb + (2 * self.max_depth if self.tree_enc else 0)

    def to_dict(self):
        return asdict(self)


def _xavier(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(np.float32)


class LSTMPolicy:
    def __init__(self, config, seed=0, params=None):
        self.config = config
        self.params = params if params is not None else self._init_params(seed)
        for name, t in self.params.items():
            t.requires_grad = True
            t.name = name

    def _init_params(self, seed):
        cfg = self.config
        rng = np.random.default_rng(seed)
        H, V = cfg.d_hidden, cfg.n_actions
        p = {"emb": rng.normal(0.0, 0.1, size=(V, cfg.d_emb))}
        d_in = cfg.d_input
        for layer in range(cfg.n_layers):
            p[f"lstm{layer}.wx"] = _xavier(rng, d_in, 4 * H)
            p[f"lstm{layer}.wh"] = _xavier(rng, H, 4 * H)
            p[f"lstm{layer}.b"] = np.zeros(4 * H)
            d_in = H
        p["head.u"] = _xavier(rng, H, V)
        p["head.b"] = np.zeros(V)
        if cfg.aux_end:
            p["end.u"] = _xavier(rng, H, 1)
            p["end.b"] = np.zeros(1)
        if cfg.tree_enc:
            p["tree.p"] = np.ones(1)
        if cfg.conditional:
            p["enc.emb"] = rng.normal(0.0, 0.1, size=(V, cfg.d_emb))
            p["enc.w"] = _xavier(rng, cfg.d_emb, cfg.d_enc)
            p["enc.b"] = np.zeros(cfg.d_enc)
            for layer in range(cfg.n_layers):
                p[f"init{layer}.w"] = _xavier(rng, cfg.d_enc, H)
                p[f"init{layer}.b"] = np.zeros(H)
        return {k: nx.Tensor(v) for k, v in p.items()}

    def parameters(self):
        return list(self.params.values())

    def clone(self):
        return LSTMPolicy(
            self.config,
            params={k: nx.Tensor(v.data.copy()) for k, v in self.params.items()},
        )

    # -- conditioning ---------------------------------------------------------

    def encode_bag(self, bags):
        """Mean of ``linear(emb(w))`` over each bag; one row per bag."""
        if not self.config.conditional:
            raise PolicyError("policy was built without an encoder")
        ids, rows = [], []
        for b, bag in enumerate(bags):
            if len(bag) == 0:
                raise EmptyBag(f"bag {b} is empty")
            ids.extend(bag)
            rows.extend([b] * len(bag))
        avg = np.zeros((len(bags), len(ids)), dtype=np.float32)
        for col, b in enumerate(rows):
            avg[b, col] = 1.0 / len(bags[b])
        p = self.params
        words = nx.add(nx.matmul(nx.embedding_lookup(p["enc.emb"], ids), p["enc.w"]), p["enc.b"])
        return nx.matmul(nx.Tensor(avg), words)

    def initial_state(self, batch_size=1, bags=None, context=None):
        """Zero state, or ``h_0 = tanh(W ctx + b)`` per layer when conditioned.

        ``context`` is an already encoded ``(batch, d_enc)`` tensor; ``bags``
        are encoded on the fly.
        """
        cfg = self.config
        if bags is not None:
            context = self.encode_bag(bags)
            batch_size = len(bags)
        zeros = nx.Tensor(np.zeros((batch_size, cfg.d_hidden), dtype=np.float32))
        if context is None:
            return [(zeros, zeros) for _ in range(cfg.n_layers)]
        if not cfg.conditional:
            raise PolicyError("policy was built without an encoder")
        context = nx.constant(context)
        if context.data.ndim != 2 or context.shape[1] != cfg.d_enc:
            raise DimensionMismatch(f"context shape {context.shape}, expected (*, {cfg.d_enc})")
        p = self.params
        state = []
        for layer in range(cfg.n_layers):
            h0 = nx.tanh(nx.add(nx.matmul(context, p[f"init{layer}.w"]), p[f"init{layer}.b"]))
            c0 = nx.Tensor(np.zeros(h0.shape, dtype=np.float32))
            state.append((h0, c0))
        return state

    # -- recurrence -----------------------------------------------------------

    def tree_inputs(self, paths):
        """Scaled path encodings for a batch of node paths (tuples of 0/1)."""
        cfg = self.config
        bits = np.stack([path_bits(path, cfg.max_depth) for path in paths])
        scales = nx.power_series(self.params["tree.p"], path_exponents(cfg.max_depth))
        tiled = nx.matmul(nx.Tensor(np.ones((len(paths), 1), dtype=np.float32)), scales)
        return nx.mul(nx.Tensor(bits), tiled)

    def step(self, state, actions, paths=None):
        """Consume one action per batch row; ``paths`` are their node paths."""
        cfg = self.config
        p = self.params
        H = cfg.d_hidden
        x = nx.embedding_lookup(p["emb"], np.asarray(actions, dtype=np.int64))
        if cfg.tree_enc:
            if paths is None:
                pos = nx.Tensor(np.zeros((len(actions), 2 * cfg.max_depth), dtype=np.float32))
            else:
                pos = self.tree_inputs(paths)
            x = nx.concat([x, pos], axis=1)
        new_state = []
        for layer, (h, c) in enumerate(state):
            gates = nx.add(
                nx.add(nx.matmul(x, p[f"lstm{layer}.wx"]), nx.matmul(h, p[f"lstm{layer}.wh"])),
                p[f"lstm{layer}.b"],
            )
            # gate layout: input, forget, output (sigmoid) | candidate (tanh)
            sig = nx.sigmoid(nx.slice_cols(gates, 0, 3 * H))
            cand = nx.tanh(nx.slice_cols(gates, 3 * H, 4 * H))
            i = nx.slice_cols(sig, 0, H)
            f = nx.slice_cols(sig, H, 2 * H)
            o = nx.slice_cols(sig, 2 * H, 3 * H)
            c = nx.add(nx.mul(f, c), nx.mul(i, cand))
            h = nx.mul(o, nx.tanh(c))
            new_state.append((h, c))
            x = h
        return new_state

    def encode(self, actions, paths=None, bags=None):
        """Run a whole action sequence for a single example (batch of one)."""
        state = self.initial_state(1, bags=[bags] if bags is not None else None)
        for t, a in enumerate(actions):
            state = self.step(state, [a], None if paths is None else [paths[t]])
        return state

    # -- heads ----------------------------------------------------------------

    def logits(self, state):
        p = self.params
        out = nx.add(nx.matmul(state[-1][0], p["head.u"]), p["head.b"])
        if self.config.aux_end:
            mask = np.zeros((1, self.config.n_actions), dtype=np.float32)
            mask[0, END] = MASK_LOGIT
            out = nx.add(out, nx.Tensor(mask))
        return out

    def end_logit(self, state):
        if not self.config.aux_end:
            raise AuxHeadDisabled("policy has no auxiliary end head")
        p = self.params
        return nx.add(nx.matmul(state[-1][0], p["end.u"]), p["end.b"])

    def action_dist(self, state, temperature=1.0, top_k=None):
        """Numpy ``(batch, n_actions)`` probabilities after temperature/top-k."""
        if not temperature > 0:
            raise BadTemperature(f"temperature must be positive, got {temperature}")
        logits = self.logits(state).data.astype(np.float64) / temperature
        return restrict_top_k(logits, top_k)

    def end_prob(self, state):
        z = self.end_logit(state).data.astype(np.float64)[:, 0]
        return 1.0 / (1.0 + np.exp(-z))

    # -- pretrained vectors ---------------------------------------------------

    def load_embeddings(self, vectors, vocab):
        """Copy ``{token: vector}`` rows into the embedding tables; returns hits."""
        hits = 0
        tables = [self.params["emb"]]
        if self.config.conditional:
            tables.append(self.params["enc.emb"])
        for tok, vec in vectors.items():
            if tok not in vocab:
                continue
            vec = np.asarray(vec, dtype=np.float32)
            if vec.shape != (self.config.d_emb,):
                raise DimensionMismatch(
                    f"embedding for {tok!r} has dim {vec.shape}, expected {self.config.d_emb}"
                )
            for table in tables:
                table.data[vocab[tok]] = vec
            hits += 1
        return hits


def restrict_top_k(logits, top_k=None):
    """Softmax of ``logits`` rows, optionally over the ``top_k`` largest only."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    if top_k is not None:
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        if top_k < logits.shape[1]:
            # ties at the cut-off are broken by lower action id
            order = np.argsort(-logits, axis=1, kind="stable")[:, top_k:]
            logits = logits.copy()
            np.put_along_axis(logits, order, -np.inf, axis=1)
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def read_embeddings(path):
    """Parse a ``token v1 v2 ...`` text file; the first line fixes the dimension."""
    vectors = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            tok, vals = parts[0], parts[1:]
            if dim is None:
                dim = len(vals)
            if len(vals) != dim:
                raise DimensionMismatch(f"{path}:{lineno}: expected {dim} values, got {len(vals)}")
            vectors[tok] = np.array([float(v) for v in vals], dtype=np.float32)
    return vectors, dim
