"""Learning to search with oracle roll-ins and a KL cost.

Every training sequence is rolled in with the oracle; at each of its
``2|Y| + 1`` states the learner's action distribution is pulled towards the
oracle's distribution with ``KL(oracle || policy)``. All steps of a rollout
are averaged, which estimates the expectation over a uniformly drawn step.
Rollouts in a batch run in lockstep so the LSTM sees a whole batch per step.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import numerics as nx
from .oracle import ORACLES, ROLLIN_MODES, SPLIT_MODES, Episode
from .tree import END, in_order_sentence

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-9


class AllStepsMasked(ValueError):
    pass


class ReconstructionError(AssertionError):
    pass


@dataclass
class TrainConfig:
    oracle: str = "annealed"
    epochs: int = 10
    batch_size: int = 32
    lr: float = 1e-3
    lr_halve_every: int = 20
    clip_norm: float = 1.0
    beta_burn_in: int = 20
    beta_rate: float = 0.05
    rollin: str = "stochastic"
    split: str = "random"
    seed: int = 0
    aux_end: bool = False
    tree_enc: bool = False
    val_samples: int = 100

    def __post_init__(self):
        if self.oracle not in ORACLES:
            raise ValueError(f"oracle must be one of {ORACLES}, got {self.oracle!r}")
        if self.rollin not in ROLLIN_MODES:
            raise ValueError(f"rollin must be one of {ROLLIN_MODES}")
        if self.split not in SPLIT_MODES:
            raise ValueError(f"split must be one of {SPLIT_MODES}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if self.lr < 0 or self.clip_norm <= 0 or self.beta_rate <= 0 or self.beta_burn_in < 0:
            raise ValueError("rates must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass
class RolloutStep:
    slot: int
    action: int
    policy: np.ndarray
    oracle: dict
    masked: bool = False
    kl: float = 0.0


@dataclass
class BatchResult:
    loss: nx.Tensor
    n_steps: int = 0
    valid_mass: float = 0.0
    steps: list = field(default_factory=list)


def beta_schedule(epoch, burn_in=20, rate=0.05):
    """Mixture weight of the uniform oracle: 1 during burn-in, then linear to 0."""
    if epoch < burn_in:
        return 1.0
    # rounding strips float noise so that e.g. 1 - 3 * 0.2 is exactly 0.4
    return max(0.0, round(1.0 - rate * (epoch - burn_in), 12))


def kl_divergence(oracle, policy_probs):
    """``sum_a oracle(a) * (log oracle(a) - log policy(a))`` with a log floor."""
    total = 0.0
    for a, p in oracle.items():
        if p > 0.0:
            q = max(float(policy_probs[a]), LOG_FLOOR)
            total += p * (math.log(p) - math.log(q))
    return total


def kl_loss(steps):
    """Mean KL over the unmasked steps of one rollout."""
    kept = [s for s in steps if not s.masked]
    if not steps:
        raise ValueError("no steps")
    if not kept:
        raise AllStepsMasked("every step is masked")
    return sum(kl_divergence(s.oracle, s.policy) for s in kept) / len(kept)


def bernoulli_ce(p, y):
    p = min(max(p, LOG_FLOOR), 1.0 - LOG_FLOOR)
    return -(y * math.log(p) + (1.0 - y) * math.log(1.0 - p))


def aux_end_loss(steps, end_probs):
    """BCE of the end head at every step plus the token KL on non-end steps."""
    bce = sum(bernoulli_ce(q, 1.0 if s.action == END else 0.0)
              for s, q in zip(steps, end_probs)) / len(steps)
    kept = [s for s in steps if not s.masked]
    if not kept:
        return bce
    return bce + sum(kl_divergence(s.oracle, s.policy) for s in kept) / len(kept)


def batch_loss(policy, targets, kind, beta=1.0, rngs=None, bags=None, rollin="stochastic",
               split="random", record=False):
    """Roll in every target with the oracle and build the batch loss graph.

    Per-rollout losses are averaged over the batch. Returns a
    :class:`BatchResult` whose ``loss`` lives on the active tape, if any.
    """
    B = len(targets)
    if B == 0:
        raise ValueError("empty batch")
    if rngs is None:
        rngs = [np.random.default_rng(i) for i in range(B)]
    aux = policy.config.aux_end
    V = policy.config.n_actions
    episodes = [Episode(y, kind, rng, beta, rollin, split) for y, rng in zip(targets, rngs)]
    n_steps = [2 * len(y) + 1 for y in targets]
    n_tokens = [len(y) for y in targets]
    needs_policy = kind in ("coaching", "annealed")
    log_floor = math.log(LOG_FLOOR)

    state = policy.initial_state(B, bags=bags)
    objective = None  # sum of weighted log-likelihood terms (to be negated)
    const = 0.0  # oracle negative entropy, so the reported loss is the true KL
    valid_mass = 0.0
    total_steps = 0
    records = [[] for _ in range(B)] if record else None

    for t in range(max(n_steps)):
        logits = policy.logits(state)
        logp = nx.log_softmax(logits)
        probs = np.exp(logp.data.astype(np.float64))
        weights = np.zeros((B, V), dtype=np.float32)
        if aux:
            end_logit = policy.end_logit(state)
            end_pos = np.zeros((B, 1), dtype=np.float32)
            end_neg = np.zeros((B, 1), dtype=np.float32)
        actions = np.full(B, END, dtype=np.int64)
        paths = [()] * B
        for b, ep in enumerate(episodes):
            if ep.done:
                continue
            slot = ep.slot
            paths[b] = ep.tree.nodes[slot].path
            dist = ep.dist(probs[b] if needs_policy else None)
            action = ep.commit(ep.choose(dist))
            actions[b] = action
            masked = aux and action == END
            valid_mass += sum(probs[b, a] for a in dist if dist[a] > 0.0) if not masked else 0.0
            total_steps += 0 if masked else 1
            if aux:
                w_end = 1.0 / (n_steps[b] * B)
                if action == END:
                    end_pos[b, 0] = w_end
                else:
                    end_neg[b, 0] = w_end
            if not masked:
                w = 1.0 / ((n_tokens[b] if aux else n_steps[b]) * B)
                for a, p in dist.items():
                    if p > 0.0:
                        weights[b, a] = w * p
                        const += w * p * math.log(p)
            if record:
                kl = 0.0 if masked else kl_divergence(dist, probs[b])
                records[b].append(RolloutStep(slot, action, probs[b].copy(), dist, masked, kl))
        term = nx.sum(nx.mul(nx.Tensor(weights), nx.clamp_min(logp, log_floor)))
        if aux:
            term = nx.add(term, nx.sum(nx.mul(nx.Tensor(end_pos), nx.log_sigmoid(end_logit))))
            term = nx.add(term, nx.sum(nx.mul(nx.Tensor(end_neg),
                                              nx.log_sigmoid(nx.scale(end_logit, -1.0)))))
        objective = term if objective is None else nx.add(objective, term)
        if t + 1 < max(n_steps):
            state = policy.step(state, actions, paths if policy.config.tree_enc else None)

    for ep, y in zip(episodes, targets):
        assert ep.done, "rollout did not finish"
        if nx.tensor.DEBUG and in_order_sentence(ep.tree) != tuple(y):
            raise ReconstructionError(f"rollout rebuilt {in_order_sentence(ep.tree)}, expected {tuple(y)}")
    loss = nx.add(nx.scale(objective, -1.0), nx.Tensor(np.float32(const)))
    return BatchResult(loss, total_steps, valid_mass, records or [])


def rollout_oracle(target, kind, policy, beta=1.0, rng=None, bag=None, rollin="stochastic",
                   split="random"):
    """Single-sequence roll-in; returns the list of :class:`RolloutStep`."""
    rng = rng if rng is not None else np.random.default_rng(0)
    res = batch_loss(policy, [tuple(target)], kind, beta, [rng],
                     bags=[bag] if bag is not None else None, rollin=rollin, split=split,
                     record=True)
    return res.steps[0]


def format_log(rec):
    line = f"epoch={rec['epoch']} loss={rec['loss']:.6f} beta={rec['beta']:.4f} lr={rec['lr']:.6g}"
    if rec.get("val_bleu") is not None:
        line += f" val_bleu={rec['val_bleu']:.4f}"
    return line


def train(policy, corpus, config, bags=None, validate=None, on_epoch=None, select_best=False):
    """Fit ``policy`` in place on ``corpus`` (sequences of action ids).

    ``bags`` switches to conditional training. ``validate(policy, epoch)``
    may return a BLEU score which is logged; with ``select_best`` the
    parameters of the best-scoring epoch are restored at the end.
    Returns the list of per-epoch log records.
    """
    if not corpus:
        raise ValueError("empty corpus")
    if bags is not None and len(bags) != len(corpus):
        raise ValueError("bags and corpus differ in length")
    params = policy.parameters()
    adam = nx.AdamState.for_params(params, lr=config.lr)
    history = []
    best_score, best_params = -math.inf, None
    n = len(corpus)
    for epoch in range(config.epochs):
        beta = beta_schedule(epoch, config.beta_burn_in, config.beta_rate)
        adam.lr = nx.step_lr(config.lr, epoch, config.lr_halve_every)
        order = np.random.default_rng([config.seed, epoch]).permutation(n)
        total, mass, count = 0.0, 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            rngs = [np.random.default_rng([config.seed, epoch, int(i)]) for i in idx]
            with nx.Tape() as tape:
                res = batch_loss(
                    policy,
                    [corpus[i] for i in idx],
                    config.oracle,
                    beta,
                    rngs,
                    bags=[bags[i] for i in idx] if bags is not None else None,
                    rollin=config.rollin,
                    split=config.split,
                )
            grads = nx.backward(tape, res.loss, params)
            grads, _ = nx.clip_global_norm(grads, config.clip_norm)
            nx.adam_step(adam, params, grads)
            total += res.loss.item() * len(idx)
            mass += res.valid_mass
            count += res.n_steps
        rec = {
            "epoch": epoch,
            "loss": total / n,
            "beta": beta,
            "lr": adam.lr,
            "valid_mass": mass / max(count, 1),
            "val_bleu": None,
        }
        if validate is not None:
            rec["val_bleu"] = validate(policy, epoch)
            if select_best and rec["val_bleu"] is not None and rec["val_bleu"] > best_score:
                best_score = rec["val_bleu"]
                best_params = {k: v.data.copy() for k, v in policy.params.items()}
        history.append(rec)
        logger.info(format_log(rec))
        if on_epoch is not None:
            on_epoch(rec)
    if select_best and best_params is not None:
        for k, v in best_params.items():
            policy.params[k].data[...] = v
    return history
