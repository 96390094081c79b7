"""Test-time tree construction from a trained policy."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .tree import END, apply_action, build_seed_tree, in_order_sentence, new_tree


@dataclass
class DecodeConfig:
    mode: str = "sample"  # or "greedy"
    temperature: float = 1.0
    top_k: int | None = None
    tau: float = 0.5
    max_nodes: int | None = None
    max_depth: int | None = None
    seed: int = 0
    strict_permutation: bool = False

    def __post_init__(self):
        if self.mode not in ("sample", "greedy"):
            raise ValueError(f"mode must be 'sample' or 'greedy', got {self.mode!r}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if self.max_nodes is not None and self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")


@dataclass
class Decoded:
    tree: object
    sentence: tuple
    cap_hit: bool = False
    # (depth, raw policy distribution) for every node the policy decided
    trace: list = field(default_factory=list)


def _choose(probs, mode, rng):
    if mode == "greedy":
        return int(np.argmax(probs))
    return int(rng.choice(len(probs), p=probs))


def decode(policy, config=None, bag=None, seed_tree=None, rng=None, record=False):
    """Build one complete tree.

    Filled nodes of ``seed_tree`` (a :class:`~nmgen.tree.PartialTree`) are fed
    to the policy in level order first; then the frontier is filled. Once a
    token would push the tree past ``max_nodes`` nodes, or a slot sits at
    ``max_depth``, the remaining slots are closed with ``END``.
    """
    config = config or DecodeConfig()
    cfg = policy.config
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    max_depth = config.max_depth if config.max_depth is not None else cfg.max_depth
    if cfg.tree_enc:
        max_depth = min(max_depth, cfg.max_depth)
    max_nodes = config.max_nodes

    tree = seed_tree.copy() if seed_tree is not None else new_tree()
    state = policy.initial_state(1, bags=[bag] if bag is not None else None)
    for idx in sorted((i for i, n in enumerate(tree.nodes) if n.filled),
                      key=lambda i: tree.nodes[i].order):
        node = tree.nodes[idx]
        state = policy.step(state, [node.action], [node.path] if cfg.tree_enc else None)

    remaining = Counter(bag) if (config.strict_permutation and bag is not None) else None
    cap_hit = False
    trace = []
    while not tree.complete:
        slot = tree.front()
        node = tree.nodes[slot]
        over_nodes = max_nodes is not None and len(tree.nodes) + 2 > max_nodes
        if over_nodes or node.depth >= max_depth:
            cap_hit = True
            action = END
        else:
            if record:
                trace.append((node.depth, policy.action_dist(state)[0]))
            probs = policy.action_dist(state, config.temperature, config.top_k)[0]
            if cfg.aux_end and policy.end_prob(state)[0] >= config.tau:
                action = END
            else:
                if remaining is not None:
                    probs = _restrict_to_bag(probs, remaining, cfg.aux_end)
                action = _choose(probs, config.mode, rng)
            if remaining is not None and action != END:
                remaining[action] -= 1
        apply_action(tree, action)
        if not tree.complete:
            state = policy.step(state, [action], [node.path] if cfg.tree_enc else None)
    return Decoded(tree, in_order_sentence(tree), cap_hit, trace)


def _restrict_to_bag(probs, remaining, aux):
    mask = np.zeros_like(probs)
    for a, c in remaining.items():
        if c > 0:
            mask[a] = 1.0
    if not aux or not mask.any():
        mask[END] = 1.0
    out = probs * mask
    z = out.sum()
    if z <= 0.0:
        out = np.zeros_like(probs)
        out[END] = 1.0
        return out
    return out / z


def batch_sample(policy, n, config=None, bags=None, seed_tree=None, record=False):
    """``n`` independent decodes; sample ``i`` uses the stream ``(seed, i)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    config = config or DecodeConfig()
    out = []
    for i in range(n):
        rng = np.random.default_rng([config.seed, i])
        bag = bags[i] if bags is not None else None
        out.append(decode(policy, config, bag=bag, seed_tree=seed_tree, rng=rng, record=record))
    return out


def complete(policy, template, vocab, n, config=None):
    seed = build_seed_tree(template, vocab)
    return batch_sample(policy, n, config, seed_tree=seed)

