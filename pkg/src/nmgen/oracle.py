"""Oracle policies that know the target sequence.

Each empty slot of the partial tree owns a half-open span ``(lo, hi)`` into
the target ``Y``: the consecutive run of words that must end up in that
slot's subtree. Committing a token at a slot splits its span around one
occurrence of the token; committing ``END`` requires (and consumes) an empty
span. Any policy that only picks from the valid actions therefore rebuilds
``Y`` exactly.

Distributions are plain ``{action: prob}`` dicts holding only the support.
Policy distributions passed to the coaching oracle may be dicts or dense
arrays indexed by action id.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tree import END, apply_action, new_tree

ORACLES = ("leftright", "uniform", "coaching", "annealed")
ROLLIN_MODES = ("greedy", "stochastic")
SPLIT_MODES = ("random", "leftmost")


class OracleError(Exception):
    pass


class EndInTarget(OracleError, ValueError):
    pass


class UnknownSlot(OracleError, KeyError):
    pass


class InvalidAction(OracleError, ValueError):
    pass


class BetaOutOfRange(OracleError, ValueError):
    pass


class DimensionMismatch(OracleError, ValueError):
    pass


@dataclass
class OracleState:
    target: tuple
    spans: dict = field(default_factory=dict)

    def span(self, slot):
        try:
            return self.spans[slot]
        except KeyError:
            raise UnknownSlot(slot) from None

    def tokens(self, slot):
        lo, hi = self.span(slot)
        return self.target[lo:hi]


def init_oracle(target, root=0):
    target = tuple(target)
    if any(a == END for a in target):
        raise EndInTarget("the end symbol cannot appear in a target sequence")
    return OracleState(target, {root: (0, len(target))})


def valid_actions(state, slot):
    words = state.tokens(slot)
    if not words:
        return (END,)
    return tuple(dict.fromkeys(words))


def uniform_dist(state, slot):
    """``1/n`` on each of the ``n`` unique words in the slot's span."""
    words = state.tokens(slot)
    if not words:
        return {END: 1.0}
    unique = dict.fromkeys(words)
    p = 1.0 / len(unique)
    return {a: p for a in unique}


def leftright_dist(state, slot):
    lo, hi = state.span(slot)
    if lo == hi:
        return {END: 1.0}
    return {state.target[lo]: 1.0}


def _policy_prob(policy, a):
    if isinstance(policy, dict):
        return float(policy.get(a, 0.0))
    try:
        return float(policy[a])
    except IndexError:
        raise DimensionMismatch(f"action {a} outside the policy distribution") from None


def coaching_dist(uniform, policy):
    """Uniform oracle reweighted by the learner's own distribution.

    Falls back to ``uniform`` when the learner puts no mass on any valid
    action, since the product cannot be normalised then.
    """
    prod = {a: p * _policy_prob(policy, a) for a, p in uniform.items()}
    z = sum(prod.values())
    if not z > 0.0:
        return dict(uniform)
    return {a: v / z for a, v in prod.items()}


def annealed_dist(uniform, coaching, beta):
    if not 0.0 <= beta <= 1.0:
        raise BetaOutOfRange(f"beta={beta} outside [0, 1]")
    keys = dict.fromkeys(list(uniform) + list(coaching))
    return {
        a: beta * uniform.get(a, 0.0) + (1.0 - beta) * coaching.get(a, 0.0)
        for a in keys
    }


def oracle_split(state, slot, action, children=None, rng=None, mode="random"):
    """Commit ``action`` at ``slot`` and hand the sub-spans to ``children``.

    ``children`` is the ``(left, right)`` pair of new slot ids; it is ignored
    for ``END``. With repeated words the occurrence is chosen uniformly at
    random (``mode="random"``, needs ``rng``) or as the leftmost one.
    """
    lo, hi = state.span(slot)
    if action == END:
        if lo != hi:
            raise InvalidAction("end is only valid once the span is exhausted")
        del state.spans[slot]
        return state
    hits = [i for i in range(lo, hi) if state.target[i] == action]
    if not hits:
        raise InvalidAction(f"{action!r} is not in the span of slot {slot}")
    if children is None:
        raise ValueError("a token commit needs the two child slot ids")
    if len(hits) == 1 or mode == "leftmost":
        i = hits[0]
    elif mode == "random":
        if rng is None:
            raise ValueError("random split mode needs an rng")
        i = hits[int(rng.integers(len(hits)))]
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    del state.spans[slot]
    left, right = children
    state.spans[left] = (lo, i)
    state.spans[right] = (i + 1, hi)
    return state


def sample_dist(dist, rng):
    u = rng.random()
    acc = 0.0
    last = None
    for a, p in dist.items():
        if p <= 0.0:
            continue
        acc += p
        last = a
        if u < acc:
            return a
    return last


def argmax_dist(dist):
    best, best_p = None, -1.0
    for a, p in dist.items():
        if p > best_p:
            best, best_p = a, p
    return best


class Episode:
    """One oracle roll-in over a target sequence.

    Drives a fresh :class:`~nmgen.tree.PartialTree` and its oracle spans in
    lockstep. ``target`` gives the oracle's (roll-out) distribution at the
    current slot; ``choose`` picks the roll-in action from it.
    """

    def __init__(self, target, kind="uniform", rng=None, beta=1.0,
                 rollin="stochastic", split="random"):
        if kind not in ORACLES:
            raise ValueError(f"unknown oracle {kind!r}; expected one of {ORACLES}")
        if rollin not in ROLLIN_MODES:
            raise ValueError(f"unknown roll-in mode {rollin!r}")
        if not 0.0 <= beta <= 1.0:
            raise BetaOutOfRange(f"beta={beta} outside [0, 1]")
        self.kind = kind
        self.rng = rng if rng is not None else np.random.default_rng()
        self.beta = beta
        self.rollin = rollin
        self.split = split
        self.tree = new_tree()
        self.state = init_oracle(target)
        self._uniform = None
        self._coaching = None

    @property
    def done(self):
        return self.tree.complete

    @property
    def slot(self):
        return self.tree.front()

    def dist(self, policy=None):
        slot = self.slot
        if self.kind == "leftright":
            return leftright_dist(self.state, slot)
        uniform = uniform_dist(self.state, slot)
        self._uniform, self._coaching = uniform, None
        if self.kind == "uniform":
            return uniform
        if policy is None:
            raise ValueError(f"the {self.kind} oracle needs the policy distribution")
        coaching = coaching_dist(uniform, policy)
        self._coaching = coaching
        if self.kind == "coaching":
            return coaching
        return annealed_dist(uniform, coaching, self.beta)

    def choose(self, dist):
        """Roll-in action for the distribution just returned by ``dist``."""
        if self.kind in ("leftright", "uniform"):
            return sample_dist(dist, self.rng) if len(dist) > 1 else next(iter(dist))
        if self.rollin == "stochastic":
            return sample_dist(dist, self.rng)
        if self.kind == "annealed" and self.rng.random() < self.beta:
            return sample_dist(self._uniform, self.rng)
        return argmax_dist(self._coaching)

    def commit(self, action):
        slot = self.slot
        valid = self.state.tokens(slot)
        if action == END:
            if valid:
                raise InvalidAction("end before the span is exhausted")
        elif action not in valid:
            raise InvalidAction(f"{action!r} is not valid at slot {slot}")
        apply_action(self.tree, action)
        node = self.tree.nodes[slot]
        children = (node.left, node.right) if action != END else None
        oracle_split(self.state, slot, action, children, self.rng, self.split)
        return action


def rollout(target, kind="uniform", rng=None, policy=None, beta=1.0,
            rollin="stochastic", split="random"):
    """Run an oracle roll-in to completion.

    ``policy`` is ``None`` or a callable ``policy(tree) -> distribution``
    (needed by the coaching and annealed oracles). Returns the finished tree
    and a list of ``(slot, oracle_dist, action)`` steps.
    """
    ep = Episode(target, kind, rng, beta, rollin, split)
    steps = []
    while not ep.done:
        probs = policy(ep.tree) if policy is not None else None
        dist = ep.dist(probs)
        slot = ep.slot
        action = ep.commit(ep.choose(dist))
        steps.append((slot, dist, action))
    return ep.tree, steps
