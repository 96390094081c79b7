from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ids
from enumerate_trees import shape_distribution, tree_shape
from nmgen.oracle import (
    BetaOutOfRange,
    EndInTarget,
    Episode,
    InvalidAction,
    UnknownSlot,
    annealed_dist,
    coaching_dist,
    init_oracle,
    leftright_dist,
    oracle_split,
    rollout,
    uniform_dist,
)
from nmgen.tree import END, apply_action, average_span, in_order_sentence, new_tree

a, b, c, d, e = ids("a b c d e")


def test_init_oracle_root_span():
    assert init_oracle((a, b, c, d)).spans == {0: (0, 4)}
    assert init_oracle(()).spans == {0: (0, 0)}
    assert init_oracle(range(1, 21)).spans == {0: (0, 20)}
    with pytest.raises(EndInTarget):
        init_oracle((a, END))


def test_uniform_dist():
    st_ = init_oracle((a, b, c, d))
    assert uniform_dist(st_, 0) == {a: 0.25, b: 0.25, c: 0.25, d: 0.25}
    assert uniform_dist(init_oracle(()), 0) == {END: 1.0}
    # n counts unique words only
    assert uniform_dist(init_oracle((c, c, d)), 0) == {c: 0.5, d: 0.5}
    with pytest.raises(UnknownSlot):
        uniform_dist(st_, 7)


def test_coaching_product_and_fallback():
    uni = {a: 0.5, b: 0.5}
    got = coaching_dist(uni, {a: 0.8, b: 0.1, c: 0.1})
    assert got[a] == pytest.approx(8 / 9) and got[b] == pytest.approx(1 / 9)
    assert set(got) == {a, b}
    flat = np.full(6, 1 / 6)
    assert coaching_dist(uni, flat) == pytest.approx(uni)
    assert coaching_dist(uni, {c: 1.0}) == uni


def test_annealed_mixture():
    uni = {a: 0.5, b: 0.5}
    coach = {a: 8 / 9, b: 1 / 9}
    assert annealed_dist(uni, coach, 1.0) == pytest.approx(uni)
    assert annealed_dist(uni, coach, 0.0) == pytest.approx(coach)
    mix = annealed_dist(uni, coach, 0.5)
    assert mix[a] == pytest.approx(25 / 36) and mix[b] == pytest.approx(11 / 36)
    for bad in (-0.1, 1.5):
        with pytest.raises(BetaOutOfRange):
            annealed_dist(uni, coach, bad)


def test_leftright_dist():
    assert leftright_dist(init_oracle((a, b, c, d)), 0) == {a: 1.0}
    assert leftright_dist(init_oracle(()), 0) == {END: 1.0}


def test_leftright_rollout_is_chain():
    tree, steps = rollout((a, b, c, d), "leftright")
    assert [s[2] for s in steps] == [a, END, b, END, c, END, d, END, END]
    assert average_span(tree) == 1.0


def test_split_worked_example():
    tree = apply_action(new_tree(), b)
    st_ = init_oracle((a, b, c, d))
    root = tree.nodes[0]
    oracle_split(st_, 0, b, (root.left, root.right))
    assert st_.tokens(root.left) == (a,)
    assert st_.tokens(root.right) == (c, d)
    assert 0 not in st_.spans


def test_split_single_and_invalid():
    st_ = init_oracle((e,))
    oracle_split(st_, 0, e, (1, 2))
    assert st_.spans == {1: (0, 0), 2: (1, 1)}
    with pytest.raises(InvalidAction):
        oracle_split(init_oracle((a,)), 0, b, (1, 2))
    with pytest.raises(InvalidAction):
        oracle_split(init_oracle((a,)), 0, END)


def test_duplicate_split_both_choices_reconstruct():
    target = (c, a, c)
    seen = set()
    for seed in range(40):
        ep = Episode(target, "uniform", np.random.default_rng(seed))
        ep.commit(c)
        left, right = ep.tree.nodes[0].left, ep.tree.nodes[0].right
        seen.add((ep.state.tokens(left), ep.state.tokens(right)))
        while not ep.done:
            ep.commit(ep.choose(ep.dist()))
        assert in_order_sentence(ep.tree) == target
    assert seen == {((), (a, c)), ((c, a), ())}


def test_leftmost_split_mode_is_deterministic():
    st_ = init_oracle((c, a, c))
    oracle_split(st_, 0, c, (1, 2), mode="leftmost")
    assert st_.spans == {1: (0, 0), 2: (1, 3)}


def _random_policy(rng, n):
    return lambda tree: rng.dirichlet(np.ones(n))


@settings(max_examples=150, deadline=None)
@given(
    st.lists(st.integers(1, 6), max_size=20),
    st.sampled_from(["leftright", "uniform", "coaching", "annealed"]),
    st.sampled_from([0.0, 0.5, 1.0]),
    st.sampled_from(["greedy", "stochastic"]),
    st.integers(0, 2**32 - 1),
)
def test_any_oracle_reconstructs_and_is_sound(target, kind, beta, rollin, seed):
    rng = np.random.default_rng(seed)
    target = tuple(target)
    ep = Episode(target, kind, rng, beta, rollin)
    placed = []
    while not ep.done:
        slot = ep.slot
        span = ep.state.tokens(slot)
        dist = ep.dist(rng.dirichlet(np.ones(7)))
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-6)
        assert all(p >= 0 for p in dist.values())
        support = {x for x, p in dist.items() if p > 0}
        if span:
            assert support <= set(span)
        else:
            assert dist == {END: 1.0}
        action = ep.commit(ep.choose(dist))
        if action != END:
            placed.append(action)
        pending = [t for s in ep.state.spans for t in ep.state.tokens(s)]
        assert Counter(pending) + Counter(placed) == Counter(target)
    assert in_order_sentence(ep.tree) == target
    assert len(ep.tree.trace) == 2 * len(target) + 1


def test_enumerator_three_distinct_tokens():
    dist = shape_distribution((a, b, c))
    assert len(dist) == 5
    assert sum(dist.values()) == 1
    assert dist[(b, (a, None, None), (c, None, None))] == Fraction(1, 3)
    assert dist[(a, None, (b, None, (c, None, None)))] == Fraction(1, 6)


def test_uniform_tree_frequencies_small_sample():
    # quick version of the acceptance check
    rng = np.random.default_rng(7)
    exact = shape_distribution((a, b, c))
    n = 6000
    counts = Counter(tree_shape(rollout((a, b, c), "uniform", rng)[0]) for _ in range(n))
    for shape, p in exact.items():
        assert abs(counts[shape] / n - float(p)) < 0.03
