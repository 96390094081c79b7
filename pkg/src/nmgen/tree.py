"""Binary-tree generation state.

A :class:`PartialTree` is an arena of nodes plus a FIFO frontier of empty
slots. Each action fills the slot at the front of the frontier; a token
opens a left and a right child slot, ``END`` closes the slot. Because children
are appended to the back of the queue, the fill order is the level order of
the final tree.

Actions are integers. ``END`` (0) is the reserved termination action and
every other value is a token id; tokens may also be arbitrary hashables other
than ``0`` when the tree is used without a vocabulary.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

END = 0
LEFT, RIGHT = 0, 1


class TreeError(Exception):
    pass


class ApplyToCompleteTree(TreeError):
    pass


class IncompleteTree(TreeError):
    pass


class UnknownToken(TreeError, KeyError):
    pass


class DepthExceeded(TreeError, ValueError):
    pass


class TemplateSyntaxError(TreeError, ValueError):
    pass


@dataclass(slots=True)
class TreeNode:
    action: object = None  # None while the slot is empty
    parent: int | None = None
    left: int | None = None
    right: int | None = None
    depth: int = 0
    path: tuple = ()
    order: int | None = None  # position in the fill trace

    @property
    def filled(self):
        return self.action is not None

    @property
    def is_token(self):
        return self.action is not None and self.action != END


@dataclass
class PartialTree:
    nodes: list = field(default_factory=list)
    frontier: deque = field(default_factory=deque)
    trace: list = field(default_factory=list)

    @property
    def complete(self):
        return not self.frontier

    def front(self):
        if not self.frontier:
            raise ApplyToCompleteTree("tree has no empty slots")
        return self.frontier[0]

    def copy(self):
        return PartialTree(
            nodes=[
                TreeNode(n.action, n.parent, n.left, n.right, n.depth, n.path, n.order)
                for n in self.nodes
            ],
            frontier=deque(self.frontier),
            trace=list(self.trace),
        )

    def _new_slot(self, parent, side):
        p = self.nodes[parent]
        idx = len(self.nodes)
        self.nodes.append(TreeNode(parent=parent, depth=p.depth + 1, path=p.path + (side,)))
        return idx

    def __len__(self):
        return len(self.nodes)


def new_tree():
    """Empty state: a single empty root slot on the frontier."""
    tree = PartialTree()
    tree.nodes.append(TreeNode())
    tree.frontier.append(0)
    return tree


def apply_action(tree, action):
    """Fill the front slot with ``action`` (in place) and return the tree."""
    if not tree.frontier:
        raise ApplyToCompleteTree("cannot apply an action to a complete tree")
    slot = tree.frontier.popleft()
    node = tree.nodes[slot]
    node.action = action
    node.order = len(tree.trace)
    tree.trace.append(action)
    if action != END:
        node.left = tree._new_slot(slot, LEFT)
        node.right = tree._new_slot(slot, RIGHT)
        tree.frontier.append(node.left)
        tree.frontier.append(node.right)
    return tree


def replay(trace):
    tree = new_tree()
    for a in trace:
        apply_action(tree, a)
    return tree


def _in_order(tree, idx, out):
    # iterative in-order walk; recursion depth can reach the sentence length
    stack = []
    cur = idx
    while stack or cur is not None:
        while cur is not None:
            stack.append(cur)
            node = tree.nodes[cur]
            cur = node.left if node.is_token else None
        cur = stack.pop()
        node = tree.nodes[cur]
        if node.is_token:
            out.append(cur)
            cur = node.right
        else:
            cur = None
    return out


def in_order_nodes(tree):
    """Indices of token nodes in in-order (surface) order."""
    if not tree.complete:
        raise IncompleteTree("in-order traversal needs a complete tree")
    return _in_order(tree, 0, [])


def in_order_sentence(tree):
    return tuple(tree.nodes[i].action for i in in_order_nodes(tree))


def level_order_trace(tree):
    return tuple(tree.trace)


def average_span(tree):
    """Mean token-child count over token nodes that have a token child.

    ``None`` when no such node exists (sentences of length <= 1).
    """
    if not tree.complete:
        raise IncompleteTree("average_span needs a complete tree")
    counts = []
    for node in tree.nodes:
        if not node.is_token:
            continue
        k = tree.nodes[node.left].is_token + tree.nodes[node.right].is_token
        if k:
            counts.append(k)
    if not counts:
        return None
    return sum(counts) / len(counts)


def path_encoding(node, max_depth, p):
    """Left/right path of ``node`` as a ``2 * max_depth`` vector.

    Step ``k`` (0-based from the root) occupies positions ``2k, 2k+1`` as
    ``[1, 0]`` (left) or ``[0, 1]`` (right), both scaled by ``p ** k``.
    """
    bits = path_bits(node.path, max_depth)
    return bits * path_scales(max_depth, p)


def path_bits(path, max_depth):
    if len(path) > max_depth:
        raise DepthExceeded(f"depth {len(path)} exceeds max_depth {max_depth}")
    bits = np.zeros(2 * max_depth, dtype=np.float32)
    for k, side in enumerate(path):
        bits[2 * k + side] = 1.0
    return bits


def path_exponents(max_depth):
    return np.repeat(np.arange(max_depth), 2)


def path_scales(max_depth, p):
    return np.float32(p) ** path_exponents(max_depth).astype(np.float32)


# --- seed trees -------------------------------------------------------------

@dataclass(frozen=True)
class SeedTree:
    token: str
    left: "SeedTree | None" = None
    right: "SeedTree | None" = None

    def tokens(self):
        out = [self.token]
        for child in (self.left, self.right):
            if child is not None:
                out.extend(child.tokens())
        return out

    def in_order(self):
        out = []
        if self.left is not None:
            out.extend(self.left.in_order())
        out.append(self.token)
        if self.right is not None:
            out.extend(self.right.in_order())
        return out


def parse_template(text):
    """Parse ``(tok LEFT RIGHT)`` where each child is ``()`` or a nested node."""
    toks = _lex(text)
    if not toks:
        raise TemplateSyntaxError("empty template")
    pos, tree = _parse_node(toks, 0)
    if tree is None:
        raise TemplateSyntaxError("template root cannot be empty")
    if pos != len(toks):
        raise TemplateSyntaxError(f"trailing input after position {pos}")
    return tree


def _lex(text):
    out, buf = [], []
    for ch in text:
        if ch in "()":
            if buf:
                out.append("".join(buf))
                buf = []
            out.append(ch)
        elif ch.isspace():
            if buf:
                out.append("".join(buf))
                buf = []
        else:
            buf.append(ch)
    if buf:
        out.append("".join(buf))
    return out


def _parse_node(toks, pos):
    if pos >= len(toks) or toks[pos] != "(":
        raise TemplateSyntaxError(f"expected '(' at token {pos}")
    pos += 1
    if pos < len(toks) and toks[pos] == ")":
        return pos + 1, None
    if pos >= len(toks) or toks[pos] in "()":
        raise TemplateSyntaxError(f"expected a token at position {pos}")
    token = toks[pos]
    pos, left = _parse_node(toks, pos + 1)
    pos, right = _parse_node(toks, pos)
    if pos >= len(toks) or toks[pos] != ")":
        raise TemplateSyntaxError(f"expected ')' at token {pos}")
    return pos + 1, SeedTree(token, left, right)


def format_template(seed):
    if seed is None:
        return "()"
    return f"({seed.token} {format_template(seed.left)} {format_template(seed.right)})"


def build_seed_tree(template, vocab=None):
    """Partial tree whose filled nodes mirror ``template``.

    ``vocab`` maps token strings to ids (anything with ``__getitem__`` and
    ``__contains__``); without it the template strings are used as actions.
    Filled nodes are placed in level order so the trace is the level-order
    listing, and every missing child ends up on the frontier in level order.
    """
    if isinstance(template, str):
        template = parse_template(template)

    def to_action(tok):
        if vocab is None:
            return tok
        if tok not in vocab:
            raise UnknownToken(tok)
        return vocab[tok]

    tree = PartialTree()
    tree.nodes.append(TreeNode())
    queue = deque([(0, template)])
    while queue:
        idx, sub = queue.popleft()
        if sub is None:
            tree.frontier.append(idx)
            continue
        node = tree.nodes[idx]
        node.action = to_action(sub.token)
        node.order = len(tree.trace)
        tree.trace.append(node.action)
        node.left = tree._new_slot(idx, LEFT)
        node.right = tree._new_slot(idx, RIGHT)
        queue.append((node.left, sub.left))
        queue.append((node.right, sub.right))
    return tree


# --- export -----------------------------------------------------------------

def tree_to_dot(tree, labels=None, name="tree"):
    """Graphviz DOT text; nodes show the token and its fill index."""
    def label(a):
        if a is None:
            return "_"
        if a == END:
            return "<end>"
        return str(labels[a]) if labels is not None else str(a)

    lines = [f"digraph {name} {{", "  node [shape=box];"]
    for i, node in enumerate(tree.nodes):
        text = label(node.action)
        if node.order is not None:
            text = f"{text} ({node.order + 1})"
        text = text.replace("\\", "\\\\").replace('"', '\\"')
        style = ", style=dashed" if node.action is None else ""
        lines.append(f'  n{i} [label="{text}"{style}];')
    for i, node in enumerate(tree.nodes):
        for side, child in (("L", node.left), ("R", node.right)):
            if child is not None:
                lines.append(f'  n{i} -> n{child} [label="{side}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
