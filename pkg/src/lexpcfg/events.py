"""Rule and lexical-choice events, event-labelled trees, event counts."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .grammar import Rule

__all__ = [
    'TOP', 'START', 'RuleEvent', 'LexEvent', 'EventCounts', 'LabeledTree',
    'TreeWeight', 'tree_events', 'tree_weight', 'format_tree', 'read_tree',
    'EventError',
]

# virtual parent of the sentence root: the root lexical-choice event is
# LexEvent(TOP, START, start_symbol, sentence_head)
TOP = '<top>'
START = '<start>'


class EventError(ValueError):
    pass


class RuleEvent(NamedTuple):
    head: str
    rule: Rule

    @property
    def lhs(self):
        return self.rule.lhs

    @property
    def left(self):
        return self.rule.left

    @property
    def head_cat(self):
        return self.rule.head

    @property
    def right(self):
        return self.rule.right


class LexEvent(NamedTuple):
    parent_head: str
    parent_cat: str
    child_cat: str
    child_head: str


class EventCounts(dict):
    """Sparse event -> count map; zero entries are never stored."""

    def add(self, event, value=1.0):
        if value:
            self[event] = self.get(event, 0.0) + value

    def merge(self, other):
        for k, v in other.items():
            self[k] = self.get(k, 0.0) + v
        return self

    def __add__(self, other):
        out = EventCounts(self)
        return out.merge(other)

    def scaled(self, factor):
        return EventCounts({k: v * factor for k, v in self.items()})

    def pruned(self, threshold=1e-12):
        return EventCounts({k: v for k, v in self.items() if v >= threshold})

    def rule_events(self):
        return {k: v for k, v in self.items() if isinstance(k, RuleEvent)}

    def lex_events(self):
        return {k: v for k, v in self.items() if isinstance(k, LexEvent)}


@dataclass(frozen=True)
class LabeledTree:
    """A lexicalized tree.  Leaves have ``rule=None`` and ``head`` the word."""
    cat: str
    head: str
    rule: Rule | None = None
    children: tuple = ()

    @property
    def is_leaf(self):
        return self.rule is None

    def leaves(self):
        if self.is_leaf:
            return [(self.head, self.cat)]
        out = []
        for c in self.children:
            out.extend(c.leaves())
        return out

    def nodes(self):
        yield self
        for c in self.children:
            yield from c.nodes()

    def __str__(self):
        return format_tree(self)


def _node_events(node):
    yield RuleEvent(node.head, node.rule)
    for i, child in enumerate(node.children):
        if i != node.rule.head_index:
            yield LexEvent(node.head, node.cat, child.cat, child.head)


def tree_events(tree, grammar=None):
    """The event monomial of ``tree`` as an EventCounts of exponents.

    With a grammar, every node is checked against its rule set.
    """
    counts = EventCounts()
    counts.add(LexEvent(TOP, START, tree.cat, tree.head))
    stack = [tree]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            if grammar is not None and node.cat not in grammar.terminals:
                raise EventError('leaf category %s is not a terminal'
                                 % node.cat)
            continue
        rule = node.rule
        if grammar is not None and rule not in grammar.rule_index:
            raise EventError('rule %s is not in the grammar' % (rule,))
        kids = tuple(c.cat for c in node.children)
        if rule.lhs != node.cat or rule.rhs != kids:
            raise EventError('node %s does not match rule %s' % (node.cat,
                                                                 rule))
        if node.children[rule.head_index].head != node.head:
            raise EventError('head of %s is not projected from its head '
                             'daughter' % node.cat)
        for ev in _node_events(node):
            counts.add(ev)
        stack.extend(node.children)
    return counts


class TreeWeight(NamedTuple):
    prob: float
    logprob: float


def tree_weight(counts, model):
    """Evaluate the monomial ``counts`` at the parameters of ``model``."""
    total = 0.0
    for event, n in counts.items():
        lp = model.logprob(event)
        if lp == -math.inf:
            raise EventError('event %r has zero probability' % (event,))
        total += n * lp
    return TreeWeight(math.exp(total), total)


def format_tree(tree):
    """Bracketed form ``(CAT^head child ...)``; leaves are ``(TAG word)``.

    When several daughters share the node's head word the head daughter is
    marked with a trailing ``'``, as in grammar files, so the rule can be
    recovered.
    """
    def fmt(node, mark):
        if node.is_leaf:
            return '(%s%s %s)' % (node.cat, mark, node.head)
        kids = node.children
        hi = None
        if node.rule is not None and \
                sum(k.head == node.head for k in kids) > 1:
            hi = node.rule.head_index
        return '(%s^%s%s %s)' % (node.cat, node.head, mark, ' '.join(
            fmt(c, "'" if i == hi else '') for i, c in enumerate(kids)))
    return fmt(tree, '')


def _tokenize_tree(text):
    return text.replace('(', ' ( ').replace(')', ' ) ').split()


def read_tree(text, grammar):
    """Inverse of :func:`format_tree`, resolving rules against ``grammar``."""
    toks = _tokenize_tree(text)
    pos = 0

    def node():
        nonlocal pos
        if toks[pos] != '(':
            raise EventError('expected ( at token %d' % pos)
        label = toks[pos + 1]
        pos += 2
        is_head = label.endswith("'")
        label = label.rstrip("'")
        if pos < len(toks) and toks[pos] not in '()':
            word = toks[pos]
            if toks[pos + 1] != ')':
                raise EventError('leaf %s has extra material' % label)
            pos += 2
            return LabeledTree(label, word), is_head
        cat, _, head = label.partition('^')
        kids, marks = [], []
        while toks[pos] != ')':
            kid, m = node()
            kids.append(kid)
            marks.append(m)
        pos += 1
        cats = tuple(k.cat for k in kids)
        want = marks.index(True) if any(marks) else None
        for r in grammar.rules_by_lhs.get(cat, ()):
            if r.rhs == cats and kids[r.head_index].head == head and \
                    want in (None, r.head_index):
                return LabeledTree(cat, head, r, tuple(kids)), is_head
        raise EventError('no rule %s -> %s headed by %s'
                         % (cat, ' '.join(cats), head))

    try:
        tree, _ = node()
    except IndexError:
        raise EventError('truncated tree %r' % text) from None
    if pos != len(toks):
        raise EventError('trailing material after tree')
    return tree
