"""Tag-constrained chart parsing into packed and-or forests."""
from __future__ import annotations

from collections import defaultdict
from typing import NamedTuple

from .events import LabeledTree
from .grammar import GrammarError

__all__ = [
    'Token', 'Sentence', 'Item', 'AndNode', 'ParseForest', 'ParseError',
    'parse', 'lexicalize_forest', 'enumerate_trees', 'count_trees',
    'read_corpus', 'format_sentence', 'parse_sentence_line',
]


class ParseError(ValueError):
    pass


class Token(NamedTuple):
    word: str
    tags: frozenset


class Sentence(tuple):
    """A tuple of Tokens."""

    @property
    def words(self):
        return [t.word for t in self]

    def __str__(self):
        return format_sentence(self)


def parse_sentence_line(line):
    toks = []
    for piece in line.split():
        word, sep, tags = piece.rpartition('/')
        if not sep or not word:
            raise ParseError('token %r is not word/TAG' % piece)
        tagset = frozenset(t for t in tags.split('|') if t)
        toks.append(Token(word, tagset))
    return Sentence(toks)


def read_corpus(lines):
    """Yield Sentences from ``word/TAG`` lines; blank and # lines skipped."""
    if isinstance(lines, str):
        lines = lines.splitlines()
    for line in lines:
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        yield parse_sentence_line(line)


def format_sentence(sentence):
    return ' '.join('%s/%s' % (t.word, '|'.join(sorted(t.tags)))
                    for t in sentence)


class Item(NamedTuple):
    start: int
    end: int
    cat: str
    head: int | None = None


class AndNode(NamedTuple):
    rule: object
    children: tuple


class ParseForest:
    """Packed forest: or-nodes are Items, each mapped to its AndNodes.

    Leaves (terminal items) map to an empty tuple.  ``order`` lists items
    children-first.  In a lexicalized forest every item carries the position
    of its head word and ``roots`` holds one root per possible sentence head.
    """

    def __init__(self, sentence, grammar, nodes, roots, lexicalized=False):
        self.sentence = sentence
        self.grammar = grammar
        self.lexicalized = lexicalized
        idx = grammar.rule_index

        def key(a):
            return (idx[a.rule], tuple((c.start, c.end, c.head or 0)
                                       for c in a.children))
        self.nodes = {it: tuple(sorted(alts, key=key))
                      for it, alts in nodes.items()}
        self.roots = sorted(roots, key=lambda r: r.head or 0)
        self.order = self._toposort()

    def _toposort(self):
        order, done = [], set()
        for root in self.roots:
            stack = [(root, False)]
            while stack:
                item, expanded = stack.pop()
                if item in done:
                    continue
                if expanded:
                    done.add(item)
                    order.append(item)
                    continue
                stack.append((item, True))
                for a in self.nodes[item]:
                    for c in a.children:
                        if c not in done:
                            stack.append((c, False))
        return order

    @property
    def root(self):
        return self.roots[0]

    def is_leaf(self, item):
        return not self.nodes[item]

    def word(self, pos):
        return self.sentence[pos].word

    def head_word(self, item):
        return self.sentence[item.head].word

    def num_and_nodes(self):
        return sum(len(a) for a in self.nodes.values())

    def __len__(self):
        return len(self.nodes)

    def __repr__(self):
        return '<ParseForest %s: %d items, %d and-nodes>' % (
            'lexicalized' if self.lexicalized else 'plain', len(self.nodes),
            self.num_and_nodes())


def _allowed_tags(token, grammar, open_lexicon):
    if not token.tags:
        raise ParseError('token %r has an empty tag set' % token.word)
    known = grammar.lexicon.get(token.word)
    if known is None:
        if not open_lexicon:
            raise ParseError('unknown word %r' % token.word)
        return token.tags & grammar.terminals
    return token.tags & known


def parse(sentence, grammar, open_lexicon=True, predict=True):
    """Chart-parse ``sentence``; returns a ParseForest or None (no parse).

    The chart is filled bottom-up, column by column; with ``predict`` a
    rule is only started at position i if its left-hand side is a left
    corner of some category predicted there.  Prediction never changes the
    tree set, only the amount of work.
    """
    n = len(sentence)
    if n == 0:
        raise ParseError('empty sentence')
    if grammar.unary_cycle() is not None:
        raise GrammarError('cyclic unary rules through %s'
                           % grammar.unary_cycle())
    tags = [_allowed_tags(t, grammar, open_lexicon) for t in sentence]
    chart = defaultdict(dict)      # (i, j) -> cat -> [AndNode]
    active = defaultdict(list)     # (i, k) -> [(rule, dot, children)]
    lc = grammar.left_corners
    by_first = grammar.rules_by_first
    allowed = [None] * (n + 1)

    def predicted(i):
        if allowed[i] is None:
            raw = {grammar.start} if i == 0 else set()
            for (a, b), edges in active.items():
                if b == i:
                    raw.update(r.rhs[d] for r, d, _ in edges)
            cats = set()
            for c in raw:
                cats |= lc.get(c, {c})
            allowed[i] = cats
        return allowed[i]

    for j in range(1, n + 1):
        for i in range(j - 1, -1, -1):
            cell = chart[(i, j)]
            if j == i + 1:
                for t in sorted(tags[i]):
                    cell[t] = []
            for k in range(i + 1, j):
                right = chart.get((k, j))
                if not right:
                    continue
                for rule, dot, kids in active.get((i, k), ()):
                    nxt = rule.rhs[dot]
                    if nxt not in right:
                        continue
                    kids2 = kids + (Item(k, j, nxt),)
                    if dot + 1 == len(rule.rhs):
                        cell.setdefault(rule.lhs, []).append(
                            AndNode(rule, kids2))
                    else:
                        active[(i, j)].append((rule, dot + 1, kids2))
            if not cell:
                continue
            ok = predicted(i) if predict else None
            agenda = sorted(cell)
            done = set()
            while agenda:
                x = agenda.pop()
                if x in done:
                    continue
                done.add(x)
                for rule in by_first.get(x, ()):
                    if ok is not None and rule.lhs not in ok:
                        continue
                    kid = (Item(i, j, x),)
                    if len(rule.rhs) == 1:
                        cell.setdefault(rule.lhs, []).append(
                            AndNode(rule, kid))
                        if rule.lhs not in done:
                            agenda.append(rule.lhs)
                    else:
                        active[(i, j)].append((rule, 1, kid))
        predicted(j)
    top = chart.get((0, n), {})
    if grammar.start not in top:
        return None
    root = Item(0, n, grammar.start)
    nodes = {}
    stack = [root]
    while stack:
        it = stack.pop()
        if it in nodes:
            continue
        alts = chart[(it.start, it.end)][it.cat]
        nodes[it] = alts
        for a in alts:
            stack.extend(a.children)
    return ParseForest(sentence, grammar, nodes, [root])


def lexicalize_forest(forest):
    """Split each item by the position of its lexical head."""
    if forest.lexicalized:
        return forest
    variants = {}
    nodes = {}
    for item in forest.order:
        alts = forest.nodes[item]
        if not alts:
            lex = item._replace(head=item.start)
            variants[item] = [lex]
            nodes[lex] = []
            continue
        made = {}
        for a in alts:
            h = a.rule.head_index
            for combo in _product([variants[c] for c in a.children]):
                head = combo[h].head
                lex = item._replace(head=head)
                made.setdefault(lex, []).append(AndNode(a.rule, combo))
        variants[item] = sorted(made, key=lambda it: it.head)
        nodes.update(made)
    roots = []
    for r in forest.roots:
        roots.extend(variants[r])
    return ParseForest(forest.sentence, forest.grammar, nodes, roots,
                       lexicalized=True)


def _product(lists):
    out = [()]
    for lst in lists:
        out = [prefix + (x,) for prefix in out for x in lst]
    return out


def count_trees(forest):
    counts = {}
    for item in forest.order:
        alts = forest.nodes[item]
        if not alts:
            counts[item] = 1
            continue
        total = 0
        for a in alts:
            m = 1
            for c in a.children:
                m *= counts[c]
            total += m
        counts[item] = total
    return sum(counts[r] for r in forest.roots)


def enumerate_trees(forest, limit=None):
    """Yield up to ``limit`` LabeledTrees in a fixed order."""
    if limit is not None and limit < 1:
        raise ValueError('limit must be at least 1')
    words = forest.sentence

    def trees(item):
        alts = forest.nodes[item]
        if not alts:
            yield LabeledTree(item.cat, words[item.start].word)
            return
        for a in alts:
            for kids in seqs(a.children, 0):
                head = kids[a.rule.head_index].head
                yield LabeledTree(item.cat, head, a.rule, kids)

    def seqs(kids, i):
        if i == len(kids):
            yield ()
            return
        for t in trees(kids[i]):
            for rest in seqs(kids, i + 1):
                yield (t,) + rest

    produced = 0
    for root in forest.roots:
        for t in trees(root):
            yield t
            produced += 1
            if limit is not None and produced >= limit:
                return
