"""Headed context-free grammars: representation, DSL reader/writer, validation.

A grammar file is line oriented.  Statements end with ``;`` and ``#`` starts
a comment::

    start S;
    @chunk NC;
    S -> NP VFP';
    NP -> NC' | NC' PP;
    dog : NN;
    walks : VBZ NNS;

The head daughter of each rule carries a trailing ``'``.  Terminal categories
are the tags mentioned in lexicon lines (or declared with ``terminals``);
nonterminals are rule left-hand sides (or declared with ``nonterminals``).
"""
from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

__all__ = [
    'Rule', 'HeadedGrammar', 'GrammarError', 'Diagnostic',
    'parse_grammar', 'dump_grammar', 'validate', 'projection_closure',
    'generate_state_rules', 'add_state_rules', 'state_pair_name',
    'state_entry_name',
]

_NAME = re.compile(r"^[^\s;:'|#]+$")


class GrammarError(ValueError):
    """Malformed grammar text or an inconsistent grammar."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = 'line %d: %s' % (lineno, message)
        super().__init__(message)
        self.lineno = lineno


@dataclass(frozen=True)
class Rule:
    """A headed production ``lhs -> left head' right``."""
    lhs: str
    left: tuple = ()
    head: str = ''
    right: tuple = ()

    @property
    def rhs(self):
        return self.left + (self.head,) + self.right

    @property
    def head_index(self):
        return len(self.left)

    @property
    def nonheads(self):
        """Non-head daughter categories, in order."""
        return self.left + self.right

    def __str__(self):
        parts = list(self.left) + [self.head + "'"] + list(self.right)
        return '%s -> %s' % (self.lhs, ' '.join(parts))


class Diagnostic(NamedTuple):
    condition: str
    symbol: str
    message: str

    def __str__(self):
        return 'condition (%s): %s: %s' % (self.condition, self.symbol,
                                           self.message)


class HeadedGrammar:
    """The tuple (N, T, W, L, R, s) plus chunk annotations.

    Instances are not mutated after construction.
    """

    def __init__(self, start, rules, lexicon, chunks=(), nonterminals=None,
                 terminals=None):
        self.start = start
        self.rules = tuple(rules)
        self.lexicon = {w: frozenset(tags) for w, tags in lexicon.items()}
        self.chunks = frozenset(chunks)
        if nonterminals is None:
            nonterminals = {r.lhs for r in self.rules}
        if terminals is None:
            terminals = set()
            for tags in self.lexicon.values():
                terminals.update(tags)
        self.nonterminals = frozenset(nonterminals)
        self.terminals = frozenset(terminals)

    @property
    def words(self):
        return frozenset(self.lexicon)

    @cached_property
    def rule_index(self):
        return {r: i for i, r in enumerate(self.rules)}

    @cached_property
    def rules_by_lhs(self):
        out = defaultdict(list)
        for r in self.rules:
            out[r.lhs].append(r)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def rules_by_first(self):
        out = defaultdict(list)
        for r in self.rules:
            out[r.rhs[0]].append(r)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def projections(self):
        """Map category -> nonterminals it projects to (transitive closure)."""
        up = defaultdict(set)
        for r in self.rules:
            up[r.head].add(r.lhs)
        closure = {}
        for cat in self.nonterminals | self.terminals:
            seen, stack = set(), list(up.get(cat, ()))
            while stack:
                c = stack.pop()
                if c not in seen:
                    seen.add(c)
                    stack.extend(up.get(c, ()))
            closure[cat] = frozenset(seen)
        return closure

    @cached_property
    def heads_of(self):
        """Map nonterminal -> words that can be its lexical head."""
        out = defaultdict(set)
        for w, n in projection_closure(self):
            out[n].add(w)
        return {n: frozenset(ws) for n, ws in out.items()}

    @cached_property
    def nonhead_daughters(self):
        """Map lhs -> categories occurring as non-head daughters of its rules."""
        out = defaultdict(set)
        for r in self.rules:
            out[r.lhs].update(r.nonheads)
        return {k: frozenset(v) for k, v in out.items()}

    @cached_property
    def left_corners(self):
        """Reflexive-transitive left-corner closure, used for prediction."""
        down = defaultdict(set)
        for r in self.rules:
            down[r.lhs].add(r.rhs[0])
        out = {}
        for cat in self.nonterminals | self.terminals:
            seen, stack = {cat}, [cat]
            while stack:
                for c in down.get(stack.pop(), ()):
                    if c not in seen:
                        seen.add(c)
                        stack.append(c)
            out[cat] = frozenset(seen)
        return out

    def unary_cycle(self):
        """Return a category on a cycle of unary rules, or None."""
        succ = defaultdict(set)
        for r in self.rules:
            if len(r.rhs) == 1:
                succ[r.lhs].add(r.head)
        state = {}

        def visit(c):
            state[c] = 1
            for d in succ.get(c, ()):
                if state.get(d) == 1:
                    return d
                if d not in state:
                    found = visit(d)
                    if found is not None:
                        return found
            state[c] = 2
            return None

        for c in sorted(succ):
            if c not in state:
                found = visit(c)
                if found is not None:
                    return found
        return None

    def categories(self):
        return self.nonterminals | self.terminals

    def with_rules(self, extra):
        return HeadedGrammar(self.start, self.rules + tuple(extra),
                             self.lexicon, self.chunks,
                             self.nonterminals | {r.lhs for r in extra},
                             self.terminals)

    def __eq__(self, other):
        if not isinstance(other, HeadedGrammar):
            return NotImplemented
        return (self.start == other.start
                and set(self.rules) == set(other.rules)
                and self.lexicon == other.lexicon
                and self.chunks == other.chunks
                and self.nonterminals == other.nonterminals
                and self.terminals == other.terminals)

    __hash__ = None

    def __repr__(self):
        return '<HeadedGrammar start=%s: %d rules, %d words>' % (
            self.start, len(self.rules), len(self.lexicon))


def _parse_symbol(tok, lineno):
    if not _NAME.match(tok):
        raise GrammarError('bad symbol %r' % tok, lineno)
    return tok


def _parse_rhs(lhs, rhs, lineno):
    toks = rhs.split()
    if not toks:
        raise GrammarError('empty right-hand side for %s' % lhs, lineno)
    heads = [i for i, t in enumerate(toks) if t.endswith("'")]
    if not heads:
        raise GrammarError('missing head marker in rule for %s' % lhs, lineno)
    if len(heads) > 1:
        raise GrammarError('multiple head markers in rule for %s' % lhs,
                           lineno)
    h = heads[0]
    toks[h] = toks[h][:-1]
    toks = [_parse_symbol(t, lineno) for t in toks]
    return Rule(lhs, tuple(toks[:h]), toks[h], tuple(toks[h + 1:]))


def _statements(text):
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split('#', 1)[0]
        for stmt in line.split(';'):
            stmt = stmt.strip()
            if stmt:
                yield lineno, stmt


def parse_grammar(text, check=True):
    """Read the grammar DSL.

    With ``check`` the result must pass :func:`validate`; otherwise the
    grammar is returned as written and diagnostics are left to the caller.
    """
    start = None
    rules, seen_rules = [], set()
    lexicon = defaultdict(set)
    chunks = []
    declared_n, declared_t = set(), set()
    where = {}
    for lineno, stmt in _statements(text):
        if stmt.startswith('start ') or stmt == 'start':
            parts = stmt.split()
            if len(parts) != 2:
                raise GrammarError('start takes one category', lineno)
            start = _parse_symbol(parts[1], lineno)
        elif stmt.startswith('@chunk'):
            names = stmt.split()[1:]
            if not names:
                raise GrammarError('@chunk takes categories', lineno)
            chunks.extend(_parse_symbol(n, lineno) for n in names)
            for n in names:
                where.setdefault(n, lineno)
        elif stmt.startswith('nonterminals ') or stmt.startswith('terminals '):
            kind, *names = stmt.split()
            target = declared_n if kind == 'nonterminals' else declared_t
            for n in names:
                target.add(_parse_symbol(n, lineno))
                where.setdefault(n, lineno)
        elif '->' in stmt:
            lhs, _, rhs = stmt.partition('->')
            lhs = _parse_symbol(lhs.strip(), lineno)
            for alt in rhs.split('|'):
                rule = _parse_rhs(lhs, alt, lineno)
                if rule not in seen_rules:
                    seen_rules.add(rule)
                    rules.append(rule)
                for c in rule.rhs:
                    where.setdefault(c, lineno)
        elif ':' in stmt:
            word, _, tags = stmt.rpartition(':')
            word, tags = word.strip(), tags.split()
            if not word or ' ' in word:
                raise GrammarError('bad lexicon entry %r' % stmt, lineno)
            if not tags:
                raise GrammarError('word %r has no tags' % word, lineno)
            lexicon[word].update(_parse_symbol(t, lineno) for t in tags)
        else:
            raise GrammarError('cannot parse statement %r' % stmt, lineno)
    if start is None:
        raise GrammarError('missing start declaration')
    nonterminals = {r.lhs for r in rules} | declared_n
    terminals = set(declared_t)
    for tags in lexicon.values():
        terminals.update(tags)
    for r in rules:
        for c in r.rhs:
            if c not in nonterminals and c not in terminals:
                raise GrammarError('undeclared category %s' % c, where.get(c))
    for c in chunks:
        if c not in nonterminals:
            raise GrammarError('@chunk on unknown nonterminal %s' % c,
                               where.get(c))
    g = HeadedGrammar(start, rules, lexicon, chunks, nonterminals, terminals)
    g.source_lines = where     # first line mentioning each category
    if check:
        diags = validate(g)
        if diags:
            raise GrammarError('; '.join(map(str, diags)),
                               where.get(diags[0].symbol))
    return g


def dump_grammar(g):
    """Serialize to the DSL; ``parse_grammar(dump_grammar(g)) == g``."""
    lines = ['start %s;' % g.start]
    if g.chunks:
        lines.append('@chunk %s;' % ' '.join(sorted(g.chunks)))
    lhs = {r.lhs for r in g.rules}
    extra_n = sorted(g.nonterminals - lhs)
    if extra_n:
        lines.append('nonterminals %s;' % ' '.join(extra_n))
    tagged = set()
    for tags in g.lexicon.values():
        tagged |= tags
    extra_t = sorted(g.terminals - tagged)
    if extra_t:
        lines.append('terminals %s;' % ' '.join(extra_t))
    lines.extend('%s;' % r for r in g.rules)
    for w in sorted(g.lexicon):
        lines.append('%s : %s;' % (w, ' '.join(sorted(g.lexicon[w]))))
    return '\n'.join(lines) + '\n'


def validate(g):
    """Check the definitional conditions; returns a list of Diagnostics."""
    diags = []
    for c in sorted(g.nonterminals & g.terminals):
        diags.append(Diagnostic('i', c, 'category is both terminal and '
                                'nonterminal'))
    for w in sorted(g.lexicon):
        tags = g.lexicon[w]
        if not tags:
            diags.append(Diagnostic('iii', w, 'word has no terminal category'))
        for t in sorted(tags - g.terminals):
            diags.append(Diagnostic('iii', w, 'tag %s is not a terminal' % t))
    lhs = {r.lhs for r in g.rules}
    on_rhs = set()
    for r in g.rules:
        on_rhs.update(r.rhs)
        if r.lhs not in g.nonterminals:
            diags.append(Diagnostic('iv', r.lhs, 'rule left-hand side is not '
                                    'a nonterminal'))
        if r.head not in g.nonterminals and r.head not in g.terminals:
            diags.append(Diagnostic('iv', r.head, 'undeclared category'))
        for x in r.nonheads:
            if x not in g.nonterminals:
                diags.append(Diagnostic('iv', x, 'non-head daughter must be '
                                        'a nonterminal (in %s)' % r))
    for n in sorted(g.nonterminals - lhs):
        diags.append(Diagnostic('iv', n, 'nonterminal is not the left-hand '
                                'side of any rule'))
    for t in sorted(g.terminals - on_rhs):
        diags.append(Diagnostic('iv', t, 'terminal does not occur on the '
                                'right-hand side of any rule'))
    if g.start not in g.nonterminals:
        diags.append(Diagnostic('v', g.start, 'start symbol is not a '
                                'nonterminal'))
    return diags


def projection_closure(g):
    """Lexicalized nonterminals: all (word, category) with word heading it."""
    up = defaultdict(set)
    for r in g.rules:
        up[r.head].add(r.lhs)
    result = set()
    stack = []
    for w, tags in g.lexicon.items():
        for t in tags:
            for n in up.get(t, ()):
                stack.append((w, n))
    while stack:
        pair = stack.pop()
        if pair in result:
            continue
        result.add(pair)
        w, n = pair
        for m in up.get(n, ()):
            if (w, m) not in result:
                stack.append((w, m))
    return frozenset(result)


def state_entry_name(x):
    return 'ST_%s' % x


def state_pair_name(x, y):
    return 'ST_%s_%s' % (x, y)


def generate_state_rules(phrasal, start, existing=()):
    """Finite-state cover rules stringing phrasal categories together.

    ``start -> ST_X'`` enters the machine on phrasal X; ``ST_X -> X' |
    X' ST_X_Y`` and ``ST_X_Y -> Y' | Y' ST_Y_Z`` walk it.  The phrasal
    daughter is the head everywhere, so heads project along the spine.
    """
    phrasal = list(dict.fromkeys(phrasal))
    if not phrasal:
        raise GrammarError('state rules need at least one phrasal category')
    names = [state_entry_name(x) for x in phrasal]
    names += [state_pair_name(x, y) for x in phrasal for y in phrasal]
    clash = sorted(set(names) & set(existing))
    if clash:
        raise GrammarError('state category name collision: %s'
                           % ', '.join(clash))
    rules = []
    for x in phrasal:
        rules.append(Rule(start, (), state_entry_name(x), ()))
    for x in phrasal:
        entry = state_entry_name(x)
        rules.append(Rule(entry, (), x, ()))
        for y in phrasal:
            rules.append(Rule(entry, (), x, (state_pair_name(x, y),)))
    for x in phrasal:
        for y in phrasal:
            st = state_pair_name(x, y)
            rules.append(Rule(st, (), y, ()))
            for z in phrasal:
                rules.append(Rule(st, (), y, (state_pair_name(y, z),)))
    return rules


def add_state_rules(g, phrasal):
    """Return ``g`` extended with the state rules over ``phrasal``."""
    for x in phrasal:
        if x not in g.nonterminals:
            raise GrammarError('unknown phrasal category %s' % x)
    extra = generate_state_rules(phrasal, g.start, g.categories())
    return g.with_rules([r for r in extra if r not in set(g.rules)])
