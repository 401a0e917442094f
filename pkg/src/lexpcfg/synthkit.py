"""Synthetic corpora from a known model, random test grammars, and
brute-force oracles for expected counts."""
from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass
from itertools import accumulate

from .events import (EventCounts, LabeledTree, START, TOP, format_tree,
                     tree_events, tree_weight)
from .grammar import (HeadedGrammar, Rule, parse_grammar, projection_closure,
                      validate)
from .model import UNK, LexPCFG
from .parser import (Sentence, Token, count_trees, enumerate_trees,
                     format_sentence, parse)

__all__ = [
    'GeneratorSpec', 'GenerationError', 'generate', 'corpus_text',
    'trees_text', 'random_model', 'random_grammar', 'random_instance',
    'oracle_expected_counts', 'OracleGuardError', 'frames_grammar',
    'frames_model',
]


class GenerationError(RuntimeError):
    pass


class OracleGuardError(ValueError):
    pass


class _Reject(Exception):
    pass


@dataclass
class GeneratorSpec:
    grammar: HeadedGrammar
    model: LexPCFG
    n_sentences: int
    max_depth: int = 20
    seed: int = 0


class _Sampler:
    def __init__(self, rng):
        self.rng = rng
        self.cache = {}

    def draw(self, key, dist):
        table = self.cache.get(key)
        if table is None:
            items = [(k, p) for k, p in dist() if p > 0]
            if not items:
                raise _Reject()
            keys = [k for k, _ in items]
            cum = list(accumulate(p for _, p in items))
            table = self.cache[key] = (keys, cum)
        keys, cum = table
        i = bisect_right(cum, self.rng.random() * cum[-1])
        return keys[min(i, len(keys) - 1)]


def _sample_tree(model, sampler, max_depth):
    g = model.grammar
    order = g.rule_index

    def rules(w, cat):
        dist = model.rule_distribution(w, cat)
        return sorted(dist.items(), key=lambda kv: order[kv[0]])

    def heads(w, pc, x):
        dist = model.lexical_distribution(w, pc, x)
        dist.pop(UNK, None)
        return sorted(dist.items())

    def expand(w, cat, depth):
        if depth > max_depth:
            raise _Reject()
        rule = sampler.draw(('R', w, cat), lambda: rules(w, cat))
        kids = []
        for i, x in enumerate(rule.rhs):
            if i == rule.head_index:
                if x in g.terminals:
                    if x not in g.lexicon.get(w, ()):
                        raise _Reject()
                    kids.append(LabeledTree(x, w))
                else:
                    kids.append(expand(w, x, depth + 1))
            else:
                v = sampler.draw(('L', w, cat, x), lambda: heads(w, cat, x))
                kids.append(expand(v, x, depth + 1))
        return LabeledTree(cat, w, rule, tuple(kids))

    s = g.start
    v = sampler.draw(('L', TOP, START, s), lambda: heads(TOP, START, s))
    return expand(v, s, 0)


def generate(spec):
    """Sample sentences top-down; returns a list of (Sentence, tree).

    Derivations deeper than ``max_depth`` (or choosing a rule whose head the
    word cannot fill) are rejected and redrawn.
    """
    sampler = _Sampler(random.Random(spec.seed))
    out, attempts, rejected = [], 0, 0
    while len(out) < spec.n_sentences:
        attempts += 1
        try:
            tree = _sample_tree(spec.model, sampler, spec.max_depth)
        except (_Reject, RecursionError):
            rejected += 1
            if attempts >= 20 and rejected > attempts / 2:
                raise GenerationError(
                    'rejection rate %.0f%% over %d draws; use a model with '
                    'less recursive mass' % (100 * rejected / attempts,
                                             attempts)) from None
            continue
        sent = Sentence(Token(w, frozenset([t])) for w, t in tree.leaves())
        out.append((sent, tree))
    return out


def corpus_text(samples):
    return ''.join(format_sentence(s) + '\n' for s, _ in samples)


def trees_text(samples):
    return ''.join(format_tree(t) + '\n' for _, t in samples)


def _dirichlet(rng, n, alpha):
    xs = [rng.gammavariate(alpha, 1.0) for _ in range(n)]
    s = sum(xs)
    if s <= 0:
        return [1.0 / n] * n
    return [x / s for x in xs]


def random_model(grammar, rng, alpha=1.0, floor=1e-3):
    """A ground-truth model with Dirichlet-random explicit tables.

    Rule distributions only cover rules whose head the word can fill.
    """
    closure = projection_closure(grammar)
    can_head = set(closure)
    for w, tags in grammar.lexicon.items():
        can_head.update((w, t) for t in tags)
    rules, lexical = {}, {}
    for w, n in sorted(closure):
        rs = [r for r in grammar.rules_by_lhs.get(n, ())
              if (w, r.head) in can_head]
        if not rs:
            continue
        ps = _dirichlet(rng, len(rs), alpha)
        ps = [(p + floor) / (1 + floor * len(ps)) for p in ps]
        rules[(w, n)] = dict(zip(rs, ps))
        for x in sorted(grammar.nonhead_daughters.get(n, ())):
            vs = sorted(grammar.heads_of.get(x, ()))
            if vs:
                qs = _dirichlet(rng, len(vs), alpha)
                qs = [(q + floor) / (1 + floor * len(qs)) for q in qs]
                lexical[(w, n, x)] = dict(zip(vs, qs))
    vs = sorted(grammar.heads_of.get(grammar.start, ()))
    if vs:
        lexical[(TOP, START, grammar.start)] = dict(
            zip(vs, _dirichlet(rng, len(vs), alpha)))
    return LexPCFG.from_probabilities(grammar, rules, lexical)


def frames_model(grammar, rng, alpha=1.0, continue_prob=0.6):
    """Random truth for :func:`frames_grammar` with balanced verbs.

    Frame and argument choices are Dirichlet-random; clause heads are drawn
    uniformly, and a coordinated grammar adds another clause with
    probability ``continue_prob``.
    """
    base = random_model(grammar, rng, alpha)
    rules = {k: {r: math.exp(lp) for r, lp in d.items()}
             for k, d in base.rules.items()}
    lexical = {k: {v: math.exp(lp) for v, lp in d.items()}
               for k, (d, _) in base.lexical.items()}
    s = grammar.start
    for k in lexical:
        if k[2] == s:
            vs = sorted(lexical[k])
            lexical[k] = {v: 1.0 / len(vs) for v in vs}
    for (w, n), dist in rules.items():
        if n == s and len(dist) == 2:
            more = max(dist, key=lambda r: len(r.rhs))
            rules[(w, n)] = {r: continue_prob if r is more
                             else 1 - continue_prob for r in dist}
    return LexPCFG.from_probabilities(grammar, rules, lexical)


def random_grammar(rng, max_rules=10):
    """A small random headed grammar without unary cycles."""
    nts = ['S', 'A', 'B', 'C'][:rng.randint(2, 4)]
    ts = ['a', 'b'][:rng.randint(1, 2)]
    words = ['x', 'y', 'z'][:rng.randint(2, 3)]
    lexicon = {}
    for w in words:
        lexicon[w] = set(rng.sample(ts, rng.randint(1, len(ts))))
    for t in ts:
        if not any(t in tags for tags in lexicon.values()):
            lexicon[rng.choice(words)].add(t)
    rank = {c: i for i, c in enumerate(nts)}
    rules = []

    def make(lhs, head=None):
        k = rng.choice([1, 1, 2, 2, 3])
        if head is None:
            pool = ts + [c for c in nts if rank[c] > rank[lhs]] if k == 1 \
                else ts + nts
            if not pool:
                pool = ts
            head = rng.choice(pool)
        elif k == 1 and head in rank and rank[head] <= rank[lhs]:
            k = 2
        others = [rng.choice(nts) for _ in range(k - 1)]
        h = rng.randint(0, k - 1)
        r = Rule(lhs, tuple(others[:h]), head, tuple(others[h:]))
        if r not in rules:
            rules.append(r)

    for c in nts:
        make(c, rng.choice(ts))
    for t in ts:
        if not any(t in r.rhs for r in rules):
            make(rng.choice(nts), t)
    while len(rules) < max_rules and rng.random() < 0.8:
        make(rng.choice(nts))
    g = HeadedGrammar('S', rules[:max_rules], lexicon)
    if validate(g) or g.unary_cycle() is not None:
        return random_grammar(rng, max_rules)
    return g


def random_instance(rng, max_rules=10, max_tokens=6, tries=200,
                    max_trees=None):
    """A random grammar with a parsable sentence (tags may be ambiguous).

    ``max_trees`` skips sentences with more analyses than that, keeping
    enumeration oracles fast.
    """
    while True:
        g = random_grammar(rng, max_rules)
        words = sorted(g.lexicon)
        for _ in range(tries):
            n = rng.randint(1, max_tokens)
            sent = Sentence(Token(w, g.lexicon[w])
                            for w in (rng.choice(words) for _ in range(n)))
            forest = parse(sent, g)
            if forest is None:
                continue
            if max_trees is not None and count_trees(forest) > max_trees:
                continue
            return g, sent, forest


def oracle_expected_counts(sentence, grammar, model, max_tokens=8,
                           max_rules=12):
    """Expected event counts by enumerating every tree of the sentence."""
    if len(sentence) > max_tokens or len(grammar.rules) > max_rules:
        raise OracleGuardError('oracle limited to %d tokens and %d rules'
                               % (max_tokens, max_rules))
    forest = parse(sentence, grammar)
    if forest is None:
        raise ValueError('sentence does not parse')
    weighted = []
    for t in enumerate_trees(forest):
        ev = tree_events(t, grammar)
        weighted.append((ev, tree_weight(ev, model).prob))
    z = math.fsum(w for _, w in weighted)
    if z <= 0:
        raise ValueError('sentence has zero probability')
    out = EventCounts()
    for ev, w in weighted:
        for k, n in ev.items():
            out.add(k, n * w / z)
    return out


FRAMES_GRAMMAR = """\
# subject + verb phrase with complement frames
start S;
S -> NP VP';
VP -> V';
VP -> V' NP;
VP -> V' PP;
VP -> V' NP PP;
VP -> V' NP NP;
NP -> N';
PP -> P' NP;
"""


def frames_grammar(n_verbs=6, n_nouns=8, n_preps=3, attach_pp=True,
                   coordinate=False):
    """Verb-frame grammar used for recovery experiments.

    With ``attach_pp`` nouns may take a PP too, which makes PP attachment
    ambiguous; without it every tagged sentence has one analysis.
    ``coordinate`` adds ``S -> NP VP' CONJ S`` so a sentence can hold several
    clauses joined by the conjunction ``and``.
    """
    lines = [FRAMES_GRAMMAR]
    if attach_pp:
        lines.append("NP -> N' PP;")
    if coordinate:
        lines.append("S -> NP VP' CONJ S;")
        lines.append("CONJ -> C';")
        lines.append('and : C;')
    lines += ['v%d : V;' % i for i in range(n_verbs)]
    lines += ['n%d : N;' % i for i in range(n_nouns)]
    lines += ['p%d : P;' % i for i in range(n_preps)]
    return parse_grammar('\n'.join(lines))
