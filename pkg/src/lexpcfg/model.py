"""Head-lexicalized PCFG parameters, smoothing configuration, model files."""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

from .events import RuleEvent, START, TOP
from .grammar import GrammarError, Rule, dump_grammar, parse_grammar

__all__ = ['UNK', 'SmoothingConfig', 'LexPCFG', 'ModelFormatError',
           'save_model', 'load_model', 'dumps_model', 'loads_model',
           'MODEL_HEADER']

UNK = '<unk>'
MODEL_HEADER = 'lexpcfg-model v1'
NEG_INF = -math.inf


def _log(p):
    return math.log(p) if p > 0 else NEG_INF


@dataclass(frozen=True)
class SmoothingConfig:
    """Back-off and discounting settings.

    ``bucket_bounds`` are the four thresholds splitting word-category pair
    frequencies into five buckets; ``lambdas`` the weight on the lexicalized
    estimate in each bucket.  ``discount`` None means estimate it from the
    count-of-counts at each M step.
    """
    bucket_bounds: tuple = (1.0, 5.0, 25.0, 125.0)
    lambdas: tuple = (0.0, 0.3, 0.6, 0.8, 0.95)
    discount: float | None = None
    lexical_backoff: str = 'unigram'
    backbone_floor: float = 1e-3

    def __post_init__(self):
        b = tuple(float(x) for x in self.bucket_bounds)
        lam = tuple(float(x) for x in self.lambdas)
        if len(b) != 4 or any(x >= y for x, y in zip(b, b[1:])) or b[0] <= 0:
            raise ValueError('need 4 ascending positive bucket bounds')
        if len(lam) != 5 or any(not 0 <= x <= 1 for x in lam):
            raise ValueError('need 5 lambdas in [0, 1]')
        if any(x > y for x, y in zip(lam, lam[1:])):
            raise ValueError('lambdas must be nondecreasing with frequency')
        if self.discount is not None and not 0 <= self.discount < 1:
            raise ValueError('discount must lie in [0, 1)')
        if self.lexical_backoff != 'unigram':
            raise ValueError('unknown lexical back-off mode %r'
                             % self.lexical_backoff)
        if self.backbone_floor < 0:
            raise ValueError('backbone_floor must be nonnegative')
        object.__setattr__(self, 'bucket_bounds', b)
        object.__setattr__(self, 'lambdas', lam)

    def bucket(self, freq):
        return bisect_right(self.bucket_bounds, freq)

    def weight(self, freq):
        return self.lambdas[self.bucket(freq)]


class LexPCFG:
    """Parameter tables of a head-lexicalized PCFG.

    All probabilities are held as natural logs; that is also what the model
    file stores, so save/load is bit exact.

    rules       (w, lhs) -> {Rule: logp}, full smoothed distribution
    lexical     (w, parent_cat, child_cat) -> ({v: logp}, log_backoff_weight)
    rule_backbone   lhs -> {Rule: logp}
    lex_backbone    (parent_cat, child_cat) -> ({v: logp}, log_backoff_weight)
    pair_freq   (w, cat) -> expected count of cat headed by w

    Missing lexicalized contexts fall through to the backbones; the lexical
    backbone falls through to an add-one unigram over the words that can head
    the child category, with mass reserved for unknown words.
    """

    def __init__(self, grammar, smoothing=None, rules=None, lexical=None,
                 rule_backbone=None, lex_backbone=None, pair_freq=None,
                 discount=None):
        self.grammar = grammar
        self.smoothing = smoothing or SmoothingConfig()
        self.rules = rules or {}
        self.lexical = lexical or {}
        if rule_backbone is None:
            rule_backbone = {}
            for lhs, rs in grammar.rules_by_lhs.items():
                lp = -math.log(len(rs))
                rule_backbone[lhs] = {r: lp for r in rs}
        self.rule_backbone = rule_backbone
        self.lex_backbone = lex_backbone or {}
        self.pair_freq = pair_freq or {}
        # discount actually used by the last M step (reporting only)
        self.discount = discount
        self._memo = {}
        self._unigram_cache = {}

    @classmethod
    def from_probabilities(cls, grammar, rules=None, lexical=None,
                           rule_backbone=None, lex_backbone=None,
                           pair_freq=None, smoothing=None):
        """Build a model from explicit probability tables (no back-off mass)."""
        def logs(d):
            return {k: _log(v) for k, v in d.items()}
        rb = None
        if rule_backbone is not None:
            rb = {k: logs(v) for k, v in rule_backbone.items()}
        return cls(
            grammar, smoothing,
            rules={k: logs(v) for k, v in (rules or {}).items()},
            lexical={k: (logs(v), NEG_INF)
                     for k, v in (lexical or {}).items()},
            rule_backbone=rb,
            lex_backbone={k: (logs(v), NEG_INF)
                          for k, v in (lex_backbone or {}).items()},
            pair_freq=dict(pair_freq or {}))

    # -- lookups -----------------------------------------------------------

    def vocabulary(self, cat):
        """Words that may head ``cat`` (sorted), not counting UNK."""
        got = self._unigram_cache.get(cat)
        if got is None:
            words = set(self.grammar.heads_of.get(cat, ()))
            words.update(w for (w, c) in self.pair_freq if c == cat)
            words = tuple(sorted(words))
            total = math.fsum(self.pair_freq.get((w, cat), 0.0)
                              for w in words)
            got = (words, frozenset(words), total + len(words) + 1.0)
            self._unigram_cache[cat] = got
        return got[0]

    def unigram_prob(self, v, cat):
        self.vocabulary(cat)
        _, members, denom = self._unigram_cache[cat]
        if v in members:
            return (self.pair_freq.get((v, cat), 0.0) + 1.0) / denom
        return 1.0 / denom

    def lex_backbone_prob(self, parent_cat, child_cat, v):
        entry = self.lex_backbone.get((parent_cat, child_cat))
        if entry is None:
            return self.unigram_prob(v, child_cat)
        seen, lbow = entry
        lp = seen.get(v)
        if lp is not None:
            return math.exp(lp)
        if lbow == NEG_INF:
            return 0.0
        return math.exp(lbow) * self.unigram_prob(v, child_cat)

    def lex_prob(self, w, parent_cat, child_cat, v):
        entry = self.lexical.get((w, parent_cat, child_cat))
        if entry is None:
            return self.lex_backbone_prob(parent_cat, child_cat, v)
        seen, lbow = entry
        lp = seen.get(v)
        if lp is not None:
            return math.exp(lp)
        if lbow == NEG_INF:
            return 0.0
        return math.exp(lbow) * self.lex_backbone_prob(parent_cat, child_cat,
                                                        v)

    def rule_logprob(self, w, lhs, rule):
        dist = self.rules.get((w, lhs))
        if dist is None:
            dist = self.rule_backbone.get(lhs, {})
        return dist.get(rule, NEG_INF)

    def lex_logprob(self, w, parent_cat, child_cat, v):
        return _log(self.lex_prob(w, parent_cat, child_cat, v))

    def root_logprob(self, v):
        return self.lex_logprob(TOP, START, self.grammar.start, v)

    def logprob(self, event):
        lp = self._memo.get(event)
        if lp is None:
            if isinstance(event, RuleEvent):
                lp = self.rule_logprob(event.head, event.rule.lhs, event.rule)
            else:
                lp = self.lex_logprob(*event)
            self._memo[event] = lp
        return lp

    def prob(self, event):
        return math.exp(self.logprob(event))

    # -- whole distributions ------------------------------------------------

    def rule_distribution(self, w, lhs):
        return {r: math.exp(self.rule_logprob(w, lhs, r))
                for r in self.grammar.rules_by_lhs.get(lhs, ())}

    def lexical_distribution(self, w, parent_cat, child_cat):
        """Distribution over the child's vocabulary plus UNK."""
        out = {v: self.lex_prob(w, parent_cat, child_cat, v)
               for v in self.vocabulary(child_cat)}
        out[UNK] = self.lex_prob(w, parent_cat, child_cat, UNK)
        return out

    def lexical_nonterminals(self):
        """The lexicalized nonterminals, including words seen in training."""
        pairs = set()
        for n in self.grammar.nonterminals:
            for w in self.vocabulary(n):
                pairs.add((w, n))
        return pairs

    def conditional_contexts(self):
        """Every conditioning context with its distribution, for checks."""
        g = self.grammar
        for w, n in sorted(self.lexical_nonterminals()):
            yield ('rule', w, n), self.rule_distribution(w, n)
        for lhs in sorted(g.rules_by_lhs):
            bb = self.rule_backbone.get(lhs, {})
            yield ('rule-backbone', lhs), {r: math.exp(lp)
                                          for r, lp in bb.items()}
        for w, n in sorted(self.lexical_nonterminals()):
            for x in sorted(g.nonhead_daughters.get(n, ())):
                yield ('lex', w, n, x), self.lexical_distribution(w, n, x)
        yield (('lex', TOP, START, g.start),
               self.lexical_distribution(TOP, START, g.start))

    def __eq__(self, other):
        if not isinstance(other, LexPCFG):
            return NotImplemented
        return (self.grammar == other.grammar
                and self.smoothing == other.smoothing
                and self.rules == other.rules
                and self.lexical == other.lexical
                and self.rule_backbone == other.rule_backbone
                and self.lex_backbone == other.lex_backbone
                and self.pair_freq == other.pair_freq)

    __hash__ = None

    def __repr__(self):
        return '<LexPCFG %d rule contexts, %d lexical contexts>' % (
            len(self.rules), len(self.lexical))


# -- persistence -------------------------------------------------------------

class ModelFormatError(ValueError):
    pass


def _f(x):
    return '%.17g' % x


def _rule_tokens(rule):
    return list(rule.left) + ["'", rule.head] + list(rule.right)


def _read_rule(lhs, toks):
    try:
        i = toks.index("'")
        return Rule(lhs, tuple(toks[:i]), toks[i + 1], tuple(toks[i + 2:]))
    except (ValueError, IndexError):
        raise ModelFormatError('bad rule tokens %r' % (toks,)) from None


def dumps_model(model):
    g = model.grammar
    order = g.rule_index
    lines = [MODEL_HEADER]
    lines.extend('G ' + ln for ln in dump_grammar(g).splitlines())
    s = model.smoothing
    disc = 'auto' if s.discount is None else _f(s.discount)
    lines.append('SMOOTH %s %s %s %s %s' % (
        ','.join(map(_f, s.bucket_bounds)), ','.join(map(_f, s.lambdas)),
        disc, s.lexical_backoff, _f(s.backbone_floor)))
    if model.discount is not None:
        lines.append('D %s' % _f(model.discount))

    def rule_key(r):
        return order.get(r, len(order))

    for lhs in sorted(model.rule_backbone):
        dist = model.rule_backbone[lhs]
        for r in sorted(dist, key=rule_key):
            lines.append(' '.join(['UR', lhs] + _rule_tokens(r)
                                  + [_f(dist[r])]))
    for (w, lhs) in sorted(model.rules):
        dist = model.rules[(w, lhs)]
        for r in sorted(dist, key=rule_key):
            lines.append(' '.join(['R', w, lhs] + _rule_tokens(r)
                                  + [_f(dist[r])]))
    for (pc, x) in sorted(model.lex_backbone):
        seen, lbow = model.lex_backbone[(pc, x)]
        lines.append('ULB %s %s %s' % (pc, x, _f(lbow)))
        for v in sorted(seen):
            lines.append('UL %s %s %s %s' % (pc, x, v, _f(seen[v])))
    for (w, pc, x) in sorted(model.lexical):
        seen, lbow = model.lexical[(w, pc, x)]
        lines.append('LB %s %s %s %s' % (w, pc, x, _f(lbow)))
        for v in sorted(seen):
            lines.append('L %s %s %s %s %s' % (w, pc, x, v, _f(seen[v])))
    for (w, c) in sorted(model.pair_freq):
        lines.append('F %s %s %s' % (w, c, _f(model.pair_freq[(w, c)])))
    lines.append('END %d' % (len(lines) - 1))
    return '\n'.join(lines) + '\n'


def loads_model(text):
    lines = text.split('\n')
    if lines and lines[-1] == '':
        lines.pop()
    if not lines or lines[0].strip() != MODEL_HEADER:
        found = lines[0].strip() if lines else ''
        raise ModelFormatError('expected header %r, found %r'
                               % (MODEL_HEADER, found))
    if not lines[-1].startswith('END '):
        raise ModelFormatError('model file is truncated (no END record)')
    try:
        expected = int(lines[-1].split()[1])
    except (IndexError, ValueError):
        raise ModelFormatError('bad END record') from None
    body = lines[1:-1]
    if expected != len(body):
        raise ModelFormatError('model file has %d records, END says %d'
                               % (len(body), expected))
    gram_lines, smooth, discount = [], None, None
    rules, lexical, rb, lb, pf = {}, {}, {}, {}, {}
    for lineno, line in enumerate(body, 2):
        kind, _, rest = line.partition(' ')
        try:
            if kind == 'G':
                gram_lines.append(rest)
                continue
            t = rest.split()
            if kind == 'SMOOTH':
                bounds = tuple(float(x) for x in t[0].split(','))
                lams = tuple(float(x) for x in t[1].split(','))
                d = None if t[2] == 'auto' else float(t[2])
                smooth = SmoothingConfig(bounds, lams, d, t[3], float(t[4]))
            elif kind == 'D':
                discount = float(t[0])
            elif kind == 'UR':
                rb.setdefault(t[0], {})[_read_rule(t[0], t[1:-1])] = \
                    float(t[-1])
            elif kind == 'R':
                rules.setdefault((t[0], t[1]), {})[
                    _read_rule(t[1], t[2:-1])] = float(t[-1])
            elif kind == 'ULB':
                lb[(t[0], t[1])] = ({}, float(t[2]))
            elif kind == 'UL':
                lb[(t[0], t[1])][0][t[2]] = float(t[3])
            elif kind == 'LB':
                lexical[(t[0], t[1], t[2])] = ({}, float(t[3]))
            elif kind == 'L':
                lexical[(t[0], t[1], t[2])][0][t[3]] = float(t[4])
            elif kind == 'F':
                pf[(t[0], t[1])] = float(t[2])
            else:
                raise ModelFormatError('unknown record type %r' % kind)
        except ModelFormatError as e:
            raise ModelFormatError('line %d: %s' % (lineno, e)) from None
        except (IndexError, ValueError, KeyError) as e:
            raise ModelFormatError('line %d: malformed %s record (%s)'
                                   % (lineno, kind, e)) from None
    if smooth is None:
        raise ModelFormatError('missing SMOOTH record')
    try:
        grammar = parse_grammar('\n'.join(gram_lines))
    except GrammarError as e:
        raise ModelFormatError('embedded grammar: %s' % e) from None
    known = grammar.rule_index
    for table in [rb] + [{k: v} for k, v in rules.items()]:
        for dist in table.values():
            for r in dist:
                if r not in known:
                    raise ModelFormatError('rule %s is not in the embedded '
                                           'grammar' % r)
    return LexPCFG(grammar, smooth, rules, lexical, rb or None, lb, pf,
                   discount)


def save_model(model, path):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(dumps_model(model))


def load_model(path):
    with open(path, encoding='utf-8') as f:
        return loads_model(f.read())
