"""Inside-outside expected counts, the smoothed M step, and EM training."""
from __future__ import annotations

import logging
import math
import random
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .events import EventCounts, LexEvent, RuleEvent, START, TOP
from .model import NEG_INF, LexPCFG, SmoothingConfig
from .parser import lexicalize_forest, parse

__all__ = [
    'EstimationError', 'TrainConfig', 'CompiledForest', 'compile_forest',
    'inside_outside', 'inside_scores', 'corpus_log_likelihood',
    'absolute_discount', 'estimate_discount', 'm_step',
    'fit_smoothing_weights', 'heldout_observations', 'initial_model',
    'train', 'segments',
]

log = logging.getLogger(__name__)


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    segment_size: int = 100_000
    bootstrap: bool = True
    heldout_fraction: float = 0.0
    iterations: int = 1
    fit_lambdas: bool = True
    drop_threshold: float = 1e-12
    open_lexicon: bool = True
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.segment_size < 1:
            raise ValueError('segment_size must be at least 1')
        if not 0 <= self.heldout_fraction <= 0.5:
            raise ValueError('heldout_fraction must lie in [0, 0.5]')
        if self.iterations < 0:
            raise ValueError('iterations must be nonnegative')
        if self.iterations == 0 and not self.bootstrap:
            raise ValueError('nothing to do: no bootstrap and no iterations')
        if self.workers < 1:
            raise ValueError('workers must be at least 1')


def _logaddexp(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


class CompiledForest:
    """A lexicalized forest flattened into index arrays.

    Items are numbered children-first.  Each and-node is
    ``(parent, children, events)`` with ``events[0]`` its rule event and the
    rest the lexical-choice events of its non-head daughters.  ``roots`` pairs
    root item indices with their root lexical-choice event.
    """
    __slots__ = ('n_items', 'andnodes', 'roots', 'ntokens', 'items')

    def __init__(self, n_items, andnodes, roots, ntokens, items=None):
        self.n_items = n_items
        self.andnodes = andnodes
        self.roots = roots
        self.ntokens = ntokens
        self.items = items


def compile_forest(forest, keep_items=False):
    lf = lexicalize_forest(forest)
    index = {it: i for i, it in enumerate(lf.order)}
    words = [t.word for t in lf.sentence]
    andnodes = []
    for it in lf.order:
        p = index[it]
        w = words[it.head]
        for a in lf.nodes[it]:
            rule = a.rule
            evs = [RuleEvent(w, rule)]
            for k, c in enumerate(a.children):
                if k != rule.head_index:
                    evs.append(LexEvent(w, it.cat, c.cat, words[c.head]))
            andnodes.append((p, tuple(index[c] for c in a.children),
                             tuple(evs)))
    start = lf.grammar.start
    roots = [(index[r], LexEvent(TOP, START, start, words[r.head]))
             for r in lf.roots]
    return CompiledForest(len(lf.order), andnodes, roots, len(words),
                          lf.order if keep_items else None)


def _as_compiled(f):
    return f if isinstance(f, CompiledForest) else compile_forest(f)


def inside_scores(cf, model):
    """Log inside scores, and-node log weights, and the log sentence weight."""
    lp = model.logprob
    inside = [0.0] * cf.n_items
    for p, _, _ in cf.andnodes:
        inside[p] = NEG_INF
    weights = []
    for p, kids, evs in cf.andnodes:
        w = 0.0
        for e in evs:
            w += lp(e)
        weights.append(w)
        s = w
        for k in kids:
            s += inside[k]
        if s != NEG_INF:
            inside[p] = _logaddexp(inside[p], s)
    z = NEG_INF
    for r, ev in cf.roots:
        z = _logaddexp(z, lp(ev) + inside[r])
    return inside, weights, z


def inside_outside(forest, model, drop_threshold=0.0):
    """Expected event counts for one sentence and its log inside weight.

    Returns ``(counts, log_inside)``; counts below ``drop_threshold`` are
    discarded.
    """
    cf = _as_compiled(forest)
    inside, weights, z = inside_scores(cf, model)
    if z == NEG_INF:
        raise EstimationError('sentence has zero probability under the model')
    lp = model.logprob
    outside = [NEG_INF] * cf.n_items
    counts = EventCounts()
    for r, ev in cf.roots:
        o = lp(ev)
        outside[r] = _logaddexp(outside[r], o)
        post = math.exp(o + inside[r] - z)
        if post > drop_threshold:
            counts.add(ev, post)
    exp = math.exp
    for a in range(len(cf.andnodes) - 1, -1, -1):
        p, kids, evs = cf.andnodes[a]
        op = outside[p]
        if op == NEG_INF:
            continue
        tot = op + weights[a]
        for k in kids:
            tot += inside[k]
        if tot == NEG_INF:
            continue
        post = exp(tot - z)
        if post > drop_threshold:
            for e in evs:
                counts[e] = counts.get(e, 0.0) + post
        for k in kids:
            outside[k] = _logaddexp(outside[k], tot - inside[k])
    return counts, z


def corpus_log_likelihood(forests, model):
    """Sum of log sentence weights (natural log)."""
    total = 0.0
    for f in forests:
        _, _, z = inside_scores(_as_compiled(f), model)
        if z == NEG_INF:
            raise EstimationError('a sentence has zero probability')
        total += z
    return total


# -- M step ------------------------------------------------------------------

def _discount_part(counts, d):
    """Discounted masses and the freed back-off weight, both / N."""
    n = math.fsum(counts.values())
    if n <= 0:
        raise EstimationError('cannot discount an empty count table')
    seen = {v: max(c - d, 0.0) / n for v, c in counts.items()}
    bow = math.fsum(min(c, d) for c in counts.values()) / n
    return seen, bow


def absolute_discount(counts, backoff, d):
    """Absolute discounting of ``counts`` against ``backoff``.

    ``p(v) = max(c(v) - d, 0) / N + bow * backoff(v)`` where the back-off
    weight ``bow = sum_v min(c(v), d) / N`` (which is ``d * n+ / N`` when no
    count is below ``d``).  ``backoff`` is a mapping over a superset of the
    counted outcomes.
    """
    if not 0 <= d < 1:
        raise ValueError('discount must lie in [0, 1)')
    seen, bow = _discount_part(counts, d)
    out = {v: bow * q for v, q in backoff.items()}
    for v, s in seen.items():
        out[v] = out.get(v, 0.0) + s
    return out


def estimate_discount(counts):
    """``n1 / (n1 + 2 n2)`` over (rounded) count-of-counts, kept in [.05, .95]."""
    n1 = n2 = 0
    for c in counts:
        r = round(c)
        if r <= 1 and c > 0:
            n1 += 1
        elif r == 2:
            n2 += 1
    if n1 + n2 == 0:
        return 0.5
    return min(max(n1 / (n1 + 2 * n2), 0.05), 0.95)


def _split_counts(total):
    rule_c = defaultdict(dict)      # (w, lhs) -> {rule: c}
    lex_c = defaultdict(dict)       # (w, pc, x) -> {v: c}
    for ev, c in total.items():
        if c <= 0:
            continue
        if isinstance(ev, RuleEvent):
            key = (ev.head, ev.rule.lhs)
            d = rule_c[key]
            d[ev.rule] = d.get(ev.rule, 0.0) + c
        else:
            key = (ev.parent_head, ev.parent_cat, ev.child_cat)
            d = lex_c[key]
            d[ev.child_head] = d.get(ev.child_head, 0.0) + c
    return rule_c, lex_c


def _rule_backbone(grammar, rule_c, floor, prev):
    marg = defaultdict(lambda: defaultdict(float))
    for (w, lhs), dist in rule_c.items():
        for r, c in dist.items():
            marg[lhs][r] += c
    backbone = {}
    for lhs, rs in grammar.rules_by_lhs.items():
        m = marg.get(lhs)
        if not m:
            if prev is not None and lhs in prev.rule_backbone:
                backbone[lhs] = dict(prev.rule_backbone[lhs])
            else:
                backbone[lhs] = {r: -math.log(len(rs)) for r in rs}
            continue
        denom = math.fsum(m.values()) + floor * len(rs)
        backbone[lhs] = {r: math.log((m.get(r, 0.0) + floor) / denom)
                         if m.get(r, 0.0) + floor > 0 else NEG_INF
                         for r in rs}
    return backbone


def _log(p):
    return math.log(p) if p > 0 else NEG_INF


def m_step(total, prev, cfg=None):
    """Re-estimate parameters from pooled expected counts.

    Rule distributions for a lexicalized nonterminal mix the lexicalized
    relative frequencies with the unlexicalized backbone, weighted by the
    bucket of the pair's frequency.  Lexical-choice distributions are
    absolutely discounted against the unlexicalized lexical backbone, which
    is itself discounted against a unigram over possible heads.
    """
    cfg = cfg or prev.smoothing
    if not total:
        raise EstimationError('m_step needs nonempty counts')
    g = prev.grammar
    rule_c, lex_c = _split_counts(total)

    pair_freq = {}
    for (w, lhs), dist in rule_c.items():
        pair_freq[(w, lhs)] = math.fsum(dist.values())
    for (w, pc, x), dist in lex_c.items():
        for v in dist:
            pair_freq.setdefault((v, x), 0.0)

    d = cfg.discount
    if d is None:
        d = estimate_discount(c for dist in lex_c.values()
                              for c in dist.values())

    backbone = _rule_backbone(g, rule_c, cfg.backbone_floor, prev)
    model = LexPCFG(g, cfg, rule_backbone=backbone, pair_freq=pair_freq,
                    discount=d)

    marg = defaultdict(lambda: defaultdict(float))
    for (w, pc, x), dist in lex_c.items():
        for v, c in dist.items():
            marg[(pc, x)][v] += c
    lex_backbone = {}
    for key in sorted(marg):
        pc, x = key
        seen, bow = _discount_part(marg[key], d)
        full = {v: _log(s + bow * model.unigram_prob(v, x))
                for v, s in seen.items()}
        lex_backbone[key] = (full, _log(bow))
    model.lex_backbone = lex_backbone

    lexical = {}
    for key in sorted(lex_c):
        w, pc, x = key
        seen, bow = _discount_part(lex_c[key], d)
        full = {v: _log(s + bow * model.lex_backbone_prob(pc, x, v))
                for v, s in seen.items()}
        lexical[key] = (full, _log(bow))
    model.lexical = lexical

    rules = {}
    for key in sorted(rule_c):
        w, lhs = key
        dist = rule_c[key]
        freq = pair_freq[key]
        if freq <= 0:
            continue
        lam = cfg.weight(freq)
        bb = backbone[lhs]
        out = {}
        for r in g.rules_by_lhs[lhs]:
            p = lam * dist.get(r, 0.0) / freq
            if lam < 1:
                p += (1 - lam) * math.exp(bb[r])
            out[r] = _log(p)
        rules[key] = out
    model.rules = rules
    model._memo.clear()
    return model


# -- smoothing weights ---------------------------------------------------------

def fit_smoothing_weights(observations, defaults=(0.0, 0.3, 0.6, 0.8, 0.95),
                          tol=1e-6, max_iter=10_000):
    """Deleted-interpolation EM for the five bucket weights.

    ``observations`` maps bucket -> iterable of ``(count, p_lex, p_backoff)``
    for held-out events.  Buckets without held-out mass keep their default.
    The result is made nondecreasing by pooling adjacent violators.
    """
    lambdas, mass = list(defaults), [0.0] * 5
    for b in range(5):
        obs = [(c, pl, pb) for c, pl, pb in observations.get(b, ())
               if c > 0 and (pl > 0 or pb > 0)]
        n = math.fsum(c for c, _, _ in obs)
        if n <= 0:
            continue
        lam = 0.5
        for _ in range(max_iter):
            acc = 0.0
            for c, pl, pb in obs:
                num = lam * pl
                acc += c * num / (num + (1 - lam) * pb)
            new = acc / n
            done = abs(new - lam) < tol
            lam = new
            if done:
                break
        lambdas[b], mass[b] = lam, n
    return _pool_adjacent(lambdas, [m if m > 0 else 1e-9 for m in mass])


def _pool_adjacent(values, weights):
    blocks = []
    for v, w in zip(values, weights):
        blocks.append([v * w, w, 1])
        while len(blocks) > 1 and (blocks[-2][0] / blocks[-2][1]
                                   > blocks[-1][0] / blocks[-1][1]):
            s, w2, k = blocks.pop()
            blocks[-1][0] += s
            blocks[-1][1] += w2
            blocks[-1][2] += k
    out = []
    for s, w, k in blocks:
        out.extend([min(max(s / w, 0.0), 1.0)] * k)
    return tuple(out)


def heldout_observations(train_total, heldout_counts, cfg, grammar,
                         floor=None):
    """Group held-out rule events by bucket with both component estimates."""
    rule_c, _ = _split_counts(train_total)
    floor = cfg.backbone_floor if floor is None else floor
    backbone = _rule_backbone(grammar, rule_c, floor, None)
    freq = {k: math.fsum(v.values()) for k, v in rule_c.items()}
    obs = defaultdict(list)
    for ev, c in heldout_counts.items():
        if not isinstance(ev, RuleEvent):
            continue
        key = (ev.head, ev.rule.lhs)
        f = freq.get(key, 0.0)
        p_lex = rule_c[key].get(ev.rule, 0.0) / f if f > 0 else 0.0
        p_bb = math.exp(backbone[ev.rule.lhs][ev.rule])
        obs[cfg.bucket(f)].append((c, p_lex, p_bb))
    return obs


# -- training driver -------------------------------------------------------------

def initial_model(grammar, corpus, smoothing=None):
    """Uniform rule backbone; lexical back-off from word-category frequencies."""
    counts = defaultdict(float)
    for sent in corpus:
        for tok in sent:
            known = grammar.lexicon.get(tok.word)
            tags = tok.tags & (known if known is not None
                               else grammar.terminals)
            for t in tags:
                counts[(tok.word, t)] += 1.0 / len(tags)
    pair_freq = defaultdict(float)
    proj = grammar.projections
    for (w, t), c in counts.items():
        for n in proj.get(t, ()):
            pair_freq[(w, n)] += c
    return LexPCFG(grammar, smoothing or SmoothingConfig(),
                   pair_freq=dict(pair_freq))


def segments(sentences, size):
    """Split into contiguous runs of at least ``size`` tokens (last may be short)."""
    out, cur, n = [], [], 0
    for s in sentences:
        cur.append(s)
        n += len(s)
        if n >= size:
            out.append(cur)
            cur, n = [], 0
    if cur:
        out.append(cur)
    return out


def _estep_chunk(args):
    forests, model, drop = args
    counts, ll = EventCounts(), 0.0
    for cf in forests:
        c, z = inside_outside(cf, model, drop)
        counts.merge(c)
        ll += z
    return counts, ll


def expected_counts(forests, model, workers=1, drop_threshold=1e-12):
    """Pooled expected counts and log likelihood over compiled forests."""
    if workers <= 1 or len(forests) < 2 * workers:
        return _estep_chunk((forests, model, drop_threshold))
    size = -(-len(forests) // workers)
    chunks = [(forests[i:i + size], model, drop_threshold)
              for i in range(0, len(forests), size)]
    total, ll = EventCounts(), 0.0
    with ProcessPoolExecutor(max_workers=workers) as ex:
        for c, z in ex.map(_estep_chunk, chunks):
            total.merge(c)
            ll += z
    return total, ll


def _parse_all(sentences, grammar, cfg):
    out, skipped = [], 0
    for s in sentences:
        f = parse(s, grammar, open_lexicon=cfg.open_lexicon)
        if f is None:
            skipped += 1
            continue
        out.append(compile_forest(f))
    return out, skipped


def train(corpus, grammar, cfg=None, smoothing=None, telemetry=None):
    """Bootstrap plus incremental EM over contiguous corpus segments.

    A bootstrap pass collects lexicalized counts under the unlexicalized
    starting model.  Each later segment replaces its own share of the pooled
    counts with fresh expectations under the current model, and the model is
    re-estimated from the pool.  One segment covering the corpus gives
    classical EM.  Rows of per-segment telemetry are appended to
    ``telemetry`` when a list is passed.
    """
    cfg = cfg or TrainConfig()
    smoothing = smoothing or SmoothingConfig()
    sentences = list(corpus)
    if not sentences:
        raise EstimationError('empty corpus')
    heldout = []
    if cfg.heldout_fraction > 0:
        rng = random.Random(cfg.seed)
        k = int(round(cfg.heldout_fraction * len(sentences)))
        picked = set(rng.sample(range(len(sentences)), k))
        heldout = [s for i, s in enumerate(sentences) if i in picked]
        sentences = [s for i, s in enumerate(sentences) if i not in picked]

    segs = []
    total_skipped = 0
    for seg in segments(sentences, cfg.segment_size):
        forests, skipped = _parse_all(seg, grammar, cfg)
        total_skipped += skipped
        segs.append((forests, skipped, sum(len(s) for s in seg), len(seg)))
    if not any(f for f, _, _, _ in segs):
        raise EstimationError('no sentence of the corpus could be parsed')
    held_forests, _ = _parse_all(heldout, grammar, cfg)
    log.info('parsed %d sentences, %d skipped (%.1f%% coverage)',
             len(sentences), total_skipped,
             100.0 * (1 - total_skipped / len(sentences)))

    model = initial_model(grammar, sentences, smoothing)

    def record(phase, it, seg_no, seg, ll, t0):
        forests, skipped, ntok, nsent = seg
        row = dict(phase=phase, iteration=it, segment=seg_no,
                   sentences=nsent, tokens=ntok, skipped=skipped,
                   coverage=1 - skipped / nsent if nsent else 0.0,
                   loglik=ll, seconds=time.perf_counter() - t0)
        log.info('%(phase)s it=%(iteration)d seg=%(segment)d '
                 'loglik=%(loglik).6f skipped=%(skipped)d', row)
        if telemetry is not None:
            telemetry.append(row)

    def reestimate(pool, model):
        total = EventCounts()
        for c in pool:
            if c is not None:
                total.merge(c)
        sm = smoothing
        if held_forests and cfg.fit_lambdas:
            held, _ = expected_counts(held_forests, model, cfg.workers,
                                      cfg.drop_threshold)
            obs = heldout_observations(total, held, smoothing, grammar)
            sm = replace(smoothing, lambdas=fit_smoothing_weights(
                obs, smoothing.lambdas))
        return m_step(total, model, sm)

    pool = [None] * len(segs)
    if cfg.bootstrap:
        for i, seg in enumerate(segs):
            t0 = time.perf_counter()
            pool[i], ll = expected_counts(seg[0], model, cfg.workers,
                                          cfg.drop_threshold)
            record('bootstrap', 0, i, seg, ll, t0)
        model = reestimate(pool, model)
    for it in range(1, cfg.iterations + 1):
        for i, seg in enumerate(segs):
            if not seg[0]:
                continue
            t0 = time.perf_counter()
            pool[i], ll = expected_counts(seg[0], model, cfg.workers,
                                          cfg.drop_threshold)
            model = reestimate(pool, model)
            record('incremental', it, i, seg, ll, t0)
    return model
