"""Best-parse extraction from weighted forests."""
from __future__ import annotations

from typing import NamedTuple

from .estimation import compile_forest, inside_scores
from .events import LabeledTree, format_tree
from .model import NEG_INF

__all__ = ['ScoredTree', 'viterbi', 'sum_max', 'format_scored']


class ScoredTree(NamedTuple):
    tree: LabeledTree
    score: float            # log of the decoding objective
    tree_logprob: float     # log weight of the returned tree itself


def _best(cf, model):
    """Per-item best log score and the and-node achieving it."""
    lp = model.logprob
    best = [0.0] * cf.n_items
    back = [None] * cf.n_items
    for p, _, _ in cf.andnodes:
        best[p] = NEG_INF
    for a, (p, kids, evs) in enumerate(cf.andnodes):
        s = 0.0
        for e in evs:
            s += lp(e)
        for k in kids:
            s += best[k]
        # strict > keeps the first and-node, i.e. the lowest rule/split key
        if back[p] is None or s > best[p]:
            best[p], back[p] = s, a
    return best, back


def _build(cf, back, words, item):
    it = cf.items[item]
    a = back[item]
    if a is None:
        return LabeledTree(it.cat, words[it.start])
    p, kids, evs = cf.andnodes[a]
    rule = evs[0].rule
    children = tuple(_build(cf, back, words, k) for k in kids)
    return LabeledTree(it.cat, words[it.head], rule, children)


def _tree_logprob(cf, back, model, item):
    a = back[item]
    if a is None:
        return 0.0
    p, kids, evs = cf.andnodes[a]
    s = sum(model.logprob(e) for e in evs)
    return s + sum(_tree_logprob(cf, back, model, k) for k in kids)


def _pick_root(cf, model, best):
    choice, score = None, NEG_INF
    for r, ev in cf.roots:
        s = model.logprob(ev) + best[r]
        if choice is None or s > score:
            choice, score = (r, ev), s
    return choice, score


def viterbi(forest, model):
    """Highest-weight tree; ties go to the earliest rule, then leftmost split."""
    cf = compile_forest(forest, keep_items=True)
    if not cf.roots:
        raise ValueError('empty forest')
    best, back = _best(cf, model)
    (r, ev), score = _pick_root(cf, model, best)
    words = [t.word for t in forest.sentence]
    tree = _build(cf, back, words, r)
    return ScoredTree(tree, score, score)


def sum_max(forest, model, chunks=None):
    """Max over analyses above chunk level, summing analyses within chunks.

    Inside a selected chunk the reported structure is its best analysis.
    ``score`` is the mixed objective; ``tree_logprob`` the returned tree's
    own weight.
    """
    chunks = forest.grammar.chunks if chunks is None else frozenset(chunks)
    cf = compile_forest(forest, keep_items=True)
    if not cf.roots:
        raise ValueError('empty forest')
    inside, _, _ = inside_scores(cf, model)
    chunk_items = [i for i, it in enumerate(cf.items) if it.cat in chunks]
    plain, back_plain = _best(cf, model)
    if not chunk_items:
        (r, ev), score = _pick_root(cf, model, plain)
        words = [t.word for t in forest.sentence]
        return ScoredTree(_build(cf, back_plain, words, r), score, score)
    # recompute maxima bottom-up so that chunk inside scores propagate
    lp = model.logprob
    best = [0.0] * cf.n_items
    back = list(back_plain)
    for p, _, _ in cf.andnodes:
        best[p] = NEG_INF
    is_chunk = set(chunk_items)
    chosen = [None] * cf.n_items
    for a, (p, kids, evs) in enumerate(cf.andnodes):
        if p in is_chunk:
            continue
        s = sum(lp(e) for e in evs)
        for k in kids:
            s += inside[k] if k in is_chunk else best[k]
        if chosen[p] is None or s > best[p]:
            best[p], chosen[p] = s, a
    for i in is_chunk:
        best[i] = inside[i]
    for i, a in enumerate(chosen):
        if a is not None:
            back[i] = a
    (r, ev), score = _pick_root(cf, model, best)
    words = [t.word for t in forest.sentence]
    tree = _build(cf, back, words, r)
    true = model.logprob(ev) + _tree_logprob(cf, back, model, r)
    return ScoredTree(tree, score, true)


def format_scored(st):
    return '%s\t%.17g' % (format_tree(st.tree), st.score)
