"""Property tests over randomly drawn grammars, distributions and counts."""
import math
import random

from hypothesis import given, settings, strategies as st

from lexpcfg.estimation import absolute_discount, inside_outside
from lexpcfg.evaluation import (cross_entropy, entropy, poisson_smooth,
                                relative_entropy)
from lexpcfg.events import format_tree, read_tree
from lexpcfg.grammar import dump_grammar, parse_grammar
from lexpcfg.lexicon import PRMetrics, apply_cutoffs
from lexpcfg.model import dumps_model, loads_model
from lexpcfg.parser import (count_trees, enumerate_trees, format_sentence,
                            parse_sentence_line)
from lexpcfg.synthkit import random_instance, random_model

seeds = st.integers(min_value=0, max_value=10 ** 6)
probs = st.lists(st.floats(min_value=1e-6, max_value=1.0), min_size=1,
                 max_size=8)


def _norm(xs):
    s = math.fsum(xs)
    return {i: x / s for i, x in enumerate(xs)}


@given(probs, probs)
def test_cross_entropy_identity(a, b):
    k = min(len(a), len(b))
    p, q = _norm(a[:k]), _norm(b[:k])
    d = relative_entropy(p, q)
    assert d >= 0
    assert abs(cross_entropy(p, q) - entropy(p) - d) <= 1e-9


@given(probs)
def test_entropy_bounds(a):
    p = _norm(a)
    assert -1e-12 <= entropy(p) <= math.log2(len(p)) + 1e-12


@given(st.dictionaries(st.sampled_from(['a', 'b', 'c', 'd', 'e']),
                       st.floats(min_value=0.01, max_value=50),
                       min_size=1),
       st.floats(min_value=0.05, max_value=0.95))
def test_discount_normalizes(counts, d):
    backoff = {k: 0.2 for k in 'abcde'}
    out = absolute_discount(counts, backoff, d)
    assert abs(math.fsum(out.values()) - 1.0) <= 1e-9
    # back-off mass reaches every outcome, counted or not
    assert all(out[k] > 0 for k in backoff)


@given(st.lists(st.sampled_from(['np', 'pp', 'sbar']), max_size=3),
       st.floats(min_value=0.01, max_value=0.5))
def test_poisson_positive_on_alphabet(tokens, mix):
    sm = poisson_smooth({'np': 0.6, 'intrans': 0.4}, ['np', 'pp', 'sbar'],
                        mix)
    frame = ' '.join(tokens) or 'intrans'
    assert sm[frame] > 0


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_pr_metrics_ranges(tp, fp, fn):
    m = PRMetrics(tp, fp, fn)
    for v in (m.precision, m.recall):
        assert v is None or 0 <= v <= 1


@given(st.dictionaries(st.sampled_from('abcd'), st.floats(0, 1), min_size=1),
       st.floats(0, 1), st.floats(0, 1))
def test_cutoffs_antitone(dist, lo, hi):
    lo, hi = min(lo, hi), max(lo, hi)
    low = apply_cutoffs(dist, {f: lo for f in dist})
    high = apply_cutoffs(dist, {f: hi for f in dist})
    assert high <= low


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_counts_nonnegative_and_rooted(seed):
    rng = random.Random(seed)
    g, s, f = random_instance(rng, max_rules=8, max_tokens=5,
                              max_trees=2000)
    m = random_model(g, rng)
    counts, logz = inside_outside(f, m)
    assert logz <= 1e-12
    assert all(v >= -1e-12 for v in counts.values())
    root = math.fsum(v for e, v in counts.items()
                     if getattr(e, 'parent_head', None) == '<top>')
    assert abs(root - 1.0) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_tree_count_matches_enumeration(seed):
    rng = random.Random(seed)
    g, s, f = random_instance(rng, max_rules=8, max_tokens=5,
                              max_trees=2000)
    trees = list(enumerate_trees(f))
    assert count_trees(f) == len(trees)
    for t in trees[:5]:
        assert read_tree(format_tree(t), g) == t


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_grammar_and_sentence_round_trip(seed):
    rng = random.Random(seed)
    g, s, _ = random_instance(rng, max_rules=8, max_tokens=5)
    assert parse_grammar(dump_grammar(g)) == g
    assert parse_sentence_line(format_sentence(s)) == s


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_model_text_round_trip(seed):
    rng = random.Random(seed)
    g, _, _ = random_instance(rng, max_rules=8, max_tokens=4)
    m = random_model(g, rng)
    text = dumps_model(m)
    back = loads_model(text)
    assert back == m and dumps_model(back) == text
