import math
import random

import pytest

from lexpcfg.events import START, TOP
from lexpcfg.grammar import parse_grammar
from lexpcfg.lexicon import (INTRANS, FrameDistribution, PRMetrics,
                             _sweep, apply_cutoffs, canonical_frame,
                             extract_frequencies, find_cutoffs, format_pr_report,
                             frame_distribution, frame_of, frame_tokens,
                             map_gold_codes, precision_recall,
                             read_frame_map, read_gold_lexicon)
from lexpcfg.model import LexPCFG

from conftest import sent

VFP = """
start VFP;
VFP -> VFC' | VFC' NP | VFC' NP PP;
VFC -> V';
NP -> N';
PP -> P' NP;
asked : V;
question : N;
of : P;
"""


def _vfp_model(probs):
    g = parse_grammar(VFP)
    rules = g.rules_by_lhs['VFP']
    dist = dict(zip(rules, probs))
    return LexPCFG.from_probabilities(g, {('asked', 'VFP'): dist})


def test_frame_names():
    g = parse_grammar(VFP)
    assert [frame_of(r) for r in g.rules_by_lhs['VFP']] == \
        [INTRANS, 'np', 'np pp']
    assert frame_tokens('np_pp') == ('np', 'pp')
    assert frame_tokens('intrans') == ()
    assert canonical_frame('NP  PP') == 'np pp'
    assert canonical_frame('') == INTRANS


def test_point_mass_frame():
    d = frame_distribution(_vfp_model([0, 1, 0]), 'asked', 'VFP')
    assert d.probs == {INTRANS: 0, 'np': 1.0, 'np pp': 0}
    assert not d.backoff


def test_marginalization():
    d = frame_distribution(_vfp_model([0.3, 0.7, 0.0]), 'asked', 'VFP')
    assert d['intrans'] == pytest.approx(0.3)
    assert d['np'] == pytest.approx(0.7)


def test_rules_sharing_a_frame_are_summed():
    g = parse_grammar("start X; X -> V' NP | NP V' | V'; NP -> N'; "
                      "v : V; n : N;")
    rules = g.rules_by_lhs['X']
    m = LexPCFG.from_probabilities(g, {('v', 'X'): dict(zip(rules,
                                                            [.2, .5, .3]))})
    assert frame_distribution(m, 'v', 'X').probs == pytest.approx(
        {'np': 0.7, INTRANS: 0.3})


def test_unseen_pair_flags_backoff(caplog):
    d = frame_distribution(_vfp_model([1, 0, 0]), 'nobody', 'VFP')
    assert d.backoff
    assert math.fsum(d.probs.values()) == pytest.approx(1.0)
    assert 'unlexicalized' in caplog.text


def test_unknown_category():
    with pytest.raises(KeyError):
        frame_distribution(_vfp_model([1, 0, 0]), 'asked', 'NOPE')


ATTACH_VP = """
start S;
S -> VP';
VP -> V' NP | V' NP PP;
NP -> N' | N' PP;
PP -> P' NP;
saw : V;
man : N;
hill : N;
on : P;
"""


def _attach_model():
    g = parse_grammar(ATTACH_VP)
    vp = {r: 0.5 for r in g.rules_by_lhs['VP']}
    np_ = {r: 0.5 for r in g.rules_by_lhs['NP']}
    return LexPCFG.from_probabilities(
        g,
        {('saw', 'VP'): vp, ('man', 'NP'): np_, ('hill', 'NP'): np_,
         ('saw', 'S'): {g.rules_by_lhs['S'][0]: 1.0},
         ('on', 'PP'): {g.rules_by_lhs['PP'][0]: 1.0}},
        {('saw', 'VP', 'NP'): {'man': 1.0, 'hill': 1.0},
         ('saw', 'VP', 'PP'): {'on': 1.0},
         ('man', 'NP', 'PP'): {'on': 1.0}, ('on', 'PP', 'NP'): {'hill': 1.0},
         (TOP, START, 'S'): {'saw': 1.0}})


def test_extract_unambiguous():
    m = _attach_model()
    freq, skipped = extract_frequencies(m, [sent('saw/V', 'hill/N')], 'saw',
                                        ['VP'])
    assert freq == pytest.approx({'np': 1.0}) and skipped == 0


def test_extract_ambiguous_attachment():
    m = _attach_model()
    s = sent('saw/V', 'man/N', 'on/P', 'hill/N')
    freq, _ = extract_frequencies(m, [s], 'saw', ['VP'])
    assert freq == pytest.approx({'np pp': 0.5, 'np': 0.5})


def test_extract_mass_bound_and_skips():
    m = _attach_model()
    corpus = [sent('saw/V', 'man/N', 'on/P', 'hill/N'),
              sent('saw/V', 'hill/N'), sent('man/N')]
    freq, skipped = extract_frequencies(m, corpus, 'saw', ['VP'])
    assert skipped == 1
    assert math.fsum(freq.values()) <= 2 + 1e-12


# -- cutoffs ----------------------------------------------------------------------

def test_cutoffs_zero_and_one():
    d = FrameDistribution('w', 'VP', {'np': 0.5, 'pp': 0.5, 'intrans': 0.0})
    assert apply_cutoffs(d, {'np': 0, 'pp': 0, 'intrans': 0}) == {'np', 'pp'}
    assert apply_cutoffs(d, {'np': 1, 'pp': 1, 'intrans': 1}) == set()
    point = FrameDistribution('w', 'VP', {'np': 1.0})
    assert apply_cutoffs(point, {'np': 1.0}) == {'np'}


def test_cutoff_below_and_above():
    d = FrameDistribution('w', 'VP', {'np': 0.5, 'pp': 0.01})
    assert apply_cutoffs(d, {'np': 0.021, 'pp': 0.045}) == {'np'}


def test_missing_cutoff_never_proposed():
    assert apply_cutoffs({'np': 0.9}, {}) == set()


def test_cutoffs_monotone():
    rng = random.Random(2)
    for _ in range(100):
        d = {f: rng.random() for f in 'abcd'}
        c = {f: rng.random() for f in 'abcd'}
        hi = dict(c, a=min(1.0, c['a'] + rng.random()))
        assert apply_cutoffs(d, hi) <= apply_cutoffs(d, c)


def test_all_positive_words_gold():
    dev = {'a': {'np': 0.4}, 'b': {'np': 0.1}, 'c': {'np': 0.0}}
    gold = {'a': {'np'}, 'b': {'np'}, 'c': set()}
    assert find_cutoffs(dev, gold) == {'np': 0.1}


def test_known_crossover():
    probs = {'p1': 0.3, 'p2': 0.2, 'p3': 0.1, 'p4': 0.05,
             'n1': 0.12, 'n2': 0.08, 'n3': 0.02}
    dev = {w: {'np': p} for w, p in probs.items()}
    gold = {w: ({'np'} if w.startswith('p') else set()) for w in probs}
    t = find_cutoffs(dev, gold)['np']
    cands = sorted(set(probs.values()))
    i = cands.index(0.1)
    assert cands[i - 1] < t <= cands[i + 1]
    rows = {th: (p, r) for th, p, r in _sweep('np', dev, gold)}
    assert rows[t][0] == pytest.approx(rows[t][1])


def test_absent_frame_threshold_one():
    dev = {'a': {'np': 1.0}}
    assert find_cutoffs(dev, {'a': {'np', 'pp'}})['pp'] == 1.0


def _synthetic_dev(rng, n=100):
    dev, gold = {}, {}
    for i in range(n):
        w = 'v%d' % i
        has = rng.random() < 0.4
        p = rng.betavariate(4, 2) if has else rng.betavariate(1, 6)
        dev[w] = {'np': p}
        gold[w] = {'np'} if has else set()
    return dev, gold


@pytest.mark.parametrize('seed', range(25))
def test_cutoff_is_best_crossing(seed):
    rng = random.Random(seed)
    dev, gold = _synthetic_dev(rng)
    t = find_cutoffs(dev, gold)['np']
    rows = [r for r in _sweep('np', dev, gold)
            if r[1] is not None and r[2] is not None]
    diffs = [(th, p - r, p) for th, p, r in rows]
    crossings = [(th, p) for k, (th, d, p) in enumerate(diffs)
                 if d == 0 or (d > 0 and k and diffs[k - 1][1] < 0)]
    if len(crossings) == 1:
        # a single crossing: P - R keeps its sign everywhere below it
        assert t == crossings[0][0]
        assert all(d < 0 for th, d, _ in diffs if th < t)
    elif crossings:
        best = max(p for _, p in crossings)
        assert dict(crossings)[t] == best


def test_cutoffs_generalize_to_test_half():
    rng = random.Random(99)
    dev, dgold = _synthetic_dev(rng, 200)
    test, tgold = _synthetic_dev(rng, 200)
    cut = find_cutoffs(dev, dgold)
    proposed = {w: apply_cutoffs(d, cut) for w, d in test.items()}
    overall, _ = precision_recall(proposed, tgold, {'np'})
    assert abs(overall.precision - overall.recall) < 0.15


# -- precision / recall -------------------------------------------------------

def test_summary_row_arithmetic():
    m = PRMetrics(310, 83, 103)
    assert m.precision == pytest.approx(0.7888, abs=1e-4)
    assert m.recall == pytest.approx(0.7506, abs=1e-4)


def test_np_row_from_true_negatives():
    tn, fp, fn = 3, 5, 1
    m = PRMetrics(100 - tn - fp - fn, fp, fn)
    assert m.tp == 91
    assert m.precision == pytest.approx(0.9479, abs=5e-4)
    assert m.recall == pytest.approx(0.9891, abs=5e-4)


def test_undefined_metrics_absent():
    m = PRMetrics(0, 0, 3)
    assert m.precision is None and m.recall == 0.0
    assert PRMetrics(0, 0, 0).recall is None


def test_perfect_proposal():
    gold = {'a': {'np', 'pp'}, 'b': {'intrans'}}
    overall, per = precision_recall(gold, gold)
    assert overall.precision == overall.recall == 1.0
    assert per['np'].tp == 1


def test_union_and_nothing():
    gold = {'a': {'np'}, 'b': {'pp'}, 'c': {'np', 'pp'}}
    union = {w: {'np', 'pp'} for w in gold}
    assert precision_recall(union, gold)[0].recall == 1.0
    none = {w: set() for w in gold}
    o = precision_recall(none, gold)[0]
    assert o.precision is None and o.recall == 0.0


def test_frames_outside_inventory_ignored():
    gold = {'a': {'np'}}
    o, per = precision_recall({'a': {'np', 'sbar'}}, gold)
    assert o.fp == 0 and 'sbar' not in per


def test_empty_intersection():
    with pytest.raises(ValueError):
        precision_recall({'a': set()}, {'b': {'np'}})


# -- files and report ---------------------------------------------------------------

def test_gold_lexicon_syntax():
    gold = read_gold_lexicon("give : np_np np_pp  # comment\n"
                             "allow : np vtop, np\n\n")
    assert gold == {'give': {'np np', 'np pp'}, 'allow': {'np vtop', 'np'}}
    with pytest.raises(ValueError):
        read_gold_lexicon('no colon here')


def test_frame_map_and_codes():
    mapping = read_frame_map("T1 -> np\nI -> intrans\nX9 -> DROP\n")
    gold = read_gold_lexicon("give : T1 X9 Q\nsleep : I\n", canonical=False)
    mapped, dropped = map_gold_codes(gold, mapping)
    assert mapped == {'give': {'np'}, 'sleep': {'intrans'}}
    assert dropped == {'X9', 'Q'}
    with pytest.raises(ValueError):
        read_frame_map('T1 np')


def test_report_layout():
    gold = {'a': {'np'}, 'b': {'np', 'pp'}, 'c': {'pp'}}
    prop = {'a': {'np', 'pp'}, 'b': {'np'}, 'c': set()}
    overall, per = precision_recall(prop, gold)
    text = format_pr_report(per, overall, {'np': 0.021, 'pp': 0.045})
    lines = text.splitlines()
    assert lines[0].split('\t') == ['frame', 'cutoff', 'tp', 'fp', 'fn',
                                    'precision', 'recall']
    assert lines[1].split('\t') == ['np', '0.021', '2', '0', '0', '1.0000',
                                    '1.0000']
    assert lines[2].split('\t') == ['pp', '0.045', '0', '1', '2', '0.0000',
                                    '0.0000']
    assert lines[-1].split('\t') == ['TOTAL', '', '2', '1', '2', '0.6667',
                                     '0.5000']
