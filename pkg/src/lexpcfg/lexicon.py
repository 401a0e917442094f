"""Subcategorization frames from a trained model, and dictionary evaluation."""
from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field

from .estimation import EstimationError, inside_outside
from .events import RuleEvent
from .parser import parse

__all__ = [
    'INTRANS', 'frame_of', 'frame_length', 'frame_tokens', 'FrameDistribution',
    'PRMetrics', 'frame_distribution', 'extract_frequencies', 'apply_cutoffs',
    'find_cutoffs', 'precision_recall', 'read_gold_lexicon',
    'read_frame_map', 'map_gold_codes', 'format_pr_report',
]

log = logging.getLogger(__name__)

INTRANS = 'intrans'


def frame_of(rule):
    """Canonical frame text: the non-head daughters in order, lower-cased."""
    if not rule.nonheads:
        return INTRANS
    return ' '.join(c.lower() for c in rule.nonheads)


def frame_tokens(frame):
    frame = frame.strip().lower().replace('_', ' ')
    if frame == INTRANS or not frame:
        return ()
    return tuple(frame.split())


def frame_length(frame):
    return len(frame_tokens(frame))


def canonical_frame(text):
    toks = frame_tokens(text)
    return ' '.join(toks) if toks else INTRANS


@dataclass
class FrameDistribution:
    head: str
    phrasal_cat: str
    probs: dict
    backoff: bool = False    # True when (head, cat) was never observed

    def __getitem__(self, frame):
        return self.probs.get(frame, 0.0)


def frame_distribution(model, word, cat):
    """Marginalize the (word, cat) rule distribution onto frames."""
    out = defaultdict(float)
    for rule, p in model.rule_distribution(word, cat).items():
        out[frame_of(rule)] += p
    if not out:
        raise KeyError('category %s has no rules' % cat)
    unseen = (word, cat) not in model.rules
    if unseen:
        log.warning('no lexicalized estimate for (%s, %s); using the '
                    'unlexicalized distribution', word, cat)
    return FrameDistribution(word, cat, dict(out), unseen)


def extract_frequencies(model, sentences, word, cats, grammar=None):
    """Expected frame counts of ``word`` heading any of ``cats``.

    Returns ``(frame -> expected count, skipped sentence count)``.
    """
    grammar = grammar or model.grammar
    cats = set(cats)
    freq = defaultdict(float)
    skipped = 0
    for s in sentences:
        f = parse(s, grammar)
        if f is None:
            skipped += 1
            continue
        try:
            counts, _ = inside_outside(f, model)
        except EstimationError:
            skipped += 1
            continue
        for ev, c in counts.items():
            if (isinstance(ev, RuleEvent) and ev.head == word
                    and ev.rule.lhs in cats):
                freq[frame_of(ev.rule)] += c
    return dict(freq), skipped


def apply_cutoffs(dist, cutoffs):
    """Frames whose probability reaches the frame's cutoff."""
    probs = dist.probs if isinstance(dist, FrameDistribution) else dist
    out = set()
    for frame, p in probs.items():
        c = cutoffs.get(frame)
        if c is None:
            log.info('no cutoff for frame %r; not proposed', frame)
            c = 1.0
        if p >= c and p > 0:
            out.add(frame)
    return out


@dataclass
class PRMetrics:
    tp: int
    fp: int
    fn: int
    precision: float | None = field(init=False)
    recall: float | None = field(init=False)

    def __post_init__(self):
        self.precision = (self.tp / (self.tp + self.fp)
                          if self.tp + self.fp else None)
        self.recall = (self.tp / (self.tp + self.fn)
                       if self.tp + self.fn else None)


def _probs(d):
    return d.probs if isinstance(d, FrameDistribution) else d


def _sweep(frame, dev, gold):
    """(threshold, precision, recall) for each candidate threshold."""
    # a zero threshold proposes exactly what the smallest positive value does
    values = {_probs(d).get(frame, 0.0) for d in dev.values()}
    cands = sorted({v for v in values if v > 0} | {1.0})
    out = []
    for t in cands:
        tp = fp = fn = 0
        for w, d in dev.items():
            p = _probs(d).get(frame, 0.0)
            proposed = p >= t and p > 0
            actual = frame in gold.get(w, ())
            if proposed and actual:
                tp += 1
            elif proposed:
                fp += 1
            elif actual:
                fn += 1
        m = PRMetrics(tp, fp, fn)
        out.append((t, m.precision, m.recall))
    return out


def find_cutoffs(dev, gold, frames=None):
    """Per-frame cutoffs at the precision/recall crossover.

    Candidates are the distinct positive dev probabilities plus 1.  The chosen
    threshold is the first candidate at which precision - recall turns
    nonnegative; with several crossings the one with the best precision
    wins.  Without a crossing: recall is maximized if precision always leads,
    precision if recall always leads.
    """
    if frames is None:
        frames = set()
        for d in dev.values():
            frames.update(f for f, p in _probs(d).items() if p > 0)
        for fs in gold.values():
            frames.update(fs)
    cutoffs = {}
    for frame in sorted(frames):
        if not any(_probs(d).get(frame, 0.0) > 0 for d in dev.values()):
            cutoffs[frame] = 1.0
            continue
        rows = [r for r in _sweep(frame, dev, gold)
                if r[1] is not None and r[2] is not None]
        if not rows:
            cutoffs[frame] = 1.0
            continue
        crossings = []
        for k, (t, p, r) in enumerate(rows):
            diff = p - r
            if diff == 0:
                crossings.append((t, p))
            elif diff > 0 and k > 0 and rows[k - 1][1] - rows[k - 1][2] < 0:
                crossings.append((t, p))
        if crossings:
            t = max(crossings, key=lambda c: (c[1], -c[0]))[0]
        elif all(p - r > 0 for _, p, r in rows):
            t = max(rows, key=lambda x: (x[2], x[1], -x[0]))[0]
        else:
            t = max(rows, key=lambda x: (x[1], x[2], -x[0]))[0]
        cutoffs[frame] = t
    return cutoffs


def precision_recall(proposed, gold, frames=None):
    """Micro-averaged metrics over (word, frame) pairs.

    Only words present in both maps count, and only frames of the common
    inventory (``frames``, default: frames occurring in ``gold``).  Returns
    ``(overall PRMetrics, {frame: PRMetrics})``.
    """
    words = sorted(set(proposed) & set(gold))
    if not words:
        raise ValueError('no word is both proposed and in the gold lexicon')
    if frames is None:
        frames = set()
        for fs in gold.values():
            frames.update(fs)
    frames = set(frames)
    per = {f: [0, 0, 0] for f in sorted(frames)}
    for w in words:
        prop = set(proposed[w]) & frames
        true = set(gold[w]) & frames
        for f in prop & true:
            per[f][0] += 1
        for f in prop - true:
            per[f][1] += 1
        for f in true - prop:
            per[f][2] += 1
    per_frame = {f: PRMetrics(*c) for f, c in per.items()}
    overall = PRMetrics(sum(c[0] for c in per.values()),
                        sum(c[1] for c in per.values()),
                        sum(c[2] for c in per.values()))
    return overall, per_frame


def read_gold_lexicon(lines, canonical=True):
    """Lines ``word : frame1 frame2 ...``.

    Multi-token frames are written with underscores (``np_pp``) or the list
    is comma separated (``give : np np, np pp``).  With ``canonical=False``
    entries are kept verbatim, e.g. dictionary codes awaiting a frame map.
    """
    if isinstance(lines, str):
        lines = lines.splitlines()
    gold = {}
    for lineno, line in enumerate(lines, 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        word, sep, rest = line.partition(':')
        if not sep or not word.strip():
            raise ValueError('line %d: expected "word : frames"' % lineno)
        parts = rest.split(',') if ',' in rest else rest.split()
        norm = canonical_frame if canonical else str.strip
        gold[word.strip()] = {norm(p) for p in parts if p.strip()}
    return gold


def read_frame_map(lines):
    """``dictcode -> frame`` or ``dictcode -> DROP``."""
    if isinstance(lines, str):
        lines = lines.splitlines()
    out = {}
    for lineno, line in enumerate(lines, 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        code, sep, target = line.partition('->')
        if not sep:
            raise ValueError('line %d: expected "code -> frame"' % lineno)
        target = target.strip()
        out[code.strip()] = None if target == 'DROP' else \
            canonical_frame(target)
    return out


def map_gold_codes(gold, mapping):
    """Translate dictionary codes; returns (mapped gold, dropped codes)."""
    out, dropped = {}, set()
    for w, codes in gold.items():
        fs = set()
        for c in codes:
            if mapping.get(c) is not None:
                fs.add(mapping[c])
            else:
                dropped.add(c)
        out[w] = fs
    return out, dropped


def _fmt(x):
    return '--' if x is None else '%.4f' % x


def format_pr_report(per_frame, overall, cutoffs):
    """Tab-separated per-frame rows plus a summary row."""
    lines = ['frame\tcutoff\ttp\tfp\tfn\tprecision\trecall']
    for f in sorted(per_frame):
        m = per_frame[f]
        c = cutoffs.get(f)
        lines.append('%s\t%s\t%d\t%d\t%d\t%s\t%s' % (
            f, '--' if c is None else '%.4g' % c, m.tp, m.fp, m.fn,
            _fmt(m.precision), _fmt(m.recall)))
    lines.append('TOTAL\t\t%d\t%d\t%d\t%s\t%s' % (
        overall.tp, overall.fp, overall.fn, _fmt(overall.precision),
        _fmt(overall.recall)))
    return '\n'.join(lines) + '\n'


def sum_distribution(d):
    return math.fsum(_probs(d).values())
