"""Entropy, relative entropy, Poisson smoothing over frames, chi-squared."""
from __future__ import annotations

import math
from typing import NamedTuple

from scipy import stats

from .lexicon import frame_tokens

__all__ = [
    'SupportError', 'empirical_distribution', 'entropy', 'relative_entropy',
    'cross_entropy', 'PoissonSmoothed', 'poisson_smooth',
    'ChiSquaredResult', 'chi_squared_genre', 'EntropyRow', 'entropy_rows',
    'format_entropy_report',
]


class SupportError(ValueError):
    """p puts mass on an outcome where q has none."""


def empirical_distribution(counts):
    total = math.fsum(counts.values())
    if total <= 0:
        raise ValueError('counts are all zero')
    return {k: c / total for k, c in counts.items() if c > 0}


def entropy(p):
    """Entropy in bits (0 log 0 = 0)."""
    return -math.fsum(x * math.log2(x) for x in p.values() if x > 0)


def _q(q, outcome):
    return q.get(outcome, 0.0)


def relative_entropy(p, q):
    """D(p || q) in bits; raises SupportError instead of returning inf."""
    terms = []
    for k, x in p.items():
        if x <= 0:
            continue
        y = _q(q, k)
        if y <= 0:
            raise SupportError('q(%r) = 0 where p(%r) = %g' % (k, k, x))
        terms.append(x * (math.log2(x) - math.log2(y)))
    return max(math.fsum(terms), 0.0)


def cross_entropy(p, q):
    """-sum p log2 q, i.e. H(p) + D(p || q)."""
    terms = []
    for k, x in p.items():
        if x <= 0:
            continue
        y = _q(q, k)
        if y <= 0:
            raise SupportError('q(%r) = 0 where p(%r) = %g' % (k, k, x))
        terms.append(-x * math.log2(y))
    return math.fsum(terms)


class PoissonSmoothed:
    """``(1 - mix) q(f) + mix * Pois(|f|; lam) * |A|^-|f|`` over all frames.

    The second component spells a frame as a Poisson-length string over the
    alphabet A, so every finite frame gets positive mass and the component
    sums to one over all frames.  Lengths count frame tokens; ``intrans`` has
    length 0.
    """

    MIN_LAMBDA = 0.1

    def __init__(self, q, alphabet, mix=0.05, lam=None):
        q = q.probs if hasattr(q, 'probs') else q
        if not q:
            raise ValueError('cannot smooth an empty distribution')
        if not 0 < mix < 1:
            raise ValueError('mix must lie in (0, 1)')
        alphabet = frozenset(a.lower() for a in alphabet)
        if not alphabet:
            raise ValueError('empty alphabet')
        total = math.fsum(q.values())
        self.q = {f: v / total for f, v in q.items()}
        self.alphabet = alphabet
        self.mix = mix
        if lam is None:
            lam = math.fsum(v * len(frame_tokens(f))
                            for f, v in self.q.items())
        self.lam = max(lam, self.MIN_LAMBDA)

    def component(self, frame):
        toks = frame_tokens(frame)
        if any(t not in self.alphabet for t in toks):
            return 0.0
        k = len(toks)
        return stats.poisson.pmf(k, self.lam) * len(self.alphabet) ** -k

    def get(self, frame, default=0.0):
        p = (1 - self.mix) * self.q.get(frame, 0.0) + \
            self.mix * self.component(frame)
        return p if p > 0 else default

    __getitem__ = get

    def restrict(self, frames):
        return {f: self.get(f) for f in frames}

    def tail_mass(self, frames):
        """Mass outside the (distinct) finite set ``frames``."""
        frames = set(frames)
        inside = math.fsum(self.q.get(f, 0.0) for f in frames)
        comp = math.fsum(self.component(f) for f in frames)
        return (1 - self.mix) * (1 - inside) + self.mix * (1 - comp)


def poisson_smooth(q, alphabet, mix=0.05, lam=None):
    return PoissonSmoothed(q, alphabet, mix, lam)


class ChiSquaredResult(NamedTuple):
    statistic: float
    dof: int
    significant: bool
    critical: float
    cells: tuple


def chi_squared_genre(c1, c2, alpha=0.05):
    """Pearson chi-squared on the 2 x K table of two frame-count samples.

    Outcomes whose expected count is below 1 in either row are merged into
    one ``other`` column.
    """
    outcomes = sorted((set(c1) | set(c2)),
                      key=lambda k: (-(c1.get(k, 0) + c2.get(k, 0)), k))
    outcomes = [k for k in outcomes if c1.get(k, 0) + c2.get(k, 0) > 0]
    n1, n2 = sum(c1.values()), sum(c2.values())
    n = n1 + n2
    if n1 <= 0 or n2 <= 0:
        raise ValueError('both samples need observations')
    keep, other = [], [0, 0]
    for k in outcomes:
        col = c1.get(k, 0) + c2.get(k, 0)
        if min(n1, n2) * col / n < 1:
            other[0] += c1.get(k, 0)
            other[1] += c2.get(k, 0)
        else:
            keep.append((k, c1.get(k, 0), c2.get(k, 0)))
    if sum(other):
        keep.append(('other', other[0], other[1]))
    if len(keep) < 2:
        raise ValueError('fewer than two outcomes after merging')
    stat = 0.0
    for _, a, b in keep:
        col = a + b
        for obs, row in ((a, n1), (b, n2)):
            e = row * col / n
            stat += (obs - e) ** 2 / e
    dof = len(keep) - 1
    crit = float(stats.chi2.ppf(1 - alpha, dof))
    return ChiSquaredResult(stat, dof, stat > crit, crit, tuple(keep))


class EntropyRow(NamedTuple):
    head: str
    label: str
    entropy: float
    d_other: float | None
    d_model: float | None


def entropy_rows(head, samples, model_dist=None, alphabet=(), mix=0.05):
    """One row per genre label: H(p), D(p || other genres), D(p || model).

    ``samples`` maps label -> frame counts.  The comparison distributions
    are Poisson-smoothed over ``alphabet`` plus every frame token seen in the
    samples.
    """
    alpha = set(a.lower() for a in alphabet)
    for counts in samples.values():
        for f in counts:
            alpha.update(frame_tokens(f))
    if model_dist is not None:
        md = model_dist.probs if hasattr(model_dist, 'probs') else model_dist
        for f in md:
            alpha.update(frame_tokens(f))
    alpha = alpha or {'x'}
    rows = []
    for label in sorted(samples):
        p = empirical_distribution(samples[label])
        others = {}
        for other, counts in samples.items():
            if other != label:
                for f, c in counts.items():
                    others[f] = others.get(f, 0) + c
        d_other = None
        if others and sum(others.values()) > 0:
            q = poisson_smooth(empirical_distribution(others), alpha, mix)
            d_other = relative_entropy(p, q)
        d_model = None
        if model_dist is not None:
            d_model = relative_entropy(p, poisson_smooth(model_dist, alpha,
                                                         mix))
        rows.append(EntropyRow(head, label, entropy(p), d_other, d_model))
    return rows


def format_entropy_report(rows):
    def f(x):
        return '--' if x is None else '%.4f' % x
    lines = ['head\tgenre\tH\tD_vs_other\tD_vs_model']
    for r in rows:
        lines.append('%s\t%s\t%s\t%s\t%s' % (r.head, r.label, f(r.entropy),
                                             f(r.d_other), f(r.d_model)))
    return '\n'.join(lines) + '\n'
