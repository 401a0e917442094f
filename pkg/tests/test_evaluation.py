import itertools
import math
import random

import pytest
from scipy import stats

from lexpcfg.evaluation import (SupportError, chi_squared_genre, cross_entropy,
                                empirical_distribution, entropy, entropy_rows,
                                format_entropy_report, poisson_smooth,
                                relative_entropy)

ALLOW_FRAMES = ['np vtop', 'np', 'np np', 'np pp', 'np part', 'pp', 'sbar',
                'intrans']
ALLOW_IMAG = dict(zip(ALLOW_FRAMES, [51, 21, 13, 6, 5, 2, 1, 1]))
SUFFER_FRAMES = ['intrans', 'pp', 'np', 'np vtop', 'np pp']
SUFFER_IMAG = dict(zip(SUFFER_FRAMES, [41, 31, 21, 4, 3]))
SUFFER_NATSCI = dict(zip(SUFFER_FRAMES, [6, 54, 36, 1, 4]))


def _random_pair(rng, k=5):
    p = [rng.random() for _ in range(k)]
    q = [rng.random() + 1e-3 for _ in range(k)]
    zp = rng.randrange(k)
    p[zp] = 0.0 if rng.random() < 0.3 else p[zp]
    sp, sq = sum(p), sum(q)
    return ({i: x / sp for i, x in enumerate(p)},
            {i: x / sq for i, x in enumerate(q)})


def test_empirical():
    assert empirical_distribution({'a': 1, 'b': 1}) == {'a': .5, 'b': .5}
    assert empirical_distribution({'a': 5}) == {'a': 1.0}
    d = empirical_distribution(ALLOW_IMAG)
    assert len(d) == 8 and math.fsum(d.values()) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        empirical_distribution({'a': 0})


def test_entropy_values():
    assert entropy({i: .25 for i in range(4)}) == pytest.approx(2.0)
    assert entropy({'a': 1.0, 'b': 0.0}) == 0.0
    assert entropy(empirical_distribution(ALLOW_IMAG)) == \
        pytest.approx(2.06, abs=0.01)
    assert entropy(empirical_distribution(SUFFER_IMAG)) == \
        pytest.approx(1.86, abs=0.01)


def test_entropy_relabeling():
    p = empirical_distribution(ALLOW_IMAG)
    relabeled = {'x%d' % i: v for i, v in enumerate(reversed(list(p.values())))}
    assert entropy(relabeled) == pytest.approx(entropy(p), abs=1e-12)


def test_relative_entropy_basics():
    p = empirical_distribution(ALLOW_IMAG)
    assert relative_entropy(p, p) == 0.0
    assert relative_entropy({'a': 1, 'b': 0}, {'a': .5, 'b': .5}) == \
        pytest.approx(1.0)


def test_support_violation():
    with pytest.raises(SupportError):
        relative_entropy({'a': .5, 'b': .5}, {'a': 1.0})
    with pytest.raises(SupportError):
        cross_entropy({'a': 1.0}, {'b': 1.0})


def test_cross_entropy():
    assert cross_entropy({'a': .5, 'b': .5}, {'a': .5, 'b': .5}) == \
        pytest.approx(1.0)
    assert cross_entropy({'a': 1.0}, {'a': .25, 'b': .75}) == \
        pytest.approx(2.0)


@pytest.mark.parametrize('seed', range(100))
def test_information_identity(seed):
    p, q = _random_pair(random.Random(seed))
    d = relative_entropy(p, q)
    assert d >= 0
    assert cross_entropy(p, q) == pytest.approx(entropy(p) + d, abs=1e-12)


def test_poisson_unseen_frame():
    q = empirical_distribution(ALLOW_IMAG)
    q.pop('sbar')
    sm = poisson_smooth(q, ['np', 'pp', 'vtop', 'part', 'sbar'])
    assert q.get('sbar', 0.0) == 0.0
    assert sm['sbar'] > 0
    assert sm['np np np np'] > 0
    # outside the alphabet there is nothing to spell with
    assert sm['adj'] == 0.0


def test_poisson_mix_limit():
    q = empirical_distribution(ALLOW_IMAG)
    sm = poisson_smooth(q, ['np', 'pp', 'vtop', 'part', 'sbar'], mix=1e-12)
    for f, v in q.items():
        assert sm[f] == pytest.approx(v, rel=1e-9)


@pytest.mark.parametrize('lam', [0.5, 1.3, 2.0])
def test_poisson_partial_sums(lam):
    alphabet = ['np', 'pp', 'vtop']
    sm = poisson_smooth({'np': 1.0}, alphabet, lam=lam)
    for L in range(5):
        total = math.fsum(sm.component(' '.join(s) if s else 'intrans')
                          for k in range(L + 1)
                          for s in itertools.product(alphabet, repeat=k))
        assert total == pytest.approx(stats.poisson.cdf(L, lam), abs=1e-12)


def test_poisson_tail_mass_closes():
    alphabet = ['np', 'pp', 'sbar']
    q = empirical_distribution(ALLOW_IMAG)
    q = {f: v for f, v in q.items() if all(t in alphabet for t in f.split())
         or f == 'intrans'}
    sm = poisson_smooth(q, alphabet)
    frames = ['intrans'] + [' '.join(s) for k in (1, 2)
                            for s in itertools.product(alphabet, repeat=k)]
    inside = math.fsum(sm.restrict(frames).values())
    assert inside + sm.tail_mass(frames) == pytest.approx(1.0, abs=1e-9)


def test_poisson_lambda_is_mean_length():
    sm = poisson_smooth({'np': .5, 'np pp': .5}, ['np', 'pp'])
    assert sm.lam == pytest.approx(1.5)
    assert poisson_smooth({'intrans': 1.0}, ['np']).lam > 0


def test_poisson_errors():
    with pytest.raises(ValueError):
        poisson_smooth({}, ['np'])
    with pytest.raises(ValueError):
        poisson_smooth({'np': 1}, [])
    with pytest.raises(ValueError):
        poisson_smooth({'np': 1}, ['np'], mix=0)


def test_chi_squared_identical():
    r = chi_squared_genre(SUFFER_IMAG, dict(SUFFER_IMAG))
    assert r.statistic == pytest.approx(0.0) and not r.significant


def test_chi_squared_suffer_genres_differ():
    r = chi_squared_genre(SUFFER_IMAG, SUFFER_NATSCI)
    assert r.significant
    assert r.critical == pytest.approx(stats.chi2.ppf(0.95, r.dof))


def test_chi_squared_scaling():
    r1 = chi_squared_genre(SUFFER_IMAG, SUFFER_NATSCI)
    r2 = chi_squared_genre({k: 2 * v for k, v in SUFFER_IMAG.items()},
                           {k: 2 * v for k, v in SUFFER_NATSCI.items()})
    assert r2.statistic == pytest.approx(2 * r1.statistic)


def test_chi_squared_matches_scipy_without_merging():
    a, b = {'x': 20, 'y': 30, 'z': 10}, {'x': 25, 'y': 15, 'z': 20}
    r = chi_squared_genre(a, b)
    ref = stats.chi2_contingency([[a[k] for k in 'xyz'],
                                  [b[k] for k in 'xyz']], correction=False)
    assert r.statistic == pytest.approx(ref[0])
    assert r.dof == ref[2]


def test_chi_squared_merges_sparse_cells():
    r = chi_squared_genre({'a': 50, 'b': 50, 'c': 1}, {'a': 10, 'b': 10})
    assert [c[0] for c in r.cells][-1] == 'other'


def test_chi_squared_errors():
    with pytest.raises(ValueError):
        chi_squared_genre({'a': 3}, {'a': 4})
    with pytest.raises(ValueError):
        chi_squared_genre({'a': 3}, {})


def test_entropy_rows_identical_samples():
    rows = entropy_rows('suffer', {'imag': SUFFER_IMAG,
                                   'other': dict(SUFFER_IMAG)})
    for r in rows:
        assert r.entropy == pytest.approx(1.86, abs=0.01)
        # smoothing moves a little mass off the observed frames
        assert r.d_other == pytest.approx(0.0, abs=0.1)
        assert r.d_model is None


def test_entropy_rows_model_equal_to_sample():
    model = empirical_distribution(SUFFER_IMAG)
    rows = entropy_rows('suffer', {'imag': SUFFER_IMAG}, model)
    assert rows[0].d_other is None
    assert 0 <= rows[0].d_model < 0.1


def test_entropy_rows_genres_differ():
    rows = entropy_rows('suffer', {'imag': SUFFER_IMAG,
                                   'natsci': SUFFER_NATSCI})
    assert all(r.d_other > 0.3 for r in rows)
    text = format_entropy_report(rows)
    lines = text.splitlines()
    assert lines[0].startswith('head\tgenre\tH')
    assert lines[1].split('\t')[:3] == ['suffer', 'imag', '1.8615']
    assert lines[1].split('\t')[-1] == '--'
