"""Command line driver: compile, train, parse, frames, entropy, split, synth.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""
from __future__ import annotations

import argparse
import logging
import os
import random
import sys
from collections import Counter

from .decoding import format_scored, sum_max, viterbi
from .estimation import EstimationError, TrainConfig, train
from .evaluation import SupportError, entropy_rows, format_entropy_report
from .events import EventError
from .grammar import (GrammarError, add_state_rules, dump_grammar,
                      parse_grammar, validate)
from .lexicon import (apply_cutoffs, canonical_frame, find_cutoffs,
                      format_pr_report, frame_distribution, map_gold_codes,
                      precision_recall, read_frame_map, read_gold_lexicon)
from .model import ModelFormatError, SmoothingConfig, load_model, save_model
from .parser import ParseError, count_trees, parse, parse_sentence_line, \
    read_corpus

log = logging.getLogger('lexpcfg')

USAGE_ERROR = 1
DATA_ERROR = 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, '%s: error: %s\n' % (self.prog, message))


# -- config ---------------------------------------------------------------------

# key -> converter; keys are the argparse destinations they fill in
CONFIG_KEYS = {
    'seed': int, 'workers': int, 'verbose': lambda s: s.lower() in
    ('1', 'true', 'yes', 'on'),
    'grammar': str, 'corpus': str, 'model': str, 'out': str,
    'telemetry': str, 'plot': str,
    'segment_size': int, 'iterations': int, 'heldout': float,
    'lambdas': str, 'bucket_bounds': str, 'discount': str,
    'backbone_floor': float, 'classical': lambda s: s.lower() in
    ('1', 'true', 'yes', 'on'),
    'cat': str, 'word': str, 'min_freq': float, 'mix': float,
    'mode': str,
}


def read_config(path):
    """Flat ``key = value`` lines; # comments and blank lines allowed."""
    out = {}
    try:
        with open(path, encoding='utf-8') as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise UsageError('cannot read config %s: %s' % (path, e))
    for lineno, line in enumerate(lines, 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key = key.strip().replace('-', '_')
        if not sep:
            raise UsageError('%s:%d: expected key = value' % (path, lineno))
        if key not in CONFIG_KEYS:
            raise UsageError('%s:%d: unknown key %r' % (path, lineno, key))
        try:
            out[key] = CONFIG_KEYS[key](value.strip())
        except ValueError as e:
            raise UsageError('%s:%d: %s' % (path, lineno, e))
    return out


def _apply_config(args, config):
    # command line wins; the config only fills unset options
    for k, v in config.items():
        cur = getattr(args, k, None)
        if cur is None or cur is False:
            setattr(args, k, v)
    for k, v in (('seed', 0), ('workers', 1), ('verbose', False)):
        if getattr(args, k, None) is None:
            setattr(args, k, v)


def _floats(text, name):
    try:
        return tuple(float(x) for x in text.split(','))
    except ValueError:
        raise UsageError('%s must be comma separated numbers' % name)


def smoothing_from_args(args):
    kw = {}
    if getattr(args, 'lambdas', None):
        kw['lambdas'] = _floats(args.lambdas, 'lambdas')
    if getattr(args, 'bucket_bounds', None):
        kw['bucket_bounds'] = _floats(args.bucket_bounds, 'bucket_bounds')
    d = getattr(args, 'discount', None)
    if d is not None and d != 'auto':
        try:
            kw['discount'] = float(d)
        except ValueError:
            raise UsageError('discount must be a number or "auto"')
    if getattr(args, 'backbone_floor', None) is not None:
        kw['backbone_floor'] = args.backbone_floor
    if getattr(args, 'classical', False):
        kw.setdefault('lambdas', (1.0,) * (len(kw.get(
            'bucket_bounds', SmoothingConfig.bucket_bounds)) + 1))
        kw.setdefault('discount', 0.0)
    try:
        return SmoothingConfig(**kw)
    except (TypeError, ValueError) as e:
        raise UsageError('bad smoothing settings: %s' % e)


# -- io helpers -------------------------------------------------------------------

def _read_text(path):
    if path == '-':
        return sys.stdin.read()
    try:
        with open(path, encoding='utf-8') as fh:
            return fh.read()
    except OSError as e:
        raise DataError('cannot read %s: %s' % (path, e))


def _need(args, *names):
    for n in names:
        if getattr(args, n, None) in (None, ''):
            raise UsageError('--%s is required' % n.replace('_', '-'))


def _load_grammar(path):
    try:
        return parse_grammar(_read_text(path))
    except GrammarError as e:
        raise DataError('%s: %s' % (path, e))


def _load_corpus(path):
    try:
        return list(read_corpus(_read_text(path)))
    except ParseError as e:
        raise DataError('%s: %s' % (path, e))


def _load_model(path):
    try:
        return load_model(path)
    except OSError as e:
        raise DataError('cannot read model %s: %s' % (path, e))
    except (ModelFormatError, GrammarError) as e:
        raise DataError('%s: %s' % (path, e))


def _write(path, text):
    if path in (None, '-'):
        sys.stdout.write(text)
        return
    try:
        with open(path, 'w', encoding='utf-8') as fh:
            fh.write(text)
    except OSError as e:
        raise DataError('cannot write %s: %s' % (path, e))


def _word_list(path):
    return [w for w in _read_text(path).split() if not w.startswith('#')]


# -- commands -------------------------------------------------------------------

def cmd_compile(args):
    text = _read_text(args.grammar)
    try:
        g = parse_grammar(text, check=False)
    except GrammarError as e:
        print('%s: %s' % (args.grammar, e), file=sys.stderr)
        return DATA_ERROR
    diags = validate(g)
    if not diags and args.emit_state_rules:
        phrasal = [x.strip() for x in args.emit_state_rules.split(',')
                   if x.strip()]
        try:
            g = add_state_rules(g, phrasal)
        except GrammarError as e:
            print('%s: %s' % (args.grammar, e), file=sys.stderr)
            return DATA_ERROR
    lines = getattr(g, 'source_lines', {})
    for d in diags:
        at = lines.get(d.symbol)
        print('%s: %s%s' % (args.grammar, '' if at is None else
                            'line %d: ' % at, d), file=sys.stderr)
    if diags:
        return DATA_ERROR
    cycle = g.unary_cycle()
    if cycle is not None:
        print('%s: unary rule cycle through %s' % (args.grammar, cycle),
              file=sys.stderr)
        return DATA_ERROR
    print('# %d rules, %d nonterminals, %d terminals, %d words; no '
          'diagnostics' % (len(g.rules), len(g.nonterminals),
                           len(g.terminals), len(g.lexicon)),
          file=sys.stderr)
    _write(args.out, dump_grammar(g))
    return 0


TELEMETRY_COLUMNS = ('phase', 'iteration', 'segment', 'sentences', 'tokens',
                     'skipped', 'coverage', 'loglik', 'seconds')


def format_telemetry(rows):
    lines = ['\t'.join(TELEMETRY_COLUMNS)]
    for r in rows:
        lines.append('%s\t%d\t%d\t%d\t%d\t%d\t%.4f\t%.10g\t%.3f' % tuple(
            r[c] for c in TELEMETRY_COLUMNS))
    return '\n'.join(lines) + '\n'


def cmd_train(args):
    _need(args, 'grammar', 'corpus', 'out')
    g = _load_grammar(args.grammar)
    corpus = _load_corpus(args.corpus)
    if not corpus:
        raise DataError('%s: empty corpus' % args.corpus)
    smoothing = smoothing_from_args(args)
    seg = args.segment_size
    if args.classical:
        seg = sum(len(s) for s in corpus) + 1
    try:
        cfg = TrainConfig(
            segment_size=TrainConfig.segment_size if seg is None else seg,
            iterations=TrainConfig.iterations if args.iterations is None
            else args.iterations,
            heldout_fraction=args.heldout or 0.0,
            bootstrap=not args.no_bootstrap,
            workers=args.workers, seed=args.seed)
    except ValueError as e:
        raise UsageError(str(e))
    rows = []
    try:
        model = train(corpus, g, cfg, smoothing, rows)
    except EstimationError as e:
        raise DataError(str(e))
    try:
        save_model(model, args.out)
    except OSError as e:
        raise DataError('cannot write %s: %s' % (args.out, e))
    _write(args.telemetry, format_telemetry(rows))
    if args.plot:
        from .plotting import plot_training
        plot_training(rows, args.plot)
    return 0


def _forest_stats(forest):
    n_items = len(forest.nodes)
    return '%d\t%d\t%d\t%d' % (len(forest.sentence), n_items,
                               forest.num_and_nodes(), count_trees(forest))


def cmd_parse(args):
    _need(args, 'model', 'corpus')
    model = _load_model(args.model)
    g = model.grammar
    if args.grammar:
        other = _load_grammar(args.grammar)
        if other != g:
            raise DataError('grammar %s does not match the model grammar'
                            % args.grammar)
    mode = args.mode or 'viterbi'
    if mode not in ('viterbi', 'summax', 'forest-stats'):
        raise UsageError('unknown mode %r' % mode)
    out = []
    if mode == 'forest-stats':
        out.append('# tokens\titems\tand_nodes\ttrees')
    for lineno, line in enumerate(_read_text(args.corpus).splitlines(), 1):
        try:
            sent = parse_sentence_line(line)
            forest = parse(sent, g) if len(sent) else None
        except (ParseError, GrammarError) as e:
            log.warning('line %d: %s', lineno, e)
            forest = None
        if forest is None:
            out.append('NOPARSE')
            continue
        if mode == 'forest-stats':
            out.append(_forest_stats(forest))
            continue
        try:
            st = viterbi(forest, model) if mode == 'viterbi' \
                else sum_max(forest, model)
        except (ValueError, EventError) as e:
            log.warning('line %d: %s', lineno, e)
            out.append('NOPARSE')
            continue
        out.append(format_scored(st))
    _write(args.out, '\n'.join(out) + '\n' if out else '')
    return 0


def _check_floor(model, words, cat, floor):
    for w in words:
        n = model.pair_freq.get((w, cat), 0.0)
        if n < floor:
            log.warning('%s heads %s only %.1f times (floor %g); its frame '
                        'estimate is unreliable', w, cat, n, floor)


def _plot_path(base, suffix):
    root, ext = os.path.splitext(base)
    return '%s-%s%s' % (root, suffix, ext or '.png')


def cmd_frames(args):
    _need(args, 'model', 'cat')
    model = _load_model(args.model)
    if args.cat not in model.grammar.nonterminals:
        raise DataError('unknown category %s' % args.cat)
    floor = args.min_freq if args.min_freq is not None else 0.0
    if args.eval:
        gold_p, map_p, dev_p, test_p = args.eval
        try:
            gold = read_gold_lexicon(_read_text(gold_p), canonical=False)
            mapping = read_frame_map(_read_text(map_p))
        except ValueError as e:
            raise DataError(str(e))
        gold, dropped = map_gold_codes(gold, mapping)
        if dropped:
            log.info('dropped dictionary codes: %s', ' '.join(sorted(dropped)))
        dev, test = _word_list(dev_p), _word_list(test_p)
        if set(dev) & set(test):
            raise DataError('dev and test word lists overlap')
        _check_floor(model, dev + test, args.cat, floor)
        frames = set(f for fs in gold.values() for f in fs)
        dev_d = {w: frame_distribution(model, w, args.cat) for w in dev}
        test_d = {w: frame_distribution(model, w, args.cat) for w in test}
        dev_gold = {w: gold.get(w, set()) for w in dev}
        cutoffs = find_cutoffs(dev_d, dev_gold, frames)
        proposed = {w: apply_cutoffs(d, cutoffs) for w, d in test_d.items()}
        test_gold = {w: gold[w] for w in test if w in gold}
        try:
            overall, per = precision_recall(proposed, test_gold, frames)
        except ValueError as e:
            raise DataError(str(e))
        _write(args.out, format_pr_report(per, overall, cutoffs))
        if args.plot:
            from .plotting import plot_precision_recall
            plot_precision_recall(per, args.plot)
        return 0
    words = [args.word] if args.word else []
    if args.words:
        words += _word_list(args.words)
    if not words:
        raise UsageError('give --word, --words or --eval')
    _check_floor(model, words, args.cat, floor)
    lines = ['head\tcat\tframe\tprob']
    for w in words:
        d = frame_distribution(model, w, args.cat)
        for f in sorted(d.probs, key=lambda f: (-d.probs[f], f)):
            lines.append('%s\t%s\t%s\t%.6f' % (w, args.cat, f, d.probs[f]))
        if args.plot:
            from .plotting import plot_frame_distribution
            path = args.plot if len(words) == 1 else _plot_path(args.plot, w)
            plot_frame_distribution(d, path, '%s (%s)' % (w, args.cat))
    _write(args.out, '\n'.join(lines) + '\n')
    return 0


def read_marked_sample(text):
    """``frame<TAB>sentence`` lines -> Counter of canonical frames."""
    counts = Counter()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith('#'):
            continue
        frame, sep, _ = line.partition('\t')
        if not sep or not frame.strip():
            raise DataError('line %d: expected frame<TAB>sentence' % lineno)
        counts[canonical_frame(frame)] += 1
    return counts


def cmd_entropy(args):
    _need(args, 'word')
    if not args.sample:
        raise UsageError('at least one --sample label=path is required')
    samples = {}
    for spec in args.sample:
        label, sep, path = spec.partition('=')
        if not sep or not label or not path:
            raise UsageError('--sample takes label=path, got %r' % spec)
        try:
            samples[label] = read_marked_sample(_read_text(path))
        except DataError as e:
            raise DataError('%s: %s' % (path, e))
        if not samples[label]:
            raise DataError('%s: no marked occurrences' % path)
    model_dist, alphabet = None, set()
    if args.model:
        _need(args, 'cat')
        model = _load_model(args.model)
        model_dist = frame_distribution(model, args.word, args.cat)
        for r in model.grammar.rules_by_lhs.get(args.cat, ()):
            alphabet.update(x.lower() for x in r.nonheads)
    mix = 0.05 if args.mix is None else args.mix
    try:
        rows = entropy_rows(args.word, samples, model_dist, alphabet, mix)
    except SupportError as e:
        raise DataError('support violation: %s' % e)
    except ValueError as e:
        raise DataError(str(e))
    _write(args.out, format_entropy_report(rows))
    if args.plot:
        from .plotting import plot_entropy
        plot_entropy(rows, args.plot)
    return 0


def cmd_split(args):
    """Seeded dev/test halves of a word list."""
    _need(args, 'words', 'dev', 'test')
    words = sorted(set(_word_list(args.words)))
    random.Random(args.seed).shuffle(words)
    k = len(words) // 2
    _write(args.dev, ''.join(w + '\n' for w in sorted(words[:k])))
    _write(args.test, ''.join(w + '\n' for w in sorted(words[k:])))
    return 0


def cmd_synth(args):
    from .synthkit import (GeneratorSpec, corpus_text, frames_grammar,
                           frames_model, generate, trees_text)
    _need(args, 'out')
    g = frames_grammar(n_verbs=args.verbs, attach_pp=not args.no_attach,
                       coordinate=args.coordinate)
    truth = frames_model(g, random.Random(args.seed))
    samples = generate(GeneratorSpec(g, truth, args.sentences,
                                     seed=args.seed))
    _write(args.out, corpus_text(samples))
    if args.grammar_out:
        _write(args.grammar_out, dump_grammar(g))
    if args.trees:
        _write(args.trees, trees_text(samples))
    if args.truth:
        save_model(truth, args.truth)
    return 0


# -- argument parsing ---------------------------------------------------------------

def build_parser():
    # SUPPRESS keeps a subcommand from resetting a global flag given earlier
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument('--config', help='flat key=value file')
    common.add_argument('--seed', type=int)
    common.add_argument('--workers', type=int)
    common.add_argument('--verbose', '-v', action='store_true')

    p = _Parser(prog='lexpcfg', parents=[common],
                description='Head-lexicalized PCFG estimation, parsing and '
                'subcategorization frame evaluation.')
    sub = p.add_subparsers(dest='command', parser_class=_Parser)

    c = sub.add_parser('compile', parents=[common],
                       help='validate a grammar and dump it')
    c.add_argument('grammar')
    c.add_argument('--emit-state-rules', metavar='CATS',
                   help='comma separated phrasal categories')
    c.add_argument('--out', '-o')
    c.set_defaults(func=cmd_compile)

    t = sub.add_parser('train', parents=[common],
                       help='estimate a model with incremental EM')
    t.add_argument('--grammar', '-g')
    t.add_argument('--corpus', '-c')
    t.add_argument('--out', '-o', help='model file')
    t.add_argument('--telemetry', help='tab-separated log (default stdout)')
    t.add_argument('--plot', help='log-likelihood figure')
    t.add_argument('--segment-size', type=int)
    t.add_argument('--iterations', type=int)
    t.add_argument('--heldout', type=float,
                   help='fraction held out to fit smoothing weights')
    t.add_argument('--no-bootstrap', action='store_true')
    t.add_argument('--classical', action='store_true',
                   help='one segment, smoothing switched off')
    t.add_argument('--lambdas')
    t.add_argument('--bucket-bounds')
    t.add_argument('--discount', help='number or "auto"')
    t.add_argument('--backbone-floor', type=float)
    t.set_defaults(func=cmd_train)

    q = sub.add_parser('parse', parents=[common], help='decode sentences')
    q.add_argument('--model', '-m')
    q.add_argument('--corpus', '-c')
    q.add_argument('--grammar', '-g', help='check against this grammar')
    q.add_argument('--mode', choices=('viterbi', 'summax', 'forest-stats'))
    q.add_argument('--out', '-o')
    q.set_defaults(func=cmd_parse)

    f = sub.add_parser('frames', parents=[common],
                       help='frame distributions or lexicon evaluation')
    f.add_argument('--model', '-m')
    f.add_argument('--cat')
    f.add_argument('--word')
    f.add_argument('--words', help='file of words')
    f.add_argument('--eval', nargs=4, metavar=('GOLD', 'MAP', 'DEV', 'TEST'))
    f.add_argument('--min-freq', type=float)
    f.add_argument('--out', '-o')
    f.add_argument('--plot')
    f.set_defaults(func=cmd_frames)

    e = sub.add_parser('entropy', parents=[common],
                       help='entropy and divergence of marked samples')
    e.add_argument('--sample', action='append', metavar='LABEL=PATH')
    e.add_argument('--word')
    e.add_argument('--model', '-m')
    e.add_argument('--cat')
    e.add_argument('--mix', type=float)
    e.add_argument('--out', '-o')
    e.add_argument('--plot')
    e.set_defaults(func=cmd_entropy)

    s = sub.add_parser('split', parents=[common],
                       help='seeded dev/test halves of a word list')
    s.add_argument('--words')
    s.add_argument('--dev')
    s.add_argument('--test')
    s.set_defaults(func=cmd_split)

    y = sub.add_parser('synth', parents=[common])
    y.add_argument('--sentences', type=int, default=1000)
    y.add_argument('--verbs', type=int, default=5)
    y.add_argument('--no-attach', action='store_true')
    y.add_argument('--coordinate', action='store_true')
    y.add_argument('--out', '-o')
    y.add_argument('--grammar-out')
    y.add_argument('--trees')
    y.add_argument('--truth')
    y.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # --help and argparse errors; hand the code back to the caller
        return e.code
    if not getattr(args, 'command', None):
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    try:
        if getattr(args, 'config', None):
            _apply_config(args, read_config(args.config))
        else:
            _apply_config(args, {})
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format='%(levelname)s %(name)s: %(message)s', stream=sys.stderr)
        if args.workers < 1:
            raise UsageError('--workers must be positive')
        return args.func(args)
    except UsageError as e:
        print('lexpcfg: %s' % e, file=sys.stderr)
        return USAGE_ERROR
    except DataError as e:
        print('lexpcfg: %s' % e, file=sys.stderr)
        return DATA_ERROR
    except BrokenPipeError:
        # reader went away (e.g. piped into head); stop quietly
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 0


if __name__ == '__main__':
    sys.exit(main())
