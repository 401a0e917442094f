"""Figures written next to the tab-separated reports.

Everything renders through the Agg backend straight to files, so the
commands work headless.
"""
from __future__ import annotations

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ['STYLE', 'plot_training', 'plot_frame_distribution',
           'plot_precision_recall', 'plot_entropy']

STYLE = {
    'font.size': 9,
    'axes.titlesize': 10,
    'axes.labelsize': 9,
    'axes.spines.top': False,
    'axes.spines.right': False,
    'legend.frameon': False,
    'xtick.direction': 'out',
    'ytick.direction': 'out',
    'savefig.dpi': 150,
    'savefig.bbox': 'tight',
}


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_training(rows, path):
    """Per-segment log-likelihood per token, one line per phase."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        step = 0
        xs, ys, phases = [], [], []
        for r in rows:
            step += 1
            xs.append(step)
            ys.append(r['loglik'] / max(r['tokens'], 1))
            phases.append(r['phase'])
        for phase, marker in (('bootstrap', 's'), ('incremental', 'o')):
            pts = [(x, y) for x, y, p in zip(xs, ys, phases) if p == phase]
            if pts:
                ax.plot(*zip(*pts), marker=marker, ms=3, lw=1, label=phase)
        ax.set_xlabel('segment update')
        ax.set_ylabel('log-likelihood / token')
        if xs:
            ax.legend()
        return _save(fig, path)


def plot_frame_distribution(dist, path, title=None):
    """Bar chart of one head's frame probabilities."""
    probs = dist.probs if hasattr(dist, 'probs') else dist
    frames = sorted(probs, key=lambda f: -probs[f])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(3, 0.6 * len(frames) + 1), 3))
        ax.bar(range(len(frames)), [probs[f] for f in frames], color='0.4')
        ax.set_xticks(range(len(frames)))
        ax.set_xticklabels(frames, rotation=45, ha='right')
        ax.set_ylabel('probability')
        ax.set_ylim(0, 1)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_precision_recall(per_frame, path):
    """Paired precision/recall bars per frame; undefined values are left out."""
    frames = sorted(per_frame)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4, 0.7 * len(frames) + 1), 3))
        w = 0.4
        for off, attr, shade in ((-w / 2, 'precision', '0.25'),
                                 (w / 2, 'recall', '0.65')):
            vals = [getattr(per_frame[f], attr) for f in frames]
            idx = [i for i, v in enumerate(vals) if v is not None]
            ax.bar([i + off for i in idx], [vals[i] for i in idx], w,
                   color=shade, label=attr)
        ax.set_xticks(range(len(frames)))
        ax.set_xticklabels(frames, rotation=45, ha='right')
        ax.set_ylim(0, 1.05)
        ax.legend(loc='lower right')
        return _save(fig, path)


def plot_entropy(rows, path):
    """Entropy per (head, genre) with the divergences alongside."""
    labels = ['%s/%s' % (r.head, r.label) for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4, 0.8 * len(rows) + 1), 3))
        w = 0.27
        series = (('H', 'entropy', '0.2'), ('D other', 'd_other', '0.5'),
                  ('D model', 'd_model', '0.8'))
        for k, (name, attr, shade) in enumerate(series):
            vals = [getattr(r, attr) for r in rows]
            idx = [i for i, v in enumerate(vals) if v is not None]
            if idx:
                ax.bar([i + (k - 1) * w for i in idx], [vals[i] for i in idx],
                       w, color=shade, label=name)
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels(labels, rotation=45, ha='right')
        ax.set_ylabel('bits')
        ax.legend()
        return _save(fig, path)
