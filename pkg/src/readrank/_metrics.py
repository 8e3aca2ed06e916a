# -*- encoding: utf-8 -*-
# readrank: bidirectional long-document readability assessment.
# readrank/_metrics.py
#
# BSD License applies; see the LICENSE file, or
# http://opensource.org/licenses/BSD-2-Clause
"""Evaluation metrics over 1-based grade predictions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

METRIC_KEYS = ('acc', 'adj_acc', 'f1_weighted', 'precision_weighted',
               'recall_weighted', 'qwk')


def _pair(preds, truths):
    preds, truths = np.asarray(preds), np.asarray(truths)
    if preds.shape != truths.shape or preds.ndim != 1:
        raise ValueError('preds and truths must be equal-length lists')
    if not len(preds):
        raise ValueError('no predictions to score')
    return preds, truths


def accuracy(preds, truths):
    """
    >>> accuracy([1, 2, 3], [1, 3, 1])
    0.3333333333333333
    """
    preds, truths = _pair(preds, truths)
    return float(np.mean(preds == truths))


def adjacent_accuracy(preds, truths):
    """Fraction of predictions at most one grade off.

    >>> adjacent_accuracy([1, 2, 3], [1, 3, 1])
    0.6666666666666666
    """
    preds, truths = _pair(preds, truths)
    return float(np.mean(np.abs(preds - truths) <= 1))


def weighted_prf(preds, truths, n_grades=None):
    """Support-weighted precision, recall and F1; classes never predicted
    contribute 0 precision."""
    preds, truths = _pair(preds, truths)
    if n_grades is None:
        labels = np.unique(np.concatenate([preds, truths]))
    else:
        labels = np.arange(1, n_grades + 1)
    p, r, f1, _ = precision_recall_fscore_support(
        truths, preds, labels=labels, average='weighted', zero_division=0)
    return float(p), float(r), float(f1)


def qwk(preds, truths, n_grades):
    """Quadratic weighted kappa; 1.0 when no disagreement is expected.

    >>> qwk([2, 1], [1, 2], 2)
    -1.0
    """
    preds, truths = _pair(preds, truths)
    labels = np.arange(1, n_grades + 1)
    observed = confusion_matrix(truths, preds, labels=labels).astype(float)
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0))
    expected /= observed.sum()
    grid = np.arange(n_grades)
    weights = (grid[:, None] - grid[None, :]) ** 2 / (n_grades - 1) ** 2
    denominator = float((weights * expected).sum())
    if denominator == 0.0:
        return 1.0
    return 1.0 - float((weights * observed).sum()) / denominator


@dataclass
class EvalReport:
    acc: float
    adj_acc: float
    f1_weighted: float
    precision_weighted: float
    recall_weighted: float
    qwk: float
    confusion: List[List[int]] = field(default_factory=list)
    n: int = 0

    def metrics(self):
        return {key: getattr(self, key) for key in METRIC_KEYS}

    def to_json(self):
        out = self.metrics()
        out['confusion'] = self.confusion
        out['n'] = self.n
        return out


def evaluate(preds, truths, n_grades):
    """All six metrics plus the confusion matrix (rows are truths)."""
    p, r, f1 = weighted_prf(preds, truths, n_grades)
    labels = np.arange(1, n_grades + 1)
    return EvalReport(
        acc=accuracy(preds, truths),
        adj_acc=adjacent_accuracy(preds, truths),
        f1_weighted=f1, precision_weighted=p, recall_weighted=r,
        qwk=qwk(preds, truths, n_grades),
        confusion=confusion_matrix(truths, preds, labels=labels).tolist(),
        n=len(truths))


def average_reports(reports):
    """Per-run metrics and their means, for repeated-seed evaluation."""
    if not reports:
        raise ValueError('no reports to average')
    runs = [r.to_json() for r in reports]
    mean = {'mean_' + key: float(np.mean([getattr(r, key) for r in reports]))
            for key in METRIC_KEYS}
    mean['runs'] = runs
    mean['repeats'] = len(reports)
    return mean
