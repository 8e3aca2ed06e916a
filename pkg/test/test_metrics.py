# -*- encoding: utf-8 -*-
from __future__ import print_function, unicode_literals

import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))
import helpers  # noqa: F401  (puts src/ on the path)

from readrank._metrics import (METRIC_KEYS, accuracy, adjacent_accuracy,
                               average_reports, evaluate, qwk, weighted_prf)


def brute_qwk(preds, truths, n_grades):
    observed = [[0.0] * n_grades for _ in range(n_grades)]
    for p, t in zip(preds, truths):
        observed[t - 1][p - 1] += 1
    total = float(len(preds))
    rows = [sum(r) for r in observed]
    cols = [sum(observed[i][j] for i in range(n_grades))
            for j in range(n_grades)]
    num = den = 0.0
    for i in range(n_grades):
        for j in range(n_grades):
            w = (i - j) ** 2 / float((n_grades - 1) ** 2)
            num += w * observed[i][j]
            den += w * rows[i] * cols[j] / total
    return 1.0 if den == 0 else 1.0 - num / den


def brute_weighted_precision(preds, truths, n_grades):
    out = 0.0
    for g in range(1, n_grades + 1):
        support = sum(t == g for t in truths)
        predicted = sum(p == g for p in preds)
        hits = sum(p == g and t == g for p, t in zip(preds, truths))
        precision = hits / float(predicted) if predicted else 0.0
        out += precision * support
    return out / len(truths)


class TestAccuracy(unittest.TestCase):

    def test_examples(self):
        self.assertEqual(accuracy([1, 2, 3], [1, 2, 3]), 1.0)
        self.assertAlmostEqual(accuracy([1, 2, 3], [1, 3, 1]), 1 / 3.0)
        self.assertEqual(accuracy([1, 1], [2, 2]), 0.0)

    def test_adjacent(self):
        self.assertAlmostEqual(adjacent_accuracy([1, 2, 3], [1, 3, 1]),
                               2 / 3.0)
        self.assertEqual(adjacent_accuracy([2, 3, 4], [1, 2, 3]), 1.0)
        self.assertEqual(adjacent_accuracy([3, 4, 5], [1, 2, 3]), 0.0)

    def test_length_mismatch(self):
        with self.assertRaises(ValueError):
            accuracy([1, 2], [1])
        with self.assertRaises(ValueError):
            accuracy([], [])


class TestWeightedPRF(unittest.TestCase):

    def test_perfect(self):
        self.assertEqual(weighted_prf([1, 2, 3], [1, 2, 3]), (1.0, 1.0, 1.0))

    def test_never_predicted_class(self):
        p, r, _ = weighted_prf([1, 1], [1, 2], 2)
        self.assertAlmostEqual(p, 0.25)
        self.assertAlmostEqual(r, 0.5)

    def test_mixed_supports(self):
        p, r, f1 = weighted_prf([1, 1, 2], [1, 2, 2], 2)
        self.assertAlmostEqual(p, (0.5 * 1 + 1.0 * 2) / 3)
        self.assertAlmostEqual(r, 2 / 3.0)
        self.assertAlmostEqual(f1, (2 / 3.0 * 1 + 2 / 3.0 * 2) / 3)


class TestQWK(unittest.TestCase):

    def test_perfect(self):
        self.assertEqual(qwk([1, 2, 3, 3], [1, 2, 3, 3], 3), 1.0)

    def test_swapped(self):
        self.assertAlmostEqual(qwk([2, 1], [1, 2], 2), -1.0)

    def test_half(self):
        self.assertAlmostEqual(qwk([1, 1, 2, 1], [1, 1, 2, 2], 2), 0.5)

    def test_no_expected_disagreement(self):
        self.assertEqual(qwk([2, 2], [2, 2], 3), 1.0)

    def test_shift_invariance(self):
        preds, truths = [1, 2, 2, 3], [1, 3, 2, 2]
        self.assertAlmostEqual(qwk(preds, truths, 4),
                               qwk([p + 1 for p in preds],
                                   [t + 1 for t in truths], 4))


class TestRandomOracle(unittest.TestCase):
    """Every metric against plain-Python reimplementations on random
    prediction sets."""

    def test_against_brute_force(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            n_grades = int(rng.integers(2, 7))
            size = int(rng.integers(1, 201))
            truths = rng.integers(1, n_grades + 1, size=size).tolist()
            preds = rng.integers(1, n_grades + 1, size=size).tolist()
            hits = sum(p == t for p, t in zip(preds, truths))
            near = sum(abs(p - t) <= 1 for p, t in zip(preds, truths))
            self.assertAlmostEqual(accuracy(preds, truths), hits / size,
                                   delta=1e-12)
            self.assertAlmostEqual(adjacent_accuracy(preds, truths),
                                   near / size, delta=1e-12)
            p, r, _ = weighted_prf(preds, truths, n_grades)
            self.assertAlmostEqual(
                p, brute_weighted_precision(preds, truths, n_grades),
                delta=1e-12)
            # support-weighted recall is plain accuracy
            self.assertAlmostEqual(r, hits / size, delta=1e-12)
            self.assertAlmostEqual(qwk(preds, truths, n_grades),
                                   brute_qwk(preds, truths, n_grades),
                                   delta=1e-12)


class TestEvaluate(unittest.TestCase):

    def test_report(self):
        report = evaluate([1, 2, 2, 3], [1, 2, 3, 3], 3)
        self.assertEqual(set(report.metrics()), set(METRIC_KEYS))
        self.assertEqual(report.confusion, [[1, 0, 0], [0, 1, 0], [0, 1, 1]])
        self.assertEqual([sum(row) for row in report.confusion], [1, 1, 2])
        self.assertEqual(report.n, 4)
        self.assertGreaterEqual(report.adj_acc, report.acc)
        self.assertAlmostEqual(report.recall_weighted, report.acc)

    def test_average(self):
        one = evaluate([1, 2], [1, 2], 2)
        two = evaluate([2, 1], [1, 2], 2)
        mean = average_reports([one, two])
        self.assertEqual(mean['repeats'], 2)
        self.assertAlmostEqual(mean['mean_acc'], 0.5)
        self.assertAlmostEqual(mean['mean_qwk'], 0.0)
        self.assertEqual(len(mean['runs']), 2)


if __name__ == '__main__':
    unittest.main()
