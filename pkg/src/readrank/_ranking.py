# -*- encoding: utf-8 -*-
# readrank: bidirectional long-document readability assessment.
# readrank/_ranking.py
#
# BSD License applies; see the LICENSE file, or
# http://opensource.org/licenses/BSD-2-Clause
"""Heads mapping document vectors to grades.

The ranking head learns grade *differences* between pairs of documents:
training documents are dealt into subsets holding one document of every
grade, every ordered pair inside a subset becomes a training example
labeled ``grade(a) - grade(b)``, and a test document is graded by
pairing it with reference documents of known grade and taking a hard
vote over the implied grades.

The ordinal (cumulative link) and plain classification heads share one
training loop and serve as comparisons.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ._encoder import init_parameters
from ._mdem import batches, make_optimizer
from ._util import ConfigError, DataError, PROB_FLOOR

logger = logging.getLogger(__name__)

BACKBONES = ('dsdr', 'hhnn')


@dataclass
class RankingConfig:
    """``n_reference`` is the number of training subsets each test
    document is compared against."""
    n_reference: int = 10
    backbone: str = 'dsdr'
    finetune_backbone: bool = False
    epochs: int = 30

    def __post_init__(self):
        if self.n_reference < 1:
            raise ConfigError('ranking.n_reference must be at least 1')
        if self.epochs < 1:
            raise ConfigError('ranking.epochs must be positive')
        if self.backbone not in BACKBONES:
            raise ConfigError('ranking.backbone must be one of {}'.format(
                BACKBONES))

    def to_json(self):
        return asdict(self)


@dataclass(frozen=True)
class DataSubset:
    """One training document per grade; ``members[g - 1]`` indexes the
    document of grade ``g``."""
    members: Tuple[int, ...]

    @property
    def n_grades(self):
        return len(self.members)

    def grade_of(self, position):
        return position + 1


@dataclass
class PairExample:
    a: int
    b: int
    vec_a: torch.Tensor
    vec_b: torch.Tensor
    diff_label: int


@dataclass
class VoteRecord:
    counts: Dict[int, int] = field(default_factory=dict)
    winner: int = 0

    def to_json(self):
        return {str(grade): count for grade, count in
                sorted(self.counts.items())}


# ----------------------------------------------------------------------
# Subsets and pairs

def build_subsets(grades, n_grades, seed=0):
    """Deal training documents into subsets of one document per grade.

    ``grades[i]`` is the grade of training document ``i``.  There are as
    many subsets as the most populous grade has documents; every grade's
    documents are shuffled and dealt in order, and grades with fewer
    documents are topped up by resampling with replacement.

    >>> len(build_subsets([1, 2, 2, 2, 1], 2, seed=0))
    3
    """
    grades = np.asarray(grades)
    rng = np.random.default_rng(seed)
    by_grade = [np.flatnonzero(grades == g) for g in range(1, n_grades + 1)]
    missing = [g for g, idx in enumerate(by_grade, 1) if not len(idx)]
    if missing:
        raise DataError('no training document of grade {}'.format(
            ', '.join(map(str, missing))))
    count = max(len(idx) for idx in by_grade)
    columns = []
    for idx in by_grade:
        column = rng.permutation(idx)
        if len(column) < count:
            fill = rng.choice(idx, size=count - len(column), replace=True)
            column = np.concatenate([column, fill])
        columns.append(column)
    return [DataSubset(tuple(int(col[s]) for col in columns))
            for s in range(count)]


def diff_to_class(diff, n_grades):
    """Class index of a grade difference: ``-(Y-1) .. Y-1`` maps to
    ``0 .. 2Y-2``."""
    return diff + n_grades - 1


def class_to_diff(index, n_grades):
    return index - (n_grades - 1)


def ordered_pairs(n_grades):
    """Positions ``(i, j)``, ``i != j``, of every ordered pair inside a
    subset.

    >>> ordered_pairs(3)
    [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]
    """
    return [(i, j) for i in range(n_grades) for j in range(n_grades)
            if i != j]


def make_pairs(subset, doc_vectors):
    """Every ordered pair of distinct subset members, labeled with the
    difference of their grades."""
    pairs = []
    for i, j in ordered_pairs(subset.n_grades):
        a, b = subset.members[i], subset.members[j]
        pairs.append(PairExample(a=a, b=b, vec_a=doc_vectors[a],
                                 vec_b=doc_vectors[b],
                                 diff_label=subset.grade_of(i)
                                 - subset.grade_of(j)))
    return pairs


def pair_targets(n_grades):
    """Left positions, right positions and difference classes of all
    ordered pairs of a subset, as tensors."""
    pairs = ordered_pairs(n_grades)
    left = torch.tensor([i for i, _ in pairs])
    right = torch.tensor([j for _, j in pairs])
    return left, right, diff_to_class(left - right, n_grades)


# ----------------------------------------------------------------------
# The ranking head

def pair_logits(vec_a, vec_b, linear):
    """Difference-class logits ``W [a; b] + c`` for one pair or a batch
    of pairs."""
    if vec_a.shape[-1] + vec_b.shape[-1] != linear.in_features:
        raise ValueError('pair width {} + {} does not match head width {}'
                         .format(vec_a.shape[-1], vec_b.shape[-1],
                                 linear.in_features))
    return linear(torch.cat([vec_a, vec_b], dim=-1))


class RankingHead(nn.Module):

    def __init__(self, d, n_grades):
        super().__init__()
        self.n_grades = n_grades
        self.linear = nn.Linear(2 * d, 2 * n_grades - 1)

    def forward(self, vec_a, vec_b):
        return pair_logits(vec_a, vec_b, self.linear)


def build_ranking_head(d, n_grades, seed=0):
    torch.manual_seed(seed)
    head = RankingHead(d, n_grades)
    init_parameters(head)
    return head


def train_ranking(head, subsets, doc_vectors, cfg, epochs, encode=None,
                  extra_params=()):
    """Train ``head`` with one subset's ``Y(Y-1)`` pairs per batch.

    ``doc_vectors`` (``N × d``) are used as fixed inputs.  To fine-tune
    the backbone instead, pass ``encode(members) -> Y × d`` computing the
    member vectors with gradients, and the backbone parameters as
    ``extra_params``.  Returns one row per epoch.
    """
    if not subsets:
        raise DataError('no ranking subsets to train on')
    n_grades = head.n_grades
    left, right, targets = pair_targets(n_grades)
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    optimizer = make_optimizer(list(head.parameters()) + list(extra_params),
                               cfg)
    history = []
    for epoch in range(1, epochs + 1):
        head.train()
        total, correct = 0.0, 0
        for (position,) in batches(len(subsets), 1, rng):
            members = list(subsets[position].members)
            if encode is not None:
                vectors = encode(members)
            else:
                vectors = doc_vectors[torch.tensor(members)].detach()
            optimizer.zero_grad()
            logits = head(vectors[left], vectors[right])
            loss = F.cross_entropy(logits, targets)
            loss.backward()
            optimizer.step()
            total += float(loss)
            correct += int((logits.argmax(-1) == targets).sum())
        row = {'epoch': epoch, 'loss': total / len(subsets),
               'pair_acc': correct / (len(subsets) * len(targets))}
        history.append(row)
        logger.info('ranking epoch %d: loss=%.4f pair_acc=%.3f', epoch,
                    row['loss'], row['pair_acc'])
    return history


def sample_reference_subsets(subsets, n_reference, seed=0):
    """Pick ``n_reference`` subsets deterministically; without
    replacement when enough exist."""
    rng = np.random.default_rng(seed)
    replace = n_reference > len(subsets)
    chosen = rng.choice(len(subsets), size=n_reference, replace=replace)
    return [subsets[int(i)] for i in chosen]


def hard_vote(candidates):
    """Most frequent candidate grade; ties go to the lowest grade.

    >>> hard_vote([3, 2, 3, 2]).winner
    2
    """
    counts = Counter(int(c) for c in candidates)
    if not counts:
        raise ValueError('no candidates to vote on')
    best = max(counts.values())
    winner = min(g for g, c in counts.items() if c == best)
    return VoteRecord(counts=dict(sorted(counts.items())), winner=winner)


@torch.no_grad()
def infer_grade(test_vec, reference_subsets, ref_vectors, head):
    """Grade ``test_vec`` by pairing it (in the left slot) with every
    member of every reference subset.  Returns ``(grade, VoteRecord)``."""
    n_grades = head.n_grades
    members = [m for s in reference_subsets for m in s.members]
    ref_grades = torch.tensor([s.grade_of(p) for s in reference_subsets
                               for p in range(s.n_grades)])
    refs = ref_vectors[torch.tensor(members)]
    logits = head(test_vec.expand(len(members), -1), refs)
    diffs = class_to_diff(logits.argmax(dim=-1), n_grades)
    candidates = torch.clamp(ref_grades + diffs, 1, n_grades)
    vote = hard_vote(candidates.tolist())
    return vote.winner, vote


def rank_documents(head, test_vectors, reference_subsets, ref_vectors):
    """``infer_grade`` for every row of ``test_vectors``; returns the
    predicted grades and the vote records."""
    head.eval()
    grades, votes = [], []
    for vec in test_vectors:
        grade, vote = infer_grade(vec, reference_subsets, ref_vectors, head)
        grades.append(grade)
        votes.append(vote)
    return grades, votes


# ----------------------------------------------------------------------
# Ordinal and classification heads

def interval_probs(score, thresholds):
    """``P(y = k) = σ(θ_k - s) - σ(θ_{k-1} - s)`` for ``k = 1..Y`` with
    ``σ(θ_0 - s) = 0`` and ``σ(θ_Y - s) = 1``.  ``score`` has shape
    ``B``; the result ``B × Y``."""
    cumulative = torch.sigmoid(thresholds[None, :] - score[:, None])
    low = cumulative.new_zeros(len(score), 1)
    high = cumulative.new_ones(len(score), 1)
    cumulative = torch.cat([low, cumulative, high], dim=1)
    return cumulative[:, 1:] - cumulative[:, :-1]


def ordinal_loss(score, grades, thresholds):
    """Mean negative log interval probability of the 1-based ``grades``,
    with the probability clamped at 1e-12."""
    probs = interval_probs(score, thresholds)
    true = probs.gather(1, (grades - 1)[:, None]).squeeze(1)
    return -torch.log(torch.clamp(true, min=PROB_FLOOR)).mean()


def predict_ordinal(score, thresholds):
    """``1 + #{k : θ_k < s}``.

    >>> predict_ordinal(torch.tensor([-1.0, 0.5, 2.0]),
    ...                 torch.tensor([0.0, 1.0])).tolist()
    [1, 2, 3]
    """
    return 1 + (thresholds[None, :] < score[:, None]).sum(dim=1)


class OrdinalHead(nn.Module):
    """Scalar score plus ``Y - 1`` increasing thresholds built from a
    first threshold and softplus increments."""

    def __init__(self, d, n_grades):
        super().__init__()
        self.n_grades = n_grades
        self.score = nn.Linear(d, 1)
        self.first = nn.Parameter(torch.zeros(1))
        self.increments = nn.Parameter(torch.zeros(n_grades - 2))

    def thresholds(self):
        steps = F.softplus(self.increments)
        return torch.cat([self.first,
                          self.first + torch.cumsum(steps, dim=0)])

    def forward(self, vectors):
        return self.score(vectors).squeeze(-1)

    def loss(self, vectors, grades):
        return ordinal_loss(self(vectors), grades, self.thresholds())

    def predict(self, vectors):
        return predict_ordinal(self(vectors), self.thresholds())

    def probs(self, vectors):
        return interval_probs(self(vectors), self.thresholds())


class ClassificationHead(nn.Module):

    def __init__(self, d, n_grades):
        super().__init__()
        self.n_grades = n_grades
        self.linear = nn.Linear(d, n_grades)

    def forward(self, vectors):
        return self.linear(vectors)

    def loss(self, vectors, grades):
        return F.cross_entropy(self(vectors), grades - 1)

    def predict(self, vectors):
        return self(vectors).argmax(dim=-1) + 1

    def probs(self, vectors):
        return torch.softmax(self(vectors), dim=-1)


HEADS = {'cls': ClassificationHead, 'ordinal': OrdinalHead}


def build_head(kind, d, n_grades, seed=0):
    if kind == 'ranking':
        return build_ranking_head(d, n_grades, seed)
    if kind not in HEADS:
        raise ConfigError('unknown head {!r}'.format(kind))
    torch.manual_seed(seed)
    head = HEADS[kind](d, n_grades)
    init_parameters(head)
    return head


def train_head(head, doc_vectors, grades, cfg, epochs):
    """Minibatch training of a classification or ordinal head on fixed
    document vectors and 1-based ``grades``."""
    grades = torch.as_tensor(grades)
    doc_vectors = doc_vectors.detach()
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    optimizer = make_optimizer(head.parameters(), cfg)
    history = []
    for epoch in range(1, epochs + 1):
        head.train()
        total = 0.0
        for index in batches(len(grades), cfg.batch_size, rng):
            index = torch.as_tensor(index)
            optimizer.zero_grad()
            loss = head.loss(doc_vectors[index], grades[index])
            loss.backward()
            optimizer.step()
            total += float(loss) * len(index)
        with torch.no_grad():
            acc = float((head.predict(doc_vectors) == grades).double().mean())
        history.append({'epoch': epoch, 'loss': total / len(grades),
                        'train_acc': acc})
        logger.info('%s head epoch %d: loss=%.4f acc=%.3f',
                    type(head).__name__, epoch, total / len(grades), acc)
    return history


@torch.no_grad()
def predict_head(head, doc_vectors) -> List[int]:
    head.eval()
    return head.predict(doc_vectors).tolist()
