# -*- encoding: utf-8 -*-
# readrank: bidirectional long-document readability assessment.
# readrank/_mdem.py
#
# BSD License applies; see the LICENSE file, or
# http://opensource.org/licenses/BSD-2-Clause
"""Hybrid training of the hierarchical encoder and distillation of
sentence-level difficulty labels.

The supervised branch classifies documents.  The reverse branch scores
every sentence against every grade through the multi-head difficulty
embedding matrix (:py:class:`MDEM`), pools those scores with the
document attention, and is pulled towards the supervised prediction by a
KL consistency loss.  Training signal annealing, confidence masking and
sharpening regulate the two branches.  Once trained, the per-sentence
scores are the sentence labels.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ._corpus import to_batch
from ._encoder import build_encoder, init_parameters
from ._util import (ConfigError, DataError, NumericalError, PROB_FLOOR,
                    first_argmax, iter_jsonl, write_jsonl)

logger = logging.getLogger(__name__)

TSA_SCHEDULES = ('linear',)


@dataclass
class TrainConfig:
    """Optimization settings shared by every trainable stage."""
    lam: float = 1.0
    lr: float = 1e-3
    weight_decay: float = 5e-4
    epochs: int = 30
    batch_size: int = 16
    tsa_schedule: str = 'linear'
    beta: float = 0.45
    tau: float = 0.85
    min_confidence: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError('train.lam must be non-negative')
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError('train.tau must lie in (0, 1]')
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError('train.beta must lie in [0, 1]')
        if not 0.0 <= self.min_confidence <= 1.0:
            raise ConfigError('train.min_confidence must lie in [0, 1]')
        if self.lr <= 0 or self.weight_decay < 0:
            raise ConfigError('train.lr must be positive and '
                              'train.weight_decay non-negative')
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError('train.epochs and train.batch_size must be '
                              'positive')
        if self.tsa_schedule not in TSA_SCHEDULES:
            raise ConfigError('train.tsa_schedule must be one of {}'.format(
                TSA_SCHEDULES))

    def to_json(self):
        return asdict(self)


@dataclass
class SentenceRecord:
    doc_id: str
    index: int
    tokens: List[str]
    label: int
    confidence: float

    def to_json(self):
        return {'doc_id': self.doc_id, 'index': self.index,
                'tokens': self.tokens, 'label': self.label,
                'confidence': self.confidence}


@dataclass
class LossBreakdown:
    sup: torch.Tensor
    unsup: torch.Tensor
    total: torch.Tensor
    eta: float
    sup_kept: int
    unsup_kept: int

    def as_floats(self):
        return {'L_sup': float(self.sup), 'L_unsup': float(self.unsup),
                'L': float(self.total), 'eta': self.eta,
                'sup_kept': self.sup_kept, 'unsup_kept': self.unsup_kept}


class MDEM(nn.Module):
    """Multi-head difficulty embedding matrix ``M`` of shape
    ``n_heads × (d / n_heads) × n_grades``."""

    def __init__(self, d, n_heads, n_grades):
        super().__init__()
        if d % n_heads:
            raise ValueError('d must be divisible by n_heads')
        self.n_heads = n_heads
        self.matrix = nn.Parameter(torch.empty(n_heads, d // n_heads,
                                               n_grades))
        nn.init.xavier_uniform_(self.matrix)

    def forward(self, sentence_reps):
        return sentence_scores(sentence_reps, self.matrix)


def sentence_scores(sentence_reps, matrix):
    """Score every sentence against every grade.

    ``sentence_reps`` (``B × n × d``, or ``n × d``) is split into
    ``h`` heads of width ``z``; head ``i`` is multiplied by ``M[i]`` and
    the head results are summed, giving ``B × n × Y``.
    """
    squeeze = sentence_reps.dim() == 2
    if squeeze:
        sentence_reps = sentence_reps[None]
    batch, n, d = sentence_reps.shape
    heads, z, _ = matrix.shape
    if heads * z != d:
        raise ValueError('MDEM expects width {} but sentences have {}'
                         .format(heads * z, d))
    split = sentence_reps.view(batch, n, heads, z)
    scores = torch.einsum('bnhz,hzy->bny', split, matrix)
    return scores[0] if squeeze else scores


def document_score_from_sentences(scores, doc_attention):
    """Pool sentence scores ``B × n × Y`` with the document attention
    ``B × n`` into document scores ``B × Y``."""
    return torch.einsum('bn,bny->by', doc_attention, scores)


# ----------------------------------------------------------------------
# Losses

def supervised_losses(probs, labels):
    """Per-example cross-entropy of probability rows against 0-based
    labels, with the true-class probability floored at 1e-12."""
    true_probs = probs.gather(1, labels[:, None]).squeeze(1)
    return -torch.log(torch.clamp(true_probs, min=PROB_FLOOR))


def supervised_loss(probs, labels):
    """Mean cross-entropy.

    >>> supervised_loss(torch.full((1, 4), 0.25), torch.tensor([2]))
    tensor(1.3863)
    """
    return supervised_losses(probs, labels).mean()


def consistency_losses(doc_scores, target):
    """Per-example ``KL(target ‖ softmax(doc_scores))``; ``target`` is
    used as given (callers detach it)."""
    log_q = F.log_softmax(doc_scores, dim=-1)
    return (torch.xlogy(target, target) - target * log_q).sum(dim=-1)


def consistency_loss(doc_scores, target, mask=None):
    """Mean KL consistency over the examples where ``mask`` is true
    (all examples by default); 0 when no example survives."""
    losses = consistency_losses(doc_scores, target)
    if mask is None:
        return losses.mean()
    return masked_mean(losses, mask)


def masked_mean(values, mask):
    kept = mask.to(values.dtype)
    if not bool(mask.any()):
        return (values * kept).sum()
    return (values * kept).sum() / kept.sum()


# ----------------------------------------------------------------------
# Training signal annealing, confidence masking, sharpening

def tsa_threshold(step, total_steps, n_grades, schedule='linear'):
    """Linear annealing threshold from ``1/Y`` at step 0 to 1 at the
    last step.

    >>> tsa_threshold(0, 10, 4), tsa_threshold(10, 10, 4)
    (0.25, 1.0)
    >>> tsa_threshold(5, 10, 4)
    0.625
    """
    if schedule not in TSA_SCHEDULES:
        raise ValueError('unknown TSA schedule {!r}'.format(schedule))
    if not 0 <= step <= total_steps:
        raise ValueError('step must lie in [0, total_steps]')
    progress = step / total_steps if total_steps else 1.0
    return progress * (1.0 - 1.0 / n_grades) + 1.0 / n_grades


def tsa_mask(true_probs, eta):
    """True for the examples still allowed to train: those whose
    true-class probability does not exceed ``eta``."""
    return true_probs <= eta


def apply_tsa_mask(losses, true_probs, eta):
    """Mean of ``losses`` over the examples :py:func:`tsa_mask` keeps;
    0 when none is kept."""
    return masked_mean(losses, tsa_mask(true_probs, eta))


def confidence_mask(probs, beta):
    """True where the largest probability reaches ``beta``."""
    return probs.max(dim=-1).values >= beta


def sharpen(probs, tau):
    """Raise ``probs`` to ``1/tau`` and renormalize, in log space.

    >>> sharpen(torch.tensor([[0.5, 0.5]]), 0.5)
    tensor([[0.5000, 0.5000]])
    """
    if not 0.0 < tau <= 1.0:
        raise ValueError('tau must lie in (0, 1]')
    if tau == 1.0:
        return probs
    return torch.softmax(torch.log(probs) / tau,
                         dim=-1)


# ----------------------------------------------------------------------
# The trainable model

class ReadabilityModel(nn.Module):
    """Hierarchical encoder plus the difficulty embedding matrix."""

    def __init__(self, encoder, mdem):
        super().__init__()
        self.encoder = encoder
        self.mdem = mdem

    @property
    def config(self):
        return self.encoder.config

    def forward(self, ids):
        out = self.encoder(ids)
        scores = self.mdem(out.sentence_reps)
        doc_scores = document_score_from_sentences(scores,
                                                   out.doc_attention)
        return out, scores, doc_scores


def build_model(config, vocab_size, seed=0):
    encoder = build_encoder(config, vocab_size, seed)
    mdem = MDEM(config.d, config.n_heads, config.n_grades)
    init_parameters(mdem)
    return ReadabilityModel(encoder, mdem)


def joint_loss(model, ids, labels, step, total_steps, cfg):
    """``L_sup`` (annealed) ``+ λ · L_unsup`` (confidence-masked,
    against sharpened supervised targets) for one batch."""
    out, _, doc_scores = model(ids)
    n_grades = out.doc_probs.shape[-1]
    eta = tsa_threshold(step, total_steps, n_grades, cfg.tsa_schedule)
    losses = supervised_losses(out.doc_probs, labels)
    true_probs = out.doc_probs.gather(1, labels[:, None]).squeeze(1)
    keep_sup = tsa_mask(true_probs.detach(), eta)
    sup = masked_mean(losses, keep_sup)
    target = sharpen(out.doc_probs.detach(), cfg.tau)
    keep_unsup = confidence_mask(out.doc_probs.detach(), cfg.beta)
    unsup = consistency_loss(doc_scores, target, keep_unsup)
    total = sup + cfg.lam * unsup
    return LossBreakdown(sup=sup, unsup=unsup, total=total, eta=eta,
                         sup_kept=int(keep_sup.sum()),
                         unsup_kept=int(keep_unsup.sum())), out


def make_optimizer(params, cfg):
    params = [p for p in params if p.requires_grad]
    if not params:
        raise ConfigError('nothing to train: every parameter is frozen')
    return torch.optim.Adam(params, lr=cfg.lr, weight_decay=cfg.weight_decay)


def joint_step(model, optimizer, ids, labels, step, total_steps, cfg):
    """One optimizer step on the joint objective.  Returns the loss
    breakdown and the encoder output of the forward pass."""
    model.train()
    optimizer.zero_grad()
    breakdown, out = joint_loss(model, ids, labels, step, total_steps, cfg)
    if not bool(torch.isfinite(breakdown.total)):
        raise NumericalError('non-finite loss at step {}: {}'.format(
            step, breakdown.as_floats()))
    breakdown.total.backward()
    optimizer.step()
    return breakdown, out


def batches(n_items, batch_size, rng):
    order = rng.permutation(n_items)
    for start in range(0, n_items, batch_size):
        yield order[start:start + batch_size]


def train_hhnn(model, train_docs, cfg, progress=False):
    """Train ``model`` on tokenized documents.  Returns one row per
    epoch: ``epoch, L_sup, L_unsup, L, train_acc, eta``."""
    if not train_docs:
        raise DataError('no training documents')
    rng = np.random.default_rng(cfg.seed)
    torch.manual_seed(cfg.seed)
    optimizer = make_optimizer(model.parameters(), cfg)
    steps_per_epoch = math.ceil(len(train_docs) / cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    history = []
    step = 0
    epochs = range(1, cfg.epochs + 1)
    if progress:
        from tqdm import tqdm
        epochs = tqdm(epochs, desc='train-hhnn', unit='epoch')
    for epoch in epochs:
        sums = {'L_sup': 0.0, 'L_unsup': 0.0, 'L': 0.0}
        correct = 0
        eta = 0.0
        for index in batches(len(train_docs), cfg.batch_size, rng):
            ids, labels = to_batch([train_docs[i] for i in index])
            breakdown, out = joint_step(model, optimizer, ids, labels,
                                        step, total_steps, cfg)
            for key, value in breakdown.as_floats().items():
                if key in sums:
                    sums[key] += value * len(index)
            correct += int((out.doc_probs.argmax(-1) == labels).sum())
            eta = breakdown.eta
            step += 1
        row = {'epoch': epoch, 'eta': eta,
               'train_acc': correct / len(train_docs)}
        row.update((k, v / len(train_docs)) for k, v in sums.items())
        history.append(row)
        logger.info('epoch %d: L_sup=%.4f L_unsup=%.4f L=%.4f acc=%.3f '
                    'eta=%.3f', epoch, row['L_sup'], row['L_unsup'],
                    row['L'], row['train_acc'], eta)
    return history


@torch.no_grad()
def predict_documents(model, docs, batch_size=64):
    """Class probabilities ``N × Y`` for tokenized documents."""
    model.eval()
    rows = []
    for start in range(0, len(docs), batch_size):
        ids, _ = to_batch(docs[start:start + batch_size])
        out, _, _ = model(ids)
        rows.append(out.doc_probs)
    return torch.cat(rows) if rows else torch.empty(0)


@torch.no_grad()
def document_vectors(model, docs, batch_size=64):
    """Encoder document vectors ``N × d``."""
    model.eval()
    rows = []
    for start in range(0, len(docs), batch_size):
        ids, _ = to_batch(docs[start:start + batch_size])
        rows.append(model.encoder(ids).doc_vector)
    return torch.cat(rows)


def records_from_scores(doc, scores, min_confidence=0.0):
    """Turn one document's sentence score rows (``n_max × Y``) into
    sentence records; ties go to the lowest grade."""
    probs = torch.softmax(scores[:doc.n_real], dim=-1).cpu().numpy()
    out = []
    for index, row in enumerate(probs):
        label = first_argmax(row)
        confidence = float(row[label])
        if confidence < min_confidence:
            continue
        out.append(SentenceRecord(doc_id=doc.id, index=index,
                                  tokens=list(doc.sentence_keys()[index]),
                                  label=label + 1, confidence=confidence))
    return out


@torch.no_grad()
def extract_sentence_labels(model, docs, min_confidence=0.0, batch_size=64):
    """Label every real sentence of ``docs`` with its most probable
    grade, dropping records below ``min_confidence``."""
    model.eval()
    records = []
    for start in range(0, len(docs), batch_size):
        chunk = docs[start:start + batch_size]
        ids, _ = to_batch(chunk)
        _, scores, _ = model(ids)
        for doc, doc_scores in zip(chunk, scores):
            records.extend(records_from_scores(doc, doc_scores,
                                               min_confidence))
    logger.info('distilled %d sentence labels from %d documents',
                len(records), len(docs))
    return records


def save_sentence_corpus(path, records):
    write_jsonl(path, (r.to_json() for r in records))


def load_sentence_corpus(path, n_grades: Optional[int] = None):
    records = []
    for lineno, obj in iter_jsonl(path):
        try:
            record = SentenceRecord(doc_id=str(obj['doc_id']),
                                    index=int(obj['index']),
                                    tokens=list(obj['tokens']),
                                    label=int(obj['label']),
                                    confidence=float(obj['confidence']))
        except (KeyError, TypeError, ValueError) as err:
            raise DataError('{}:{}: malformed sentence record ({})'.format(
                path, lineno, err))
        if record.label < 1 or (n_grades is not None
                                and record.label > n_grades):
            raise DataError('{}:{}: label {} outside 1..{}'.format(
                path, lineno, record.label, n_grades))
        records.append(record)
    return records
