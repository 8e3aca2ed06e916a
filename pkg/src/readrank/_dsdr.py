# -*- encoding: utf-8 -*-
# readrank: bidirectional long-document readability assessment.
# readrank/_dsdr.py
#
# BSD License applies; see the LICENSE file, or
# http://opensource.org/licenses/BSD-2-Clause
"""The forward model: documents read through difficulty-aware sentence
vectors.

A sentence encoder is first trained on the distilled sentence corpus
(:py:func:`pretrain_eptm`).  Documents are then encoded sentence by
sentence, contextualized by a small self-attention encoder over sentence
order, and looked at through one learnable prototype per difficulty
level (cross-attention).  The per-level views are averaged into the
document vector ``T``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ._corpus import PAD, to_batch
from ._encoder import MultiHeadAttention, WordLayer, init_parameters
from ._mdem import batches, make_optimizer
from ._util import ConfigError, DataError, iter_jsonl, masked_softmax

logger = logging.getLogger(__name__)

SENTENCE_ENCODERS = ('internal', 'external')


@dataclass
class DsdrConfig:
    """``n_levels`` defaults to the number of grades when left unset."""
    sentence_encoder: str = 'internal'
    n_layers: int = 1
    n_levels: Optional[int] = None
    freeze_eptm: bool = False
    eptm_epochs: int = 10
    epochs: int = 30

    def __post_init__(self):
        if self.sentence_encoder not in SENTENCE_ENCODERS:
            raise ConfigError('dsdr.sentence_encoder must be one of {}'
                              .format(SENTENCE_ENCODERS))
        if self.n_layers < 1 or self.eptm_epochs < 1 or self.epochs < 1:
            raise ConfigError('dsdr.n_layers, dsdr.eptm_epochs and '
                              'dsdr.epochs must be positive')
        if self.n_levels is not None and self.n_levels < 1:
            raise ConfigError('dsdr.n_levels must be positive')

    def to_json(self):
        return asdict(self)


@dataclass
class DsdrOutput:
    context: torch.Tensor       # H_t, B × n × d
    views: torch.Tensor         # R, B × n_levels × d
    doc_vector: torch.Tensor    # T, B × d
    logits: torch.Tensor
    probs: torch.Tensor
    sentence_mask: torch.Tensor


# ----------------------------------------------------------------------
# Sentence encoders

class SentenceEncoder(nn.Module):
    """Maps ``S`` sentences to ``S × out_dim`` vectors.

    ``forward`` receives both the token-id rows (``S × m_max``) and the
    token lists (``None`` for PAD rows); implementations use whichever
    they need.
    """
    out_dim = 0

    def forward(self, ids, tokens):
        raise NotImplementedError


class InternalSentenceEncoder(SentenceEncoder):
    """A trainable word layer of the hierarchical encoder."""

    def __init__(self, config, vocab_size):
        super().__init__()
        self.word_layer = WordLayer(config, vocab_size)
        self.out_dim = config.d

    def forward(self, ids, tokens=None):
        return self.word_layer(ids)


class ExternalSentenceEncoder(SentenceEncoder):
    """Fixed vectors looked up by the exact token sequence."""

    def __init__(self, table):
        super().__init__()
        if not table:
            raise DataError('external sentence vector table is empty')
        keys = list(table)
        widths = {len(table[k]) for k in keys}
        if len(widths) != 1:
            raise DataError('sentence vectors differ in width: {}'.format(
                sorted(widths)))
        self.out_dim = widths.pop()
        self.index = {key: i for i, key in enumerate(keys)}
        self.register_buffer('vectors', torch.tensor(
            [table[k] for k in keys], dtype=torch.get_default_dtype()),
            persistent=False)

    def forward(self, ids, tokens):
        rows = []
        for sentence in tokens:
            if sentence is None:
                rows.append(-1)
                continue
            key = tuple(sentence)
            if key not in self.index:
                raise DataError('no external vector for sentence {!r}'
                                .format(' '.join(sentence)[:60]))
            rows.append(self.index[key])
        rows = torch.tensor(rows, dtype=torch.long)
        out = self.vectors.new_zeros(len(rows), self.out_dim)
        real = rows >= 0
        out[real] = self.vectors[rows[real]]
        return out


def load_sentence_vectors(path):
    """Read a sidecar of ``{"tokens": [...], "vector": [...]}`` rows."""
    table = {}
    for lineno, row in iter_jsonl(path):
        if 'tokens' not in row or 'vector' not in row:
            raise DataError('{}:{}: needs "tokens" and "vector"'.format(
                path, lineno))
        table[tuple(row['tokens'])] = [float(x) for x in row['vector']]
    return ExternalSentenceEncoder(table)


def sentence_batch(records, vocab, m_max):
    """Token-id rows cut to ``m_max``, the uncut token lists and 0-based
    labels for sentence records."""
    ids = np.full((len(records), m_max), PAD, dtype=np.int64)
    tokens = []
    for row, record in enumerate(records):
        cut = record.tokens[:m_max]
        ids[row, :len(cut)] = [vocab.encode(t) for t in cut]
        tokens.append(list(record.tokens))
    labels = torch.tensor([r.label - 1 for r in records])
    return torch.as_tensor(ids), tokens, labels


def pretrain_eptm(records, encoder, vocab, n_grades, m_max, cfg, epochs,
                  seed=0):
    """Supervise ``encoder`` on sentence labels through a linear probe,
    which is discarded afterwards.  Returns ``(encoder, history)``."""
    if not records:
        raise DataError('sentence corpus is empty')
    bad = sorted({r.label for r in records if not 1 <= r.label <= n_grades})
    if bad:
        raise DataError('sentence labels {} outside 1..{}'.format(
            bad, n_grades))
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    probe = nn.Linear(encoder.out_dim, n_grades)
    init_parameters(probe)
    optimizer = make_optimizer(list(encoder.parameters())
                               + list(probe.parameters()), cfg)
    ids, tokens, labels = sentence_batch(records, vocab, m_max)
    history = []
    for epoch in range(1, epochs + 1):
        encoder.train()
        total, correct = 0.0, 0
        for index in batches(len(records), cfg.batch_size, rng):
            index = torch.as_tensor(index)
            optimizer.zero_grad()
            logits = probe(encoder(ids[index],
                                   [tokens[i] for i in index.tolist()]))
            loss = F.cross_entropy(logits, labels[index])
            loss.backward()
            optimizer.step()
            total += float(loss) * len(index)
            correct += int((logits.argmax(-1) == labels[index]).sum())
        row = {'epoch': epoch, 'loss': total / len(records),
               'probe_acc': correct / len(records)}
        history.append(row)
        logger.info('eptm epoch %d: loss=%.4f probe_acc=%.3f', epoch,
                    row['loss'], row['probe_acc'])
    return encoder, history


# ----------------------------------------------------------------------
# Document model

class ContextBlock(nn.Module):
    """Post-norm self-attention encoder block over sentence order."""

    def __init__(self, d, n_heads):
        super().__init__()
        self.attention = MultiHeadAttention(d, n_heads)
        self.attention_norm = nn.LayerNorm(d)
        self.feed_forward = nn.Sequential(nn.Linear(d, d), nn.ReLU(),
                                          nn.Linear(d, d))
        self.feed_forward_norm = nn.LayerNorm(d)

    def forward(self, x, mask):
        attended, _ = self.attention(x, x, x, mask)
        x = self.attention_norm(x + attended)
        return self.feed_forward_norm(x + self.feed_forward(x))


def multiview(prototypes, context, mask, w_query, w_key, w_value):
    """``Attention(C W^Q, H W^K, H W^V)``: one view of the document per
    difficulty prototype.  ``prototypes`` is ``L × d``, ``context``
    ``B × n × d``; returns views ``B × L × d`` and weights
    ``B × L × n``."""
    query = w_query(prototypes)[None]
    key = w_key(context)
    value = w_value(context)
    scores = query @ key.transpose(-1, -2) / math.sqrt(query.shape[-1])
    weights = masked_softmax(scores, mask[:, None, :], dim=-1)
    return weights @ value, weights


def fuse(views):
    """Average the views over the level axis.

    >>> fuse(torch.tensor([[1.0, 2.0], [-1.0, -2.0]]))
    tensor([0., 0.])
    """
    return views.mean(dim=-2)


class DsdrModel(nn.Module):

    def __init__(self, sentence_encoder, n_heads, n_layers, n_max,
                 n_levels, n_grades):
        super().__init__()
        d = sentence_encoder.out_dim
        if d % n_heads:
            raise ConfigError('sentence vector width {} is not divisible by '
                              '{} heads'.format(d, n_heads))
        self.sentence_encoder = sentence_encoder
        self.n_grades = n_grades
        self.positions = nn.Embedding(n_max, d)
        self.context = nn.ModuleList(ContextBlock(d, n_heads)
                                     for _ in range(n_layers))
        self.prototypes = nn.Parameter(torch.empty(n_levels, d))
        self.w_query = nn.Linear(d, d, bias=False)
        self.w_key = nn.Linear(d, d, bias=False)
        self.w_value = nn.Linear(d, d, bias=False)
        self.classifier = nn.Linear(d, n_grades)

    def encode_doc_sentences(self, ids, sentences=None):
        """Sentence vectors of every document, contextualized over
        sentence order.  Returns ``(H_t, mask)``."""
        batch, n, m = ids.shape
        mask = (ids != PAD).any(dim=-1)
        tokens = []
        for b in range(batch):
            doc = sentences[b] if sentences is not None else []
            tokens.extend(doc[i] if i < len(doc) else None for i in range(n))
        vectors = self.sentence_encoder(ids.reshape(batch * n, m), tokens)
        x = vectors.view(batch, n, -1)
        x = x + self.positions(torch.arange(n, device=ids.device))[None]
        for block in self.context:
            x = block(x, mask)
        return x, mask

    def forward(self, ids, sentences=None):
        context, mask = self.encode_doc_sentences(ids, sentences)
        views, _ = multiview(self.prototypes, context, mask, self.w_query,
                             self.w_key, self.w_value)
        doc_vector = fuse(views)
        logits = self.classifier(doc_vector)
        return DsdrOutput(context=context, views=views,
                          doc_vector=doc_vector, logits=logits,
                          probs=torch.softmax(logits, dim=-1),
                          sentence_mask=mask)


def build_dsdr(sentence_encoder, encoder_config, dsdr_config, seed=0):
    """Wrap ``sentence_encoder`` in a freshly initialized
    :py:class:`DsdrModel`; the encoder's own weights are kept."""
    torch.manual_seed(seed)
    n_levels = dsdr_config.n_levels or encoder_config.n_grades
    model = DsdrModel(sentence_encoder, encoder_config.n_heads,
                      dsdr_config.n_layers, encoder_config.n_max, n_levels,
                      encoder_config.n_grades)
    for name, module in model.named_children():
        if name != 'sentence_encoder':
            init_parameters(module)
    nn.init.xavier_uniform_(model.prototypes)
    return model


def set_frozen(module, frozen):
    for param in module.parameters():
        param.requires_grad_(not frozen)


def train_dsdr(model, train_docs, cfg, epochs, freeze_eptm=False):
    """Train the context encoder, prototypes and classifier end to end
    on document grades; the sentence encoder trains too unless
    ``freeze_eptm``.  Returns one row per epoch."""
    if not train_docs:
        raise DataError('no training documents')
    grades = sorted({d.grade for d in train_docs})
    if grades[-1] > model.n_grades:
        raise DataError('corpus has grade {} but the model knows {} levels'
                        .format(grades[-1], model.n_grades))
    set_frozen(model.sentence_encoder, freeze_eptm)
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    optimizer = make_optimizer(model.parameters(), cfg)
    history = []
    for epoch in range(1, epochs + 1):
        model.train()
        total, correct = 0.0, 0
        for index in batches(len(train_docs), cfg.batch_size, rng):
            chunk = [train_docs[i] for i in index]
            ids, labels = to_batch(chunk)
            optimizer.zero_grad()
            out = model(ids, [d.sentence_keys() for d in chunk])
            loss = F.cross_entropy(out.logits, labels)
            loss.backward()
            optimizer.step()
            total += float(loss) * len(index)
            correct += int((out.logits.argmax(-1) == labels).sum())
        row = {'epoch': epoch, 'loss': total / len(train_docs),
               'train_acc': correct / len(train_docs)}
        history.append(row)
        logger.info('dsdr epoch %d: loss=%.4f acc=%.3f', epoch, row['loss'],
                    row['train_acc'])
    return history


def dsdr_forward(model, docs, grad=False):
    ids, _ = to_batch(docs)
    with torch.set_grad_enabled(grad):
        return model(ids, [d.sentence_keys() for d in docs])


@torch.no_grad()
def dsdr_vectors(model, docs, batch_size=64):
    """Document vectors ``T`` (``N × d``) for tokenized documents."""
    model.eval()
    return torch.cat([dsdr_forward(model, docs[i:i + batch_size]).doc_vector
                      for i in range(0, len(docs), batch_size)])


@torch.no_grad()
def dsdr_probs(model, docs, batch_size=64):
    model.eval()
    return torch.cat([dsdr_forward(model, docs[i:i + batch_size]).probs
                      for i in range(0, len(docs), batch_size)])
