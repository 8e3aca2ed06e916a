# -*- encoding: utf-8 -*-
# readrank: bidirectional long-document readability assessment.
# readrank/_encoder.py
#
# BSD License applies; see the LICENSE file, or
# http://opensource.org/licenses/BSD-2-Clause
"""The hierarchical document encoder.

Three layers, each a :py:class:`torch.nn.Module`:

  * :py:class:`WordLayer`: embedding, bidirectional recurrence, a
    same-padded convolution producing per-word context vectors, and
    multi-head attention whose values are those context vectors.  The
    result is a weight for every feature of every word
    (*multidimensional context weights*), which pools the word states
    into one sentence vector.
  * :py:class:`SentenceLayer`: stacked self-attention blocks whose
    residual connections are replaced by sigmoid fusion gates, closed by
    a feature fusion gate against the block input.
  * :py:class:`DocumentLayer`: source2token attention compressing the
    sentence vectors into a document vector.

:py:class:`HierarchicalEncoder` chains the three and adds the document
classifier.  Every attention softmax is masked: PAD words and PAD
sentences receive exactly zero weight.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from ._corpus import PAD
from ._util import ConfigError, DataError, iter_jsonl, masked_softmax

logger = logging.getLogger(__name__)

CONTEXT_MODES = ('multi', 'single', 'none')
RNN_CELLS = ('lstm', 'gru')


@dataclass
class EncoderConfig:
    """Shapes of the hierarchical encoder.

    The word representation width is ``d = 2 * d_hidden``.  The number
    of convolution kernels must equal ``d`` so that the context vectors
    can serve directly as per-feature weights, and ``d`` must split
    evenly across ``n_heads``.
    """
    d_embed: int = 400
    d_hidden: int = 200
    n_kernels: int = 400
    window: int = 3
    n_heads: int = 8
    n_layers: int = 2
    n_grades: int = 3
    n_max: int = 50
    m_max: int = 50
    rnn_cell: str = 'lstm'
    context_mode: str = 'multi'

    def __post_init__(self):
        for name in ('d_embed', 'd_hidden', 'n_kernels', 'window',
                     'n_heads', 'n_layers', 'n_max', 'm_max'):
            if getattr(self, name) < 1:
                raise ConfigError('encoder.{} must be positive'.format(name))
        if self.n_grades < 2:
            raise ConfigError('encoder.n_grades must be at least 2')
        if self.n_kernels != self.d:
            raise ConfigError(
                'encoder.n_kernels ({}) must equal 2 * d_hidden ({})'.format(
                    self.n_kernels, self.d))
        if self.d % self.n_heads:
            raise ConfigError('2 * d_hidden ({}) is not divisible by '
                              'n_heads ({})'.format(self.d, self.n_heads))
        if self.window % 2 == 0:
            raise ConfigError('encoder.window must be odd')
        if self.rnn_cell not in RNN_CELLS:
            raise ConfigError('encoder.rnn_cell must be one of {}'.format(
                RNN_CELLS))
        if self.context_mode not in CONTEXT_MODES:
            raise ConfigError('encoder.context_mode must be one of {}'
                              .format(CONTEXT_MODES))

    @property
    def d(self):
        return 2 * self.d_hidden

    def to_json(self):
        return asdict(self)


@dataclass
class EncoderOutput:
    sentence_reps: torch.Tensor     # u^s, B × n_max × d
    doc_vector: torch.Tensor        # B × d
    doc_attention: torch.Tensor     # W^D, B × n_max
    doc_logits: torch.Tensor        # B × Y
    doc_probs: torch.Tensor         # r, B × Y
    sentence_mask: torch.Tensor     # B × n_max, True on real sentences


def init_parameters(module):
    """Glorot-uniform every matrix, zero every bias, keep normalization
    gains at one.  Call after ``torch.manual_seed`` for reproducible
    weights."""
    for name, param in module.named_parameters():
        if param.dim() >= 2:
            nn.init.xavier_uniform_(param)
        elif name.endswith('bias') or 'bias_' in name:
            nn.init.zeros_(param)
    for sub in module.modules():
        if isinstance(sub, nn.Embedding) and sub.padding_idx is not None:
            with torch.no_grad():
                sub.weight[sub.padding_idx].zero_()


class MultiHeadAttention(nn.Module):
    """Scaled dot-product attention over ``n_heads`` heads.

    Queries and keys are projected from inputs of width ``d_model``;
    values may come from a different source of width ``d_value``.
    Positions where ``key_mask`` is false receive zero weight.
    """

    def __init__(self, d_model, n_heads, d_value=None):
        super().__init__()
        if d_model % n_heads:
            raise ValueError('d_model must be divisible by n_heads')
        self.d_model = d_model
        self.n_heads = n_heads
        self.query = nn.Linear(d_model, d_model)
        self.key = nn.Linear(d_model, d_model)
        self.value = nn.Linear(d_value or d_model, d_model)
        self.output = nn.Linear(d_model, d_model)

    def _heads(self, x):
        batch, length, _ = x.shape
        return x.view(batch, length, self.n_heads, -1).transpose(1, 2)

    def forward(self, query, key, value, key_mask):
        if key.shape[:2] != value.shape[:2]:
            raise ValueError('keys and values differ in shape: {} vs {}'
                             .format(tuple(key.shape), tuple(value.shape)))
        q = self._heads(self.query(query))
        k = self._heads(self.key(key))
        v = self._heads(self.value(value))
        scores = q @ k.transpose(-1, -2) / math.sqrt(q.shape[-1])
        weights = masked_softmax(scores, key_mask[:, None, None, :], dim=-1)
        out = (weights @ v).transpose(1, 2).reshape(query.shape[0],
                                                    query.shape[1], -1)
        return self.output(out), weights


# ----------------------------------------------------------------------
# Word layer

class WordLayer(nn.Module):
    """Maps a batch of sentences (``S × m_max`` token ids) to sentence
    vectors (``S × d``)."""

    def __init__(self, config, vocab_size):
        super().__init__()
        self.config = config
        d = config.d
        self.embedding = nn.Embedding(vocab_size, config.d_embed,
                                      padding_idx=PAD)
        cell = nn.LSTM if config.rnn_cell == 'lstm' else nn.GRU
        self.rnn = cell(config.d_embed, config.d_hidden, batch_first=True,
                        bidirectional=True)
        self.conv = nn.Conv1d(d, config.n_kernels, config.window,
                              padding=config.window // 2)
        self.attention = MultiHeadAttention(d, config.n_heads,
                                            d_value=config.n_kernels)

    def embed(self, ids):
        if ids.numel() and (int(ids.min()) < 0
                            or int(ids.max()) >= self.embedding.num_embeddings):
            raise ValueError('token id out of range [0, {})'.format(
                self.embedding.num_embeddings))
        return self.embedding(ids)

    def encode_words(self, embedded, lengths):
        """Bidirectional recurrence over the real prefix of every
        sentence.  PAD positions and all-PAD sentences come out zero."""
        sentences, m_max, _ = embedded.shape
        out = embedded.new_zeros(sentences, m_max, self.config.d)
        real = lengths > 0
        if not bool(real.any()):
            return out
        packed = pack_padded_sequence(embedded[real], lengths[real].cpu(),
                                      batch_first=True, enforce_sorted=False)
        states, _ = self.rnn(packed)
        states, _ = pad_packed_sequence(states, batch_first=True,
                                        total_length=m_max)
        return out.index_put((real.nonzero(as_tuple=True)[0],), states)

    def context_vectors(self, word_states):
        """Same-padded convolution: ``C[j]`` sees words
        ``j - window//2 .. j + window//2`` with zeros past the borders."""
        return self.conv(word_states.transpose(1, 2)).transpose(1, 2)

    def multidim_context_weights(self, word_states, context, mask):
        """Attention with queries and keys from the word states and values
        from the context vectors, rectified, then normalized per feature
        column over the real words of each sentence."""
        attended, _ = self.attention(word_states, word_states, context, mask)
        return masked_softmax(F.relu(attended), mask[:, :, None], dim=1)

    @staticmethod
    def sentence_vector(word_states, weights):
        return (weights * word_states).sum(dim=1)

    def single_dim_context(self, word_states, lengths):
        """Single-dimensional variant: one weight per word, shared by all
        of its features.

        The convolution runs over valid windows only; its outputs are
        averaged into ``a``, words are scored by ``h_t[j] · a`` and the
        masked softmax of those scores pools the word states.  Sentences
        shorter than the window use one window over the zero-padded
        sentence.  Returns ``(a, h_s)``.
        """
        window = self.config.window
        m_max = word_states.shape[1]
        padded = word_states
        if m_max < window:
            padded = F.pad(word_states, (0, 0, 0, window - m_max))
        windows = F.conv1d(padded.transpose(1, 2), self.conv.weight,
                           self.conv.bias).transpose(1, 2)
        n_windows = torch.clamp(lengths - window + 1, min=1)
        positions = torch.arange(windows.shape[1], device=lengths.device)
        valid = positions[None, :] < n_windows[:, None]
        summary = ((windows * valid[:, :, None]).sum(dim=1)
                   / n_windows[:, None].to(windows.dtype))
        mask = positions_mask(lengths, m_max)
        scores = (word_states * summary[:, None, :]).sum(dim=-1)
        weights = masked_softmax(scores, mask, dim=-1)
        return summary, (weights[:, :, None] * word_states).sum(dim=1)

    def forward(self, ids):
        lengths = (ids != PAD).sum(dim=-1)
        mask = ids != PAD
        word_states = self.encode_words(self.embed(ids), lengths)
        mode = self.config.context_mode
        if mode == 'multi':
            context = self.context_vectors(word_states)
            weights = self.multidim_context_weights(word_states, context,
                                                    mask)
            return self.sentence_vector(word_states, weights)
        if mode == 'single':
            return self.single_dim_context(word_states, lengths)[1]
        # no context weights: plain mean of the real word states
        counts = torch.clamp(lengths, min=1)[:, None].to(word_states.dtype)
        return word_states.sum(dim=1) / counts


def positions_mask(lengths, width):
    """Boolean ``len(lengths) × width`` mask, true on the first
    ``lengths[i]`` positions of row ``i``."""
    return torch.arange(width, device=lengths.device)[None, :] < lengths[:, None]


# ----------------------------------------------------------------------
# Sentence layer

class GatedTransformerBlock(nn.Module):
    """Self-attention block whose two residual connections are sigmoid
    fusion gates."""

    def __init__(self, d, n_heads):
        super().__init__()
        self.attention = MultiHeadAttention(d, n_heads)
        self.attention_norm = nn.LayerNorm(d)
        self.gate1_out = nn.Linear(d, d, bias=False)    # W11
        self.gate1_in = nn.Linear(d, d)                 # W12, b1
        self.feed_forward = nn.Linear(d, d)             # f
        self.feed_forward_norm = nn.LayerNorm(d)
        self.gate2_out = nn.Linear(d, d, bias=False)    # W21
        self.gate2_in = nn.Linear(d, d)                 # W22, b2

    def forward(self, h, mask):
        attended, _ = self.attention(h, h, h, mask)
        o = self.attention_norm(attended)
        g1 = torch.sigmoid(self.gate1_out(o) + self.gate1_in(h))
        e = g1 * h + (1 - g1) * o
        q = self.feed_forward_norm(F.relu(self.feed_forward(e)))
        g2 = torch.sigmoid(self.gate2_out(q) + self.gate2_in(e))
        return g2 * e + (1 - g2) * q


class FusionGate(nn.Module):
    """``u = G ⊙ F + (1 − G) ⊙ h`` with ``F`` and ``G`` read off
    ``[h, v]``."""

    def __init__(self, d):
        super().__init__()
        self.transform = nn.Linear(2 * d, d)            # W3, b3
        self.gate = nn.Linear(2 * d, d)                 # W4, b4

    def forward(self, h, v):
        joint = torch.cat([h, v], dim=-1)
        candidate = F.relu(self.transform(joint))
        g = torch.sigmoid(self.gate(joint))
        return g * candidate + (1 - g) * h


class SentenceLayer(nn.Module):

    def __init__(self, config):
        super().__init__()
        self.blocks = nn.ModuleList(
            GatedTransformerBlock(config.d, config.n_heads)
            for _ in range(config.n_layers))
        self.fusion = FusionGate(config.d)

    def forward(self, sentence_vectors, mask):
        v = sentence_vectors
        for block in self.blocks:
            v = block(v, mask)
        return self.fusion(sentence_vectors, v)


# ----------------------------------------------------------------------
# Document layer

class DocumentLayer(nn.Module):
    """source2token attention: one scalar weight per sentence."""

    def __init__(self, d):
        super().__init__()
        self.hidden = nn.Linear(d, d)                   # W2d, b1d
        self.score = nn.Linear(d, 1)                    # W1d, b2d

    def forward(self, sentence_reps, mask):
        if not bool(mask.any(dim=-1).all()):
            raise DataError('document without any real sentence')
        scores = self.score(F.relu(self.hidden(sentence_reps))).squeeze(-1)
        weights = masked_softmax(scores, mask, dim=-1)
        return (weights[:, :, None] * sentence_reps).sum(dim=1), weights


class HierarchicalEncoder(nn.Module):
    """Word, sentence and document layers plus the grade classifier."""

    def __init__(self, config, vocab_size):
        super().__init__()
        self.config = config
        self.vocab_size = vocab_size
        self.word_layer = WordLayer(config, vocab_size)
        self.sentence_layer = SentenceLayer(config)
        self.document_layer = DocumentLayer(config.d)
        self.classifier = nn.Linear(config.d, config.n_grades)

    def encode_sentences(self, ids):
        """``B × n × m`` ids → sentence vectors ``B × n × d`` and the
        real-sentence mask."""
        batch, n, m = ids.shape
        vectors = self.word_layer(ids.reshape(batch * n, m))
        return vectors.view(batch, n, -1), (ids != PAD).any(dim=-1)

    def classify(self, doc_vector):
        logits = self.classifier(doc_vector)
        return logits, torch.softmax(logits, dim=-1)

    def forward(self, ids):
        sentence_vectors, mask = self.encode_sentences(ids)
        reps = self.sentence_layer(sentence_vectors, mask)
        doc_vector, attention = self.document_layer(reps, mask)
        logits, probs = self.classify(doc_vector)
        return EncoderOutput(sentence_reps=reps, doc_vector=doc_vector,
                             doc_attention=attention, doc_logits=logits,
                             doc_probs=probs, sentence_mask=mask)


def load_static_vectors(word_layer, vocab, path):
    """Copy vectors from a JSONL table of ``{"token", "vector"}`` rows
    into the embedding of ``word_layer`` for every token in ``vocab``.
    Returns the number of rows copied."""
    width = word_layer.embedding.embedding_dim
    copied = 0
    with torch.no_grad():
        for lineno, row in iter_jsonl(path):
            token, vector = row.get('token'), row.get('vector')
            if token not in vocab:
                continue
            if vector is None or len(vector) != width:
                raise DataError('{}:{}: vector for {!r} must have {} values'
                                .format(path, lineno, token, width))
            word_layer.embedding.weight[vocab.encode(token)] = torch.tensor(
                vector, dtype=word_layer.embedding.weight.dtype)
            copied += 1
    logger.info('loaded %d static vectors from %s', copied, path)
    return copied


def build_encoder(config, vocab_size, seed=0):
    """Construct and initialize a :py:class:`HierarchicalEncoder`."""
    torch.manual_seed(seed)
    encoder = HierarchicalEncoder(config, vocab_size)
    init_parameters(encoder)
    return encoder


def count_parameters(module, trainable_only=True):
    return sum(p.numel() for p in module.parameters()
               if p.requires_grad or not trainable_only)
