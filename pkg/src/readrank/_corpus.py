# -*- encoding: utf-8 -*-
# readrank: bidirectional long-document readability assessment.
# readrank/_corpus.py
#
# BSD License applies; see the LICENSE file, or
# http://opensource.org/licenses/BSD-2-Clause
"""Corpus ingestion: sentence splitting, tokenization, vocabularies,
fixed-shape encoding and stratified train/test splits.

A corpus is a JSONL file with one document per line, either
``{"id": ..., "grade": ..., "text": ...}`` or
``{"id": ..., "grade": ..., "sentences": [[token, ...], ...]}``.
Grades are 1-based consecutive integers.
"""
from __future__ import annotations

import collections
import logging
import math
import re
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import torch

from ._util import DataError, iter_jsonl, write_jsonl

logger = logging.getLogger(__name__)

PAD = 0
UNK = 1
PAD_TOKEN = '<pad>'
UNK_TOKEN = '<unk>'

DEFAULT_DELIMITERS = frozenset('。！？.!?')
CLOSING_QUOTES = frozenset('"\'”’」』）)')
TOKENIZERS = ('auto', 'space', 'char')

_CJK = re.compile('[㐀-䶿一-鿿豈-﫿]')


@dataclass
class RawDocument:
    """A graded document, as text or as pre-tokenized sentences.

    ``pos`` (per-sentence tag lists aligned with ``sentences``) and
    ``entities`` are optional annotations read only by the feature
    extractor.
    """
    id: str
    grade: int
    text: Optional[str] = None
    sentences: Optional[List[List[str]]] = None
    pos: Optional[List[List[str]]] = None
    entities: Optional[List[str]] = None

    def sentence_tokens(self, delimiters=DEFAULT_DELIMITERS,
                        tokenizer='auto'):
        """Return the document as a list of non-empty token lists."""
        if self.sentences is not None:
            out = [list(s) for s in self.sentences if s]
        elif self.text is not None:
            out = [tokenize(s, tokenizer)
                   for s in split_sentences(self.text, delimiters)]
            out = [s for s in out if s]
        else:
            out = []
        if not out:
            raise DataError('document {!r} has no sentences'.format(self.id))
        return out

    def to_json(self):
        out = {'id': self.id, 'grade': self.grade}
        for name in ('text', 'sentences', 'pos', 'entities'):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out


@dataclass
class TokenizedDocument:
    """A document as an ``n_max × m_max`` grid of token ids.

    ``sentences`` holds the surviving token lists cut to ``m_max``, in
    grid order; ``full_sentences`` holds the same sentences uncut, and
    is what sentence vectors and sentence records are keyed by.
    """
    id: str
    grade: int
    token_ids: np.ndarray
    sentence_lengths: List[int]
    n_real: int
    sentences: List[List[str]] = field(default_factory=list)
    full_sentences: Optional[List[List[str]]] = None

    def sentence_keys(self):
        if self.full_sentences is None:
            return self.sentences
        return self.full_sentences


@dataclass
class CorpusSplit:
    train: list
    test: list
    seed: int

    def ids(self):
        return {'train': [d.id for d in self.train],
                'test': [d.id for d in self.test],
                'seed': self.seed}


# ----------------------------------------------------------------------
# Sentence splitting and tokenization

def _is_boundary(text, point, delimiters):
    char = text[point]
    if char not in delimiters:
        return False
    if char == '.' and 0 < point < len(text) - 1:
        # Decimal points are not sentence ends.
        if text[point - 1].isdigit() and text[point + 1].isdigit():
            return False
    return True


def split_sentences(text, delimiters=DEFAULT_DELIMITERS):
    """Split ``text`` into sentences ending at any of ``delimiters``.

    Runs of delimiters and trailing closing quotes stay attached to the
    sentence they end.  Segments are stripped of surrounding whitespace
    and empty segments are dropped.

    >>> split_sentences('你好。再见！')
    ['你好。', '再见！']
    >>> split_sentences('One. Two. Three.')
    ['One.', 'Two.', 'Three.']
    >>> split_sentences('他说：“走吧！”然后走了')
    ['他说：“走吧！”', '然后走了']
    >>> split_sentences('no delimiter here')
    ['no delimiter here']
    """
    if not delimiters:
        raise ValueError('delimiters must not be empty')
    if text is None or not text.strip():
        raise DataError('empty document')
    delimiters = frozenset(delimiters)
    out = []
    start = 0
    point = 0
    while point < len(text):
        if _is_boundary(text, point, delimiters):
            end = point + 1
            while end < len(text) and (text[end] in delimiters
                                       or text[end] in CLOSING_QUOTES):
                end += 1
            out.append(text[start:end])
            start = point = end
        else:
            point += 1
    out.append(text[start:])
    return [s.strip() for s in out if s.strip()]


def tokenize(sentence, mode='auto'):
    """Tokenize one sentence.

    ``space`` splits on whitespace, ``char`` emits every non-space
    character, ``auto`` uses ``char`` when the sentence holds CJK
    characters and ``space`` otherwise.

    >>> tokenize('a cat sat')
    ['a', 'cat', 'sat']
    >>> tokenize('你好。')
    ['你', '好', '。']
    """
    if mode not in TOKENIZERS:
        raise ValueError('unknown tokenizer {!r}'.format(mode))
    if mode == 'auto':
        mode = 'char' if _CJK.search(sentence) else 'space'
    if mode == 'space':
        return sentence.split()
    return [c for c in sentence if not c.isspace()]


# ----------------------------------------------------------------------
# Vocabulary

class Vocabulary(object):
    """Dense token ↔ id map with ``PAD = 0`` and ``UNK = 1`` reserved.

    Ids are assigned in first-occurrence order, so identical input
    order always yields identical ids.
    """

    def __init__(self, tokens=(), min_freq=1):
        self.min_freq = min_freq
        self.itos = [PAD_TOKEN, UNK_TOKEN]
        self.stoi = {PAD_TOKEN: PAD, UNK_TOKEN: UNK}
        for token in tokens:
            self.add(token)

    def add(self, token):
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi and self.stoi[token] > UNK

    def encode(self, token):
        return self.stoi.get(token, UNK)

    def decode(self, index):
        return self.itos[index]

    def to_json(self):
        return {'min_freq': self.min_freq, 'tokens': self.itos[2:]}

    @classmethod
    def from_json(cls, obj):
        return cls(obj['tokens'], obj.get('min_freq', 1))


def build_vocabulary(docs, min_freq=1, delimiters=DEFAULT_DELIMITERS,
                     tokenizer='auto'):
    """Build a :py:class:`Vocabulary` from raw documents, keeping tokens
    seen at least ``min_freq`` times.

    >>> vocab = build_vocabulary([RawDocument('d', 1, 'a a b')], min_freq=2)
    >>> 'a' in vocab, 'b' in vocab
    (True, False)
    >>> len(build_vocabulary([]))
    2
    """
    counts = collections.Counter()
    order = []
    for doc in docs:
        for sentence in doc.sentence_tokens(delimiters, tokenizer):
            for token in sentence:
                if token not in counts:
                    order.append(token)
                counts[token] += 1
    vocab = Vocabulary(min_freq=min_freq)
    for token in order:
        if counts[token] >= min_freq:
            vocab.add(token)
    logger.info('vocabulary: %d tokens kept of %d distinct (min_freq=%d)',
                len(vocab) - 2, len(order), min_freq)
    return vocab


# ----------------------------------------------------------------------
# Encoding

def encode_document(doc, vocab, m_max, n_max, delimiters=DEFAULT_DELIMITERS,
                    tokenizer='auto'):
    """Encode ``doc`` as an ``n_max × m_max`` grid, cutting surplus
    sentences and tokens from the tail and PAD-filling the rest."""
    if m_max < 1 or n_max < 1:
        raise ValueError('m_max and n_max must be positive')
    full = doc.sentence_tokens(delimiters, tokenizer)[:n_max]
    sentences = [s[:m_max] for s in full]
    grid = np.full((n_max, m_max), PAD, dtype=np.int64)
    for i, sentence in enumerate(sentences):
        grid[i, :len(sentence)] = [vocab.encode(t) for t in sentence]
    return TokenizedDocument(
        id=doc.id, grade=doc.grade, token_ids=grid,
        sentence_lengths=[len(s) for s in sentences],
        n_real=len(sentences), sentences=sentences,
        full_sentences=full)


def decode_document(tdoc, vocab):
    """Recover the surviving token lists of ``tdoc`` (unknown tokens
    come back as ``<unk>``)."""
    return [[vocab.decode(int(i)) for i in tdoc.token_ids[row, :length]]
            for row, length in enumerate(tdoc.sentence_lengths)]


def encode_corpus(docs, vocab, m_max, n_max, delimiters=DEFAULT_DELIMITERS,
                  tokenizer='auto'):
    return [encode_document(d, vocab, m_max, n_max, delimiters, tokenizer)
            for d in docs]


def to_batch(tdocs, device=None):
    """Stack tokenized documents into ``(ids, labels)`` tensors, with
    0-based labels."""
    ids = torch.as_tensor(np.stack([d.token_ids for d in tdocs]),
                          device=device)
    labels = torch.as_tensor([d.grade - 1 for d in tdocs], device=device)
    return ids, labels


# ----------------------------------------------------------------------
# Splits

def _train_share(count, ratio):
    # round-half-up, leaving at least one document for the test side
    return min(int(math.floor(ratio * count + 0.5)), count - 1)


def stratified_split(docs, ratio=0.8, seed=0):
    """Split ``docs`` per grade into train and test, ``ratio`` of every
    grade going to train.  Deterministic under ``seed``.

    A grade of ``c`` documents sends ``round(ratio * c)`` (halves
    rounding up) to train, capped at ``c - 1`` so that every grade keeps
    a test document.  The cap binds for small grades: with the default
    ratio a grade of 2 documents splits 1/1 rather than 2/0, and a
    grade of 3 splits 2/1.

    >>> docs = [RawDocument(str(i), 1 + i % 2, 'x') for i in range(10)]
    >>> split = stratified_split(docs, seed=3)
    >>> len(split.train), len(split.test)
    (8, 2)
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError('ratio must lie strictly between 0 and 1')
    ids = [d.id for d in docs]
    if len(set(ids)) != len(ids):
        raise DataError('duplicate document ids in corpus')
    by_grade = collections.defaultdict(list)
    for doc in docs:
        by_grade[doc.grade].append(doc)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for grade in sorted(by_grade):
        members = by_grade[grade]
        if len(members) < 2:
            raise DataError('grade {} has {} document(s); at least 2 are '
                            'needed to split'.format(grade, len(members)))
        order = rng.permutation(len(members))
        cut = _train_share(len(members), ratio)
        train.extend(members[i] for i in order[:cut])
        test.extend(members[i] for i in order[cut:])
    return CorpusSplit(train=train, test=test, seed=seed)


# ----------------------------------------------------------------------
# Loading

def _parse_document(obj, where):
    if not isinstance(obj, dict):
        raise DataError('{}: expected a JSON object'.format(where))
    for key in ('id', 'grade'):
        if key not in obj:
            raise DataError('{}: missing {!r}'.format(where, key))
    grade = obj['grade']
    if isinstance(grade, bool) or not isinstance(grade, int) or grade < 1:
        raise DataError('{}: grade must be a positive integer, got {!r}'
                        .format(where, grade))
    if 'text' not in obj and 'sentences' not in obj:
        raise DataError('{}: needs "text" or "sentences"'.format(where))
    unknown = set(obj) - {'id', 'grade', 'text', 'sentences', 'pos',
                          'entities'}
    if unknown:
        raise DataError('{}: unknown keys {}'.format(where, sorted(unknown)))
    pos = obj.get('pos')
    sentences = obj.get('sentences')
    if pos is not None:
        if sentences is None or [len(s) for s in pos] != [len(s) for s in
                                                          sentences]:
            raise DataError('{}: "pos" must align 1:1 with "sentences"'
                            .format(where))
    return RawDocument(id=str(obj['id']), grade=grade, text=obj.get('text'),
                       sentences=sentences, pos=pos,
                       entities=obj.get('entities'))


def load_corpus(path):
    """Load a corpus JSONL file.  Returns ``(docs, n_grades)`` where
    ``n_grades`` is the largest grade seen."""
    docs = [_parse_document(obj, '{}:{}'.format(path, lineno))
            for lineno, obj in iter_jsonl(path)]
    if not docs:
        raise DataError('{}: corpus is empty'.format(path))
    n_grades = max(d.grade for d in docs)
    logger.info('loaded %d documents, %d grades from %s',
                len(docs), n_grades, path)
    return docs, n_grades


def save_corpus(path, docs):
    write_jsonl(path, (d.to_json() for d in docs))


def check_grade_density(docs, n_grades):
    """Raise :py:class:`DataError` unless every grade ``1..n_grades``
    occurs in ``docs``."""
    present = {d.grade for d in docs}
    for grade in range(1, n_grades + 1):
        if grade not in present:
            raise DataError('grade {} has no training documents'
                            .format(grade))
    extra = sorted(g for g in present if g > n_grades)
    if extra:
        raise DataError('grades {} exceed the declared {} levels'
                        .format(extra, n_grades))
