# -*- encoding: utf-8 -*-
# readrank: bidirectional long-document readability assessment.
# readrank/_synthetic.py
#
# BSD License applies; see the LICENSE file, or
# http://opensource.org/licenses/BSD-2-Clause
"""Synthetic graded corpora for desk-scale runs and tests.

Every grade owns a block of a shared lexicon and a typical sentence
length; documents of grade ``g`` draw most of their words from block
``g`` and the rest from common filler words.  In ``ordinal`` mode the
word draws are centred on block ``g`` but spill into the neighbouring
blocks, so adjacent grades look alike and distant grades do not.

>>> docs = generate_corpus(n_docs=6, n_grades=3, seed=1)
>>> sorted(d.grade for d in docs)
[1, 1, 2, 2, 3, 3]
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from ._corpus import RawDocument
from ._util import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class SyntheticConfig:
    n_docs: int = 300
    n_grades: int = 3
    words_per_grade: int = 40
    filler_words: int = 20
    min_sentences: int = 4
    max_sentences: int = 8
    base_length: int = 4
    length_step: int = 2
    signal: float = 0.7
    ordinal: bool = False
    spread: float = 0.6

    def __post_init__(self):
        if self.n_grades < 2:
            raise ConfigError('synthetic corpora need at least 2 grades')
        if self.n_docs < 2 * self.n_grades:
            raise ConfigError('need at least 2 documents per grade')
        if not 1 <= self.min_sentences <= self.max_sentences:
            raise ConfigError('sentence counts must satisfy '
                              '1 <= min_sentences <= max_sentences')
        if not 0.0 <= self.signal <= 1.0:
            raise ConfigError('signal must lie in [0, 1]')

    def to_json(self):
        return asdict(self)


def grade_word(grade, index):
    return 'g{}w{}'.format(grade, index)


def _draw_word(rng, grade, cfg):
    if rng.random() >= cfg.signal:
        return 'f{}'.format(rng.integers(cfg.filler_words))
    if not cfg.ordinal:
        return grade_word(grade, rng.integers(cfg.words_per_grade))
    centre = grade - 0.5
    position = rng.normal(centre, cfg.spread)
    position = min(max(position, 0.0), cfg.n_grades - 1e-9)
    block = int(position) + 1
    return grade_word(block, rng.integers(cfg.words_per_grade))


def generate_document(rng, doc_id, grade, cfg):
    n_sentences = int(rng.integers(cfg.min_sentences, cfg.max_sentences + 1))
    sentences = []
    for _ in range(n_sentences):
        length = cfg.base_length + cfg.length_step * (grade - 1)
        length = max(1, length + int(rng.integers(-1, 2)))
        sentences.append([_draw_word(rng, grade, cfg) for _ in range(length)])
    return RawDocument(id=doc_id, grade=grade, sentences=sentences)


def generate_corpus(n_docs=300, n_grades=3, seed=0, ordinal=False, **kw):
    """``n_docs`` documents dealt evenly over grades ``1..n_grades``
    (the first grades get one extra when the division is uneven).
    Deterministic under ``seed``."""
    cfg = SyntheticConfig(n_docs=n_docs, n_grades=n_grades, ordinal=ordinal,
                          **kw)
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(cfg.n_docs):
        grade = i % cfg.n_grades + 1
        docs.append(generate_document(rng, 'syn{:05d}'.format(i), grade,
                                      cfg))
    logger.info('generated %d synthetic documents over %d grades%s',
                len(docs), n_grades, ' (ordinal)' if ordinal else '')
    return docs
