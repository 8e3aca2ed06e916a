# -*- encoding: utf-8 -*-
"""Small shapes and corpora shared by the test modules."""
from __future__ import print_function, unicode_literals

import os
import sys

HERE = os.path.abspath(os.path.dirname(__file__))
DOTDOT = os.path.abspath(os.path.join(HERE, '..'))
sys.path.insert(0, os.path.join(DOTDOT, 'src'))

from readrank._config import load_config
from readrank._corpus import build_vocabulary, encode_corpus
from readrank._encoder import EncoderConfig
from readrank._mdem import TrainConfig
from readrank._synthetic import generate_corpus

CORPUS_SMALL = os.path.join(HERE, 'corpus_small.jsonl')
RESOURCES = os.path.join(HERE, 'resources')


def tiny_encoder_config(**kw):
    values = dict(d_embed=8, d_hidden=4, n_kernels=8, window=3, n_heads=2,
                  n_layers=1, n_grades=3, n_max=4, m_max=6)
    values.update(kw)
    return EncoderConfig(**values)


def tiny_train_config(**kw):
    values = dict(epochs=2, batch_size=4, lr=1e-2, seed=0)
    values.update(kw)
    return TrainConfig(**values)


def tiny_docs(n_docs=12, n_grades=3, seed=0, **kw):
    values = dict(min_sentences=2, max_sentences=4, base_length=2,
                  length_step=1, words_per_grade=5, filler_words=3)
    values.update(kw)
    return generate_corpus(n_docs=n_docs, n_grades=n_grades, seed=seed,
                           **values)


def tiny_tokenized(n_docs=12, n_grades=3, seed=0, config=None, **kw):
    config = config or tiny_encoder_config(n_grades=n_grades)
    docs = tiny_docs(n_docs, n_grades, seed, **kw)
    vocab = build_vocabulary(docs)
    return encode_corpus(docs, vocab, config.m_max, config.n_max), vocab


def tiny_run(corpus, out, **overrides):
    """A run config with tiny shapes and short training."""
    values = {
        'paths.corpus': corpus, 'paths.out': out,
        'encoder.d_embed': 8, 'encoder.d_hidden': 4, 'encoder.n_kernels': 8,
        'encoder.n_heads': 2, 'encoder.n_layers': 1, 'encoder.n_max': 6,
        'encoder.m_max': 8, 'train.epochs': 2, 'train.batch_size': 8,
        'train.lr': 1e-2, 'dsdr.epochs': 2, 'dsdr.eptm_epochs': 2,
        'ranking.epochs': 2, 'ranking.n_reference': 2,
    }
    values.update(overrides)
    return load_config(None, values)
