# -*- encoding: utf-8 -*-
# readrank: bidirectional long-document readability assessment.
# readrank/__init__.py
#
# BSD License applies; see the LICENSE file, or
# http://opensource.org/licenses/BSD-2-Clause
"""
The main library namespace of readrank.  Names available here are the
stable API; the underscore-prefixed submodules behind them may be
refactored at any time.

The pipeline runs in two directions.  A hierarchical encoder learns
document grades while a difficulty embedding matrix distils a grade for
every sentence (:py:func:`train_hhnn`, :py:func:`extract_sentence_labels`).
Those sentence labels then pretrain the sentence encoder of the forward
model (:py:func:`pretrain_eptm`, :py:func:`train_dsdr`), whose document
vectors feed a pairwise ranking head (:py:func:`train_ranking`,
:py:func:`infer_grade`).

Requires Python 3.8 or newer.
"""
from __future__ import annotations

__VERSION__ = '0.3.0'

from ._util import ConfigError, DataError, NumericalError, ReadrankError
from ._corpus import (CorpusSplit, RawDocument, TokenizedDocument,
                      Vocabulary, build_vocabulary, encode_corpus,
                      encode_document, load_corpus, split_sentences,
                      stratified_split, tokenize)
from ._encoder import EncoderConfig, HierarchicalEncoder, build_encoder
from ._mdem import (MDEM, ReadabilityModel, SentenceRecord, TrainConfig,
                    build_model, confidence_mask, consistency_loss,
                    extract_sentence_labels, joint_loss, sharpen,
                    supervised_loss, train_hhnn, tsa_threshold)
from ._dsdr import (DsdrConfig, DsdrModel, ExternalSentenceEncoder,
                    InternalSentenceEncoder, SentenceEncoder, build_dsdr,
                    fuse, multiview, pretrain_eptm, train_dsdr)
from ._ranking import (ClassificationHead, DataSubset, OrdinalHead,
                       PairExample, RankingConfig, RankingHead, VoteRecord,
                       build_subsets, hard_vote, infer_grade, make_pairs,
                       ordinal_loss, pair_logits, predict_ordinal,
                       train_ranking)
from ._metrics import (EvalReport, accuracy, adjacent_accuracy, evaluate,
                       qwk, weighted_prf)
from ._features import (FeatureResources, TaggedText, density_features,
                        extract_all, mtld, rttr, ttr)
from ._config import RunConfig, config_hash, load_config
from ._checkpoint import load_checkpoint, save_checkpoint
from ._synthetic import generate_corpus
from ._pipeline import run_experiment


def load_and_train(corpus_path, config_path=None, **overrides):
    """Resolve a config for ``corpus_path`` and run one experiment with
    it; ``overrides`` use the command line's ``section.key`` names, e.g.
    ``load_and_train('corpus.jsonl', **{'train.epochs': 5})``.

    Returns an ``ExperimentResult`` carrying the trained stages, the
    test predictions and an :py:class:`EvalReport`.
    """
    overrides['paths.corpus'] = corpus_path
    return run_experiment(load_config(config_path, overrides))
