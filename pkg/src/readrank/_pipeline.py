# -*- encoding: utf-8 -*-
# readrank: bidirectional long-document readability assessment.
# readrank/_pipeline.py
#
# BSD License applies; see the LICENSE file, or
# http://opensource.org/licenses/BSD-2-Clause
"""Stages of the bidirectional pipeline, and experiments built from
them.

1. ``train_hhnn_stage``: hierarchical encoder trained with difficulty
   embeddings; distils the sentence corpus.
2. ``train_dsdr_stage``: sentence encoder pretrained on that corpus,
   then the DSDR document model.
3. ``fit_head`` / ``predict_with_head``: classification, ordinal or
   ranking head on the backbone's document vectors.

The backbone is DSDR's document vector unless ``ranking.backbone`` is
``hhnn``, in which case the DSDR stage is skipped and heads read the
hierarchical encoder's document vector.
"""
from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional

import pandas as pd
import torch

from ._corpus import (build_vocabulary, check_grade_density, encode_corpus,
                      load_corpus, stratified_split, to_batch)
from ._dsdr import (InternalSentenceEncoder, build_dsdr, dsdr_forward,
                    dsdr_probs, dsdr_vectors, load_sentence_vectors,
                    pretrain_eptm, train_dsdr)
from ._encoder import init_parameters, load_static_vectors
from ._mdem import (build_model, document_vectors, extract_sentence_labels,
                    predict_documents, train_hhnn)
from ._metrics import average_reports, evaluate
from ._ranking import (build_head, build_subsets, predict_head,
                       rank_documents, sample_reference_subsets, train_head,
                       train_ranking)
from ._util import ConfigError, DataError, ENCODING

logger = logging.getLogger(__name__)


@dataclass
class PreparedCorpus:
    train: list
    test: list
    split: object
    vocab: object
    n_grades: int


@dataclass
class HhnnResult:
    model: object
    history: List[dict]
    records: list


@dataclass
class DsdrResult:
    model: object
    eptm_history: List[dict]
    history: List[dict]


@dataclass
class HeadResult:
    kind: str
    head: object
    history: List[dict]
    subsets: Optional[list] = None


@dataclass
class ExperimentResult:
    report: object
    predictions: List[dict]
    hhnn: Optional[HhnnResult] = None
    dsdr: Optional[DsdrResult] = None
    head: Optional[HeadResult] = None
    histories: dict = field(default_factory=dict)


def prepare_corpus(run, docs=None):
    """Load (unless ``docs`` is given), split, build the vocabulary on
    the training side and encode both sides."""
    if docs is None:
        path = run.paths.corpus
        if path is None:
            raise ConfigError('paths.corpus is not set')
        if not os.path.exists(path):
            raise ConfigError('no such corpus: {}'.format(path))
        docs, _ = load_corpus(path)
    n_grades = max(d.grade for d in docs)
    if n_grades < 2:
        raise DataError('corpus needs at least 2 grades')
    c = run.corpus
    split = stratified_split(docs, c.split_ratio, run.seed)
    check_grade_density(split.train, n_grades)
    vocab = build_vocabulary(split.train, c.min_freq, c.delimiter_set,
                             c.tokenizer)
    enc = run.encoder

    def encode(side):
        return encode_corpus(side, vocab, enc.m_max, enc.n_max,
                             c.delimiter_set, c.tokenizer)
    return PreparedCorpus(train=encode(split.train), test=encode(split.test),
                          split=split, vocab=vocab, n_grades=n_grades)


def encoder_config(run, prep):
    """The run's encoder config with the corpus' grade count."""
    return dataclasses.replace(run.encoder, n_grades=prep.n_grades)


def grades_of(docs):
    return [d.grade for d in docs]


# ----------------------------------------------------------------------
# Stages

def train_hhnn_stage(run, prep, progress=False):
    config = encoder_config(run, prep)
    model = build_model(config, len(prep.vocab), seed=run.seed)
    if run.paths.static_vectors:
        load_static_vectors(model.encoder.word_layer, prep.vocab,
                            run.paths.static_vectors)
    history = train_hhnn(model, prep.train, run.train, progress)
    records = extract_sentence_labels(model, prep.train,
                                      run.train.min_confidence)
    return HhnnResult(model=model, history=history, records=records)


def make_sentence_encoder(run, prep):
    if run.dsdr.sentence_encoder == 'external':
        if not run.paths.sentence_vectors:
            raise ConfigError('dsdr.sentence_encoder is "external" but '
                              'paths.sentence_vectors is not set')
        return load_sentence_vectors(run.paths.sentence_vectors)
    torch.manual_seed(run.seed)
    encoder = InternalSentenceEncoder(encoder_config(run, prep),
                                      len(prep.vocab))
    init_parameters(encoder)
    if run.paths.static_vectors:
        load_static_vectors(encoder.word_layer, prep.vocab,
                            run.paths.static_vectors)
    return encoder


def train_dsdr_stage(run, prep, records):
    if not records:
        raise DataError('sentence corpus is empty')
    config = encoder_config(run, prep)
    encoder = make_sentence_encoder(run, prep)
    encoder, eptm_history = pretrain_eptm(
        records, encoder, prep.vocab, prep.n_grades, config.m_max, run.train,
        run.dsdr.eptm_epochs, seed=run.seed)
    model = build_dsdr(encoder, config, run.dsdr, seed=run.seed)
    history = train_dsdr(model, prep.train, run.train, run.dsdr.epochs,
                         run.dsdr.freeze_eptm)
    return DsdrResult(model=model, eptm_history=eptm_history,
                      history=history)


def backbone_vectors(backbone, docs):
    if isinstance(backbone, DsdrResult):
        return dsdr_vectors(backbone.model, docs)
    return document_vectors(backbone.model, docs)


def backbone_encoder(backbone, docs):
    """``(encode, params)`` computing member vectors with gradients, for
    fine-tuning the backbone under the ranking head."""
    model = backbone.model
    if isinstance(backbone, DsdrResult):
        def encode(members):
            return dsdr_forward(model, [docs[m] for m in members],
                                grad=True).doc_vector
    else:
        def encode(members):
            ids, _ = to_batch([docs[m] for m in members])
            return model.encoder(ids).doc_vector
    return encode, [p for p in model.parameters() if p.requires_grad]


def fit_head(run, kind, train_vectors, train_grades, n_grades,
             backbone=None, train_docs=None):
    head = build_head(kind, train_vectors.shape[-1], n_grades, seed=run.seed)
    if kind != 'ranking':
        history = train_head(head, train_vectors, train_grades, run.train,
                             run.ranking.epochs)
        return HeadResult(kind=kind, head=head, history=history)
    subsets = build_subsets(train_grades, n_grades, seed=run.seed)
    encode, params = None, ()
    if run.ranking.finetune_backbone and backbone is not None:
        encode, params = backbone_encoder(backbone, train_docs)
    history = train_ranking(head, subsets, train_vectors, run.train,
                            run.ranking.epochs, encode, params)
    return HeadResult(kind=kind, head=head, history=history, subsets=subsets)


def predict_with_head(run, fitted, test_vectors, train_vectors):
    """Predicted grades and, for the ranking head, vote records."""
    if fitted.kind != 'ranking':
        return predict_head(fitted.head, test_vectors), None
    references = sample_reference_subsets(fitted.subsets,
                                          run.ranking.n_reference,
                                          seed=run.seed)
    return rank_documents(fitted.head, test_vectors, references,
                          train_vectors)


def prediction_rows(docs, preds, votes=None):
    rows = []
    for i, (doc, pred) in enumerate(zip(docs, preds)):
        row = {'id': doc.id, 'true': doc.grade, 'pred': int(pred)}
        if votes is not None:
            row['votes'] = votes[i].to_json()
        rows.append(row)
    return rows


# ----------------------------------------------------------------------
# Experiments

def run_experiment(run, prep=None, records=None, progress=False):
    """Train the configured backbone and head, predict the test side and
    score it.  ``records`` (a sentence corpus) skips the first stage when
    the DSDR backbone is used."""
    prep = prep or prepare_corpus(run)
    result = ExperimentResult(report=None, predictions=[])
    use_dsdr = run.ranking.backbone == 'dsdr'
    if records is None or not use_dsdr:
        result.hhnn = train_hhnn_stage(run, prep, progress)
        result.histories['hhnn'] = result.hhnn.history
        records = result.hhnn.records
    backbone = result.hhnn
    if use_dsdr:
        result.dsdr = backbone = train_dsdr_stage(run, prep, records)
        result.histories['eptm'] = result.dsdr.eptm_history
        result.histories['dsdr'] = result.dsdr.history

    votes = None
    if run.head == 'cls':
        # the backbone's own classifier
        if use_dsdr:
            probs = dsdr_probs(backbone.model, prep.test)
        else:
            probs = predict_documents(backbone.model, prep.test)
        preds = (probs.argmax(dim=-1) + 1).tolist()
    else:
        train_vectors = backbone_vectors(backbone, prep.train)
        result.head = fit_head(run, run.head, train_vectors,
                               grades_of(prep.train), prep.n_grades,
                               backbone, prep.train)
        result.histories['head'] = result.head.history
        if run.ranking.finetune_backbone and run.head == 'ranking':
            train_vectors = backbone_vectors(backbone, prep.train)
        test_vectors = backbone_vectors(backbone, prep.test)
        preds, votes = predict_with_head(run, result.head, test_vectors,
                                         train_vectors)
    result.report = evaluate(preds, grades_of(prep.test), prep.n_grades)
    result.predictions = prediction_rows(prep.test, preds, votes)
    logger.info('%s backbone, %s head: acc=%.4f qwk=%.4f',
                run.ranking.backbone, run.head, result.report.acc,
                result.report.qwk)
    return result


def repeated_experiments(run, prep=None, records=None, progress=False):
    """``run.repeats`` experiments under seeds ``seed .. seed+repeats-1``
    on one fixed split.  Returns the results and the averaged report."""
    prep = prep or prepare_corpus(run)
    results = [run_experiment(run.with_seed(run.seed + i), prep, records,
                              progress)
               for i in range(run.repeats)]
    return results, average_reports([r.report for r in results])


ABLATIONS = (
    ('DSDRRM', {}),
    ('-Context', {'encoder': {'context_mode': 'none'}}),
    ('-MDEM', {'train': {'lam': 0.0}, 'ranking': {'backbone': 'hhnn'},
               'head': 'ranking'}),
    ('-Ranking Model', {'head': 'cls'}),
    ('SDW', {'encoder': {'context_mode': 'single'}}),
)


def ablation_config(run, changes):
    changes = dict(changes)
    head = changes.pop('head', 'ranking')
    return dataclasses.replace(run.replace(**changes), head=head)


def run_ablation(run, prep=None, rows=None):
    """One report per ablation row, each on the same split."""
    prep = prep or prepare_corpus(run)
    out = []
    for name, changes in ABLATIONS:
        if rows is not None and name not in rows:
            continue
        logger.info('ablation row %s', name)
        result = run_experiment(ablation_config(run, changes), prep)
        out.append((name, result))
    return out


def compare_heads(run, prep=None, seeds=None, heads=('cls', 'ordinal',
                                                     'ranking')):
    """Train the backbone once per seed and every head on the same
    document vectors.  Returns one row per (seed, head)."""
    prep = prep or prepare_corpus(run)
    seeds = seeds or [run.seed + i for i in range(max(run.repeats, 3))]
    run = run.replace(ranking={'finetune_backbone': False})
    rows = []
    for seed in seeds:
        seeded = run.with_seed(seed)
        hhnn = train_hhnn_stage(seeded, prep)
        backbone = hhnn
        if run.ranking.backbone == 'dsdr':
            backbone = train_dsdr_stage(seeded, prep, hhnn.records)
        train_vectors = backbone_vectors(backbone, prep.train)
        test_vectors = backbone_vectors(backbone, prep.test)
        for kind in heads:
            fitted = fit_head(seeded, kind, train_vectors,
                              grades_of(prep.train), prep.n_grades)
            preds, _ = predict_with_head(seeded, fitted, test_vectors,
                                         train_vectors)
            report = evaluate(preds, grades_of(prep.test), prep.n_grades)
            row = {'seed': seed, 'head': kind}
            row.update(report.metrics())
            rows.append(row)
    return rows


def summarize_heads(rows):
    """Mean metrics per head over seeds."""
    table = pd.DataFrame(rows)
    means = table.drop(columns=['seed']).groupby('head', sort=False).mean()
    return {head: {k: float(v) for k, v in values.items()}
            for head, values in means.iterrows()}


def write_history_csv(path, rows):
    """Training log, one row per epoch; absent values are empty cells."""
    pd.DataFrame(rows).to_csv(path, index=False, na_rep='',
                              float_format='%.10g', encoding=ENCODING,
                              lineterminator='\n')
