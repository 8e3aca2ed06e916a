# -*- encoding: utf-8 -*-
# readrank: bidirectional long-document readability assessment.
# readrank/_cli.py
#
# BSD License applies; see the LICENSE file, or
# http://opensource.org/licenses/BSD-2-Clause
"""Command-line front end; see ``readrank_cli --help``.

Every command resolves a :py:class:`RunConfig`, writes its artifacts
under ``paths.out`` together with ``run.json`` (the resolved config and
its hash), and stamps the hash into every JSON artifact it writes.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __VERSION__
from ._checkpoint import load_checkpoint, restore, save_checkpoint
from ._config import HEAD_KINDS, PRESETS, config_hash, load_config
from ._corpus import (Vocabulary, encode_corpus, load_corpus, save_corpus,
                      stratified_split)
from ._encoder import EncoderConfig
from ._features import FEATURE_NAMES, FeatureResources, feature_table, \
    write_feature_csv
from ._mdem import (build_model, extract_sentence_labels,
                    load_sentence_corpus, predict_documents,
                    save_sentence_corpus)
from ._metrics import evaluate
from ._pipeline import (ABLATIONS, compare_heads, grades_of, prepare_corpus,
                        repeated_experiments, run_ablation, run_experiment,
                        summarize_heads, train_hhnn_stage,
                        write_history_csv)
from ._ranking import BACKBONES
from ._synthetic import generate_corpus
from ._util import (ConfigError, DataError, ReadrankError, write_json,
                    write_jsonl)

logger = logging.getLogger(__name__)

PROG = 'readrank_cli'
SENTENCES = 'sentences.jsonl'


# ----------------------------------------------------------------------
# Helpers

def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def stamp(obj, run):
    out = dict(obj)
    out['config_hash'] = config_hash(run)
    return out


def require_corpus(run):
    if run.paths.corpus is None or not os.path.exists(run.paths.corpus):
        raise ConfigError('corpus not found: {}'.format(run.paths.corpus))
    return run.paths.corpus


def write_run_json(run):
    out = _ensure_dir(run.paths.out)
    write_json(os.path.join(out, 'run.json'),
               {'config': run.to_json(), 'config_hash': config_hash(run),
                'version': __VERSION__})


def checkpoint_meta(run, kind, **extra):
    meta = {'kind': kind, 'config': run.to_json(),
            'config_hash': config_hash(run)}
    meta.update(extra)
    return meta


def save_hhnn(run, prep, hhnn, directory):
    save_checkpoint(directory, hhnn.model.state_dict(), checkpoint_meta(
        run, 'hhnn', encoder=hhnn.model.config.to_json(),
        vocab=prep.vocab.to_json(), n_grades=prep.n_grades))
    write_history_csv(os.path.join(directory, 'train_log.csv'),
                      hhnn.history)


def load_hhnn(directory):
    manifest, state = load_checkpoint(directory)
    if manifest.get('kind') != 'hhnn':
        raise DataError('{} is not a train-hhnn checkpoint'.format(directory))
    config = EncoderConfig(**manifest['encoder'])
    vocab = Vocabulary.from_json(manifest['vocab'])
    model = restore(build_model(config, len(vocab)), state)
    return model, vocab, manifest


def write_predictions(run, result, out):
    write_jsonl(os.path.join(out, 'predictions.jsonl'), result.predictions)
    report = stamp(result.report.to_json(), run)
    report.update(head=run.head, backbone=run.ranking.backbone,
                  seed=run.seed)
    write_json(os.path.join(out, 'report.json'), report)
    return report


# ----------------------------------------------------------------------
# Commands

def cmd_split_corpus(run, args):
    docs, _ = load_corpus(require_corpus(run))
    split = stratified_split(docs, run.corpus.split_ratio, run.seed)
    out = _ensure_dir(run.paths.out)
    save_corpus(os.path.join(out, 'train.jsonl'), split.train)
    save_corpus(os.path.join(out, 'test.jsonl'), split.test)
    write_json(os.path.join(out, 'split.json'), stamp(split.ids(), run))
    logger.info('split %d documents: %d train, %d test', len(docs),
                len(split.train), len(split.test))


def cmd_train_hhnn(run, args):
    prep = prepare_corpus(run)
    hhnn = train_hhnn_stage(run, prep, progress=args.verbose > 0)
    out = _ensure_dir(run.paths.out)
    save_hhnn(run, prep, hhnn, os.path.join(out, 'hhnn'))
    save_sentence_corpus(os.path.join(out, SENTENCES), hhnn.records)
    logger.info('sentence corpus: %d sentences from %d training documents',
                len(hhnn.records), len(prep.train))
    probs = predict_documents(hhnn.model, prep.test)
    report = evaluate((probs.argmax(dim=-1) + 1).tolist(),
                      grades_of(prep.test), prep.n_grades)
    write_json(os.path.join(out, 'hhnn', 'report.json'),
               stamp(report.to_json(), run))


def cmd_label_sentences(run, args):
    directory = args.checkpoint or os.path.join(run.paths.out, 'hhnn')
    model, vocab, manifest = load_hhnn(directory)
    docs, n_grades = load_corpus(require_corpus(run))
    if n_grades > manifest['n_grades']:
        raise DataError('corpus has grade {} but the checkpoint knows {}'
                        .format(n_grades, manifest['n_grades']))
    config = model.config
    tdocs = encode_corpus(docs, vocab, config.m_max, config.n_max,
                          run.corpus.delimiter_set, run.corpus.tokenizer)
    records = extract_sentence_labels(model, tdocs,
                                      run.train.min_confidence)
    out = _ensure_dir(run.paths.out)
    save_sentence_corpus(os.path.join(out, SENTENCES), records)
    logger.info('labelled %d sentences', len(records))


def sentence_corpus_path(run):
    if run.paths.sentence_corpus:
        return run.paths.sentence_corpus
    staged = os.path.join(run.paths.out, SENTENCES)
    if os.path.exists(staged):
        return staged
    raise DataError('no sentence corpus: run train-hhnn into {} first or '
                    'pass --sentence-corpus'.format(run.paths.out))


def cmd_train_dsdrrm(run, args):
    path = sentence_corpus_path(run)
    prep = prepare_corpus(run)
    records = load_sentence_corpus(path, prep.n_grades)
    if run.ranking.backbone != 'dsdr':
        logger.warning('ranking.backbone is %r; the DSDR stage is skipped',
                       run.ranking.backbone)
    result = run_experiment(run, prep, records, progress=args.verbose > 0)
    out = _ensure_dir(run.paths.out)
    vocab = prep.vocab.to_json()
    if result.dsdr is not None:
        model = result.dsdr.model
        save_checkpoint(os.path.join(out, 'eptm'),
                        model.sentence_encoder.state_dict(),
                        checkpoint_meta(run, 'eptm', vocab=vocab))
        write_history_csv(os.path.join(out, 'eptm', 'train_log.csv'),
                          result.dsdr.eptm_history)
        save_checkpoint(os.path.join(out, 'dsdr'), model.state_dict(),
                        checkpoint_meta(run, 'dsdr', vocab=vocab,
                                        n_grades=prep.n_grades,
                                        dsdr=run.dsdr.to_json()))
        write_history_csv(os.path.join(out, 'dsdr', 'train_log.csv'),
                          result.dsdr.history)
    if result.hhnn is not None:
        save_hhnn(run, prep, result.hhnn, os.path.join(out, 'hhnn'))
    if result.head is not None:
        subsets = [list(s.members) for s in result.head.subsets or []]
        save_checkpoint(os.path.join(out, 'head'),
                        result.head.head.state_dict(),
                        checkpoint_meta(run, result.head.kind,
                                        n_grades=prep.n_grades,
                                        subsets=subsets,
                                        train_ids=[d.id for d in prep.train]))
        write_history_csv(os.path.join(out, 'head', 'train_log.csv'),
                          result.head.history)
    write_predictions(run, result, out)


def cmd_evaluate(run, args):
    records = None
    if run.paths.sentence_corpus:
        records = load_sentence_corpus(run.paths.sentence_corpus)
    prep = prepare_corpus(run)
    out = _ensure_dir(run.paths.out)
    if run.repeats == 1:
        result = run_experiment(run, prep, records,
                                progress=args.verbose > 0)
        report = write_predictions(run, result, out)
    else:
        results, report = repeated_experiments(run, prep, records,
                                               progress=args.verbose > 0)
        write_jsonl(os.path.join(out, 'predictions.jsonl'),
                    results[0].predictions)
        report = stamp(report, run)
        report.update(head=run.head, backbone=run.ranking.backbone,
                      seeds=[run.seed + i for i in range(run.repeats)])
        write_json(os.path.join(out, 'report.json'), report)
    if args.verbose:
        keys = [k for k in sorted(report) if k.startswith(('acc', 'adj',
                                                           'f1', 'prec',
                                                           'rec', 'qwk',
                                                           'mean_'))]
        for key in keys:
            print('{}: {:.4f}'.format(key, report[key]), file=sys.stderr)


def cmd_extract_features(run, args):
    docs, _ = load_corpus(require_corpus(run))
    resources = FeatureResources.from_dir(run.paths.resources)
    names = args.features.split(',') if args.features else None
    if names:
        unknown = [n for n in names if n not in FEATURE_NAMES]
        if unknown:
            raise ConfigError('unknown features: {}'.format(
                ', '.join(unknown)))
    table = feature_table(docs, resources, names, run.corpus.tokenizer)
    out = _ensure_dir(run.paths.out)
    write_feature_csv(os.path.join(out, 'features.csv'), table)
    logger.info('wrote %d x %d feature table', *table.shape)


def cmd_synth_corpus(run, args):
    docs = generate_corpus(n_docs=args.n_docs, n_grades=args.n_grades,
                           seed=run.seed, ordinal=args.ordinal)
    out = _ensure_dir(run.paths.out)
    save_corpus(os.path.join(out, 'corpus.jsonl'), docs)


def _slug(name):
    return name.strip('-').replace(' ', '_').lower() or 'row'


def cmd_ablate(run, args):
    prep = prepare_corpus(run)
    out = _ensure_dir(os.path.join(run.paths.out, 'ablation'))
    if args.compare_heads:
        rows = compare_heads(run, prep)
        write_json(os.path.join(out, 'heads.json'), stamp(
            {'rows': rows, 'means': summarize_heads(rows)}, run))
        return
    summary = []
    for name, result in run_ablation(run, prep, args.rows):
        row_dir = _ensure_dir(os.path.join(out, _slug(name)))
        report = stamp(result.report.to_json(), run)
        report['row'] = name
        write_json(os.path.join(row_dir, 'report.json'), report)
        entry = {'row': name}
        entry.update(result.report.metrics())
        summary.append(entry)
    write_json(os.path.join(out, 'summary.json'),
               stamp({'rows': summary}, run))


COMMANDS = {
    'split-corpus': cmd_split_corpus,
    'train-hhnn': cmd_train_hhnn,
    'label-sentences': cmd_label_sentences,
    'train-dsdrrm': cmd_train_dsdrrm,
    'evaluate': cmd_evaluate,
    'extract-features': cmd_extract_features,
    'synth-corpus': cmd_synth_corpus,
    'ablate': cmd_ablate,
}


# ----------------------------------------------------------------------
# Argument parsing

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON run configuration')
    common.add_argument('--corpus', help='corpus JSONL (paths.corpus)')
    common.add_argument('--out', help='output directory (paths.out)')
    common.add_argument('--seed', type=int)
    common.add_argument('--preset', choices=sorted(PRESETS))
    common.add_argument('--head', choices=HEAD_KINDS)
    common.add_argument('--backbone', choices=BACKBONES)
    common.add_argument('--repeats', type=int)
    common.add_argument('--sentence-corpus',
                        help='sentence JSONL from train-hhnn or '
                        'label-sentences')
    common.add_argument('--verbose', '-v', action='count', default=0)

    parser = argparse.ArgumentParser(
        prog=PROG, description='Bidirectional long-document readability '
        'assessment.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __VERSION__)
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True
    sub.add_parser('split-corpus', parents=[common],
                   help='stratified train/test split')
    sub.add_parser('train-hhnn', parents=[common],
                   help='train the hierarchical encoder and distil '
                   'sentence labels')
    p = sub.add_parser('label-sentences', parents=[common],
                       help='label sentences with a trained encoder')
    p.add_argument('--checkpoint', help='train-hhnn checkpoint directory')
    sub.add_parser('train-dsdrrm', parents=[common],
                   help='pretrain the sentence encoder, train DSDR and '
                   'the head')
    sub.add_parser('evaluate', parents=[common],
                   help='train and score the configured pipeline')
    p = sub.add_parser('extract-features', parents=[common],
                       help='explicit linguistic features as CSV')
    p.add_argument('--features', help='comma-separated feature names')
    p = sub.add_parser('synth-corpus', parents=[common],
                       help='write a synthetic graded corpus')
    p.add_argument('--n-docs', type=int, default=300)
    p.add_argument('--n-grades', type=int, default=3)
    p.add_argument('--ordinal', action='store_true')
    p = sub.add_parser('ablate', parents=[common],
                       help='ablation rows or a head comparison')
    p.add_argument('--rows', nargs='+',
                   choices=[name for name, _ in ABLATIONS])
    p.add_argument('--compare-heads', action='store_true')
    return parser


def overrides_from(args):
    return {
        'seed': args.seed, 'head': args.head, 'preset': args.preset,
        'repeats': args.repeats, 'paths.corpus': args.corpus,
        'paths.out': args.out, 'paths.sentence_corpus': args.sentence_corpus,
        'ranking.backbone': args.backbone,
    }


def configure_logging(verbose):
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(verbose, 2)]
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(name)s: %(levelname)s: %(message)s')


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        run = load_config(args.config, overrides_from(args))
        write_run_json(run)
        COMMANDS[args.command](run, args)
    except ReadrankError as err:
        print('{}: error: {}'.format(PROG, err), file=sys.stderr)
        return err.exit_code
    return 0
