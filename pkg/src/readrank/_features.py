# -*- encoding: utf-8 -*-
# readrank: bidirectional long-document readability assessment.
# readrank/_features.py
#
# BSD License applies; see the LICENSE file, or
# http://opensource.org/licenses/BSD-2-Clause
"""Explicit linguistic features for external classifiers.

Features are computed from a :py:class:`TaggedText` (tokens, optional
part-of-speech tags in the THULAC tag set, optional named entities) and
a set of :py:class:`FeatureResources` read from a directory.  A feature
whose tags or resource is missing comes out as ``None`` (an empty CSV
cell), never as 0.

Resource directory layout, every file optional::

    function_words.txt        one term per line
    pronouns.txt
    positive_connectives.txt
    negative_connectives.txt
    difficult_words.txt
    frequency.tsv             token<TAB>count
    strokes.tsv               char<TAB>stroke count
"""
from __future__ import annotations

import collections
import io
import logging
import math
import os
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, List, Optional

import pandas as pd

from ._util import DataError, ENCODING, read_word_list

logger = logging.getLogger(__name__)

MTLD_THRESHOLD = 0.72

# THULAC tags
NOUN_TAGS = frozenset(['n', 'np', 'ns', 'ni', 'nz'])
VERB_TAGS = frozenset(['v'])
ADJECTIVE_TAGS = frozenset(['a'])
CONTENT_TAGS = frozenset(['n', 'np', 'ns', 'ni', 'nz', 'm', 'q', 'mq', 't',
                          'f', 's', 'v', 'vm', 'vd', 'a', 'j'])
PUNCTUATION_TAGS = frozenset(['w'])


@dataclass
class TaggedText:
    tokens: List[str]
    pos_tags: Optional[List[str]] = None
    n_sentences: int = 1
    entities: Optional[List[str]] = None

    def __post_init__(self):
        if self.pos_tags is not None and \
                len(self.pos_tags) != len(self.tokens):
            raise ValueError('{} tags for {} tokens'.format(
                len(self.pos_tags), len(self.tokens)))
        if self.n_sentences < 1:
            raise ValueError('n_sentences must be positive')

    @classmethod
    def from_document(cls, doc, tokenizer='auto'):
        """Flatten a :py:class:`RawDocument`; tags are kept only when the
        document carries them aligned with its sentences."""
        sentences = doc.sentence_tokens(tokenizer=tokenizer)
        tokens = [t for s in sentences for t in s]
        tags = None
        if doc.pos is not None and doc.sentences is not None:
            tags = [t for s in doc.pos for t in s]
        return cls(tokens=tokens, pos_tags=tags, n_sentences=len(sentences),
                   entities=doc.entities)


@dataclass
class FeatureResources:
    function_words: Optional[FrozenSet[str]] = None
    pronouns: Optional[FrozenSet[str]] = None
    positive_connectives: Optional[FrozenSet[str]] = None
    negative_connectives: Optional[FrozenSet[str]] = None
    difficult_words: Optional[FrozenSet[str]] = None
    frequencies: Optional[Dict[str, int]] = None
    strokes: Optional[Dict[str, int]] = None
    low_stroke: int = 5
    high_stroke: int = 15

    @classmethod
    def from_dir(cls, path, low_stroke=5, high_stroke=15):
        """Load whichever resource files exist under ``path``."""
        if path is None:
            return cls(low_stroke=low_stroke, high_stroke=high_stroke)
        if not os.path.isdir(path):
            raise DataError('no such resource directory: {}'.format(path))

        def words(name):
            full = os.path.join(path, name)
            if not os.path.exists(full):
                logger.warning('resource %s missing; dependent features '
                               'will be null', name)
                return None
            return frozenset(read_word_list(full))

        def table(name):
            full = os.path.join(path, name)
            if not os.path.exists(full):
                logger.warning('resource %s missing; dependent features '
                               'will be null', name)
                return None
            return read_count_table(full)

        return cls(function_words=words('function_words.txt'),
                   pronouns=words('pronouns.txt'),
                   positive_connectives=words('positive_connectives.txt'),
                   negative_connectives=words('negative_connectives.txt'),
                   difficult_words=words('difficult_words.txt'),
                   frequencies=table('frequency.tsv'),
                   strokes=table('strokes.tsv'),
                   low_stroke=low_stroke, high_stroke=high_stroke)


def read_count_table(path):
    """Read a ``key<TAB>count`` TSV into a dict."""
    out = {}
    with io.open(path, encoding=ENCODING) as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip('\n')
            if not line.strip() or line.startswith('#'):
                continue
            key, sep, count = line.partition('\t')
            try:
                out[key] = int(count)
            except ValueError:
                raise DataError('{}:{}: expected key<TAB>count'.format(
                    path, lineno))
            if not sep:
                raise DataError('{}:{}: expected key<TAB>count'.format(
                    path, lineno))
    return out


# ----------------------------------------------------------------------
# Lexical diversity

def _check_tokens(tokens, minimum=1):
    if len(tokens) < minimum:
        raise ValueError('need at least {} token(s), got {}'.format(
            minimum, len(tokens)))


def ttr(tokens):
    """Distinct over total tokens.

    >>> ttr('a a b b'.split())
    0.5
    """
    _check_tokens(tokens)
    return len(set(tokens)) / len(tokens)


def rttr(tokens):
    """Distinct tokens over the square root of the token count.

    >>> rttr('a a b b'.split())
    1.0
    """
    _check_tokens(tokens)
    return len(set(tokens)) / math.sqrt(len(tokens))


def _mtld_pass(tokens, threshold):
    factors = 0.0
    types = set()
    count = 0
    current = 1.0
    for token in tokens:
        count += 1
        types.add(token)
        current = len(types) / count
        if current <= threshold:
            factors += 1
            types = set()
            count = 0
    if count:
        factors += (1.0 - current) / (1.0 - threshold)
    if factors == 0:
        return float(len(tokens))
    return len(tokens) / factors


def mtld(tokens, threshold=MTLD_THRESHOLD):
    """Measure of textual lexical diversity: the mean length of runs
    whose type-token ratio stays above ``threshold``, averaged over a
    forward and a backward pass.

    >>> mtld(['a'] * 50)
    2.0
    """
    _check_tokens(tokens, 2)
    tokens = list(tokens)
    forward = _mtld_pass(tokens, threshold)
    backward = _mtld_pass(tokens[::-1], threshold)
    return (forward + backward) / 2


# ----------------------------------------------------------------------
# Density features

def match_terms(tokens, vocabulary):
    """The terms of ``vocabulary`` found in ``tokens``, scanning left to
    right and taking at each position the longest run of consecutive
    tokens whose concatenation is a term.  Character-split text thus
    matches multi-character words, and a matched run is not counted
    again inside a longer one.

    >>> match_terms(list('但是我们去'), {'但是', '我', '我们'})
    ['但是', '我们']
    >>> match_terms(['但是', '好'], {'但是'})
    ['但是']
    """
    longest = max((len(w) for w in vocabulary), default=0)
    found = []
    i = 0
    while i < len(tokens):
        best, end = None, i + 1
        text = ''
        for j in range(i, len(tokens)):
            text += tokens[j]
            if len(text) > longest:
                break
            if text in vocabulary:
                best, end = text, j + 1
        if best is not None:
            found.append(best)
        i = end
    return found


def _ratio(num, den):
    return num / den if den else 0.0


def tag_class_features(prefix, tagged, tags):
    """Percentage, unique percentage, unique count and per-sentence
    averages for the words whose tag is in ``tags``."""
    names = ['{}_percentage', 'uni_{}_percentage', 'uni_{}_num',
             'avg_sent_{}', 'avg_sent_uni_{}']
    names = [n.format(prefix) for n in names]
    if tagged.pos_tags is None:
        return dict.fromkeys(names)
    words = [w for w, t in zip(tagged.tokens, tagged.pos_tags) if t in tags]
    unique = set(words)
    values = [_ratio(len(words), len(tagged.tokens)),
              _ratio(len(unique), len(set(tagged.tokens))),
              len(unique),
              len(words) / tagged.n_sentences,
              len(unique) / tagged.n_sentences]
    return dict(zip(names, values))


def stroke_features(tagged, resources):
    names = ('low_stroke', 'medium_stroke', 'high_stroke', 'average_stroke')
    if resources.strokes is None:
        return dict.fromkeys(names)
    counts = [resources.strokes[c] for token in tagged.tokens
              for c in token if c in resources.strokes]
    low = sum(1 for s in counts if s <= resources.low_stroke)
    high = sum(1 for s in counts if s >= resources.high_stroke)
    return {'low_stroke': low, 'medium_stroke': len(counts) - low - high,
            'high_stroke': high,
            'average_stroke': (sum(counts) / len(counts)) if counts
            else None}


def density_features(tagged, resources=None):
    """Tag-class, content-word, function-word and stroke statistics.

    >>> density_features(TaggedText(['书', '山'], ['n', 'n']))['n_percentage']
    1.0
    """
    resources = resources or FeatureResources()
    out = {}
    out.update(tag_class_features('adj', tagged, ADJECTIVE_TAGS))
    out.update(tag_class_features('n', tagged, NOUN_TAGS))
    out.update(tag_class_features('v', tagged, VERB_TAGS))
    if tagged.pos_tags is None:
        out['real_word_num'] = out['real_word_density'] = None
    else:
        content = sum(1 for t in tagged.pos_tags if t in CONTENT_TAGS)
        out['real_word_num'] = content
        out['real_word_density'] = _ratio(content, len(tagged.tokens))
    if resources.function_words is None:
        out['function_num'] = out['function_density'] = None
    else:
        count = len(match_terms(tagged.tokens, resources.function_words))
        out['function_num'] = count
        out['function_density'] = _ratio(count, len(tagged.tokens))
    out.update(stroke_features(tagged, resources))
    return out


# ----------------------------------------------------------------------
# Registry

def _count_in(words):
    def count(tagged, resources):
        vocabulary = getattr(resources, words)
        if vocabulary is None:
            return None
        return len(match_terms(tagged.tokens, vocabulary))
    return count


def _connectives(tagged, resources):
    lists = [w for w in (resources.positive_connectives,
                         resources.negative_connectives) if w is not None]
    if not lists:
        return None
    return len(match_terms(tagged.tokens, frozenset().union(*lists)))


def _difficult_words(tagged, resources):
    if resources.difficult_words is None:
        return None
    return len(set(match_terms(tagged.tokens, resources.difficult_words)))


def _log_frequency(tagged, resources):
    """Mean log relative frequency of the content words found in the
    frequency lexicon."""
    if resources.frequencies is None or tagged.pos_tags is None:
        return None
    total = sum(resources.frequencies.values())
    logs = [math.log(resources.frequencies[w] / total)
            for w, t in zip(tagged.tokens, tagged.pos_tags)
            if t in CONTENT_TAGS and resources.frequencies.get(w, 0) > 0]
    return sum(logs) / len(logs) if logs else None


def _entity_features(tagged, resources):
    names = ('entity_num', 'uni_entity_num', 'entity_percentage',
             'uni_entity_percentage', 'avg_sent_entity',
             'avg_sent_uni_entity')
    if tagged.entities is None:
        return dict.fromkeys(names)
    unique = set(tagged.entities)
    values = (len(tagged.entities), len(unique),
              _ratio(len(tagged.entities), len(tagged.tokens)),
              _ratio(len(unique), len(set(tagged.tokens))),
              len(tagged.entities) / tagged.n_sentences,
              len(unique) / tagged.n_sentences)
    return dict(zip(names, values))


def _lexical_features(tagged, resources):
    tokens = tagged.tokens
    return {
        'char_num': sum(len(t) for t in tokens),
        'word_num': len(tokens),
        'TTR': ttr(tokens),
        'RTTR': rttr(tokens),
        'MTLD': mtld(tokens) if len(tokens) >= 2 else None,
        'two_word': sum(1 for t in tokens if len(t) == 2),
        'three_word': sum(1 for t in tokens if len(t) >= 3),
        'RWFLA': _log_frequency(tagged, resources),
        'difficult_word_num': _difficult_words(tagged, resources),
    }


def _cohesion_features(tagged, resources):
    return {
        'pronoun_num': _count_in('pronouns')(tagged, resources),
        'conjunction_num': _connectives(tagged, resources),
        'pos_conjunction': _count_in('positive_connectives')(tagged,
                                                            resources),
        'neg_conjunction': _count_in('negative_connectives')(tagged,
                                                            resources),
    }


# Feature groups in output order; each returns a dict of named values.
GROUPS: List[Callable] = [_lexical_features, density_features,
                          _entity_features, _cohesion_features]


def _feature_names():
    probe = TaggedText(tokens=['a', 'b'])
    names = []
    for group in GROUPS:
        names.extend(group(probe, FeatureResources()))
    return names


FEATURE_NAMES = _feature_names()


def extract_all(tagged, resources=None, names=None):
    """All registered features of ``tagged`` (or only ``names``, in the
    order given)."""
    resources = resources or FeatureResources()
    if names is not None:
        unknown = [n for n in names if n not in FEATURE_NAMES]
        if unknown:
            raise ValueError('unknown features: {}'.format(unknown))
    values = {}
    for group in GROUPS:
        values.update(group(tagged, resources))
    chosen = FEATURE_NAMES if names is None else names
    return collections.OrderedDict((n, values[n]) for n in chosen)


def feature_table(docs, resources=None, names=None, tokenizer='auto'):
    """One row per document, ``id`` and ``grade`` first, as a
    :py:class:`pandas.DataFrame`."""
    rows = []
    for doc in docs:
        row = collections.OrderedDict([('id', doc.id), ('grade', doc.grade)])
        row.update(extract_all(TaggedText.from_document(doc, tokenizer),
                               resources, names))
        rows.append(row)
    columns = ['id', 'grade'] + list(FEATURE_NAMES if names is None
                                     else names)
    return pd.DataFrame(rows, columns=columns)


def write_feature_csv(path, table):
    """Write the table with nulls as empty cells and a fixed float
    format so that reruns are byte-identical."""
    table.to_csv(path, index=False, na_rep='', float_format='%.10g',
                 encoding=ENCODING, lineterminator='\n')
