# -*- encoding: utf-8 -*-
# readrank: bidirectional long-document readability assessment.
# readrank/_util.py
#
# BSD License applies; see the LICENSE file, or
# http://opensource.org/licenses/BSD-2-Clause
'''
Utility functions, constants and exceptions used by all submodules.
'''
from __future__ import annotations

import hashlib
import io
import os

import numpy as np
import torch
import ujson

ENCODING = 'utf_8'

# Smallest probability admitted inside a logarithm.
PROB_FLOOR = 1e-12

# ----------------------------------------------------------------------
# Exceptions


class ReadrankError(Exception):
    '''Base class of errors the command line turns into exit codes.'''
    exit_code = 1


class ConfigError(ReadrankError):
    '''Invalid or unknown configuration.'''
    exit_code = 2


class DataError(ReadrankError):
    '''Malformed corpus, missing grade, missing artifact.'''
    exit_code = 3


class NumericalError(ReadrankError):
    '''A loss or a parameter stopped being finite.'''
    exit_code = 4


# ----------------------------------------------------------------------
# JSON helpers

def decode_json(file_or_str):
    '''Decode a JSON file-like object or string.

    >>> decode_json('[1, 2]')
    [1, 2]
    >>> decode_json(io.StringIO('{"a": null}'))
    {'a': None}
    '''
    if isinstance(file_or_str, str):
        return ujson.loads(file_or_str)
    else:
        return ujson.load(file_or_str)


def compact_json_dumps(obj):
    '''Compute the most compact JSON representation of ``obj``, with
    keys sorted so that equal structures always encode to equal
    strings.

    >>> compact_json_dumps({'b': 1, 'a': [1, 2]})
    '{"a":[1,2],"b":1}'
    '''
    return ujson.dumps(obj, ensure_ascii=False, sort_keys=True)


def read_json(path):
    '''Load a JSON document from ``path``.'''
    with io.open(path, encoding=ENCODING) as f:
        return decode_json(f)


def write_json(path, obj, indent=2):
    '''Write ``obj`` to ``path`` as sorted-key JSON with a final newline.'''
    with io.open(path, 'w', encoding=ENCODING, newline='\n') as f:
        f.write(ujson.dumps(obj, ensure_ascii=False, sort_keys=True,
                            indent=indent))
        f.write('\n')


def iter_jsonl(path):
    '''Yield ``(line_number, object)`` for every non-blank line of the
    JSONL file at ``path``.

    Lines that fail to decode raise :py:class:`DataError` naming the
    file and line.
    '''
    if not os.path.exists(path):
        raise DataError('no such file: {}'.format(path))
    with io.open(path, encoding=ENCODING) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, ujson.loads(line)
            except ValueError as err:
                raise DataError('{}:{}: invalid JSON ({})'.format(
                    path, lineno, err))


def write_jsonl(path, records):
    '''Write one compact JSON object per line.'''
    with io.open(path, 'w', encoding=ENCODING, newline='\n') as f:
        for record in records:
            f.write(compact_json_dumps(record))
            f.write('\n')


def read_word_list(path):
    '''Read a one-term-per-line UTF-8 word list, skipping blanks and
    ``#`` comments.'''
    with io.open(path, encoding=ENCODING) as f:
        return [line.strip() for line in f
                if line.strip() and not line.startswith('#')]


def sha256_of(obj):
    '''Hex SHA-256 of the canonical JSON encoding of ``obj``.'''
    payload = compact_json_dumps(obj).encode(ENCODING)
    return hashlib.sha256(payload).hexdigest()


# ----------------------------------------------------------------------
# Numeric helpers

def first_argmax(values):
    '''Index of the first maximal entry; ties resolve to the lowest
    index.

    >>> first_argmax([0.2, 0.4, 0.4])
    1
    '''
    return int(np.argmax(np.asarray(values)))


def masked_softmax(scores, mask, dim=-1):
    '''Softmax of ``scores`` along ``dim`` restricted to positions where
    the boolean ``mask`` is true; masked positions come out exactly 0.

    Rows with no unmasked position come out all zeros instead of NaN, so
    that gradients stay finite through fully padded rows.
    '''
    mask = mask.expand_as(scores)
    fill = torch.finfo(scores.dtype).min
    probs = torch.softmax(scores.masked_fill(~mask, fill), dim=dim)
    return probs.masked_fill(~mask, 0.0)


def seed_everything(seed):
    '''Seed torch and return a numpy Generator derived from ``seed``.'''
    torch.manual_seed(seed)
    return np.random.default_rng(seed)


def check_finite(name, value):
    '''Raise :py:class:`NumericalError` if the tensor ``value`` holds a
    NaN or an infinity.'''
    if not bool(torch.isfinite(value).all()):
        raise NumericalError('{} is not finite: {}'.format(
            name, value.detach().cpu().tolist()))
    return value
