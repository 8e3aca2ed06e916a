# -*- encoding: utf-8 -*-
# readrank: bidirectional long-document readability assessment.
# readrank/_checkpoint.py
#
# BSD License applies; see the LICENSE file, or
# http://opensource.org/licenses/BSD-2-Clause
"""Checkpoints as a ``manifest.json`` plus a raw ``params.bin``.

The manifest records the resolved config, its hash, the vocabulary and,
for every array, its name, shape, dtype, byte offset and byte count.
``params.bin`` holds the arrays back to back as little-endian bytes in
manifest order.  Nothing time-dependent is written, so equal models give
byte-identical checkpoints.
"""
from __future__ import annotations

import io
import logging
import os
from collections import OrderedDict

import numpy as np
import torch

from ._util import DataError, read_json, write_json

logger = logging.getLogger(__name__)

MANIFEST = 'manifest.json'
PARAMS = 'params.bin'
FORMAT = 'readrank-checkpoint/1'


def save_checkpoint(directory, state, meta=None):
    """Write ``state`` (a name → tensor mapping, e.g. a ``state_dict``)
    under ``directory``.  ``meta`` is merged into the manifest."""
    os.makedirs(directory, exist_ok=True)
    arrays = []
    offset = 0
    with io.open(os.path.join(directory, PARAMS), 'wb') as f:
        for name, tensor in state.items():
            array = np.ascontiguousarray(tensor.detach().cpu().numpy())
            array = array.astype(array.dtype.newbyteorder('<'), copy=False)
            payload = array.tobytes()
            f.write(payload)
            arrays.append({'name': name, 'shape': list(array.shape),
                           'dtype': array.dtype.str, 'offset': offset,
                           'nbytes': len(payload)})
            offset += len(payload)
    manifest = dict(meta or {})
    manifest['format'] = FORMAT
    manifest['arrays'] = arrays
    write_json(os.path.join(directory, MANIFEST), manifest)
    logger.info('wrote checkpoint %s (%d arrays, %d bytes)', directory,
                len(arrays), offset)
    return manifest


def load_checkpoint(directory):
    """Return ``(manifest, state)`` where ``state`` maps names to
    tensors."""
    manifest_path = os.path.join(directory, MANIFEST)
    if not os.path.exists(manifest_path):
        raise DataError('no checkpoint at {}'.format(directory))
    manifest = read_json(manifest_path)
    if manifest.get('format') != FORMAT:
        raise DataError('{}: unknown checkpoint format {!r}'.format(
            manifest_path, manifest.get('format')))
    with io.open(os.path.join(directory, PARAMS), 'rb') as f:
        blob = f.read()
    state = OrderedDict()
    for entry in manifest['arrays']:
        end = entry['offset'] + entry['nbytes']
        if end > len(blob):
            raise DataError('{}: array {} runs past the end of {}'.format(
                directory, entry['name'], PARAMS))
        array = np.frombuffer(blob[entry['offset']:end],
                              dtype=np.dtype(entry['dtype']))
        array = array.reshape(entry['shape']).astype(
            np.dtype(entry['dtype']).newbyteorder('='))
        state[entry['name']] = torch.from_numpy(array.copy())
    return manifest, state


def restore(module, state):
    """Load ``state`` into ``module``, turning shape or name mismatches
    into :py:class:`DataError`."""
    try:
        module.load_state_dict(state)
    except RuntimeError as err:
        raise DataError('checkpoint does not fit the model: {}'.format(err))
    return module
