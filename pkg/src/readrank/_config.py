# -*- encoding: utf-8 -*-
# readrank: bidirectional long-document readability assessment.
# readrank/_config.py
#
# BSD License applies; see the LICENSE file, or
# http://opensource.org/licenses/BSD-2-Clause
"""Run configuration: one JSON file, presets and command-line overrides.

Precedence is command line, then the file, then the preset, then the
dataclass defaults.  Unknown keys anywhere are an error.

>>> run = load_config(None, {'preset': 'cmer'})
>>> run.encoder.d_hidden, run.encoder.n_heads
(256, 16)
"""
from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

from ._corpus import TOKENIZERS
from ._dsdr import DsdrConfig
from ._encoder import EncoderConfig
from ._mdem import TrainConfig
from ._ranking import RankingConfig
from ._util import ConfigError, read_json, sha256_of

logger = logging.getLogger(__name__)

PRESETS = {
    'default': {'d_embed': 400, 'd_hidden': 200, 'n_kernels': 400,
                'n_heads': 8, 'window': 3},
    'cmer': {'d_embed': 512, 'd_hidden': 256, 'n_kernels': 512,
             'n_heads': 16, 'window': 3},
}
HEAD_KINDS = ('cls', 'ordinal', 'ranking')


@dataclass
class PathsConfig:
    corpus: Optional[str] = None
    out: str = 'readrank_out'
    resources: Optional[str] = None
    sentence_corpus: Optional[str] = None
    static_vectors: Optional[str] = None
    sentence_vectors: Optional[str] = None

    def to_json(self):
        return asdict(self)


@dataclass
class CorpusConfig:
    tokenizer: str = 'auto'
    delimiters: str = '。！？.!?'
    min_freq: int = 1
    split_ratio: float = 0.8

    def __post_init__(self):
        if self.tokenizer not in TOKENIZERS:
            raise ConfigError('corpus.tokenizer must be one of {}'.format(
                TOKENIZERS))
        if not self.delimiters:
            raise ConfigError('corpus.delimiters must not be empty')
        if self.min_freq < 1:
            raise ConfigError('corpus.min_freq must be at least 1')
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError('corpus.split_ratio must lie in (0, 1)')

    @property
    def delimiter_set(self):
        return frozenset(self.delimiters)

    def to_json(self):
        return asdict(self)


@dataclass
class RunConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    dsdr: DsdrConfig = field(default_factory=DsdrConfig)
    ranking: RankingConfig = field(default_factory=RankingConfig)
    seed: int = 0
    head: str = 'ranking'
    preset: str = 'default'
    repeats: int = 1

    def __post_init__(self):
        if self.head not in HEAD_KINDS:
            raise ConfigError('head must be one of {}'.format(HEAD_KINDS))
        if self.preset not in PRESETS:
            raise ConfigError('preset must be one of {}'.format(
                sorted(PRESETS)))
        if self.repeats < 1:
            raise ConfigError('repeats must be at least 1')

    def to_json(self):
        out = {name: getattr(self, name).to_json() for name in SECTIONS}
        out.update(seed=self.seed, head=self.head, preset=self.preset,
                   repeats=self.repeats)
        return out

    def with_seed(self, seed):
        """A copy of this config whose every seed is ``seed``."""
        return dataclasses.replace(
            self, seed=seed, train=dataclasses.replace(self.train, seed=seed))

    def replace(self, **sections):
        """A copy with some sections' fields replaced, e.g.
        ``run.replace(encoder={'context_mode': 'none'})``."""
        changes = {}
        for name, values in sections.items():
            if name in SECTIONS:
                changes[name] = _build(SECTIONS[name], name, dict(
                    asdict(getattr(self, name)), **values))
            else:
                changes[name] = values
        return dataclasses.replace(self, **changes)


SECTIONS = {'paths': PathsConfig, 'corpus': CorpusConfig,
            'encoder': EncoderConfig, 'train': TrainConfig,
            'dsdr': DsdrConfig, 'ranking': RankingConfig}
TOP_LEVEL = ('seed', 'head', 'preset', 'repeats')


def _build(cls, section, values):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError('unknown key(s) in [{}]: {}'.format(
            section, ', '.join(unknown)))
    try:
        return cls(**values)
    except TypeError as err:
        raise ConfigError('[{}]: {}'.format(section, err))


def _check_section(raw, name):
    value = raw.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError('[{}] must be an object'.format(name))
    return value


def load_config(path=None, overrides=None):
    """Resolve a :py:class:`RunConfig`.

    ``overrides`` holds command-line values: top-level keys (``seed``,
    ``head``, ``preset``, ``repeats``) and ``section.key`` entries; a
    value of ``None`` means "not given".
    """
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    raw = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError('no such config file: {}'.format(path))
        try:
            raw = read_json(path)
        except ValueError as err:
            raise ConfigError('{}: invalid JSON ({})'.format(path, err))
        if not isinstance(raw, dict):
            raise ConfigError('{}: expected a JSON object'.format(path))
    unknown = sorted(set(raw) - set(SECTIONS) - set(TOP_LEVEL))
    if unknown:
        raise ConfigError('unknown top-level key(s): {}'.format(
            ', '.join(unknown)))

    top = {k: raw[k] for k in TOP_LEVEL if k in raw}
    top.update((k, overrides[k]) for k in TOP_LEVEL if k in overrides)
    preset = top.get('preset', 'default')
    if preset not in PRESETS:
        raise ConfigError('unknown preset {!r}'.format(preset))

    sections = {}
    for name in SECTIONS:
        values = dict(PRESETS[preset]) if name == 'encoder' else {}
        values.update(_check_section(raw, name))
        prefix = name + '.'
        values.update((k[len(prefix):], v) for k, v in overrides.items()
                      if k.startswith(prefix))
        sections[name] = values
    seed = top.get('seed', 0)
    sections['train'].setdefault('seed', seed)
    if 'seed' in overrides:
        sections['train']['seed'] = seed

    built = {name: _build(cls, name, sections[name])
             for name, cls in SECTIONS.items()}
    try:
        run = RunConfig(**built, **top)
    except TypeError as err:
        raise ConfigError(str(err))
    logger.debug('resolved config: %s', run.to_json())
    return run


def config_hash(run):
    """SHA-256 of the canonical JSON of the resolved config."""
    return sha256_of(run.to_json())
