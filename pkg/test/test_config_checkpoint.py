# -*- encoding: utf-8 -*-
from __future__ import print_function, unicode_literals

import io
import os
import shutil
import sys
import tempfile
import unittest
from collections import OrderedDict

import torch

sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))
from helpers import tiny_encoder_config

from readrank._checkpoint import load_checkpoint, restore, save_checkpoint
from readrank._config import RunConfig, config_hash, load_config
from readrank._mdem import build_model
from readrank._util import ConfigError, DataError, read_json, write_json


class TempDirCase(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def config_file(self, obj, name='run.json'):
        path = os.path.join(self.tmp, name)
        write_json(path, obj)
        return path


class TestLoadConfig(TempDirCase):

    def test_defaults(self):
        run = load_config()
        self.assertEqual((run.encoder.d_embed, run.encoder.d_hidden,
                          run.encoder.n_kernels, run.encoder.n_heads,
                          run.encoder.window), (400, 200, 400, 8, 3))
        self.assertEqual((run.train.lr, run.train.weight_decay,
                          run.train.epochs, run.train.beta, run.train.tau),
                         (1e-3, 5e-4, 30, 0.45, 0.85))
        self.assertEqual(run.ranking.n_reference, 10)
        self.assertEqual(run.head, 'ranking')

    def test_cmer_preset(self):
        run = load_config(None, {'preset': 'cmer'})
        self.assertEqual((run.encoder.d_embed, run.encoder.d_hidden,
                          run.encoder.n_heads), (512, 256, 16))

    def test_precedence(self):
        path = self.config_file({'preset': 'cmer',
                                 'encoder': {'d_hidden': 128,
                                             'n_kernels': 256},
                                 'train': {'lr': 0.01, 'epochs': 5}})
        run = load_config(path, {'train.lr': 0.02, 'train.epochs': None})
        self.assertEqual(run.encoder.d_hidden, 128)
        self.assertEqual(run.encoder.d_embed, 512)
        self.assertEqual(run.train.lr, 0.02)
        self.assertEqual(run.train.epochs, 5)

    def test_seed_propagates(self):
        self.assertEqual(load_config(None, {'seed': 7}).train.seed, 7)
        path = self.config_file({'seed': 3, 'train': {'seed': 9}})
        self.assertEqual(load_config(path).train.seed, 9)
        self.assertEqual(load_config(path, {'seed': 5}).train.seed, 5)

    def test_unknown_keys(self):
        with self.assertRaisesRegex(ConfigError, 'bogus'):
            load_config(self.config_file({'bogus': 1}))
        with self.assertRaisesRegex(ConfigError, 'lr_decay'):
            load_config(self.config_file({'train': {'lr_decay': 1}}))
        with self.assertRaisesRegex(ConfigError, 'depth'):
            load_config(None, {'encoder.depth': 3})

    def test_invalid_values(self):
        with self.assertRaises(ConfigError):
            load_config(None, {'encoder.window': 2})
        with self.assertRaises(ConfigError):
            load_config(None, {'head': 'softmax'})
        with self.assertRaises(ConfigError):
            load_config(None, {'preset': 'huge'})
        with self.assertRaises(ConfigError):
            load_config(self.config_file({'train': 3}))

    def test_bad_files(self):
        with self.assertRaises(ConfigError):
            load_config(os.path.join(self.tmp, 'missing.json'))
        path = os.path.join(self.tmp, 'broken.json')
        with io.open(path, 'w', encoding='utf-8') as f:
            f.write('{"seed": ')
        with self.assertRaises(ConfigError):
            load_config(path)

    def test_hash(self):
        one = load_config(None, {'seed': 1})
        two = load_config(None, {'seed': 1})
        self.assertEqual(config_hash(one), config_hash(two))
        self.assertEqual(len(config_hash(one)), 64)
        self.assertNotEqual(config_hash(one),
                            config_hash(load_config(None, {'seed': 2})))

    def test_round_trip_through_json(self):
        run = load_config(None, {'seed': 4, 'ranking.backbone': 'hhnn'})
        path = self.config_file(run.to_json())
        again = load_config(path)
        self.assertEqual(again.to_json(), run.to_json())
        self.assertEqual(config_hash(again), config_hash(run))

    def test_replace_and_with_seed(self):
        run = RunConfig()
        changed = run.replace(encoder={'context_mode': 'none'}, head='cls')
        self.assertEqual(changed.encoder.context_mode, 'none')
        self.assertEqual(changed.head, 'cls')
        self.assertEqual(run.encoder.context_mode, 'multi')
        seeded = run.with_seed(11)
        self.assertEqual((seeded.seed, seeded.train.seed), (11, 11))
        with self.assertRaises(ConfigError):
            run.replace(train={'momentum': 0.9})


class TestCheckpoint(TempDirCase):

    def model(self, seed=0):
        return build_model(tiny_encoder_config(), 10, seed=seed)

    def test_round_trip(self):
        model = self.model()
        directory = os.path.join(self.tmp, 'ckpt')
        save_checkpoint(directory, model.state_dict(), {'note': 'x'})
        manifest, state = load_checkpoint(directory)
        self.assertEqual(manifest['note'], 'x')
        self.assertEqual(manifest['format'], 'readrank-checkpoint/1')
        other = restore(self.model(seed=1), state)
        for (name, a), (_, b) in zip(model.state_dict().items(),
                                     other.state_dict().items()):
            self.assertTrue(torch.equal(a, b), name)

    def test_byte_identical(self):
        model = self.model()
        one = os.path.join(self.tmp, 'one')
        two = os.path.join(self.tmp, 'two')
        save_checkpoint(one, model.state_dict(), {'config_hash': 'abc'})
        save_checkpoint(two, self.model().state_dict(),
                        {'config_hash': 'abc'})
        for name in ('manifest.json', 'params.bin'):
            with io.open(os.path.join(one, name), 'rb') as a, \
                    io.open(os.path.join(two, name), 'rb') as b:
                self.assertEqual(a.read(), b.read(), name)

    def test_manifest_layout(self):
        state = OrderedDict([('w', torch.ones(2, 3)),
                             ('ids', torch.arange(4)),
                             ('flags', torch.tensor([True, False]))])
        directory = os.path.join(self.tmp, 'ckpt')
        save_checkpoint(directory, state)
        manifest = read_json(os.path.join(directory, 'manifest.json'))
        arrays = manifest['arrays']
        self.assertEqual([a['name'] for a in arrays], ['w', 'ids', 'flags'])
        self.assertEqual([a['offset'] for a in arrays], [0, 24, 56])
        self.assertEqual([a['dtype'] for a in arrays], ['<f4', '<i8', '|b1'])
        _, loaded = load_checkpoint(directory)
        self.assertTrue(torch.equal(loaded['ids'], torch.arange(4)))
        self.assertEqual(loaded['flags'].tolist(), [True, False])
        self.assertEqual(tuple(loaded['w'].shape), (2, 3))

    def test_mismatch(self):
        directory = os.path.join(self.tmp, 'ckpt')
        save_checkpoint(directory, self.model().state_dict())
        _, state = load_checkpoint(directory)
        wider = build_model(tiny_encoder_config(d_embed=6), 10)
        with self.assertRaises(DataError):
            restore(wider, state)

    def test_missing_and_corrupt(self):
        with self.assertRaises(DataError):
            load_checkpoint(os.path.join(self.tmp, 'nothing'))
        directory = os.path.join(self.tmp, 'ckpt')
        save_checkpoint(directory, {'w': torch.ones(4)})
        with io.open(os.path.join(directory, 'params.bin'), 'wb') as f:
            f.write(b'\0\0')
        with self.assertRaises(DataError):
            load_checkpoint(directory)
        write_json(os.path.join(directory, 'manifest.json'),
                   {'format': 'other', 'arrays': []})
        with self.assertRaises(DataError):
            load_checkpoint(directory)


if __name__ == '__main__':
    unittest.main()
