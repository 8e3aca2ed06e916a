# -*- encoding: utf-8 -*-
from __future__ import print_function, unicode_literals

import os
import shutil
import sys
import tempfile
import unittest

import torch
import torch.nn.functional as F

sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))
from helpers import tiny_encoder_config

from readrank._corpus import PAD, Vocabulary
from readrank._encoder import (EncoderConfig, FusionGate,
                               GatedTransformerBlock, MultiHeadAttention,
                               SentenceLayer, WordLayer, build_encoder,
                               count_parameters, load_static_vectors)
from readrank._util import ConfigError, DataError, write_jsonl

VOCAB = 12


def document(rows, m_max=6, n_max=4):
    """An ``n_max × m_max`` id grid with ``rows`` as its real sentences."""
    grid = torch.full((n_max, m_max), PAD, dtype=torch.long)
    for i, row in enumerate(rows):
        grid[i, :len(row)] = torch.tensor(row)
    return grid


class TestConfig(unittest.TestCase):

    def test_width_rules(self):
        with self.assertRaises(ConfigError):
            EncoderConfig(d_hidden=4, n_kernels=6)
        with self.assertRaises(ConfigError):
            EncoderConfig(d_hidden=5, n_kernels=10, n_heads=4)
        with self.assertRaises(ConfigError):
            EncoderConfig(window=2)
        with self.assertRaises(ConfigError):
            EncoderConfig(n_grades=1)
        with self.assertRaises(ConfigError):
            EncoderConfig(context_mode='dual')

    def test_defaults(self):
        config = EncoderConfig()
        self.assertEqual((config.d, config.n_heads, config.window),
                         (400, 8, 3))


class TestEncoderShapes(unittest.TestCase):

    def setUp(self):
        self.config = tiny_encoder_config()
        self.encoder = build_encoder(self.config, VOCAB, seed=0)
        self.ids = torch.stack([
            document([[2, 3, 4], [5, 6]]),
            document([[7, 8, 9, 10, 11, 2], [3], [4, 4], [5, 6, 7]]),
        ])

    def test_shapes(self):
        out = self.encoder(self.ids)
        self.assertEqual(tuple(out.sentence_reps.shape), (2, 4, 8))
        self.assertEqual(tuple(out.doc_vector.shape), (2, 8))
        self.assertEqual(tuple(out.doc_attention.shape), (2, 4))
        self.assertEqual(tuple(out.doc_probs.shape), (2, 3))
        self.assertTrue(torch.allclose(out.doc_probs.sum(-1), torch.ones(2)))

    def test_pad_sentences_get_zero_weight(self):
        out = self.encoder(self.ids)
        self.assertEqual(out.doc_attention[0, 2:].tolist(), [0.0, 0.0])
        self.assertTrue(torch.allclose(out.doc_attention.sum(-1),
                                       torch.ones(2)))
        self.assertEqual(out.sentence_mask[0].tolist(),
                         [True, True, False, False])

    def test_single_sentence(self):
        out = self.encoder(document([[2, 3]])[None])
        self.assertEqual(out.doc_attention[0].tolist(), [1.0, 0.0, 0.0, 0.0])
        self.assertTrue(torch.allclose(out.doc_vector[0],
                                       out.sentence_reps[0, 0]))

    def test_identical_sentences(self):
        out = self.encoder(document([[2, 3, 4], [2, 3, 4]])[None])
        self.assertTrue(torch.allclose(out.doc_attention[0, :2],
                                       torch.tensor([0.5, 0.5])))
        self.assertTrue(torch.allclose(out.doc_vector[0],
                                       out.sentence_reps[0, 0], atol=1e-6))

    def test_all_pad_document(self):
        with self.assertRaises(DataError):
            self.encoder(document([])[None])

    def test_other_context_modes(self):
        for mode in ('single', 'none'):
            config = tiny_encoder_config(context_mode=mode)
            out = build_encoder(config, VOCAB)(self.ids)
            self.assertEqual(tuple(out.doc_vector.shape), (2, 8))

    def test_gru(self):
        config = tiny_encoder_config(rnn_cell='gru')
        out = build_encoder(config, VOCAB)(self.ids)
        self.assertEqual(tuple(out.sentence_reps.shape), (2, 4, 8))

    def test_seeded_build(self):
        one = build_encoder(self.config, VOCAB, seed=3)
        two = build_encoder(self.config, VOCAB, seed=3)
        for a, b in zip(one.parameters(), two.parameters()):
            self.assertTrue(torch.equal(a, b))
        self.assertGreater(count_parameters(one), 0)

    def test_classifier_softmax(self):
        with torch.no_grad():
            self.encoder.classifier = torch.nn.Linear(8, 4)
            self.encoder.classifier.weight.zero_()
            self.encoder.classifier.bias.copy_(torch.tensor([1., 2., 3., 4.]))
        _, probs = self.encoder.classify(torch.randn(1, 8))
        expected = torch.tensor([0.0321, 0.0871, 0.2369, 0.6439])
        self.assertTrue(torch.allclose(probs[0], expected, atol=1e-4))


class TestWordLayer(unittest.TestCase):

    def setUp(self):
        self.config = tiny_encoder_config()
        torch.manual_seed(0)
        self.layer = WordLayer(self.config, VOCAB)

    def test_pad_sentence_is_zero(self):
        vector = self.layer(torch.zeros(1, 6, dtype=torch.long))
        self.assertTrue(bool((vector == 0).all()))

    def test_out_of_range(self):
        with self.assertRaises(ValueError):
            self.layer(torch.tensor([[VOCAB, 2]]))

    def test_zero_recurrence(self):
        with torch.no_grad():
            for param in self.layer.rnn.parameters():
                param.zero_()
        ids = torch.tensor([[2, 3, 4, 0, 0, 0]])
        states = self.layer.encode_words(self.layer.embed(ids),
                                         torch.tensor([3]))
        self.assertTrue(bool((states == 0).all()))

    def test_reverse_direction_mirrors_forward(self):
        rnn = self.layer.rnn
        with torch.no_grad():
            for name in ('weight_ih_l0', 'weight_hh_l0', 'bias_ih_l0',
                         'bias_hh_l0'):
                getattr(rnn, name + '_reverse').copy_(getattr(rnn, name))
        lengths = torch.tensor([3])
        ids = torch.tensor([[2, 3, 4, 0, 0, 0]])
        rev = torch.tensor([[4, 3, 2, 0, 0, 0]])
        h = self.config.d_hidden
        states = self.layer.encode_words(self.layer.embed(ids), lengths)
        mirror = self.layer.encode_words(self.layer.embed(rev), lengths)
        self.assertTrue(torch.allclose(states[0, :3, :h],
                                       mirror[0, :3, h:].flip(0), atol=1e-6))

    def test_zero_kernels(self):
        with torch.no_grad():
            self.layer.conv.weight.zero_()
            self.layer.conv.bias.fill_(0.25)
        context = self.layer.context_vectors(torch.randn(2, 5, 8))
        self.assertTrue(torch.allclose(context, torch.full((2, 5, 8), 0.25)))

    def test_identity_kernel(self):
        with torch.no_grad():
            self.layer.conv.weight.zero_()
            self.layer.conv.bias.zero_()
            for k in range(8):
                self.layer.conv.weight[k, k, 1] = 1.0
        states = torch.randn(1, 5, 8)
        self.assertTrue(torch.allclose(self.layer.context_vectors(states),
                                       states))

    def test_convolution_oracle(self):
        states = torch.randn(1, 4, 8)
        context = self.layer.context_vectors(states)
        weight, bias = self.layer.conv.weight, self.layer.conv.bias
        padded = F.pad(states[0], (0, 0, 1, 1))
        for j in range(4):
            window = padded[j:j + 3]                    # 3 × 8
            expected = (weight * window.t()[None]).sum(dim=(1, 2)) + bias
            self.assertTrue(torch.allclose(context[0, j], expected,
                                           atol=1e-5))

    def test_context_weights_normalize_per_feature(self):
        ids = torch.tensor([[2, 3, 4, 5, 0, 0], [6, 0, 0, 0, 0, 0]])
        lengths = (ids != PAD).sum(-1)
        mask = ids != PAD
        states = self.layer.encode_words(self.layer.embed(ids), lengths)
        context = self.layer.context_vectors(states)
        weights = self.layer.multidim_context_weights(states, context, mask)
        self.assertTrue(torch.allclose(weights[0].sum(0), torch.ones(8)))
        self.assertTrue(bool((weights[0, 4:] == 0).all()))
        self.assertTrue(torch.equal(weights[1, 0], torch.ones(8)))
        self.assertTrue(bool((weights[1, 1:] == 0).all()))

    def test_single_dim_full_window(self):
        config = tiny_encoder_config(context_mode='single')
        torch.manual_seed(0)
        layer = WordLayer(config, VOCAB)
        states = torch.randn(1, 3, 8)
        summary, vector = layer.single_dim_context(states, torch.tensor([3]))
        centre = layer.context_vectors(states)[0, 1]
        self.assertTrue(torch.allclose(summary[0], centre, atol=1e-6))
        self.assertEqual(tuple(vector.shape), (1, 8))

    def test_single_dim_short_sentence(self):
        config = tiny_encoder_config(context_mode='single')
        torch.manual_seed(0)
        layer = WordLayer(config, VOCAB)
        states = torch.zeros(1, 4, 8)
        states[0, 0] = torch.randn(8)
        summary, vector = layer.single_dim_context(states, torch.tensor([1]))
        # the one window starts at the real word and runs into padding
        self.assertTrue(torch.allclose(
            summary[0], layer.context_vectors(states)[0, 1], atol=1e-6))
        self.assertTrue(torch.allclose(vector[0], states[0, 0]))

    def test_single_dim_constant_windows(self):
        config = tiny_encoder_config(context_mode='single')
        layer = WordLayer(config, VOCAB)
        with torch.no_grad():
            layer.conv.weight.zero_()
            layer.conv.bias.fill_(-1.5)
        summary, _ = layer.single_dim_context(torch.randn(2, 6, 8),
                                              torch.tensor([6, 4]))
        self.assertTrue(torch.allclose(summary, torch.full((2, 8), -1.5)))


class TestAttention(unittest.TestCase):

    def test_uniform_scores(self):
        torch.manual_seed(0)
        attention = MultiHeadAttention(4, 2)
        with torch.no_grad():
            attention.query.weight.zero_()
            attention.query.bias.zero_()
        x = torch.randn(1, 5, 4)
        mask = torch.tensor([[True, True, True, False, False]])
        _, weights = attention(x, x, x, mask)
        expected = torch.tensor([1 / 3.0] * 3 + [0.0, 0.0])
        for head in range(2):
            for row in range(5):
                self.assertTrue(torch.allclose(weights[0, head, row],
                                               expected))

    def test_shape_mismatch(self):
        attention = MultiHeadAttention(4, 2)
        with self.assertRaises(ValueError):
            attention(torch.zeros(1, 3, 4), torch.zeros(1, 3, 4),
                      torch.zeros(1, 2, 4), torch.ones(1, 3, dtype=torch.bool))

    def test_single_head_oracle(self):
        torch.manual_seed(1)
        attention = MultiHeadAttention(4, 1)
        x = torch.randn(1, 3, 4)
        mask = torch.ones(1, 3, dtype=torch.bool)
        out, _ = attention(x, x, x, mask)
        q = attention.query(x[0])
        k = attention.key(x[0])
        v = attention.value(x[0])
        dense = torch.softmax(q @ k.t() / 2.0, dim=-1) @ v
        self.assertTrue(torch.allclose(out[0], attention.output(dense),
                                       atol=1e-6))


class TestFusionGate(unittest.TestCase):

    def setUp(self):
        torch.manual_seed(0)
        self.gate = FusionGate(4)
        self.h = torch.randn(3, 4)
        self.v = torch.randn(3, 4)

    def test_half_open(self):
        with torch.no_grad():
            self.gate.gate.weight.zero_()
            self.gate.gate.bias.zero_()
        candidate = F.relu(self.gate.transform(torch.cat([self.h, self.v],
                                                         -1)))
        self.assertTrue(torch.allclose(self.gate(self.h, self.v),
                                       0.5 * candidate + 0.5 * self.h))

    def test_saturated(self):
        with torch.no_grad():
            self.gate.gate.weight.zero_()
            self.gate.gate.bias.fill_(50.0)
        candidate = F.relu(self.gate.transform(torch.cat([self.h, self.v],
                                                         -1)))
        self.assertTrue(torch.allclose(self.gate(self.h, self.v), candidate,
                                       atol=1e-4))


def between(x, low, high, atol=1e-5):
    return bool(((x >= torch.minimum(low, high) - atol)
                 & (x <= torch.maximum(low, high) + atol)).all())


class TestGatedTransformerBlock(unittest.TestCase):

    def setUp(self):
        torch.manual_seed(0)
        self.block = GatedTransformerBlock(4, 2)
        self.h = torch.randn(2, 3, 4)
        self.mask = torch.tensor([[True, True, True], [True, True, False]])
        self.seen = {}
        for name in ('attention_norm', 'feed_forward_norm'):
            getattr(self.block, name).register_forward_hook(
                lambda _, __, out, name=name: self.seen.update({name: out}))
        self.block.feed_forward.register_forward_hook(
            lambda _, args, __: self.seen.update(e=args[0]))

    def zero_gates(self):
        with torch.no_grad():
            for layer in (self.block.gate1_out, self.block.gate1_in,
                          self.block.gate2_out, self.block.gate2_in):
                layer.weight.zero_()
                if layer.bias is not None:
                    layer.bias.zero_()

    def test_zero_gates_midpoint(self):
        self.zero_gates()
        out = self.block(self.h, self.mask)
        o = self.seen['attention_norm']
        e = 0.5 * self.h + 0.5 * o
        self.assertTrue(torch.allclose(self.seen['e'], e, atol=1e-6))
        q = self.block.feed_forward_norm(F.relu(self.block.feed_forward(e)))
        self.assertTrue(torch.allclose(out, 0.5 * e + 0.5 * q, atol=1e-6))

    def test_convex_interpolation(self):
        out = self.block(self.h, self.mask)
        e = self.seen['e']
        self.assertTrue(between(e, self.h, self.seen['attention_norm']))
        self.assertTrue(between(out, e, self.seen['feed_forward_norm']))


class TestSentenceLayer(unittest.TestCase):

    def setUp(self):
        torch.manual_seed(0)
        self.config = tiny_encoder_config(n_layers=2)
        self.layer = SentenceLayer(self.config)
        self.v = torch.randn(1, 5, self.config.d)
        self.mask = torch.tensor([[True, True, True, False, False]])

    def test_pad_rows_ignored(self):
        out = self.layer(self.v, self.mask)
        other = self.v.clone()
        other[0, 3:] = torch.randn(2, self.config.d) * 10
        self.assertTrue(torch.allclose(self.layer(other, self.mask)[0, :3],
                                       out[0, :3], atol=1e-6))
        swapped = self.v[:, [0, 1, 2, 4, 3]]
        self.assertTrue(torch.allclose(self.layer(swapped, self.mask)[0, :3],
                                       out[0, :3], atol=1e-6))

    def test_real_rows_permute(self):
        out = self.layer(self.v, self.mask)
        order = [2, 0, 1, 3, 4]
        moved = self.layer(self.v[:, order], self.mask)
        self.assertTrue(torch.allclose(moved, out[:, order], atol=1e-5))


class TestStaticVectors(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.vocab = Vocabulary(['猫', '狗'])
        self.layer = WordLayer(tiny_encoder_config(d_embed=3), 4)

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_load(self):
        path = os.path.join(self.tmp, 'vectors.jsonl')
        write_jsonl(path, [{'token': '狗', 'vector': [1.0, 2.0, 3.0]},
                           {'token': '鱼', 'vector': [9.0, 9.0, 9.0]}])
        self.assertEqual(load_static_vectors(self.layer, self.vocab, path), 1)
        self.assertEqual(self.layer.embedding.weight[3].tolist(),
                         [1.0, 2.0, 3.0])

    def test_wrong_width(self):
        path = os.path.join(self.tmp, 'vectors.jsonl')
        write_jsonl(path, [{'token': '猫', 'vector': [1.0]}])
        with self.assertRaises(DataError):
            load_static_vectors(self.layer, self.vocab, path)


if __name__ == '__main__':
    unittest.main()
