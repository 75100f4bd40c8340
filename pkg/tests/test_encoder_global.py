"""Input packing, attention masking, layer mixing, and encoder determinism."""

import math

import numpy as np
import numpy.testing as npt
import pytest

from pairmatch import autodiff as ad
from pairmatch.autodiff import Tensor, backward
from pairmatch.data import CLS_ID, SEP_ID, SentencePair, Vocabulary
from pairmatch.encoder_global import (
    BlockParams,
    build_input_sequence,
    encode_pair,
    encode_pairs,
    init_global_params,
    layer_mix,
    pad_batch,
    transformer_block,
)
from pairmatch.errors import DegenerateInputError, SequenceLengthError
from pairmatch.gradcheck import grad_check


@pytest.fixture
def vocab():
    return Vocabulary(["a", "b", "c", "dog", "runs"])


class TestBuildInputSequence:
    def test_layout(self, vocab):
        ids, segs, mask = build_input_sequence(SentencePair("a b", "c", "neutral"), vocab)
        assert len(ids) == 6
        assert ids[0] == CLS_ID
        assert ids[3] == SEP_ID and ids[5] == SEP_ID
        assert ids[1] == vocab.id_of["a"] and ids[4] == vocab.id_of["c"]

    def test_segment_ids(self, vocab):
        _, segs, _ = build_input_sequence(SentencePair("a b", "c", "neutral"), vocab)
        assert segs == [0, 0, 0, 0, 1, 1]

    def test_oov_becomes_unk(self, vocab):
        ids_known, _, _ = build_input_sequence(SentencePair("a b", "c", "n"), vocab)
        ids_oov, _, _ = build_input_sequence(SentencePair("a zzz", "c", "n"), vocab)
        assert ids_oov[2] == 1  # UNK
        assert ids_oov[:2] == ids_known[:2] and ids_oov[3:] == ids_known[3:]

    def test_empty_sentence_rejected(self, vocab):
        with pytest.raises(DegenerateInputError):
            build_input_sequence(SentencePair("", "c", "n"), vocab)

    def test_mask_counts_real_positions(self, vocab):
        ids, segs, mask = build_input_sequence(SentencePair("a b", "c", "n"), vocab)
        assert sum(mask) == 2 + 1 + 3

    def test_pad_batch_rejects_overflow(self, vocab):
        ids, segs, _ = build_input_sequence(SentencePair("a b c", "a b c", "n"), vocab)
        with pytest.raises(SequenceLengthError):
            pad_batch([ids], [segs], max_len=4)


def _tiny_block(rng, d=2, ff=3):
    from pairmatch.encoder_global import init_block_params

    return init_block_params(rng, d, ff)


class TestTransformerBlock:
    def test_fully_masked_except_self_gets_weight_one(self, rng):
        # one real position: every real query row puts weight 1 on it
        params = _tiny_block(rng, d=4, ff=4)
        h = Tensor(rng.normal(size=(1, 3, 4)))
        mask = np.array([[True, False, False]])
        _, attn = transformer_block(h, params, mask, heads=2)
        npt.assert_allclose(attn.data[0, :, 0, 0], 1.0)
        npt.assert_allclose(attn.data[0, :, 0, 1:], 0.0)

    def test_output_shape_matches_input(self, rng):
        params = _tiny_block(rng, d=4, ff=8)
        for seq in (2, 5, 9):
            h = Tensor(rng.normal(size=(2, seq, 4)))
            out, _ = transformer_block(h, params, np.ones((2, seq), dtype=bool), heads=2)
            assert out.shape == (2, seq, 4)

    def test_attention_rows_sum_to_one_and_masked_weight_zero(self, rng):
        params = _tiny_block(rng, d=4, ff=4)
        h = Tensor(rng.normal(size=(2, 6, 4)))
        mask = np.ones((2, 6), dtype=bool)
        mask[0, 4:] = False
        _, attn = transformer_block(h, params, mask, heads=2)
        npt.assert_allclose(attn.data.sum(axis=-1), 1.0, atol=1e-10)
        assert (attn.data[0, :, :, 4:] == 0.0).all()

    def test_matches_hand_rolled_arithmetic(self, rng):
        # d=2, one head, two tokens: replicate the post-norm block in numpy
        params = _tiny_block(rng, d=2, ff=3)
        h = rng.normal(size=(1, 2, 2))
        out, _ = transformer_block(Tensor(h), params, np.ones((1, 2), dtype=bool), heads=1)

        def ln(x):
            mu = x.mean(-1, keepdims=True)
            var = ((x - mu) ** 2).mean(-1, keepdims=True)
            return (x - mu) / np.sqrt(var + 1e-5)

        q = h @ params.wq.data + params.bq.data
        k = h @ params.wk.data + params.bk.data
        v = h @ params.wv.data + params.bv.data
        scores = q @ k.swapaxes(-1, -2) / math.sqrt(2)
        e = np.exp(scores - scores.max(-1, keepdims=True))
        w = e / e.sum(-1, keepdims=True)
        ctx = w @ v
        h1 = ln(h + ctx @ params.wo.data + params.bo.data) * params.ln1_gain.data + params.ln1_bias.data
        ffn = np.maximum(h1 @ params.ff_w1.data + params.ff_b1.data, 0.0) @ params.ff_w2.data + params.ff_b2.data
        expected = ln(h1 + ffn) * params.ln2_gain.data + params.ln2_bias.data
        npt.assert_allclose(out.data, expected, atol=1e-10)


class TestLayerMix:
    def test_equal_logits_give_arithmetic_mean(self, rng):
        layers = [Tensor(rng.normal(size=(2, 3))) for _ in range(4)]
        mixed = layer_mix(layers, Tensor(np.zeros(4)))
        expected = sum(t.data for t in layers) / 4
        npt.assert_allclose(mixed.data, expected, atol=1e-12)

    def test_saturated_logit_selects_single_layer(self, rng):
        layers = [Tensor(rng.normal(size=(2, 3))) for _ in range(3)]
        mixed = layer_mix(layers, Tensor(np.array([0.0, 50.0, 0.0])))
        npt.assert_allclose(mixed.data, layers[1].data, atol=1e-12)

    def test_quarter_three_quarter_weights(self, rng):
        h1 = Tensor(rng.normal(size=(2, 2)))
        h2 = Tensor(rng.normal(size=(2, 2)))
        mixed = layer_mix([h1, h2], Tensor(np.array([0.0, math.log(3.0)])))
        npt.assert_allclose(mixed.data, 0.25 * h1.data + 0.75 * h2.data, atol=1e-12)

    def test_invariant_to_constant_logit_shift(self, rng):
        layers = [Tensor(rng.normal(size=(2, 2))) for _ in range(3)]
        logits = rng.normal(size=3)
        a = layer_mix(layers, Tensor(logits))
        b = layer_mix(layers, Tensor(logits + 7.5))
        npt.assert_allclose(a.data, b.data, atol=1e-12)

    def test_mix_weights_trainable(self, rng):
        layers = [Tensor(rng.normal(size=(2, 2))) for _ in range(2)]
        logits = Tensor(np.array([0.3, -0.2]), requires_grad=True)
        assert grad_check(lambda: ad.sum_(layer_mix(layers, logits)), [logits]) < 1e-6


class TestEncodePair:
    @pytest.fixture
    def setup(self, vocab, rng):
        params = init_global_params(rng, len(vocab), d=8, layers=2, ff=16, max_len=16)
        return vocab, params

    def test_output_shapes(self, setup):
        vocab, params = setup
        enc = encode_pair(SentencePair("a b", "c dog", "n"), vocab, params, heads=2, max_len=16)
        assert enc.h.shape == (1, 7, 8)
        assert enc.v_g.shape == (1, 8)

    def test_deterministic(self, setup):
        vocab, params = setup
        pair = SentencePair("a b dog", "c runs", "n")
        e1 = encode_pair(pair, vocab, params, heads=2, max_len=16)
        e2 = encode_pair(pair, vocab, params, heads=2, max_len=16)
        npt.assert_array_equal(e1.h.data, e2.h.data)
        npt.assert_array_equal(e1.v_g.data, e2.v_g.data)

    def test_pad_content_does_not_leak_into_real_positions(self, setup, rng):
        # same two pairs batched with and without a longer companion pair:
        # the shorter pair gains pad slots whose embeddings must not matter
        vocab, params = setup
        short = SentencePair("a b", "c", "n")
        long = SentencePair("a b c dog runs", "a b c", "n")
        alone = encode_pairs([short], vocab, params, heads=2, max_len=16)
        together = encode_pairs([short, long], vocab, params, heads=2, max_len=16)
        n_real = alone.h.shape[1]
        npt.assert_allclose(together.h.data[0, :n_real], alone.h.data[0], atol=1e-12)
        npt.assert_allclose(together.v_g.data[0], alone.v_g.data[0], atol=1e-12)

    def test_vg_gradient_reaches_token_embeddings(self, setup, rng):
        vocab, params = setup
        pair = SentencePair("a b", "c", "n")
        probe = Tensor(rng.normal(size=(1, 8)))

        def f():
            enc = encode_pair(pair, vocab, params, heads=2, max_len=16)
            return ad.sum_(enc.v_g * probe)

        assert grad_check(f, [params.token_emb], eps=1e-5) < 1e-4

    def test_sequence_longer_than_positional_table(self, setup):
        vocab, params = setup
        pair = SentencePair("a b c dog runs a b c dog runs", "a b c dog runs", "n")
        with pytest.raises(SequenceLengthError):
            encode_pair(pair, vocab, params, heads=2, max_len=16)
