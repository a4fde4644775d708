#!/usr/bin/env python3
"""
Tests for the encoders module.
"""

import numpy as np
import pytest

from fivcmmcan.encoders import (
    ImageEncoder,
    MultiHeadAttention,
    TextEncoder,
    TransformerLayer,
    encode_image,
    encode_text,
    pad_tokens,
    sinusoidal_positions,
)
from fivcmmcan.tensors import DimensionError, Tensor, grad_check, mul, sum_all


class TestSinusoidalPositions:
    """Test parameter-free positional encodings."""

    def test_position_zero(self):
        """Test sin 0 on even dims and cos 0 on odd dims."""
        table = sinusoidal_positions(5, 8).data
        np.testing.assert_array_equal(table[0, 0::2], np.zeros(4))
        np.testing.assert_array_equal(table[0, 1::2], np.ones(4))

    def test_range(self):
        """Test all entries lie in [-1, 1]."""
        table = sinusoidal_positions(50, 16).data
        assert np.all(np.abs(table) <= 1.0)

    def test_odd_dimension(self):
        """Test odd d is rejected."""
        with pytest.raises(ValueError, match="even"):
            sinusoidal_positions(4, 5)


class TestPadTokens:
    """Test padding and truncation."""

    def test_pad(self):
        """Test right padding."""
        np.testing.assert_array_equal(pad_tokens([3, 4], 4), [3, 4, 0, 0])

    def test_truncate_keeps_first(self):
        """Test the first m ids are kept."""
        np.testing.assert_array_equal(pad_tokens([1, 2, 3, 4, 5], 3), [1, 2, 3])


class TestTextEncoder:
    """Test the text encoder."""

    def _encoder(self, m=6, d=16, heads=2, vocab=20, seed=0):
        return TextEncoder(vocab, d, heads, m, np.random.default_rng(seed))

    def test_output_shape(self):
        """Test a batch and a single sequence."""
        enc = self._encoder()
        out, _ = enc(np.array([[1, 2, 3, 0, 0, 0], [4, 5, 6, 7, 8, 9]]))
        assert out.shape == (2, 6, 16)
        assert encode_text([1, 2, 3], enc).shape == (6, 16)

    def test_pad_keys_get_zero_weight(self):
        """Test masked keys and row sums."""
        enc = self._encoder()
        _, weights = enc(np.array([[5, 6, 7, 0, 0, 0]]))
        for w in weights:
            np.testing.assert_array_equal(w[0, :, 3:], np.zeros((6, 3)))
            np.testing.assert_allclose(w[0].sum(axis=-1), np.ones(6), atol=1e-12)

    def test_all_pad_rows_equal(self):
        """Test a degenerate all-pad input."""
        enc = self._encoder()
        out = encode_text([0] * 6, enc).data
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, np.tile(out[0], (6, 1)), atol=1e-12)

    def test_single_token_attends_to_itself(self):
        """Test m = 1 gives attention weight exactly 1."""
        enc = self._encoder(m=1)
        _, weights = enc(np.array([[3]]))
        for w in weights:
            assert w[0, 0, 0] == 1.0

    def test_eval_determinism(self):
        """Test byte-identical outputs across calls."""
        enc = self._encoder()
        first = encode_text([1, 2, 3, 4], enc).data
        second = encode_text([1, 2, 3, 4], enc).data
        assert first.tobytes() == second.tobytes()

    def test_out_of_vocabulary(self):
        """Test an id beyond the vocabulary is rejected."""
        enc = self._encoder(vocab=10)
        with pytest.raises(ValueError, match="out-of-vocabulary token id 12"):
            encode_text([1, 12], enc)

    def test_wrong_sequence_length(self):
        """Test batches must already be padded to m."""
        enc = self._encoder()
        with pytest.raises(DimensionError):
            enc(np.array([[1, 2, 3]]))

    def test_dropout_only_in_train(self):
        """Test train mode with dropout changes the output, eval does not."""
        enc = TextEncoder(20, 16, 2, 6, np.random.default_rng(0), dropout_rate=0.4)
        tokens = [1, 2, 3, 4, 5, 6]
        eval_out = encode_text(tokens, enc).data
        train_out = encode_text(tokens, enc, train=True, rng=np.random.default_rng(1)).data
        assert not np.allclose(eval_out, train_out)
        np.testing.assert_array_equal(eval_out, encode_text(tokens, enc).data)

    def test_grad_check_reaches_embedding(self):
        """Test gradients through the encoder into the embedding table."""
        enc = TextEncoder(7, 4, 2, 3, np.random.default_rng(3))
        projection = Tensor(np.random.default_rng(4).normal(size=(1, 3, 4)))
        tokens = np.array([[1, 5, 0]])
        loss = lambda _: sum_all(mul(enc(tokens)[0], projection))  # noqa: E731
        assert grad_check(loss, enc.embedding) < 1e-4


class TestImageEncoder:
    """Test the image encoder."""

    def test_output_shape(self):
        """Test (n, d) for n = 9 and d = 32."""
        enc = ImageEncoder(12, 32, 8, 9, np.random.default_rng(0))
        patches = np.random.default_rng(1).normal(size=(9, 12))
        assert encode_image(patches, enc).shape == (9, 32)

    def test_single_patch(self):
        """Test n = 1 gives attention weight exactly 1."""
        enc = ImageEncoder(4, 8, 2, 1, np.random.default_rng(0))
        _, weights = enc(np.ones((1, 1, 4)))
        for w in weights:
            assert w[0, 0, 0] == 1.0

    def test_zero_patches_encode_positions_only(self):
        """Test zero input and zero bias leave only the positional encodings."""
        enc = ImageEncoder(4, 8, 2, 3, np.random.default_rng(0))
        expected, _ = enc.layer(Tensor(sinusoidal_positions(3, 8).data[None]))
        np.testing.assert_allclose(encode_image(np.zeros((3, 4)), enc).data, expected.data[0])

    def test_wrong_patch_count(self):
        """Test an incomplete grid is rejected."""
        enc = ImageEncoder(4, 8, 2, 3, np.random.default_rng(0))
        with pytest.raises(DimensionError, match="3, 4"):
            encode_image(np.zeros((2, 4)), enc)


class TestTransformerLayer:
    """Test the shared encoder layer."""

    def test_heads_must_divide_d(self):
        """Test d divisible by h."""
        with pytest.raises(ValueError, match="divisible"):
            MultiHeadAttention(10, 3, np.random.default_rng(0))

    def test_permutation_equivariance(self):
        """Test permuting inputs (positions included) permutes outputs."""
        layer = TransformerLayer(8, 2, np.random.default_rng(0))
        x = np.random.default_rng(1).normal(size=(1, 4, 8))
        order = [2, 0, 3, 1]
        out, _ = layer(Tensor(x))
        permuted, _ = layer(Tensor(x[:, order]))
        np.testing.assert_allclose(permuted.data, out.data[:, order], atol=1e-12)
