"""Local conv encoder: pooling windows, concat order, fusion."""

import numpy as np
import numpy.testing as npt
import pytest

from pairmatch import autodiff as ad
from pairmatch.autodiff import Tensor, backward, zero_grads
from pairmatch.encoder_local import (
    LocalEncoderParams,
    fuse,
    init_local_params,
    local_encode,
    window_validity,
)
from pairmatch.errors import DegenerateInputError


class TestWindowValidity:
    def test_width_one_matches_mask(self):
        mask = np.array([[True, True, True, False]])
        npt.assert_array_equal(window_validity(mask, 1), mask)

    def test_width_two_excludes_boundary(self):
        mask = np.array([[True, True, True, False]])
        # windows [t, t+1]: valid at t=0,1 (covers real 0-1, 1-2); t=2 straddles pad
        npt.assert_array_equal(window_validity(mask, 2), [[True, True, False, False]])

    def test_width_three_centered(self):
        mask = np.array([[True] * 5])
        # windows [t-1, t+1]: valid at t=1,2,3
        npt.assert_array_equal(window_validity(mask, 3), [[False, True, True, True, False]])


class TestLocalEncode:
    def test_concat_width_with_default_kernels(self, rng):
        d, d_out, d_l = 6, 4, 5
        params = init_local_params(rng, d, (1, 2, 3), d_out, d_l)
        assert params.w.shape == (2 * 3 * d_out, d_l)
        h = Tensor(rng.normal(size=(2, 7, d)))
        out = local_encode(h, np.ones((2, 7), dtype=bool), params)
        assert out.shape == (2, d_l)

    def test_constant_sequence_max_equals_avg(self, rng):
        d = 3
        params = init_local_params(rng, d, (1, 2), d_out=2, d_l=4)
        row = rng.normal(size=(1, 1, d))
        h = Tensor(np.repeat(row, 5, axis=1))
        mask = np.ones((1, 5), dtype=bool)
        pools = []
        for kernel, bias in zip(params.kernels, params.kernel_biases):
            conv = ad.conv1d(h, kernel) + bias
            valid = window_validity(mask, kernel.shape[0])
            pools.append(
                (ad.masked_max_pool(conv, valid).data, ad.masked_avg_pool(conv, valid).data)
            )
        for mx, avg in pools:
            npt.assert_allclose(mx, avg, atol=1e-12)

    def test_matches_naive_conv_and_pool_oracle(self, rng):
        # single width-2 kernel over a hand-set 3x2 sequence
        h = np.array([[[1.0, 2.0], [3.0, -1.0], [0.5, 0.0]]])
        w = rng.normal(size=(2, 2, 2))
        bias = rng.normal(size=(2,))
        wp = rng.normal(size=(2 * 1 * 2, 3))
        bp = rng.normal(size=(3,))
        params = LocalEncoderParams(
            kernels=[Tensor(w, requires_grad=True)],
            kernel_biases=[Tensor(bias, requires_grad=True)],
            w=Tensor(wp, requires_grad=True),
            b=Tensor(bp, requires_grad=True),
        )
        out = local_encode(Tensor(h), np.ones((1, 3), dtype=bool), params)

        # oracle: explicit windows (left = 0 for width 2), valid t in {0, 1}
        conv = np.zeros((3, 2))
        for t in range(3):
            for j in range(2):
                if t + j < 3:
                    conv[t] += h[0, t + j] @ w[j]
        conv += bias
        windows = conv[:2]
        h_concat = np.concatenate([windows.max(axis=0), windows.mean(axis=0)])
        expected = np.maximum(h_concat @ wp + bp, 0.0)
        npt.assert_allclose(out.data[0], expected, atol=1e-12)

    def test_padding_leaves_v_l_unchanged(self, rng):
        d = 4
        params = init_local_params(rng, d, (1, 2, 3), d_out=3, d_l=5)
        h = rng.normal(size=(1, 6, d))
        pad = rng.normal(size=(1, 3, d))
        mask = np.ones((1, 6), dtype=bool)
        hpad = np.concatenate([h, pad], axis=1)
        mpad = np.concatenate([mask, np.zeros((1, 3), dtype=bool)], axis=1)
        a = local_encode(Tensor(h), mask, params).data
        b = local_encode(Tensor(hpad), mpad, params).data
        npt.assert_array_equal(a, b)

    def test_max_at_least_avg_per_pooled_channel(self, rng):
        d = 3
        params = init_local_params(rng, d, (2,), d_out=4, d_l=4)
        h = Tensor(rng.normal(size=(2, 8, d)))
        mask = np.ones((2, 8), dtype=bool)
        conv = ad.conv1d(h, params.kernels[0]) + params.kernel_biases[0]
        valid = window_validity(mask, 2)
        mx = ad.masked_max_pool(conv, valid).data
        avg = ad.masked_avg_pool(conv, valid).data
        assert (mx >= avg - 1e-12).all()

    def test_concat_order_fixed(self, rng):
        # kernels ascending by width, max before avg per kernel
        d = 2
        params = init_local_params(rng, d, (2, 1), d_out=1, d_l=2)
        assert params.widths == [1, 2]
        h = Tensor(rng.normal(size=(1, 4, d)))
        mask = np.ones((1, 4), dtype=bool)
        blocks = []
        for kernel, bias in zip(params.kernels, params.kernel_biases):
            conv = ad.conv1d(h, kernel) + bias
            valid = window_validity(mask, kernel.shape[0])
            blocks.append(ad.masked_max_pool(conv, valid).data)
            blocks.append(ad.masked_avg_pool(conv, valid).data)
        expected_concat = np.concatenate(blocks, axis=-1)
        v = local_encode(h, mask, params).data
        npt.assert_allclose(
            v, np.maximum(expected_concat @ params.w.data + params.b.data, 0.0), atol=1e-12
        )

    def test_sequence_shorter_than_kernel_rejected(self, rng):
        params = init_local_params(rng, 3, (1, 2, 3), d_out=2, d_l=2)
        h = Tensor(rng.normal(size=(1, 4, 3)))
        mask = np.array([[True, True, False, False]])
        with pytest.raises(DegenerateInputError):
            local_encode(h, mask, params)


class TestFuse:
    def test_concatenates(self):
        v = fuse(Tensor([[1.0, 2.0]]), Tensor([[3.0]]))
        npt.assert_array_equal(v.data, [[1.0, 2.0, 3.0]])

    def test_zero_local_tail(self, rng):
        vg = rng.normal(size=(2, 3))
        v = fuse(Tensor(vg), Tensor(np.zeros((2, 2))))
        npt.assert_array_equal(v.data[:, :3], vg)
        npt.assert_array_equal(v.data[:, 3:], 0.0)

    def test_gradient_flows_to_both_operands(self, rng):
        # probe on the v_g slice: gradient equals the probe on v_g,
        # exactly as if v_l were detached
        vg = Tensor(rng.normal(size=(1, 3)), requires_grad=True)
        vl = Tensor(rng.normal(size=(1, 2)), requires_grad=True)
        probe = rng.normal(size=(1, 3))
        fused = fuse(vg, vl)
        backward(ad.sum_(ad.slice_axis(fused, 1, 0, 3) * Tensor(probe)))
        npt.assert_allclose(vg.grad, probe, atol=1e-12)
        assert vl.grad is None or (vl.grad == 0).all()

        zero_grads([vg, vl])
        probe_full = rng.normal(size=(1, 5))
        backward(ad.sum_(fuse(vg, vl) * Tensor(probe_full)))
        npt.assert_allclose(vg.grad, probe_full[:, :3], atol=1e-12)
        npt.assert_allclose(vl.grad, probe_full[:, 3:], atol=1e-12)
