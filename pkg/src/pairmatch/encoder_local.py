"""Keyword/phrase-level features via multi-kernel convolution and dual pooling.

For each kernel width the sequence features are convolved (same padding),
then max- and average-pooled over the sequence axis.  Pooling only sees
windows that lie entirely inside the real (non-pad) span, so appending
padding never changes the result.  The pooled vectors are concatenated in a
fixed order (kernels ascending by width, max before avg) and passed through
an affine map + ReLU; the whole-pair vector is fused on by concatenation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .encoder_global import uniform_param
from .errors import DegenerateInputError

def window_validity(mask: np.ndarray, width: int) -> np.ndarray:
    """Valid pooling positions for a same-padded width-k convolution.

    Output position t covers inputs [t - left, t - left + k) with
    left = (k - 1) // 2; it is valid iff that window sits inside the real
    prefix of the row (padding is only ever on the right).
    """
    lengths = mask.sum(axis=1)
    left = (width - 1) // 2
    t = np.arange(mask.shape[1])
    return (t - left >= 0)[None, :] & ((t - left + width)[None, :] <= lengths[:, None])


@dataclass
class LocalEncoderParams:
    kernels: list[Tensor]  # each (k, d, d_out), widths ascending
    kernel_biases: list[Tensor]  # each (d_out,)
    w: Tensor  # (2 * K * d_out, d_l)
    b: Tensor  # (d_l,)

    @property
    def widths(self) -> list[int]:
        return [k.shape[0] for k in self.kernels]

    def named(self) -> dict[str, Tensor]:
        out = {}
        for kernel, bias in zip(self.kernels, self.kernel_biases):
            out[f"local.conv{kernel.shape[0]}.kernel"] = kernel
            out[f"local.conv{kernel.shape[0]}.bias"] = bias
        out["local.w"] = self.w
        out["local.b"] = self.b
        return out


def init_local_params(
    rng: np.random.Generator,
    d: int,
    widths: Sequence[int],
    d_out: int,
    d_l: int,
) -> LocalEncoderParams:
    widths = sorted(widths)
    return LocalEncoderParams(
        kernels=[uniform_param(rng, (k, d, d_out)) for k in widths],
        kernel_biases=[uniform_param(rng, (d_out,)) for _ in widths],
        w=uniform_param(rng, (2 * len(widths) * d_out, d_l)),
        b=uniform_param(rng, (d_l,)),
    )


def local_encode(h: Tensor, mask: np.ndarray, params: LocalEncoderParams) -> Tensor:
    """h: (B, S, d), mask: (B, S) bool -> v_l: (B, d_l)."""
    lengths = mask.sum(axis=1)
    widest = max(params.widths)
    if lengths.min() < widest:
        raise DegenerateInputError(
            f"sequence of {lengths.min()} real positions is shorter than kernel width {widest}"
        )
    pooled: list[Tensor] = []
    for kernel, bias in zip(params.kernels, params.kernel_biases):
        conv = ad.conv1d(h, kernel) + bias
        valid = window_validity(mask, kernel.shape[0])
        pooled.append(ad.masked_max_pool(conv, valid))
        pooled.append(ad.masked_avg_pool(conv, valid))
    h_concat = ad.concat(pooled, axis=-1)
    return ad.relu(ad.matmul(h_concat, params.w) + params.b)


def fuse(v_g: Tensor, v_l: Tensor) -> Tensor:
    """Concatenate global and local vectors; slicing the result recovers both."""
    return ad.concat([v_g, v_l], axis=-1)
