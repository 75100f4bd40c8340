"""Whole-sequence encoding of a sentence pair with a small transformer stack.

A pair is packed as ``<cls> a... <sep> b... <sep>`` with segment ids 0/1,
run through L post-norm blocks (multi-head self-attention + feed-forward,
residual and layer-norm after each sublayer), and the per-position features
of all layers are combined with softmax-normalized learned mixing weights.
The whole-pair vector is the final layer's first-token state, not the mixed
stack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import CLS_ID, PAD_ID, SEP_ID, SentencePair, Vocabulary, tokenize
from .errors import SequenceLengthError

_MASK_NEG = -1e30
INIT_SCALE = 0.05


def uniform_param(rng: np.random.Generator, shape) -> Tensor:
    return Tensor(rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape), requires_grad=True)


@dataclass
class BlockParams:
    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor
    ln1_gain: Tensor
    ln1_bias: Tensor
    ff_w1: Tensor
    ff_b1: Tensor
    ff_w2: Tensor
    ff_b2: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.{name}": getattr(self, name) for name in self.__dataclass_fields__}


@dataclass
class GlobalEncoderParams:
    token_emb: Tensor
    position_emb: Tensor
    segment_emb: Tensor
    blocks: list[BlockParams] = field(default_factory=list)
    mix_logits: Optional[Tensor] = None  # one logit per layer

    def named(self) -> dict[str, Tensor]:
        out = {
            "encoder.token_emb": self.token_emb,
            "encoder.position_emb": self.position_emb,
            "encoder.segment_emb": self.segment_emb,
            "encoder.mix_logits": self.mix_logits,
        }
        for i, block in enumerate(self.blocks):
            out.update(block.named(f"encoder.block{i}"))
        return out


def init_block_params(rng: np.random.Generator, d: int, ff: int) -> BlockParams:
    # layer-norm gain/bias start at identity so early features keep their scale
    return BlockParams(
        wq=uniform_param(rng, (d, d)),
        bq=uniform_param(rng, (d,)),
        wk=uniform_param(rng, (d, d)),
        bk=uniform_param(rng, (d,)),
        wv=uniform_param(rng, (d, d)),
        bv=uniform_param(rng, (d,)),
        wo=uniform_param(rng, (d, d)),
        bo=uniform_param(rng, (d,)),
        ln1_gain=Tensor(np.ones(d), requires_grad=True),
        ln1_bias=Tensor(np.zeros(d), requires_grad=True),
        ff_w1=uniform_param(rng, (d, ff)),
        ff_b1=uniform_param(rng, (ff,)),
        ff_w2=uniform_param(rng, (ff, d)),
        ff_b2=uniform_param(rng, (d,)),
        ln2_gain=Tensor(np.ones(d), requires_grad=True),
        ln2_bias=Tensor(np.zeros(d), requires_grad=True),
    )


def init_global_params(
    rng: np.random.Generator,
    vocab_size: int,
    d: int,
    layers: int,
    ff: int,
    max_len: int,
) -> GlobalEncoderParams:
    return GlobalEncoderParams(
        token_emb=uniform_param(rng, (vocab_size, d)),
        position_emb=uniform_param(rng, (max_len, d)),
        segment_emb=uniform_param(rng, (2, d)),
        blocks=[init_block_params(rng, d, ff) for _ in range(layers)],
        mix_logits=uniform_param(rng, (layers,)),
    )


# ---------------------------------------------------------------------------
# input packing

def build_input_sequence(
    pair: SentencePair, vocab: Vocabulary
) -> tuple[list[int], list[int], list[bool]]:
    """``<cls> a... <sep> b... <sep>`` token ids, segment ids, real-position mask."""
    tokens_a = tokenize(pair.s_a)
    tokens_b = tokenize(pair.s_b)
    ids = [CLS_ID] + vocab.encode(tokens_a) + [SEP_ID] + vocab.encode(tokens_b) + [SEP_ID]
    segments = [0] * (len(tokens_a) + 2) + [1] * (len(tokens_b) + 1)
    return ids, segments, [True] * len(ids)


def pad_batch(
    sequences: Sequence[Sequence[int]],
    segments: Sequence[Sequence[int]],
    max_len: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-pad to the longest sequence; error beyond the positional table."""
    longest = max(len(s) for s in sequences)
    if longest > max_len:
        raise SequenceLengthError(
            f"sequence of length {longest} exceeds positional table of {max_len}"
        )
    batch = len(sequences)
    ids = np.full((batch, longest), PAD_ID, dtype=np.int64)
    segs = np.zeros((batch, longest), dtype=np.int64)
    mask = np.zeros((batch, longest), dtype=bool)
    for i, (seq, seg) in enumerate(zip(sequences, segments)):
        ids[i, : len(seq)] = seq
        segs[i, : len(seq)] = seg
        mask[i, : len(seq)] = True
    return ids, segs, mask


# ---------------------------------------------------------------------------
# transformer

def _affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return ad.matmul(x, w) + b


def transformer_block(
    h: Tensor, params: BlockParams, mask: np.ndarray, heads: int
) -> tuple[Tensor, Tensor]:
    """One post-norm block; returns (output, attention weights).

    ``h``: (B, S, d); ``mask``: (B, S) bool, False at padded positions, which
    receive exactly zero attention weight.  Attention shape: (B, heads, S, S).
    """
    batch, seq, d = h.shape
    head_dim = d // heads

    def split_heads(t: Tensor) -> Tensor:
        return ad.swapaxes(ad.reshape(t, (batch, seq, heads, head_dim)), 1, 2)

    q = split_heads(_affine(h, params.wq, params.bq))
    k = split_heads(_affine(h, params.wk, params.bk))
    v = split_heads(_affine(h, params.wv, params.bv))

    scores = ad.matmul(q, ad.swapaxes(k, -1, -2)) * (1.0 / math.sqrt(head_dim))
    key_mask = np.where(mask, 0.0, _MASK_NEG)[:, None, None, :]
    attn = ad.softmax(scores + Tensor(key_mask), axis=-1)

    context = ad.reshape(ad.swapaxes(ad.matmul(attn, v), 1, 2), (batch, seq, d))
    attended = _affine(context, params.wo, params.bo)
    h1 = ad.layer_norm(h + attended) * params.ln1_gain + params.ln1_bias

    ff = _affine(ad.relu(_affine(h1, params.ff_w1, params.ff_b1)), params.ff_w2, params.ff_b2)
    out = ad.layer_norm(h1 + ff) * params.ln2_gain + params.ln2_bias
    return out, attn


def layer_mix(layer_outputs: Sequence[Tensor], mix_logits: Tensor) -> Tensor:
    """Softmax-weighted sum of per-layer feature stacks (all same shape)."""
    weights = ad.softmax(mix_logits, axis=0)
    mixed = None
    for i, h in enumerate(layer_outputs):
        w_i = ad.reshape(ad.slice_axis(weights, 0, i, i + 1), ())
        term = h * w_i
        mixed = term if mixed is None else mixed + term
    return mixed


@dataclass
class EncodedBatch:
    """Mixed sequence features, whole-pair vectors, and the real-position mask."""

    h: Tensor  # (B, S, d)
    v_g: Tensor  # (B, d)
    mask: np.ndarray  # (B, S) bool


def encode_batch(
    ids: np.ndarray,
    segs: np.ndarray,
    mask: np.ndarray,
    params: GlobalEncoderParams,
    heads: int,
) -> EncodedBatch:
    batch, seq = ids.shape
    if seq > params.position_emb.shape[0]:
        raise SequenceLengthError(
            f"sequence of length {seq} exceeds positional table of {params.position_emb.shape[0]}"
        )
    positions = np.broadcast_to(np.arange(seq), (batch, seq))
    h = (
        ad.embedding_lookup(params.token_emb, ids)
        + ad.embedding_lookup(params.position_emb, positions)
        + ad.embedding_lookup(params.segment_emb, segs)
    )
    layer_outputs = []
    for block in params.blocks:
        h, _ = transformer_block(h, block, mask, heads)
        layer_outputs.append(h)
    mixed = layer_mix(layer_outputs, params.mix_logits)
    d = mixed.shape[-1]
    v_g = ad.reshape(ad.slice_axis(layer_outputs[-1], 1, 0, 1), (batch, d))
    return EncodedBatch(h=mixed, v_g=v_g, mask=mask)


def encode_pairs(
    pairs: Sequence[SentencePair],
    vocab: Vocabulary,
    params: GlobalEncoderParams,
    heads: int,
    max_len: int,
) -> EncodedBatch:
    packed = [build_input_sequence(p, vocab) for p in pairs]
    ids, segs, mask = pad_batch([p[0] for p in packed], [p[1] for p in packed], max_len)
    return encode_batch(ids, segs, mask, params, heads)


def encode_pair(
    pair: SentencePair,
    vocab: Vocabulary,
    params: GlobalEncoderParams,
    heads: int,
    max_len: int,
) -> EncodedBatch:
    """Single-pair convenience wrapper (batch of one)."""
    return encode_pairs([pair], vocab, params, heads, max_len)
