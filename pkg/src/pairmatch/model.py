"""Model configuration, parameter container, and the end-to-end forward pass."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .autodiff import Tensor
from .data import SentencePair, TASK_LABELS, Vocabulary
from .encoder_global import (
    GlobalEncoderParams,
    build_input_sequence,
    encode_batch,
    init_global_params,
    pad_batch,
)
from .encoder_local import LocalEncoderParams, fuse, init_local_params, local_encode
from .errors import ContractError
from .heads import HeadParams, init_head_params, predict_label

DEFAULT_SEED = 7


@dataclass(frozen=True)
class TrainConfig:
    """Dimensions, loss weights, optimizer settings, and ablation switches."""

    task: str = "nli"
    d: int = 32  # transformer width
    d_m: int = 32  # MLP / head hidden width
    d_out: Optional[int] = None  # conv channels per kernel; defaults to d
    d_l: Optional[int] = None  # local vector width; defaults to d
    layers: int = 2
    heads: int = 4
    ff: int = 64
    max_len: int = 32
    kernel_widths: tuple[int, ...] = (1, 2, 3)
    margin: float = 0.2
    beta: float = 0.5
    lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 30
    batch_size: int = 8
    seed: int = DEFAULT_SEED
    triplets_per_epoch: Optional[int] = None  # defaults to len(dataset)
    no_local: bool = False
    no_r2: bool = False
    no_triplet: bool = False

    def __post_init__(self):
        if self.task not in TASK_LABELS:
            raise ContractError(f"unknown task {self.task!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ContractError(f"beta must lie in [0, 1], got {self.beta}")
        if self.margin < 0:
            raise ContractError(f"margin must be >= 0, got {self.margin}")
        for name in ("d", "d_m", "layers", "heads", "ff", "max_len", "batch_size", "epochs"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.d % self.heads != 0:
            raise ContractError(f"d={self.d} not divisible by heads={self.heads}")
        if not self.kernel_widths or min(self.kernel_widths) < 1:
            raise ContractError(f"kernel widths must be positive, got {self.kernel_widths}")
        if self.lr < 0:
            raise ContractError(f"lr must be >= 0, got {self.lr}")

    @property
    def conv_channels(self) -> int:
        return self.d if self.d_out is None else self.d_out

    @property
    def local_width(self) -> int:
        return self.d if self.d_l is None else self.d_l

    @property
    def fused_width(self) -> int:
        return self.d if self.no_local else self.d + self.local_width

    @property
    def labels(self) -> tuple[str, ...]:
        return TASK_LABELS[self.task]

    @property
    def n_classes(self) -> int:
        return len(self.labels)

    def with_ablation(self, variant: str) -> "TrainConfig":
        if variant == "full":
            return replace(self, no_local=False, no_r2=False, no_triplet=False)
        if variant in ("no_local", "no_r2", "no_triplet"):
            return replace(
                self,
                no_local=variant == "no_local",
                no_r2=variant == "no_r2",
                no_triplet=variant == "no_triplet",
            )
        raise ContractError(f"unknown ablation variant {variant!r}")


@dataclass
class ModelParams:
    """Every trainable tensor, grouped by subsystem."""

    encoder: GlobalEncoderParams
    local: Optional[LocalEncoderParams]
    heads: HeadParams

    def named(self) -> dict[str, Tensor]:
        out = dict(self.encoder.named())
        if self.local is not None:
            out.update(self.local.named())
        out.update(self.heads.named())
        return out

    def tensors(self) -> list[Tensor]:
        return list(self.named().values())


def init_params(config: TrainConfig, vocab_size: int, rng: np.random.Generator) -> ModelParams:
    encoder = init_global_params(
        rng, vocab_size, config.d, config.layers, config.ff, config.max_len
    )
    local = None
    if not config.no_local:
        local = init_local_params(
            rng, config.d, config.kernel_widths, config.conv_channels, config.local_width
        )
    heads = init_head_params(rng, config.fused_width, config.d_m, config.n_classes)
    return ModelParams(encoder=encoder, local=local, heads=heads)


class PairEncoder:
    """Caches the packed id/segment sequences of pairs across steps."""

    def __init__(self, vocab: Vocabulary, max_len: int):
        self.vocab = vocab
        self.max_len = max_len
        self._cache: dict[SentencePair, tuple[list[int], list[int]]] = {}

    def pack(self, pairs: Sequence[SentencePair]):
        seqs, segs = [], []
        for pair in pairs:
            hit = self._cache.get(pair)
            if hit is None:
                ids, seg, _ = build_input_sequence(pair, self.vocab)
                hit = (ids, seg)
                self._cache[pair] = hit
            seqs.append(hit[0])
            segs.append(hit[1])
        return pad_batch(seqs, segs, self.max_len)


def represent(
    params: ModelParams,
    config: TrainConfig,
    encoder: PairEncoder,
    pairs: Sequence[SentencePair],
) -> Tensor:
    """Fused representation v for a batch of pairs: (B, fused_width)."""
    ids, segs, mask = encoder.pack(pairs)
    encoded = encode_batch(ids, segs, mask, params.encoder, config.heads)
    if config.no_local or params.local is None:
        return encoded.v_g
    v_l = local_encode(encoded.h, encoded.mask, params.local)
    return fuse(encoded.v_g, v_l)


def label_distribution(params: ModelParams, v: Tensor) -> Tensor:
    return predict_label(v, params.heads)
