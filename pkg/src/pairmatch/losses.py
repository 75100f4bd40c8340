"""The three loss families and their composition into the total objective.

Per triplet the model produces three matching cross-entropies, two
same-relation cross-entropies, and one triplet hinge.  The total over a
batch of N triplets is

    L = (1/N) sum_i [ beta * (Ls1 + Ls2 + Ls3)/3
                      + (1 - beta) * ((Lr1 + Lr2)/2 + Ld) ]_i

which is affine in beta for fixed parts.  Probabilities are clamped at
1e-12 before the log.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError

PROB_FLOOR = 1e-12


def cross_entropy(p: Tensor, y) -> Tensor:
    """-log p[y] per row; ``p`` is (C,) with int y, or (N, C) with (N,) y."""
    if p.data.ndim == 1:
        return ad.reshape(cross_entropy(ad.reshape(p, (1, p.shape[0])), np.array([int(y)])), ())
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != p.shape[0]:
        raise ContractError(f"label shape {y.shape} does not match {p.shape[0]} rows")
    if y.min() < 0 or y.max() >= p.shape[1]:
        raise ContractError(f"label index out of range [0, {p.shape[1]})")
    picked = ad.gather_rows(p, y)
    return ad.neg(ad.log(ad.clamp_min(picked, PROB_FLOOR)))


def triplet_hinge(d_ap: Tensor, d_an: Tensor, margin: float) -> Tensor:
    """max(d_ap - d_an + margin, 0); gradient is zero in the inactive region."""
    if margin < 0:
        raise ContractError(f"margin must be >= 0, got {margin}")
    return ad.relu(d_ap - d_an + margin)


class TripletLossParts(NamedTuple):
    """The six per-triplet loss values."""

    l_s1: float
    l_s2: float
    l_s3: float
    l_rel1: float
    l_rel2: float
    l_d: float


def _check_beta(beta: float) -> None:
    if not 0.0 <= beta <= 1.0:
        raise ContractError(f"beta must lie in [0, 1], got {beta}")


def combine_parts(parts: TripletLossParts, beta: float) -> float:
    """The bracketed per-triplet term of the total objective."""
    _check_beta(beta)
    matching = (parts.l_s1 + parts.l_s2 + parts.l_s3) / 3.0
    auxiliary = (parts.l_rel1 + parts.l_rel2) / 2.0 + parts.l_d
    return beta * matching + (1.0 - beta) * auxiliary


def total_loss(breakdowns: Sequence[TripletLossParts], beta: float) -> float:
    """Batch objective: mean of the per-triplet combined terms."""
    _check_beta(beta)
    if len(breakdowns) == 0:
        raise ContractError("total_loss needs at least one triplet")
    return sum(combine_parts(p, beta) for p in breakdowns) / len(breakdowns)


def total_loss_tensor(
    l_s1: Tensor,
    l_s2: Tensor,
    l_s3: Tensor,
    l_rel1: Tensor | None,
    l_rel2: Tensor | None,
    l_d: Tensor | None,
    beta: float,
) -> Tensor:
    """Differentiable composition over batch-mean parts.

    ``None`` parts (ablations) are omitted from the graph entirely, so they
    contribute exactly zero gradient.
    """
    _check_beta(beta)
    total = (l_s1 + l_s2 + l_s3) * (beta / 3.0)
    if l_rel1 is not None:
        total = total + (l_rel1 + l_rel2) * ((1.0 - beta) / 2.0)
    if l_d is not None:
        total = total + l_d * (1.0 - beta)
    return total


@dataclass(frozen=True)
class LossBreakdown:
    """Logged batch-mean loss parts; ``total`` recomputes from them exactly."""

    l_s1: float
    l_s2: float
    l_s3: float
    l_rel1: float
    l_rel2: float
    l_d: float
    beta: float
    margin: float
    total: float

    def recomputed_total(self) -> float:
        return combine_parts(
            TripletLossParts(self.l_s1, self.l_s2, self.l_s3, self.l_rel1, self.l_rel2, self.l_d),
            self.beta,
        )
