"""Prediction heads over fused pair representations.

Three heads share the encoder output:
  * label head: two-layer MLP -> distribution over the task's labels
  * same-relation head: one shared nonlinear transform applied to both
    pair vectors, heuristic matching features
    [v1; v2; v1*v2; v1-v2], then a one-hidden-layer MLP -> {same, different}
  * triplet head: one shared projection into a metric space, Euclidean
    distances anchor-positive / anchor-negative
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .encoder_global import uniform_param
from .errors import DimensionError


@dataclass
class HeadParams:
    # label head (two-layer MLP)
    label_w1: Tensor
    label_b1: Tensor
    label_w2: Tensor
    label_b2: Tensor
    # shared transform feeding the same-relation features
    rel_w: Tensor
    rel_b: Tensor
    # same-relation classifier (one hidden layer)
    rel_mlp_w1: Tensor
    rel_mlp_b1: Tensor
    rel_mlp_w2: Tensor
    rel_mlp_b2: Tensor
    # shared projection into the triplet metric space
    dist_w: Tensor
    dist_b: Tensor

    def named(self) -> dict[str, Tensor]:
        return {f"heads.{name}": getattr(self, name) for name in self.__dataclass_fields__}


def init_head_params(
    rng: np.random.Generator, fused_width: int, d_m: int, n_classes: int
) -> HeadParams:
    return HeadParams(
        label_w1=uniform_param(rng, (fused_width, d_m)),
        label_b1=uniform_param(rng, (d_m,)),
        label_w2=uniform_param(rng, (d_m, n_classes)),
        label_b2=uniform_param(rng, (n_classes,)),
        rel_w=uniform_param(rng, (fused_width, d_m)),
        rel_b=uniform_param(rng, (d_m,)),
        rel_mlp_w1=uniform_param(rng, (4 * d_m, d_m)),
        rel_mlp_b1=uniform_param(rng, (d_m,)),
        rel_mlp_w2=uniform_param(rng, (d_m, 2)),
        rel_mlp_b2=uniform_param(rng, (2,)),
        dist_w=uniform_param(rng, (fused_width, d_m)),
        dist_b=uniform_param(rng, (d_m,)),
    )


def predict_label(v: Tensor, params: HeadParams) -> Tensor:
    """(B, fused) -> (B, n_classes) distribution (rows sum to 1)."""
    hidden = ad.relu(ad.matmul(v, params.label_w1) + params.label_b1)
    return ad.softmax(ad.matmul(hidden, params.label_w2) + params.label_b2, axis=-1)


def pair_relation_features(v1: Tensor, v2: Tensor, params: HeadParams) -> Tensor:
    """Heuristic matching features [v1; v2; v1*v2; v1-v2] after a shared transform.

    The transform (rel_w, rel_b) is one parameter set applied to both
    inputs.  The concatenation order makes the features order-dependent;
    callers fix the presentation order of the two pairs.
    """
    if v1.shape != v2.shape:
        raise DimensionError(f"pair widths differ: {v1.shape} vs {v2.shape}")
    t1 = ad.relu(ad.matmul(v1, params.rel_w) + params.rel_b)
    t2 = ad.relu(ad.matmul(v2, params.rel_w) + params.rel_b)
    return ad.concat([t1, t2, t1 * t2, t1 - t2], axis=-1)


def predict_same_relation(features: Tensor, params: HeadParams) -> Tensor:
    """(B, 4*d_m) -> (B, 2) distribution; column 1 means 'same relation'."""
    hidden = ad.relu(ad.matmul(features, params.rel_mlp_w1) + params.rel_mlp_b1)
    return ad.softmax(ad.matmul(hidden, params.rel_mlp_w2) + params.rel_mlp_b2, axis=-1)


def triplet_distances(
    v_anchor: Tensor, v_positive: Tensor, v_negative: Tensor, params: HeadParams
) -> tuple[Tensor, Tensor]:
    """Distances in the shared metric space: (d_ap, d_an), each (B,)."""
    if not (v_anchor.shape == v_positive.shape == v_negative.shape):
        raise DimensionError(
            f"triplet widths differ: {v_anchor.shape}, {v_positive.shape}, {v_negative.shape}"
        )
    proj_a = ad.relu(ad.matmul(v_anchor, params.dist_w) + params.dist_b)
    proj_p = ad.relu(ad.matmul(v_positive, params.dist_w) + params.dist_b)
    proj_n = ad.relu(ad.matmul(v_negative, params.dist_w) + params.dist_b)
    return ad.euclidean_distance(proj_a, proj_p), ad.euclidean_distance(proj_a, proj_n)
