"""End-to-end training with the composite objective, evaluation, ablations,
and embedding export.

One training step draws a batch of triplets, runs a single batched forward
over all 3B pairs (anchors, positives, negatives share every parameter by
construction), composes matching cross-entropy, same-relation cross-entropy
and triplet hinge terms per the composite objective, backpropagates once,
and applies an Adam update.  Everything is deterministic given
(config, dataset): all randomness flows from numpy SeedSequences spawned
off ``config.seed``.
"""

from __future__ import annotations

import hashlib
import json
import math
import statistics
from dataclasses import asdict, dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from . import backend
from .autodiff import Tensor, backward, zero_grads
from .data import (
    SentencePair,
    TripletExample,
    Vocabulary,
    draw_group_combos,
    sample_triplets,
)
from .errors import ContractError, MetricError, TrainingDivergedError
from .heads import (
    pair_relation_features,
    predict_label,
    predict_same_relation,
    triplet_distances,
)
from .losses import LossBreakdown, cross_entropy, total_loss_tensor, triplet_hinge
from .model import ModelParams, PairEncoder, TrainConfig, init_params, represent

_EVAL_TRIPLETS = 128
_EVAL_CHUNK = 128


class Adam:
    """Standard Adam with bias correction over a named parameter dict."""

    def __init__(self, named: dict[str, Tensor], lr: float, beta1: float, beta2: float, eps: float):
        self._items = list(named.items())
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {name: np.zeros(p.size) for name, p in self._items}
        self._v = {name: np.zeros(p.size) for name, p in self._items}

    def step(self) -> None:
        self.t += 1
        for name, p in self._items:
            if p.grad is None:
                continue
            backend.adam_update(
                p.data.reshape(-1),
                np.ascontiguousarray(p.grad.reshape(-1)),
                self._m[name],
                self._v[name],
                self.t,
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
            )


@dataclass(frozen=True)
class StepRecord:
    step: int
    epoch: int
    breakdown: LossBreakdown


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    matching_accuracy: float
    same_relation_accuracy: float
    mean_d_ap: float
    mean_d_an: float


@dataclass
class MetricsLog:
    """Chronological step/epoch records; serializes to line-delimited JSON."""

    records: list = None

    def __post_init__(self):
        if self.records is None:
            self.records = []

    @property
    def steps(self) -> list[StepRecord]:
        return [r for r in self.records if isinstance(r, StepRecord)]

    @property
    def epochs(self) -> list[EpochRecord]:
        return [r for r in self.records if isinstance(r, EpochRecord)]

    def to_jsonl(self) -> str:
        lines = []
        for r in self.records:
            if isinstance(r, StepRecord):
                payload = {"kind": "step", "step": r.step, "epoch": r.epoch}
                payload.update(asdict(r.breakdown))
            else:
                payload = {"kind": "epoch"}
                payload.update(asdict(r))
            lines.append(json.dumps(payload, sort_keys=True))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_jsonl())


@dataclass
class TrainResult:
    config: TrainConfig
    params: ModelParams
    vocab: Vocabulary
    log: MetricsLog


def _group_rows(
    batch: Sequence[TripletExample], batch_size: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row indices into the stacked (3B, .) representation for the two
    sampled pair-combinations of every triplet, plus same-relation targets.

    Rows [0, B) hold each triplet's first group, rows [B, 2B) the second.
    """
    n = len(batch)
    first = np.empty(2 * n, dtype=np.int64)
    second = np.empty(2 * n, dtype=np.int64)
    target = np.empty(2 * n, dtype=np.int64)
    # combo c: 0 -> (anchor, positive), 1 -> (anchor, negative), 2 -> (positive, negative)
    row_of = ((0, 1), (0, 2), (1, 2))
    for i in range(n):
        combos = draw_group_combos(rng)
        for slot, c in enumerate(combos):
            r = slot * n + i
            a, b = row_of[c]
            first[r] = a * batch_size + i
            second[r] = b * batch_size + i
            target[r] = 1 if c == 0 else 0
    return first, second, target


def _mean_slice(t: Tensor, start: int, stop: int) -> Tensor:
    return ad.mean(ad.slice_axis(t, 0, start, stop))


def training_loss(
    params: ModelParams,
    config: TrainConfig,
    encoder: PairEncoder,
    batch: Sequence[TripletExample],
    group_rng: np.random.Generator,
) -> tuple[Tensor, LossBreakdown]:
    """Composite loss tensor plus the logged batch-mean breakdown."""
    n = len(batch)
    label_index = {label: i for i, label in enumerate(config.labels)}
    pairs = (
        [t.anchor for t in batch] + [t.positive for t in batch] + [t.negative for t in batch]
    )
    v_all = represent(params, config, encoder, pairs)
    probs = predict_label(v_all, params.heads)
    gold = np.array([label_index[p.label] for p in pairs], dtype=np.int64)
    ce = cross_entropy(probs, gold)
    l_s1 = _mean_slice(ce, 0, n)
    l_s2 = _mean_slice(ce, n, 2 * n)
    l_s3 = _mean_slice(ce, 2 * n, 3 * n)

    l_rel1 = l_rel2 = None
    if not config.no_r2:
        first, second, target = _group_rows(batch, n, group_rng)
        feats = pair_relation_features(
            ad.take_rows(v_all, first), ad.take_rows(v_all, second), params.heads
        )
        rel_ce = cross_entropy(predict_same_relation(feats, params.heads), target)
        l_rel1 = _mean_slice(rel_ce, 0, n)
        l_rel2 = _mean_slice(rel_ce, n, 2 * n)

    l_d = None
    if not config.no_triplet:
        v_a = ad.slice_axis(v_all, 0, 0, n)
        v_p = ad.slice_axis(v_all, 0, n, 2 * n)
        v_n = ad.slice_axis(v_all, 0, 2 * n, 3 * n)
        d_ap, d_an = triplet_distances(v_a, v_p, v_n, params.heads)
        l_d = ad.mean(triplet_hinge(d_ap, d_an, config.margin))

    total = total_loss_tensor(l_s1, l_s2, l_s3, l_rel1, l_rel2, l_d, config.beta)
    breakdown = LossBreakdown(
        l_s1=float(l_s1.data),
        l_s2=float(l_s2.data),
        l_s3=float(l_s3.data),
        l_rel1=float(l_rel1.data) if l_rel1 is not None else 0.0,
        l_rel2=float(l_rel2.data) if l_rel2 is not None else 0.0,
        l_d=float(l_d.data) if l_d is not None else 0.0,
        beta=config.beta,
        margin=config.margin,
        total=float(total.data),
    )
    return total, breakdown


def train(config: TrainConfig, dataset: Sequence[SentencePair]) -> TrainResult:
    """Train on ``dataset``; deterministic given (config, dataset)."""
    if not dataset:
        raise ContractError("cannot train on an empty dataset")
    vocab = Vocabulary.build(dataset)
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    params = init_params(config, len(vocab), np.random.default_rng(seeds[0]))
    encoder = PairEncoder(vocab, config.max_len)
    optimizer = Adam(
        params.named(), config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps
    )
    triplet_stream = sample_triplets(dataset, config.batch_size, np.random.default_rng(seeds[1]))
    group_rng = np.random.default_rng(seeds[2])
    per_epoch = config.triplets_per_epoch or len(dataset)
    steps_per_epoch = max(1, math.ceil(per_epoch / config.batch_size))

    log = MetricsLog()
    step = 0
    for epoch in range(config.epochs):
        for _ in range(steps_per_epoch):
            batch = next(triplet_stream)
            total, breakdown = training_loss(params, config, encoder, batch, group_rng)
            if not np.isfinite(total.data):
                raise TrainingDivergedError(step)
            backward(total)
            optimizer.step()
            zero_grads(params.tensors())
            log.records.append(StepRecord(step=step, epoch=epoch, breakdown=breakdown))
            step += 1
        log.records.append(
            EpochRecord(epoch=epoch, **evaluate(params, config, vocab, dataset))
        )
    return TrainResult(config=config, params=params, vocab=vocab, log=log)


def evaluate(
    params: ModelParams,
    config: TrainConfig,
    vocab: Vocabulary,
    dataset: Sequence[SentencePair],
    seed: int = 1234,
) -> dict[str, float]:
    """Matching accuracy over the dataset plus same-relation accuracy and
    mean triplet distances over groups sampled with a fixed seed."""
    encoder = PairEncoder(vocab, config.max_len)
    label_index = {label: i for i, label in enumerate(config.labels)}

    correct = 0
    for start in range(0, len(dataset), _EVAL_CHUNK):
        chunk = dataset[start : start + _EVAL_CHUNK]
        probs = predict_label(represent(params, config, encoder, chunk), params.heads)
        predicted = np.argmax(probs.data, axis=1)
        gold = np.array([label_index[p.label] for p in chunk])
        correct += int((predicted == gold).sum())
    matching_accuracy = correct / len(dataset)

    rng = np.random.default_rng(seed)
    n_eval = min(len(dataset), _EVAL_TRIPLETS)
    batch = next(sample_triplets(dataset, n_eval, rng))
    pairs = (
        [t.anchor for t in batch] + [t.positive for t in batch] + [t.negative for t in batch]
    )
    v_all = represent(params, config, encoder, pairs)
    first, second, target = _group_rows(batch, n_eval, rng)
    feats = pair_relation_features(
        ad.take_rows(v_all, first), ad.take_rows(v_all, second), params.heads
    )
    rel_probs = predict_same_relation(feats, params.heads)
    rel_accuracy = float((np.argmax(rel_probs.data, axis=1) == target).mean())

    v_a = ad.slice_axis(v_all, 0, 0, n_eval)
    v_p = ad.slice_axis(v_all, 0, n_eval, 2 * n_eval)
    v_n = ad.slice_axis(v_all, 0, 2 * n_eval, 3 * n_eval)
    d_ap, d_an = triplet_distances(v_a, v_p, v_n, params.heads)

    return {
        "matching_accuracy": matching_accuracy,
        "same_relation_accuracy": rel_accuracy,
        "mean_d_ap": float(d_ap.data.mean()),
        "mean_d_an": float(d_an.data.mean()),
    }


# ---------------------------------------------------------------------------
# embeddings, separation, ablation

def embeddings_matrix(
    params: ModelParams,
    config: TrainConfig,
    vocab: Vocabulary,
    dataset: Sequence[SentencePair],
) -> tuple[np.ndarray, list[str]]:
    encoder = PairEncoder(vocab, config.max_len)
    rows = []
    for start in range(0, len(dataset), _EVAL_CHUNK):
        chunk = dataset[start : start + _EVAL_CHUNK]
        rows.append(represent(params, config, encoder, chunk).data)
    return np.concatenate(rows, axis=0), [p.label for p in dataset]


def export_embeddings(
    params: ModelParams,
    config: TrainConfig,
    vocab: Vocabulary,
    dataset: Sequence[SentencePair],
    path,
) -> None:
    """CSV export: header line ``dim=<d>``, then one ``x1,...,xd,label`` row
    per pair, in dataset order.  Floats use shortest round-trip repr, so the
    file is byte-stable for identical params."""
    matrix, labels = embeddings_matrix(params, config, vocab, dataset)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"dim={matrix.shape[1]}\n")
        for row, label in zip(matrix, labels):
            fh.write(",".join(repr(float(x)) for x in row) + f",{label}\n")


def separation_metric(matrix: np.ndarray, labels: Sequence[str]) -> float:
    """Mean intra-class pairwise distance over mean inter-class distance.

    Lower means tighter same-relation clusters relative to the gaps
    between relations.
    """
    labels = list(labels)
    if matrix.shape[0] != len(labels):
        raise ContractError(f"{matrix.shape[0]} rows vs {len(labels)} labels")
    counts = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    if len(counts) < 2:
        raise MetricError("separation metric needs at least two classes")
    singleton = [lab for lab, c in sorted(counts.items()) if c < 2]
    if singleton:
        raise MetricError(f"class {singleton[0]!r} has a single point")
    diff = matrix[:, None, :] - matrix[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    same = np.array([[a == b for b in labels] for a in labels])
    off_diag = ~np.eye(len(labels), dtype=bool)
    intra = dist[same & off_diag].mean()
    inter_mask = ~same
    inter = dist[inter_mask].mean()
    if inter == 0.0:
        raise MetricError("all points coincide; separation is 0/0")
    return float(intra / inter)


ABLATION_VARIANTS = ("full", "no_local", "no_r2", "no_triplet")


def _ablate_task(task: tuple) -> tuple[float, float]:
    config, train_set, eval_set = task
    result = train(config, train_set)
    metrics = evaluate(result.params, config, result.vocab, eval_set)
    matrix, labels = embeddings_matrix(result.params, config, result.vocab, eval_set)
    return metrics["matching_accuracy"], separation_metric(matrix, labels)


def ablate(
    config: TrainConfig,
    train_set: Sequence[SentencePair],
    eval_set: Sequence[SentencePair],
    seeds: Iterable[int],
    workers: int = 1,
) -> list[dict]:
    """Train every ablation variant over ``seeds``; report per-variant
    held-out accuracy and separation with their medians.

    ``workers > 1`` fans the independent (variant, seed) runs over a process
    pool; each run is seed-deterministic, so the output is identical to the
    sequential order regardless of scheduling.
    """
    seeds = list(seeds)
    tasks = [
        (replace(config.with_ablation(variant), seed=seed), train_set, eval_set)
        for variant in ABLATION_VARIANTS
        for seed in seeds
    ]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_ablate_task, tasks))
    else:
        outcomes = [_ablate_task(task) for task in tasks]
    rows = []
    for i, variant in enumerate(ABLATION_VARIANTS):
        chunk = outcomes[i * len(seeds) : (i + 1) * len(seeds)]
        accuracies = [acc for acc, _ in chunk]
        separations = [sep for _, sep in chunk]
        rows.append(
            {
                "variant": variant,
                "seeds": seeds,
                "accuracies": accuracies,
                "separations": separations,
                "median_accuracy": statistics.median(accuracies),
                "median_separation": statistics.median(separations),
            }
        )
    return rows


def params_checksum(params: ModelParams) -> str:
    """SHA-256 over names and raw value bytes, in declaration order."""
    digest = hashlib.sha256()
    for name, tensor in params.named().items():
        digest.update(name.encode())
        digest.update(np.ascontiguousarray(tensor.data).tobytes())
    return digest.hexdigest()
