"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
complete.  The heavyweight fixtures (the overfit run and the 4-variant,
5-seed ablation grid) are shared across criteria.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from pairmatch import autodiff as ad
from pairmatch.autodiff import Tensor, backward
from pairmatch.cli import main as cli_main
from pairmatch.data import (
    generate_synthetic,
    sample_pair_groups,
    sample_triplets,
)
from pairmatch.integrity import GRAD_TOLERANCE, run_gradient_integrity
from pairmatch.losses import TripletLossParts, total_loss, total_loss_tensor
from pairmatch.model import PairEncoder, TrainConfig
from pairmatch.train_eval import (
    ablate,
    params_checksum,
    train,
    training_loss,
)

# frozen acceptance settings
GRAD_SEEDS = 10
GRAD_EPS = 1e-5
GRAD_BUDGET_S = 120.0

OVERFIT_SET_SIZE = 64
OVERFIT_DATA_SEED = 42
OVERFIT_CONFIG = TrainConfig(task="nli", epochs=200, batch_size=8, seed=7)
OVERFIT_BUDGET_S = 300.0
MARGIN = 0.2

ABLATION_CONFIG = TrainConfig(task="nli", epochs=16, batch_size=16, beta=0.30)
ABLATION_TRAIN_SEED = 11
ABLATION_EVAL_SEED = 12
ABLATION_SEEDS = (1, 2, 3, 4, 5)
CHANCE = 1.0 / 3.0


def report(name: str, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")


@pytest.fixture(scope="module")
def overfit_run():
    dataset = generate_synthetic(OVERFIT_SET_SIZE, "nli", seed=OVERFIT_DATA_SEED)
    start = time.perf_counter()
    result = train(OVERFIT_CONFIG, dataset)
    elapsed = time.perf_counter() - start
    return result, dataset, elapsed


@pytest.fixture(scope="module")
def ablation_rows():
    train_set = generate_synthetic(300, "nli", seed=ABLATION_TRAIN_SEED)
    eval_set = generate_synthetic(300, "nli", seed=ABLATION_EVAL_SEED)
    return ablate(ABLATION_CONFIG, train_set, eval_set, ABLATION_SEEDS, workers=2)


def test_gradient_integrity():
    start = time.perf_counter()
    worst, detail = run_gradient_integrity(seeds=GRAD_SEEDS, eps=GRAD_EPS)
    elapsed = time.perf_counter() - start
    ok = worst < GRAD_TOLERANCE and elapsed < GRAD_BUDGET_S
    report(
        "gradient-integrity",
        ok,
        f"max_rel_err={worst:.2e} over {len(detail)} checks x {GRAD_SEEDS} seeds, "
        f"{elapsed:.1f}s",
    )
    assert worst < GRAD_TOLERANCE
    assert elapsed < GRAD_BUDGET_S


def test_loss_arithmetic_oracle():
    parts = [
        TripletLossParts(0.31, 0.62, 0.93, 0.21, 0.43, 0.75),
        TripletLossParts(1.25, 0.15, 0.55, 0.85, 0.65, 0.05),
    ]

    def direct(beta):
        acc = 0.0
        for p in parts:
            acc += beta * (p.l_s1 + p.l_s2 + p.l_s3) / 3.0
            acc += (1.0 - beta) * ((p.l_rel1 + p.l_rel2) / 2.0 + p.l_d)
        return acc / len(parts)

    worst = max(abs(total_loss(parts, b) - direct(b)) for b in (0.0, 0.25, 0.5, 1.0))

    # beta = 1 removes every auxiliary contribution from the gradient
    match = [Tensor(np.array(x), requires_grad=True) for x in (0.2, 0.5, 0.8)]
    aux = [Tensor(np.array(x), requires_grad=True) for x in (0.4, 0.6, 0.3)]
    backward(total_loss_tensor(*match, *aux, beta=1.0))
    aux_clean = all(t.grad is None or t.grad == 0.0 for t in aux)
    match_grads = all(abs(t.grad - 1.0 / 3.0) < 1e-15 for t in match)

    # and at the model level: heads used only by auxiliary tasks get zero grads
    dataset = generate_synthetic(12, "nli", seed=3)
    cfg = replace(
        TrainConfig(d=8, d_m=8, layers=1, heads=2, ff=16, batch_size=2), beta=1.0
    )
    from pairmatch.data import Vocabulary
    from pairmatch.model import init_params

    vocab = Vocabulary.build(dataset)
    params = init_params(cfg, len(vocab), np.random.default_rng(0))
    encoder = PairEncoder(vocab, cfg.max_len)
    batch = next(sample_triplets(dataset, 2, 1))
    total, _ = training_loss(params, cfg, encoder, batch, np.random.default_rng(2))
    backward(total)
    aux_param_names = [
        n for n in params.named()
        if n.startswith(("heads.rel_", "heads.dist_"))
    ]
    aux_zero = all(
        params.named()[n].grad is None or not params.named()[n].grad.any()
        for n in aux_param_names
    )

    ok = worst < 1e-12 and aux_clean and match_grads and aux_zero
    report(
        "loss-arithmetic",
        ok,
        f"max_dev={worst:.1e} at beta in {{0,0.25,0.5,1}}; "
        f"beta=1 aux grads zero: {aux_clean and aux_zero}",
    )
    assert worst < 1e-12
    assert aux_clean and match_grads and aux_zero


def test_overfit_sanity(overfit_run):
    result, _, elapsed = overfit_run
    perfect = [
        e.epoch
        for e in result.log.epochs
        if e.matching_accuracy == 1.0 and e.same_relation_accuracy == 1.0
    ]
    ok = bool(perfect) and perfect[0] < 200 and elapsed < OVERFIT_BUDGET_S
    report(
        "overfit-sanity",
        ok,
        f"first 100%/100% epoch: {perfect[0] if perfect else 'never'}, "
        f"{elapsed:.0f}s for 200 epochs",
    )
    assert perfect, "never reached 100% matching + 100% same-relation accuracy"
    assert elapsed < OVERFIT_BUDGET_S


def test_triplet_geometry(overfit_run):
    result, dataset, _ = overfit_run
    final = result.log.epochs[-1]
    gap = final.mean_d_an - final.mean_d_ap
    ok = gap >= MARGIN
    report(
        "triplet-geometry",
        ok,
        f"mean(d_an - d_ap)={gap:.3f} >= margin {MARGIN} on training triplets",
    )
    assert gap >= MARGIN


def test_separation_property(ablation_rows):
    sep = {row["variant"]: row["median_separation"] for row in ablation_rows}
    ok = sep["full"] < sep["no_r2"] and sep["full"] < sep["no_triplet"]
    report(
        "separation-property",
        ok,
        f"median separation full={sep['full']:.4f}, no_r2={sep['no_r2']:.4f}, "
        f"no_triplet={sep['no_triplet']:.4f} (lower is better-clustered)",
    )
    assert sep["full"] < sep["no_r2"]
    assert sep["full"] < sep["no_triplet"]


def test_ablation_directional(ablation_rows):
    acc = {row["variant"]: row["median_accuracy"] for row in ablation_rows}
    soft_order = acc["full"] >= acc["no_triplet"] >= acc["no_r2"]
    hard_floor = acc["full"] >= CHANCE + 0.20
    hard_vs_ablations = all(
        acc["full"] >= acc[v] for v in ("no_local", "no_r2", "no_triplet")
    )
    ok = hard_floor and hard_vs_ablations
    report(
        "ablation-directional",
        ok,
        "median held-out accuracy "
        + ", ".join(f"{v}={acc[v]:.3f}" for v in ("full", "no_local", "no_r2", "no_triplet"))
        + f"; soft ordering full>=no_triplet>=no_r2: {soft_order}",
    )
    assert hard_floor, f"full model {acc['full']:.3f} below chance + 20 points"
    assert hard_vs_ablations


def test_determinism(tmp_path):
    data_dir = tmp_path / "data"
    assert cli_main([
        "gen-data", "--n", "48", "--task", "nli", "--seed", "5", "--out", str(data_dir),
    ]) == 0
    flags = ["--epochs", "3", "--seed", "9"]
    for name in ("run1", "run2"):
        code = cli_main([
            "train", "--data", str(data_dir / "dataset.tsv"),
            "--out", str(tmp_path / name), *flags,
        ])
        assert code == 0
    ckpt_same = (
        (tmp_path / "run1" / "checkpoint.json").read_bytes()
        == (tmp_path / "run2" / "checkpoint.json").read_bytes()
    )
    log_same = (
        (tmp_path / "run1" / "metrics.jsonl").read_bytes()
        == (tmp_path / "run2" / "metrics.jsonl").read_bytes()
    )
    ok = ckpt_same and log_same
    report(
        "determinism",
        ok,
        f"checkpoint bytes identical: {ckpt_same}, metrics bytes identical: {log_same}",
    )
    assert ckpt_same and log_same


def test_sampling_statistics():
    dataset = generate_synthetic(90, "nli", seed=17)
    stream = sample_triplets(dataset, 1000, seed=23)
    n_triplets = 0
    triplet_violations = 0
    group_violations = 0
    group_rng = np.random.default_rng(29)
    n_groups = 0
    for _ in range(10):
        for triplet in next(stream):
            n_triplets += 1
            if (
                triplet.positive.label != triplet.anchor.label
                or triplet.negative.label == triplet.anchor.label
            ):
                triplet_violations += 1
            if n_groups < 10_000:
                for group in sample_pair_groups(triplet, group_rng):
                    n_groups += 1
                    if group.same != int(group.pair_1.label == group.pair_2.label):
                        group_violations += 1
    ok = triplet_violations == 0 and group_violations == 0 and n_triplets >= 10_000
    report(
        "sampling-statistics",
        ok,
        f"{n_triplets} triplets, {n_groups} groups, "
        f"{triplet_violations} triplet violations, {group_violations} group violations",
    )
    assert n_triplets >= 10_000 and n_groups >= 10_000
    assert triplet_violations == 0
    assert group_violations == 0
