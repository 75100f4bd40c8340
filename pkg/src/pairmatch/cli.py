"""Command-line entry point.

Subcommands: gen-data, train, eval, ablate, export-embeddings, grad-check.
All artifacts are written under ``--out``; every flag has a documented
default; a ``--config`` file of ``key = value`` lines is merged beneath any
explicitly passed flags.  Diagnostics go to stderr; exit status is nonzero
on any error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .data import TASK_LABELS, generate_synthetic, load_dataset, save_dataset
from .errors import PairmatchError
from .integrity import DEFAULT_EPS, GRAD_TOLERANCE, run_gradient_integrity
from .model import TrainConfig
from .train_eval import (
    ablate,
    embeddings_matrix,
    evaluate,
    export_embeddings,
    separation_metric,
    train,
)

_DEFAULTS = TrainConfig()

# CLI flag name -> TrainConfig field
_CONFIG_FLAGS = {
    "task": "task",
    "dim": "d",
    "layers": "layers",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "seed": "seed",
    "beta": "beta",
    "margin": "margin",
    "lr": "lr",
    "kernel_widths": "kernel_widths",
    "no_local": "no_local",
    "no_r2": "no_r2",
    "no_triplet": "no_triplet",
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--task", choices=sorted(TASK_LABELS), default=None,
                        help=f"matching task (default {_DEFAULTS.task})")
    parser.add_argument("--dim", type=int, default=None,
                        help=f"transformer width d (default {_DEFAULTS.d})")
    parser.add_argument("--layers", type=int, default=None,
                        help=f"transformer blocks (default {_DEFAULTS.layers})")
    parser.add_argument("--epochs", type=int, default=None,
                        help=f"training epochs (default {_DEFAULTS.epochs})")
    parser.add_argument("--batch-size", type=int, default=None,
                        help=f"triplets per step (default {_DEFAULTS.batch_size})")
    parser.add_argument("--seed", type=int, default=None,
                        help=f"seed for all randomness (default {_DEFAULTS.seed})")
    parser.add_argument("--beta", type=float, default=None,
                        help=f"matching-vs-auxiliary loss weight in [0,1] (default {_DEFAULTS.beta})")
    parser.add_argument("--margin", type=float, default=None,
                        help=f"triplet hinge margin (default {_DEFAULTS.margin})")
    parser.add_argument("--lr", type=float, default=None,
                        help=f"Adam learning rate (default {_DEFAULTS.lr})")
    parser.add_argument("--kernel-widths", type=str, default=None,
                        help="comma-separated conv widths (default "
                             + ",".join(str(k) for k in _DEFAULTS.kernel_widths) + ")")
    parser.add_argument("--no-local", action="store_true", default=None,
                        help="ablation: drop the local conv encoder (default off)")
    parser.add_argument("--no-r2", action="store_true", default=None,
                        help="ablation: drop the same-relation task (default off)")
    parser.add_argument("--no-triplet", action="store_true", default=None,
                        help="ablation: drop the triplet loss (default off)")
    parser.add_argument("--config", type=str, default=None,
                        help="file of key = value lines merged beneath explicit flags")


def _parse_scalar(value: str):
    text = value.strip()
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _read_config_file(path: str) -> dict:
    merged = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise PairmatchError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        merged[key.strip().replace("-", "_")] = value.strip()
    return merged


def _resolve_config(args: argparse.Namespace) -> TrainConfig:
    file_values = _read_config_file(args.config) if args.config else {}
    kwargs = {}
    for flag, field_name in _CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is None and flag in file_values:
            value = _parse_scalar(file_values[flag])
        if value is None:
            continue
        if field_name == "kernel_widths":
            value = tuple(int(part) for part in str(value).split(",") if part.strip())
        kwargs[field_name] = value
    unknown = set(file_values) - set(_CONFIG_FLAGS)
    if unknown:
        raise PairmatchError(f"unknown config keys: {sorted(unknown)}")
    return TrainConfig(**kwargs)


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_gen_data(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    dataset = generate_synthetic(args.n, config.task, config.seed)
    out = _out_dir(args)
    path = out / "dataset.tsv"
    save_dataset(dataset, path)
    print(path)
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    dataset = load_dataset(args.data, config.task)
    result = train(config, dataset)
    out = _out_dir(args)
    checkpoint_path = out / "checkpoint.json"
    metrics_path = out / "metrics.jsonl"
    save_checkpoint(checkpoint_path, result.params, config, result.vocab)
    result.log.write(metrics_path)
    final = result.log.epochs[-1]
    print(json.dumps({
        "checkpoint": str(checkpoint_path),
        "metrics": str(metrics_path),
        "matching_accuracy": final.matching_accuracy,
        "same_relation_accuracy": final.same_relation_accuracy,
    }, sort_keys=True))
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    params, config, vocab = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data, config.task)
    seed = 1234 if args.seed is None else args.seed
    metrics = evaluate(params, config, vocab, dataset, seed=seed)
    print(json.dumps(metrics, sort_keys=True))
    return 0


def _cmd_ablate(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    train_set = load_dataset(args.data, config.task)
    eval_set = load_dataset(args.eval_data, config.task)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    rows = ablate(config, train_set, eval_set, seeds)
    out = _out_dir(args)
    path = out / "ablation.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(rows, fh, sort_keys=True, indent=2)
        fh.write("\n")
    for row in rows:
        print(
            f"{row['variant']:<12} median_accuracy={row['median_accuracy']:.4f} "
            f"median_separation={row['median_separation']:.4f}"
        )
    print(path)
    return 0


def _cmd_export_embeddings(args: argparse.Namespace) -> int:
    params, config, vocab = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data, config.task)
    out = _out_dir(args)
    path = out / "embeddings.csv"
    export_embeddings(params, config, vocab, dataset, path)
    matrix, labels = embeddings_matrix(params, config, vocab, dataset)
    print(json.dumps({
        "embeddings": str(path),
        "separation_metric": separation_metric(matrix, labels),
    }, sort_keys=True))
    return 0


def _cmd_grad_check(args: argparse.Namespace) -> int:
    worst, detail = run_gradient_integrity(seeds=args.seeds, eps=args.eps)
    for name in sorted(detail):
        print(f"{name:<22} max_rel_err={detail[name]:.3e}")
    print(f"max_relative_error={worst:.6e} (tolerance {GRAD_TOLERANCE:.0e})")
    return 0 if worst < GRAD_TOLERANCE else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairmatch",
        description="Train and probe a desk-scale sentence-pair matcher.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a balanced synthetic dataset")
    p.add_argument("--n", type=int, default=300, help="number of pairs (default 300)")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train a model and write checkpoint + metrics")
    p.add_argument("--data", required=True, help="dataset file from gen-data")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True, help="checkpoint.json from train")
    p.add_argument("--data", required=True, help="dataset file")
    p.add_argument("--seed", type=int, default=None,
                   help="evaluation sampling seed (default 1234)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="train all ablation variants over several seeds")
    p.add_argument("--data", required=True, help="training dataset file")
    p.add_argument("--eval-data", required=True, help="held-out dataset file")
    p.add_argument("--seeds", default="1,2,3,4,5",
                   help="comma-separated training seeds (default 1,2,3,4,5)")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("export-embeddings", help="write fused pair vectors as CSV")
    p.add_argument("--checkpoint", required=True, help="checkpoint.json from train")
    p.add_argument("--data", required=True, help="dataset file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_export_embeddings)

    p = sub.add_parser("grad-check", help="finite-difference gradient integrity suite")
    p.add_argument("--seeds", type=int, default=10, help="number of seeds (default 10)")
    p.add_argument("--eps", type=float, default=DEFAULT_EPS,
                   help=f"finite-difference step (default {DEFAULT_EPS})")
    p.set_defaults(func=_cmd_grad_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except PairmatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
