"""Versioned JSON checkpoint: parameter names -> shape + flat float64 values.

Layout (format_version 1):

    {
      "format_version": 1,
      "config": { ...TrainConfig fields... },
      "vocab": ["<pad>", "<unk>", "<cls>", "<sep>", ...tokens by id...],
      "params": {
        "<name>": {"shape": [d0, d1, ...], "values": [flat row-major floats]},
        ...
      }
    }

Floats are serialized with their shortest round-trip repr, so save/load is
exact and two saves of identical parameters are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .data import Vocabulary
from .errors import DatasetParseError
from .model import ModelParams, TrainConfig, init_params

FORMAT_VERSION = 1


def save_checkpoint(path, params: ModelParams, config: TrainConfig, vocab: Vocabulary) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "config": asdict(config),
        "vocab": vocab.tokens,
        "params": {
            name: {
                "shape": list(tensor.data.shape),
                "values": [float(x) for x in tensor.data.reshape(-1)],
            }
            for name, tensor in params.named().items()
        },
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_checkpoint(path) -> tuple[ModelParams, TrainConfig, Vocabulary]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise DatasetParseError(f"{path}: unsupported checkpoint version {version!r}")
    raw_config = dict(payload["config"])
    raw_config["kernel_widths"] = tuple(raw_config["kernel_widths"])
    config = TrainConfig(**raw_config)
    vocab = Vocabulary(payload["vocab"])
    params = init_params(config, len(vocab), np.random.default_rng(0))
    stored = payload["params"]
    expected = params.named()
    missing = sorted(set(expected) - set(stored))
    extra = sorted(set(stored) - set(expected))
    if missing or extra:
        raise DatasetParseError(
            f"{path}: parameter names mismatch (missing {missing[:3]}, extra {extra[:3]})"
        )
    for name, tensor in expected.items():
        entry = stored[name]
        shape = tuple(entry["shape"])
        if shape != tensor.data.shape:
            raise DatasetParseError(
                f"{path}: {name} has shape {shape}, expected {tensor.data.shape}"
            )
        tensor.data = np.asarray(entry["values"], dtype=np.float64).reshape(shape)
    return params, config, vocab
