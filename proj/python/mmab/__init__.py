"""Decentralized multiplayer bandit simulator.

Configs are plain dicts with the same layout as the CLI's JSON files.
"""

import json
import os

from . import _mmab
from ._mmab import (
    ConfigError,
    ProtocolError,
    accept_reject,
    checkpoint_grid,
    decode_bits,
    encode_bits,
    quantize,
    quantize_many,
    run_seed,
    sic_radius,
)

__all__ = [
    "ConfigError",
    "ProtocolError",
    "accept_reject",
    "checkpoint_grid",
    "decode_bits",
    "encode_bits",
    "normalize_config",
    "quantize",
    "quantize_many",
    "resolve_means",
    "run_batch",
    "run_episode",
    "run_seed",
    "sic_radius",
]


def normalize_config(config):
    """Validated config with every default filled in."""
    return json.loads(_mmab.normalize_config_json(json.dumps(config)))


def resolve_means(config):
    return _mmab.resolve_means_json(json.dumps(config))


def run_batch(config, out_dir=None):
    """Run all seeded episodes and return the aggregate report.

    With out_dir, runs.csv, summary.json and regret_vs_time.csv are written there.
    """
    out = os.fspath(out_dir) if out_dir is not None else ""
    return json.loads(_mmab.run_batch_json(json.dumps(config), out))


def run_episode(config, run=0):
    """One episode with the seed of run `run`; returns per-round ledgers."""
    return _mmab.run_episode_json(json.dumps(config), run)
