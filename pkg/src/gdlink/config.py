"""Layered run configuration and artifact hashing.

Precedence is flags > environment > config file > defaults.  Every knob of
every stage lives here so a resolved configuration, echoed into the run
descriptor, fully determines a run.
"""

from __future__ import annotations

import hashlib
import os
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError

ENV_PREFIX = "GDLINK_"

CONFIG_DEFAULTS: dict[str, Any] = {
    # graph
    "mix_gg": 1.0 / 3.0,
    "mix_dd": 1.0 / 3.0,
    "mix_gd": 1.0 / 3.0,
    "gd_score_threshold": None,  # float or None
    # features
    "align_mode": "default",  # default | ablation
    "missing": "error",  # error | zero_fill
    "gene_dim": 1024,
    "disease_dim": 768,
    # split / negatives
    "train_ratio": 0.8,
    "val_ratio": 0.1,
    "test_ratio": 0.1,
    "ratio_tolerance": 0.03,
    "negative_mode": "constrained",  # constrained | unconstrained
    "degree_aware": True,
    "alpha": 1.0,
    "degree_source": "total",  # total | gd
    # model / training
    "hidden_dim": 112,
    "embed_dim": 28,
    "final_activation": "relu",  # relu | none
    "dropout": 0.5,
    "learning_rate": 0.001,
    "epochs": 100,
    "batch_size": 512,
    "w0": 1.0,
    "w1": 1.0,
    "weight_decay": 0.01,
    "resample_train_negatives": False,
    "full_graph_batching": False,
    "subgraph_hops": 2,
    "threshold": 0.5,
    "seed": 0,
}


def _coerce(key: str, raw: Any) -> Any:
    default = CONFIG_DEFAULTS[key]
    if raw is None:
        return None
    if isinstance(raw, str):
        text = raw.strip()
        if key == "gd_score_threshold":
            return None if text.lower() in ("", "none") else float(text)
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
        if isinstance(default, int) and not isinstance(default, bool):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    return raw


def read_config_file(path: str | Path) -> dict[str, Any]:
    """key=value lines; '#' starts a comment; keys must be known."""
    out: dict[str, Any] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in CONFIG_DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown configuration key {key!r}")
        out[key] = _coerce(key, value)
    return out


def resolve_config(
    file_path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> dict[str, Any]:
    resolved = dict(CONFIG_DEFAULTS)
    if file_path is not None:
        resolved.update(read_config_file(file_path))
    env = os.environ if env is None else env
    for key in CONFIG_DEFAULTS:
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            resolved[key] = _coerce(key, env[env_key])
    for key, value in (overrides or {}).items():
        if key not in CONFIG_DEFAULTS:
            raise ConfigError(f"unknown configuration key {key!r}")
        if value is not None:
            resolved[key] = _coerce(key, value)
    return resolved


def config_hash(config: Mapping[str, Any]) -> str:
    text = "\n".join(f"{k}={config[k]!r}" for k in sorted(config))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_run_descriptor(path: str | Path, entries: Mapping[str, Any]) -> None:
    """Flat, sorted key=value record of everything that shaped a run."""
    lines = [f"{k}={entries[k]}" for k in sorted(entries)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_run_descriptor(path: str | Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        out[key] = value
    return out
