import copy
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "lab-config" / "config.yaml"

# Used when lab-config/config.yaml is not shipped alongside the package.
DEFAULTS: Dict[str, Dict[str, Any]] = {
    "sieve": {"limit": 1_000_000, "segment_size": 1 << 20, "workers": 1},
    "ek": {"bins": 41, "checkpoints": [100, 10_000, 1_000_000]},
    "maxent": {"tail_cut": 1e-9},
    "levin": {
        "machine": "u1",
        "max_len": 20,
        "target": "0101",
        "n_max": 12,
        "corr_max_len": 10,
        "corr_cutoff": 22,
        "table_rows": 16,
    },
    "learn": {
        "task": "prime",
        "split": "range",
        "train_frac": 0.8,
        "epochs": 300,
        "lr": 2.0,
        "l2": 1e-4,
        "batch": 0,
        "seed": 0,
        "log_every": 50,
    },
    "output": {"dir": "reports", "format": "both"},
    "logging": {"level": "INFO"},
}

SUBCOMMANDS = ("sieve", "ek", "maxent", "levin", "learn", "all")
FORMATS = ("csv", "json", "both")


def _merge(base: Dict[str, Any], overlay: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in (overlay or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path: Optional[str] = None) -> Dict[str, Any]:
    """Load the YAML defaults, then overlay the user file at `path` if one is given."""
    config = copy.deepcopy(DEFAULTS)
    if DEFAULT_CONFIG_PATH.exists():
        with open(DEFAULT_CONFIG_PATH) as f:
            config = _merge(config, yaml.safe_load(f) or {})
    else:
        logger.warning(f"Default config not found at {DEFAULT_CONFIG_PATH}, using built-in defaults")

    if path:
        if not os.path.exists(path):
            raise FileNotFoundError(f"Config file not found: {path}")
        with open(path) as f:
            overlay = yaml.safe_load(f) or {}
        if not isinstance(overlay, dict):
            raise ValueError(f"Config file {path} must contain a mapping")
        config = _merge(config, overlay)
        logger.info(f"Loaded config overlay from {path}")
    return config


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    limit: int = 1_000_000
    segment_size: int = 1 << 20
    workers: int = 1
    seed: int = 0
    output_dir: str = "reports"
    format: str = "both"
    bins: int = 41
    checkpoints: Tuple[int, ...] = (100, 10_000, 1_000_000)
    tail_cut: float = 1e-9
    machine: str = "u1"
    max_len: int = 20
    target: Optional[str] = "0101"
    n_max: int = 12
    corr_max_len: int = 10
    corr_cutoff: int = 22
    table_rows: int = 16
    task: str = "prime"
    split: str = "range"
    train_frac: float = 0.8
    epochs: int = 300
    lr: float = 2.0
    l2: float = 1e-4
    batch: int = 0
    ablate_bit0: bool = False
    engineered: bool = False
    ks_per_n: bool = False
    log_every: int = 50
    extra: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["checkpoints"] = list(self.checkpoints)
        data.pop("extra")
        return data

    def ek_checkpoints(self) -> Tuple[int, ...]:
        """Checkpoints strictly below the limit, followed by the limit itself."""
        below = sorted({c for c in self.checkpoints if 16 <= c < self.limit})
        return tuple(below) + (self.limit,)


def build_run_config(subcommand: str, config: Dict[str, Any], overrides: Dict[str, Any]) -> RunConfig:
    """Flatten the YAML sections into a RunConfig; CLI overrides that are not None win."""
    sieve, ek, levin, learn = config["sieve"], config["ek"], config["levin"], config["learn"]
    values: Dict[str, Any] = {
        "subcommand": subcommand,
        "limit": int(sieve["limit"]),
        "segment_size": int(sieve["segment_size"]),
        "workers": int(sieve["workers"]),
        "seed": int(learn["seed"]),
        "output_dir": str(config["output"]["dir"]),
        "format": str(config["output"]["format"]),
        "bins": int(ek["bins"]),
        "checkpoints": tuple(int(c) for c in ek["checkpoints"]),
        "tail_cut": float(config["maxent"]["tail_cut"]),
        "machine": str(levin["machine"]),
        "max_len": int(levin["max_len"]),
        "target": levin.get("target"),
        "n_max": int(levin["n_max"]),
        "corr_max_len": int(levin["corr_max_len"]),
        "corr_cutoff": int(levin["corr_cutoff"]),
        "table_rows": int(levin["table_rows"]),
        "task": str(learn["task"]),
        "split": str(learn["split"]),
        "train_frac": float(learn["train_frac"]),
        "epochs": int(learn["epochs"]),
        "lr": float(learn["lr"]),
        "l2": float(learn["l2"]),
        "batch": int(learn["batch"]),
        "log_every": int(learn["log_every"]),
    }
    for key, value in overrides.items():
        if key in ("ablate_bit0", "engineered", "ks_per_n"):
            values[key] = bool(value)
        elif value is not None and key in values:
            values[key] = value
    return RunConfig(**values)
