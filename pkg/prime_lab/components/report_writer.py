"""Deterministic CSV/JSON report files. Every float goes through `fmt` (9 significant digits)."""
import csv
import json
import logging
import os
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)


def fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if value is None:
        return ""
    return str(value)


def normalize(value: Any) -> Any:
    """Plain JSON types with floats rounded to 9 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(f"{float(value):.9g}")
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, Mapping):
        return {str(k): normalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [normalize(v) for v in value]
    return value


def write_json(path: str, payload: Mapping[str, Any], config: Optional[Mapping[str, Any]] = None) -> str:
    document = dict(payload)
    if config is not None:
        document["config"] = dict(config)
    with open(path, "w") as f:
        json.dump(normalize(document), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info(f"Wrote {path}")
    return path


def write_csv(
    path: str,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    config: Optional[Mapping[str, Any]] = None,
) -> str:
    with open(path, "w", newline="") as f:
        if config is not None:
            f.write("# config: " + json.dumps(normalize(config), sort_keys=True, separators=(",", ":")) + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    logger.info(f"Wrote {path}")
    return path


def write_dict_rows(path: str, records: List[Dict[str, Any]], config: Optional[Mapping[str, Any]] = None) -> str:
    header = list(records[0].keys()) if records else []
    return write_csv(path, header, ([r[h] for h in header] for r in records), config)


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"Output directory {path} is not writable")
    return path
