"""
Artifact helpers shared by the management commands.

Artifacts never carry timestamps: the same resolved config and seed give
byte-identical files.
"""

import contextlib
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

logger = logging.getLogger("tower_coverage")

PathLike = Union[str, Path]


def _json_default(value: Any):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def canonical_json(payload: Any, indent: Optional[int] = 2) -> str:
    separators = (",", ": ") if indent else (",", ":")
    return json.dumps(
        payload,
        sort_keys=True,
        indent=indent,
        separators=separators,
        default=_json_default,
    )


def config_digest(config: Dict[str, Any]) -> str:
    """SHA-256 of the compact canonical form of a resolved config."""
    compact = canonical_json(config, indent=None)
    return hashlib.sha256(compact.encode("utf-8")).hexdigest()


def write_json_artifact(
    path: PathLike, payload: Dict[str, Any], config: Dict[str, Any], seed: int
) -> Path:
    """Write payload with the resolved config and seed echoed alongside it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = dict(payload)
    document["seed"] = seed
    document["config"] = config
    document["config_sha256"] = config_digest(config)
    path.write_text(canonical_json(document) + "\n", encoding="utf-8")
    logger.debug(f"Wrote {path}")
    return path


def write_csv_artifact(
    path: PathLike,
    frame: pd.DataFrame,
    config: Dict[str, Any],
    seed: int,
    **to_csv_options: Any,
) -> Path:
    """
    Write a CSV whose leading `#` lines echo the seed and resolved config.

    pandas.read_csv(path, comment="#") reads the table back.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = (
        f"# seed={seed}\n"
        f"# config_sha256={config_digest(config)}\n"
        f"# config={canonical_json(config, indent=None)}\n"
    )
    with open(path, "w", encoding="utf-8", newline="") as file:
        file.write(header)
        frame.to_csv(file, index=False, lineterminator="\n", **to_csv_options)
    logger.debug(f"Wrote {path}")
    return path


def make_executor(jobs: int):
    """Process pool for `jobs` > 1, otherwise a context yielding None."""
    if jobs is None or jobs <= 1:
        return contextlib.nullcontext(None)
    logger.info(f"Running with {jobs} worker processes")
    return ProcessPoolExecutor(max_workers=jobs)
