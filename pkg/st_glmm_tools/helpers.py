import hashlib
import json
import logging
import os
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

from st_glmm_tools.const import MANIFEST_JSON, THREADS_ENV_VAR, VERSION, RandomStream
from st_glmm_tools.errors import SchemaError, UsageError


def to_jsonable(value: Any) -> Any:
    """Convert dataclasses, paths, enums and arrays into JSON-compatible values."""

    if is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(asdict(value))
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    return value


def canonical_json(value: Any) -> str:
    return json.dumps(to_jsonable(value), sort_keys=True, separators=(",", ":"))


def config_hash(config: Any) -> str:
    """Return the SHA-256 of the canonical JSON of a configuration."""

    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def stream_rng(seed: int, stream: RandomStream, *keys: int) -> np.random.Generator:
    """Return a generator for a named stream, keyed by seed and indices."""

    return np.random.default_rng(
        np.random.SeedSequence([int(seed), int(stream), *(int(k) for k in keys)])
    )


def threads_from_env(default: int = 1) -> int:
    """Read the worker count from the environment."""

    value = os.environ.get(THREADS_ENV_VAR)
    if value is None or value == "":
        return default

    try:
        threads = int(value)
    except ValueError as error:
        raise UsageError(f"{THREADS_ENV_VAR} must be an integer: {value}") from error

    if threads < 1:
        raise UsageError(f"{THREADS_ENV_VAR} must be at least 1: {threads}")

    return threads


def ensure_directory(path: Path) -> Path:
    if not path.exists():
        os.makedirs(path)

    if not path.is_dir():
        raise UsageError(f"Path is not a directory: {path}")

    return path


def write_manifest(
    directory: Path, seed: int | None, config: Any, **extra: Any
) -> Path:
    """Write manifest.json with version, seed and config hash into a directory."""

    ensure_directory(directory)

    manifest = {
        "version": VERSION,
        "seed": seed,
        "config_hash": config_hash(config),
        "config": to_jsonable(config),
        **{key: to_jsonable(value) for key, value in extra.items()},
    }

    manifest_path = directory / MANIFEST_JSON
    manifest_path.write_text(json.dumps(manifest, indent=4, sort_keys=True) + "\n")

    logging.debug(f"Wrote manifest {manifest_path}")

    return manifest_path


def read_manifest(directory: Path) -> dict[str, Any]:
    manifest_path = directory / MANIFEST_JSON

    if not manifest_path.is_file():
        raise FileNotFoundError(f"File not found: {manifest_path}")

    try:
        manifest: dict[str, Any] = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as error:
        raise SchemaError(f"Invalid manifest {manifest_path}: {error.msg}", error.lineno)

    return manifest


def type7_quantiles(draws: np.ndarray, probabilities: tuple[float, ...]) -> np.ndarray:
    """Linear-interpolation quantiles over the first axis, one row per probability."""

    return np.quantile(draws, probabilities, axis=0, method="linear")
