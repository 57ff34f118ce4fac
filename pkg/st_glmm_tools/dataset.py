"""Reading and writing of datasets, targets, truth fields and masks."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from st_glmm_tools.const import (
    COVARIATE_PREFIX,
    DATASET_COLUMNS,
    MASK_COLUMNS,
    TARGET_COLUMNS,
    TRUTH_COLUMNS,
    Metric,
)
from st_glmm_tools.errors import SchemaError
from st_glmm_tools.model.core import build_propagator
from st_glmm_tools.models import ModelParams, StDataset

# header is line 1
FIRST_DATA_LINE = 2


def _read_table(path: Path, leading: list[str]) -> tuple[pd.DataFrame, list[str]]:
    """Read a numeric CSV whose header starts with the given columns."""

    if not path.is_file():
        raise FileNotFoundError(f"File not found: {path}")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.ParserError as error:
        raise SchemaError(f"Malformed table {path}: {error}") from error
    except pd.errors.EmptyDataError as error:
        raise SchemaError(f"Empty table {path}", 1) from error

    columns = list(frame.columns)
    if columns[: len(leading)] != leading:
        raise SchemaError(f"Header must start with {','.join(leading)}", 1)

    covariates = columns[len(leading) :]
    expected = [f"{COVARIATE_PREFIX}{j + 1}" for j in range(len(covariates))]
    if covariates != expected:
        raise SchemaError(f"Covariate columns must be {','.join(expected)}", 1)

    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().any(axis=1) | ~np.isfinite(numeric.to_numpy(dtype=float)).all(
        axis=1
    )
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise SchemaError(
            f"Non-numeric or missing value in {path}", row + FIRST_DATA_LINE
        )

    return numeric, covariates


def _time_index(frame: pd.DataFrame) -> np.ndarray:
    t = frame["t"].to_numpy(dtype=float)
    bad = (t < 1) | (t != np.round(t))
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise SchemaError("Time index must be a positive integer", row + FIRST_DATA_LINE)

    return t.astype(int)


def load_dataset(path: Path, metric: Metric = Metric.PLANAR) -> StDataset:
    """Parse a `t,coord1,coord2,z,cov1..covp` file, keeping row order within each t."""

    frame, covariates = _read_table(path, DATASET_COLUMNS)
    t = _time_index(frame)

    z = frame["z"].to_numpy(dtype=float)
    bad = ~np.isin(z, (0.0, 1.0))
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise SchemaError(
            f"z must be 0 or 1, got {z[row]:g}", row + FIRST_DATA_LINE
        )

    if metric == Metric.GREAT_CIRCLE:
        lat = frame["coord2"].to_numpy(dtype=float)
        bad = np.abs(lat) > 90.0
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise SchemaError("Latitude out of range", row + FIRST_DATA_LINE)

    coords_all = frame[["coord1", "coord2"]].to_numpy(dtype=float)
    X_all = frame[covariates].to_numpy(dtype=float)

    T = int(t.max()) if t.size else 0
    coords, zs, Xs = [], [], []
    for time in range(1, T + 1):
        rows = t == time
        coords.append(coords_all[rows])
        zs.append(z[rows].astype(int))
        Xs.append(X_all[rows])

    dataset = StDataset(coords, zs, Xs, metric)
    logging.info(
        f"Loaded {dataset.total} observations over {dataset.T} time points from {path}."
    )

    return dataset


def dataset_frame(dataset: StDataset) -> pd.DataFrame:
    frames = []
    for t in range(dataset.T):
        frame = pd.DataFrame(
            {
                "t": t + 1,
                "coord1": dataset.coords[t][:, 0],
                "coord2": dataset.coords[t][:, 1],
                "z": dataset.z[t].astype(int),
            }
        )
        for j in range(dataset.p):
            frame[f"{COVARIATE_PREFIX}{j + 1}"] = dataset.X[t][:, j]
        frames.append(frame)

    return pd.concat(frames, ignore_index=True)


def save_dataset(dataset: StDataset, path: Path) -> Path:
    if not path.parent.exists():
        path.parent.mkdir(parents=True)

    dataset_frame(dataset).to_csv(path, index=False)

    return path


@dataclass(frozen=True)
class TargetSet:
    """Prediction targets grouped by time index, in file order within each t."""

    times: list[int]
    coords: list[np.ndarray]
    X: list[np.ndarray]

    @property
    def sizes(self) -> list[int]:
        return [c.shape[0] for c in self.coords]


def load_targets(path: Path) -> TargetSet:
    """Parse a `t,coord1,coord2,cov1..covp` targets file."""

    frame, covariates = _read_table(path, TARGET_COLUMNS)
    t = _time_index(frame)

    coords_all = frame[["coord1", "coord2"]].to_numpy(dtype=float)
    X_all = frame[covariates].to_numpy(dtype=float)

    times = sorted(set(t.tolist()))

    return TargetSet(
        times=times,
        coords=[coords_all[t == time] for time in times],
        X=[X_all[t == time] for time in times],
    )


def save_targets(targets: TargetSet, path: Path) -> Path:
    frames = []
    for time, coords, X in zip(targets.times, targets.coords, targets.X):
        frame = pd.DataFrame({"t": time, "coord1": coords[:, 0], "coord2": coords[:, 1]})
        for j in range(X.shape[1]):
            frame[f"{COVARIATE_PREFIX}{j + 1}"] = X[:, j]
        frames.append(frame)

    pd.concat(frames, ignore_index=True).to_csv(path, index=False)

    return path


def save_truth(
    path: Path, coords: list[np.ndarray], y: list[np.ndarray], p: list[np.ndarray]
) -> Path:
    """Write the latent y and p fields as `t,coord1,coord2,y,p`."""

    frames = [
        pd.DataFrame(
            {
                "t": t + 1,
                "coord1": coords[t][:, 0],
                "coord2": coords[t][:, 1],
                "y": y[t],
                "p": p[t],
            }
        )
        for t in range(len(coords))
    ]

    pd.concat(frames, ignore_index=True)[TRUTH_COLUMNS].to_csv(path, index=False)

    return path


def load_mask(path: Path) -> np.ndarray:
    """Read a CSV of included location indices."""

    if not path.is_file():
        raise FileNotFoundError(f"File not found: {path}")

    frame = pd.read_csv(path)
    if list(frame.columns) != MASK_COLUMNS:
        raise SchemaError(f"Mask header must be {','.join(MASK_COLUMNS)}", 1)

    indices = frame["index"].to_numpy()
    if indices.size and (indices.min() < 0 or not np.issubdtype(indices.dtype, np.integer)):
        raise SchemaError("Mask indices must be non-negative integers")

    return indices.astype(int)


def save_params(path: Path, params: ModelParams) -> Path:
    """Write beta, lambda, K, U and sigma2_xi as JSON."""

    path.write_text(json.dumps(params.to_dict(), indent=4) + "\n")

    return path


def load_params(path: Path, adjacency: np.ndarray) -> ModelParams:
    """Read parameters written by save_params for a basis with this adjacency."""

    if not path.is_file():
        raise FileNotFoundError(f"File not found: {path}")

    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as error:
        raise SchemaError(f"Invalid parameter file {path}: {error.msg}", error.lineno)

    try:
        beta = np.array(data["beta"], dtype=float)
        lambdas = [float(v) for v in data["lambda"]]
        K = np.array(data["K"], dtype=float)
        U = np.array(data["U"], dtype=float)
        sigma2_xi = float(data["sigma2_xi"])
    except (KeyError, TypeError, ValueError) as error:
        raise SchemaError(f"Parameter file {path} is malformed: {error}") from error

    r = adjacency.shape[0] + adjacency.shape[1]
    if len(lambdas) != 3 or K.shape != (r, r) or U.shape != (r, r):
        raise SchemaError(f"Parameter file {path} does not match r = {r}")

    return ModelParams(beta, K, build_propagator(*lambdas, adjacency), U, sigma2_xi)
