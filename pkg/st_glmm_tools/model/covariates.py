"""Covariates of the Arctic sea-ice mean function."""

import logging
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import pandas as pd

from st_glmm_tools.const import (
    ARCTIC_COVARIATE_COUNT,
    COAST_DISTANCE_KM,
    COVARIATE_INPUT_COLUMNS,
    Metric,
    NORTH_POLE,
)
from st_glmm_tools.errors import SchemaError, UsageError
from st_glmm_tools.geometry.basis import pairwise_distance


@dataclass
class ArcticCovariateInputs:
    """Per-time input fields at the dataset locations.

    x_su and x_wi are the previous year's summer and winter temperature
    anomalies (K), x_pl the distance to the North Pole (km), d_cs the
    distance to the coast (km) and lon the longitude (degrees).
    """

    x_su: list[np.ndarray] | None = None
    x_wi: list[np.ndarray] | None = None
    x_pl: list[np.ndarray] | None = None
    d_cs: list[np.ndarray] | None = None
    lon: list[np.ndarray] | None = None

    def __post_init__(self):
        present = [
            len(getattr(self, f.name))
            for f in fields(self)
            if getattr(self, f.name) is not None
        ]
        if len(set(present)) > 1:
            raise SchemaError("Covariate inputs cover different numbers of time points")

    @property
    def T(self) -> int:
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None:
                return len(value)
        return 0

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "ArcticCovariateInputs":
        """Split a `t,coord1,coord2,x_su,x_wi,x_pl,d_cs` table by time."""

        for column in COVARIATE_INPUT_COLUMNS:
            if column not in frame.columns:
                raise UsageError(f"Missing covariate input column: {column}")

        groups = [group for _, group in frame.groupby("t", sort=True)]

        return cls(
            x_su=[g["x_su"].to_numpy(dtype=float) for g in groups],
            x_wi=[g["x_wi"].to_numpy(dtype=float) for g in groups],
            x_pl=[g["x_pl"].to_numpy(dtype=float) for g in groups],
            d_cs=[g["d_cs"].to_numpy(dtype=float) for g in groups],
            lon=[g["coord1"].to_numpy(dtype=float) for g in groups],
        )

    @classmethod
    def from_file(cls, path: Path) -> "ArcticCovariateInputs":
        if not path.is_file():
            raise FileNotFoundError(f"File not found: {path}")

        return cls.from_frame(pd.read_csv(path))


def pole_distance(coords: np.ndarray) -> np.ndarray:
    """Great-circle distance (km) from (lon, lat) rows to the North Pole."""

    return pairwise_distance(coords, np.array([NORTH_POLE]), Metric.GREAT_CIRCLE)[:, 0]


def build_arctic_covariates(inputs: ArcticCovariateInputs) -> list[np.ndarray]:
    """Assemble the nine-column design matrix for each time point.

    Columns: intercept, spatial means of the summer and winter anomalies,
    the centered anomalies, cos and sin of longitude, pole distance and
    pole distance restricted to pixels within 50 km of the coast.
    """

    for f in fields(inputs):
        if getattr(inputs, f.name) is None:
            raise UsageError(f"Missing covariate: {f.name}")

    assert inputs.x_su is not None and inputs.x_wi is not None
    assert inputs.x_pl is not None and inputs.d_cs is not None
    assert inputs.lon is not None

    X: list[np.ndarray] = []

    for t in range(inputs.T):
        x_su, x_wi = inputs.x_su[t], inputs.x_wi[t]
        x_pl, d_cs, lon = inputs.x_pl[t], inputs.d_cs[t], inputs.lon[t]

        n = x_su.shape[0]
        if not all(a.shape == (n,) for a in (x_wi, x_pl, d_cs, lon)):
            raise SchemaError(f"Covariate fields at t={t + 1} differ in length")

        su_mean, wi_mean = x_su.mean(), x_wi.mean()
        radians = np.pi * lon / 180.0

        X_t = np.column_stack(
            [
                np.ones(n),
                np.full(n, su_mean),
                np.full(n, wi_mean),
                x_su - su_mean,
                x_wi - wi_mean,
                np.cos(radians),
                np.sin(radians),
                x_pl,
                np.where(d_cs < COAST_DISTANCE_KM, x_pl, 0.0),
            ]
        )
        assert X_t.shape[1] == ARCTIC_COVARIATE_COUNT
        X.append(X_t)

    logging.debug(f"Built Arctic covariates for {inputs.T} time points.")

    return X
