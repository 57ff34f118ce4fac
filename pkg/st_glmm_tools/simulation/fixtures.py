"""Synthetic polar-cap fixture on the sphere with Arctic-style covariates."""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from st_glmm_tools.const import (
    COVARIATE_INPUT_COLUMNS,
    POLAR_CAP_CENTERS_CSV,
    Metric,
    RandomStream,
)
from st_glmm_tools.geometry.basis import build_basis_matrix, load_centers, pairwise_distance
from st_glmm_tools.helpers import stream_rng
from st_glmm_tools.model.core import build_propagator, innovation_matrix, inv_logit
from st_glmm_tools.model.covariates import (
    ArcticCovariateInputs,
    build_arctic_covariates,
    pole_distance,
)
from st_glmm_tools.models import ModelParams, StDataset
from st_glmm_tools.simulation.harness import SimulationResult, simulate_latent

PIXEL_LATITUDES = np.arange(61.0, 90.0, 2.0)
PIXEL_LONGITUDES = np.arange(0.0, 360.0, 12.0)
COAST_LATITUDE = 73.0
COAST_LONGITUDES = np.arange(0.0, 360.0, 36.0)

FIXTURE_T = 4
SUMMER_MEANS = (0.2, 0.6, -0.1, 0.4)
WINTER_MEANS = (-0.3, 0.1, 0.5, 0.0)

# ice edge near 73N: y crosses zero where x_pl is about 1890 km
FIXTURE_BETA = (21.2, -0.5, -0.3, -0.4, -0.2, 0.3, 0.2, -0.0112, 0.0)
FIXTURE_LAMBDAS = (0.5, 0.5, 0.05)
FIXTURE_K_SCALE = 0.02
FIXTURE_SIGMA2_XI = 0.05


@dataclass
class PolarFixture(SimulationResult):
    inputs: ArcticCovariateInputs


def pixel_coords() -> np.ndarray:
    """(lon, lat) pixel centers on latitude rings from 61N to 89N."""

    lon, lat = np.meshgrid(PIXEL_LONGITUDES, PIXEL_LATITUDES, indexing="xy")
    return np.column_stack([lon.ravel(), lat.ravel()])


def coast_distance(coords: np.ndarray) -> np.ndarray:
    coast = np.column_stack(
        [COAST_LONGITUDES, np.full(COAST_LONGITUDES.size, COAST_LATITUDE)]
    )
    return pairwise_distance(coords, coast, Metric.GREAT_CIRCLE).min(axis=1)


def synthetic_inputs(coords: np.ndarray, seed: int) -> ArcticCovariateInputs:
    rng = stream_rng(seed, RandomStream.SIMULATE, 0)
    n = coords.shape[0]
    radians = np.radians(coords[:, 0])
    poleward = (coords[:, 1] - PIXEL_LATITUDES[0]) / (90.0 - PIXEL_LATITUDES[0])

    x_su, x_wi = [], []
    for t in range(FIXTURE_T):
        x_su.append(
            SUMMER_MEANS[t]
            + 0.5 * np.cos(radians) * poleward
            + 0.1 * rng.standard_normal(n)
        )
        x_wi.append(
            WINTER_MEANS[t]
            + 0.5 * np.sin(radians) * poleward
            + 0.1 * rng.standard_normal(n)
        )

    x_pl = pole_distance(coords)
    d_cs = coast_distance(coords)

    return ArcticCovariateInputs(
        x_su=x_su,
        x_wi=x_wi,
        x_pl=[x_pl] * FIXTURE_T,
        d_cs=[d_cs] * FIXTURE_T,
        lon=[coords[:, 0]] * FIXTURE_T,
    )


def polar_cap_fixture(seed: int = 0) -> PolarFixture:
    """Simulate binary ice/water data over a polar cap with a steep ice edge."""

    coords = pixel_coords()
    inputs = synthetic_inputs(coords, seed)
    X = build_arctic_covariates(inputs)

    basis = load_centers(POLAR_CAP_CENTERS_CSV, Metric.GREAT_CIRCLE).standardize_on(
        coords
    )
    S_grid = build_basis_matrix(coords, basis)

    propagator = build_propagator(*FIXTURE_LAMBDAS, basis.adjacency)
    K = FIXTURE_K_SCALE * np.eye(basis.r)
    U = innovation_matrix(K, propagator)
    beta = np.array(FIXTURE_BETA)
    params = ModelParams(beta, K, propagator, U, FIXTURE_SIGMA2_XI)

    rng = stream_rng(seed, RandomStream.SIMULATE, 1)
    S = [S_grid] * FIXTURE_T
    state, y = simulate_latent(
        S, X, beta, K, propagator.H, U, FIXTURE_SIGMA2_XI, FIXTURE_T, rng
    )
    p = [inv_logit(y_t) for y_t in y]
    z = [(rng.random(coords.shape[0]) < p_t).astype(int) for p_t in p]

    dataset = StDataset([coords] * FIXTURE_T, z, X, Metric.GREAT_CIRCLE)

    logging.info(
        f"Built polar-cap fixture: {coords.shape[0]} pixels, T = {FIXTURE_T}, "
        + f"r = {basis.r}."
    )

    return PolarFixture(dataset, y, p, state, params, basis, S, inputs)


def save_covariate_inputs(
    path: Path, coords: list[np.ndarray], inputs: ArcticCovariateInputs
) -> Path:
    """Write `t,coord1,coord2,x_su,x_wi,x_pl,d_cs`."""

    assert inputs.x_su is not None and inputs.x_wi is not None
    assert inputs.x_pl is not None and inputs.d_cs is not None

    frames = [
        pd.DataFrame(
            {
                "t": t + 1,
                "coord1": coords[t][:, 0],
                "coord2": coords[t][:, 1],
                "x_su": inputs.x_su[t],
                "x_wi": inputs.x_wi[t],
                "x_pl": inputs.x_pl[t],
                "d_cs": inputs.d_cs[t],
            }
        )
        for t in range(len(coords))
    ]

    pd.concat(frames, ignore_index=True)[COVARIATE_INPUT_COLUMNS].to_csv(
        path, index=False
    )

    return path
