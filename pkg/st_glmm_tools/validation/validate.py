"""Simulation study: simulate, hold out, fit, predict and score."""

import logging
from contextlib import contextmanager
from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np
import pandas as pd

from st_glmm_tools.config import RunConfig
from st_glmm_tools.const import SIGMA2_XI_SWEEP, RandomStream
from st_glmm_tools.errors import StageError, StGlmmError
from st_glmm_tools.geometry.basis import build_basis_matrix
from st_glmm_tools.helpers import stream_rng
from st_glmm_tools.model.core import inv_logit
from st_glmm_tools.predictor.predict import PredictionRequest, predictive_y
from st_glmm_tools.sampler.archive import ChainArchive
from st_glmm_tools.sampler.commands import fit_dataset
from st_glmm_tools.simulation.harness import (
    HoldoutPartition,
    SimulationResult,
    partition_holdout,
    rmspe,
    simulate_dataset,
)
from st_glmm_tools.summaries.functionals import parameter_summary, parameter_truth

RMSPE_COLUMNS = ["MBD_y", "MAR_y", "MBD_p", "MAR_p", "forecast_y", "forecast_p"]
BHM = "BHM"
FIXED_TRUE = "FIXED-TRUE"


@dataclass
class ValidationReport:
    rmspe: pd.DataFrame
    parameters: pd.DataFrame
    sensitivity: pd.DataFrame | None
    simulation: SimulationResult
    partition: HoldoutPartition


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Label any failure inside the block with the stage name."""

    logging.info(f"Validation stage: {name}")
    try:
        yield
    except StageError:
        raise
    except (StGlmmError, np.linalg.LinAlgError, ValueError) as error:
        raise StageError(name, error) from error


def _point_predictions(
    archive: ChainArchive, request: PredictionRequest, seed: int, scenario: int
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior predictive means on the y and p scales."""

    stream = RandomStream.FORECAST if request.forecast else RandomStream.PREDICT
    rng = stream_rng(seed, stream, request.t, scenario)

    y = predictive_y(archive.samples, request, rng)

    return y.mean, inv_logit(y.draws).mean(axis=0)


def _holdout_request(
    simulation: SimulationResult,
    archive: ChainArchive,
    t: int,
    indices: np.ndarray,
    forecast: bool = False,
) -> PredictionRequest:
    coords = simulation.dataset.coords[t - 1][indices]

    return PredictionRequest(
        t=t,
        coords=coords,
        X=simulation.dataset.X[t - 1][indices],
        S=build_basis_matrix(coords, archive.basis),
        overlap=np.full(indices.size, -1, dtype=int),
        forecast=forecast,
    )


def score_archive(
    archive: ChainArchive,
    simulation: SimulationResult,
    partition: HoldoutPartition,
    seed: int,
) -> dict[str, float]:
    """RMSPE of the MBD, MAR and forecast hold-outs on the y and p scales."""

    scores: dict[str, float] = {}

    for scenario, (name, holdout) in enumerate(
        (("MBD", partition.mbd), ("MAR", partition.mar))
    ):
        y_pred, p_pred, y_true, p_true = [], [], [], []
        for t, indices in enumerate(holdout, start=1):
            if indices.size == 0:
                continue
            request = _holdout_request(simulation, archive, t, indices)
            y_hat, p_hat = _point_predictions(archive, request, seed, scenario)
            y_t, p_t = simulation.truth_at(t, indices)
            y_pred.append(y_hat)
            p_pred.append(p_hat)
            y_true.append(y_t)
            p_true.append(p_t)

        if not y_pred:
            logging.warning(f"No {name} hold-out locations; score is NA.")
            scores[f"{name}_y"] = scores[f"{name}_p"] = float("nan")
            continue

        scores[f"{name}_y"] = rmspe(np.concatenate(y_pred), np.concatenate(y_true))
        scores[f"{name}_p"] = rmspe(np.concatenate(p_pred), np.concatenate(p_true))

    T = simulation.dataset.T
    request = _holdout_request(simulation, archive, T, partition.forecast, forecast=True)
    y_hat, p_hat = _point_predictions(archive, request, seed, 0)
    y_t, p_t = simulation.truth_at(T, partition.forecast)
    scores["forecast_y"] = rmspe(y_hat, y_t)
    scores["forecast_p"] = rmspe(p_hat, p_t)

    return scores


def _fit_training(
    simulation: SimulationResult,
    partition: HoldoutPartition,
    config: RunConfig,
    fixed: bool = False,
    workers: int = 1,
) -> ChainArchive:
    """Fit the training rows of t = 1..T-1 with the true K and U as plug-ins."""

    dataset = simulation.dataset
    training = dataset.head(dataset.T - 1).subset(partition.train)
    params = simulation.params

    archive, _ = fit_dataset(
        training,
        simulation.basis,
        config,
        fixed=params if fixed else None,
        plugin=(params.K, params.U),
        workers=workers,
    )

    return archive


def validate_run(
    config: RunConfig,
    fixed_true: bool = False,
    sweep: bool = False,
    workers: int = 1,
) -> ValidationReport:
    """Run the simulation study and return its RMSPE and parameter tables."""

    with stage("simulate"):
        simulation = simulate_dataset(config.simulation)
        if simulation.dataset.T < 2:
            raise StageError("simulate", ValueError("Validation needs T >= 2"))

    with stage("partition"):
        partition = partition_holdout(simulation.dataset, config.simulation)

    seed = config.chain.seed
    rows: dict[str, dict[str, float]] = {}

    with stage("fit"):
        archive = _fit_training(simulation, partition, config, workers=workers)
    with stage("predict"):
        rows[BHM] = score_archive(archive, simulation, partition, seed)

    if fixed_true:
        with stage("fit"):
            fixed_archive = _fit_training(
                simulation, partition, config, fixed=True, workers=workers
            )
        with stage("predict"):
            rows[FIXED_TRUE] = score_archive(fixed_archive, simulation, partition, seed)

    table = pd.DataFrame.from_dict(rows, orient="index", columns=RMSPE_COLUMNS)
    table.index.name = "model"

    parameters = parameter_summary(archive.samples, parameter_truth(simulation.params))

    sensitivity = None
    if sweep:
        sweep_rows = []
        for sigma2_xi in SIGMA2_XI_SWEEP:
            swept = replace(config, priors=replace(config.priors, sigma2_xi=sigma2_xi))
            with stage(f"sweep sigma2_xi={sigma2_xi}"):
                swept_archive = _fit_training(
                    simulation, partition, swept, workers=workers
                )
                scores = score_archive(swept_archive, simulation, partition, seed)
            sweep_rows.append({"sigma2_xi": sigma2_xi, **scores})
        sensitivity = pd.DataFrame(sweep_rows, columns=["sigma2_xi", *RMSPE_COLUMNS])

    return ValidationReport(table.reset_index(), parameters, sensitivity, simulation, partition)
