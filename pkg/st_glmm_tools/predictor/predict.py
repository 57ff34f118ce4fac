"""Predictive draws by composition on the y, p and z scales."""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from st_glmm_tools.const import PREDICTIVE_QUANTILES, RandomStream, Scale
from st_glmm_tools.dataset import TargetSet
from st_glmm_tools.errors import UsageError
from st_glmm_tools.geometry.basis import build_basis_matrix
from st_glmm_tools.helpers import stream_rng, type7_quantiles
from st_glmm_tools.model.core import (
    build_propagator,
    ensure_pd,
    inv_logit,
    spectral_stationarity,
)
from st_glmm_tools.models import PosteriorSamples
from st_glmm_tools.sampler.archive import ChainArchive

# coordinates closer than this count as the same location
OVERLAP_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PredictionRequest:
    """Targets at one time point with their covariate and basis rows.

    overlap holds, per target, the index of the matching observed location
    at time t, or -1 for a new location.
    """

    t: int
    coords: np.ndarray
    X: np.ndarray
    S: np.ndarray
    overlap: np.ndarray
    scale: Scale = Scale.Y
    forecast: bool = False

    def __post_init__(self):
        m = self.coords.shape[0]
        if not self.X.shape[0] == self.S.shape[0] == self.overlap.shape[0] == m:
            raise UsageError(f"Target rows at t={self.t} do not line up")
        if self.forecast and (self.overlap >= 0).any():
            raise UsageError("Forecast targets cannot overlap observed locations")

    @property
    def m(self) -> int:
        return self.coords.shape[0]

    @property
    def observed(self) -> np.ndarray:
        return self.overlap >= 0


@dataclass(frozen=True)
class PredictiveDraws:
    """Draws of shape (draws, m) with the closed-form mean and variance."""

    draws: np.ndarray
    mean: np.ndarray
    var: np.ndarray


def match_observed(coords: np.ndarray, observed: np.ndarray) -> np.ndarray:
    """Index of each target row in the observed layout, -1 where absent."""

    overlap = np.full(coords.shape[0], -1, dtype=int)
    if observed.size == 0 or coords.size == 0:
        return overlap

    distance = np.abs(coords[:, None, :] - observed[None, :, :]).max(axis=2)
    nearest = distance.argmin(axis=1)
    hit = distance[np.arange(coords.shape[0]), nearest] <= OVERLAP_TOLERANCE
    overlap[hit] = nearest[hit]

    return overlap


def build_requests(
    targets: TargetSet, archive: ChainArchive, scale: Scale, forecast: bool = False
) -> list[PredictionRequest]:
    """One request per target time, with basis rows under the frozen standardization."""

    T = archive.T
    requests = []

    for t, coords, X in zip(targets.times, targets.coords, targets.X):
        if X.shape[1] != archive.p:
            raise UsageError(f"Targets carry {X.shape[1]} covariates, model has {archive.p}")

        if forecast:
            if t != T + 1:
                raise UsageError(f"Forecast targets must be at t = {T + 1}, got {t}")
            overlap = np.full(coords.shape[0], -1, dtype=int)
        else:
            if not 1 <= t <= T:
                raise UsageError(f"Target time {t} outside 1..{T}; use --forecast")
            overlap = match_observed(coords, archive.layout[t - 1])

        requests.append(
            PredictionRequest(
                t=t,
                coords=coords,
                X=X,
                S=build_basis_matrix(coords, archive.basis),
                overlap=overlap,
                scale=scale,
                forecast=forecast,
            )
        )

    return requests


def _latent_mean_part(
    samples: PosteriorSamples, X: np.ndarray, S: np.ndarray, eta: np.ndarray
) -> np.ndarray:
    """X beta_d + S eta_d for every draw, shape (draws, m)."""

    return samples.beta @ X.T + eta @ S.T


def predict_observed(
    samples: PosteriorSamples,
    X: np.ndarray,
    S: np.ndarray,
    t: int,
    overlap: np.ndarray,
) -> np.ndarray:
    """Plug each draw's latent values in at observed locations (t is 1-based)."""

    if (overlap < 0).any():
        raise UsageError("Some targets are not observed locations; use predict_new")

    return _latent_mean_part(samples, X, S, samples.eta[:, t - 1]) + samples.xi_at(t)[
        :, overlap
    ]


def predict_new(
    samples: PosteriorSamples,
    X: np.ndarray,
    S: np.ndarray,
    t: int,
    rng: np.random.Generator,
) -> PredictiveDraws:
    """Composition draws with fresh fine-scale effects at new locations."""

    smooth = _latent_mean_part(samples, X, S, samples.eta[:, t - 1])
    xi = np.sqrt(samples.sigma2_xi) * rng.standard_normal(smooth.shape)

    mean = X @ samples.beta.mean(axis=0) + S @ samples.eta[:, t - 1].mean(axis=0)
    var = samples.sigma2_xi + smooth.var(axis=0)

    return PredictiveDraws(smooth + xi, mean, var)


def forecast_one_step(
    samples: PosteriorSamples, X: np.ndarray, S: np.ndarray, rng: np.random.Generator
) -> PredictiveDraws:
    """Propagate each draw's last state one step ahead and predict at T + 1."""

    D, r = samples.draws, samples.r
    eta_next = np.empty((D, r))
    unstable = 0

    for d in range(D):
        propagator = build_propagator(*samples.lam[d], samples.adjacency)
        if not spectral_stationarity(propagator).stable:
            unstable += 1
        eta_next[d] = propagator.H @ samples.eta[d, -1] + ensure_pd(
            samples.U[d], "U"
        ) @ rng.standard_normal(r)

    if unstable:
        logging.warning(f"{unstable} of {D} draws have an unstable propagator.")

    smooth = _latent_mean_part(samples, X, S, eta_next)
    xi = np.sqrt(samples.sigma2_xi) * rng.standard_normal(smooth.shape)

    return PredictiveDraws(
        smooth + xi, smooth.mean(axis=0), samples.sigma2_xi + smooth.var(axis=0)
    )


def predict_z(y_draws: np.ndarray, rng: np.random.Generator) -> PredictiveDraws:
    """Bernoulli draws given y draws.

    The mean is the average of inv_logit(y); the variance adds the average
    Bernoulli variance to the variance of the probabilities.
    """

    p = inv_logit(y_draws)
    z = (rng.random(p.shape) < p).astype(float)

    return PredictiveDraws(z, p.mean(axis=0), (p * (1.0 - p)).mean(axis=0) + p.var(axis=0))


def summarize_draws(draws: np.ndarray) -> pd.DataFrame:
    """Mean, sd and type-7 quantiles per target column."""

    quantiles = type7_quantiles(draws, PREDICTIVE_QUANTILES)

    return pd.DataFrame(
        {
            "mean": draws.mean(axis=0),
            "sd": draws.std(axis=0),
            "q05": quantiles[0],
            "q50": quantiles[1],
            "q95": quantiles[2],
        }
    )


def predictive_y(
    samples: PosteriorSamples, request: PredictionRequest, rng: np.random.Generator
) -> PredictiveDraws:
    """y draws for a request, reusing stored fine-scale effects where observed."""

    if request.forecast:
        return forecast_one_step(samples, request.X, request.S, rng)

    new = predict_new(samples, request.X, request.S, request.t, rng)
    observed = request.observed
    if not observed.any():
        return new

    draws, mean, var = new.draws.copy(), new.mean.copy(), new.var.copy()
    stored = predict_observed(
        samples,
        request.X[observed],
        request.S[observed],
        request.t,
        request.overlap[observed],
    )
    draws[:, observed] = stored
    mean[observed] = stored.mean(axis=0)
    var[observed] = stored.var(axis=0)

    return PredictiveDraws(draws, mean, var)


def predict_request(
    samples: PosteriorSamples, request: PredictionRequest, seed: int
) -> pd.DataFrame:
    """Summary rows `t,coord1,coord2,mean,sd,q05,q50,q95` for one request."""

    stream = RandomStream.FORECAST if request.forecast else RandomStream.PREDICT
    rng = stream_rng(seed, stream, request.t)

    y = predictive_y(samples, request, rng)

    if request.scale == Scale.Y:
        summary = summarize_draws(y.draws)
        summary["mean"] = y.mean
        summary["sd"] = np.sqrt(y.var)
    elif request.scale == Scale.P:
        summary = summarize_draws(inv_logit(y.draws))
    else:
        z = predict_z(y.draws, stream_rng(seed, RandomStream.Z_DRAWS, request.t))
        summary = summarize_draws(z.draws)
        summary["mean"] = z.mean
        summary["sd"] = np.sqrt(z.var)

    summary.insert(0, "coord2", request.coords[:, 1])
    summary.insert(0, "coord1", request.coords[:, 0])
    summary.insert(0, "t", request.t)

    return summary


def predict_targets(
    archive: ChainArchive, requests: list[PredictionRequest], seed: int
) -> pd.DataFrame:
    frames = [predict_request(archive.samples, request, seed) for request in requests]

    logging.info(
        f"Predicted {sum(r.m for r in requests)} targets from {archive.samples.draws} draws."
    )

    return pd.concat(frames, ignore_index=True)
