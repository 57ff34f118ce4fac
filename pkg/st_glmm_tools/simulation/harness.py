"""Forward simulation of the spatio-temporal model on a regular grid."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from st_glmm_tools.config import SimConfig
from st_glmm_tools.const import Metric, RandomStream
from st_glmm_tools.errors import DomainError, NumericalError, UsageError
from st_glmm_tools.geometry.basis import (
    BasisSystem,
    build_basis_matrix,
    pairwise_distance,
)
from st_glmm_tools.helpers import stream_rng
from st_glmm_tools.model.core import (
    build_propagator,
    ensure_pd,
    innovation_matrix,
    inv_logit,
    spectral_stationarity,
)
from st_glmm_tools.models import LatentState, ModelParams, StDataset

DOMAIN_CENTER = np.array([0.5, 0.5])
COVARIANCE_BLOCK_ROWS = 500


@dataclass(frozen=True)
class ScaledK:
    K: np.ndarray
    sigma2_xi: float


@dataclass
class SimulationResult:
    """A simulated dataset with everything needed to score predictions."""

    dataset: StDataset
    y: list[np.ndarray]
    p: list[np.ndarray]
    state: LatentState
    params: ModelParams
    basis: BasisSystem
    S: list[np.ndarray]

    def truth_at(self, t: int, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (y, p) at time t (1-based) for the given location indices."""

        return self.y[t - 1][indices], self.p[t - 1][indices]


@dataclass(frozen=True)
class HoldoutPartition:
    """Training, missing-by-design and missing-at-random indices per training time."""

    train: list[np.ndarray]
    mbd: list[np.ndarray]
    mar: list[np.ndarray]
    forecast: np.ndarray

    @property
    def training_times(self) -> int:
        return len(self.train)


def grid_coords(nx: int, ny: int) -> np.ndarray:
    """Cell-centered grid over the unit square, x varying fastest."""

    xs = (np.arange(nx) + 0.5) / nx
    ys = (np.arange(ny) + 0.5) / ny
    gx, gy = np.meshgrid(xs, ys, indexing="xy")

    return np.column_stack([gx.ravel(), gy.ravel()])


def exponential_cov_matrix(
    coords: np.ndarray,
    sigma2: float,
    psi: float,
    metric: Metric = Metric.PLANAR,
    other: np.ndarray | None = None,
) -> np.ndarray:
    """Return sigma2 * exp(-h / psi) over pairwise distances h."""

    if sigma2 <= 0 or psi <= 0:
        raise DomainError(f"sigma2 and psi must be positive: {sigma2}, {psi}")

    h = pairwise_distance(coords, coords if other is None else other, metric)

    return sigma2 * np.exp(-h / psi)


def projected_target_cov(
    S: np.ndarray,
    coords: np.ndarray,
    sigma2: float,
    psi: float,
    metric: Metric = Metric.PLANAR,
) -> np.ndarray:
    """Return S' Sigma0 S without forming the full N x N covariance."""

    projected = np.zeros((S.shape[1], S.shape[1]))

    for start in range(0, coords.shape[0], COVARIANCE_BLOCK_ROWS):
        stop = min(start + COVARIANCE_BLOCK_ROWS, coords.shape[0])
        block = exponential_cov_matrix(
            coords[start:stop], sigma2, psi, metric, other=coords
        )
        projected += S[start:stop].T @ (block @ S)

    return (projected + projected.T) / 2.0


def frobenius_fit_K(
    S: np.ndarray,
    Sigma0: np.ndarray | None = None,
    projected: np.ndarray | None = None,
) -> np.ndarray:
    """Minimize ||S K S' - Sigma0||_F over symmetric K.

    Either Sigma0 or the projection S' Sigma0 S must be given.
    """

    if (Sigma0 is None) == (projected is None):
        raise UsageError("Pass exactly one of Sigma0 and projected")

    rank = int(np.linalg.matrix_rank(S))
    if rank < S.shape[1]:
        raise NumericalError(
            f"Basis matrix is rank deficient: rank {rank} < {S.shape[1]}", rank=rank
        )

    if projected is None:
        assert Sigma0 is not None
        projected = S.T @ Sigma0 @ S

    gram = scipy.linalg.cho_factor(S.T @ S, lower=True)
    half = scipy.linalg.cho_solve(gram, projected)
    K0 = scipy.linalg.cho_solve(gram, half.T).T

    return (K0 + K0.T) / 2.0


def scale_K(
    K0: np.ndarray,
    S: np.ndarray,
    small_scale_fraction: float,
    total_variance: float = 1.0,
) -> ScaledK:
    """Scale K0 so the basis part carries the given share of the average variance."""

    average = float(np.sum(K0 * (S.T @ S))) / S.shape[0]
    if not average > 0:
        raise DomainError(f"trace(S K0 S')/N must be positive: {average}")

    sigma2_xi = total_variance - small_scale_fraction
    if sigma2_xi < 0:
        raise DomainError(
            f"Fraction {small_scale_fraction} exceeds total variance {total_variance}"
        )

    K = small_scale_fraction * K0 / average
    ensure_pd(K, "scaled K")

    return ScaledK(K, sigma2_xi)


def psd_factor(matrix: np.ndarray) -> np.ndarray:
    """Return L with L L' = matrix for a positive semi-definite matrix."""

    values, vectors = np.linalg.eigh((matrix + matrix.T) / 2.0)

    return vectors * np.sqrt(np.clip(values, 0.0, None))


def simulate_latent(
    S: list[np.ndarray],
    X: list[np.ndarray],
    beta: np.ndarray,
    K: np.ndarray,
    H: np.ndarray,
    U: np.ndarray,
    sigma2_xi: float,
    T: int,
    rng: np.random.Generator,
) -> tuple[LatentState, list[np.ndarray]]:
    """Run the process forward and return the latent state and y per time."""

    if sigma2_xi < 0:
        raise DomainError(f"sigma2_xi must be non-negative: {sigma2_xi}")

    r = K.shape[0]
    K_factor, U_factor = psd_factor(K), psd_factor(U)

    eta = np.zeros((T, r))
    eta[0] = K_factor @ rng.standard_normal(r)
    for t in range(1, T):
        eta[t] = H @ eta[t - 1] + U_factor @ rng.standard_normal(r)

    xi, y = [], []
    for t in range(T):
        xi_t = np.sqrt(sigma2_xi) * rng.standard_normal(S[t].shape[0])
        xi.append(xi_t)
        y.append(X[t] @ beta + S[t] @ eta[t] + xi_t)

    return LatentState(eta, xi), y


def simulate_dataset(config: SimConfig) -> SimulationResult:
    """Simulate binary data on the configured grid."""

    coords = grid_coords(*config.grid)
    N = coords.shape[0]

    basis = config.basis.build().standardize_on(coords)
    S_grid = build_basis_matrix(coords, basis)

    projected = projected_target_cov(S_grid, coords, config.sigma2, config.psi)
    K0 = frobenius_fit_K(S_grid, projected=projected)
    scaled = scale_K(K0, S_grid, config.small_scale_fraction, config.sigma2)

    propagator = build_propagator(*config.lambdas, basis.adjacency)
    stationarity = spectral_stationarity(propagator)
    if not stationarity.stable:
        raise DomainError(f"Propagator is not stable: radius {stationarity.radius}")
    U = innovation_matrix(scaled.K, propagator)

    X_grid = np.column_stack(
        [np.ones(N), pairwise_distance(coords, DOMAIN_CENTER[None, :])[:, 0]]
    )
    beta = np.array(config.beta)

    params = ModelParams(beta, scaled.K, propagator, U, config.sigma2_xi)

    rng = stream_rng(config.seed, RandomStream.SIMULATE)
    S = [S_grid] * config.T
    X = [X_grid] * config.T
    state, y = simulate_latent(
        S, X, beta, scaled.K, propagator.H, U, config.sigma2_xi, config.T, rng
    )

    p = [inv_logit(y_t) for y_t in y]
    z = [(rng.random(N) < p_t).astype(int) for p_t in p]

    dataset = StDataset([coords] * config.T, z, X, Metric.PLANAR)

    logging.info(
        f"Simulated {config.T} x {N} observations with r = {basis.r} "
        + f"(seed {config.seed})."
    )

    return SimulationResult(dataset, y, p, state, params, basis, S)


def partition_holdout(dataset: StDataset, config: SimConfig) -> HoldoutPartition:
    """Split each training time into training, MBD and MAR sets; hold out t = T."""

    xmin, xmax, ymin, ymax = config.mbd
    train, mbd, mar = [], [], []

    for t in range(1, dataset.T):
        coords = dataset.coords[t - 1]
        inside = (
            (coords[:, 0] >= xmin)
            & (coords[:, 0] <= xmax)
            & (coords[:, 1] >= ymin)
            & (coords[:, 1] <= ymax)
        )
        mbd_t = np.flatnonzero(inside)
        remainder = np.flatnonzero(~inside)

        if config.mar_count > remainder.size:
            raise UsageError(
                f"MAR count {config.mar_count} exceeds the {remainder.size} "
                + f"locations left at t={t}"
            )

        rng = stream_rng(config.seed, RandomStream.HOLDOUT, t)
        mar_t = np.sort(rng.choice(remainder, size=config.mar_count, replace=False))

        train.append(np.setdiff1d(remainder, mar_t))
        mbd.append(mbd_t)
        mar.append(mar_t)

    forecast = np.arange(dataset.sizes[-1])

    logging.debug(
        f"Held out {sum(m.size for m in mbd)} MBD and {sum(m.size for m in mar)} "
        + "MAR locations."
    )

    return HoldoutPartition(train, mbd, mar, forecast)


def rmspe(predictions: np.ndarray, truth: np.ndarray) -> float:
    predictions = np.asarray(predictions, dtype=float)
    truth = np.asarray(truth, dtype=float)

    if predictions.size == 0:
        raise UsageError("RMSPE needs at least one prediction")
    if predictions.shape != truth.shape:
        raise UsageError(f"Shape mismatch: {predictions.shape} vs {truth.shape}")

    return float(np.sqrt(np.mean((predictions - truth) ** 2)))
