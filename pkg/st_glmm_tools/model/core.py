"""Propagator, innovation matrix, link functions and the complete-data likelihood."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import expit
from scipy.special import logit as _logit

from st_glmm_tools.const import PD_RELATIVE_TOLERANCE
from st_glmm_tools.errors import DomainError, NumericalError, UsageError
from st_glmm_tools.models import LatentState, ModelParams, Propagator, StDataset


@dataclass(frozen=True)
class Stationarity:
    """Spectral radius of a propagator and whether it is below one."""

    radius: float
    stable: bool


def logit(p: np.ndarray | float) -> np.ndarray:
    p = np.asarray(p, dtype=float)

    if not ((p > 0) & (p < 1)).all():
        raise DomainError("logit requires probabilities strictly inside (0, 1)")

    return _logit(p)


def inv_logit(y: np.ndarray | float) -> np.ndarray:
    return expit(np.asarray(y, dtype=float))


def ensure_pd(matrix: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Check a symmetric matrix is positive definite and return its Cholesky factor.

    A factorization that succeeds with a pivot below 1e-10 of trace/r still
    counts as a failure.
    """

    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    r = matrix.shape[0]

    if matrix.shape != (r, r):
        raise UsageError(f"{name} must be square, got {matrix.shape}")

    scale = max(float(np.abs(matrix).max()), 1.0)
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-9 * scale):
        raise NumericalError(f"{name} is not symmetric")

    symmetric = (matrix + matrix.T) / 2.0
    threshold = PD_RELATIVE_TOLERANCE * max(np.trace(symmetric) / r, 0.0)

    try:
        factor = scipy.linalg.cholesky(symmetric, lower=True)
    except np.linalg.LinAlgError:
        factor = None

    if factor is None or np.diag(factor).min() ** 2 <= threshold:
        min_eigenvalue = float(np.linalg.eigvalsh(symmetric).min())
        raise NumericalError(
            f"{name} is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})",
            min_eigenvalue=min_eigenvalue,
        )

    return factor


def build_propagator(
    lambda1: float, lambda2: float, lambda3: float, adjacency: np.ndarray
) -> Propagator:
    """Realize H = [[l1 I, 0], [l3 R, l2 I]] for an r2 x r1 adjacency R."""

    for name, value in (("lambda1", lambda1), ("lambda2", lambda2), ("lambda3", lambda3)):
        if not -1.0 < value < 1.0:
            raise DomainError(f"{name} must lie in (-1, 1): {value}")

    r2, r1 = adjacency.shape
    H = np.zeros((r1 + r2, r1 + r2))
    H[:r1, :r1] = lambda1 * np.eye(r1)
    H[r1:, :r1] = lambda3 * adjacency
    H[r1:, r1:] = lambda2 * np.eye(r2)

    return Propagator(float(lambda1), float(lambda2), float(lambda3), adjacency, H)


def spectral_stationarity(propagator: Propagator) -> Stationarity:
    # block lower triangular, so the eigenvalues are the diagonal blocks'
    radius = abs(propagator.lambda1)
    if propagator.adjacency.shape[0] > 0:
        radius = max(radius, abs(propagator.lambda2))

    return Stationarity(radius, radius < 1.0)


def innovation_matrix(K: np.ndarray, propagator: Propagator) -> np.ndarray:
    """Return U = K - HKH' for a marginally stationary process."""

    ensure_pd(K, "K")

    H = propagator.H
    U = K - H @ K @ H.T
    U = (U + U.T) / 2.0

    ensure_pd(U, "U")

    return U


def chain_period_K(K_hat: np.ndarray, propagator: Propagator, U_hat: np.ndarray) -> np.ndarray:
    """Propagate the variance of the last period's state to the next period."""

    H = propagator.H
    K_next = H @ K_hat @ H.T + U_hat

    return (K_next + K_next.T) / 2.0


def linear_predictor(
    X: np.ndarray,
    S: np.ndarray,
    beta: np.ndarray,
    eta_t: np.ndarray,
    xi_t: np.ndarray | float = 0.0,
) -> np.ndarray:
    return X @ beta + S @ eta_t + xi_t


def bernoulli_loglik(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Elementwise log Bernoulli probability under the logit link."""

    return -np.logaddexp(0.0, -(2.0 * z - 1.0) * y)


def gaussian_logpdf(x: np.ndarray, factor: np.ndarray) -> np.ndarray:
    """Zero-mean Gaussian log density for rows of x given a lower Cholesky factor."""

    x = np.atleast_2d(x)
    r = factor.shape[0]
    whitened = scipy.linalg.solve_triangular(factor, x.T, lower=True)
    log_det = 2.0 * np.log(np.diag(factor)).sum()

    return -0.5 * (r * np.log(2.0 * np.pi) + log_det + (whitened**2).sum(axis=0))


def complete_data_loglik(
    dataset: StDataset,
    state: LatentState,
    params: ModelParams,
    S: list[np.ndarray],
) -> float:
    """Joint log density of the data, the basis coefficients and the fine-scale effects."""

    if len(S) != dataset.T or state.T != dataset.T:
        raise UsageError("Basis matrices and latent state must cover every time point")
    if params.sigma2_xi <= 0:
        raise DomainError(f"sigma2_xi must be positive: {params.sigma2_xi}")

    K_factor = ensure_pd(params.K, "K")
    U_factor = ensure_pd(params.U, "U") if dataset.T > 1 else None

    data_term = 0.0
    xi_term = 0.0

    for t in range(dataset.T):
        y_t = linear_predictor(
            dataset.X[t], S[t], params.beta, state.eta[t], state.xi[t]
        )
        data_term += bernoulli_loglik(dataset.z[t], y_t).sum()
        xi_term += (
            -0.5 * np.log(2.0 * np.pi * params.sigma2_xi) * state.xi[t].size
            - 0.5 * (state.xi[t] ** 2).sum() / params.sigma2_xi
        )

    eta_term = float(gaussian_logpdf(state.eta[0], K_factor)[0])

    if U_factor is not None:
        residuals = state.eta[1:] - state.eta[:-1] @ params.H.H.T
        eta_term += float(gaussian_logpdf(residuals, U_factor).sum())

    total = float(data_term + eta_term + xi_term)
    logging.debug(
        f"Complete-data log-likelihood {total:.6f} (data {data_term:.6f}, "
        + f"eta {eta_term:.6f}, xi {xi_term:.6f})."
    )

    return total
