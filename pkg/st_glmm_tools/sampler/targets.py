"""Log densities targeted by the Metropolis-Hastings moves."""

from dataclasses import dataclass

import numpy as np

from st_glmm_tools.errors import UsageError
from st_glmm_tools.geometry.basis import BasisSystem, build_basis_matrix
from st_glmm_tools.model.core import bernoulli_loglik, build_propagator
from st_glmm_tools.models import Propagator, StDataset
from st_glmm_tools.sampler.priors import PriorSpec, innovation_scatter


@dataclass(frozen=True)
class ModelData:
    """Observations with their covariate and basis matrices per time point."""

    z: list[np.ndarray]
    X: list[np.ndarray]
    S: list[np.ndarray]
    adjacency: np.ndarray

    def __post_init__(self):
        if not len(self.z) == len(self.X) == len(self.S):
            raise UsageError("z, X and S must cover the same time points")
        r = self.adjacency.shape[0] + self.adjacency.shape[1]
        for t, (z_t, X_t, S_t) in enumerate(zip(self.z, self.X, self.S)):
            if not z_t.shape[0] == X_t.shape[0] == S_t.shape[0]:
                raise UsageError(f"Row counts differ at t={t + 1}")
            if S_t.shape[1] != r:
                raise UsageError(f"Basis matrix at t={t + 1} must have {r} columns")

    @property
    def T(self) -> int:
        return len(self.z)

    @property
    def p(self) -> int:
        return self.X[0].shape[1]

    @property
    def r(self) -> int:
        return self.S[0].shape[1]

    @property
    def sizes(self) -> list[int]:
        return [z_t.shape[0] for z_t in self.z]

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.sizes))).astype(int)

    @property
    def design_scale(self) -> float:
        """Largest absolute covariate or basis entry, at least 1."""

        entries = [np.abs(a).max() for a in (*self.X, *self.S) if a.size]
        return max([1.0, *entries])

    @classmethod
    def from_dataset(cls, dataset: StDataset, basis: BasisSystem) -> "ModelData":
        if not basis.is_standardized:
            raise UsageError("Standardize the basis system before building model data")
        if dataset.metric != basis.metric:
            raise UsageError("Dataset and basis system use different metrics")

        return cls(
            z=[z_t.astype(float) for z_t in dataset.z],
            X=list(dataset.X),
            S=[build_basis_matrix(coords, basis) for coords in dataset.coords],
            adjacency=basis.adjacency,
        )


def lambda_from_tau(tau: np.ndarray | float) -> np.ndarray:
    """lambda = (e^tau - 1) / (e^tau + 1)."""

    return np.tanh(np.asarray(tau, dtype=float) / 2.0)


def tau_from_lambda(lam: np.ndarray | float) -> np.ndarray:
    return 2.0 * np.arctanh(np.asarray(lam, dtype=float))


def log_jacobian(tau: np.ndarray | float) -> np.ndarray:
    """log(d lambda / d tau) = log(2 e^tau / (e^tau + 1)^2)."""

    tau = np.asarray(tau, dtype=float)
    return np.log(2.0) + tau - 2.0 * np.logaddexp(0.0, tau)


def data_loglik_t(
    data: ModelData, t: int, beta: np.ndarray, eta_t: np.ndarray, xi_t: np.ndarray
) -> float:
    """Bernoulli log-likelihood at time t (0-based)."""

    y = data.X[t] @ beta + data.S[t] @ eta_t + xi_t
    return float(bernoulli_loglik(data.z[t], y).sum())


def data_loglik(
    data: ModelData, beta: np.ndarray, eta: np.ndarray, xi: list[np.ndarray]
) -> float:
    return sum(data_loglik_t(data, t, beta, eta[t], xi[t]) for t in range(data.T))


def _logdet_or_none(matrix: np.ndarray) -> float | None:
    sign, logdet = np.linalg.slogdet(matrix)
    return float(logdet) if sign > 0 else None


def integrated_K_term(eta1: np.ndarray, priors: PriorSpec) -> float:
    """-(nu_K + 1)/2 log|eta1 eta1' + Phi_K|."""

    logdet = _logdet_or_none(np.outer(eta1, eta1) + priors.Phi_K)
    if logdet is None:
        return -np.inf

    return -0.5 * (priors.nu_K + 1.0) * logdet


def integrated_U_term(eta: np.ndarray, propagator: Propagator, priors: PriorSpec) -> float:
    """-(nu_U + T - 1)/2 log|sum of residual outer products + Phi_U|, 0 when T = 1."""

    T = eta.shape[0]
    if T < 2:
        return 0.0

    logdet = _logdet_or_none(innovation_scatter(eta, propagator) + priors.Phi_U)
    if logdet is None:
        return -np.inf

    return -0.5 * (priors.nu_U + T - 1.0) * logdet


def beta_log_prior(beta: np.ndarray, priors: PriorSpec) -> float:
    if priors.beta_prior_sd is None:
        return 0.0

    return float(-0.5 * (beta**2).sum() / priors.beta_prior_sd**2)


def xi_log_prior(xi: list[np.ndarray], priors: PriorSpec) -> float:
    return float(-0.5 * sum((xi_t**2).sum() for xi_t in xi) / priors.sigma2_xi)


def log_integrated_target(
    eta: np.ndarray,
    xi: list[np.ndarray],
    beta: np.ndarray,
    lambdas: np.ndarray,
    priors: PriorSpec,
    data: ModelData,
) -> float:
    """Log posterior with K and U integrated out, up to an additive constant."""

    lambdas = np.asarray(lambdas, dtype=float)
    if not (np.abs(lambdas) < 1.0).all():
        return -np.inf

    propagator = build_propagator(*lambdas, data.adjacency)

    return (
        data_loglik(data, beta, eta, xi)
        + integrated_K_term(eta[0], priors)
        + integrated_U_term(eta, propagator, priors)
        + xi_log_prior(xi, priors)
        + beta_log_prior(beta, priors)
    )
