"""Posterior-mode initialization and Hessian-based proposal covariances."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import expit

from st_glmm_tools.config import ChainConfig
from st_glmm_tools.const import NEWTON_GRADIENT_TOLERANCE, NEWTON_MAX_ITERATIONS
from st_glmm_tools.errors import NumericalError, UsageError
from st_glmm_tools.model.core import build_propagator, ensure_pd
from st_glmm_tools.models import ModelParams, Propagator
from st_glmm_tools.sampler.priors import PriorSpec
from st_glmm_tools.sampler.targets import (
    ModelData,
    data_loglik,
    integrated_U_term,
    lambda_from_tau,
    log_jacobian,
    tau_from_lambda,
)

ARMIJO_CONSTANT = 1e-4
MAX_HALVINGS = 40
CURVATURE_STEP = 1e-3
LAMBDA_FALLBACK_VARIANCE = 0.1


@dataclass
class PosteriorMode:
    beta: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    covariance: np.ndarray
    V_xi: np.ndarray
    gradient_norm: float
    iterations: int


@dataclass
class InitialState:
    """Starting values and proposal covariances of a chain."""

    beta: np.ndarray
    lambdas: np.ndarray
    K: np.ndarray
    U: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    V_beta: np.ndarray
    V_eta: np.ndarray
    V_xi: np.ndarray
    V_lambda: np.ndarray
    gradient_norm: float
    iterations: int

    def params(self, sigma2_xi: float, adjacency: np.ndarray) -> ModelParams:
        return ModelParams(
            self.beta,
            self.K,
            build_propagator(*self.lambdas, adjacency),
            self.U,
            sigma2_xi,
        )


def eta_prior_precision(
    K: np.ndarray, U: np.ndarray, propagator: Propagator, T: int
) -> np.ndarray:
    """Block-tridiagonal precision of (eta_1, ..., eta_T) under the VAR(1) prior."""

    r = K.shape[0]
    H = propagator.H
    K_inv = scipy.linalg.cho_solve((ensure_pd(K, "K"), True), np.eye(r))
    Q = np.zeros((T * r, T * r))
    Q[:r, :r] = K_inv

    if T > 1:
        U_inv = scipy.linalg.cho_solve((ensure_pd(U, "U"), True), np.eye(r))
        HtUinv = H.T @ U_inv
        for t in range(1, T):
            now, prev = slice(t * r, (t + 1) * r), slice((t - 1) * r, t * r)
            Q[prev, prev] += HtUinv @ H
            Q[now, now] += U_inv
            Q[now, prev] -= U_inv @ H
            Q[prev, now] -= HtUinv

    return (Q + Q.T) / 2.0


class _ModeProblem:
    """Log posterior of (beta, eta, xi) at fixed covariances, with derivatives."""

    def __init__(
        self,
        data: ModelData,
        Q: np.ndarray,
        sigma2_xi: float,
        beta_prior_sd: float | None,
        fix_beta: bool,
    ):
        self.data = data
        self.Q = Q
        self.precision_xi = 1.0 / sigma2_xi
        self.beta_precision = 0.0 if beta_prior_sd is None else beta_prior_sd**-2
        self.fix_beta = fix_beta
        self.offsets = data.offsets

    def split(self, xi: np.ndarray) -> list[np.ndarray]:
        return [xi[a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def objective(self, beta: np.ndarray, eta: np.ndarray, xi: np.ndarray) -> float:
        value = data_loglik(self.data, beta, eta, self.split(xi))
        value -= 0.5 * float(eta.ravel() @ self.Q @ eta.ravel())
        value -= 0.5 * self.precision_xi * float(xi @ xi)
        if not self.fix_beta:
            value -= 0.5 * self.beta_precision * float(beta @ beta)
        return value

    def derivatives(self, beta: np.ndarray, eta: np.ndarray, xi: np.ndarray):
        """Return the full gradient, the xi-eliminated Hessian and right-hand side.

        Eliminating the diagonal xi block leaves weights w c / (w + c) with
        w = p (1 - p) and c = 1 / sigma2_xi.
        """

        data = self.data
        T, r, p = data.T, data.r, data.p
        c = self.precision_xi
        nb = 0 if self.fix_beta else p

        Q_eta = (self.Q @ eta.ravel()).reshape(T, r)
        grad_beta = -self.beta_precision * beta
        rhs_beta = grad_beta.copy()
        grad_eta = -Q_eta
        rhs_eta = -Q_eta.copy()
        grad_xi = np.zeros_like(xi)
        diag_xi = np.zeros_like(xi)
        xi_weight = np.zeros_like(xi)

        A = np.zeros((nb + T * r, nb + T * r))
        A[nb:, nb:] = self.Q
        if nb:
            A[:nb, :nb] += self.beta_precision * np.eye(p)

        for t, (a, b) in enumerate(zip(self.offsets[:-1], self.offsets[1:])):
            X_t, S_t = data.X[t], data.S[t]
            xi_t = xi[a:b]

            prob = expit(X_t @ beta + S_t @ eta[t] + xi_t)
            w = prob * (1.0 - prob)
            g_y = data.z[t] - prob
            g_xi = g_y - c * xi_t
            d = w + c
            omega = w * c / d
            residual = g_y - (w / d) * g_xi

            grad_beta += X_t.T @ g_y
            rhs_beta += X_t.T @ residual
            grad_eta[t] += S_t.T @ g_y
            rhs_eta[t] += S_t.T @ residual
            grad_xi[a:b] = g_xi
            diag_xi[a:b] = d
            xi_weight[a:b] = w

            block = slice(nb + t * r, nb + (t + 1) * r)
            A[block, block] += S_t.T @ (omega[:, None] * S_t)
            if nb:
                cross = X_t.T @ (omega[:, None] * S_t)
                A[:nb, :nb] += X_t.T @ (omega[:, None] * X_t)
                A[:nb, block] += cross
                A[block, :nb] += cross.T

        parts = [grad_eta.ravel(), grad_xi]
        rhs_parts = [rhs_eta.ravel()]
        if nb:
            parts.insert(0, grad_beta)
            rhs_parts.insert(0, rhs_beta)

        return (
            np.concatenate(parts),
            (A + A.T) / 2.0,
            np.concatenate(rhs_parts),
            grad_xi,
            diag_xi,
            xi_weight,
        )


def posterior_mode(
    data: ModelData,
    K: np.ndarray,
    U: np.ndarray,
    propagator: Propagator,
    sigma2_xi: float,
    beta: np.ndarray | None = None,
    beta_prior_sd: float | None = None,
    fix_beta: bool = False,
    max_iterations: int = NEWTON_MAX_ITERATIONS,
    tolerance: float = NEWTON_GRADIENT_TOLERANCE,
) -> PosteriorMode:
    """Damped Newton ascent on the log posterior of (beta, eta, xi)."""

    T, r, p = data.T, data.r, data.p
    if fix_beta and beta is None:
        raise UsageError("A fixed beta must be supplied")

    beta = np.zeros(p) if beta is None else np.array(beta, dtype=float)
    eta = np.zeros((T, r))
    xi = np.zeros(int(data.offsets[-1]))

    problem = _ModeProblem(
        data, eta_prior_precision(K, U, propagator, T), sigma2_xi, beta_prior_sd, fix_beta
    )
    nb = 0 if fix_beta else p
    scale = data.design_scale

    value = problem.objective(beta, eta, xi)
    gradient_norm = np.inf
    iteration = 0

    for iteration in range(max_iterations + 1):
        gradient, A, rhs, grad_xi, diag_xi, xi_weight = problem.derivatives(
            beta, eta, xi
        )
        gradient_norm = float(np.abs(gradient).max(initial=0.0)) / scale

        if gradient_norm < tolerance or iteration == max_iterations:
            break

        try:
            delta = scipy.linalg.cho_solve(scipy.linalg.cho_factor(A, lower=True), rhs)
        except np.linalg.LinAlgError as error:
            raise NumericalError(
                f"Newton Hessian is not negative definite at iteration {iteration}",
                gradient_norm=gradient_norm,
            ) from error

        d_beta = delta[:nb] if nb else np.zeros(p)
        d_eta = delta[nb:].reshape(T, r)
        linear = np.concatenate(
            [data.X[t] @ d_beta + data.S[t] @ d_eta[t] for t in range(T)]
        )
        d_xi = (grad_xi - xi_weight * linear) / diag_xi

        full_delta = np.concatenate(
            ([d_beta] if nb else []) + [d_eta.ravel(), d_xi]
        )
        slope = float(gradient @ full_delta)

        step = 1.0
        for _ in range(MAX_HALVINGS):
            candidate = problem.objective(
                beta + step * d_beta, eta + step * d_eta, xi + step * d_xi
            )
            if candidate >= value + ARMIJO_CONSTANT * step * slope:
                break
            step /= 2.0
        else:
            logging.debug(f"Line search stalled at iteration {iteration}.")
            break

        beta = beta + step * d_beta
        eta = eta + step * d_eta
        xi = xi + step * d_xi
        value = candidate

        logging.debug(
            f"Newton iteration {iteration + 1}: log posterior {value:.6f}, "
            + f"scaled gradient {gradient_norm:.3e}, step {step:g}."
        )

    if not gradient_norm < tolerance:
        raise NumericalError(
            f"Newton iterations did not converge: scaled gradient norm {gradient_norm:.3e}",
            gradient_norm=gradient_norm,
        )

    covariance = scipy.linalg.cho_solve(
        scipy.linalg.cho_factor(A, lower=True), np.eye(A.shape[0])
    )

    return PosteriorMode(
        beta=beta,
        eta=eta,
        xi=xi,
        covariance=(covariance + covariance.T) / 2.0,
        V_xi=1.0 / diag_xi,
        gradient_norm=gradient_norm,
        iterations=iteration,
    )


def lambda_curvature_variances(
    eta: np.ndarray, lambdas: np.ndarray, priors: PriorSpec, adjacency: np.ndarray
) -> np.ndarray:
    """Inverse negative curvature of the collapsed tau target, per coordinate."""

    tau = tau_from_lambda(lambdas)

    def target(values: np.ndarray) -> float:
        propagator = build_propagator(*lambda_from_tau(values), adjacency)
        return integrated_U_term(eta, propagator, priors) + float(
            log_jacobian(values).sum()
        )

    center = target(tau)
    variances = np.full(3, LAMBDA_FALLBACK_VARIANCE)

    for j in range(3):
        shift = np.zeros(3)
        shift[j] = CURVATURE_STEP
        curvature = -(target(tau + shift) - 2.0 * center + target(tau - shift)) / (
            CURVATURE_STEP**2
        )
        if np.isfinite(curvature) and curvature > 0:
            variances[j] = 1.0 / curvature

    return variances


def init_state(
    data: ModelData,
    priors: PriorSpec,
    config: ChainConfig,
    fixed: ModelParams | None = None,
) -> InitialState:
    """Start at the posterior mode of (beta, eta, xi) for fixed covariances.

    Without pinned parameters K and U start at the prior centers and every
    lambda at 0; with pinned parameters only eta and xi are optimized.
    """

    T, r, p = data.T, data.r, data.p

    if fixed is not None:
        K, U = fixed.K, fixed.U
        lambdas = fixed.H.lambdas
        beta0: np.ndarray | None = fixed.beta
    else:
        K, U = priors.initial_K(), priors.initial_U()
        lambdas = np.zeros(3)
        beta0 = None

    propagator = build_propagator(*lambdas, data.adjacency)
    mode = posterior_mode(
        data,
        K,
        U,
        propagator,
        priors.sigma2_xi,
        beta=beta0,
        beta_prior_sd=priors.beta_prior_sd,
        fix_beta=fixed is not None,
    )

    nb = 0 if fixed is not None else p
    V_beta = mode.covariance[:nb, :nb] if nb else np.eye(p)
    V_eta = np.stack(
        [
            mode.covariance[nb + t * r : nb + (t + 1) * r, nb + t * r : nb + (t + 1) * r]
            for t in range(T)
        ]
    )
    V_lambda = lambda_curvature_variances(mode.eta, lambdas, priors, data.adjacency)

    logging.info(
        f"Posterior mode found in {mode.iterations} Newton iterations "
        + f"(scaled gradient {mode.gradient_norm:.2e}); chain seed {config.seed}."
    )

    return InitialState(
        beta=mode.beta,
        lambdas=np.array(lambdas, dtype=float),
        K=K,
        U=U,
        eta=mode.eta,
        xi=mode.xi,
        V_beta=V_beta,
        V_eta=V_eta,
        V_xi=mode.V_xi,
        V_lambda=V_lambda,
        gradient_norm=mode.gradient_norm,
        iterations=mode.iterations,
    )
