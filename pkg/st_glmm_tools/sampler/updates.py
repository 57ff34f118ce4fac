"""Metropolis-Hastings and Gibbs moves of one sampler sweep."""

from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from st_glmm_tools.const import (
    ACCEPTANCE_TARGET,
    ADAPTATION_EXPONENT,
    COVARIANCE_ADAPTATION_START,
    COVARIANCE_REGULARIZATION,
    RandomStream,
)
from st_glmm_tools.helpers import stream_rng
from st_glmm_tools.model.core import bernoulli_loglik, build_propagator, ensure_pd
from st_glmm_tools.models import Propagator
from st_glmm_tools.sampler.priors import PriorSpec, sample_K, sample_U
from st_glmm_tools.sampler.targets import (
    ModelData,
    beta_log_prior,
    integrated_U_term,
    lambda_from_tau,
    log_jacobian,
)


def adaptation_gain(iteration: int) -> float:
    return 1.0 / (iteration + 1.0) ** ADAPTATION_EXPONENT


@dataclass
class RecursiveCovariance:
    """Running mean and covariance of a stream of vectors."""

    mean: np.ndarray
    covariance: np.ndarray
    count: int = 0

    @classmethod
    def empty(cls, dim: int) -> "RecursiveCovariance":
        return cls(np.zeros(dim), np.zeros((dim, dim)))

    def update(self, draw: np.ndarray) -> None:
        self.count += 1
        delta = draw - self.mean
        self.mean = self.mean + delta / self.count
        self.covariance = self.covariance + (
            np.outer(delta, draw - self.mean) - self.covariance
        ) / self.count


@dataclass
class AdaptiveProposal:
    """Gaussian random walk with covariance exp(log_step) * covariance."""

    covariance: np.ndarray
    log_step: float
    accepted: int = 0
    proposed: int = 0
    history: RecursiveCovariance | None = None
    adaptation_start: int = COVARIANCE_ADAPTATION_START
    target: float = ACCEPTANCE_TARGET
    _factor: np.ndarray | None = field(default=None, repr=False)

    @property
    def step(self) -> float:
        return float(np.exp(self.log_step))

    @property
    def factor(self) -> np.ndarray:
        if self._factor is None:
            self._factor = ensure_pd(self.step * self.covariance, "proposal covariance")
        return self._factor

    def propose(self, current: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return current + self.factor @ rng.standard_normal(current.shape[0])

    def record(self, accepted: bool, iteration: int, adapting: bool) -> None:
        self.proposed += 1
        self.accepted += int(accepted)

        if adapting:
            self.log_step += adaptation_gain(iteration) * (
                float(accepted) - self.target
            )
            self._factor = None

    def observe(self, draw: np.ndarray, iteration: int, adapting: bool) -> None:
        """Feed a post-move draw into the empirical proposal covariance."""

        if not adapting:
            return

        if self.history is None:
            self.history = RecursiveCovariance.empty(draw.shape[0])
        self.history.update(draw)

        if iteration > self.adaptation_start:
            self.covariance = self.history.covariance + COVARIANCE_REGULARIZATION * np.eye(
                draw.shape[0]
            )
            self._factor = None

    def reset_counters(self) -> None:
        self.accepted = 0
        self.proposed = 0


@dataclass
class ElementwiseProposal:
    """Independent scalar random walks, one per fine-scale effect."""

    variances: np.ndarray
    log_steps: np.ndarray
    accepted: int = 0
    proposed: int = 0
    target: float = ACCEPTANCE_TARGET

    def record(self, flags: np.ndarray, iteration: int, adapting: bool) -> None:
        self.proposed += int(flags.size)
        self.accepted += int(flags.sum())

        if adapting:
            self.log_steps += adaptation_gain(iteration) * (
                flags.astype(float) - self.target
            )

    def reset_counters(self) -> None:
        self.accepted = 0
        self.proposed = 0


@dataclass
class SamplerState:
    """Current values, proposal tuning and cached factors of one chain."""

    data: ModelData
    priors: PriorSpec
    beta: np.ndarray
    tau: np.ndarray
    K: np.ndarray
    U: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    beta_proposal: AdaptiveProposal
    lambda_proposals: list[AdaptiveProposal]
    eta_proposals: list[AdaptiveProposal]
    xi_proposal: ElementwiseProposal
    seed: int = 0
    iteration: int = 0
    adapting: bool = True
    _K_factor: np.ndarray | None = field(default=None, repr=False)
    _U_factor: np.ndarray | None = field(default=None, repr=False)

    @property
    def lambdas(self) -> np.ndarray:
        return lambda_from_tau(self.tau)

    @property
    def propagator(self) -> Propagator:
        return build_propagator(*self.lambdas, self.data.adjacency)

    @property
    def K_factor(self) -> np.ndarray:
        if self._K_factor is None:
            self._K_factor = ensure_pd(self.K, "K")
        return self._K_factor

    @property
    def U_factor(self) -> np.ndarray:
        if self._U_factor is None:
            self._U_factor = ensure_pd(self.U, "U")
        return self._U_factor

    def set_K(self, K: np.ndarray) -> None:
        self.K = K
        self._K_factor = None

    def set_U(self, U: np.ndarray) -> None:
        self.U = U
        self._U_factor = None

    def xi_at(self, t: int) -> np.ndarray:
        """Fine-scale effects at time t (0-based), a view into the stacked vector."""

        offsets = self.data.offsets
        return self.xi[offsets[t] : offsets[t + 1]]

    def proposals(self) -> dict[str, AdaptiveProposal | ElementwiseProposal]:
        named: dict[str, AdaptiveProposal | ElementwiseProposal] = {
            "beta": self.beta_proposal
        }
        for j, proposal in enumerate(self.lambda_proposals):
            named[f"lambda{j + 1}"] = proposal
        for t, proposal in enumerate(self.eta_proposals):
            named[f"eta_{t + 1}"] = proposal
        named["xi"] = self.xi_proposal
        return named


def _quadratic(factor: np.ndarray, vector: np.ndarray) -> float:
    whitened = scipy.linalg.solve_triangular(factor, vector, lower=True)
    return float(whitened @ whitened)


def metropolis_accept(log_ratio: float, rng: np.random.Generator) -> bool:
    return bool(np.log(rng.random()) < log_ratio)


def metropolis_coordinate(
    value: float,
    current_log: float,
    log_density: Callable[[float], float],
    scale: float,
    rng: np.random.Generator,
) -> tuple[float, float, bool]:
    """One scalar random-walk Metropolis step; returns (value, log density, accepted)."""

    proposal = value + scale * rng.standard_normal()
    proposal_log = log_density(proposal)

    if metropolis_accept(proposal_log - current_log, rng):
        return proposal, proposal_log, True

    return value, current_log, False


def eta_block_log_density(state: SamplerState, t: int, eta_t: np.ndarray) -> float:
    """Terms of the full conditional of eta at time t (0-based)."""

    data = state.data
    H = state.propagator.H

    offset = data.X[t] @ state.beta + state.xi_at(t)
    log_density = float(bernoulli_loglik(data.z[t], offset + data.S[t] @ eta_t).sum())

    if t == 0:
        log_density -= 0.5 * _quadratic(state.K_factor, eta_t)
    else:
        log_density -= 0.5 * _quadratic(state.U_factor, eta_t - H @ state.eta[t - 1])

    if t < data.T - 1:
        log_density -= 0.5 * _quadratic(state.U_factor, state.eta[t + 1] - H @ eta_t)

    return log_density


def mh_update_eta_block(state: SamplerState, t: int, rng: np.random.Generator) -> bool:
    """Random-walk update of eta at time t (1-based)."""

    index = t - 1
    proposal = state.eta_proposals[index]

    current = state.eta[index].copy()
    candidate = proposal.propose(current, rng)

    log_ratio = eta_block_log_density(state, index, candidate) - eta_block_log_density(
        state, index, current
    )
    accepted = metropolis_accept(log_ratio, rng)
    if accepted:
        state.eta[index] = candidate

    proposal.record(accepted, state.iteration, state.adapting)
    proposal.observe(state.eta[index], state.iteration, state.adapting)

    return accepted


def _xi_update_at(state: SamplerState, t: int) -> np.ndarray:
    data = state.data
    offsets = data.offsets
    rows = slice(offsets[t], offsets[t + 1])

    rng = stream_rng(state.seed, RandomStream.XI, state.iteration, t)
    xi_t = state.xi[rows]
    n = xi_t.shape[0]

    scale = np.sqrt(
        np.exp(state.xi_proposal.log_steps[rows]) * state.xi_proposal.variances[rows]
    )
    candidate = xi_t + scale * rng.standard_normal(n)
    log_u = np.log(rng.random(n))

    linear = data.X[t] @ state.beta + data.S[t] @ state.eta[t]
    log_ratio = (
        bernoulli_loglik(data.z[t], linear + candidate)
        - bernoulli_loglik(data.z[t], linear + xi_t)
        - 0.5 * (candidate**2 - xi_t**2) / state.priors.sigma2_xi
    )

    accepted = log_u < log_ratio
    state.xi[rows] = np.where(accepted, candidate, xi_t)

    return accepted


def mh_update_xi_elements(
    state: SamplerState, executor: Executor | None = None
) -> np.ndarray:
    """Elementwise random-walk updates of all fine-scale effects.

    Every time point draws from its own stream keyed by (seed, iteration, t),
    so serial and threaded runs give identical draws.
    """

    times = range(state.data.T)
    if executor is None:
        flags = [_xi_update_at(state, t) for t in times]
    else:
        flags = list(executor.map(lambda t: _xi_update_at(state, t), times))

    accepted = np.concatenate(flags) if flags else np.zeros(0, dtype=bool)
    state.xi_proposal.record(accepted, state.iteration, state.adapting)

    return accepted


def beta_log_density(state: SamplerState, beta: np.ndarray) -> float:
    data = state.data

    total = beta_log_prior(beta, state.priors)
    for t in range(data.T):
        y = data.X[t] @ beta + data.S[t] @ state.eta[t] + state.xi_at(t)
        total += float(bernoulli_loglik(data.z[t], y).sum())

    return total


def mh_update_beta(state: SamplerState, rng: np.random.Generator) -> bool:
    """Random-walk update of the full beta vector on the Bernoulli terms."""

    proposal = state.beta_proposal
    candidate = proposal.propose(state.beta, rng)

    log_ratio = beta_log_density(state, candidate) - beta_log_density(state, state.beta)
    accepted = metropolis_accept(log_ratio, rng)
    if accepted:
        state.beta = candidate

    proposal.record(accepted, state.iteration, state.adapting)
    proposal.observe(state.beta, state.iteration, state.adapting)

    return accepted


def lambda_log_density(state: SamplerState, tau: np.ndarray) -> float:
    """Collapsed target of tau: the integrated U term plus the log-Jacobians."""

    propagator = build_propagator(*lambda_from_tau(tau), state.data.adjacency)

    return integrated_U_term(state.eta, propagator, state.priors) + float(
        log_jacobian(tau).sum()
    )


def mh_update_lambda(state: SamplerState, rng: np.random.Generator) -> np.ndarray:
    """Coordinate-wise random walk on tau_1, tau_2, tau_3 in that order."""

    flags = np.zeros(3, dtype=bool)
    current_log = lambda_log_density(state, state.tau)

    for j, proposal in enumerate(state.lambda_proposals):

        def log_density(value: float, j: int = j) -> float:
            tau = state.tau.copy()
            tau[j] = value
            lam = lambda_from_tau(tau)
            if not (np.abs(lam) < 1.0).all():
                return -np.inf
            return lambda_log_density(state, tau)

        scale = float(np.sqrt(proposal.step * proposal.covariance[0, 0]))
        value, current_log, accepted = metropolis_coordinate(
            float(state.tau[j]), current_log, log_density, scale, rng
        )
        state.tau[j] = value
        flags[j] = accepted

        proposal.record(accepted, state.iteration, state.adapting)

    return flags


def gibbs_update_K(state: SamplerState, rng: np.random.Generator) -> None:
    state.set_K(sample_K(state.eta[0], state.priors, rng))


def gibbs_update_U(state: SamplerState, rng: np.random.Generator) -> None:
    if state.data.T < 2:
        return

    state.set_U(sample_U(state.eta, state.propagator, state.priors, rng))
