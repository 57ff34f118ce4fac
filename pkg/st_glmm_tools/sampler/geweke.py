"""Joint-distribution check of the sampler on a tiny model.

Marginal-conditional draws come straight from the prior and the forward
model. Successive-conditional draws alternate one sampler sweep with a fresh
draw of the data given the current latent state. A correct sampler leaves
both with the same distribution of the parameters.
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from st_glmm_tools.config import BasisConfig
from st_glmm_tools.const import RandomStream
from st_glmm_tools.errors import UsageError
from st_glmm_tools.geometry.basis import build_basis_matrix
from st_glmm_tools.helpers import stream_rng
from st_glmm_tools.model.core import build_propagator, inv_logit
from st_glmm_tools.sampler.chain import gibbs_sweep
from st_glmm_tools.sampler.priors import PriorSpec, inverse_wishart_draw
from st_glmm_tools.sampler.targets import ModelData, tau_from_lambda
from st_glmm_tools.sampler.updates import (
    AdaptiveProposal,
    ElementwiseProposal,
    SamplerState,
)
from st_glmm_tools.simulation.harness import simulate_latent

TINY_COUNTS = [(1, 1), (2, 1)]
TINY_SITES = 20
TINY_T = 2
TINY_SIGMA2_XI = 0.25
TINY_BETA_PRIOR_SD = 1.0
BATCHES = 25


@dataclass(frozen=True)
class GewekeModel:
    """Fixed design of the check: locations, covariates, basis and priors."""

    X: list[np.ndarray]
    S: list[np.ndarray]
    adjacency: np.ndarray
    priors: PriorSpec

    @property
    def T(self) -> int:
        return len(self.X)

    @property
    def p(self) -> int:
        return self.X[0].shape[1]

    @property
    def r(self) -> int:
        return self.S[0].shape[1]


@dataclass(frozen=True)
class PriorDraw:
    beta: np.ndarray
    lambdas: np.ndarray
    K: np.ndarray
    U: np.ndarray


@dataclass(frozen=True)
class GewekeResult:
    """Moments of both samplers and their z-scores, one entry per statistic."""

    names: list[str]
    forward_mean: np.ndarray
    forward_se: np.ndarray
    successive_mean: np.ndarray
    successive_se: np.ndarray

    @property
    def z_scores(self) -> np.ndarray:
        return (self.forward_mean - self.successive_mean) / np.sqrt(
            self.forward_se**2 + self.successive_se**2
        )

    def passed(self, limit: float = 4.0) -> bool:
        return bool((np.abs(self.z_scores) <= limit).all())

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "statistic": self.names,
                "forward_mean": self.forward_mean,
                "forward_se": self.forward_se,
                "successive_mean": self.successive_mean,
                "successive_se": self.successive_se,
                "z": self.z_scores,
            }
        )


def tiny_model(seed: int = 0) -> GewekeModel:
    """Twenty sites on the unit square, two time points, three basis functions."""

    rng = stream_rng(seed, RandomStream.SIMULATE, 0)
    coords = rng.random((TINY_SITES, 2))

    basis = (
        BasisConfig(counts=TINY_COUNTS, boundary_extension=False)
        .build()
        .standardize_on(coords)
    )
    S = build_basis_matrix(coords, basis)
    X = np.column_stack([np.ones(TINY_SITES), coords[:, 0] - 0.5])

    r = basis.r
    nu = r + 3.0
    Phi = (nu - r - 1.0) * 0.5 * np.eye(r)
    priors = PriorSpec(nu, Phi, nu, Phi, TINY_SIGMA2_XI, TINY_BETA_PRIOR_SD)

    return GewekeModel([X] * TINY_T, [S] * TINY_T, basis.adjacency, priors)


def draw_prior(model: GewekeModel, rng: np.random.Generator) -> PriorDraw:
    priors = model.priors
    assert priors.beta_prior_sd is not None

    return PriorDraw(
        beta=priors.beta_prior_sd * rng.standard_normal(model.p),
        lambdas=rng.uniform(-1.0, 1.0, 3),
        K=inverse_wishart_draw(priors.nu_K, priors.Phi_K, rng),
        U=inverse_wishart_draw(priors.nu_U, priors.Phi_U, rng),
    )


def draw_data(
    model: GewekeModel,
    beta: np.ndarray,
    eta: np.ndarray,
    xi: np.ndarray,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    """Bernoulli responses given the current latent state."""

    z = []
    offsets = np.concatenate(([0], np.cumsum([X_t.shape[0] for X_t in model.X])))
    for t in range(model.T):
        y_t = model.X[t] @ beta + model.S[t] @ eta[t] + xi[offsets[t] : offsets[t + 1]]
        z.append((rng.random(y_t.shape[0]) < inv_logit(y_t)).astype(float))

    return z


def parameter_statistics(beta: np.ndarray, lambdas: np.ndarray) -> np.ndarray:
    """First and second moments of beta and lambda."""

    return np.concatenate([beta, lambdas, beta**2, lambdas**2])


def statistic_names(p: int) -> list[str]:
    first = [f"beta_{j + 1}" for j in range(p)] + [f"lambda_{j + 1}" for j in range(3)]
    return first + [f"{name}^2" for name in first]


def batch_means_se(values: np.ndarray, batches: int = BATCHES) -> np.ndarray:
    """Standard error of column means from non-overlapping batch means."""

    size = values.shape[0] // batches
    if size < 1:
        raise UsageError(f"Need at least {batches} draws for batch means")

    means = values[: size * batches].reshape(batches, size, -1).mean(axis=1)

    return means.std(axis=0, ddof=1) / np.sqrt(batches)


def forward_statistics(
    model: GewekeModel, draws: int, rng: np.random.Generator
) -> np.ndarray:
    return np.stack(
        [
            parameter_statistics(prior.beta, prior.lambdas)
            for prior in (draw_prior(model, rng) for _ in range(draws))
        ]
    )


def _initial_sampler_state(
    model: GewekeModel, prior: PriorDraw, seed: int, rng: np.random.Generator
) -> SamplerState:
    propagator = build_propagator(*prior.lambdas, model.adjacency)
    latent, _ = simulate_latent(
        model.S,
        model.X,
        prior.beta,
        prior.K,
        propagator.H,
        prior.U,
        model.priors.sigma2_xi,
        model.T,
        rng,
    )
    xi = np.concatenate(latent.xi)
    z = draw_data(model, prior.beta, latent.eta, xi, rng)
    data = ModelData(z, model.X, model.S, model.adjacency)

    r, N = model.r, xi.shape[0]

    return SamplerState(
        data=data,
        priors=model.priors,
        beta=prior.beta.copy(),
        tau=tau_from_lambda(prior.lambdas),
        K=prior.K.copy(),
        U=prior.U.copy(),
        eta=latent.eta.copy(),
        xi=xi,
        beta_proposal=AdaptiveProposal(0.25 * np.eye(model.p), 0.0),
        lambda_proposals=[AdaptiveProposal(np.array([[1.0]]), 0.0) for _ in range(3)],
        eta_proposals=[AdaptiveProposal(0.2 * np.eye(r), 0.0) for _ in range(model.T)],
        xi_proposal=ElementwiseProposal(
            np.full(N, model.priors.sigma2_xi), np.zeros(N)
        ),
        seed=seed,
        adapting=False,
    )


def successive_statistics(
    model: GewekeModel, draws: int, seed: int, rng: np.random.Generator
) -> np.ndarray:
    """Alternate a sampler sweep with regeneration of the data."""

    state = _initial_sampler_state(model, draw_prior(model, rng), seed, rng)
    statistics = np.empty((draws, 2 * (model.p + 3)))

    for k in range(1, draws + 1):
        state.iteration = k
        gibbs_sweep(state, rng)

        z = draw_data(model, state.beta, state.eta, state.xi, rng)
        state.data = ModelData(z, model.X, model.S, model.adjacency)

        statistics[k - 1] = parameter_statistics(state.beta, state.lambdas)

        if k % 5_000 == 0:
            logging.debug(f"Successive-conditional sweep {k}/{draws}.")

    return statistics


def geweke_check(
    forward_draws: int = 20_000,
    successive_draws: int = 20_000,
    seed: int = 0,
    model: GewekeModel | None = None,
) -> GewekeResult:
    """Compare parameter moments of forward and successive-conditional draws."""

    model = model or tiny_model(seed)

    forward = forward_statistics(
        model, forward_draws, stream_rng(seed, RandomStream.SIMULATE, 1)
    )
    successive = successive_statistics(
        model, successive_draws, seed, stream_rng(seed, RandomStream.CHAIN, 1)
    )

    result = GewekeResult(
        names=statistic_names(model.p),
        forward_mean=forward.mean(axis=0),
        forward_se=forward.std(axis=0, ddof=1) / np.sqrt(forward_draws),
        successive_mean=successive.mean(axis=0),
        successive_se=batch_means_se(successive),
    )

    logging.info(
        f"Joint-distribution check: largest |z| {np.abs(result.z_scores).max():.2f}."
    )

    return result
