"""Shared fixtures: a small simulated grid, its fit and seeded generators."""

from dataclasses import replace

import numpy as np
import pytest

from st_glmm_tools.config import (
    BasisConfig,
    ChainConfig,
    PriorConfig,
    RunConfig,
    SimConfig,
    SummaryConfig,
)
from st_glmm_tools.models import PosteriorSamples
from st_glmm_tools.sampler.archive import ChainArchive
from st_glmm_tools.sampler.commands import fit_dataset
from st_glmm_tools.sampler.initializer import InitialState, init_state
from st_glmm_tools.sampler.priors import PriorSpec
from st_glmm_tools.sampler.targets import ModelData
from st_glmm_tools.simulation.harness import SimulationResult, simulate_dataset


def small_basis_config() -> BasisConfig:
    return BasisConfig(counts=[(2, 2), (3, 3)], boundary_extension=False)


def small_run_config() -> RunConfig:
    """A 10 x 10 grid, three time points and a short chain.

    lambda3 = 0 keeps K - HKH' positive definite for any K.
    """

    basis = small_basis_config()

    return RunConfig(
        basis=basis,
        priors=PriorConfig(beta_prior_sd=10.0),
        chain=ChainConfig(iterations=60, burn_in=20, thin=2, seed=3, log_every=0),
        simulation=SimConfig(
            grid=(10, 10),
            T=3,
            lambdas=(0.4, 0.4, 0.0),
            mar_count=10,
            seed=7,
            basis=basis,
        ),
        summary=SummaryConfig(
            band_latitudes=[0.25, 0.55],
            band_half_width=0.1,
            hovmoller_half_bandwidth=0.05,
            hovmoller_bins=(0.0, 0.7, 0.1),
            reference_point=(0.5, 0.5),
            pixel_area=1.0,
        ),
    )


def make_samples(
    beta: np.ndarray,
    eta: np.ndarray,
    xi: np.ndarray,
    sizes: list[int],
    lam: np.ndarray | None = None,
    U: np.ndarray | None = None,
    sigma2_xi: float = 0.05,
    adjacency: np.ndarray | None = None,
) -> PosteriorSamples:
    """Posterior samples built by hand; eta is (draws, T, r), xi is (draws, N)."""

    D, _, r = eta.shape
    adjacency = np.zeros((0, r)) if adjacency is None else adjacency

    return PosteriorSamples(
        beta=beta,
        lam=np.zeros((D, 3)) if lam is None else lam,
        tau=np.zeros((D, 3)),
        K=np.tile(np.eye(r), (D, 1, 1)),
        U=np.tile(np.eye(r), (D, 1, 1)) if U is None else U,
        eta=eta,
        xi=xi,
        iterations=np.arange(1, D + 1),
        offsets=np.concatenate(([0], np.cumsum(sizes))).astype(int),
        adjacency=adjacency,
        sigma2_xi=sigma2_xi,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20231018)


@pytest.fixture(scope="session")
def run_config() -> RunConfig:
    return small_run_config()


@pytest.fixture(scope="session")
def simulation(run_config: RunConfig) -> SimulationResult:
    return simulate_dataset(run_config.simulation)


@pytest.fixture(scope="session")
def fitted(
    run_config: RunConfig, simulation: SimulationResult
) -> tuple[ChainArchive, list[PosteriorSamples]]:
    return fit_dataset(simulation.dataset, simulation.basis, run_config)


@pytest.fixture(scope="session")
def archive(fitted: tuple[ChainArchive, list[PosteriorSamples]]) -> ChainArchive:
    return fitted[0]


@pytest.fixture
def short_chain(run_config: RunConfig) -> ChainConfig:
    return replace(run_config.chain, iterations=30, burn_in=10, thin=1)


@pytest.fixture(scope="session")
def model_data(simulation: SimulationResult) -> ModelData:
    return ModelData.from_dataset(simulation.dataset, simulation.basis)


@pytest.fixture(scope="session")
def priors(run_config: RunConfig, model_data: ModelData) -> PriorSpec:
    return PriorSpec.from_config(run_config.priors, model_data.r)


@pytest.fixture(scope="session")
def initial(
    model_data: ModelData, priors: PriorSpec, run_config: RunConfig
) -> InitialState:
    return init_state(model_data, priors, run_config.chain)
