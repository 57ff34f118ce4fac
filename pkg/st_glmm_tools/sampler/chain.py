"""The Metropolis-within-Gibbs chain: sweeps, burn-in, thinning and fan-out."""

import logging
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from st_glmm_tools.config import ChainConfig
from st_glmm_tools.const import RandomStream
from st_glmm_tools.errors import ChainError, StGlmmError, UsageError
from st_glmm_tools.helpers import stream_rng
from st_glmm_tools.models import ModelParams, PosteriorSamples
from st_glmm_tools.sampler.initializer import InitialState, init_state
from st_glmm_tools.sampler.priors import PriorSpec
from st_glmm_tools.sampler.targets import ModelData, tau_from_lambda
from st_glmm_tools.sampler.updates import (
    AdaptiveProposal,
    ElementwiseProposal,
    SamplerState,
    gibbs_update_K,
    gibbs_update_U,
    mh_update_beta,
    mh_update_eta_block,
    mh_update_lambda,
    mh_update_xi_elements,
)

OPTIMAL_SCALE = 2.38**2


def _log_step(value: float | None, dim: int) -> float:
    return float(np.log(value if value is not None else OPTIMAL_SCALE / max(dim, 1)))


def build_sampler_state(
    data: ModelData,
    priors: PriorSpec,
    config: ChainConfig,
    initial: InitialState,
) -> SamplerState:
    p, r, N = data.p, data.r, int(data.offsets[-1])
    target = config.acceptance_target

    return SamplerState(
        data=data,
        priors=priors,
        beta=initial.beta.copy(),
        tau=tau_from_lambda(initial.lambdas),
        K=initial.K.copy(),
        U=initial.U.copy(),
        eta=initial.eta.copy(),
        xi=initial.xi.copy(),
        beta_proposal=AdaptiveProposal(
            initial.V_beta.copy(),
            _log_step(config.step_beta, p),
            adaptation_start=config.adaptation_start,
            target=target,
        ),
        lambda_proposals=[
            AdaptiveProposal(
                np.array([[v]]), _log_step(config.step_lambda, 1), target=target
            )
            for v in initial.V_lambda
        ],
        eta_proposals=[
            AdaptiveProposal(
                V.copy(),
                _log_step(config.step_eta, r),
                adaptation_start=config.adaptation_start,
                target=target,
            )
            for V in initial.V_eta
        ],
        xi_proposal=ElementwiseProposal(
            initial.V_xi.copy(),
            np.full(N, _log_step(config.step_xi, 1)),
            target=target,
        ),
        seed=config.seed,
        adapting=config.adapt,
    )


def gibbs_sweep(
    state: SamplerState,
    rng: np.random.Generator,
    executor: Executor | None = None,
    fixed_parameter_mode: bool = False,
) -> dict[str, bool]:
    """One iteration: eta blocks, xi elements, beta, lambda, then K and U.

    lambda is drawn with K and U integrated out, so drawing U right after
    it completes an exact block update of (lambda, U).
    """

    flags: dict[str, bool] = {}

    for t in range(1, state.data.T + 1):
        flags[f"eta_{t}"] = mh_update_eta_block(state, t, rng)

    mh_update_xi_elements(state, executor)

    if fixed_parameter_mode:
        return flags

    flags["beta"] = mh_update_beta(state, rng)
    for j, accepted in enumerate(mh_update_lambda(state, rng)):
        flags[f"lambda{j + 1}"] = bool(accepted)

    gibbs_update_K(state, rng)
    gibbs_update_U(state, rng)

    return flags


def _progress(state: SamplerState) -> str:
    rates = []
    for name, proposal in state.proposals().items():
        if proposal.proposed and not name.startswith("eta_"):
            rates.append(f"{name} {proposal.accepted / proposal.proposed:.2f}")

    eta_rates = [
        p.accepted / p.proposed for p in state.eta_proposals if p.proposed
    ]
    if eta_rates:
        rates.append(f"eta {np.mean(eta_rates):.2f}")

    return ", ".join(rates)


def run_chain(
    data: ModelData,
    priors: PriorSpec,
    config: ChainConfig,
    initial: InitialState | None = None,
    fixed: ModelParams | None = None,
) -> PosteriorSamples:
    """Run one chain and keep every thin-th post-burn-in draw."""

    if fixed is not None:
        config = replace(config, fixed_parameter_mode=True)
        priors = replace(priors, sigma2_xi=fixed.sigma2_xi)
    elif config.fixed_parameter_mode:
        raise UsageError("fixed_parameter_mode needs pinned parameters")

    if initial is None:
        initial = init_state(data, priors, config, fixed)

    state = build_sampler_state(data, priors, config, initial)
    rng = stream_rng(config.seed, RandomStream.CHAIN)

    T, r, p, N = data.T, data.r, data.p, int(data.offsets[-1])
    D = config.retained

    beta = np.empty((D, p))
    tau = np.empty((D, 3))
    lam = np.empty((D, 3))
    K = np.empty((D, r, r))
    U = np.empty((D, r, r))
    eta = np.empty((D, T, r))
    xi = np.empty((D, N))
    iterations = np.empty(D, dtype=int)
    flag_names = ["beta", "lambda1", "lambda2", "lambda3"]
    accept_flags = {name: np.zeros(D, dtype=int) for name in flag_names}

    executor = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    logging.info(
        f"Running chain: {config.iterations} iterations, burn-in {config.burn_in}, "
        + f"thin {config.thin}, seed {config.seed}."
    )

    kept = 0
    try:
        for k in range(1, config.iterations + 1):
            state.iteration = k
            state.adapting = config.adapt and k <= config.burn_in

            try:
                flags = gibbs_sweep(
                    state, rng, executor, config.fixed_parameter_mode
                )
            except (StGlmmError, ArithmeticError, ValueError) as error:
                raise ChainError(k, error) from error

            if k == config.burn_in:
                logging.info(f"Burn-in acceptance: {_progress(state)}")
                for proposal in state.proposals().values():
                    proposal.reset_counters()

            if config.is_retained(k):
                beta[kept] = state.beta
                tau[kept] = state.tau
                lam[kept] = (
                    initial.lambdas if config.fixed_parameter_mode else state.lambdas
                )
                K[kept] = state.K
                U[kept] = state.U
                eta[kept] = state.eta
                xi[kept] = state.xi
                iterations[kept] = k
                for name in flag_names:
                    accept_flags[name][kept] = int(flags.get(name, False))
                kept += 1

            if config.log_every and k % config.log_every == 0:
                logging.info(
                    f"Iteration {k}/{config.iterations}: acceptance {_progress(state)}"
                )
    finally:
        if executor is not None:
            executor.shutdown()

    acceptance = {
        name: (proposal.accepted, proposal.proposed)
        for name, proposal in state.proposals().items()
    }

    return PosteriorSamples(
        beta=beta,
        lam=lam,
        tau=tau,
        K=K,
        U=U,
        eta=eta,
        xi=xi,
        iterations=iterations,
        offsets=data.offsets,
        adjacency=data.adjacency,
        sigma2_xi=priors.sigma2_xi,
        acceptance=acceptance,
        accept_flags=accept_flags,
    )


def chain_seeds(seed: int, n: int) -> list[int]:
    """Independent seeds for n chains spawned from one root seed."""

    return [
        int(child.generate_state(1)[0])
        for child in np.random.SeedSequence(seed).spawn(n)
    ]


def _run_chain_job(
    job: tuple[ModelData, PriorSpec, ChainConfig, InitialState, ModelParams | None]
) -> PosteriorSamples:
    data, priors, config, initial, fixed = job
    return run_chain(data, priors, config, initial, fixed)


def run_chains(
    n: int,
    data: ModelData,
    priors: PriorSpec,
    config: ChainConfig,
    fixed: ModelParams | None = None,
    workers: int = 1,
) -> list[PosteriorSamples]:
    """Run n independently seeded chains from a shared starting point."""

    if n < 1:
        raise UsageError(f"Number of chains must be positive: {n}")

    if fixed is not None:
        priors = replace(priors, sigma2_xi=fixed.sigma2_xi)
    initial = init_state(data, priors, config, fixed)

    jobs = [
        (data, priors, replace(config, seed=seed, threads=1), initial, fixed)
        for seed in chain_seeds(config.seed, n)
    ]

    if workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=min(workers, n)) as pool:
            return list(pool.map(_run_chain_job, jobs))

    return [_run_chain_job(job) for job in jobs]
