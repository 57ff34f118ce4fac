"""Commands for fitting the model"""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np
import typer

from st_glmm_tools.config import RunConfig
from st_glmm_tools.const import (
    ACCEPTANCE_CSV,
    CHAIN_DIR_PREFIX,
    DIAGNOSTICS_CSV,
    TRACE_CSV,
    Metric,
)
from st_glmm_tools.dataset import load_dataset, load_params
from st_glmm_tools.errors import UsageError
from st_glmm_tools.geometry.basis import BasisSystem, load_centers
from st_glmm_tools.model.core import build_propagator, chain_period_K
from st_glmm_tools.models import CommonOptions, ModelParams, PosteriorSamples, StDataset
from st_glmm_tools.sampler.archive import ChainArchive, load_archive, save_archive
from st_glmm_tools.sampler.chain import run_chain, run_chains
from st_glmm_tools.sampler.diagnostics import acceptance_frame, diagnostics, trace_frame
from st_glmm_tools.sampler.priors import PriorSpec
from st_glmm_tools.sampler.targets import ModelData

app = typer.Typer()


def observed_locations(dataset: StDataset) -> np.ndarray:
    """Distinct observed locations over all time points."""

    return np.unique(np.vstack(dataset.coords), axis=0)


def chained_plugin(previous: Path) -> tuple[np.ndarray, np.ndarray]:
    """Plug-in K and U for the next period from a previous period's archive."""

    archive = load_archive(previous)
    samples = archive.samples

    K_hat = samples.K.mean(axis=0)
    U_hat = samples.U.mean(axis=0)
    propagator = build_propagator(*samples.lam.mean(axis=0), samples.adjacency)

    logging.info(f"Chaining K from the previous period in {previous}.")

    return chain_period_K(K_hat, propagator, U_hat), U_hat


def fit_dataset(
    dataset: StDataset,
    basis: BasisSystem,
    config: RunConfig,
    fixed: ModelParams | None = None,
    plugin: tuple[np.ndarray, np.ndarray] | None = None,
    chains: int = 1,
    workers: int = 1,
) -> tuple[ChainArchive, list[PosteriorSamples]]:
    """Fit the model and return the pooled archive plus each chain's draws.

    The basis is standardized on the distinct observed locations unless it
    already carries frozen statistics.
    """

    if not basis.is_standardized:
        basis = basis.standardize_on(observed_locations(dataset))

    data = ModelData.from_dataset(dataset, basis)

    K_hat, U_hat = plugin if plugin is not None else (None, None)
    if K_hat is not None and K_hat.shape != (basis.r, basis.r):
        raise UsageError(
            f"Plug-in matrices are {K_hat.shape[0]}x{K_hat.shape[0]}, basis has r = {basis.r}"
        )
    priors = PriorSpec.from_config(config.priors, basis.r, K_hat, U_hat)

    if chains == 1:
        chain_samples = [run_chain(data, priors, config.chain, fixed=fixed)]
    else:
        chain_samples = run_chains(
            chains, data, priors, config.chain, fixed=fixed, workers=workers
        )

    pooled = PosteriorSamples.concatenate(chain_samples)
    if fixed is not None:
        priors = replace(priors, sigma2_xi=fixed.sigma2_xi)

    archive = ChainArchive(
        samples=pooled,
        basis=basis,
        priors=priors,
        layout=list(dataset.coords),
        seed=config.chain.seed,
        config=config.to_dict(),
    )

    return archive, chain_samples


def write_fit(
    directory: Path, archive: ChainArchive, chain_samples: list[PosteriorSamples]
) -> Path:
    """Write the pooled archive, per-chain archives and diagnostics tables."""

    save_archive(directory, archive)

    if len(chain_samples) > 1:
        for i, samples in enumerate(chain_samples):
            save_archive(
                directory / f"{CHAIN_DIR_PREFIX}{i + 1}", replace(archive, samples=samples)
            )

    trace_frame(archive.samples).to_csv(directory / TRACE_CSV, index=False)
    band = tuple(archive.config["chain"]["acceptance_band"])
    acceptance_frame(archive.samples, band).to_csv(  # type: ignore[arg-type]
        directory / ACCEPTANCE_CSV, index=False
    )

    if archive.samples.draws >= 2:
        report = diagnostics(
            archive.samples, chain_samples if len(chain_samples) > 1 else None
        )
        report.to_csv(directory / DIAGNOSTICS_CSV, index=False)
    else:
        logging.warning("Fewer than two retained draws; skipping diagnostics.")

    return directory


@app.callback(invoke_without_command=True)
def fit(
    ctx: typer.Context,
    data_path: Path = typer.Option(..., "--data", help="Dataset CSV."),
    centers_path: Optional[Path] = typer.Option(
        None, "--centers", help="Basis centers CSV (res,coord1,coord2)."
    ),
    config_path: Optional[Path] = typer.Option(
        None, "--config", help="Run configuration JSON."
    ),
    out_path: Optional[Path] = typer.Option(
        None, "--out", help="Chain archive directory."
    ),
    iterations: Optional[int] = typer.Option(None, "--iterations", help="Iterations."),
    burn_in: Optional[int] = typer.Option(None, "--burn-in", help="Burn-in iterations."),
    thin: Optional[int] = typer.Option(None, "--thin", help="Keep every n-th draw."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed."),
    sigma_xi: Optional[float] = typer.Option(
        None, "--sigma-xi", help="Plug-in fine-scale variance."
    ),
    fixed_params_path: Optional[Path] = typer.Option(
        None, "--fixed-params", help="Parameter JSON to pin; samples only eta and xi."
    ),
    chains: int = typer.Option(1, "--chains", help="Number of independent chains."),
    init_from: Optional[Path] = typer.Option(
        None, "--init-from", help="Archive of the previous period to chain K from."
    ),
    metric: Optional[Metric] = typer.Option(
        None, "--metric", help="Distance metric of the data and centers."
    ),
) -> None:
    """Fit the model to a dataset"""

    common_options: CommonOptions = ctx.obj

    config = RunConfig.load(config_path)
    if chains < 1:
        raise UsageError(f"--chains must be positive: {chains}")

    chain_overrides = {
        name: value
        for name, value in (
            ("iterations", iterations),
            ("burn_in", burn_in),
            ("thin", thin),
            ("seed", seed),
        )
        if value is not None
    }
    config = replace(
        config,
        chain=replace(config.chain, **chain_overrides, threads=common_options.threads),
    )
    if sigma_xi is not None:
        config = replace(config, priors=replace(config.priors, sigma2_xi=sigma_xi))

    metric = metric or config.basis.metric
    dataset = load_dataset(data_path, metric)

    if centers_path is not None:
        basis = load_centers(
            centers_path, metric, config.basis.apertures, config.basis.neighbors
        )
    elif metric != config.basis.metric:
        raise UsageError("A spherical fit needs --centers or basis.centers_path")
    else:
        basis = config.basis.build()

    fixed = (
        load_params(fixed_params_path, basis.adjacency)
        if fixed_params_path is not None
        else None
    )
    plugin = chained_plugin(init_from) if init_from is not None else None

    archive, chain_samples = fit_dataset(
        dataset,
        basis,
        config,
        fixed=fixed,
        plugin=plugin,
        chains=chains,
        workers=common_options.threads,
    )
    archive.config["data"] = str(data_path)

    out_path = out_path or common_options.chain_path
    write_fit(out_path, archive, chain_samples)

    rates = ", ".join(
        f"{name} {rate:.2f}"
        for name, rate in archive.samples.acceptance_rates().items()
        if not name.startswith("eta_")
    )
    logging.info(f"Acceptance after burn-in: {rates}")
