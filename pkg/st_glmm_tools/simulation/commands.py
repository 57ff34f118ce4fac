"""Commands for simulating datasets"""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Optional

import typer

from st_glmm_tools.config import RunConfig
from st_glmm_tools.const import (
    CENTERS_CSV,
    COVARIATE_INPUTS_CSV,
    DATASET_CSV,
    PARAMS_JSON,
    TRUTH_CSV,
)
from st_glmm_tools.dataset import save_dataset, save_params, save_truth
from st_glmm_tools.geometry.basis import save_centers
from st_glmm_tools.helpers import ensure_directory, write_manifest
from st_glmm_tools.models import CommonOptions
from st_glmm_tools.simulation.fixtures import polar_cap_fixture, save_covariate_inputs
from st_glmm_tools.simulation.harness import SimulationResult, simulate_dataset

app = typer.Typer()


def write_simulation(output_path: Path, result: SimulationResult) -> list[Path]:
    """Write dataset, truth, parameters and centers of a simulation."""

    ensure_directory(output_path)

    return [
        save_dataset(result.dataset, output_path / DATASET_CSV),
        save_truth(output_path / TRUTH_CSV, result.dataset.coords, result.y, result.p),
        save_params(output_path / PARAMS_JSON, result.params),
        save_centers(result.basis, output_path / CENTERS_CSV),
    ]


@app.callback(invoke_without_command=True)
def simulate(
    ctx: typer.Context,
    config_path: Optional[Path] = typer.Option(
        None, "--config", help="Run configuration JSON."
    ),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed."),
    polar: bool = typer.Option(
        False, "--polar", help="Emit the synthetic polar-cap fixture instead."
    ),
    out_path: Optional[Path] = typer.Option(None, "--out", help="Output directory."),
) -> None:
    """Simulate a binary spatio-temporal dataset"""

    common_options: CommonOptions = ctx.obj

    config = RunConfig.load(config_path)
    sim_config = config.simulation if seed is None else replace(config.simulation, seed=seed)

    out_path = out_path or common_options.simulation_path

    if polar:
        fixture = polar_cap_fixture(sim_config.seed)
        output_paths = write_simulation(out_path, fixture)
        output_paths.append(
            save_covariate_inputs(
                out_path / COVARIATE_INPUTS_CSV, fixture.dataset.coords, fixture.inputs
            )
        )
        manifest_config = {"polar": True, "seed": sim_config.seed}
    else:
        output_paths = write_simulation(out_path, simulate_dataset(sim_config))
        manifest_config = {"polar": False, "simulation": sim_config}

    write_manifest(out_path, sim_config.seed, manifest_config)

    for output_path in output_paths:
        logging.info(f"Wrote {output_path}")
