"""Commands for the simulation study"""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Optional

import typer

from st_glmm_tools.config import RunConfig
from st_glmm_tools.const import PARAMETERS_CSV, RMSPE_CSV, SENSITIVITY_CSV
from st_glmm_tools.helpers import ensure_directory, write_manifest
from st_glmm_tools.models import CommonOptions
from st_glmm_tools.simulation.commands import write_simulation
from st_glmm_tools.validation.validate import validate_run

app = typer.Typer()


@app.callback(invoke_without_command=True)
def validate(
    ctx: typer.Context,
    config_path: Optional[Path] = typer.Option(
        None, "--config", help="Run configuration JSON."
    ),
    seed: Optional[int] = typer.Option(
        None, "--seed", help="Seed of both the simulation and the chain."
    ),
    fixed_true: bool = typer.Option(
        False, "--fixed-true", help="Add a row with all parameters pinned at the truth."
    ),
    sweep: bool = typer.Option(
        False, "--sweep", help="Refit over a grid of plug-in fine-scale variances."
    ),
    keep_data: bool = typer.Option(
        False, "--keep-data", help="Also write the simulated dataset and truth."
    ),
    out_path: Optional[Path] = typer.Option(None, "--out", help="Output directory."),
) -> None:
    """Run the simulation study and score predictions"""

    common_options: CommonOptions = ctx.obj

    config = RunConfig.load(config_path)
    config = replace(config, chain=replace(config.chain, threads=common_options.threads))
    if seed is not None:
        config = replace(
            config,
            simulation=replace(config.simulation, seed=seed),
            chain=replace(config.chain, seed=seed),
        )

    report = validate_run(
        config, fixed_true=fixed_true, sweep=sweep, workers=common_options.threads
    )

    out_path = ensure_directory(out_path or common_options.validation_path)

    report.rmspe.to_csv(out_path / RMSPE_CSV, index=False, na_rep="NA")
    report.parameters.to_csv(out_path / PARAMETERS_CSV, index=False)
    if report.sensitivity is not None:
        report.sensitivity.to_csv(out_path / SENSITIVITY_CSV, index=False, na_rep="NA")
    if keep_data:
        write_simulation(out_path / "simulation", report.simulation)

    write_manifest(
        out_path,
        config.simulation.seed,
        config,
        fixed_true=fixed_true,
        sweep=sweep,
    )

    for row in report.rmspe.itertuples(index=False):
        logging.info(
            f"{row.model}: MBD y {row.MBD_y:.3f}, MAR y {row.MAR_y:.3f}, "
            + f"forecast y {row.forecast_y:.3f}"
        )
