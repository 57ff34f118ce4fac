"""Common objects and functions for st_glmm_tools."""

import logging
import sys
from pathlib import Path
from typing import Optional

import click
import numpy as np
import typer

from st_glmm_tools.const import DEFAULT_OUTPUT_PATH, ExitCode
from st_glmm_tools.errors import StGlmmError
from st_glmm_tools.helpers import threads_from_env
from st_glmm_tools.models import CommonOptions
from st_glmm_tools.predictor.commands import app as predict_app
from st_glmm_tools.sampler.commands import app as fit_app
from st_glmm_tools.simulation.commands import app as simulate_app
from st_glmm_tools.summaries.commands import app as summarize_app
from st_glmm_tools.validation.commands import app as validate_app

LOG_FORMAT = "%(asctime)s %(levelname)s %(message)s"

app = typer.Typer()
app.add_typer(simulate_app, name="simulate")
app.add_typer(fit_app, name="fit")
app.add_typer(predict_app, name="predict")
app.add_typer(summarize_app, name="summarize")
app.add_typer(validate_app, name="validate")


@app.callback()
def common(
    ctx: typer.Context,
    output_path: Path = typer.Option(
        DEFAULT_OUTPUT_PATH, "--output-path", "-o", help="Path to the output directory."
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Verbose output."),
    threads: Optional[int] = typer.Option(
        None, "--threads", help="Worker count; defaults to ST_GLMM_THREADS or 1."
    ),
) -> None:
    """Bayesian spatio-temporal GLMM tools for binary gridded data."""

    logging.getLogger().setLevel(logging.DEBUG if verbose else logging.INFO)

    if threads is None:
        threads = threads_from_env()
    elif threads < 1:
        raise typer.BadParameter(f"must be at least 1: {threads}", param_hint="--threads")

    ctx.obj = CommonOptions(
        output_path=output_path,
        verbose=verbose,
        threads=threads,
    )


def cli_entry(argv: Optional[list[str]] = None) -> int:
    """Run the app and map errors onto exit codes."""

    try:
        result = app(args=argv, standalone_mode=False)
    except StGlmmError as error:
        logging.error(str(error))
        return int(error.exit_code)
    except (np.linalg.LinAlgError, FloatingPointError) as error:
        logging.error(f"Numerical failure: {error}")
        return int(ExitCode.NUMERICAL)
    except click.ClickException as error:
        error.show()
        return int(ExitCode.USAGE)
    except click.exceptions.Abort:
        return int(ExitCode.USAGE)
    except FileNotFoundError as error:
        logging.error(str(error))
        return int(ExitCode.USAGE)

    # --help and click's own exits return their code
    return result if isinstance(result, int) else int(ExitCode.SUCCESS)


def main() -> None:
    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)

    sys.exit(cli_entry())
