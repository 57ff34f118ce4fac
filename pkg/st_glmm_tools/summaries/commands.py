"""Commands for summarizing a fit"""

import logging
from pathlib import Path
from typing import Annotated, List, Optional

import typer

from st_glmm_tools.config import RunConfig
from st_glmm_tools.const import SummaryReport
from st_glmm_tools.dataset import load_dataset, load_mask, load_params
from st_glmm_tools.helpers import ensure_directory, write_manifest
from st_glmm_tools.models import CommonOptions
from st_glmm_tools.sampler.archive import load_archive
from st_glmm_tools.summaries.functionals import parameter_truth
from st_glmm_tools.summaries.reports import REPORTS, SummaryInputs

app = typer.Typer()


@app.callback(invoke_without_command=True)
def summarize(
    ctx: typer.Context,
    archive_path: Optional[Path] = typer.Option(
        None, "--archive", help="Chain archive directory."
    ),
    data_path: Path = typer.Option(..., "--data", help="Dataset CSV of the fit."),
    config_path: Optional[Path] = typer.Option(
        None, "--config", help="Run configuration JSON."
    ),
    mask_path: Optional[Path] = typer.Option(
        None, "--mask", help="CSV of location indices to include in Hovmoller bins."
    ),
    truth_path: Optional[Path] = typer.Option(
        None, "--truth-params", help="Parameter JSON for the truth column."
    ),
    out_path: Optional[Path] = typer.Option(None, "--out", help="Output directory."),
    reports: Annotated[
        Optional[List[SummaryReport]],
        typer.Argument(help="Reports to write; all when omitted."),
    ] = None,
) -> None:
    """Write summary reports"""

    common_options: CommonOptions = ctx.obj

    config = RunConfig.load(config_path)
    archive = load_archive(archive_path or common_options.chain_path)
    dataset = load_dataset(data_path, archive.basis.metric)

    truth = (
        parameter_truth(load_params(truth_path, archive.basis.adjacency))
        if truth_path is not None
        else None
    )

    inputs = SummaryInputs(
        archive=archive,
        dataset=dataset,
        config=config.summary,
        mask=load_mask(mask_path) if mask_path is not None else None,
        truth=truth,
    )

    out_path = ensure_directory(out_path or common_options.summaries_path)

    output_paths: list[Path] = []
    for report in reports or list(SummaryReport):
        logging.info(f"Computing {report.value} report...")
        output_paths.extend(REPORTS[report](inputs).export(out_path))

    write_manifest(
        out_path,
        archive.seed,
        {
            "archive": archive.samples.manifest.get("config_hash"),
            "data": str(data_path),
            "summary": config.summary,
            "reports": [report.value for report in reports or list(SummaryReport)],
        },
    )

    logging.info(f"Wrote {len(output_paths)} report tables to {out_path}")
