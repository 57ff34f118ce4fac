"""Commands for predicting and forecasting"""

import logging
from pathlib import Path
from typing import Optional

import typer

from st_glmm_tools.const import PREDICTIONS_CSV, Scale
from st_glmm_tools.dataset import load_targets
from st_glmm_tools.helpers import ensure_directory, write_manifest
from st_glmm_tools.models import CommonOptions
from st_glmm_tools.predictor.predict import build_requests, predict_targets
from st_glmm_tools.sampler.archive import load_archive

app = typer.Typer()


@app.callback(invoke_without_command=True)
def predict(
    ctx: typer.Context,
    archive_path: Optional[Path] = typer.Option(
        None, "--archive", help="Chain archive directory."
    ),
    targets_path: Path = typer.Option(
        ..., "--targets", help="Targets CSV (t,coord1,coord2,cov1..covp)."
    ),
    scale: Scale = typer.Option(Scale.Y, "--scale", help="Prediction scale."),
    forecast: bool = typer.Option(
        False, "--forecast", help="Forecast one step past the last fitted time."
    ),
    seed: Optional[int] = typer.Option(
        None, "--seed", help="Random seed; defaults to the archive seed."
    ),
    out_path: Optional[Path] = typer.Option(
        None, "--out", help="Output directory."
    ),
) -> None:
    """Predict at target locations from a chain archive"""

    common_options: CommonOptions = ctx.obj

    archive = load_archive(archive_path or common_options.chain_path)
    targets = load_targets(targets_path)

    seed = archive.seed if seed is None else seed
    requests = build_requests(targets, archive, scale, forecast)
    predictions = predict_targets(archive, requests, seed)

    out_path = ensure_directory(out_path or common_options.predictions_path)
    predictions.to_csv(out_path / PREDICTIONS_CSV, index=False)

    write_manifest(
        out_path,
        seed,
        {
            "archive": archive.samples.manifest.get("config_hash"),
            "targets": str(targets_path),
            "scale": scale,
            "forecast": forecast,
        },
    )

    logging.info(f"Wrote {len(predictions)} predictions to {out_path / PREDICTIONS_CSV}")
