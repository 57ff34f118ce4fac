import json

import numpy as np
import pandas as pd
import pytest

from conftest import small_run_config
from st_glmm_tools.commands import cli_entry
from st_glmm_tools.const import (
    DATASET_CSV,
    MANIFEST_JSON,
    PARAMETERS_CSV,
    PREDICTION_COLUMNS,
    PREDICTIONS_CSV,
    RMSPE_CSV,
    SCALARS_CSV,
    TRUTH_CSV,
    XI_BIN,
    ExitCode,
    SummaryReport,
)
from st_glmm_tools.dataset import TargetSet, load_dataset, save_targets


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(small_run_config().to_dict()))
    return path


def run(*args) -> int:
    return cli_entry([str(arg) for arg in args])


def test_help():
    assert run("--help") == ExitCode.SUCCESS
    assert run("fit", "--help") == ExitCode.SUCCESS


def test_unknown_command():
    assert run("sample") == ExitCode.USAGE


def test_invalid_thread_count(tmp_path, config_path):
    assert run("--threads", 0, "simulate", "--config", config_path) == ExitCode.USAGE


def test_missing_input(tmp_path):
    assert run("fit", "--data", tmp_path / "missing.csv") == ExitCode.USAGE


@pytest.mark.parametrize(
    "error", [np.linalg.LinAlgError("matrix is singular"), FloatingPointError("overflow")]
)
def test_numerical_failure_exit_code(monkeypatch, tmp_path, config_path, error):
    def fail(*args, **kwargs):
        raise error

    monkeypatch.setattr("st_glmm_tools.simulation.commands.simulate_dataset", fail)

    assert run("simulate", "--config", config_path, "--out", tmp_path) == ExitCode.NUMERICAL


def test_simulation_is_reproducible(tmp_path, config_path):
    for name in ("first", "second"):
        assert run("simulate", "--config", config_path, "--seed", 5, "--out", tmp_path / name) == 0

    for file_name in (DATASET_CSV, TRUTH_CSV):
        first = (tmp_path / "first" / file_name).read_bytes()
        assert first == (tmp_path / "second" / file_name).read_bytes()

    manifest = json.loads((tmp_path / "first" / MANIFEST_JSON).read_text())
    assert manifest["seed"] == 5


def output_bytes(directory) -> dict[str, bytes]:
    return {
        str(path.relative_to(directory)): path.read_bytes()
        for path in sorted(directory.rglob("*"))
        if path.is_file()
    }


def test_fit_predict_summarize_are_reproducible(tmp_path, config_path):
    simulation = tmp_path / "simulation"
    assert run("simulate", "--config", config_path, "--out", simulation) == 0
    data = simulation / DATASET_CSV
    dataset = load_dataset(data)
    targets = save_targets(
        TargetSet([2], [dataset.coords[1][:5]], [dataset.X[1][:5]]),
        tmp_path / "targets.csv",
    )

    for name in ("first", "second"):
        chain = tmp_path / name / "chain"
        assert run("fit", "--data", data, "--config", config_path, "--seed", 9, "--out", chain) == 0
        assert (
            run(
                "predict",
                "--archive",
                chain,
                "--targets",
                targets,
                "--scale",
                "z",
                "--out",
                tmp_path / name / "predictions",
            )
            == 0
        )
        assert (
            run(
                "summarize",
                "--archive",
                chain,
                "--data",
                data,
                "--config",
                config_path,
                "--out",
                tmp_path / name / "summaries",
            )
            == 0
        )

    first, second = output_bytes(tmp_path / "first"), output_bytes(tmp_path / "second")
    for expected in (f"chain/{XI_BIN}", f"chain/{SCALARS_CSV}", f"predictions/{PREDICTIONS_CSV}"):
        assert expected in first
    assert any(name.startswith("summaries/") for name in first)
    assert first.keys() == second.keys()
    for name, content in first.items():
        assert content == second[name], name


def test_schema_error_exit_code(tmp_path, config_path):
    data = tmp_path / "data.csv"
    data.write_text("t,coord1,coord2,z,cov1\n1,0.1,0.2,3,1.0\n")

    assert run("fit", "--data", data, "--config", config_path) == ExitCode.USAGE


def test_fit_predict_summarize(tmp_path, config_path):
    simulation, chain = tmp_path / "simulation", tmp_path / "chain"
    data = simulation / DATASET_CSV

    assert run("simulate", "--config", config_path, "--out", simulation) == 0
    assert run("fit", "--data", data, "--config", config_path, "--out", chain) == 0
    assert (chain / SCALARS_CSV).is_file()
    assert (chain / XI_BIN).is_file()

    dataset = load_dataset(data)
    targets = save_targets(
        TargetSet([1, 3], [dataset.coords[0][:4]] * 2, [dataset.X[0][:4]] * 2),
        tmp_path / "targets.csv",
    )
    predictions = tmp_path / "predictions"
    assert (
        run(
            "predict",
            "--archive",
            chain,
            "--targets",
            targets,
            "--scale",
            "p",
            "--out",
            predictions,
        )
        == 0
    )
    table = pd.read_csv(predictions / PREDICTIONS_CSV)
    assert list(table.columns) == PREDICTION_COLUMNS
    assert len(table) == 8
    assert table["mean"].between(0.0, 1.0).all()

    summaries = tmp_path / "summaries"
    assert (
        run(
            "summarize",
            "--archive",
            chain,
            "--data",
            data,
            "--config",
            config_path,
            "--out",
            summaries,
            "accuracy",
            "extent",
        )
        == 0
    )
    assert (summaries / SummaryReport.ACCURACY.file_name).is_file()
    assert (summaries / SummaryReport.EXTENT.file_name).is_file()
    assert not (summaries / SummaryReport.BANDS.file_name).exists()


def test_forecast_past_the_fit(tmp_path, config_path):
    simulation, chain = tmp_path / "simulation", tmp_path / "chain"
    assert run("simulate", "--config", config_path, "--out", simulation) == 0
    assert (
        run("fit", "--data", simulation / DATASET_CSV, "--config", config_path, "--out", chain)
        == 0
    )

    targets = save_targets(
        TargetSet([4], [np.array([[0.5, 0.5]])], [np.array([[1.0, 0.3]])]),
        tmp_path / "targets.csv",
    )

    assert run("predict", "--archive", chain, "--targets", targets) == ExitCode.USAGE
    assert (
        run(
            "predict",
            "--archive",
            chain,
            "--targets",
            targets,
            "--forecast",
            "--out",
            tmp_path / "forecast",
        )
        == 0
    )


def test_validate(tmp_path, config_path):
    out = tmp_path / "validation"

    assert run("validate", "--config", config_path, "--seed", 11, "--keep-data", "--out", out) == 0

    rmspe = pd.read_csv(out / RMSPE_CSV)
    assert list(rmspe["model"]) == ["BHM"]
    assert len(pd.read_csv(out / PARAMETERS_CSV)) == 5
    assert (out / "simulation" / DATASET_CSV).is_file()
    assert json.loads((out / MANIFEST_JSON).read_text())["seed"] == 11
