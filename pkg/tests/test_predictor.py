import numpy as np
import pytest

from conftest import make_samples
from st_glmm_tools.const import PREDICTION_COLUMNS, Scale
from st_glmm_tools.dataset import TargetSet
from st_glmm_tools.errors import UsageError
from st_glmm_tools.predictor.predict import (
    PredictionRequest,
    build_requests,
    forecast_one_step,
    match_observed,
    predict_new,
    predict_observed,
    predict_request,
    predict_targets,
    predict_z,
    summarize_draws,
)


def test_single_draw_without_fine_scale(rng):
    samples = make_samples(
        beta=np.array([[1.0, 2.0]]),
        eta=np.array([[[0.5, -1.0]]]),
        xi=np.zeros((1, 2)),
        sizes=[2],
        sigma2_xi=0.0,
    )
    X = np.array([[1.0, 0.0], [1.0, 1.0]])
    S = np.array([[1.0, 1.0], [0.0, 2.0]])

    y = predict_new(samples, X, S, 1, rng)

    np.testing.assert_allclose(y.draws, [[0.5, 1.0]])
    np.testing.assert_allclose(y.mean, [0.5, 1.0])
    np.testing.assert_allclose(y.var, 0.0)


def test_covariates_only(rng):
    samples = make_samples(
        beta=np.tile([2.0], (50, 1)),
        eta=np.zeros((50, 1, 2)),
        xi=np.zeros((50, 1)),
        sizes=[1],
        sigma2_xi=0.25,
    )

    y = predict_new(samples, np.ones((3, 1)), np.zeros((3, 2)), 1, rng)

    np.testing.assert_allclose(y.mean, 2.0)
    np.testing.assert_allclose(y.var, 0.25)


def test_observed_locations_reuse_stored_effects():
    samples = make_samples(
        beta=np.array([[0.0], [1.0]]),
        eta=np.zeros((2, 2, 2)),
        xi=np.array([[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]]),
        sizes=[1, 2],
    )

    y = predict_observed(samples, np.ones((1, 1)), np.zeros((1, 2)), 2, np.array([1]))

    np.testing.assert_allclose(y, [[0.3], [1.6]])


def test_observed_prediction_needs_overlap():
    samples = make_samples(np.zeros((1, 1)), np.zeros((1, 1, 2)), np.zeros((1, 1)), [1])

    with pytest.raises(UsageError):
        predict_observed(samples, np.ones((1, 1)), np.zeros((1, 2)), 1, np.array([-1]))


def test_z_predictions_at_zero(rng):
    z = predict_z(np.zeros((400, 3)), rng)

    np.testing.assert_allclose(z.mean, 0.5)
    np.testing.assert_allclose(z.var, 0.25)
    assert set(np.unique(z.draws)) <= {0.0, 1.0}


def test_z_predictions_saturate(rng):
    z = predict_z(np.full((10, 2), 60.0), rng)

    np.testing.assert_array_equal(z.draws, 1.0)
    assert np.isfinite(z.var).all()
    assert z.var.max() < 1e-20


def test_forecast_without_dynamics(rng):
    D = 5
    samples = make_samples(
        beta=np.tile([1.5], (D, 1)),
        eta=rng.standard_normal((D, 2, 2)),
        xi=np.zeros((D, 4)),
        sizes=[2, 2],
        U=np.tile(1e-12 * np.eye(2), (D, 1, 1)),
        sigma2_xi=0.0,
        adjacency=np.array([[1.0]]),
    )

    y = forecast_one_step(samples, np.ones((3, 1)), rng.standard_normal((3, 2)), rng)

    np.testing.assert_allclose(y.draws, 1.5, atol=1e-4)


def test_summary_columns():
    draws = np.arange(1.0, 6.0)[:, None]

    summary = summarize_draws(draws)

    assert summary.loc[0, "q50"] == 3.0
    assert summary.loc[0, "mean"] == 3.0
    assert summary.loc[0, "q05"] == pytest.approx(1.2)


def test_match_observed():
    observed = np.array([[0.0, 0.0], [0.5, 0.5]])
    coords = np.array([[0.5, 0.5], [0.2, 0.2]])

    np.testing.assert_array_equal(match_observed(coords, observed), [1, -1])


def test_forecast_requests_cannot_overlap():
    with pytest.raises(UsageError):
        PredictionRequest(
            t=2,
            coords=np.zeros((1, 2)),
            X=np.ones((1, 1)),
            S=np.zeros((1, 2)),
            overlap=np.array([0]),
            forecast=True,
        )


def grid_targets(simulation, times):
    coords = simulation.dataset.coords[0][:5]
    X = simulation.dataset.X[0][:5]
    return TargetSet(times=times, coords=[coords] * len(times), X=[X] * len(times))


def test_request_time_errors(archive, simulation):
    T = archive.T

    with pytest.raises(UsageError):
        build_requests(grid_targets(simulation, [T + 1]), archive, Scale.Y)
    with pytest.raises(UsageError):
        build_requests(grid_targets(simulation, [T]), archive, Scale.Y, forecast=True)


def test_request_covariate_count(archive, simulation):
    targets = grid_targets(simulation, [1])
    narrow = TargetSet(targets.times, targets.coords, [X[:, :1] for X in targets.X])

    with pytest.raises(UsageError):
        build_requests(narrow, archive, Scale.Y)


def test_observed_targets_are_matched(archive, simulation):
    (request,) = build_requests(grid_targets(simulation, [1]), archive, Scale.P)

    np.testing.assert_array_equal(request.overlap, np.arange(5))


@pytest.mark.parametrize("scale", list(Scale))
def test_prediction_table(archive, simulation, scale):
    requests = build_requests(grid_targets(simulation, [1, 2]), archive, scale)

    table = predict_targets(archive, requests, seed=4)

    assert list(table.columns) == PREDICTION_COLUMNS
    assert len(table) == 10
    assert (table["q05"] <= table["q95"]).all()
    if scale != Scale.Y:
        assert table["mean"].between(0.0, 1.0).all()


def test_predictions_are_reproducible(archive, simulation):
    (request,) = build_requests(
        grid_targets(simulation, [archive.T + 1]), archive, Scale.Y, forecast=True
    )

    first = predict_request(archive.samples, request, seed=9)
    second = predict_request(archive.samples, request, seed=9)

    assert first.equals(second)
