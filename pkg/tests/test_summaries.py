import numpy as np
import pytest

from st_glmm_tools.const import Metric, SummaryReport
from st_glmm_tools.errors import UsageError
from st_glmm_tools.summaries.base_report import read_report
from st_glmm_tools.summaries.functionals import (
    BandSpec,
    HovmollerSpec,
    TransitionProbabilities,
    band_stats,
    classification_accuracy,
    extent_summary,
    hovmoller,
    level_crossing,
    max_lag,
    parameter_summary,
    parameter_truth,
    sea_ice_extent,
    temporal_semivariogram,
    transition_classification_rates,
    transition_probabilities,
)
from st_glmm_tools.summaries.reports import REPORTS, SummaryInputs


def test_band_of_a_constant_field():
    stats = band_stats(np.full(4, 0.7), np.array([70.0, 70.2, 69.9, 70.4]), BandSpec(70.0))

    assert stats.count == 4
    assert {stats.min, stats.q1, stats.median, stats.q3, stats.max} == {0.7}
    assert stats.mean == pytest.approx(0.7)


def test_band_of_five_values():
    lat = np.array([70.0, 70.1, 69.8, 75.0, 70.3, 69.6])
    values = np.array([5.0, 1.0, 3.0, 100.0, 2.0, 4.0])

    stats = band_stats(values, lat, BandSpec(70.0))

    assert stats.count == 5
    assert stats.median == 3.0
    assert stats.mean == 3.0
    assert (stats.q1, stats.q3) == (2.0, 4.0)


def test_band_matches_a_sort_oracle(rng):
    values = rng.random(101)
    lat = np.full(101, 60.0)

    stats = band_stats(values, lat, BandSpec(60.0))

    ordered = np.sort(values)
    assert stats.min == ordered[0]
    assert stats.median == ordered[50]
    assert stats.q1 == ordered[25]
    assert stats.max == ordered[-1]


def test_band_is_open_at_the_edges():
    stats = band_stats(np.ones(2), np.array([69.5, 70.5]), BandSpec(70.0))

    assert stats.empty
    assert np.isnan(stats.mean)


def test_band_width_must_be_positive():
    with pytest.raises(UsageError):
        BandSpec(70.0, 0.0)


def planar_spec(**kwargs) -> HovmollerSpec:
    return HovmollerSpec(
        bin_centers=np.array([0.1, 0.3, 0.5]),
        reference=(0.0, 0.0),
        half_bandwidth=0.1,
        metric=Metric.PLANAR,
        **kwargs,
    )


def test_hovmoller_of_a_constant_field():
    coords = np.column_stack([np.linspace(0.01, 0.59, 30), np.zeros(30)])

    result = hovmoller([np.full(30, 0.4)] * 2, [coords] * 2, planar_spec(), (0.9, 0.5))

    np.testing.assert_allclose(result.matrix, 0.4)
    assert np.isnan(result.crossings[0.5]).all()


def test_hovmoller_of_the_distance_field():
    x = np.linspace(0.0, 0.6, 601)
    coords = np.column_stack([x, np.zeros_like(x)])

    result = hovmoller([x], [coords], planar_spec())

    np.testing.assert_allclose(result.matrix[:, 0], [0.1, 0.3, 0.5], atol=1e-3)


def test_hovmoller_empty_bins():
    coords = np.array([[0.05, 0.0], [0.5, 0.0]])

    result = hovmoller([np.array([1.0, 0.0])], [coords], planar_spec())

    assert np.isnan(result.matrix[1, 0])
    assert result.matrix[0, 0] == 1.0


def test_hovmoller_mask():
    coords = np.array([[0.05, 0.0], [0.1, 0.0], [0.5, 0.0]])

    result = hovmoller([np.array([1.0, 3.0, 2.0])], [coords], planar_spec(mask=np.array([1])))

    assert result.matrix[0, 0] == 3.0
    assert np.isnan(result.matrix[2, 0])


def test_hovmoller_bins_must_increase():
    with pytest.raises(UsageError):
        HovmollerSpec(bin_centers=np.array([1.0, 0.5]))


def test_leftmost_level_crossing():
    x = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    values = np.array([1.0, 0.8, 0.4, 0.8, 0.2])

    assert level_crossing(x, values, 0.6) == pytest.approx(1.5)
    assert np.isnan(level_crossing(x, values, 2.0))


def test_constant_field_on_the_level_has_no_crossing():
    x = np.array([0.0, 1.0, 2.0])

    assert np.isnan(level_crossing(x, np.full(3, 0.5), 0.5))
    assert np.isnan(level_crossing(x, np.array([0.5, np.nan, 0.5]), 0.5))
    assert level_crossing(x, np.array([0.5, 0.5, 0.2]), 0.5) == 0.0


def test_hovmoller_mask_rejects_negative_indices():
    with pytest.raises(UsageError):
        planar_spec(mask=np.array([0, -1]))


def test_crossing_skips_missing_bins():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    values = np.array([1.0, np.nan, 0.8, 0.0])

    assert level_crossing(x, values, 0.4) == pytest.approx(2.5)


def test_semivariogram_without_temporal_change(rng):
    delta = np.repeat(rng.standard_normal((3, 1, 4)), 6, axis=1)

    result = temporal_semivariogram(delta, np.full(4, 70.0), BandSpec(70.0))

    np.testing.assert_allclose(result.draws, 0.0)


def test_semivariogram_of_a_linear_drift():
    delta = np.broadcast_to(np.arange(1.0, 11.0)[None, :, None], (2, 10, 3))

    result = temporal_semivariogram(delta, np.full(3, 70.0), BandSpec(70.0))

    np.testing.assert_array_equal(result.lags, [1, 2, 3, 4, 5])
    np.testing.assert_allclose(result.draws[0], 0.5 * result.lags**2)
    assert list(result.summary()["median"]) == list(0.5 * result.lags**2)


def test_semivariogram_ignores_a_static_field(rng):
    delta = rng.standard_normal((2, 6, 5))
    shifted = delta + rng.standard_normal(5)[None, None, :]
    lat = np.full(5, 70.0)

    first = temporal_semivariogram(delta, lat, BandSpec(70.0))
    second = temporal_semivariogram(shifted, lat, BandSpec(70.0))

    np.testing.assert_allclose(first.draws, second.draws)


def test_semivariogram_window_and_band():
    with pytest.raises(UsageError):
        temporal_semivariogram(np.zeros((1, 4, 2)), np.full(2, 70.0), BandSpec(70.0), 1)
    with pytest.raises(UsageError):
        temporal_semivariogram(np.zeros((1, 4, 2)), np.full(2, 50.0), BandSpec(70.0))


def test_max_lag():
    assert max_lag(10) == 5
    assert max_lag(2) == 1
    assert max_lag(7) == 3


def test_classification_accuracy():
    z = [np.ones(4, dtype=int)]

    assert classification_accuracy([np.full(4, 0.2)], z)[0] == 1.0
    assert classification_accuracy([np.full(4, 0.1)], z)[0] == 0.0
    assert classification_accuracy([np.full(4, 0.15)], [np.zeros(4, dtype=int)])[0] == 1.0


def test_transition_probability_by_counting():
    p_t = np.array([[0.5], [0.2], [0.1], [0.05]])
    p_next = np.array([[0.1], [0.5], [0.9], [0.9]])

    result = transition_probabilities(p_t, p_next)

    np.testing.assert_allclose(result.ice_to_water, [0.5])
    np.testing.assert_allclose(result.water_to_ice, [1.0])


def test_transition_probability_undefined():
    result = transition_probabilities(np.full((3, 2), 0.05), np.full((3, 2), 0.5))

    assert not result.ice_to_water_defined.any()
    np.testing.assert_allclose(result.water_to_ice, 1.0)


def test_transitions_match_a_counting_oracle(rng):
    p_t, p_next = rng.random((50, 6)), rng.random((50, 6))

    result = transition_probabilities(p_t, p_next, 0.4)

    for s in range(6):
        ice = p_t[:, s] >= 0.4
        expected = (ice & (p_next[:, s] < 0.4)).sum() / ice.sum()
        assert result.ice_to_water[s] == pytest.approx(expected)


def test_perfect_transition_detection():
    result = transition_probabilities(
        np.array([[0.9, 0.0, 0.9]]), np.array([[0.0, 0.9, 0.9]])
    )

    rates = transition_classification_rates(
        result, np.array([1, 0, 1]), np.array([0, 1, 1])
    )

    assert (rates.ice_to_water, rates.ice_to_water_count) == (1.0, 1)
    assert (rates.water_to_ice, rates.water_to_ice_count) == (1.0, 1)


def test_no_observed_transitions():
    result = transition_probabilities(np.full((2, 3), 0.9), np.full((2, 3), 0.9))

    rates = transition_classification_rates(result, np.ones(3), np.ones(3))

    assert np.isnan(rates.ice_to_water)
    assert rates.ice_to_water_count == 0


def test_undefined_probabilities_are_not_detections():
    result = transition_probabilities(np.full((2, 1), 0.05), np.full((2, 1), 0.05))

    rates = transition_classification_rates(result, np.array([1]), np.array([0]))

    assert rates.ice_to_water == 0.0


def test_extent():
    p = np.array([[0.1, 0.2, 0.9], [0.15, 0.0, 0.0]])

    np.testing.assert_allclose(sea_ice_extent(p, pixel_area=625.0), [1250.0, 625.0])

    summary = extent_summary(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert list(summary["mean"]) == [2.0, 3.0]


def test_parameter_summary(fitted, simulation):
    (samples,) = fitted[1]

    table = parameter_summary(samples, parameter_truth(simulation.params))

    assert list(table["parameter"]) == ["beta_1", "beta_2", "lambda_1", "lambda_2", "lambda_3"]
    assert (table["lower"] <= table["upper"]).all()
    assert table.loc[0, "truth"] == simulation.params.beta[0]


@pytest.fixture
def inputs(archive, simulation, run_config):
    return SummaryInputs(
        archive,
        simulation.dataset,
        run_config.summary,
        truth=parameter_truth(simulation.params),
    )


@pytest.mark.parametrize("report", list(SummaryReport))
def test_report_export(tmp_path, inputs, report):
    paths = REPORTS[report](inputs).export(tmp_path)

    assert tmp_path / report.file_name in paths
    table = read_report(tmp_path / report.file_name)
    assert len(table) > 0
    assert (tmp_path / report.file_name).read_text().startswith(f"# report: {report.value}")


def test_accuracy_report_values(inputs):
    (table,) = REPORTS[SummaryReport.ACCURACY](inputs).compute().values()

    assert table["accuracy"].between(0.0, 1.0).all()
    assert list(table["t"]) == [1, 2, 3]


def test_inputs_must_match_the_archive(archive, simulation, run_config):
    with pytest.raises(UsageError):
        SummaryInputs(archive, simulation.dataset.head(2), run_config.summary)


SEEDS = range(100)


def reference_quantile(ordered: list[float], q: float) -> float:
    h = (len(ordered) - 1) * q
    lo = int(np.floor(h))
    if lo + 1 >= len(ordered):
        return ordered[lo]
    return ordered[lo] + (h - lo) * (ordered[lo + 1] - ordered[lo])


@pytest.mark.parametrize("seed", SEEDS)
def test_band_stats_against_loops(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 16))
    values, lat = rng.random(n), rng.uniform(68.0, 72.0, n)
    band = BandSpec(70.0, 1.0)

    stats = band_stats(values, lat, band)

    inside = sorted(v for v, a in zip(values, lat) if 69.0 < a < 71.0)
    assert stats.count == len(inside)
    if not inside:
        assert stats.empty
        return
    expected = [reference_quantile(inside, q) for q in (0.0, 0.25, 0.5, 0.75, 1.0)]
    actual = [stats.min, stats.q1, stats.median, stats.q3, stats.max]
    np.testing.assert_allclose(actual, expected, rtol=0, atol=1e-12)
    assert stats.mean == pytest.approx(sum(inside) / len(inside), abs=1e-12)


@pytest.mark.parametrize("seed", SEEDS)
def test_hovmoller_against_loops(seed):
    rng = np.random.default_rng(seed)
    T, n = int(rng.integers(1, 4)), int(rng.integers(5, 21))
    coords = [rng.random((n, 2)) for _ in range(T)]
    fields = [rng.random(n) for _ in range(T)]
    centers = np.sort(rng.choice(np.linspace(0.05, 1.4, 28), size=4, replace=False))
    h = float(rng.uniform(0.03, 0.2))
    mask = rng.choice(n, size=n // 2, replace=False) if seed % 2 else None
    spec = HovmollerSpec(
        bin_centers=centers,
        reference=(0.0, 0.0),
        half_bandwidth=h,
        metric=Metric.PLANAR,
        mask=mask,
    )

    result = hovmoller(fields, coords, spec)

    allowed = set(range(n)) if mask is None else set(mask.tolist())
    for b, x in enumerate(centers):
        for t in range(T):
            total, count = 0.0, 0
            for i in range(n):
                d = np.sqrt(coords[t][i, 0] ** 2 + coords[t][i, 1] ** 2)
                if i in allowed and abs(d - x) < h:
                    total += fields[t][i]
                    count += 1
            if count == 0:
                assert np.isnan(result.matrix[b, t])
            else:
                assert result.matrix[b, t] == pytest.approx(total / count, abs=1e-12)


@pytest.mark.parametrize("seed", SEEDS)
def test_semivariogram_against_loops(seed):
    rng = np.random.default_rng(seed)
    D, T, n = int(rng.integers(1, 4)), int(rng.integers(2, 9)), int(rng.integers(1, 7))
    delta = rng.standard_normal((D, T, n))
    lat = rng.uniform(68.0, 72.0, n)
    lat[0] = 70.0

    result = temporal_semivariogram(delta, lat, BandSpec(70.0, 1.0))

    inside = [s for s in range(n) if 69.0 < lat[s] < 71.0]
    lags = list(range(1, int(np.ceil((T - 1) / 2)) + 1))
    assert list(result.lags) == lags
    for d in range(D):
        for k, lag in enumerate(lags):
            squares = [
                (delta[d, t + lag, s] - delta[d, t, s]) ** 2
                for t in range(T - lag)
                for s in inside
            ]
            expected = 0.5 * sum(squares) / len(squares)
            assert result.draws[d, k] == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("seed", SEEDS)
def test_classification_accuracy_against_loops(seed):
    rng = np.random.default_rng(seed)
    T, n = int(rng.integers(1, 5)), int(rng.integers(1, 12))
    mean_p = [rng.choice([0.0, 0.1, 0.15, 0.2, 0.6, 1.0], n) for _ in range(T)]
    z = [rng.integers(0, 2, n) for _ in range(T)]

    rates = classification_accuracy(mean_p, z)

    for t in range(T):
        hits = sum(int(mean_p[t][i] > 0.15) == z[t][i] for i in range(n))
        assert rates[t] == hits / n


@pytest.mark.parametrize("seed", SEEDS)
def test_transition_probabilities_against_loops(seed):
    rng = np.random.default_rng(seed)
    D, n = int(rng.integers(1, 30)), int(rng.integers(1, 8))
    grid = [0.0, 0.05, 0.1, 0.15, 0.3, 0.9]
    p_t, p_next = rng.choice(grid, (D, n)), rng.choice(grid, (D, n))

    result = transition_probabilities(p_t, p_next)

    for s in range(n):
        ice = [d for d in range(D) if p_t[d, s] >= 0.15]
        water = [d for d in range(D) if p_t[d, s] < 0.15]
        melted = sum(p_next[d, s] < 0.15 for d in ice)
        frozen = sum(p_next[d, s] >= 0.15 for d in water)
        if ice:
            assert result.ice_to_water[s] == melted / len(ice)
        else:
            assert np.isnan(result.ice_to_water[s])
        if water:
            assert result.water_to_ice[s] == frozen / len(water)
        else:
            assert np.isnan(result.water_to_ice[s])


@pytest.mark.parametrize("seed", SEEDS)
def test_transition_rates_against_loops(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 15))
    pi_iw, pi_wi = rng.random(n), rng.random(n)
    pi_iw[rng.random(n) < 0.2] = np.nan
    pi_wi[rng.random(n) < 0.2] = np.nan
    z_t, z_next = rng.integers(0, 2, n), rng.integers(0, 2, n)
    probabilities = TransitionProbabilities(pi_iw, pi_wi)

    rates = transition_classification_rates(probabilities, z_t, z_next, threshold=0.5)

    for pi, before, after, rate, count in (
        (pi_iw, 1, 0, rates.ice_to_water, rates.ice_to_water_count),
        (pi_wi, 0, 1, rates.water_to_ice, rates.water_to_ice_count),
    ):
        observed = [i for i in range(n) if z_t[i] == before and z_next[i] == after]
        detected = sum(not np.isnan(pi[i]) and pi[i] > 0.5 for i in observed)
        assert count == len(observed)
        if observed:
            assert rate == detected / len(observed)
        else:
            assert np.isnan(rate)
