import numpy as np
import pytest

from conftest import make_samples
from st_glmm_tools.errors import UsageError
from st_glmm_tools.sampler.diagnostics import (
    acceptance_frame,
    autocorrelation,
    diagnostics,
    effective_sample_size,
    split_rhat,
    trace_frame,
)


def test_autocorrelation_at_lag_zero(rng):
    rho = autocorrelation(rng.standard_normal(100))

    assert rho[0] == pytest.approx(1.0)
    assert np.abs(rho[1:10]).max() < 0.5


def test_ess_of_independent_draws(rng):
    ess = effective_sample_size(rng.standard_normal(2_000))

    assert not ess.degenerate
    assert 1_000 < ess.value < 4_000


def test_ess_of_a_sticky_chain(rng):
    x = np.zeros(2_000)
    for i in range(1, x.size):
        x[i] = 0.95 * x[i - 1] + rng.standard_normal()

    assert effective_sample_size(x).value < 300


def test_constant_chain_is_degenerate():
    ess = effective_sample_size(np.full(50, 3.0))

    assert ess.degenerate
    assert np.isnan(ess.value)


def test_ess_needs_two_draws():
    with pytest.raises(UsageError):
        effective_sample_size(np.array([1.0]))


def test_rhat_of_mixed_chains(rng):
    assert split_rhat(rng.standard_normal((4, 1_000))) == pytest.approx(1.0, abs=0.02)


def test_rhat_of_separated_chains(rng):
    chains = rng.standard_normal((2, 500)) + np.array([[0.0], [5.0]])

    assert split_rhat(chains) > 1.5


def test_rhat_needs_four_draws():
    with pytest.raises(UsageError):
        split_rhat(np.ones((2, 3)))


def diagnostic_samples(rng, draws=40):
    samples = make_samples(
        beta=rng.standard_normal((draws, 2)),
        eta=rng.standard_normal((draws, 1, 2)),
        xi=np.zeros((draws, 3)),
        sizes=[3],
        lam=np.tile([0.3, 0.3, 0.0], (draws, 1)),
    )
    samples.acceptance = {"beta": (10, 40), "xi": (0, 0)}
    return samples


def test_diagnostics_table(rng):
    report = diagnostic_samples(rng)

    table = diagnostics(report)

    assert list(table["name"])[:2] == ["beta_1", "beta_2"]
    lam = table.set_index("name").loc["lambda_1"]
    assert lam["degenerate"]
    assert table["rhat"].isna().all()


def test_diagnostics_with_chains(rng):
    chains = [diagnostic_samples(rng), diagnostic_samples(rng)]

    table = diagnostics(chains[0], chains)

    assert np.isfinite(table.set_index("name").loc["beta_1", "rhat"])


def test_trace_and_acceptance_frames(rng):
    samples = diagnostic_samples(rng, draws=5)

    traces = trace_frame(samples)
    acceptance = acceptance_frame(samples).set_index("component")

    assert list(traces["iteration"]) == [1, 2, 3, 4, 5]
    assert "trace_K" in traces.columns
    assert acceptance.loc["beta", "rate"] == pytest.approx(0.25)
    assert np.isnan(acceptance.loc["xi", "rate"])
    assert not acceptance["in_band"].any()


def test_acceptance_band_column(rng):
    samples = diagnostic_samples(rng, draws=5)

    acceptance = acceptance_frame(samples, band=(0.2, 0.3)).set_index("component")

    assert acceptance.loc["beta", "in_band"]
    assert not acceptance.loc["xi", "in_band"]
