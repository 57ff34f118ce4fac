import numpy as np
import pytest

from st_glmm_tools.errors import UsageError
from st_glmm_tools.sampler.geweke import (
    GewekeResult,
    batch_means_se,
    draw_prior,
    geweke_check,
    statistic_names,
    tiny_model,
)


def test_tiny_model():
    model = tiny_model()

    assert model.T == 2
    assert model.p == 2
    assert model.r == 3
    np.testing.assert_allclose(model.priors.initial_K(), 0.5 * np.eye(3))


def test_statistic_names():
    names = statistic_names(2)

    assert len(names) == 10
    assert names[0] == "beta_1"
    assert names[-1] == "lambda_3^2"


def test_prior_draws_lie_in_their_supports(rng):
    model = tiny_model()

    for _ in range(20):
        prior = draw_prior(model, rng)
        assert (np.abs(prior.lambdas) < 1.0).all()
        assert np.linalg.eigvalsh(prior.K).min() > 0


def test_batch_means_of_iid_draws(rng):
    values = rng.standard_normal((10_000, 2))

    se = batch_means_se(values)

    np.testing.assert_allclose(se, 0.01, rtol=0.5)


def test_batch_means_need_enough_draws():
    with pytest.raises(UsageError):
        batch_means_se(np.ones((10, 1)))


def test_result_verdict():
    result = GewekeResult(
        names=["a", "b"],
        forward_mean=np.array([0.0, 1.0]),
        forward_se=np.array([0.1, 0.1]),
        successive_mean=np.array([0.0, 2.0]),
        successive_se=np.array([0.0, 0.0]),
    )

    np.testing.assert_allclose(result.z_scores, [0.0, -10.0])
    assert not result.passed()
    assert result.passed(limit=11.0)
    assert list(result.frame()["statistic"]) == ["a", "b"]


@pytest.mark.slow
def test_sampler_leaves_the_joint_distribution_invariant():
    result = geweke_check(forward_draws=10_000, successive_draws=10_000, seed=1)

    assert result.passed()
