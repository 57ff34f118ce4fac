from dataclasses import replace

import numpy as np
import pytest

from st_glmm_tools.const import NEWTON_GRADIENT_TOLERANCE
from st_glmm_tools.errors import UsageError
from st_glmm_tools.model.core import build_propagator
from st_glmm_tools.sampler.initializer import (
    eta_prior_precision,
    init_state,
    lambda_curvature_variances,
    posterior_mode,
)

ADJACENCY = np.array([[1.0]])


def test_prior_precision_single_time():
    K = np.array([[2.0, 0.5], [0.5, 1.0]])
    propagator = build_propagator(0.5, 0.5, 0.0, ADJACENCY)

    Q = eta_prior_precision(K, np.eye(2), propagator, 1)

    np.testing.assert_allclose(Q, np.linalg.inv(K))


def test_prior_precision_without_dynamics():
    K = np.array([[2.0, 0.5], [0.5, 1.0]])
    U = np.diag([0.5, 4.0])
    propagator = build_propagator(0.0, 0.0, 0.0, ADJACENCY)

    Q = eta_prior_precision(K, U, propagator, 2)

    np.testing.assert_allclose(Q[:2, :2], np.linalg.inv(K))
    np.testing.assert_allclose(Q[2:, 2:], np.linalg.inv(U))
    np.testing.assert_allclose(Q[:2, 2:], 0.0)


def test_prior_precision_matches_the_joint_covariance():
    K = np.eye(2)
    U = 0.75 * np.eye(2)
    propagator = build_propagator(0.5, 0.5, 0.0, ADJACENCY)

    Q = eta_prior_precision(K, U, propagator, 2)

    H = propagator.H
    joint = np.block([[K, K @ H.T], [H @ K, H @ K @ H.T + U]])
    np.testing.assert_allclose(Q, np.linalg.inv(joint), atol=1e-12)


def test_fixed_beta_must_be_given(model_data, priors):
    propagator = build_propagator(0.0, 0.0, 0.0, model_data.adjacency)

    with pytest.raises(UsageError):
        posterior_mode(
            model_data,
            priors.initial_K(),
            priors.initial_U(),
            propagator,
            priors.sigma2_xi,
            fix_beta=True,
        )


def test_initial_state(initial, model_data, priors):
    T, r, p = model_data.T, model_data.r, model_data.p

    assert initial.gradient_norm < NEWTON_GRADIENT_TOLERANCE
    assert initial.V_beta.shape == (p, p)
    assert initial.V_eta.shape == (T, r, r)
    assert initial.V_xi.shape == (int(model_data.offsets[-1]),)
    assert (initial.V_xi > 0).all()
    assert (initial.V_lambda > 0).all()
    np.testing.assert_array_equal(initial.lambdas, np.zeros(3))
    np.testing.assert_allclose(initial.K, priors.initial_K())
    for V in initial.V_eta:
        assert np.linalg.eigvalsh(V).min() > 0


def test_initial_state_with_pinned_parameters(model_data, priors, run_config, simulation):
    params = simulation.params
    pinned = replace(priors, sigma2_xi=params.sigma2_xi)

    initial = init_state(model_data, pinned, run_config.chain, fixed=params)

    np.testing.assert_array_equal(initial.beta, params.beta)
    np.testing.assert_array_equal(initial.K, params.K)
    np.testing.assert_allclose(initial.lambdas, params.H.lambdas)
    np.testing.assert_array_equal(initial.V_beta, np.eye(model_data.p))


def test_lambda_curvature_variances(initial, priors, model_data):
    variances = lambda_curvature_variances(
        initial.eta, np.array([0.2, 0.1, 0.0]), priors, model_data.adjacency
    )

    assert variances.shape == (3,)
    assert np.isfinite(variances).all()
    assert (variances > 0).all()
