import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from armle.asymptotics import fisher_info, random_stable_theta
from armle.errors import InsufficientExcitation, ValidationError
from armle.estimation import (bracket_batch, gls_oracle, log_likelihood, lse, lse_batch, mle, mle_batch,
                              transformed_regression)
from armle.innovations import system_for, toeplitz_covariance
from armle.noise import NoiseModel, covariance_sequence
from armle.simulate import child_seed, make_rng, simulate_ar_path, simulate_noise_innovation
from armle.state_space import ArModel, embed

MODELS = [NoiseModel.white(), NoiseModel.ma1(0.4), NoiseModel.ar1(0.4), NoiseModel.fgn(0.2), NoiseModel.fgn(0.8)]


def _path(theta, noise, N, seed, system=None):
    system = system or system_for(noise, N)
    eps = make_rng(seed).standard_normal(N)
    return simulate_ar_path(ArModel(np.asarray(theta)), simulate_noise_innovation(system, eps)), system


def test_white_p1_closed_form(rng):
    x = rng.standard_normal(50)
    s = system_for(NoiseModel.white(), 50)
    expect = np.sum(x[:-1] * x[1:]) / np.sum(x[:-1] ** 2)
    assert mle(x, 1, s).theta_hat[0] == pytest.approx(expect, rel=1e-13)
    assert lse(x, 1)[0] == pytest.approx(expect, rel=1e-13)
    x2 = np.array([1.3, -0.4])
    assert mle(x2, 1, system_for(NoiseModel.white(), 2)).theta_hat[0] == pytest.approx(-0.4 / 1.3)
    assert gls_oracle(x2, 1, np.eye(2))[0] == pytest.approx(-0.4 / 1.3)


def test_p2_example_matches_gls():
    x, s = _path((0.5, 0.2), NoiseModel.ar1(0.4), 300, 17)
    gamma = toeplitz_covariance(covariance_sequence(NoiseModel.ar1(0.4), 299), 300)
    np.testing.assert_allclose(mle(x, 2, s).theta_hat, gls_oracle(x, 2, gamma), atol=1e-8)


@pytest.mark.parametrize("noise", MODELS, ids=lambda m: m.label())
@pytest.mark.parametrize("theta", [(0.5,), (0.5, 0.2), (0.4, 0.2, -0.1)])
def test_difference_identity(noise, theta):
    x, s = _path(theta, noise, 500, 23)
    res = mle(x, len(theta), s, theta_true=theta)
    np.testing.assert_allclose(res.theta_hat - np.array(theta), np.linalg.solve(res.bracket, res.M), atol=1e-10)
    np.testing.assert_allclose(res.bracket, res.bracket.T, atol=0)
    assert np.all(np.linalg.eigvalsh(res.bracket) > 0)


def test_white_noise_reduces_to_classical_forms():
    theta = np.array([0.5, 0.2])
    x, s = _path(theta, NoiseModel.white(), 200, 4)
    res = mle(x, 2, s, theta_true=theta)
    y = embed(x, 2)
    prev = np.vstack((np.zeros(2), y[:-1]))
    eps = x - prev @ theta
    np.testing.assert_allclose(res.bracket, prev.T @ prev, atol=1e-12)
    np.testing.assert_allclose(res.M, prev.T @ eps, atol=1e-12)
    np.testing.assert_allclose(res.theta_hat, lse(x, 2), atol=1e-12)


def test_loglik_white_iid(rng):
    x = rng.standard_normal(30)
    s = system_for(NoiseModel.white(), 30)
    expect = -0.5 * np.sum(x**2) - 15 * np.log(2 * np.pi)
    assert log_likelihood([0.0], x, s) == pytest.approx(expect, rel=1e-14)


def test_loglik_is_quadratic_and_maximised():
    x, s = _path((0.5, 0.2), NoiseModel.fgn(0.8), 200, 8)
    res = mle(x, 2, s)
    assert res.loglik == pytest.approx(log_likelihood(res.theta_hat, x, s), rel=1e-14)
    for i in range(2):
        for d in (1e-3, -1e-3, 1e-2, -1e-2):
            t = res.theta_hat.copy()
            t[i] += d
            assert log_likelihood(t, x, s) <= res.loglik
    # exact quadratic along any line: three-point interpolation reproduces other points
    direction = np.array([0.3, -0.7])
    ts = np.array([-1.0, 0.0, 1.0])
    vals = [log_likelihood(res.theta_hat + t * direction, x, s) for t in ts]
    coef = np.polyfit(ts, vals, 2)
    for t in (-2.5, 0.4, 3.0):
        assert np.polyval(coef, t) == pytest.approx(log_likelihood(res.theta_hat + t * direction, x, s), abs=1e-9)


def test_errors():
    s = system_for(NoiseModel.white(), 10)
    with pytest.raises(InsufficientExcitation, match="insufficient excitation"):
        mle(np.zeros(10), 1, s)
    with pytest.raises(ValidationError):
        mle(np.ones(11), 1, s)
    with pytest.raises(ValidationError):
        mle(np.ones(2), 2, s)
    with pytest.raises(ValidationError):
        gls_oracle(np.ones(5), 1, np.eye(4))


def test_batch_matches_single():
    noise = NoiseModel.ma1(0.4)
    s = system_for(noise, 120)
    cols = [_path((0.4, -0.2), noise, 120, child_seed(1, i), s)[0] for i in range(6)]
    x = np.stack(cols, axis=1)
    x[:, 3] = 0.0  # degenerate column is flagged, not fatal
    est = mle_batch(x, 2, s)
    assert est.ok.tolist() == [True, True, True, False, True, True]
    assert np.all(np.isnan(est.theta_hat[3]))
    for j in (0, 5):
        single = mle(x[:, j], 2, s)
        np.testing.assert_allclose(est.theta_hat[j], single.theta_hat, atol=1e-13)
        np.testing.assert_allclose(bracket_batch(x, 2, s)[j], single.bracket, rtol=1e-13)
    np.testing.assert_allclose(lse_batch(x[:, [0, 1]], 2)[1], lse(x[:, 1], 2), atol=1e-13)


def test_transformed_regression_shapes():
    x, s = _path((0.5,), NoiseModel.fgn(0.6), 40, 1)
    obs, u = transformed_regression(x, 1, s)
    assert obs.shape == (40,) and u.shape == (40, 1)
    assert np.all(u[0] == 0)


@given(st.integers(0, 2**32), st.integers(1, 3), st.sampled_from(MODELS))
def test_mle_equals_gls(seed, p, noise):
    theta = random_stable_theta(make_rng(seed), p, max_radius=0.9)
    N = 120
    x, s = _path(theta, noise, N, seed)
    gamma = toeplitz_covariance(covariance_sequence(noise, N - 1), N)
    res = mle(x, p, s, theta_true=theta)
    np.testing.assert_allclose(res.theta_hat, gls_oracle(x, p, gamma), atol=1e-8)
    np.testing.assert_allclose(res.theta_hat - theta, np.linalg.solve(res.bracket, res.M), atol=1e-10)


@pytest.mark.slow
@pytest.mark.parametrize("noise", [NoiseModel.white(), NoiseModel.fgn(0.8), NoiseModel.ma1(0.4)],
                         ids=lambda m: m.label())
def test_bracket_over_n_tends_to_fisher(noise):
    theta = np.array([0.5, 0.2])
    N, reps = 5000, 100
    s = system_for(noise, N, kernels=False)
    eps = make_rng(77).standard_normal((N, reps))
    x = simulate_ar_path(ArModel(theta), simulate_noise_innovation(s, eps))
    avg = bracket_batch(x, 2, s).mean(axis=0) / N
    info = fisher_info(theta).info
    assert np.all(np.abs(avg - info) <= 0.05 * np.abs(info))
