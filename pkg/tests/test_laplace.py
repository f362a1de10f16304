import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from armle import laplace as lap
from armle.asymptotics import fisher_info
from armle.errors import AssumptionViolated, ValidationError
from armle.innovations import system_for
from armle.noise import NoiseModel, covariance_sequence
from armle.state_space import companion

MODELS = [NoiseModel.white(), NoiseModel.ma1(0.4), NoiseModel.ar1(0.4), NoiseModel.fgn(0.2), NoiseModel.fgn(0.8)]
CASES = [((0.5,), (1.0,)), ((-0.3,), (1.0,)), ((0.5, 0.2), (0.6, 0.8)), ((0.4, 0.2, -0.1), (0.2, -0.5, 0.84))]


def _dense(theta, noise, alpha, mu, N):
    return lap.laplace_dense(theta, covariance_sequence(noise, N), alpha, mu, N).value


@pytest.mark.parametrize("noise", MODELS, ids=lambda m: m.label())
@pytest.mark.parametrize("theta,alpha", CASES)
def test_explicit_matches_dense(noise, theta, alpha):
    for N, mu in ((1, 0.7), (7, 1.0), (40, 0.2)):
        ex = lap.laplace_explicit(theta, system_for(noise, N + 1), alpha, mu, N).value
        assert ex == pytest.approx(_dense(theta, noise, alpha, mu, N), rel=1e-11)


def test_white_p1_small_n_by_hand():
    # N=1: <M>_1 = 0 since X_0 = 0;  N=2: <M>_2 = X_1^2 = eps_1^2
    s = system_for(NoiseModel.white(), 3)
    assert lap.laplace_explicit([0.5], s, [1.0], 0.8, 1).value == pytest.approx(1.0, abs=1e-15)
    assert lap.laplace_explicit([0.5], s, [1.0], 0.8, 2).value == pytest.approx(1.8**-0.5, rel=1e-14)


def test_beta_n_does_not_enter():
    for noise in MODELS:
        for theta, alpha in CASES:
            a = lap.laplace_explicit(theta, system_for(noise, 21), alpha, 0.4, 20).value
            b = lap.laplace_explicit(theta, system_for(noise, 20), alpha, 0.4, 20).value
            assert a == pytest.approx(b, rel=1e-12)


def test_trivial_values():
    s = system_for(NoiseModel.fgn(0.8), 10)
    assert lap.laplace_explicit([0.5, 0.2], s, [1.0, 0.0], 0.0, 9).value == 1.0
    assert lap.laplace_explicit([0.5, 0.2], s, [0.0, 0.0], 3.0, 9).value == 1.0
    mc = lap.laplace_monte_carlo([0.5], NoiseModel.white(), [1.0], 0.0, 9, 100, 1)
    assert mc.value == 1.0 and mc.stderr == 0.0
    assert lap.laplace_monte_carlo([0.5], NoiseModel.white(), [0.0], 1.0, 9, 100, 1).value == 1.0
    assert lap.eigen_approx([0.5], [1.0], 0.0, 100).value == 1.0


def test_assumption_checks():
    s = system_for(NoiseModel.white(), 10)
    with pytest.raises(AssumptionViolated, match="use monte_carlo"):
        lap.laplace_explicit([0.5, 0.0], s, [1, 0], 0.5, 5)
    with pytest.raises(AssumptionViolated, match="repeated"):
        lap.laplace_explicit([1.0, -0.25], s, [1, 0], 0.5, 5)  # double root 0.5
    with pytest.raises(ValidationError):
        lap.laplace_explicit([0.5], s, [1.0], -1.0, 5)
    with pytest.raises(ValidationError):
        lap.laplace_explicit([0.5], s, [1.0], 1.0, 11)
    with pytest.raises(ValidationError):
        lap.laplace_monte_carlo([0.5], NoiseModel.white(), [1.0], 1.0, 5, 50, 0)


def test_amu_determinant_and_block():
    theta, alpha, mu = np.array([0.4, 0.2, -0.1]), np.array([0.2, -0.5, 0.84]), 0.37
    A = lap.amu_matrix(theta, alpha, mu)
    assert np.linalg.det(A) == pytest.approx(1.0, rel=1e-12)
    A0i = np.linalg.inv(companion(theta))
    np.testing.assert_allclose(A[3:, :3], mu * np.outer(alpha, alpha) @ A0i, atol=1e-14)


def test_permutation_is_identity_for_p1_and_a_permutation():
    np.testing.assert_array_equal(lap.permutation_matrix(1), np.eye(4))
    for p in (2, 3):
        J = lap.permutation_matrix(p)
        np.testing.assert_array_equal(J @ J.T, np.eye(4 * p))


@pytest.mark.parametrize("noise", MODELS, ids=lambda m: m.label())
def test_p1_closed_form_matches_explicit(noise):
    s = system_for(noise, 65)
    for mu in (0.1, 1.0):
        for N in (1, 2, 5, 17, 64):
            a = lap.p1_laplace([0.5], s, mu, N).value
            b = lap.laplace_explicit([0.5], s, [1.0], mu, N).value
            assert a == pytest.approx(b, rel=1e-10)


def test_large_n_is_stable_in_logs():
    s = system_for(NoiseModel.fgn(0.8), 4097, kernels=False)
    for mu in (1 / 4096, 0.5, 3.0):
        a = lap.p1_laplace([0.5], s, mu, 4096).extra["log_value"]
        b = lap.laplace_explicit([0.5], s, [1.0], mu, 4096).extra["log_value"]
        assert a == pytest.approx(b, rel=1e-9)


def test_p1_lambdas():
    lp, lm = lap.p1_lambdas(0.5, 1.0)
    assert (lp / 0.5) * (lm / 0.5) == pytest.approx(1.0, abs=1e-12)
    assert lp * lm == pytest.approx(0.25, abs=1e-12)
    assert lp > 1
    lp, lm = lap.p1_lambdas(0.5, 1e-8)
    assert lp == pytest.approx(1.0, abs=1e-7) and lm == pytest.approx(0.25, rel=1e-7)
    lp, _ = lap.p1_lambdas(-0.5, 1.0)
    assert abs(lp / -0.5) > 1
    with pytest.raises(AssumptionViolated, match="perturb"):
        lap.p1_lambdas(0.0, 1.0)


def test_p1_decay():
    s = system_for(NoiseModel.fgn(0.8), 257)
    v64 = lap.p1_laplace([0.5], s, 1.0, 64).value
    v256 = lap.p1_laplace([0.5], s, 1.0, 256).value
    assert v256 < v64 < 1e-3


def test_s_product_examples():
    np.testing.assert_array_equal(lap.s_product(0.7, [], 1), np.eye(2))
    np.testing.assert_allclose(lap.s_product(0.7, np.zeros(9), 10), np.diag([0.7**9, 1.0]), rtol=1e-15)
    beta = np.array([0.3, -0.2])
    F1, F2 = (np.array([[0.7, -b], [-0.7 * b, 1]]) for b in beta)
    np.testing.assert_allclose(lap.s_product(0.7, beta, 3), F2 @ F1, atol=1e-16)
    with pytest.raises(ValidationError):
        lap.s_product(0.7, beta, 5)


def test_s_inverse_and_g_product():
    beta = system_for(NoiseModel.fgn(0.8), 30).beta
    for a in (1.7, -2.5, 0.3):
        inv = np.linalg.inv(lap.s_product(a, beta, 20))
        np.testing.assert_allclose(lap.s_inverse(a, beta, 20), inv, rtol=1e-8, atol=1e-8 * np.max(np.abs(inv)))
    # S(1/a) has entries ~ a^-19, so the reference is computed in extended precision
    mp.mp.dps = 60
    a = mp.mpf("0.2")

    def s_mp(x):
        out = mp.eye(2)
        for b in beta[:19]:
            b = mp.mpf(float(b))
            out = mp.matrix([[x, -b], [-x * b, 1]]) * out
        return out

    G = mp.inverse(s_mp(1 / a)) * s_mp(a)
    expect = np.array([[float(G[i, j]) for j in range(2)] for i in range(2)])
    np.testing.assert_allclose(lap.g_product(0.2, beta, 20), expect, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("noise", MODELS, ids=lambda m: m.label())
def test_determinant_identities(noise):
    s = system_for(noise, 66)
    theta = 0.5
    lp, _ = lap.p1_lambdas(theta, 1.0)
    for N in (1, 8, 33, 64):
        # N-factor product
        sign, logdet = lap.s_product_logdet(lp / theta, s.beta, N + 1)
        assert sign > 0
        assert logdet == pytest.approx(N * np.log(lp / theta) + np.log(s.sigma2[N]), rel=1e-8)
        # the literal N-1 factor product
        sign, logdet = lap.s_product_logdet(lp / theta, s.beta, N)
        assert logdet == pytest.approx((N - 1) * np.log(lp / theta) + np.log(s.sigma2[N - 1]), rel=1e-8, abs=1e-14)
        if N <= 8:
            det = np.linalg.det(lap.s_product(lp / theta, s.beta, N + 1))
            assert det == pytest.approx(theta**-N * lp**N * s.sigma2[N], rel=1e-8)
        assert np.trace(lap.g_product(0.0, s.beta, N + 1)) == pytest.approx(1 / s.sigma2[N - 1], rel=1e-8)


def test_det_transition_product():
    theta = np.array([0.5, 0.2])
    s = system_for(NoiseModel.fgn(0.8), 51)
    sign, log_abs = lap.log_det_transition_product(theta, s, 50)
    lam0 = np.linalg.eigvals(np.linalg.inv(companion(theta)))
    expect = 2 * np.log(s.sigma2[50]) - 50 * np.log(np.abs(np.prod(lam0)))
    assert sign * np.exp(log_abs) == pytest.approx(np.sign(np.prod(lam0).real) ** 50 * np.exp(expect), rel=1e-8)


@pytest.mark.slow
def test_s_product_bounds():
    beta = system_for(NoiseModel.fgn(0.8), 100_001, kernels=False).beta
    n_full = np.linalg.norm(lap.s_product(0.9, beta, 100_000))
    n_half = np.linalg.norm(lap.s_product(0.9, beta, 50_000))
    assert np.isfinite(n_full) and abs(n_full / n_half - 1) < 1e-3
    i_full = np.linalg.norm(lap.s_inverse(1.5, beta, 100_000))
    i_half = np.linalg.norm(lap.s_inverse(1.5, beta, 50_000))
    assert abs(i_full / i_half - 1) < 1e-3
    traces = [np.trace(lap.g_product(0.01, beta, n)) for n in (10, 100, 1000, 10_000)]
    assert min(traces) >= 0.5 * min(traces) > 0
    assert np.all(np.diff(traces) > -1e-12)


def test_monotone_in_mu_and_in_unit_interval():
    s = system_for(NoiseModel.ma1(0.4), 30)
    for theta, alpha in CASES:
        vals = [lap.laplace_explicit(theta, s, alpha, mu, 25).value for mu in np.linspace(0, 4, 21)]
        assert all(0 < v <= 1 for v in vals)
        assert np.all(np.diff(vals) <= 1e-15)


@given(st.floats(0.05, 0.9), st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.integers(1, 30))
def test_explicit_monotone_property(theta, mu1, mu2, N):
    s = system_for(NoiseModel.fgn(0.7), N)
    lo, hi = sorted((mu1, mu2))
    a = lap.laplace_explicit([theta], s, [1.0], lo, N).value
    b = lap.laplace_explicit([theta], s, [1.0], hi, N).value
    assert 0 < b <= a * (1 + 1e-12) and a <= 1 + 1e-12


def test_monte_carlo_example():
    theta, alpha, N, mu = [0.5, 0.2], [1.0, 0.0], 10, 0.5
    noise = NoiseModel.ma1(0.4)
    s = system_for(noise, N)
    mc = lap.laplace_monte_carlo(theta, noise, alpha, mu, N, 200_000, 31, system=s)
    ex = lap.laplace_explicit(theta, s, alpha, mu, N).value
    assert abs(mc.value - ex) <= 3 * mc.stderr
    again = lap.laplace_monte_carlo(theta, noise, alpha, mu, N, 200_000, 31, system=s)
    assert again.value == mc.value


def test_p1_white_direct_monte_carlo():
    # E exp(-(mu/2) sum X_{n-1}^2) with i.i.d. noise, simulated without the innovation machinery
    rng = np.random.default_rng(8)
    N, reps = 10, 200_000
    xi = rng.standard_normal((reps, N))
    x = np.zeros((reps, N))
    for n in range(N):
        x[:, n] = (0.5 * x[:, n - 1] if n else 0.0) + xi[:, n]
    vals = np.exp(-0.5 * np.sum(x[:, :-1] ** 2, axis=1))
    est, se = vals.mean(), vals.std(ddof=1) / math.sqrt(reps)
    ex = lap.p1_laplace([0.5], system_for(NoiseModel.white(), N + 1), 1.0, N).value
    assert abs(est - ex) <= 3 * se


def test_eigen_approx_ratio_tends_to_one():
    s = system_for(NoiseModel.fgn(0.8), 4097, kernels=False)
    ratios = []
    for N in (64, 512, 4096):
        ex = lap.laplace_explicit([0.5], s, [1.0], 1 / N, N).value
        ratios.append(ex / lap.eigen_approx([0.5], [1.0], 1 / N, N).value)
    gaps = [abs(r - 1) for r in ratios]
    assert gaps[0] > gaps[1] > gaps[2]
    lp, _ = lap.p1_lambdas(0.5, 0.3)
    assert lap.eigen_approx([0.5], [1.0], 0.3, 10).value == pytest.approx(lp**-5, rel=1e-12)


@pytest.mark.parametrize("theta,alpha", [((0.5,), (1.0,)), ((-0.6,), (1.0,)), ((0.5, 0.2), (0.6, 0.8)),
                                         ((0.3, -0.4), (1.0, -1.0))])
def test_eigenvalue_derivative_is_fisher_quadratic_form(theta, alpha):
    d = lap.eigen_log_derivative(theta, alpha, step=1e-6)
    target = np.array(alpha) @ fisher_info(theta).info @ np.array(alpha)
    assert d == pytest.approx(target, rel=1e-3)


def test_limit_check():
    pts = lap.limit_check([0.5], NoiseModel.fgn(0.8), [1.0], [512, 2048, 4096])
    assert all(p.target == pytest.approx(math.exp(-2 / 3), rel=1e-14) for p in pts)
    gaps = [p.rel_gap for p in pts]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 0.05
    white = lap.limit_check([0.5], NoiseModel.white(), [1.0], [4096])
    assert white[0].target == pts[0].target
    assert white[0].rel_gap < 0.05


def test_limit_check_falls_back_to_monte_carlo():
    pts = lap.limit_check([0.5, 0.0], NoiseModel.white(), [1.0, 0.0], [50], replications=2000, seed=3)
    assert pts[0].method == "monte_carlo" and pts[0].stderr > 0
