"""Oracle-equivalence suites used by ``armle verify``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .asymptotics import fisher_info, lyapunov_residual, random_stable_theta
from .estimation import gls_oracle, mle
from .innovations import inverse_covariance, reconstruct_covariance, system_for, toeplitz_covariance
from .laplace import laplace_explicit, laplace_monte_carlo
from .noise import NoiseModel, covariance_sequence
from .simulate import child_seed, make_rng, simulate_ar_path, simulate_noise_innovation
from .state_space import ArModel, companion

SUITES = ("cholesky", "mle-vs-gls", "laplace-vs-mc", "lyapunov")
RANDOMIZED = ("mle-vs-gls", "laplace-vs-mc", "lyapunov")

KERNEL_TOL = 1e-8
GLS_TOL = 1e-8
DIFFERENCE_TOL = 1e-10
LAPLACE_SE = 3.0
LYAPUNOV_TOL = 1e-12
SERIES_TOL = 1e-10

CHOLESKY_MODELS = (NoiseModel.white(), NoiseModel.ma1(0.4), NoiseModel.ar1(0.4),
                   NoiseModel.fgn(0.2), NoiseModel.fgn(0.5), NoiseModel.fgn(0.8))
ESTIMATION_THETAS = ((0.5,), (0.5, 0.2), (0.4, 0.2, -0.1))
LAPLACE_THETAS = ((0.5,), (0.5, 0.2))
LAPLACE_MODELS = (NoiseModel.white(), NoiseModel.ma1(0.4), NoiseModel.fgn(0.8))


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tol: float
    passed: bool

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark}  {self.name:<48s} {self.value:.3e}  (tol {self.tol:.1e})"


def _le(name, value, tol) -> Check:
    return Check(name, float(value), tol, bool(value < tol))


def cholesky_suite(N: int = 128) -> list[Check]:
    out = []
    for model in CHOLESKY_MODELS:
        gamma = toeplitz_covariance(covariance_sequence(model, N - 1), N)
        system = system_for(model, N)
        inv_err = np.max(np.abs(inverse_covariance(system) @ gamma - np.eye(N)))
        rec_err = np.max(np.abs(reconstruct_covariance(system) - gamma))
        out.append(_le(f"{model.label()} inverse identity", inv_err, KERNEL_TOL))
        out.append(_le(f"{model.label()} covariance identity", rec_err, KERNEL_TOL))
    return out


def estimation_models() -> tuple[NoiseModel, ...]:
    return CHOLESKY_MODELS


def mle_vs_gls_suite(seed: int, N: int = 300, reps: int = 20) -> list[Check]:
    out = []
    for theta in ESTIMATION_THETAS:
        ar = ArModel(np.array(theta))
        for model in estimation_models():
            rho = covariance_sequence(model, N - 1)
            gamma = toeplitz_covariance(rho, N)
            system = system_for(model, N)
            worst_gls = 0.0
            worst_diff = 0.0
            for r in range(reps):
                rng = make_rng(child_seed(seed, r))
                eps = rng.standard_normal(N)
                x = simulate_ar_path(ar, simulate_noise_innovation(system, eps))
                res = mle(x, ar.p, system, theta_true=ar.theta)
                gls = gls_oracle(x, ar.p, gamma)
                worst_gls = max(worst_gls, float(np.max(np.abs(res.theta_hat - gls))))
                diff = (res.theta_hat - ar.theta) - np.linalg.solve(res.bracket, res.M)
                worst_diff = max(worst_diff, float(np.max(np.abs(diff))))
            tag = f"p={ar.p} {model.label()}"
            out.append(_le(f"{tag} |mle-gls|", worst_gls, GLS_TOL))
            out.append(_le(f"{tag} difference identity", worst_diff, DIFFERENCE_TOL))
    return out


def laplace_cases():
    for theta in LAPLACE_THETAS:
        alpha = np.ones(len(theta)) / np.sqrt(len(theta))
        for model in LAPLACE_MODELS:
            for N in (5, 10, 16):
                for mu in (0.25, 1.0):
                    yield np.array(theta), alpha, model, N, mu


def laplace_vs_mc_suite(seed: int, replications: int = 200_000) -> list[Check]:
    out = []
    for idx, (theta, alpha, model, N, mu) in enumerate(laplace_cases()):
        system = system_for(model, N)
        ex = laplace_explicit(theta, system, alpha, mu, N)
        mc = laplace_monte_carlo(theta, model, alpha, mu, N, replications, child_seed(seed, idx), system=system)
        z = abs(ex.value - mc.value) / mc.stderr
        out.append(Check(f"p={theta.size} {model.label()} N={N} mu={mu} |z|", z, LAPLACE_SE,
                         bool(z <= LAPLACE_SE)))
    return out


def lyapunov_suite(seed: int, draws: int = 1000) -> list[Check]:
    out = []
    worst_p1 = 0.0
    for t in np.linspace(-0.99, 0.99, 199):
        worst_p1 = max(worst_p1, abs(fisher_info([t]).info[0, 0] * (1 - t * t) - 1.0))
    out.append(_le("p=1 exact 1/(1-theta^2), relative", worst_p1, 1e-14))
    rng = make_rng(seed)
    worst_res = 0.0
    worst_gap = 0.0
    for d in range(draws):
        p = 1 + d % 4
        theta = random_stable_theta(rng, p)
        fi = fisher_info(theta)
        q = np.zeros((p, p))
        q[0, 0] = 1.0
        worst_res = max(worst_res, lyapunov_residual(companion(theta), fi.info, q) / fi.scale)
        worst_gap = max(worst_gap, fi.series_gap / fi.scale)
    out.append(_le(f"p<=4 x {draws} residual / scale", worst_res, LYAPUNOV_TOL))
    out.append(_le(f"p<=4 x {draws} series gap / scale", worst_gap, SERIES_TOL))
    return out


def run_suite(name: str, seed: int | None = None, **kw) -> list[Check]:
    if name == "cholesky":
        return cholesky_suite(**kw)
    if name == "mle-vs-gls":
        return mle_vs_gls_suite(seed, **kw)
    if name == "laplace-vs-mc":
        return laplace_vs_mc_suite(seed, **kw)
    if name == "lyapunov":
        return lyapunov_suite(seed, **kw)
    raise KeyError(name)
