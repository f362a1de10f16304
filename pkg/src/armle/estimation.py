"""Closed-form MLE through the innovation transform, plus GLS and LSE references.

In the transformed model the observation is ``ell^T zeta_n = Z_n[0]`` and the
regressor is ``u_{n-1} = a_{n-1}^T zeta_{n-1}``; the likelihood is that of a
linear regression with independent errors of variance ``sigma_n^2``, so

    theta_hat = (sum u u^T / sigma^2)^-1 (sum u Z[0] / sigma^2).

The first factor is the bracket <M>_N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import InsufficientExcitation, ValidationError
from .innovations import InnovationSystem
from .state_space import embed, lagged_design, regressors, z_transform, zeta_process

MAX_CONDITION = 1e12
GLS_DENSE_LIMIT = 2000


@dataclass(frozen=True, eq=False)
class EstimationResult:
    theta_hat: np.ndarray
    M: np.ndarray | None
    bracket: np.ndarray
    loglik: float
    condition: float
    N: int


def _check(x, p: int, system: InnovationSystem) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if p < 1:
        raise ValidationError(f"p must be >= 1, got {p}", field="p")
    if x.shape[0] > system.N:
        raise ValidationError(f"innovation system horizon {system.N} < data length {x.shape[0]}", field="N")
    if x.shape[0] <= p:
        raise ValidationError(f"need N > p observations, got N={x.shape[0]}", field="x")
    return x


def transformed_regression(x, p: int, system: InnovationSystem):
    """Observations Z_n[0] and regressors u_{n-1}, n = 1..N (batch axis last)."""
    x = _check(x, p, system)
    zeta = zeta_process(z_transform(embed(x, p), system), system)
    return zeta[1:, 0], regressors(zeta, system)


def _solve_bracket(bracket: np.ndarray, rhs: np.ndarray):
    evals = np.linalg.eigvalsh(bracket)
    if not np.all(np.isfinite(evals)) or evals[0] <= 0.0:
        raise InsufficientExcitation("insufficient excitation: bracket is singular")
    cond = float(evals[-1] / evals[0])
    if cond > MAX_CONDITION:
        raise InsufficientExcitation(f"insufficient excitation: bracket condition {cond:.3e}")
    return cho_solve(cho_factor(bracket), rhs), cond


def _loglik(obs, u, theta, sigma2) -> float:
    resid = obs - u @ theta
    N = obs.shape[0]
    return float(-0.5 * np.sum(resid**2 / sigma2) - 0.5 * N * math.log(2 * math.pi) - 0.5 * np.sum(np.log(sigma2)))


def mle(x, p: int, system: InnovationSystem, theta_true=None) -> EstimationResult:
    """Exact Gaussian MLE of theta for one observed path.

    ``M`` (the martingale terminal value) needs the true parameter to recover
    the innovations; it is None unless ``theta_true`` is given.
    """
    x = _check(x, p, system)
    if x.ndim != 1:
        raise ValidationError("mle expects a single path; use mle_batch", field="x")
    obs, u = transformed_regression(x, p, system)
    N = x.shape[0]
    w = 1.0 / system.sigma2[:N]
    bracket = (u.T * w) @ u
    rhs = (u.T * w) @ obs
    theta_hat, cond = _solve_bracket(bracket, rhs)
    M = None
    if theta_true is not None:
        theta_true = np.atleast_1d(np.asarray(theta_true, dtype=float))
        eps = (obs - u @ theta_true) / np.sqrt(system.sigma2[:N])
        M = u.T @ (eps / np.sqrt(system.sigma2[:N]))
    loglik = _loglik(obs, u, theta_hat, system.sigma2[:N])
    return EstimationResult(theta_hat, M, bracket, loglik, cond, N)


@dataclass(frozen=True, eq=False)
class BatchEstimate:
    theta_hat: np.ndarray  # (M, p), NaN rows where the bracket was rejected
    bracket: np.ndarray  # (M, p, p)
    ok: np.ndarray  # (M,) bool


def mle_batch(x, p: int, system: InnovationSystem) -> BatchEstimate:
    """MLE for many paths at once; ``x`` has shape (N, M)."""
    x = _check(x, p, system)
    if x.ndim != 2:
        raise ValidationError("mle_batch expects an (N, M) array", field="x")
    obs, u = transformed_regression(x, p, system)  # (N, M), (N, p, M)
    N = x.shape[0]
    w = 1.0 / system.sigma2[:N]
    uw = u * w[:, None, None]
    brackets = np.einsum("npm,nqm->mpq", uw, u)
    rhs = np.einsum("npm,nm->mp", uw, obs)
    out = np.full((x.shape[1], p), np.nan)
    ok = np.zeros(x.shape[1], dtype=bool)
    for j in range(x.shape[1]):
        try:
            out[j], _ = _solve_bracket(brackets[j], rhs[j])
            ok[j] = True
        except InsufficientExcitation:
            pass
    return BatchEstimate(out, brackets, ok)


def bracket_batch(x, p: int, system: InnovationSystem) -> np.ndarray:
    """<M>_N for each column of ``x`` (shape (N, M)) -> (M, p, p)."""
    x = _check(x, p, system)
    _, u = transformed_regression(x, p, system)
    w = 1.0 / system.sigma2[: x.shape[0]]
    return np.einsum("npm,nqm->mpq", u * w[:, None, None], u)


def log_likelihood(theta, x, system: InnovationSystem) -> float:
    """Exact Gaussian log-likelihood of the path x at parameter theta."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x = _check(x, theta.size, system)
    obs, u = transformed_regression(x, theta.size, system)
    return _loglik(obs, u, theta, system.sigma2[: x.shape[0]])


def gls_oracle(x, p: int, gamma, dense_limit: int = GLS_DENSE_LIMIT) -> np.ndarray:
    """Dense GLS on the lagged design: (Phi^T G^-1 Phi)^-1 Phi^T G^-1 x."""
    x = np.asarray(x, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    N = x.shape[0]
    if N > dense_limit:
        raise ValidationError(f"N={N} exceeds the dense GLS limit {dense_limit}", field="N")
    if gamma.shape != (N, N):
        raise ValidationError(f"covariance shape {gamma.shape} does not match N={N}", field="gamma")
    phi = lagged_design(x, p)
    factor = cho_factor(gamma, lower=True)
    g_phi = cho_solve(factor, phi)
    normal = phi.T @ g_phi
    if np.linalg.matrix_rank(normal) < p:
        raise InsufficientExcitation("singular normal equations")
    return np.linalg.solve(normal, g_phi.T @ x)


def lse(x, p: int) -> np.ndarray:
    """Ordinary least squares on the zero-padded lagged design."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] <= p:
        raise ValidationError(f"need N > p observations, got N={x.shape[0]}", field="x")
    phi = lagged_design(x, p)
    normal = phi.T @ phi
    if np.linalg.matrix_rank(normal) < p:
        raise InsufficientExcitation("singular design")
    return np.linalg.solve(normal, phi.T @ x)


def lse_batch(x, p: int) -> np.ndarray:
    """LSE for each column of ``x`` (shape (N, M)) -> (M, p)."""
    x = np.asarray(x, dtype=float)
    phi = lagged_design(x, p)  # (N, p, M)
    normal = np.einsum("npm,nqm->mpq", phi, phi)
    rhs = np.einsum("npm,nm->mp", phi, x)
    return np.linalg.solve(normal, rhs[..., None])[..., 0]

