"""Levinson-Durbin machinery for a stationary covariance sequence.

Conventions (1-based math indices, 0-based arrays):

* ``sigma_n eps_n = sum_{m<=n} k(n, m) xi_m`` with ``k(n, n) = 1``;
  ``k[n-1, m-1] == k(n, m)``.
* ``beta_n = -k(n+1, 1)`` is the partial correlation at lag ``n``;
  ``system.beta[n-1] == beta_n`` for ``n = 1..N-1``.
* ``system.sigma2[n-1] == sigma_n**2`` with ``sigma_1**2 = 1``.
* ``beta_0`` is defined as 0. It only ever multiplies ``zeta_0 = 0``.

With lower-triangular storage the Cholesky identities read
``Gamma = K D K^T`` and ``Gamma^-1 = k^T D^-1 k``.

Row ``n`` of ``k`` is generated by the recursion
``k(n+1, n+1-m) = k(n, n-m) - beta_n k(n, m)``; kernels above
``dense_limit`` are never materialised and are applied by re-running this
recursion block by block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NotPositiveDefinite, ValidationError
from .noise import NoiseModel, covariance_sequence

DENSE_LIMIT = 4096
PD_THRESHOLD = 1e-13
_BLOCK = 256


@dataclass(frozen=True, eq=False)
class InnovationSystem:
    rho: np.ndarray
    beta: np.ndarray
    sigma2: np.ndarray
    k: np.ndarray | None = None
    K: np.ndarray | None = None

    @property
    def N(self) -> int:
        return len(self.sigma2)

    @property
    def dense(self) -> bool:
        return self.k is not None

    def beta_padded(self) -> np.ndarray:
        """Array ``b`` of length N with ``b[0] = beta_0 = 0`` and ``b[n] = beta_n``."""
        return np.concatenate(([0.0], self.beta))

    def truncated(self, n: int) -> "InnovationSystem":
        """Leading sub-system of horizon ``n`` (the recursion is nested)."""
        if not 1 <= n <= self.N:
            raise ValidationError(f"horizon {n} outside 1..{self.N}", field="N")
        k = self.k[:n, :n] if self.k is not None else None
        K = self.K[:n, :n] if self.K is not None else None
        return InnovationSystem(self.rho[:n], self.beta[: n - 1], self.sigma2[:n], k, K)

    def kernel_rows(self, start: int = 0, stop: int | None = None):
        """Yield ``(n, row)`` with ``row[m-1] = k(n, m)`` for ``n`` in ``start+1..stop``."""
        stop = self.N if stop is None else stop
        c = np.zeros(self.N)
        c[0] = 1.0
        for n in range(1, stop + 1):
            if n > start:
                yield n, c[:n][::-1]
            if n < stop:
                _advance(c, n, self.beta[n - 1])

    def apply_forward(self, y) -> np.ndarray:
        """Return ``k @ y`` along axis 0 (``y`` has N' <= N rows)."""
        y = np.asarray(y, dtype=float)
        n_rows = y.shape[0]
        if n_rows > self.N:
            raise ValidationError(f"kernel horizon {self.N} < data length {n_rows}", field="N")
        if self.k is not None:
            return self.k[:n_rows, :n_rows] @ y
        out = np.empty_like(y)
        block = np.zeros((_BLOCK, n_rows))
        rows = self.kernel_rows(0, n_rows)
        for s in range(0, n_rows, _BLOCK):
            e = min(s + _BLOCK, n_rows)
            kb = block[: e - s, :e]
            kb[:] = 0.0
            for i in range(e - s):
                n, row = next(rows)
                kb[i, :n] = row
            out[s:e] = kb @ y[:e]
        return out

    def apply_inverse(self, v) -> np.ndarray:
        """Return ``K @ v`` along axis 0, i.e. solve ``k x = v``."""
        v = np.asarray(v, dtype=float)
        n_rows = v.shape[0]
        if n_rows > self.N:
            raise ValidationError(f"kernel horizon {self.N} < data length {n_rows}", field="N")
        if self.K is not None:
            return self.K[:n_rows, :n_rows] @ v
        out = np.empty_like(v)
        block = np.zeros((_BLOCK, n_rows))
        rows = self.kernel_rows(0, n_rows)
        for s in range(0, n_rows, _BLOCK):
            e = min(s + _BLOCK, n_rows)
            kb = block[: e - s, :e]
            kb[:] = 0.0
            for i in range(e - s):
                n, row = next(rows)
                kb[i, :n] = row
            rhs = v[s:e] - kb[:, :s] @ out[:s] if s else v[s:e]
            out[s:e] = solve_triangular(kb[:, s:e], rhs, lower=True, unit_diagonal=True)
        return out


def _advance(c: np.ndarray, n: int, beta_n: float) -> None:
    # c[j] = k(n, n-j) for j < n  ->  c[j] = k(n+1, n+1-j) for j <= n.
    c[n] = 0.0
    rev = c[n::-1].copy()
    c[: n + 1] -= beta_n * rev


def levinson(rho, N: int, kernels: bool | None = None, dense_limit: int = DENSE_LIMIT) -> InnovationSystem:
    """Partial correlations, innovation variances and kernels up to horizon N.

    ``kernels=None`` materialises ``k`` and ``K`` only when ``N <= dense_limit``.
    Raises ``NotPositiveDefinite`` when ``1 - beta_n**2 <= 1e-13``.
    """
    rho = np.asarray(rho, dtype=float)
    if N < 1:
        raise ValidationError(f"N must be >= 1, got {N}", field="N")
    if rho.ndim != 1 or len(rho) < N:
        raise ValidationError(f"need at least N={N} covariance lags, got {rho.shape}", field="rho")
    if rho[0] != 1.0:
        raise ValidationError(f"rho(0) must be 1, got {rho[0]!r}", field="rho")
    if kernels is None:
        kernels = N <= dense_limit

    beta = np.zeros(N - 1)
    sigma2 = np.empty(N)
    sigma2[0] = 1.0
    k = np.zeros((N, N)) if kernels else None
    c = np.zeros(N)
    c[0] = 1.0
    if kernels:
        k[0, 0] = 1.0
    for n in range(1, N):
        # sum_{m<=n} k(n, m) rho(m) = beta_n sigma_n^2
        b = float(c[:n] @ rho[n:0:-1]) / sigma2[n - 1]
        one_minus = 1.0 - b * b
        if one_minus <= PD_THRESHOLD:
            raise NotPositiveDefinite(f"covariance not positive definite at order {n} (beta_{n} = {b!r})")
        beta[n - 1] = b
        sigma2[n] = sigma2[n - 1] * one_minus
        _advance(c, n, b)
        if kernels:
            k[n, : n + 1] = c[: n + 1][::-1]
    K = None
    if kernels:
        K = solve_triangular(k, np.eye(N), lower=True, unit_diagonal=True)
    return InnovationSystem(rho[:N].copy(), beta, sigma2, k, K)


def system_for(model: NoiseModel, N: int, kernels: bool | None = None, dense_limit: int = DENSE_LIMIT) -> InnovationSystem:
    return levinson(covariance_sequence(model, N - 1), N, kernels=kernels, dense_limit=dense_limit)


def toeplitz_covariance(rho, N: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    idx = np.arange(N)
    return rho[np.abs(idx[:, None] - idx[None, :])]


def reconstruct_covariance(system: InnovationSystem) -> np.ndarray:
    """Gamma_N rebuilt from the kernels as ``K diag(sigma^2) K^T``."""
    if system.K is None:
        raise ValidationError("reconstruct_covariance needs dense kernels", field="kernels")
    return (system.K * system.sigma2) @ system.K.T


def inverse_covariance(system: InnovationSystem) -> np.ndarray:
    """Gamma_N^-1 rebuilt as ``k^T diag(1/sigma^2) k``."""
    if system.k is None:
        raise ValidationError("inverse_covariance needs dense kernels", field="kernels")
    return (system.k.T / system.sigma2) @ system.k


def cholesky_system(rho, N: int) -> InnovationSystem:
    """Independent oracle: kernels read off a dense Cholesky factor of Gamma_N."""
    gamma = toeplitz_covariance(rho, N)
    L = np.linalg.cholesky(gamma)
    d = np.diag(L)
    K = L / d
    k = solve_triangular(K, np.eye(N), lower=True, unit_diagonal=True)
    beta = -k[1:, 0]
    return InnovationSystem(np.asarray(rho[:N], dtype=float), beta, d**2, k, K)


def direct_kernel(rho, N: int) -> np.ndarray:
    """Independent oracle: row n of k from a dense solve of the order-(n-1) normal equations."""
    rho = np.asarray(rho, dtype=float)
    k = np.zeros((N, N))
    k[0, 0] = 1.0
    for n in range(2, N + 1):
        gamma = toeplitz_covariance(rho, n - 1)
        phi = np.linalg.solve(gamma, rho[1:n])  # predictor of xi_n from xi_{n-1}, ..., xi_1
        k[n - 1, n - 1] = 1.0
        k[n - 1, : n - 1] = -phi[::-1]
    return k


@dataclass(frozen=True)
class BetaDiagnostic:
    checkpoints: np.ndarray
    partial_sums: np.ndarray
    plateau_ratio: float


def beta_summability_diagnostic(system: InnovationSystem) -> BetaDiagnostic:
    """Partial sums of beta_n^2 at dyadic n and the ratio S(last) / S(last // 2).

    Informational only: a ratio drifting towards 1 is consistent with
    sum beta_n^2 < infinity.
    """
    if system.N < 4:
        raise ValidationError("beta diagnostic needs N >= 4", field="N")
    s = np.cumsum(system.beta**2)
    last = len(s)
    checkpoints = []
    n = 1
    while n < last:
        checkpoints.append(n)
        n *= 2
    checkpoints.append(last)
    checkpoints = np.array(checkpoints)
    partial = s[checkpoints - 1]
    half = s[last // 2 - 1]
    ratio = 1.0 if half == 0.0 else float(s[-1] / half)
    return BetaDiagnostic(checkpoints, partial, ratio)
