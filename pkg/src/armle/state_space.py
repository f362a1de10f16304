"""Vector embedding and the 2p-dimensional Markov representation.

Arrays carry time on axis 0 and an optional trailing batch axis, so one call
can transform many independent paths at once:

* ``embed``       x (N[, M])            -> y (N, p[, M])       Y_n = (X_n, ..., X_{n-p+1})
* ``z_transform`` y (N, p[, M])         -> z (N, p[, M])       Z_n = sum_m k(n, m) Y_m
* ``zeta_process`` z                    -> zeta (N+1, 2p[, M]) zeta[0] = 0,
                                           zeta[n] = (Z_n; sum_{r<n} beta_r Z_r)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .innovations import InnovationSystem


@dataclass(frozen=True, eq=False)
class ArModel:
    theta: np.ndarray
    A0: np.ndarray = field(init=False, repr=False)
    b: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float)).copy()
        if theta.ndim != 1 or theta.size == 0:
            raise ValidationError("theta must be a non-empty vector", field="theta")
        if not np.all(np.isfinite(theta)):
            raise ValidationError("theta must be finite", field="theta")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "A0", companion(theta))
        b = np.zeros(theta.size)
        b[0] = 1.0
        object.__setattr__(self, "b", b)

    @property
    def p(self) -> int:
        return self.theta.size


def companion(theta) -> np.ndarray:
    """p x p companion matrix: first row theta, ones on the subdiagonal."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    p = theta.size
    A = np.zeros((p, p))
    A[0] = theta
    A[np.arange(1, p), np.arange(p - 1)] = 1.0
    return A


def ell(p: int) -> np.ndarray:
    out = np.zeros(2 * p)
    out[0] = 1.0
    return out


def embed(x, p: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 1:
        raise ValidationError("need at least one observation", field="x")
    if p < 1:
        raise ValidationError(f"p must be >= 1, got {p}", field="p")
    N = x.shape[0]
    y = np.zeros((N, p) + x.shape[1:])
    for j in range(p):
        y[j:, j] = x[: N - j]
    return y


def lagged_design(x, p: int) -> np.ndarray:
    """Rows (X_{n-1}, ..., X_{n-p}) with zero pre-sample values, n = 1..N."""
    y = embed(x, p)
    out = np.zeros_like(y)
    out[1:] = y[:-1]
    return out


def z_transform(y, system: InnovationSystem) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape[0] > system.N:
        raise ValidationError(f"kernel horizon {system.N} shorter than data length {y.shape[0]}", field="N")
    flat = y.reshape(y.shape[0], -1)
    return system.apply_forward(flat).reshape(y.shape)


def z_inverse(z, system: InnovationSystem) -> np.ndarray:
    """Y_n = sum_m K(n, m) Z_m."""
    z = np.asarray(z, dtype=float)
    flat = z.reshape(z.shape[0], -1)
    return system.apply_inverse(flat).reshape(z.shape)


def zeta_process(z, system: InnovationSystem) -> np.ndarray:
    """zeta_0 = 0 and zeta_n = (Z_n ; sum_{r=1}^{n-1} beta_r Z_r) for n = 1..N."""
    z = np.asarray(z, dtype=float)
    N, p = z.shape[:2]
    if N > system.N:
        raise ValidationError(f"innovation system horizon {system.N} < {N}", field="N")
    zeta = np.zeros((N + 1, 2 * p) + z.shape[2:])
    zeta[1:, :p] = z
    beta = system.beta_padded()[:N]
    weighted = beta[1:].reshape((-1,) + (1,) * (z.ndim - 1)) * z[:-1]
    zeta[2:, p:] = np.cumsum(weighted, axis=0)
    return zeta


def transition_matrix(model: ArModel, beta_n: float) -> np.ndarray:
    """The 2p x 2p matrix [[A0, beta_n A0], [beta_n I, I]]."""
    p = model.p
    I = np.eye(p)
    return np.block([[model.A0, beta_n * model.A0], [beta_n * I, I]])


def transitions(model: ArModel, system: InnovationSystem, N: int) -> np.ndarray:
    """Stack T with T[n-1] = A_{n-1}, the matrix carrying zeta_{n-1} to zeta_n."""
    beta = system.beta_padded()
    if N > len(beta):
        raise ValidationError(f"innovation system horizon {system.N} < {N}", field="N")
    return np.stack([transition_matrix(model, beta[n]) for n in range(N)])


def regressors(zeta, system: InnovationSystem) -> np.ndarray:
    """u[n-1] = a_{n-1}^T zeta_{n-1} = Z_{n-1} + beta_{n-1} W_{n-1} for n = 1..N."""
    zeta = np.asarray(zeta)
    N = zeta.shape[0] - 1
    p = zeta.shape[1] // 2
    beta = system.beta_padded()[:N].reshape((-1,) + (1,) * (zeta.ndim - 1))
    return zeta[:-1, :p] + beta * zeta[:-1, p:]


def innovation_residuals(zeta, model: ArModel, system: InnovationSystem) -> np.ndarray:
    """ell^T (zeta_n - A_{n-1} zeta_{n-1}), n = 1..N (equals sigma_n eps_n at the true theta)."""
    u = regressors(zeta, system)
    pred = np.tensordot(model.theta, u, axes=(0, 1))
    return np.asarray(zeta)[1:, 0] - pred


def det_transition(model: ArModel, beta_n: float) -> float:
    """det A_n = (1 - beta_n^2)^p det A0."""
    return (1.0 - beta_n**2) ** model.p * float(np.linalg.det(model.A0))


@dataclass(frozen=True, eq=False)
class StatePath:
    y: np.ndarray
    z: np.ndarray
    zeta: np.ndarray

    @property
    def ell(self) -> np.ndarray:
        return ell(self.y.shape[1])


def state_path(x, p: int, system: InnovationSystem) -> StatePath:
    y = embed(x, p)
    z = z_transform(y, system)
    return StatePath(y, z, zeta_process(z, system))
