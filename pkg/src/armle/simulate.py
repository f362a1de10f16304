"""Noise and AR(p) path generation.

Random numbers come from numpy's PCG64 bit generator; normals use
``Generator.standard_normal`` (ziggurat).  Per-replication seeds are derived
with :func:`child_seed`, so a replication's draws depend only on
``(master_seed, index)`` and never on execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmbeddingNotNonnegative, ValidationError
from .innovations import InnovationSystem
from .noise import NoiseModel, fgn_covariance
from .state_space import ArModel

NEG_EIG_TOL = 1e-10


def child_seed(master: int, index: int) -> int:
    """64-bit seed for replication ``index``: first word of SeedSequence([master, index])."""
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def simulate_noise_innovation(system: InnovationSystem, eps) -> np.ndarray:
    """xi_n = sum_{m<=n} K(n, m) sigma_m eps_m (axis 0 is time)."""
    eps = np.asarray(eps, dtype=float)
    n = eps.shape[0]
    if n > system.N:
        raise ValidationError(f"eps longer ({n}) than innovation horizon ({system.N})", field="eps")
    scale = np.sqrt(system.sigma2[:n]).reshape((-1,) + (1,) * (eps.ndim - 1))
    flat = (scale * eps).reshape(n, -1)
    return system.apply_inverse(flat).reshape(eps.shape)


def circulant_eigenvalues(hurst: float, N: int) -> np.ndarray:
    """Eigenvalues of the minimal power-of-two circulant embedding of fGn(H)."""
    size = 1
    while size < 2 * (N - 1):
        size *= 2
    half = size // 2
    rho = fgn_covariance(hurst, np.arange(half + 1))
    rho[0] = 1.0
    row = np.concatenate((rho, rho[half - 1 : 0 : -1]))
    eig = np.fft.fft(row).real
    if eig.min() < -NEG_EIG_TOL:
        raise EmbeddingNotNonnegative(f"embedding not nonnegative (min eigenvalue {eig.min():.3e})")
    return np.clip(eig, 0.0, None)


def simulate_fgn_circulant(hurst: float, N: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Exact fGn sample(s) by circulant embedding; shape (N,) or (N, size)."""
    if not 0.0 < hurst < 1.0:
        raise ValidationError(f"H out of (0,1) (H={hurst})", field="H")
    if N < 2:
        raise ValidationError(f"N must be >= 2, got {N}", field="N")
    eig = circulant_eigenvalues(hurst, N)
    m = eig.size
    shape = (m,) if size is None else (m, size)
    w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    amp = np.sqrt(eig / m)
    if size is not None:
        amp = amp[:, None]
    return np.fft.fft(amp * w, axis=0).real[:N]


def simulate_ar_path(model: ArModel, xi) -> np.ndarray:
    """X_n = (theta_1 X_{n-1} + ... + theta_p X_{n-p}) + xi_n, X_r = 0 for r <= 0."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[0] < 1:
        raise ValidationError("xi must be non-empty", field="xi")
    theta = model.theta
    x = np.zeros_like(xi)
    for n in range(xi.shape[0]):
        s = np.zeros(xi.shape[1:])
        for i in range(min(model.p, n)):
            s = s + theta[i] * x[n - 1 - i]
        x[n] = s + xi[n]
    return x


def ar_residual(model: ArModel, x, xi) -> np.ndarray:
    """X_n - (sum theta_i X_{n-i} + xi_n), summed in the simulation order."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    out = np.zeros_like(x)
    for n in range(x.shape[0]):
        s = np.zeros(x.shape[1:])
        for i in range(min(model.p, n)):
            s = s + model.theta[i] * x[n - 1 - i]
        out[n] = x[n] - (s + xi[n])
    return out


@dataclass(frozen=True, eq=False)
class TrajectoryBundle:
    eps: np.ndarray
    xi: np.ndarray
    x: np.ndarray
    model: ArModel
    seed: int


def simulate_trajectory(model: ArModel, noise: NoiseModel, system: InnovationSystem, N: int, seed: int,
                        method: str = "innovation") -> TrajectoryBundle:
    """One path. ``method='circulant'`` is only available for fGn noise.

    With the circulant method ``eps`` holds the innovations recovered from
    ``xi`` through the forward kernel, so the bundle stays self-consistent.
    """
    rng = make_rng(seed)
    if method == "innovation":
        eps = rng.standard_normal(N)
        xi = simulate_noise_innovation(system, eps)
    elif method == "circulant":
        if noise.kind != "fgn":
            raise ValidationError("circulant generator is only defined for fgn noise", field="method")
        xi = simulate_fgn_circulant(noise.param, N, rng)
        eps = system.apply_forward(xi) / np.sqrt(system.sigma2[:N])
    else:
        raise ValidationError(f"unknown generator {method!r}", field="method")
    return TrajectoryBundle(eps, xi, simulate_ar_path(model, xi), model, int(seed))
