"""Companion-matrix spectra and the Fisher information I = A0 I A0^T + b b^T."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, OutsideStabilityRegion, ValidationError
from .state_space import companion

BOUNDARY_BAND = 1e-6
SERIES_TOL = 1e-14
RADIUS_INFLATION = 1e-8
AGREEMENT_TOL = 1e-10


def _theta(theta) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.ndim != 1 or theta.size == 0:
        raise ValidationError("theta must be a non-empty vector", field="theta")
    return theta


def spectral_radius(theta) -> float:
    """Largest eigenvalue modulus of the companion matrix of theta."""
    theta = _theta(theta)
    p = theta.size
    if p == 1:
        return abs(float(theta[0]))
    if p == 2:
        t1, t2 = float(theta[0]), float(theta[1])
        disc = t1 * t1 + 4.0 * t2
        if disc >= 0.0:
            s = math.sqrt(disc)
            # avoid cancellation in the smaller root
            big = 0.5 * (t1 + math.copysign(s, t1)) if t1 != 0.0 else 0.5 * s
            small = (-t2 / big) if big != 0.0 else 0.0
            return max(abs(big), abs(small))
        return math.sqrt(-t2)
    return float(np.max(np.abs(np.linalg.eigvals(companion(theta)))))


def lyapunov_series(A, Q, radius: float | None = None):
    """sum_k A^k Q (A^T)^k by doubling: after j steps P holds the first 2^j terms.

    Stops once r^{2n} ||Q|| / (1 - r^2) < 1e-14 and the latest block of terms
    is below 1e-14 relative.  Returns ``(P, n_terms)``.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    r = float(np.max(np.abs(np.linalg.eigvals(A)))) if radius is None else radius
    r = r + RADIUS_INFLATION
    if r >= 1.0:
        raise OutsideStabilityRegion(f"outside stability region (r = {r:.6g})")
    qn = float(np.max(np.abs(Q)))
    P = Q.copy()
    B = A.copy()
    n = 1
    while True:
        block = B @ P @ B.T  # terms n .. 2n-1
        P = P + block
        B = B @ B
        n *= 2
        bound = r ** (2 * n) * qn / (1.0 - r * r)
        if bound < SERIES_TOL and np.max(np.abs(block)) < SERIES_TOL * max(1.0, np.max(np.abs(P))):
            break
        if n > 2**62:
            raise NumericalError("Lyapunov series failed to converge")
    return P, n


def lyapunov_vectorized(A, Q) -> np.ndarray:
    """Solve P = A P A^T + Q via (I - A kron A) vec(P) = vec(Q)."""
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    p = A.shape[0]
    system = np.eye(p * p) - np.kron(A, A)
    P = np.linalg.solve(system, Q.reshape(-1)).reshape(p, p)
    # one refinement step
    resid = Q + A @ P @ A.T - P
    P = P + np.linalg.solve(system, resid.reshape(-1)).reshape(p, p)
    return 0.5 * (P + P.T)


def lyapunov_residual(A, P, Q) -> float:
    return float(np.max(np.abs(A @ P @ A.T + Q - P)))


@dataclass(frozen=True, eq=False)
class FisherInfo:
    info: np.ndarray
    inverse: np.ndarray
    spectral_radius: float
    stable: bool
    near_boundary: bool
    series_gap: float
    residual: float
    # max(1, max|info|); residual / scale and series_gap / scale are the
    # precision-meaningful quantities when info has large entries
    scale: float


def fisher_info(theta) -> FisherInfo:
    """Fisher information of theta; depends on theta only, never on the noise law."""
    theta = _theta(theta)
    r = spectral_radius(theta)
    if r >= 1.0:
        raise OutsideStabilityRegion(f"outside stability region (r = {r:.6g})")
    A = companion(theta)
    Q = np.zeros_like(A)
    Q[0, 0] = 1.0
    info = lyapunov_vectorized(A, Q)
    series, _ = lyapunov_series(A, Q, radius=r)
    gap = float(np.max(np.abs(series - info)))
    return FisherInfo(
        info=info,
        inverse=np.linalg.inv(info),
        spectral_radius=r,
        stable=True,
        near_boundary=r > 1.0 - BOUNDARY_BAND,
        series_gap=gap,
        residual=lyapunov_residual(A, info, Q),
        scale=max(1.0, float(np.max(np.abs(info)))),
    )


def fisher_derivative(theta, i: int) -> np.ndarray:
    """d I / d theta_i from the differentiated Lyapunov equation."""
    theta = _theta(theta)
    A = companion(theta)
    info = fisher_info(theta).info
    dA = np.zeros_like(A)
    dA[0, i] = 1.0
    rhs = dA @ info @ A.T + A @ info @ dA.T
    return lyapunov_vectorized(A, rhs)


def random_stable_theta(rng: np.random.Generator, p: int, max_radius: float = 0.95) -> np.ndarray:
    """Draw theta whose companion roots lie uniformly in the disc of radius max_radius."""
    roots = []
    while len(roots) < p:
        if p - len(roots) >= 2 and rng.random() < 0.5:
            rad = max_radius * math.sqrt(rng.random())
            ang = rng.uniform(0.0, math.pi)
            z = rad * complex(math.cos(ang), math.sin(ang))
            roots.extend([z, z.conjugate()])
        else:
            roots.append(complex(rng.uniform(-max_radius, max_radius), 0.0))
    poly = np.poly(roots).real  # 1, -theta_1, ..., -theta_p
    return -poly[1:]
