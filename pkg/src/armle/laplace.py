"""Laplace transform of the bracket, L_N(mu) = E exp(-(mu/2) a^T <M>_N a).

Routes, all independent of one another except where noted:

* ``laplace_explicit``   4p x 4p Kronecker product chain
* ``p1_laplace``         p = 1 closed form through 2 x 2 products S(a)
* ``laplace_dense``      det(I + mu W^T W)^(-1/2) from dense Toeplitz algebra
* ``laplace_monte_carlo`` sample mean over simulated paths
* ``eigen_approx``       large-N approximation from the spectrum of A_mu

Conventions fixed against the dense oracle:

* A_mu = [[A0^-1, A0^-1 b b^T], [mu a a^T A0^-1, A0^T + mu a a^T A0^-1 b b^T]]
  (det A_mu = 1).
* Product chains put the newest factor on the left: F_N ... F_1.
* S(a, beta, N) has N-1 factors; the N-factor product that appears in the
  p = 1 formula is ``s_product(a, beta, N + 1)``.
* beta_N enters L_N only through factors that cancel; when the innovation
  system stops at horizon N it is taken as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import fisher_info, spectral_radius
from .errors import AssumptionViolated, ValidationError
from .estimation import bracket_batch
from .innovations import InnovationSystem, system_for, toeplitz_covariance
from .noise import NoiseModel, covariance_sequence
from .simulate import child_seed, make_rng, simulate_ar_path, simulate_noise_innovation
from .state_space import ArModel, companion

EIG_SEPARATION = 1e-8
UNIT_CIRCLE_BAND = 1e-10
MC_CHUNK = 20_000


@dataclass(frozen=True, eq=False)
class LaplaceEvaluation:
    value: float
    method: str
    mu: float
    alpha_dir: np.ndarray
    N: int
    eigenvalues: np.ndarray | None = None
    stderr: float | None = None
    extra: dict = field(default_factory=dict)


def _prep(theta, alpha_dir):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    alpha = np.atleast_1d(np.asarray(alpha_dir, dtype=float))
    if alpha.shape != theta.shape:
        raise ValidationError(f"alpha_dir has shape {alpha.shape}, expected {theta.shape}", field="alpha_dir")
    return theta, alpha


def amu_matrix(theta, alpha_dir, mu: float) -> np.ndarray:
    theta, alpha = _prep(theta, alpha_dir)
    p = theta.size
    A0 = companion(theta)
    A0i = np.linalg.inv(A0)
    bb = np.zeros((p, p))
    bb[0, 0] = 1.0
    aa = np.outer(alpha, alpha)
    return np.block([[A0i, A0i @ bb], [mu * aa @ A0i, A0.T + mu * aa @ A0i @ bb]])


def permutation_matrix(p: int) -> np.ndarray:
    """J with J[i, j] = 1 iff i = pi(j) (1-based), pi interleaving the four p-blocks."""
    pi = np.empty(4 * p, dtype=int)
    for k in range(p):
        pi[2 * k] = k  # i = 2k+1 -> k+1
        pi[2 * p + 2 * k] = 2 * p + k  # i = 2p+2k+1 -> 2p+k+1
    for r in range(1, p + 1):
        pi[2 * r - 1] = p + r - 1  # i = 2r -> p+r
        pi[2 * r + 2 * p - 1] = 3 * p + r - 1  # i = 2r+2p -> 3p+r
    J = np.zeros((4 * p, 4 * p))
    J[pi, np.arange(4 * p)] = 1.0
    return J


def a1(beta_n: float) -> np.ndarray:
    return np.array([[1.0, 0.0], [-beta_n, 0.0]])


def a2(beta_n: float) -> np.ndarray:
    return np.array([[0.0, -beta_n], [0.0, 1.0]])


def check_simple_eigenvalues(theta) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    ev = np.linalg.eigvals(companion(theta))
    scale = max(1.0, float(np.max(np.abs(ev))))
    if theta[-1] == 0.0 or np.min(np.abs(ev)) < EIG_SEPARATION * scale:
        raise AssumptionViolated("assumption violated: A0 has a zero eigenvalue; use monte_carlo")
    if ev.size > 1:
        gaps = np.abs(ev[:, None] - ev[None, :])
        gaps[np.diag_indices(ev.size)] = np.inf
        if np.min(gaps) < EIG_SEPARATION * scale:
            raise AssumptionViolated("assumption violated: A0 has a repeated eigenvalue; use monte_carlo")
    return ev


def _betas_through(system: InnovationSystem, N: int) -> tuple[np.ndarray, float]:
    """(beta_1..beta_N, sigma^2_{N+1}), with beta_N := 0 if the system stops at N."""
    if system.N < N:
        raise ValidationError(f"innovation system horizon {system.N} < N={N}", field="N")
    if system.N >= N + 1:
        return system.beta[:N].copy(), float(system.sigma2[N])
    return np.concatenate((system.beta[: N - 1], [0.0])), float(system.sigma2[N - 1])


def log_det_transition_product(theta, system: InnovationSystem, N: int) -> tuple[float, float]:
    """(sign, log|prod_{n<=N} det A_n|) with det A_n = (1 - beta_n^2)^p det A0."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    betas, _ = _betas_through(system, N)
    det_a0 = float(np.linalg.det(companion(theta)))
    log_abs = theta.size * float(np.sum(np.log1p(-betas**2))) + N * math.log(abs(det_a0))
    return math.copysign(1.0, det_a0) ** N, log_abs


def laplace_explicit(theta, system: InnovationSystem, alpha_dir, mu: float, N: int) -> LaplaceEvaluation:
    """L_N(mu) = (prod_n det A_n * det Psi_N)^(-1/2) via the Kronecker chain.

    The 2p x 4p running product is re-orthonormalised after every factor and
    the discarded triangular scale is accumulated as a log-determinant.
    """
    theta, alpha = _prep(theta, alpha_dir)
    if mu < 0:
        raise ValidationError("mu must be >= 0", field="mu")
    if N < 1:
        raise ValidationError("N must be >= 1", field="N")
    check_simple_eigenvalues(theta)
    amu = amu_matrix(theta, alpha, mu)
    eig = np.linalg.eigvals(amu)
    if mu == 0.0 or not np.any(alpha):
        return LaplaceEvaluation(1.0, "explicit", mu, alpha, N, eig)

    p = theta.size
    betas, s2_next = _betas_through(system, N)
    J = permutation_matrix(p)
    psi0 = np.hstack((np.eye(2 * p), np.zeros((2 * p, 2 * p))))
    ident = np.eye(2 * p)

    R = psi0 @ J
    log_scale = 0.0
    sign = 1.0
    for n in range(N, 0, -1):
        b = betas[n - 1]
        R = R @ (np.kron(amu, a1(b)) + np.kron(ident, a2(b)))
        q, r = np.linalg.qr(R.T)
        d = np.diag(r)
        log_scale += float(np.sum(np.log(np.abs(d))))
        sign *= float(np.prod(np.sign(d)))
        R = q.T
    final = R @ J.T @ psi0.T
    s_det, log_det = np.linalg.slogdet(final)
    log_psi_scaled = log_scale + log_det  # log|det(sigma^2_{N+1} Psi_N)|
    sign *= s_det

    det_sign, log_prod_det = log_det_transition_product(theta, system, N)
    sign *= det_sign
    log_total = log_prod_det + log_psi_scaled - 2 * p * math.log(s2_next)
    if sign <= 0:
        raise AssumptionViolated("explicit formula produced a non-positive determinant")
    value = math.exp(-0.5 * log_total)
    return LaplaceEvaluation(value, "explicit", mu, alpha, N, eig,
                             extra={"log_value": -0.5 * log_total, "log_det_prod": log_prod_det})


def laplace_dense(theta, rho, alpha_dir, mu: float, N: int) -> LaplaceEvaluation:
    """Exact L_N(mu) from dense Toeplitz algebra, independent of the innovation machinery.

    With xi = C eps (C the Cholesky factor of Gamma_N), X = T^-1 xi and
    Phi a = sum_i a_i S^i X, a^T <M>_N a = |C^-1 (Phi a)|^2 = |W eps|^2, hence
    L = prod_i (1 + mu s_i(W)^2)^(-1/2).
    """
    theta, alpha = _prep(theta, alpha_dir)
    gamma = toeplitz_covariance(rho, N)
    C = np.linalg.cholesky(gamma)
    T = np.eye(N)
    P = np.zeros((N, N))
    for i in range(theta.size):
        shift = np.eye(N, k=-(i + 1))
        T -= theta[i] * shift
        P += alpha[i] * shift
    X = np.linalg.solve(T, C)
    W = np.linalg.solve(C, P @ X)
    s = np.linalg.svd(W, compute_uv=False)
    value = math.exp(-0.5 * float(np.sum(np.log1p(mu * s**2))))
    return LaplaceEvaluation(value, "dense", mu, alpha, N)


def laplace_monte_carlo(theta, model: NoiseModel, alpha_dir, mu: float, N: int, replications: int,
                        seed: int, system: InnovationSystem | None = None) -> LaplaceEvaluation:
    """Sample mean of exp(-(mu/2) a^T <M>_N a) over independent simulated paths."""
    theta, alpha = _prep(theta, alpha_dir)
    if replications < 100:
        raise ValidationError("laplace_monte_carlo needs at least 100 replications", field="replications")
    if mu == 0.0 or not np.any(alpha):
        return LaplaceEvaluation(1.0, "monte_carlo", mu, alpha, N, stderr=0.0)
    if system is None:
        system = system_for(model, N)
    ar = ArModel(theta)
    total = 0.0
    total_sq = 0.0
    done = 0
    chunk_idx = 0
    # chunk means are merged in index order; the result depends only on (seed, replications)
    while done < replications:
        m = min(MC_CHUNK, replications - done)
        rng = make_rng(child_seed(seed, chunk_idx))
        eps = rng.standard_normal((N, m))
        x = simulate_ar_path(ar, simulate_noise_innovation(system, eps))
        br = bracket_batch(x, theta.size, system)
        q = np.einsum("i,mij,j->m", alpha, br, alpha)
        vals = np.exp(-0.5 * mu * q)
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals**2))
        done += m
        chunk_idx += 1
    mean = total / replications
    var = max(total_sq / replications - mean * mean, 0.0) * replications / (replications - 1)
    return LaplaceEvaluation(mean, "monte_carlo", mu, alpha, N, stderr=math.sqrt(var / replications),
                             extra={"replications": replications, "seed": seed})


def s_factor(a: float, beta_n: float) -> np.ndarray:
    return np.array([[a, -beta_n], [-a * beta_n, 1.0]])


def s_product(a: float, beta, N: int) -> np.ndarray:
    """S_N(a) = prod_{n=1}^{N-1} [[a, -beta_n], [-a beta_n, 1]], newest factor on the left.

    ``beta[0]`` is beta_1.
    """
    beta = np.asarray(beta, dtype=float)
    if N < 1:
        raise ValidationError("N must be >= 1", field="N")
    if len(beta) < N - 1:
        raise ValidationError(f"need {N - 1} betas, got {len(beta)}", field="beta")
    out = np.eye(2)
    for n in range(1, N):
        out = s_factor(a, beta[n - 1]) @ out
    return out


def s_product_logdet(a: float, beta, N: int) -> tuple[float, float]:
    """(sign, log|det S_N(a)|) from the product kept in Q R form.

    Each step folds the new factor into Q and re-factorises, so the
    determinant never comes from differencing large entries.
    """
    beta = np.asarray(beta, dtype=float)
    if len(beta) < N - 1:
        raise ValidationError(f"need {N - 1} betas, got {len(beta)}", field="beta")
    q = np.eye(2)
    sign, log_abs = 1.0, 0.0
    for n in range(1, N):
        q, r = np.linalg.qr(s_factor(a, beta[n - 1]) @ q)
        d = np.diag(r)
        sign *= float(np.prod(np.sign(d)))
        log_abs += float(np.sum(np.log(np.abs(d))))
    return sign * float(np.sign(np.linalg.det(q))), log_abs


def s_inverse(a: float, beta, N: int) -> np.ndarray:
    """S_N(a)^-1 accumulated from the factor inverses (bounded for |a| > 1)."""
    beta = np.asarray(beta, dtype=float)
    out = np.eye(2)
    for n in range(1, N):
        b = beta[n - 1]
        inv = np.array([[1.0, b], [a * b, a]]) / (a * (1.0 - b * b))
        out = out @ inv
    return out


def g_product(a: float, beta, N: int) -> np.ndarray:
    """G_N(a) = S_N(1/a)^-1 S_N(a), finite at a = 0.

    Uses [[1/a, -b], [-b/a, 1]]^-1 = (1 - b^2)^-1 [[a, a b], [b, 1]].
    """
    beta = np.asarray(beta, dtype=float)
    out = np.eye(2)
    for n in range(N - 1, 0, -1):
        b = beta[n - 1]
        inv = np.array([[a, a * b], [b, 1.0]]) / (1.0 - b * b)
        out = inv @ out @ s_factor(a, b)
    return out


def p1_lambdas(theta: float, mu: float) -> tuple[float, float]:
    """(lambda_+, lambda_-) for p = 1; lambda_+/theta and lambda_-/theta are the eigenvalues of A_mu."""
    theta = float(np.asarray(theta).reshape(-1)[0])
    if theta == 0.0:
        raise AssumptionViolated("closed form undefined at theta = 0; perturb theta")
    if mu <= 0.0:
        raise ValidationError("p1_lambdas needs mu > 0", field="mu")
    disc = (mu + (1.0 - theta) ** 2) * (mu + (1.0 + theta) ** 2)
    lam_plus = 0.5 * (theta * theta + mu + 1.0 + math.sqrt(disc))
    return lam_plus, theta * theta / lam_plus


def p1_laplace(theta: float, system: InnovationSystem, mu: float, N: int) -> LaplaceEvaluation:
    """p = 1 closed form: L_N = lambda_+^(-N/2) c_+^-1 det(I + kappa S_+^-1 S_-)^(-1/2).

    ``S_pm`` are the N-factor products at a = lambda_pm / theta,
    c_+ = (1 - lambda_-)/(lambda_+ - lambda_-) and
    kappa = (lambda_+ - 1)/(1 - lambda_-).
    """
    theta = float(np.asarray(theta).reshape(-1)[0])
    lam_p, lam_m = p1_lambdas(theta, mu)
    betas, s2_next = _betas_through(system, N)
    a_p, a_m = lam_p / theta, lam_m / theta
    c_plus = (1.0 - lam_m) / (lam_p - lam_m)
    kappa = (lam_p - 1.0) / (1.0 - lam_m)
    s_minus = s_product(a_m, betas, N + 1)
    g = s_inverse(a_p, betas, N + 1) @ s_minus
    bounded = float(np.linalg.det(np.eye(2) + kappa * g))
    log_value = -0.5 * N * math.log(lam_p) - math.log(c_plus) - 0.5 * math.log(bounded)
    return LaplaceEvaluation(math.exp(log_value), "p1_closed_form", mu, np.array([1.0]), N,
                             np.array([a_p, a_m]),
                             extra={"log_value": log_value, "lambda_plus": lam_p, "lambda_minus": lam_m, "kappa": kappa,
                                    "bounded_factor": bounded, "sigma2_next": s2_next})


def _large_eigs(theta, alpha, mu):
    p = np.atleast_1d(theta).size
    ev = np.linalg.eigvals(amu_matrix(theta, alpha, mu))
    mods = np.abs(ev)
    if np.any(np.abs(mods - 1.0) < UNIT_CIRCLE_BAND):
        raise AssumptionViolated("eigenvalue of A_mu on the unit circle; split ambiguous")
    big = ev[mods > 1.0]
    if big.size != p:
        raise AssumptionViolated(f"expected {p} eigenvalues outside the unit circle, found {big.size}")
    return big


def log_eigen_ratio(theta, alpha_dir, mu: float) -> float:
    """log prod_i lambda_i(mu)/lambda_i(0) over the p eigenvalues outside the unit circle."""
    theta, alpha = _prep(theta, alpha_dir)
    big = _large_eigs(theta, alpha, mu)
    ratio = np.prod(big) * np.linalg.det(companion(theta))  # prod lambda_i(0) = 1/det A0
    if abs(ratio.imag) > 1e-9 * abs(ratio) or ratio.real <= 0:
        raise AssumptionViolated(f"eigenvalue ratio not positive real: {ratio}")
    return math.log(ratio.real)


def eigen_approx(theta, alpha_dir, mu: float, N: int) -> LaplaceEvaluation:
    """Lbar_N(mu) = prod_i (lambda_i(mu)/lambda_i(0))^(-N/2)."""
    theta, alpha = _prep(theta, alpha_dir)
    if spectral_radius(theta) >= 1.0:
        raise ValidationError("eigen_approx needs r(theta) < 1", field="theta")
    check_simple_eigenvalues(theta)
    if mu == 0.0:
        return LaplaceEvaluation(1.0, "eigen_approx", mu, alpha, N)
    lr = log_eigen_ratio(theta, alpha, mu)
    return LaplaceEvaluation(math.exp(-0.5 * N * lr), "eigen_approx", mu, alpha, N,
                             _large_eigs(theta, alpha, mu), extra={"log_value": -0.5 * N * lr})


def eigen_log_derivative(theta, alpha_dir, step: float = 1e-6) -> float:
    """Central difference of sum_i log lambda_i(mu) at mu = 0."""
    return (log_eigen_ratio(theta, alpha_dir, step) - log_eigen_ratio(theta, alpha_dir, -step)) / (2 * step)


@dataclass(frozen=True)
class LimitPoint:
    N: int
    value: float
    target: float
    method: str
    stderr: float | None = None

    @property
    def rel_gap(self) -> float:
        return abs(self.value - self.target) / self.target


def limit_target(theta, alpha_dir) -> float:
    theta, alpha = _prep(theta, alpha_dir)
    info = fisher_info(theta).info
    return math.exp(-0.5 * float(alpha @ info @ alpha))


def limit_check(theta, model: NoiseModel, alpha_dir, N_grid, replications: int = 20_000,
                seed: int = 0) -> list[LimitPoint]:
    """L_N(1/N) on a grid of N against exp(-a^T I(theta) a / 2).

    Uses the explicit chain when A0 has simple non-zero eigenvalues, Monte
    Carlo otherwise.
    """
    theta, alpha = _prep(theta, alpha_dir)
    if spectral_radius(theta) >= 1.0:
        raise ValidationError("limit_check needs r(theta) < 1", field="theta")
    target = limit_target(theta, alpha)
    try:
        check_simple_eigenvalues(theta)
        explicit = True
    except AssumptionViolated:
        explicit = False
    grid = sorted(int(n) for n in N_grid)
    out = []
    if explicit:
        system = system_for(model, grid[-1] + 1, kernels=False)
        for n in grid:
            ev = laplace_explicit(theta, system, alpha, 1.0 / n, n)
            out.append(LimitPoint(n, ev.value, target, "explicit"))
    else:
        for n in grid:
            ev = laplace_monte_carlo(theta, model, alpha, 1.0 / n, n, replications, seed)
            out.append(LimitPoint(n, ev.value, target, "monte_carlo", ev.stderr))
    return out


def noise_rho(model: NoiseModel, N: int) -> np.ndarray:
    return covariance_sequence(model, N - 1)
