"""MF, ZF and MMSE downlink precoders with power normalization.

Channel orientation follows scenario.py: H_hat is (streams, tx), precoding
matrices are (tx, streams).  Power-allocation diagonals are passed as 1-D real
arrays n_diag (the entries sqrt(eta_k) of the diagonal matrix N).
"""

from dataclasses import dataclass

import numpy as np

MF = "mf"
ZF = "zf"
MMSE = "mmse"

_COND_LIMIT = 1e12


class SingularChannelError(np.linalg.LinAlgError):
    """Raised when a channel realization is too ill-conditioned to invert."""


class OracleConvergenceError(RuntimeError):
    """Raised when the numerical MSE minimizer fails to converge."""


@dataclass(frozen=True)
class LinkBudget:
    """Transmit power budget and noise level.

    e_tx is the total transmit power; rho_f is the scalar appearing as
    sqrt(rho_f) in the link equation (1.0 when the budget is absorbed into the
    precoder scale); sigma_n_sq is the per-receive-antenna noise variance.
    Symbol covariance is identity throughout (unit-energy symbols).
    """

    e_tx: float
    rho_f: float = 1.0
    sigma_n_sq: float = 1.0

    def __post_init__(self):
        if self.e_tx <= 0 or self.rho_f <= 0 or self.sigma_n_sq < 0:
            raise ValueError("link budget entries must be positive (noise may be zero)")

    def noise_trace(self, rx_dim: int) -> float:
        """tr(C_n) for C_n = sigma_n^2 * I of the given receive dimension."""
        return rx_dim * self.sigma_n_sq


@dataclass(frozen=True)
class Precoder:
    P: np.ndarray    # (tx, streams)
    f: float         # receiver scaling factor
    kind: str


def _scaled_norm_sq(P0: np.ndarray, n_diag=None) -> float:
    """tr(P0 N N^H P0^H) for diagonal N."""
    if n_diag is None:
        return float(np.sum(np.abs(P0) ** 2))
    return float(np.sum(np.abs(P0) ** 2 * np.asarray(n_diag)[None, :] ** 2))


def mf_precoder(H_hat: np.ndarray, budget: LinkBudget) -> Precoder:
    """Conjugate beamforming: P = H_hat^H scaled to the total-power budget."""
    P0 = H_hat.conj().T
    c = np.sqrt(budget.e_tx / _scaled_norm_sq(P0))
    return Precoder(P=c * P0, f=1.0, kind=MF)


def zf_precoder(H_hat: np.ndarray, budget: LinkBudget) -> Precoder:
    """Zero forcing: right pseudo-inverse, so H_hat @ P is a scaled identity.

    The stored P meets the total-power budget with equality at N = I, and
    f is the reciprocal of the applied scale: f * H_hat @ P = I.
    """
    gram = H_hat @ H_hat.conj().T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularChannelError(
            f"rank-deficient channel: cond(H H^H) = {cond:.3e} for shape {H_hat.shape}"
        )
    P0 = np.linalg.solve(gram, H_hat).conj().T   # H^H (H H^H)^{-1}
    c = np.sqrt(budget.e_tx / _scaled_norm_sq(P0))
    return Precoder(P=c * P0, f=1.0 / c, kind=ZF)


def mmse_precoder(H_hat: np.ndarray, n_diag: np.ndarray, budget: LinkBudget) -> Precoder:
    """Regularized inverse H^H (H H^H + tr(C_n)/E_tx * I)^{-1} N^{-1}, power-normalized.

    The direction is scaled by c so the power constraint
    tr(c^2 P0 N N^H P0^H) = E_tx binds, and divided by sqrt(rho_f); the stored
    f = 1/c is the jointly MSE-optimal receiver scale for the returned P.
    """
    n_diag = np.asarray(n_diag, dtype=float)
    if np.any(n_diag <= 0):
        raise ValueError("power-allocation diagonal must be strictly positive")
    rx = H_hat.shape[0]
    xi = budget.noise_trace(rx) / budget.e_tx
    gram = H_hat @ H_hat.conj().T + xi * np.eye(rx)
    P0 = np.linalg.solve(gram, H_hat).conj().T / n_diag[None, :]
    c = np.sqrt(budget.e_tx / _scaled_norm_sq(P0, n_diag))
    P = (c / np.sqrt(budget.rho_f)) * P0
    return Precoder(P=P, f=1.0 / c, kind=MMSE)


def optimal_receiver_scale(H: np.ndarray, P: np.ndarray, n_diag: np.ndarray,
                           budget: LinkBudget) -> float:
    """Receiver factor minimizing E|s - f y|^2 for fixed H, P, N."""
    G = np.sqrt(budget.rho_f) * (H @ (P * np.asarray(n_diag)[None, :]))
    num = np.real(np.trace(G))
    den = float(np.sum(np.abs(G) ** 2)) + budget.noise_trace(H.shape[0])
    return num / den


def _mse(H, P, n_diag, f, budget):
    """E|s - f y|^2 with unit-energy symbols; same expansion as power_allocation.mse_cost."""
    G = np.sqrt(budget.rho_f) * (H @ (P * n_diag[None, :]))
    K = P.shape[1]
    return (K - 2.0 * f * np.real(np.trace(G)) + f * f * float(np.sum(np.abs(G) ** 2))
            + f * f * budget.noise_trace(H.shape[0]))


def mmse_oracle(H_hat: np.ndarray, n_diag: np.ndarray, budget: LinkBudget,
                n_starts: int = 4, max_iters: int = 4000, tol: float = 1e-12,
                rng: np.random.Generator | None = None) -> Precoder:
    """Numerical minimizer of the MSE over (P, f) under the power constraint.

    Projected gradient descent with backtracking on P, exact minimization of f
    at every step, best of n_starts random initializations.  Intended as a
    test oracle for small dimensions; raises OracleConvergenceError if no
    start converges within max_iters.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    n_diag = np.asarray(n_diag, dtype=float)
    rx, tx = H_hat.shape
    K = rx
    best = None
    converged = False

    def project(P):
        pw = _scaled_norm_sq(P, n_diag)
        if pw > budget.e_tx:
            P = P * np.sqrt(budget.e_tx / pw)
        return P

    for _ in range(n_starts):
        P = (rng.standard_normal((tx, K)) + 1j * rng.standard_normal((tx, K)))
        P = project(P * np.sqrt(budget.e_tx / _scaled_norm_sq(P, n_diag)))
        f = optimal_receiver_scale(H_hat, P, n_diag, budget)
        cost = _mse(H_hat, P, n_diag, f, budget)
        step = 0.25
        for _ in range(max_iters):
            # Wirtinger gradient of the cost wrt conj(P), columns scaled by N
            G = H_hat @ (P * n_diag[None, :])
            grad = (-f * np.sqrt(budget.rho_f) * H_hat.conj().T
                    + f * f * budget.rho_f * H_hat.conj().T @ G) * n_diag[None, :]
            improved = False
            while step > 1e-18:
                P_try = project(P - step * grad)
                f_try = optimal_receiver_scale(H_hat, P_try, n_diag, budget)
                cost_try = _mse(H_hat, P_try, n_diag, f_try, budget)
                if cost_try < cost:
                    improved = True
                    break
                step *= 0.5
            if not improved:
                converged = True       # no descent direction at resolution limit
                break
            decrease = cost - cost_try
            P, f, cost = P_try, f_try, cost_try
            step = min(step * 2.0, 1.0)
            if decrease < tol * max(1.0, abs(cost)):
                converged = True
                break
        if best is None or cost < best[2]:
            best = (P, f, cost)

    if not converged:
        raise OracleConvergenceError(
            f"MSE minimizer did not converge within {max_iters} iterations"
        )
    P, f, _ = best
    return Precoder(P=P, f=f, kind=MMSE)
