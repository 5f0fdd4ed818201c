"""Power allocation: UPA, stochastic-gradient APA and the robust R-APA variant.

eta holds the per-user power coefficients; the allocation matrix N is diagonal
with sqrt(eta) on its diagonal and is passed around as the 1-D array n_diag.
Gradients are with respect to the real diagonal entries of N (twice the real
diagonal of the Wirtinger matrix derivative), so they match finite differences
of the costs directly.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .precoding import LinkBudget

TOTAL_POWER = "total_power"
PER_ANTENNA = "per_antenna"

_FEAS_BAND = 1e-12     # rescale only beyond this band, so projection is idempotent


class DivergenceError(RuntimeError):
    """Raised when the gradient recursion produces non-finite coefficients."""


@dataclass
class PowerAllocation:
    eta: np.ndarray          # (K,) per-user power coefficients, >= 0
    constraint_mode: str

    @property
    def n_diag(self) -> np.ndarray:
        return np.sqrt(self.eta)


@dataclass(frozen=True)
class ApaParams:
    """Step size, iteration count and (for R-APA) the CSIT error variance."""

    mu: float = 0.01
    n_iters: int = 100
    sigma_e_sq: float = 0.0

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("step size mu must be non-negative")
        if self.n_iters < 1:
            raise ValueError("iteration count must be at least 1")


@dataclass(frozen=True)
class AntennaLoad:
    """Per-antenna weights delta[m, k] = |P_mk|^2 / rho_f against eta.

    Row m dotted with eta is the transmit power of antenna m in units of the
    per-antenna limit, so the constraint reads delta_m . eta <= 1.
    """

    delta: np.ndarray    # (M, K), non-negative


@dataclass
class ApaTrace:
    """Per-iteration diagnostics collected when apa_run/rapa_run track the descent."""

    costs: list = field(default_factory=list)
    constraint_levels: list = field(default_factory=list)   # max delta_m.eta or tr-power/E_tx


def antenna_load(P: np.ndarray, rho_f: float = 1.0) -> AntennaLoad:
    if rho_f <= 0:
        raise ValueError("per-antenna power limit must be positive")
    return AntennaLoad(delta=np.abs(P) ** 2 / rho_f)


def upa(K: int, budget: LinkBudget, P: np.ndarray, mode: str = TOTAL_POWER,
        load: AntennaLoad | None = None) -> PowerAllocation:
    """Uniform allocation with the active constraint binding with equality."""
    if K < 1:
        raise ValueError("K must be at least 1")
    if mode == TOTAL_POWER:
        c = budget.e_tx / float(np.sum(np.abs(P) ** 2))
    elif mode == PER_ANTENNA:
        if load is None:
            load = antenna_load(P, budget.rho_f)
        c = 1.0 / float(np.max(load.delta.sum(axis=1)))
    else:
        raise ValueError(f"unknown constraint mode {mode!r}")
    return PowerAllocation(eta=np.full(K, c), constraint_mode=mode)


def mse_cost(H: np.ndarray, P: np.ndarray, n_diag: np.ndarray, f: float,
             budget: LinkBudget) -> float:
    """MSE E|s - f y|^2 for y = sqrt(rho_f) H P N s + n, unit-energy symbols.

    tr(C_s) - f tr(sqrt(rho_f) HPN) - f tr(sqrt(rho_f) N^H P^H H^H)
    + f^2 tr(rho_f N^H P^H H^H H P N) + f^2 tr(C_n)
    """
    n_diag = np.asarray(n_diag, dtype=float)
    G = H @ (P * n_diag[None, :])
    sr = np.sqrt(budget.rho_f)
    t = np.trace(G)
    val = (P.shape[1]
           - f * sr * t - f * sr * np.conj(t)
           + f * f * budget.rho_f * np.sum(np.abs(G) ** 2)
           + f * f * budget.noise_trace(H.shape[0]))
    val = complex(val)
    assert abs(val.imag) < 1e-9, f"non-real MSE value, imaginary residue {val.imag:.3e}"
    return val.real


def apa_gradient(H: np.ndarray, P: np.ndarray, n_diag: np.ndarray, f: float,
                 budget: LinkBudget) -> np.ndarray:
    """Gradient of mse_cost wrt the diagonal entries of N.

    Real diagonal of -f sqrt(rho_f) P^H H^H + f^2 rho_f P^H H^H H P N, mapped
    to the real gradient (factor 2 from the Wirtinger convention).
    """
    n_diag = np.asarray(n_diag, dtype=float)
    A = P.conj().T @ H.conj().T                       # P^H H^H
    M = -f * np.sqrt(budget.rho_f) * A + f * f * budget.rho_f * (A @ (H @ (P * n_diag[None, :])))
    return 2.0 * np.real(np.diag(M))


def robust_cost(H_hat: np.ndarray, g_tilde_diag: np.ndarray | None, P: np.ndarray,
                n_diag: np.ndarray, f: float, budget: LinkBudget) -> float:
    """MSE averaged over the CSIT error: mse_cost on H_hat plus the G_tilde term.

    The error term f^2 rho_f tr(N^H P^H G_tilde P N) is the expectation of the
    quadratic H_tilde contribution, so sigma_e^2 = 0 reduces exactly to
    mse_cost evaluated on the estimate.
    """
    base = mse_cost(H_hat, P, n_diag, f, budget)
    if g_tilde_diag is None or not np.any(g_tilde_diag):
        return base
    n_diag = np.asarray(n_diag, dtype=float)
    PN = P * n_diag[None, :]
    extra = f * f * budget.rho_f * float(np.sum(np.asarray(g_tilde_diag)[:, None] * np.abs(PN) ** 2))
    return base + extra


def robust_gradient(H_hat: np.ndarray, g_tilde_diag: np.ndarray | None, P: np.ndarray,
                    n_diag: np.ndarray, f: float, budget: LinkBudget) -> np.ndarray:
    """Gradient of robust_cost wrt the diagonal of N; equals apa_gradient at G_tilde = 0."""
    grad = apa_gradient(H_hat, P, n_diag, f, budget)
    if g_tilde_diag is None or not np.any(g_tilde_diag):
        return grad
    n_diag = np.asarray(n_diag, dtype=float)
    col = np.sum(np.asarray(g_tilde_diag)[:, None] * np.abs(P) ** 2, axis=0)  # diag(P^H G P)
    return grad + 2.0 * f * f * budget.rho_f * col * n_diag


def per_antenna_projection(eta: np.ndarray, load: AntennaLoad) -> np.ndarray:
    """Clamp negatives to zero, then rescale so the worst antenna meets delta_m.eta = 1."""
    eta = np.maximum(np.asarray(eta, dtype=float), 0.0)
    worst = float(np.max(load.delta @ eta))
    if worst > 1.0 + _FEAS_BAND:
        eta = eta / worst
    return eta


def _total_power_projection(eta: np.ndarray, col_power: np.ndarray, e_tx: float) -> np.ndarray:
    eta = np.maximum(np.asarray(eta, dtype=float), 0.0)
    total = float(col_power @ eta)
    if total > e_tx * (1.0 + _FEAS_BAND):
        eta = eta * (e_tx / total)
    return eta


def _descend(H, g_tilde_diag, P, f, budget, params, mode, load, trace):
    K = P.shape[1]
    eta = np.full(K, 1e-3)
    col_power = np.sum(np.abs(P) ** 2, axis=0)
    if mode == PER_ANTENNA and load is None:
        load = antenna_load(P, budget.rho_f)

    def project(e):
        if mode == PER_ANTENNA:
            return per_antenna_projection(e, load)
        return _total_power_projection(e, col_power, budget.e_tx)

    def cost(e):
        return robust_cost(H, g_tilde_diag, P, np.sqrt(e), f, budget)

    def level(e):
        if mode == PER_ANTENNA:
            return float(np.max(load.delta @ e))
        return float(col_power @ e) / budget.e_tx

    eta = project(eta)
    cost_start = cost(eta)
    if trace is not None:
        trace.costs.append(cost_start)
        trace.constraint_levels.append(level(eta))
    for _ in range(params.n_iters):
        n = np.sqrt(eta)
        g = robust_gradient(H, g_tilde_diag, P, n, f, budget)
        with np.errstate(over="ignore"):
            n = np.maximum(n - params.mu * g, 0.0)
            eta = n * n
        if not np.all(np.isfinite(eta)):
            raise DivergenceError(
                f"power-allocation recursion diverged (step size mu={params.mu}); reduce mu"
            )
        eta = project(eta)
        if trace is not None:
            trace.costs.append(cost(eta))
            trace.constraint_levels.append(level(eta))
    cost_end = trace.costs[-1] if trace is not None else cost(eta)
    if cost_end > cost_start + 1e-9:
        warnings.warn(
            f"final cost {cost_end:.6g} exceeds initial {cost_start:.6g}; "
            f"step size mu={params.mu} looks too large",
            RuntimeWarning,
        )
    return PowerAllocation(eta=eta, constraint_mode=mode)


def apa_run(H: np.ndarray, P: np.ndarray, f: float, budget: LinkBudget, params: ApaParams,
            mode: str = TOTAL_POWER, load: AntennaLoad | None = None,
            trace: ApaTrace | None = None) -> PowerAllocation:
    """Stochastic-gradient power allocation: eta_k[0] = 1e-3, T descent steps.

    Each step keeps the real diagonal, clamps negatives and applies the
    constraint projection for the given mode.
    """
    return _descend(H, None, P, f, budget, params, mode, load, trace)


def rapa_run(H_hat: np.ndarray, g_tilde_diag: np.ndarray, P: np.ndarray, f: float,
             budget: LinkBudget, params: ApaParams, mode: str = TOTAL_POWER,
             load: AntennaLoad | None = None, trace: ApaTrace | None = None) -> PowerAllocation:
    """Robust variant of apa_run descending the CSIT-error-averaged cost.

    With sigma_e^2 = 0 (all-zero g_tilde_diag) the trajectory is bitwise
    identical to apa_run on the same inputs.
    """
    return _descend(H_hat, g_tilde_diag, P, f, budget, params, mode, load, trace)
