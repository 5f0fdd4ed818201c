"""Network geometry, large-scale fading and channel realizations.

Channel matrices are stored receive-dim x transmit-dim so that the received
signal is y = sqrt(rho_f) * H @ x + n in both topologies:
  cell-free:  H is (K, M)       -- K single-antenna users, M single-antenna APs
  multi-cell: H is (N_r, N_t)   -- per ordered (rx cell, tx cell) pair
"""

from dataclasses import dataclass

import numpy as np

CF = "cf"
MC = "mc"

IID_UNIT = "iid_unit"
LARGE_SCALE = "large_scale"


@dataclass
class ScenarioConfig:
    """Topology, antenna counts and fading parameters for one scenario."""

    topology: str = CF
    M: int = 64                      # APs (cell-free)
    K: int = 16                      # users (cell-free)
    n_cells: int = 4                 # cells (multi-cell)
    N_t: int = 16                    # BS antennas per cell (multi-cell)
    N_r: int = 4                     # total receive antennas per cell
    N_k: int = 1                     # antennas per user (multi-cell)
    area_side_m: float = 1000.0      # square side (cell-free)
    cell_radius_m: float = 500.0     # hexagon circumradius (multi-cell)
    d_min_m: float = 1.0             # minimum tx-user distance
    path_loss_exponent: float = 3.5
    shadowing_sigma_db: float = 8.0
    fading_mode: str = LARGE_SCALE

    def __post_init__(self):
        if self.topology not in (CF, MC):
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.fading_mode not in (IID_UNIT, LARGE_SCALE):
            raise ValueError(f"unknown fading_mode {self.fading_mode!r}")
        if self.topology == CF:
            if not self.M >= self.K >= 1:
                raise ValueError(f"cell-free requires M >= K >= 1, got M={self.M}, K={self.K}")
            if self.d_min_m >= self.area_side_m:
                raise ValueError("d_min_m must be smaller than area_side_m")
        else:
            if not self.N_t >= self.N_r >= 1:
                raise ValueError(f"multi-cell requires N_t >= N_r >= 1, got N_t={self.N_t}, N_r={self.N_r}")
            if self.n_cells < 1:
                raise ValueError("n_cells must be positive")
            if self.N_r % self.N_k != 0:
                raise ValueError(f"N_r={self.N_r} must be a multiple of N_k={self.N_k}")
            if self.d_min_m >= self.cell_radius_m:
                raise ValueError("d_min_m must be smaller than cell_radius_m")
        if min(self.area_side_m, self.cell_radius_m, self.d_min_m) <= 0:
            raise ValueError("all lengths must be strictly positive")

    @property
    def users_per_cell(self) -> int:
        return self.N_r // self.N_k


@dataclass
class CsitErrorModel:
    """Per-entry CSIT error variance sigma_e^2, relative to the large-scale coefficient."""

    sigma_e_sq: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.sigma_e_sq <= 1.0:
            raise ValueError(f"sigma_e_sq must lie in [0, 1], got {self.sigma_e_sq}")


@dataclass
class CfGeometry:
    ap_xy: np.ndarray   # (M, 2)
    ue_xy: np.ndarray   # (K, 2)


@dataclass
class McGeometry:
    bs_xy: np.ndarray   # (C, 2)
    ue_xy: np.ndarray   # (C, users_per_cell, 2)


@dataclass
class ChannelRealization:
    """True channel H, transmitter-side estimate H_hat and error H_tilde.

    H = H_hat + H_tilde holds entrywise.  Cell-free arrays are (K, M);
    multi-cell arrays are (C, C, N_r, N_t) indexed [rx_cell, tx_cell].
    """

    H: np.ndarray
    H_hat: np.ndarray
    H_tilde: np.ndarray
    beta: np.ndarray


def place_cf_topology(cfg: ScenarioConfig, rng: np.random.Generator) -> CfGeometry:
    """Drop M APs and K users uniformly i.i.d. in the square [0, area_side]^2."""
    if cfg.topology != CF:
        raise ValueError("place_cf_topology requires a cell-free config")
    ap_xy = rng.uniform(0.0, cfg.area_side_m, size=(cfg.M, 2))
    ue_xy = rng.uniform(0.0, cfg.area_side_m, size=(cfg.K, 2))
    return CfGeometry(ap_xy=ap_xy, ue_xy=ue_xy)


def _hex_centers(n_cells: int, radius: float) -> np.ndarray:
    """Centers of n_cells edge-sharing flat-top hexagons on a hex lattice, spiral order."""
    # axial ring walk around the origin
    coords = [(0, 0)]
    ring = 1
    while len(coords) < n_cells:
        q, r = ring, 0
        directions = [(-1, 1), (-1, 0), (0, -1), (1, -1), (1, 0), (0, 1)]
        for dq, dr in directions:
            for _ in range(ring):
                coords.append((q, r))
                q, r = q + dq, r + dr
        ring += 1
    xy = np.empty((n_cells, 2))
    for i, (q, r) in enumerate(coords[:n_cells]):
        xy[i, 0] = 1.5 * radius * q
        xy[i, 1] = np.sqrt(3.0) * radius * (r + q / 2.0)
    return xy


def _point_in_hex(xy: np.ndarray, radius: float) -> np.ndarray:
    """Membership test for a flat-top hexagon of circumradius `radius` at the origin."""
    x = np.abs(xy[..., 0])
    y = np.abs(xy[..., 1])
    return (y <= np.sqrt(3.0) / 2.0 * radius) & (np.sqrt(3.0) * x + y <= np.sqrt(3.0) * radius)


def place_mc_topology(cfg: ScenarioConfig, rng: np.random.Generator) -> McGeometry:
    """Hexagonal cell cluster; users uniform in their hexagon, at least d_min from the BS."""
    if cfg.topology != MC:
        raise ValueError("place_mc_topology requires a multi-cell config")
    R = cfg.cell_radius_m
    bs_xy = _hex_centers(cfg.n_cells, R)
    ue_xy = np.empty((cfg.n_cells, cfg.users_per_cell, 2))
    for c in range(cfg.n_cells):
        for u in range(cfg.users_per_cell):
            while True:
                p = rng.uniform([-R, -R], [R, R])
                if _point_in_hex(p, R) and np.hypot(p[0], p[1]) >= cfg.d_min_m:
                    ue_xy[c, u] = bs_xy[c] + p
                    break
    return McGeometry(bs_xy=bs_xy, ue_xy=ue_xy)


def _path_gain(dist: np.ndarray, cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Single-slope path loss with log-normal shadowing, linear scale.

    beta = (max(d, d_min)/d_min)^(-gamma) * 10^(z/10), z ~ N(0, sigma_sh^2 dB).
    Distances below d_min are clamped to d_min (positions unchanged).
    """
    d = np.maximum(dist, cfg.d_min_m)
    beta = (d / cfg.d_min_m) ** (-cfg.path_loss_exponent)
    if cfg.shadowing_sigma_db > 0.0:
        z = rng.normal(0.0, cfg.shadowing_sigma_db, size=beta.shape)
        beta = beta * 10.0 ** (z / 10.0)
    return beta


def large_scale_coefficients(geometry, cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Large-scale coefficients matching the channel index structure.

    Cell-free returns (K, M); multi-cell returns (C, C, N_r, N_t) where the
    [cr, ct] block carries the gains from BS ct to the users of cell cr.
    IID_UNIT mode returns all-ones for both.
    """
    if cfg.topology == CF:
        if cfg.fading_mode == IID_UNIT:
            return np.ones((cfg.K, cfg.M))
        d = np.linalg.norm(geometry.ue_xy[:, None, :] - geometry.ap_xy[None, :, :], axis=2)
        return _path_gain(d, cfg, rng)

    C, Ku = cfg.n_cells, cfg.users_per_cell
    if cfg.fading_mode == IID_UNIT:
        return np.ones((C, C, cfg.N_r, cfg.N_t))
    beta = np.empty((C, C, cfg.N_r, cfg.N_t))
    for cr in range(C):
        for ct in range(C):
            d = np.linalg.norm(geometry.ue_xy[cr] - geometry.bs_xy[ct], axis=1)  # (Ku,)
            g = _path_gain(d, cfg, rng)
            rows = np.repeat(g, cfg.N_k)                  # one gain per user, shared by its antennas
            beta[cr, ct] = rows[:, None] * np.ones((1, cfg.N_t))
    return beta


def draw_channel(beta: np.ndarray, sigma_e_sq: float, rng: np.random.Generator) -> ChannelRealization:
    """Draw H_hat and H_tilde with the variance split (1 - sigma_e^2) / sigma_e^2 of beta.

    The true channel H = H_hat + H_tilde then has per-entry variance beta for
    any sigma_e^2, so the SNR semantics stay fixed while CSIT quality varies.
    """
    if sigma_e_sq < 0.0 or sigma_e_sq > 1.0:
        raise ValueError(f"sigma_e_sq must lie in [0, 1], got {sigma_e_sq}")
    shape = beta.shape
    w_hat = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    w_err = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    H_hat = np.sqrt((1.0 - sigma_e_sq) * beta) * w_hat
    H_tilde = np.sqrt(sigma_e_sq * beta) * w_err
    return ChannelRealization(H=H_hat + H_tilde, H_hat=H_hat, H_tilde=H_tilde, beta=beta)


def g_tilde(beta: np.ndarray, sigma_e_sq: float) -> np.ndarray:
    """Diagonal of E[H_tilde^H H_tilde] for a 2-D beta block.

    Entry j sums the error variances sigma_e^2 * beta_ij over the receive
    dimension i; with beta = 1 and N_r receive antennas this is N_r * sigma_e^2.
    """
    if beta.ndim != 2:
        raise ValueError("g_tilde expects a 2-D large-scale block")
    return sigma_e_sq * beta.sum(axis=0)
