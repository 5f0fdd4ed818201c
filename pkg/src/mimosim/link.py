"""Symbol-level downlink transmission: QPSK, link equations, detection, rates.

Frame layout: a frame of F channel uses carries bits of shape (F, 2K) with
user k owning columns [2k, 2k+1]; the matching symbol block is (K, F).
"""

import numpy as np


def qpsk_modulate(bits: np.ndarray) -> np.ndarray:
    """Gray-mapped QPSK: bit pair (b0, b1) -> ((1-2*b0) + 1j*(1-2*b1)) / sqrt(2).

    Pairs are taken along the last axis, which must have even length; the
    output's last axis is half as long.
    """
    bits = np.asarray(bits)
    if bits.shape[-1] % 2 != 0:
        raise ValueError(f"bit count must be even, got {bits.shape[-1]}")
    b0 = bits[..., 0::2]
    b1 = bits[..., 1::2]
    return ((1.0 - 2.0 * b0) + 1j * (1.0 - 2.0 * b1)) / np.sqrt(2.0)


def qpsk_demodulate(s: np.ndarray) -> np.ndarray:
    """Quadrant hard decisions, inverse of qpsk_modulate's layout."""
    s = np.asarray(s)
    bits = np.empty(s.shape[:-1] + (2 * s.shape[-1],), dtype=np.uint8)
    bits[..., 0::2] = (s.real < 0)
    bits[..., 1::2] = (s.imag < 0)
    return bits


def transmit(s: np.ndarray, P: np.ndarray, n_diag: np.ndarray) -> np.ndarray:
    """Transmit vector x = P N s; s is (K,) or (K, F)."""
    return P @ (np.asarray(n_diag)[:, None] * s if s.ndim == 2 else np.asarray(n_diag) * s)


def receive(x: np.ndarray, H_true: np.ndarray, sigma_n_sq: float, rho_f: float = 1.0,
            rng: np.random.Generator | None = None, noise: np.ndarray | None = None,
            cross=()) -> np.ndarray:
    """y = sqrt(rho_f) H x + sum of cross-cell terms + n, n ~ CN(0, sigma_n^2 I).

    cross is a sequence of (H_cross, x_other) pairs adding inter-cell
    interference.  A precomputed noise array takes precedence over rng.
    """
    y = np.sqrt(rho_f) * (H_true @ x)
    for H_cross, x_other in cross:
        y = y + np.sqrt(rho_f) * (H_cross @ x_other)
    if noise is None:
        if sigma_n_sq > 0:
            if rng is None:
                raise ValueError("receive needs an rng (or explicit noise) when sigma_n_sq > 0")
            noise = (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)) \
                * np.sqrt(sigma_n_sq / 2.0)
        else:
            return y
    return y + noise


def detect(y: np.ndarray, effective_gain: np.ndarray, f: float = 1.0) -> np.ndarray:
    """Genie-aided per-stream equalization s_hat_k = f * y_k / g_k, then hard decisions.

    Streams with zero gain cannot be equalized; their estimates are forced to
    zero, which decodes to a fixed bit pattern so they count as failed.
    """
    g = np.asarray(effective_gain)
    squeeze = y.ndim == 1
    y2 = y[:, None] if squeeze else y
    with np.errstate(divide="ignore", invalid="ignore"):
        s_hat = f * y2 / g[:, None]
    s_hat[g == 0, :] = 0.0
    bits = qpsk_demodulate(s_hat.T)
    return bits[0] if squeeze else bits


def ber_count(tx_bits: np.ndarray, rx_bits: np.ndarray) -> tuple[int, int]:
    """Hamming distance and total bit count."""
    tx_bits = np.asarray(tx_bits)
    rx_bits = np.asarray(rx_bits)
    if tx_bits.shape != rx_bits.shape:
        raise ValueError(f"bit frame shapes differ: {tx_bits.shape} vs {rx_bits.shape}")
    return int(np.count_nonzero(tx_bits != rx_bits)), tx_bits.size


def sum_rate(H_true: np.ndarray, P: np.ndarray, n_diag: np.ndarray, rho_f: float,
             sigma_n_sq: float, cross=()) -> float:
    """Instantaneous sum rate sum_k log2(1 + SINR_k) in bits/s/Hz.

    With G = sqrt(rho_f) H P N, SINR_k puts |G_kk|^2 over intra-stream leakage,
    inter-cell interference from (H_cross, P_other, n_other) triples, and noise.
    """
    G = np.sqrt(rho_f) * (H_true @ (P * np.asarray(n_diag)[None, :]))
    sig = np.abs(np.diag(G)) ** 2
    interf = np.sum(np.abs(G) ** 2, axis=1) - sig
    for H_cross, P_other, n_other in cross:
        Gx = np.sqrt(rho_f) * (H_cross @ (P_other * np.asarray(n_other)[None, :]))
        interf = interf + np.sum(np.abs(Gx) ** 2, axis=1)
    sinr = sig / (interf + sigma_n_sq)
    return float(np.sum(np.log2(1.0 + sinr)))
