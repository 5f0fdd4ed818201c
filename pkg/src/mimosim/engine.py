"""Monte Carlo sweep engine: SNR x precoder x allocator x topology.

Trials are pure functions of (config, trial_index): every random draw comes
from a counter-based stream keyed by (master_seed, trial_index, purpose), so
results are bit-identical for any degree of parallelism.  Within a trial the
same bit/noise realizations are reused across all (precoder, allocator, SNR)
cells, which keeps scheme comparisons low-variance.

Power accounting: precoders are normalized to total power E_tx and the link
equations run with rho_f = 1 (budget absorbed in P).  The cell-free
per-antenna limit rho_f = E_tx / M enters through the antenna-load
normalization, so the Algorithm-style constraint delta_m . eta <= 1 caps every
AP at its share of the swept budget.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import repeat

import numpy as np

from .link import ber_count, detect, qpsk_modulate, receive, sum_rate, transmit
from .power_allocation import (
    PER_ANTENNA,
    TOTAL_POWER,
    ApaParams,
    DivergenceError,
    antenna_load,
    apa_run,
    rapa_run,
    upa,
)
from .precoding import (
    MF,
    MMSE,
    ZF,
    LinkBudget,
    SingularChannelError,
    mf_precoder,
    mmse_precoder,
    zf_precoder,
)
from .scenario import (
    CF,
    IID_UNIT,
    MC,
    CsitErrorModel,
    ScenarioConfig,
    draw_channel,
    g_tilde,
    large_scale_coefficients,
    place_cf_topology,
    place_mc_topology,
)

UPA = "upa"
APA = "apa"
RAPA = "rapa"

_SIGMA_N_SQ = 1.0    # noise floor fixed; SNR is swept through E_tx

# purpose tags for counter-based child streams
_P_GEOMETRY, _P_SHADOWING, _P_CHANNEL, _P_BITS, _P_NOISE = range(5)


class EngineError(RuntimeError):
    """Raised when a sweep accumulates too many failed cells to be trusted."""


@dataclass(frozen=True)
class SweepConfig:
    scenario: ScenarioConfig
    csit: CsitErrorModel = field(default_factory=CsitErrorModel)
    apa: ApaParams = field(default_factory=ApaParams)
    snr_points_db: tuple = tuple(float(s) for s in range(0, 21, 2))
    n_channel_realizations: int = 200
    n_frames_per_realization: int = 100
    precoders: tuple = (MF, ZF, MMSE)
    allocators: tuple = (UPA, APA, RAPA)
    master_seed: int = 0
    alternate_precoder_update: bool = False

    def __post_init__(self):
        if not self.snr_points_db:
            raise ValueError("snr_points_db must be non-empty")
        if not self.precoders or not set(self.precoders) <= {MF, ZF, MMSE}:
            raise ValueError(f"precoders must be a non-empty subset of (mf, zf, mmse), got {self.precoders}")
        if not self.allocators or not set(self.allocators) <= {UPA, APA, RAPA}:
            raise ValueError(f"allocators must be a non-empty subset of (upa, apa, rapa), got {self.allocators}")
        if self.n_channel_realizations < 1 or self.n_frames_per_realization < 1:
            raise ValueError("realization and frame counts must be at least 1")

    @property
    def cells_per_trial(self) -> int:
        return len(self.snr_points_db) * len(self.precoders) * len(self.allocators)


@dataclass
class MetricRecord:
    """Aggregated BER and sum-rate statistics for one (topology, precoder, allocator, SNR) cell."""

    key: tuple
    bit_errors: int = 0
    bits_total: int = 0
    rate_count: int = 0
    rate_mean: float = 0.0
    rate_m2: float = 0.0
    n_realizations: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total if self.bits_total else math.nan

    @property
    def ber_ci95(self) -> float:
        if not self.bits_total:
            return math.nan
        p = self.ber
        return 1.96 * math.sqrt(p * (1.0 - p) / self.bits_total)

    @property
    def sum_rate_sem(self) -> float:
        if self.rate_count < 2:
            return 0.0
        return math.sqrt(self.rate_m2 / (self.rate_count - 1) / self.rate_count)


def merge(a: MetricRecord, b: MetricRecord) -> MetricRecord:
    """Combine two records of the same key; commutative, with an exact identity."""
    if a.key != b.key:
        raise ValueError(f"cannot merge records with keys {a.key} and {b.key}")
    if b.n_realizations == 0 and b.bits_total == 0 and b.rate_count == 0:
        return a
    if a.n_realizations == 0 and a.bits_total == 0 and a.rate_count == 0:
        return b
    n = a.rate_count + b.rate_count
    if n:
        mean = (a.rate_count * a.rate_mean + b.rate_count * b.rate_mean) / n
        delta = b.rate_mean - a.rate_mean
        m2 = a.rate_m2 + b.rate_m2 + delta * delta * a.rate_count * b.rate_count / n
    else:
        mean, m2 = 0.0, 0.0
    return MetricRecord(
        key=a.key,
        bit_errors=a.bit_errors + b.bit_errors,
        bits_total=a.bits_total + b.bits_total,
        rate_count=n,
        rate_mean=mean,
        rate_m2=m2,
        n_realizations=a.n_realizations + b.n_realizations,
    )


def _stream(master_seed: int, trial_index: int, purpose: int) -> np.random.Generator:
    entropy = (master_seed & 0xFFFFFFFFFFFFFFFF, trial_index, purpose)
    return np.random.default_rng(np.random.SeedSequence(entropy=entropy))


def _complex_noise(rng: np.random.Generator, shape, sigma_sq: float) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(sigma_sq / 2.0)


def _build_precoder(kind: str, H_hat: np.ndarray, budget: LinkBudget):
    if kind == MF:
        return mf_precoder(H_hat, budget)
    if kind == ZF:
        return zf_precoder(H_hat, budget)
    return mmse_precoder(H_hat, np.ones(H_hat.shape[0]), budget)


def _allocate(alloc: str, H_hat, gt, prec, budget, params, mode, load):
    if alloc == UPA:
        return upa(prec.P.shape[1], budget, prec.P, mode, load).eta
    if alloc == APA:
        return apa_run(H_hat, prec.P, prec.f, budget, params, mode, load).eta
    return rapa_run(H_hat, gt, prec.P, prec.f, budget, params, mode, load).eta


def _detect_f(prec) -> float:
    # the MMSE receive path applies the precoder's scaling factor; scale-invariant for QPSK
    return prec.f if prec.kind == MMSE else 1.0


def _run_trial_cf(config: SweepConfig, trial_index: int):
    scen, csit, seed = config.scenario, config.csit, config.master_seed
    K, M, F = scen.K, scen.M, config.n_frames_per_realization

    if scen.fading_mode == IID_UNIT:
        beta = np.ones((K, M))
    else:
        geom = place_cf_topology(scen, _stream(seed, trial_index, _P_GEOMETRY))
        beta = large_scale_coefficients(geom, scen, _stream(seed, trial_index, _P_SHADOWING))
    ch = draw_channel(beta, csit.sigma_e_sq, _stream(seed, trial_index, _P_CHANNEL))
    gt = g_tilde(beta, csit.sigma_e_sq)

    bits = _stream(seed, trial_index, _P_BITS).integers(0, 2, size=(F, 2 * K), dtype=np.uint8)
    s = qpsk_modulate(bits).T
    noise = _complex_noise(_stream(seed, trial_index, _P_NOISE), (K, F), _SIGMA_N_SQ)

    records, failures = {}, []
    for snr_db in config.snr_points_db:
        e_tx = 10.0 ** (snr_db / 10.0) * _SIGMA_N_SQ
        budget = LinkBudget(e_tx=e_tx, rho_f=1.0, sigma_n_sq=_SIGMA_N_SQ)
        rho_antenna = e_tx / M
        for kind in config.precoders:
            try:
                prec = _build_precoder(kind, ch.H_hat, budget)
            except SingularChannelError as exc:
                for alloc in config.allocators:
                    failures.append(_failure(trial_index, snr_db, kind, alloc, exc))
                continue
            load = antenna_load(prec.P, rho_antenna)
            for alloc in config.allocators:
                try:
                    eta = _allocate(alloc, ch.H_hat, gt, prec, budget, config.apa,
                                    PER_ANTENNA, load)
                    cell_prec = prec
                    if (config.alternate_precoder_update and kind == MMSE
                            and alloc in (APA, RAPA) and np.all(eta > 0)):
                        cell_prec = mmse_precoder(ch.H_hat, np.sqrt(eta), budget)
                        load2 = antenna_load(cell_prec.P, rho_antenna)
                        eta = _allocate(alloc, ch.H_hat, gt, cell_prec, budget,
                                        config.apa, PER_ANTENNA, load2)
                except (DivergenceError, SingularChannelError) as exc:
                    failures.append(_failure(trial_index, snr_db, kind, alloc, exc))
                    continue
                n = np.sqrt(eta)
                x = transmit(s, cell_prec.P, n)
                y = receive(x, ch.H, _SIGMA_N_SQ, noise=noise)
                gains = np.diag(ch.H @ (cell_prec.P * n[None, :]))
                rx_bits = detect(y, gains, _detect_f(cell_prec))
                err, tot = ber_count(bits, rx_bits)
                rate = sum_rate(ch.H, cell_prec.P, n, 1.0, _SIGMA_N_SQ)
                key = (CF, kind, alloc, float(snr_db))
                records[key] = MetricRecord(key, err, tot, 1, rate, 0.0, 1)
    return records, failures


def _run_trial_mc(config: SweepConfig, trial_index: int):
    scen, csit, seed = config.scenario, config.csit, config.master_seed
    C, Nr, Nt, F = scen.n_cells, scen.N_r, scen.N_t, config.n_frames_per_realization

    if scen.fading_mode == IID_UNIT:
        beta = np.ones((C, C, Nr, Nt))
    else:
        geom = place_mc_topology(scen, _stream(seed, trial_index, _P_GEOMETRY))
        beta = large_scale_coefficients(geom, scen, _stream(seed, trial_index, _P_SHADOWING))
    ch = draw_channel(beta, csit.sigma_e_sq, _stream(seed, trial_index, _P_CHANNEL))
    gts = [g_tilde(beta[c, c], csit.sigma_e_sq) for c in range(C)]

    bits = _stream(seed, trial_index, _P_BITS).integers(0, 2, size=(C, F, 2 * Nr), dtype=np.uint8)
    s = np.stack([qpsk_modulate(bits[c]).T for c in range(C)])
    noise = _complex_noise(_stream(seed, trial_index, _P_NOISE), (C, Nr, F), _SIGMA_N_SQ)

    records, failures = {}, []
    for snr_db in config.snr_points_db:
        e_tx = 10.0 ** (snr_db / 10.0) * _SIGMA_N_SQ       # per-BS budget
        budget = LinkBudget(e_tx=e_tx, rho_f=1.0, sigma_n_sq=_SIGMA_N_SQ)
        for kind in config.precoders:
            try:
                precs = [_build_precoder(kind, ch.H_hat[c, c], budget) for c in range(C)]
            except SingularChannelError as exc:
                for alloc in config.allocators:
                    failures.append(_failure(trial_index, snr_db, kind, alloc, exc))
                continue
            for alloc in config.allocators:
                try:
                    etas = [
                        _allocate(alloc, ch.H_hat[c, c], gts[c], precs[c], budget,
                                  config.apa, TOTAL_POWER, None)
                        for c in range(C)
                    ]
                except (DivergenceError, SingularChannelError) as exc:
                    failures.append(_failure(trial_index, snr_db, kind, alloc, exc))
                    continue
                ns = [np.sqrt(e) for e in etas]
                xs = [transmit(s[c], precs[c].P, ns[c]) for c in range(C)]
                err = tot = 0
                rate = 0.0
                for c in range(C):
                    ici = [(ch.H[c, co], xs[co]) for co in range(C) if co != c]
                    y = receive(xs[c], ch.H[c, c], _SIGMA_N_SQ, noise=noise[c], cross=ici)
                    gains = np.diag(ch.H[c, c] @ (precs[c].P * ns[c][None, :]))
                    rx_bits = detect(y, gains, _detect_f(precs[c]))
                    e, t = ber_count(bits[c], rx_bits)
                    err += e
                    tot += t
                    cross = [(ch.H[c, co], precs[co].P, ns[co]) for co in range(C) if co != c]
                    rate += sum_rate(ch.H[c, c], precs[c].P, ns[c], 1.0, _SIGMA_N_SQ, cross)
                key = (MC, kind, alloc, float(snr_db))
                records[key] = MetricRecord(key, err, tot, 1, rate, 0.0, 1)
    return records, failures


def _failure(trial_index, snr_db, precoder, allocator, exc) -> dict:
    return {
        "trial": trial_index,
        "snr_db": float(snr_db),
        "precoder": precoder,
        "allocator": allocator,
        "error": f"{type(exc).__name__}: {exc}",
    }


def run_trial(config: SweepConfig, trial_index: int):
    """One channel realization: returns ({key: MetricRecord}, [failure dicts]).

    Failed cells are skipped and reported, never silently resampled.
    """
    if config.scenario.topology == CF:
        return _run_trial_cf(config, trial_index)
    return _run_trial_mc(config, trial_index)


def run_sweep(config: SweepConfig, n_workers: int = 1, progress=None):
    """Run all trials, merge records in trial order; aborts if >10% of cells fail.

    Results are independent of n_workers: trials are pure and the merge fold
    order is fixed.  Returns (sorted record list, diagnostics dict).
    """
    n_trials = config.n_channel_realizations
    merged: dict = {}
    failures: list = []

    def _fold(parts):
        for done, (records, fails) in enumerate(parts, start=1):
            for key, rec in records.items():
                merged[key] = merge(merged[key], rec) if key in merged else rec
            failures.extend(fails)
            if progress is not None:
                progress(done, n_trials)

    if n_workers <= 1:
        _fold(run_trial(config, i) for i in range(n_trials))
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            _fold(pool.map(run_trial, repeat(config), range(n_trials)))

    total_cells = n_trials * config.cells_per_trial
    if len(failures) > 0.1 * total_cells:
        sample = "; ".join(f["error"] for f in failures[:3])
        raise EngineError(
            f"{len(failures)} of {total_cells} cells failed (>10%); first errors: {sample}"
        )
    diagnostics = {
        "total_cells": total_cells,
        "failed_cells": len(failures),
        "failures": failures,
    }
    return sorted(merged.values(), key=lambda r: r.key), diagnostics
