"""Command-line entry point: config parsing, sweep execution, CSV + manifest output.

Config files are flat `key = value` text; `#` starts a comment.  Recognized
keys (all optional except that cell-free/multi-cell sizes apply to their own
topology):

  topology = cf | mc            fading = iid | large_scale
  m, k                          (cell-free: APs, users)
  n_cells, n_t, n_r, n_k        (multi-cell sizes)
  area_side_m, cell_radius_m, d_min_m
  path_loss_exponent, shadowing_sigma_db
  sigma_e2                      CSIT error variance
  snr = 0:20:2                  min:max:step, or a comma list
  realizations, frames          Monte Carlo counts
  precoders = mf,zf,mmse        allocators = upa,apa,rapa
  seed                          master seed (64-bit)
  mu, apa_iters                 APA step size / iteration count
  alternate_precoder = false    re-derive the MMSE precoder from the final N

Exit codes: 0 success, 1 config error, 2 runtime error.
"""

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .engine import APA, RAPA, UPA, EngineError, SweepConfig, run_sweep
from .precoding import MF, MMSE, ZF
from .scenario import CF, IID_UNIT, LARGE_SCALE, MC, CsitErrorModel, ScenarioConfig
from .power_allocation import ApaParams

CSV_HEADER = "topology,precoder,allocator,snr_db,ber,ber_ci95,sum_rate,sum_rate_sem,bits_total,realizations"

_PRECODER_NAMES = {MF, ZF, MMSE}
_ALLOCATOR_NAMES = {UPA, APA, RAPA}


class ConfigError(ValueError):
    """Configuration file or flag problem; message names the offending key."""


def _cast_int(key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"key '{key}': expected an integer, got {raw!r}") from None


def _cast_float(key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"key '{key}': expected a number, got {raw!r}") from None


def _cast_bool(key, raw):
    low = str(raw).strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"key '{key}': expected true/false, got {raw!r}")


def _cast_choice(choices):
    def cast(key, raw):
        val = str(raw).strip().lower()
        if val not in choices:
            raise ConfigError(f"key '{key}': expected one of {sorted(choices)}, got {raw!r}")
        return val
    return cast


def _cast_name_list(allowed):
    def cast(key, raw):
        names = tuple(p.strip().lower() for p in str(raw).split(",") if p.strip())
        bad = [n for n in names if n not in allowed]
        if not names or bad:
            raise ConfigError(f"key '{key}': expected a comma list from {sorted(allowed)}, got {raw!r}")
        return names
    return cast


def parse_snr_spec(key, raw):
    """`min:max:step` (inclusive endpoints) or a comma-separated list of dB values."""
    raw = str(raw).strip()
    try:
        if ":" in raw:
            lo, hi, step = (float(p) for p in raw.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            points = []
            v = lo
            while v <= hi + 1e-9:
                points.append(round(v, 9))
                v += step
            return tuple(points)
        return tuple(float(p) for p in raw.split(","))
    except ValueError:
        raise ConfigError(f"key '{key}': expected min:max:step or a comma list, got {raw!r}") from None


_KEY_CASTS = {
    "topology": _cast_choice({CF, MC}),
    "m": _cast_int,
    "k": _cast_int,
    "n_cells": _cast_int,
    "n_t": _cast_int,
    "n_r": _cast_int,
    "n_k": _cast_int,
    "area_side_m": _cast_float,
    "cell_radius_m": _cast_float,
    "d_min_m": _cast_float,
    "path_loss_exponent": _cast_float,
    "shadowing_sigma_db": _cast_float,
    "fading": _cast_choice({"iid", "large_scale"}),
    "sigma_e2": _cast_float,
    "snr": parse_snr_spec,
    "realizations": _cast_int,
    "frames": _cast_int,
    "precoders": _cast_name_list(_PRECODER_NAMES),
    "allocators": _cast_name_list(_ALLOCATOR_NAMES),
    "seed": _cast_int,
    "mu": _cast_float,
    "apa_iters": _cast_int,
    "alternate_precoder": _cast_bool,
}


def _read_key_values(path: Path) -> dict:
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.rstrip()!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        key = key.lower()
        if key not in _KEY_CASTS:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key '{key}'")
        values[key] = _KEY_CASTS[key](key, raw)
    return values


def parse_config(path, overrides: dict | None = None) -> SweepConfig:
    """Load a config file, apply flag overrides, return a validated SweepConfig."""
    values = _read_key_values(Path(path))
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in _KEY_CASTS:
            raise ConfigError(f"unknown override key '{key}'")
        values[key] = _KEY_CASTS[key](key, raw) if isinstance(raw, str) else raw

    topology = values.get("topology", CF)
    fading = {"iid": IID_UNIT, "large_scale": LARGE_SCALE}[values.get("fading", "large_scale")]
    # reference distance defaults differ by architecture
    d_min_default = 1.0 if topology == CF else 35.0
    scenario_kwargs = dict(
        topology=topology,
        M=values.get("m", 64),
        K=values.get("k", 16),
        n_cells=values.get("n_cells", 4),
        N_t=values.get("n_t", 16),
        N_r=values.get("n_r", 4),
        N_k=values.get("n_k", 1),
        area_side_m=values.get("area_side_m", 1000.0),
        cell_radius_m=values.get("cell_radius_m", 500.0),
        d_min_m=values.get("d_min_m", d_min_default),
        path_loss_exponent=values.get("path_loss_exponent", 3.5),
        shadowing_sigma_db=values.get("shadowing_sigma_db", 8.0),
        fading_mode=fading,
    )
    try:
        scenario = ScenarioConfig(**scenario_kwargs)
        csit = CsitErrorModel(sigma_e_sq=values.get("sigma_e2", 0.0))
        apa = ApaParams(mu=values.get("mu", 0.01), n_iters=values.get("apa_iters", 100))
        return SweepConfig(
            scenario=scenario,
            csit=csit,
            apa=apa,
            snr_points_db=values.get("snr", tuple(float(s) for s in range(0, 21, 2))),
            n_channel_realizations=values.get("realizations", 200),
            n_frames_per_realization=values.get("frames", 100),
            precoders=values.get("precoders", (MF, ZF, MMSE)),
            allocators=values.get("allocators", (UPA, APA, RAPA)),
            master_seed=values.get("seed", 0),
            alternate_precoder_update=values.get("alternate_precoder", False),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def _csv_rows(records) -> list[str]:
    rows = [CSV_HEADER]
    for rec in sorted(records, key=lambda r: r.key):
        topology, precoder, allocator, snr_db = rec.key
        rows.append(",".join([
            topology,
            precoder,
            allocator,
            repr(float(snr_db)),
            repr(rec.ber),
            repr(rec.ber_ci95),
            repr(rec.rate_mean),
            repr(rec.sum_rate_sem),
            str(rec.bits_total),
            str(rec.n_realizations),
        ]))
    return rows


def ber_crossovers(records) -> dict:
    """SNR where the cf and mc BER curves cross, per (precoder, allocator); None if they don't."""
    by_scheme: dict = {}
    for rec in records:
        topology, precoder, allocator, snr_db = rec.key
        by_scheme.setdefault((precoder, allocator), {}).setdefault(topology, {})[snr_db] = rec.ber
    out = {}
    for (precoder, allocator), curves in by_scheme.items():
        if CF not in curves or MC not in curves:
            continue
        common = sorted(set(curves[CF]) & set(curves[MC]))
        crossover = None
        for lo, hi in zip(common, common[1:]):
            d_lo = curves[CF][lo] - curves[MC][lo]
            d_hi = curves[CF][hi] - curves[MC][hi]
            if d_lo == 0.0:
                crossover = lo
                break
            if d_lo * d_hi < 0.0:
                crossover = lo + (hi - lo) * d_lo / (d_lo - d_hi)
                break
        out[f"{precoder}+{allocator}"] = crossover
    return out


def write_results(records, out_dir, config: SweepConfig | None = None,
                  diagnostics: dict | None = None, duration_s: float | None = None):
    """Write results.csv (deterministic bytes) and a manifest.json next to it."""
    if not records:
        raise ValueError("no records to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    csv_path.write_text("\n".join(_csv_rows(records)) + "\n")

    manifest = {
        "artifact_version": __version__,
        "master_seed": config.master_seed if config else None,
        "config": asdict(config) if config else None,
        "cells": {
            "total": diagnostics.get("total_cells") if diagnostics else None,
            "failed": diagnostics.get("failed_cells") if diagnostics else None,
        },
        "failures": (diagnostics or {}).get("failures", []),
        "ber_crossover_db": ber_crossovers(records),
        "duration_s": duration_s,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return csv_path, manifest_path


def _build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mimosim", description="Massive MIMO downlink link-level sweeps")
    ap.add_argument("--config", required=True, help="path to a key = value config file")
    ap.add_argument("--out", default="results", help="output directory (default: results)")
    ap.add_argument("--seed", type=int, default=None, help="master seed override")
    ap.add_argument("--snr", default=None, help="SNR grid override, min:max:step or comma list")
    ap.add_argument("--scenario", default=None, choices=[CF, MC], help="topology override")
    ap.add_argument("--precoder", default=None, help="comma list override, e.g. zf,mmse")
    ap.add_argument("--alloc", default=None, help="comma list override, e.g. upa,rapa")
    ap.add_argument("--trials", type=int, default=None, help="channel realizations override")
    ap.add_argument("--sigma-e2", type=float, default=None, help="CSIT error variance override")
    ap.add_argument("--workers", type=int, default=1, help="parallel trial workers (default 1)")
    return ap


def main(argv=None) -> int:
    args = _build_arg_parser().parse_args(argv)
    overrides = {
        "seed": args.seed,
        "snr": args.snr,
        "topology": args.scenario,
        "precoders": args.precoder,
        "allocators": args.alloc,
        "realizations": args.trials,
        "sigma_e2": args.sigma_e2,
    }
    try:
        config = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    def progress(done, total):
        print(f"\rtrial {done}/{total}", end="", file=sys.stderr, flush=True)

    start = time.monotonic()
    try:
        records, diagnostics = run_sweep(config, n_workers=args.workers, progress=progress)
        print("", file=sys.stderr)
        csv_path, manifest_path = write_results(
            records, args.out, config, diagnostics, duration_s=time.monotonic() - start
        )
    except (EngineError, OSError, ValueError) as exc:
        print(f"\nruntime error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {csv_path} and {manifest_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
