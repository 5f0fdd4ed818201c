"""Render BER / sum-rate curves from a mimosim results.csv.

The CSV schema is the simulator's documented interchange format:

  topology,precoder,allocator,snr_db,ber,ber_ci95,sum_rate,sum_rate_sem,bits_total,realizations

Values are carried verbatim into a sidecar text dump next to each image, so
plotted points can be checked against the CSV byte for byte.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

EXPECTED_HEADER = [
    "topology", "precoder", "allocator", "snr_db", "ber", "ber_ci95",
    "sum_rate", "sum_rate_sem", "bits_total", "realizations",
]

KINDS = ("ber", "sumrate", "compare")


class RenderError(ValueError):
    """Malformed input or an empty plot slice."""


@dataclass
class PlotSpec:
    csv_path: str
    kind: str = "ber"                      # ber | sumrate | compare
    out_path: str = "figure.png"
    topologies: tuple = ()                 # empty tuple = no filtering
    precoders: tuple = ()
    allocators: tuple = ()
    log_ber: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RenderError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")


def load_rows(csv_path) -> list[dict]:
    """Read the results CSV, keeping every field as its original string."""
    path = Path(csv_path)
    if not path.is_file():
        raise RenderError(f"csv file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RenderError(f"{path}: empty file") from None
        if header != EXPECTED_HEADER:
            raise RenderError(f"{path}: unexpected header {header}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if len(raw) != len(EXPECTED_HEADER):
                raise RenderError(f"{path}:{lineno}: expected {len(EXPECTED_HEADER)} fields")
            rows.append(dict(zip(EXPECTED_HEADER, raw)))
    return rows


def _match(row, spec: PlotSpec) -> bool:
    return ((not spec.topologies or row["topology"] in spec.topologies)
            and (not spec.precoders or row["precoder"] in spec.precoders)
            and (not spec.allocators or row["allocator"] in spec.allocators))


def _curve_label(key, multi_topology: bool) -> str:
    topology, precoder, allocator = key
    scheme = f"{precoder.upper()}+{allocator.upper()}"
    return f"{topology.upper()} {scheme}" if multi_topology else scheme


def render(spec: PlotSpec):
    """Render the filtered slice; writes the image and a sidecar point dump.

    Returns (image_path, sidecar_path).  The sidecar repeats the plotted CSV
    fields verbatim, one `topology,precoder,allocator,snr_db,value` line per
    point, so no resampling or reformatting can hide in the figure.
    """
    rows = [row for row in load_rows(spec.csv_path) if _match(row, spec)]
    if not rows:
        raise RenderError("plot slice is empty after filtering; nothing to render")

    value_field = "sum_rate" if spec.kind == "sumrate" else "ber"
    curves: dict = {}
    for row in rows:
        key = (row["topology"], row["precoder"], row["allocator"])
        curves.setdefault(key, []).append(row)
    for pts in curves.values():
        pts.sort(key=lambda row: float(row["snr_db"]))
    multi_topology = len({key[0] for key in curves}) > 1

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for key in sorted(curves):
        pts = curves[key]
        x = [float(row["snr_db"]) for row in pts]
        y = [float(row[value_field]) for row in pts]
        if value_field == "ber" and spec.log_ber:
            # zero error counts cannot be drawn on a log axis
            x = [xi for xi, yi in zip(x, y) if yi > 0.0]
            y = [yi for yi in y if yi > 0.0]
        ax.plot(x, y, marker="o", label=_curve_label(key, multi_topology))
    if value_field == "ber":
        if spec.log_ber:
            ax.set_yscale("log")
        ax.set_ylabel("BER")
    else:
        ax.set_ylabel("Sum rate [bits/s/Hz]")
    ax.set_xlabel("SNR [dB]")
    ax.grid(True, which="both", alpha=0.4)
    ax.legend()
    fig.tight_layout()

    out_path = Path(spec.out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path)
    plt.close(fig)

    sidecar_path = out_path.with_suffix(out_path.suffix + ".points.txt")
    lines = [f"topology,precoder,allocator,snr_db,{value_field}"]
    for key in sorted(curves):
        for row in curves[key]:
            lines.append(",".join([
                row["topology"], row["precoder"], row["allocator"],
                row["snr_db"], row[value_field],
            ]))
    sidecar_path.write_text("\n".join(lines) + "\n")
    return out_path, sidecar_path
