"""Command line for rendering result figures; flags mirror PlotSpec fields."""

import argparse
import sys

from .render import KINDS, PlotSpec, RenderError, render


def _name_list(raw):
    return tuple(p.strip().lower() for p in raw.split(",") if p.strip()) if raw else ()


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="mimosim-plot", description="Plot mimosim results.csv curves")
    ap.add_argument("--csv", required=True, help="path to results.csv")
    ap.add_argument("--kind", default="ber", choices=KINDS)
    ap.add_argument("--out", default="figure.png", help="output image path")
    ap.add_argument("--topology", default="", help="comma list filter, e.g. cf,mc")
    ap.add_argument("--precoder", default="", help="comma list filter, e.g. zf,mmse")
    ap.add_argument("--alloc", default="", help="comma list filter, e.g. upa,rapa")
    ap.add_argument("--linear-ber", action="store_true", help="linear instead of log BER axis")
    args = ap.parse_args(argv)
    spec = PlotSpec(
        csv_path=args.csv,
        kind=args.kind,
        out_path=args.out,
        topologies=_name_list(args.topology),
        precoders=_name_list(args.precoder),
        allocators=_name_list(args.alloc),
        log_ber=not args.linear_ber,
    )
    try:
        image, sidecar = render(spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {image} and {sidecar}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
