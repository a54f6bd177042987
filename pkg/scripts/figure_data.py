#!/usr/bin/env python3
"""Regenerate the reference curve datasets.

Thin driver over the cvmdi CLI: every dataset below is exactly one CLI
invocation plus a few --set overrides, so the files are byte-identical
to what the same commands produce by hand (each one gets a .manifest.json
with the sha256 of its data).  Run with no arguments to build everything
into data/ (about 15 seconds); name datasets to rebuild a subset, --list
to see what exists.
"""

import argparse
import sys
import time
from pathlib import Path

from cvmdi.cli_scan import main as cvmdi_main

DATASETS = {
    # heralding probability vs beam-splitter transmittance, catalysis family
    "prob-vs-tau-catalysis": ("prob-sweep", []),

    # key rate vs distance: catalysis family against the Gaussian benchmark
    "keyrate-vs-L-catalysis-d2": ("keyrate", []),
    "keyrate-vs-L-catalysis-d0": ("keyrate", [
        "--set", "state.d=0.0",
    ]),

    # key rate vs distance: one-photon subtraction/addition at d = 2
    "keyrate-vs-L-one-photon-d2": ("keyrate", [
        "--set", 'states=["tmsv",[0,0],[0,1],[1,0]]',
    ]),

    # displacement/distance grids; the per-d extras columns carry the
    # 1e-4 reach and the beta = 1 rate gap at 50 km
    "grid-d-L-catalysis-00": ("grid", []),
    "grid-d-L-addition-10": ("grid", [
        "--set", "states=[[1,0]]",
    ]),

    # probability decay and rate-gap saturation for (0,1) at beta = 1
    "saturation-vs-d-beta1-50km": ("keyrate", [
        "--set", "axis1.name=d",
        "--set", "axis1.start=0.0",
        "--set", "axis1.stop=3.0",
        "--set", "axis1.count=60",
        "--set", "channel.beta=1.0",
        "--set", "channel.L_AC=50.0",
        "--set", "states=[[0,1]]",
    ]),

    # detector-efficiency sensitivity at 10 km
    "keyrate-vs-eta-10km": ("noise-sweep", []),

    # reach tables: 1e-4 target at the reference point, and the
    # eta = 0.995 operating point at 1e-3
    "reach-1e-4-d2": ("max-distance", [
        "--set", 'states=["tmsv",[0,0],[0,1],[1,0]]',
    ]),
    "reach-1e-3-eta0.995-d2": ("max-distance", [
        "--set", 'states=["tmsv",[0,0],[0,1],[1,0]]',
        "--set", "channel.eta=0.995",
        "--set", "target_keyrate=0.001",
    ]),

    # covariance/mean tables for the four low-order heralded states
    "covariance-tables": ("cov-dump", [
        "--set", "states=[[0,0],[0,1],[1,0],[1,1]]",
    ]),
}


def build(name, out_dir):
    subcommand, overrides = DATASETS[name]
    suffix = ".json" if subcommand == "cov-dump" else ".csv"
    out = out_dir / f"{name}{suffix}"
    argv = [subcommand, *overrides, "--out", str(out)]
    t0 = time.perf_counter()
    code = cvmdi_main(argv)
    dt = time.perf_counter() - t0
    status = "ok" if code == 0 else f"EXIT {code}"
    print(f"  {name:<28s} {status}  ({dt:.1f} s)  {out}")
    return code


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="datasets to build (default: all)")
    ap.add_argument("--out-dir", default="data", help="output directory")
    ap.add_argument("--list", action="store_true", help="list dataset names")
    args = ap.parse_args(argv)

    if args.list:
        for name in DATASETS:
            print(name)
        return 0

    names = args.names or list(DATASETS)
    unknown = [n for n in names if n not in DATASETS]
    if unknown:
        ap.error(f"unknown dataset(s): {', '.join(unknown)}")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    print(f"writing {len(names)} dataset(s) to {out_dir}/")
    worst = 0
    for name in names:
        worst = max(worst, build(name, out_dir))
    return worst


if __name__ == "__main__":
    sys.exit(main())
