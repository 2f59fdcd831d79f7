#!/usr/bin/env python3
"""Transfer efficiency versus the upper frequency corner of the loop."""

import argparse
import csv

import numpy as np

from casimir_dyn import efficiency_vs_fmax, parse_config


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="TOML config file")
    ap.add_argument("--out", default="efficiency.csv")
    ap.add_argument("--jobs", type=int, default=4)
    args = ap.parse_args(argv)

    rc = parse_config(args.config)
    e = rc.experiment
    field = rc.build_field()
    grid = np.linspace(e.fmax_start, e.fmax_stop, e.fmax_points)

    curve = efficiency_vs_fmax(
        rc.system,
        field,
        grid,
        f_min=e.f_min,
        delta_range=(e.delta_min, e.delta_max),
        excited=e.excited,
        loop_duration=e.loop_duration,
        direction=e.direction,
        seeds=tuple(range(e.n_seeds)),
        jobs=args.jobs,
    )

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["f_max_Hz", "eta_mean", "eta_std", "n_valid"])
        for row in zip(curve.f_max, curve.eta_mean, curve.eta_std, curve.n_valid):
            w.writerow([f"{row[0]:.4f}", f"{row[1]:.6f}", f"{row[2]:.6f}", row[3]])
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
