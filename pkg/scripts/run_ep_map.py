#!/usr/bin/env python3
"""Map the complex eigenvalues of the coupled-mode Hamiltonian over the
(modulation frequency, modulation depth) plane and locate the exceptional
point where the two branches coalesce."""

import argparse
import csv

import numpy as np

from casimir_dyn import CouplingMap, ep_locate, parse_config
from casimir_dyn.spectral import surface_grid


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="TOML config file")
    ap.add_argument("--out", default="ep_map.csv")
    args = ap.parse_args(argv)

    rc = parse_config(args.config)
    s = rc.system
    field = rc.build_field()
    cmap = CouplingMap.from_field(field, s)
    gamma1 = s.cantilever1.gamma
    gamma2 = s.gamma2_total

    e = rc.experiment
    f_grid = np.linspace(e.sweep_start, e.sweep_stop, e.sweep_points)
    d_grid = np.linspace(e.depth_min, e.depth_max, e.depth_points)
    lam_p, lam_m = surface_grid(gamma1, gamma2, f_grid, d_grid, cmap)
    gap = np.abs(lam_p - lam_m)

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["f_mod_Hz", "delta_d_nm", "re_lp", "im_lp", "re_lm", "im_lm", "gap"])
        for i, f in enumerate(f_grid):
            for j, d in enumerate(d_grid):
                w.writerow(
                    [f, d * 1e9]
                    + [f"{v:.9e}" for v in (lam_p[i, j].real, lam_p[i, j].imag, lam_m[i, j].real, lam_m[i, j].imag, gap[i, j])]
                )

    d_star, f_star = ep_locate(
        gamma1, gamma2, field, s.equilibrium_gap,
        s.cantilever1.mass, s.cantilever2.mass,
        s.cantilever1.omega, s.cantilever2.omega,
    )
    print(f"exceptional point: delta_d = {d_star * 1e9:.3f} nm, f_mod = {f_star:.3f} Hz")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
