"""Optimal input PSD at increasing transfer factors (scenario A, g_d/g_m = 0.1).

Writes one ``psd_<eta>.csv`` per level plus ``psd_shapes.csv`` with the
support width and peak value of each, and an SVG overlay.

Usage: python scripts/psd_shapes.py [--out DIR] [--g-d 0.1]
"""

import argparse
import os
import sys

from ampcap.circuit import CircuitParams, FrequencyGrid
from ampcap.io import emit_svg, write_csv
from ampcap.pareto import Scenario, eta_max, optimize_terminations_A

FRACTIONS = (0.0, 1e-3, 1e-2, 0.1, 0.3, 0.6, 0.9)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/psd_shapes")
    ap.add_argument("--g-d", type=float, default=0.1)
    ap.add_argument("--P", type=float, default=0.1)
    args = ap.parse_args(argv)
    os.makedirs(args.out, exist_ok=True)
    circuit, grid = CircuitParams(g_d=args.g_d), FrequencyGrid.symmetric()
    emax = eta_max(Scenario.A, circuit, grid=grid)
    rows, files = [], []
    for f in FRACTIONS:
        eta = f * emax
        pt = optimize_terminations_A(eta, circuit, args.P, grid)
        name = f"psd_{eta:.6g}.csv"
        write_csv(os.path.join(args.out, name), ("omega", "phi_s"), zip(grid.samples, pt.solution.psd))
        files.append(name)
        rows.append((eta, pt.capacity, pt.support_measure, pt.peak_psd, pt.g_s, pt.g_l))
        print(f"eta={eta:<10.4g} C={pt.capacity:.4e} support={pt.support_measure:.4g} peak={pt.peak_psd:.4g}")
    write_csv(
        os.path.join(args.out, "psd_shapes.csv"),
        ("eta", "capacity", "support_measure", "peak_psd", "g_s", "g_l"), rows,
    )
    emit_svg(
        [os.path.join(args.out, n) for n in files], [n[:-4] for n in files], "omega", "phi_s",
        os.path.join(args.out, "psd_shapes.svg"), "omega [g_m/C_gd]", "PSD [N0]",
        f"optimal PSD, g_d/g_m = {args.g_d:g}",
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
