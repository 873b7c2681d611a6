"""Flat-PSD frontier with and without a matching inductor (scenarios B, BL).

Both traces share one transfer grid, derived from the matched circuit's
reach, so they compare point by point.

Usage: python scripts/uniform_psd_matching.py [--out DIR] [--n-eta 50]
"""

import argparse
import os
import sys

from ampcap.circuit import CircuitParams
from ampcap.io import emit_svg, write_csv
from ampcap.pareto import Scenario, TraceConfig, default_eta_grid, eta_max, trace_pareto

HEADER = ("eta", "capacity", "g_s", "g_l", "L", "lambda", "mu", "p_out", "status")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/uniform")
    ap.add_argument("--g-d", type=float, default=0.1)
    ap.add_argument("--P", type=float, default=0.1)
    ap.add_argument("--omega-B", type=float, default=0.1)
    ap.add_argument("--n-eta", type=int, default=50)
    args = ap.parse_args(argv)
    os.makedirs(args.out, exist_ok=True)
    circuit = CircuitParams(g_d=args.g_d)
    etas = default_eta_grid(eta_max(Scenario.BL, circuit, omega_B=args.omega_B), args.n_eta)
    paths = []
    traces = {}
    for s in (Scenario.B, Scenario.BL):
        pts = trace_pareto(TraceConfig(s, etas, P=args.P, omega_B=args.omega_B), circuit)
        path = os.path.join(args.out, f"pareto_{s.value}.csv")
        write_csv(path, HEADER, (p.row() for p in pts))
        paths.append(path)
        traces[s] = pts
    gain = [bl.capacity - b.capacity for b, bl in zip(traces[Scenario.B], traces[Scenario.BL])]
    used = [p.eta for p in traces[Scenario.BL] if p.L is not None]
    print(f"max capacity gain from matching: {max(gain):.3e}")
    print(f"inductor used at {len(used)} of {len(etas)} levels" + (f" (eta <= {max(used):.4g})" if used else ""))
    emit_svg(
        paths, ["without matching", "with matching"], "eta", "capacity",
        os.path.join(args.out, "pareto_B_BL.svg"), "eta (transfer factor)", "capacity [bit g_m/C_gd]",
        f"flat PSD, omega_B = {args.omega_B:g}",
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
