"""Capacity versus transfer factor for three drain conductances (scenario A).

Usage: python scripts/capacity_vs_transfer.py [--out DIR] [--quick]
"""

import argparse
import os
import sys
import time
from dataclasses import replace

from ampcap.cli import quick_config, run_trace
from ampcap.config import load_config

HERE = os.path.dirname(os.path.abspath(__file__))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=os.path.join(HERE, "configs", "scenario_A_three_gd.json"))
    ap.add_argument("--out", default=None)
    ap.add_argument("--quick", action="store_true", help="coarse grids, 6 levels")
    args = ap.parse_args(argv)
    cfg = load_config(args.config)
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    if args.quick:
        cfg = quick_config(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    t0 = time.perf_counter()
    traces = run_trace(cfg, cfg.out_dir)
    for circuit, pts in zip(cfg.circuits(), traces):
        first, last = pts[0], [p for p in pts if p.capacity > 0][-1]
        print(
            f"g_d/g_m={circuit.g_d:<5g} C(0)={first.capacity:.6f}  "
            f"C({last.eta:.4g})={last.capacity:.3e}  points={len(pts)}"
        )
    print(f"done in {time.perf_counter() - t0:.0f} s; tables in {cfg.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
