"""Command-line entry point.

Exit codes: 0 success, 1 infeasible point with ``--strict``, 2 configuration
or output-directory error, 3 internal or oracle failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np
import scipy

from . import __version__
from .circuit import Matching, Termination, gain_profile
from .config import ConfigError, RunConfig, config_from_dict, load_config
from .io import emit_svg, write_csv
from .pareto import Scenario, default_eta_grid, eta_max, optimize_terminations_A, trace_pareto
from .spectrum import Status

PARETO_HEADER = ("eta", "capacity", "g_s", "g_l", "L", "lambda", "mu", "p_out", "status")

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3


def _label(g_d):
    return f"gd{g_d:.6g}"


def _series_name(stem, cfg, g_d, suffix=""):
    tag = f"_{_label(g_d)}" if len(cfg.g_d_over_gm) > 1 else ""
    return f"{stem}{tag}{suffix}.csv"


def quick_config(cfg):
    """Coarser grids and fewer levels for smoke runs."""
    return replace(
        cfg,
        n_eta=min(cfg.n_eta, 6),
        multistart=min(cfg.multistart, 3),
        grid=(cfg.grid[0], min(cfg.grid[1], 1024), cfg.grid[2]),
        band_samples=min(cfg.band_samples, 2048),
    )


def _prepare_out(path):
    os.makedirs(path, exist_ok=True)
    probe = os.path.join(path, ".write-probe")
    with open(probe, "w") as fh:
        fh.write("")
    os.remove(probe)


def _write_meta(cfg, out, series):
    meta = {
        "kind": "ampcap-meta",
        # out_dir is where, not what: keep it out so relocated runs match
        "config": {k: v for k, v in cfg.to_dict().items() if k != "out_dir"},
        "normalization": {
            "conductance": "g_m",
            "frequency": "g_m/C_gd",
            "power": "N0*g_m/C_gd",
            "inductance": "C_gd/g_m^2",
            "capacity": "bit * g_m/C_gd",
            "scales": cfg.units.to_dict(),
        },
        "tolerances": {"outer_rtol": cfg.tol, "power_rtol": 1e-12, "transfer_rtol": 1e-10, "kkt": 1e-6},
        "versions": {"ampcap": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "series": series,
    }
    with open(os.path.join(out, "meta.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _eta_grid(cfg, circuit):
    if cfg.eta_grid is not None:
        return cfg.eta_grid, None
    box, grid = cfg.box(), cfg.frequency_grid()
    # B and BL share one grid so their traces compare pointwise
    scen = Scenario.A if cfg.scenario is Scenario.A else Scenario.BL
    emax = eta_max(scen, circuit, box, grid, cfg.omega_B_norm, cfg.placement, cfg.multistart, cfg.band_samples)
    return default_eta_grid(emax, cfg.n_eta), emax


def _write_psd(path, grid, psd):
    write_csv(path, ("omega", "phi_s"), zip(grid.samples, psd))


def run_trace(cfg, out):
    """Trace every configured series and write the tables; returns the points."""
    series, all_points = [], []
    for circuit in cfg.circuits():
        etas, emax = _eta_grid(cfg, circuit)
        points = trace_pareto(cfg.trace_config(etas), circuit)
        name = _series_name("pareto", cfg, circuit.g_d)
        write_csv(os.path.join(out, name), PARETO_HEADER, (p.row() for p in points))
        psd_files = []
        if cfg.scenario is Scenario.A:
            grid = cfg.frequency_grid()
            for eta in cfg.psd_etas:
                pt = optimize_terminations_A(eta, circuit, cfg.P_norm, grid, cfg.box(), cfg.multistart, cfg.tol)
                psd = pt.solution.psd if pt.solution is not None else np.zeros(len(grid))
                fname = _series_name("psd", cfg, circuit.g_d, f"_{eta:.6g}")
                _write_psd(os.path.join(out, fname), grid, psd)
                psd_files.append(fname)
        series.append(
            {"label": _label(circuit.g_d), "g_d_over_gm": circuit.g_d, "eta_max": emax, "pareto": name, "psd": psd_files}
        )
        all_points.append(points)
    _write_meta(cfg, out, series)
    if cfg.emit_svg:
        labels = [f"g_d/g_m = {s['g_d_over_gm']:.6g}" for s in series]
        emit_svg(
            [os.path.join(out, s["pareto"]) for s in series], labels, "eta", "capacity",
            os.path.join(out, "pareto.svg"), "eta (transfer factor)", "capacity [bit g_m/C_gd]",
            f"scenario {cfg.scenario.value}",
        )
        for s, lab in zip(series, labels):
            if s["psd"]:
                emit_svg(
                    [os.path.join(out, f) for f in s["psd"]], [f[:-4] for f in s["psd"]], "omega", "phi_s",
                    os.path.join(out, f"psd_{s['label']}.svg"), "omega [g_m/C_gd]", "PSD [N0]", lab,
                )
    return all_points


def _cmd_trace(cfg, args):
    points = run_trace(cfg, cfg.out_dir)
    n_bad = sum(p.status is Status.INFEASIBLE for pts in points for p in pts)
    print(f"wrote {sum(map(len, points))} points to {cfg.out_dir} ({n_bad} infeasible)")
    return EXIT_INFEASIBLE if args.strict and n_bad else EXIT_OK


def _cmd_psd(cfg, args):
    cfg = replace(cfg, psd_etas=tuple(args.eta))
    grid, infeasible = cfg.frequency_grid(), 0
    series = []
    for circuit in cfg.circuits():
        files = []
        for eta in cfg.psd_etas:
            pt = optimize_terminations_A(eta, circuit, cfg.P_norm, grid, cfg.box(), cfg.multistart, cfg.tol)
            infeasible += pt.status is Status.INFEASIBLE
            psd = pt.solution.psd if pt.solution is not None else np.zeros(len(grid))
            fname = _series_name("psd", cfg, circuit.g_d, f"_{eta:.6g}")
            _write_psd(os.path.join(cfg.out_dir, fname), grid, psd)
            files.append(fname)
        series.append({"label": _label(circuit.g_d), "g_d_over_gm": circuit.g_d, "psd": files})
        if cfg.emit_svg:
            emit_svg(
                [os.path.join(cfg.out_dir, f) for f in files], [f[:-4] for f in files], "omega", "phi_s",
                os.path.join(cfg.out_dir, f"psd_{_label(circuit.g_d)}.svg"), "omega [g_m/C_gd]", "PSD [N0]",
            )
    _write_meta(cfg, cfg.out_dir, series)
    return EXIT_INFEASIBLE if args.strict and infeasible else EXIT_OK


def _cmd_gain(cfg, args):
    grid = cfg.frequency_grid()
    m = None if args.L is None else Matching(args.L, cfg.placement)
    term = Termination(args.g_s, args.g_l, m)
    files = []
    for circuit in cfg.circuits():
        fname = _series_name("gain_profile", cfg, circuit.g_d)
        g = gain_profile(circuit, term, grid)
        write_csv(os.path.join(cfg.out_dir, fname), ("omega", "gain"), zip(grid.samples, g.values))
        files.append(fname)
    if cfg.emit_svg:
        emit_svg(
            [os.path.join(cfg.out_dir, f) for f in files],
            [f"g_d/g_m = {g:.6g}" for g in cfg.g_d_over_gm], "omega", "gain",
            os.path.join(cfg.out_dir, "gain_profile.svg"), "omega [g_m/C_gd]", "power gain",
        )
    return EXIT_OK


def _cmd_verify(cfg, args):
    from .verify import format_report, run_checks

    results = run_checks(cfg, quick=args.quick)
    print(format_report(results))
    ok = all(r.passed for r in results)
    print("all checks passed" if ok else "some checks FAILED")
    return EXIT_OK if ok else EXIT_INTERNAL


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (defaults used when omitted)")
    common.add_argument("--out", help="output directory (overrides out_dir)")
    common.add_argument("--scenario", choices=["A", "B", "BL"], help="override the configured scenario")
    common.add_argument("--strict", action="store_true", help="exit 1 if any point is infeasible")
    common.add_argument("--quick", action="store_true", help="reduced resolutions")
    common.add_argument("--emit-svg", action="store_true", help="also write SVG plots")

    p = argparse.ArgumentParser(
        prog="ampcap",
        description="Capacity versus power transfer of a small-signal amplifier.",
    )
    p.add_argument("--version", action="version", version=f"ampcap {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("trace", parents=[common], help="trace the Pareto frontier")
    ps = sub.add_parser("psd", parents=[common], help="optimal PSD at given transfer factors")
    ps.add_argument("--eta", type=float, nargs="+", required=True)
    pg = sub.add_parser("gain-profile", parents=[common], help="sample the power gain")
    pg.add_argument("--g-s", type=float, required=True)
    pg.add_argument("--g-l", type=float, required=True)
    pg.add_argument("--L", type=float, default=None, help="matching inductance")
    sub.add_parser("verify", parents=[common], help="run the oracle cross-checks")
    return p


def _resolve(args):
    cfg = load_config(args.config) if args.config else config_from_dict({})
    if args.scenario:
        cfg = replace(cfg, scenario=Scenario.parse(args.scenario))
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    if args.emit_svg:
        cfg = replace(cfg, emit_svg=True)
    if args.quick and args.command != "verify":
        cfg = quick_config(cfg)
    return cfg


_COMMANDS = {"trace": _cmd_trace, "psd": _cmd_psd, "gain-profile": _cmd_gain, "verify": _cmd_verify}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command != "verify":
        try:
            _prepare_out(cfg.out_dir)
        except OSError as exc:
            print(f"output directory {cfg.out_dir!r} is not writable: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](cfg, args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
