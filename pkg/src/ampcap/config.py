"""Run configuration: JSON ingestion, defaults, validation, normalization.

A config is a flat JSON object.  Circuit values are normalized
(``g_d_over_gm``, ``P_norm``, ...) unless a ``physical`` block supplies SI
values, which are normalized on load and the scales kept in ``units``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from .circuit import CircuitParams, FrequencyGrid, Placement, Units
from .pareto import Box, Scenario, TraceConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "config_from_dict", "SCHEMA"]


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key, msg):
        super().__init__(f"{key}: {msg}")
        self.key = key


# key -> (description, default); documents the schema and drives validation
SCHEMA = {
    "g_d_over_gm": ("drain conductance g_d/g_m; a list traces one series per value", 0.1),
    "g_o_over_gm": ("noise conductance g_o/g_m; null means equal to g_d", None),
    "P_norm": ("input power P*C_gd/(N0*g_m)", 0.1),
    "omega_B_norm": ("flat-PSD bandwidth omega_B*C_gd/g_m (scenarios B, BL)", 0.1),
    "scenario": ("A, B or BL", "A"),
    "physical": ("optional SI block {g_m, C_gd, N0, g_d, g_o, P, omega_B}", None),
    "units": ("normalization scales; written by the tool, informational", None),
    "g_s_bounds": ("search box for g_s/g_m", [1e-3, 1e2]),
    "g_l_bounds": ("search box for g_l/g_m", [1e-3, 1e2]),
    "L_bounds": ("search box for L*g_m^2/C_gd", [1e-2, 1e6]),
    "multistart": ("start-grid nodes per search axis", 5),
    "tol": ("relative objective tolerance of the outer search", 1e-8),
    "eta_grid": ("explicit increasing list of transfer factors; null for the default", None),
    "n_eta": ("size of the default eta grid (0, then log-spaced to 0.98 eta_max)", 50),
    "grid": ("PSD grid {omega_max, samples, grading}", {"omega_max": 50.0, "samples": 4096, "grading": 10.0}),
    "band_samples": ("quadrature samples across the flat-PSD band", 8192),
    "placement": ("matching inductor placement", "ParallelToCgd"),
    "psd_etas": ("eta values whose optimal PSD is written (scenario A)", []),
    "out_dir": ("output directory", "out"),
    "emit_svg": ("also write SVG plots", False),
}

_PHYSICAL_KEYS = ("g_m", "C_gd", "N0", "g_d", "g_o", "P", "omega_B")
_GRID_KEYS = ("omega_max", "samples", "grading")


def _positive(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
        raise ConfigError(key, f"must be a positive number, got {v!r}")
    return float(v)


def _nonneg(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
        raise ConfigError(key, f"must be a nonnegative number, got {v!r}")
    return float(v)


def _int_at_least(key, v, lo):
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ConfigError(key, f"must be an integer >= {lo}, got {v!r}")
    return v


def _bounds(key, v):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(key, f"must be a [lo, hi] pair, got {v!r}")
    lo, hi = (_positive(key, x) for x in v)
    if not lo < hi:
        raise ConfigError(key, f"bounds must be ordered lo < hi, got {list(v)}")
    return (lo, hi)


def _scalar_or_list(key, v, check):
    vals = v if isinstance(v, (list, tuple)) else [v]
    if not vals:
        raise ConfigError(key, "must not be empty")
    return tuple(check(key, x) for x in vals)


@dataclass(frozen=True)
class RunConfig:
    """Validated, normalized run settings."""

    g_d_over_gm: tuple = (0.1,)
    g_o_over_gm: Optional[float] = None
    P_norm: float = 0.1
    omega_B_norm: float = 0.1
    scenario: Scenario = Scenario.A
    units: Units = field(default_factory=Units)
    g_s_bounds: tuple = (1e-3, 1e2)
    g_l_bounds: tuple = (1e-3, 1e2)
    L_bounds: tuple = (1e-2, 1e6)
    multistart: int = 5
    tol: float = 1e-8
    eta_grid: Optional[tuple] = None
    n_eta: int = 50
    grid: tuple = (50.0, 4096, 10.0)
    band_samples: int = 8192
    placement: Placement = Placement.PARALLEL_TO_CGD
    psd_etas: tuple = ()
    out_dir: str = "out"
    emit_svg: bool = False

    def circuits(self):
        """One ``CircuitParams`` per configured ``g_d/g_m``."""
        return [CircuitParams(g_d=g, g_o=self.g_o_over_gm) for g in self.g_d_over_gm]

    def box(self):
        return Box(self.g_s_bounds, self.g_l_bounds, self.L_bounds)

    def frequency_grid(self):
        omega_max, n, grading = self.grid
        return FrequencyGrid.symmetric(omega_max, n, grading)

    def trace_config(self, eta_grid):
        return TraceConfig(
            scenario=self.scenario,
            eta_grid=tuple(eta_grid),
            P=self.P_norm,
            omega_B=self.omega_B_norm,
            box=self.box(),
            multistart=self.multistart,
            tol=self.tol,
            grid=self.frequency_grid(),
            band_samples=self.band_samples,
            placement=self.placement,
        )

    def to_dict(self):
        """JSON-ready normalized form; :func:`config_from_dict` inverts it."""
        d = asdict(self)
        d["scenario"] = self.scenario.value
        d["placement"] = self.placement.value
        d["units"] = self.units.to_dict()
        d["g_d_over_gm"] = list(self.g_d_over_gm)
        for k in ("g_s_bounds", "g_l_bounds", "L_bounds", "psd_etas"):
            d[k] = list(d[k])
        d["eta_grid"] = None if self.eta_grid is None else list(self.eta_grid)
        d["grid"] = dict(zip(_GRID_KEYS, self.grid))
        return d


def _normalize_physical(block):
    if not isinstance(block, dict):
        raise ConfigError("physical", "must be an object")
    unknown = sorted(set(block) - set(_PHYSICAL_KEYS))
    if unknown:
        raise ConfigError(f"physical.{unknown[0]}", "unknown key")
    for k in ("g_m", "C_gd", "g_d", "P"):
        if k not in block:
            raise ConfigError(f"physical.{k}", "required in the physical block")
    g_m = _positive("physical.g_m", block["g_m"])
    C_gd = _positive("physical.C_gd", block["C_gd"])
    N0 = _positive("physical.N0", block.get("N0", 1.0))
    g_ds = _scalar_or_list("physical.g_d", block["g_d"], _nonneg)
    g_o = block.get("g_o")
    g_o = None if g_o is None else _nonneg("physical.g_o", g_o)
    _, units = CircuitParams.from_physical(g_m, C_gd, g_ds[0], g_o, N0)
    out = {
        "g_d_over_gm": [g / g_m for g in g_ds],
        "g_o_over_gm": None if g_o is None else g_o / g_m,
        "P_norm": _positive("physical.P", block["P"]) / units.power,
    }
    if "omega_B" in block:
        out["omega_B_norm"] = _positive("physical.omega_B", block["omega_B"]) / units.frequency
    return out, units


def config_from_dict(doc):
    """Validate a config mapping and fill defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    unknown = sorted(set(doc) - set(SCHEMA))
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    doc = dict(doc)
    units = Units()
    if doc.get("physical") is not None:
        clash = sorted({"g_d_over_gm", "g_o_over_gm", "P_norm", "omega_B_norm"} & set(doc))
        phys, units = _normalize_physical(doc["physical"])
        for k in clash:
            if k in phys:
                raise ConfigError(k, "given both normalized and in the physical block")
        doc.update(phys)
    elif doc.get("units") is not None:
        u = doc["units"]
        if not isinstance(u, dict) or set(u) != set(Units().to_dict()):
            raise ConfigError("units", f"must have keys {sorted(Units().to_dict())}")
        units = Units(**{k: _positive(f"units.{k}", v) for k, v in u.items()})
    get = lambda k: doc.get(k, SCHEMA[k][1])

    try:
        scenario = Scenario.parse(get("scenario"))
    except ValueError:
        raise ConfigError("scenario", f"must be A, B or BL, got {get('scenario')!r}") from None
    try:
        placement = Placement(get("placement"))
    except ValueError:
        opts = [p.value for p in Placement]
        raise ConfigError("placement", f"must be one of {opts}, got {get('placement')!r}") from None

    g_o = get("g_o_over_gm")
    grid = get("grid")
    if not isinstance(grid, dict) or set(grid) - set(_GRID_KEYS):
        raise ConfigError("grid", f"must be an object with keys {list(_GRID_KEYS)}")
    grid = {**SCHEMA["grid"][1], **grid}
    grid_t = (
        _positive("grid.omega_max", grid["omega_max"]),
        _int_at_least("grid.samples", grid["samples"], 16),
        _nonneg("grid.grading", grid["grading"]),
    )
    omega_B = _positive("omega_B_norm", get("omega_B_norm"))
    if scenario is not Scenario.A and omega_B / 2 > grid_t[0]:
        raise ConfigError("omega_B_norm", "band exceeds the frequency grid")

    eta_grid = get("eta_grid")
    if eta_grid is not None:
        if not isinstance(eta_grid, (list, tuple)):
            raise ConfigError("eta_grid", "must be a list of numbers")
        if not eta_grid:
            raise ConfigError("eta_grid", "must not be empty")
        eta_grid = tuple(_nonneg("eta_grid", e) for e in eta_grid)
        if any(b <= a for a, b in zip(eta_grid, eta_grid[1:])):
            raise ConfigError("eta_grid", "must be strictly increasing")
    psd_etas = get("psd_etas")
    if not isinstance(psd_etas, (list, tuple)):
        raise ConfigError("psd_etas", "must be a list of numbers")
    emit_svg = get("emit_svg")
    if not isinstance(emit_svg, bool):
        raise ConfigError("emit_svg", f"must be true or false, got {emit_svg!r}")
    out_dir = get("out_dir")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("out_dir", "must be a non-empty string")
    tol = _positive("tol", get("tol"))
    if tol >= 1:
        raise ConfigError("tol", f"must be below 1, got {tol}")

    return RunConfig(
        g_d_over_gm=_scalar_or_list("g_d_over_gm", get("g_d_over_gm"), _nonneg),
        g_o_over_gm=None if g_o is None else _nonneg("g_o_over_gm", g_o),
        P_norm=_positive("P_norm", get("P_norm")),
        omega_B_norm=omega_B,
        scenario=scenario,
        units=units,
        g_s_bounds=_bounds("g_s_bounds", get("g_s_bounds")),
        g_l_bounds=_bounds("g_l_bounds", get("g_l_bounds")),
        L_bounds=_bounds("L_bounds", get("L_bounds")),
        multistart=_int_at_least("multistart", get("multistart"), 1),
        tol=tol,
        eta_grid=eta_grid,
        n_eta=_int_at_least("n_eta", get("n_eta"), 1),
        grid=grid_t,
        band_samples=_int_at_least("band_samples", get("band_samples"), 16),
        placement=placement,
        psd_etas=tuple(_nonneg("psd_etas", e) for e in psd_etas),
        out_dir=out_dir,
        emit_svg=emit_svg,
    )


def load_config(path):
    """Read a JSON config, or the ``config`` entry of a written ``meta.json``."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", f"{path}: line {exc.lineno}: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError("<file>", f"{path}: {exc.strerror}") from None
    if isinstance(doc, dict) and doc.get("kind") == "ampcap-meta":
        doc = doc.get("config")
    return config_from_dict(doc)
