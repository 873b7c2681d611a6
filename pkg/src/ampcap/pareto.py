"""Capacity / power-transfer frontier over circuit terminations.

Scenario A optimizes the PSD together with ``(g_s, g_l)``; the PSD part is
the inner solve of :mod:`ampcap.spectrum`.  Scenario B fixes a flat PSD of
bandwidth ``omega_B`` and optimizes ``(g_s, g_l)`` and optionally a matching
inductor.  Outer searches run Nelder-Mead in log-coordinates from every node
of a small logarithmic start grid.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .circuit import (
    CircuitParams,
    FrequencyGrid,
    Matching,
    Placement,
    Termination,
    gain_profile,
    noise_figure,
    power_gain,
)
from .spectrum import (
    INFEASIBLE_MARGIN,
    LN2,
    BudgetSpec,
    SpectralSolution,
    Status,
    _solve_half,
    solve_constrained,
)

__all__ = [
    "Scenario",
    "Box",
    "TraceConfig",
    "ParetoPoint",
    "optimize_terminations_A",
    "optimize_terminations_B",
    "capacity_uniform",
    "band_average_gain",
    "trace_pareto",
    "eta_max",
    "default_eta_grid",
]

TIE_RTOL = 1e-12


class Scenario(str, Enum):
    A = "A"
    B = "B"
    BL = "BL"

    @classmethod
    def parse(cls, value):
        aliases = {
            "A_psd_and_terminations": "A",
            "B_uniform": "B",
            "B_uniform_with_matching": "BL",
        }
        return cls(aliases.get(value, value))


@dataclass(frozen=True)
class Box:
    """Search bounds (normalized units)."""

    g_s: tuple = (1e-3, 1e2)
    g_l: tuple = (1e-3, 1e2)
    L: tuple = (1e-2, 1e6)

    def __post_init__(self):
        for name in ("g_s", "g_l", "L"):
            lo, hi = getattr(self, name)
            if not (0 < lo < hi and math.isfinite(hi)):
                raise ValueError(f"{name} bounds must satisfy 0 < lo < hi, got {(lo, hi)}")
            object.__setattr__(self, name, (float(lo), float(hi)))


@dataclass(frozen=True)
class TraceConfig:
    scenario: Scenario = Scenario.A
    eta_grid: tuple = (0.0,)
    P: float = 0.1
    omega_B: float = 0.1
    box: Box = field(default_factory=Box)
    multistart: int = 5
    tol: float = 1e-8
    grid: Optional[FrequencyGrid] = None
    band_samples: int = 8192
    placement: Placement = Placement.PARALLEL_TO_CGD

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario.parse(self.scenario))
        object.__setattr__(self, "placement", Placement(self.placement))
        eg = tuple(float(e) for e in self.eta_grid)
        if not eg:
            raise ValueError("eta_grid must not be empty")
        if any(e < 0 or not math.isfinite(e) for e in eg):
            raise ValueError("eta_grid entries must be finite and nonnegative")
        if any(b <= a for a, b in zip(eg, eg[1:])):
            raise ValueError("eta_grid must be strictly increasing")
        object.__setattr__(self, "eta_grid", eg)
        if not self.P > 0:
            raise ValueError(f"P must be positive, got {self.P}")
        if not self.omega_B > 0:
            raise ValueError(f"omega_B must be positive, got {self.omega_B}")
        if self.multistart < 1:
            raise ValueError("multistart must be at least 1")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")

    def psd_grid(self):
        return self.grid if self.grid is not None else FrequencyGrid.symmetric()

    def band_grid(self):
        return FrequencyGrid.symmetric(0.5 * self.omega_B, self.band_samples, grading=0.0)


@dataclass(frozen=True, eq=False)
class ParetoPoint:
    eta: float
    capacity: float
    g_s: float
    g_l: float
    L: Optional[float]
    lam: float
    mu: float
    p_out: float
    status: Status
    support_measure: float = math.nan
    peak_psd: float = math.nan
    solution: Optional[SpectralSolution] = field(default=None, repr=False)

    def row(self):
        return (
            self.eta,
            self.capacity,
            self.g_s,
            self.g_l,
            self.L,
            self.lam,
            self.mu,
            self.p_out,
            self.status.value,
        )


# -- derivative-free search ---------------------------------------------------


def _start_nodes(bounds, n):
    axes = [np.linspace(math.log(lo), math.log(hi), n) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _simplex(x0, lbounds, step):
    pts = [np.array(x0, dtype=float)]
    for i in range(len(x0)):
        p = pts[0].copy()
        lo, hi = lbounds[i]
        p[i] = p[i] + step if p[i] + step <= hi else p[i] - step
        pts.append(np.clip(p, lo, hi))
    return np.array(pts)


def _nm(fun, x0, lbounds, step, xatol, fatol, maxfev):
    r = minimize(
        fun,
        x0,
        method="Nelder-Mead",
        bounds=lbounds,
        options={
            "initial_simplex": _simplex(x0, lbounds, step),
            "xatol": xatol,
            "fatol": fatol,
            "maxfev": maxfev,
        },
    )
    return float(r.fun), np.clip(r.x, [b[0] for b in lbounds], [b[1] for b in lbounds])


def _pick(results):
    """Lowest objective; near-ties go to the smallest parameters."""
    fbest = min(f for f, _ in results)
    tied = [x for f, x in results if f <= fbest + TIE_RTOL * max(1.0, abs(fbest))]
    x = min(tied, key=lambda v: tuple(v))
    f = next(f for f, y in results if y is x)
    return f, x


def _multistart(fun, bounds, n, tol, starts=None, polish=True):
    """Coarse descent from every start node, then polish the winner.

    ``bounds`` are in natural units; the search runs in log-coordinates.
    """
    lb = [(math.log(lo), math.log(hi)) for lo, hi in bounds]
    if starts is None:
        starts = _start_nodes(bounds, n)
    results = []
    for x0 in starts:
        f0 = fun(x0)
        results.append(_nm(fun, x0, lb, 0.5, 1e-2, tol * max(abs(f0), 1e-300), 150))
    f, x = _pick(results)
    if polish:
        f2, x2 = _nm(fun, x, lb, 1e-2, 1e-10, 1e-6 * tol * max(abs(f), 1e-300), 1000)
        if f2 <= f:
            f, x = f2, x2
    return f, x


# -- scenario A ------------------------------------------------------------------


class _ScenarioA:
    def __init__(self, eta, circuit, P, grid):
        self.eta, self.circuit, self.P, self.grid = eta, circuit, P, grid
        self.s_half, self.w_half = grid.half()

    def solve(self, g_s, g_l):
        term = Termination(g_s, g_l)
        G = power_gain(self.circuit, term, self.s_half)
        nf = noise_figure(self.circuit, term) * self.circuit.N0
        lam, mu, phi, status = _solve_half(G, self.w_half, self.P, self.eta, nf)
        return G, nf, lam, mu, phi, status

    def objective(self, x):
        g_s, g_l = math.exp(x[0]), math.exp(x[1])
        G, nf, lam, mu, phi, status = self.solve(g_s, g_l)
        if status is Status.INFEASIBLE:
            # positive and shrinking toward feasibility
            return self.eta / G.max()
        return -float(np.sum(self.w_half * np.log2(1.0 + phi / nf)))

    def objective_and_grad(self, x, h=1e-6):
        """Objective and its envelope gradient in log-coordinates.

        At an optimal PSD the derivative of the optimal value equals the
        partial derivative of the Lagrangian with PSD and multipliers held
        fixed; that partial is taken by central differences.
        """
        g_s, g_l = math.exp(x[0]), math.exp(x[1])
        G, nf, lam, mu, phi, status = self.solve(g_s, g_l)
        if status is Status.INFEASIBLE:
            return self.eta / G.max(), np.zeros(2)
        w = self.w_half

        def lag(v):
            t = Termination(math.exp(v[0]), math.exp(v[1]))
            nf_t = noise_figure(self.circuit, t) * self.circuit.N0
            G_t = power_gain(self.circuit, t, self.s_half)
            return float(np.sum(w * np.log2(1.0 + phi / nf_t))) + mu * float(np.sum(w * phi * G_t))

        grad = np.empty(2)
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            grad[i] = -(lag(x + e) - lag(x - e)) / (2 * h)
        return -float(np.sum(w * np.log2(1.0 + phi / nf))), grad


def _gradient_polish(prob, x, f, lbounds):
    """L-BFGS-B from the simplex result; kept only if it improves."""
    r = minimize(
        prob.objective_and_grad,
        np.asarray(x, dtype=float),
        jac=True,
        method="L-BFGS-B",
        bounds=lbounds,
        options={"gtol": 1e-9 * abs(f), "ftol": 1e-15, "maxiter": 200},
    )
    x2 = np.clip(r.x, [b[0] for b in lbounds], [b[1] for b in lbounds])
    f2 = prob.objective(x2)
    if f2 < f:
        f, x = f2, x2
    return _newton_polish(prob, x, f, lbounds)


def _newton_polish(prob, x, f, lbounds, iters=8, h=1e-4):
    """Newton steps on the envelope gradient.

    Near the optimum the remaining objective decrease drops below the inner
    solve tolerance, which stalls line searches; the gradient stays
    informative there.  A step is kept when it lowers the projected gradient
    without raising the objective beyond that noise level.
    """
    lo = np.array([b[0] for b in lbounds])
    hi = np.array([b[1] for b in lbounds])
    x = np.asarray(x, dtype=float)

    def free_mask(x, g):
        at_lo = (x <= lo + 1e-12) & (g > 0)
        at_hi = (x >= hi - 1e-12) & (g < 0)
        return ~(at_lo | at_hi)

    _, g = prob.objective_and_grad(x)
    for _ in range(iters):
        m = free_mask(x, g)
        gn = float(np.abs(g[m]).max()) if m.any() else 0.0
        if gn <= 1e-9 * abs(f):
            break
        idx = np.flatnonzero(m)
        H = np.empty((idx.size, idx.size))
        for j, k in enumerate(idx):
            e = np.zeros_like(x)
            e[k] = h
            gp = prob.objective_and_grad(np.clip(x + e, lo, hi))[1]
            gm = prob.objective_and_grad(np.clip(x - e, lo, hi))[1]
            H[:, j] = (gp[idx] - gm[idx]) / (2 * h)
        H = 0.5 * (H + H.T)
        try:
            step = -np.linalg.solve(H, g[idx])
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)) or float(step @ g[idx]) >= 0:
            break
        accepted = False
        for t in (1.0, 0.5, 0.25):
            xn = x.copy()
            xn[idx] = x[idx] + t * step
            xn = np.clip(xn, lo, hi)
            fn, gn_vec = prob.objective_and_grad(xn)
            mn = free_mask(xn, gn_vec)
            gnn = float(np.abs(gn_vec[mn]).max()) if mn.any() else 0.0
            if fn <= f + 1e-10 * abs(f) and gnn < gn:
                x, f, g, accepted = xn, fn, gn_vec, True
                break
        if not accepted:
            break
    return f, x


def optimize_terminations_A(eta, circuit, P, grid=None, box=None, multistart=5, tol=1e-8):
    """Jointly optimal PSD and ``(g_s, g_l)`` for one transfer level."""
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    grid = grid if grid is not None else FrequencyGrid.symmetric()
    box = box if box is not None else Box()
    prob = _ScenarioA(float(eta), circuit, P, grid)
    f, x = _multistart(prob.objective, [box.g_s, box.g_l], multistart, tol)
    if f < 0:
        lb = [(math.log(lo), math.log(hi)) for lo, hi in (box.g_s, box.g_l)]
        f, x = _gradient_polish(prob, x, f, lb)
    g_s, g_l = (float(v) for v in np.exp(x))
    if f > 0:
        return ParetoPoint(eta, 0.0, g_s, g_l, None, math.nan, math.nan, 0.0, Status.INFEASIBLE)
    term = Termination(g_s, g_l)
    gain = gain_profile(circuit, term, grid)
    sol = solve_constrained(BudgetSpec(P, eta, noise_figure(circuit, term) * circuit.N0), gain)
    return ParetoPoint(
        eta=float(eta),
        capacity=sol.capacity,
        g_s=g_s,
        g_l=g_l,
        L=None,
        lam=sol.lam,
        mu=sol.mu,
        p_out=sol.p_out,
        status=sol.status,
        support_measure=sol.support_measure,
        peak_psd=sol.peak,
        solution=sol,
    )


# -- scenario B ------------------------------------------------------------------


def capacity_uniform(circuit, term, P, omega_B):
    """Capacity of a flat PSD ``P/omega_B`` on ``|w| <= omega_B/2``."""
    if not omega_B > 0:
        raise ValueError(f"omega_B must be positive, got {omega_B}")
    nf = noise_figure(circuit, term) * circuit.N0
    return omega_B * math.log2(1.0 + P / (omega_B * nf))


def band_average_gain(circuit, term, omega_B, grid=None):
    """Mean power gain over ``|w| <= omega_B/2`` by trapezoidal quadrature.

    ``grid`` may be wider than the band; it is cut at the band edges.  By
    default a uniform 8192-sample grid spanning the band is used.
    """
    if not omega_B > 0:
        raise ValueError(f"omega_B must be positive, got {omega_B}")
    if grid is None:
        band = FrequencyGrid.symmetric(0.5 * omega_B, 8192, grading=0.0)
    elif grid.omega_max == 0.5 * omega_B:
        band = grid
    else:
        band = grid.band(0.5 * omega_B)
    return float(band.integrate(power_gain(circuit, term, band.samples))) / omega_B


class _ScenarioB:
    """Band-average gain maximized over the load side for a given ``g_s``."""

    def __init__(self, circuit, omega_B, band, box, placement, multistart, tol, matching):
        self.circuit, self.omega_B, self.box = circuit, omega_B, box
        self.s_half, self.w_half = band.half()
        self.placement, self.n, self.tol = placement, multistart, tol
        self.matching = matching
        self._unmatched = {}
        self._scan_opt = {}

    def gbar(self, g_s, g_l, L=None):
        m = None if L is None else Matching(L, self.placement)
        G = power_gain(self.circuit, Termination(g_s, g_l, m), self.s_half)
        return float(self.w_half @ G) / self.omega_B

    def best_unmatched(self, g_s):
        """Pure function of g_s: fixed 1-D multistart over g_l."""
        if g_s not in self._unmatched:
            f, x = _multistart(
                lambda x: -self.gbar(g_s, math.exp(x[0])), [self.box.g_l], self.n, self.tol
            )
            self._unmatched[g_s] = (-f, math.exp(x[0]), None)
        return self._unmatched[g_s]

    def best_matched(self, g_s, starts=None):
        f, x = _multistart(
            lambda x: -self.gbar(g_s, math.exp(x[0]), math.exp(x[1])),
            [self.box.g_l, self.box.L],
            self.n,
            self.tol,
            starts=starts,
        )
        return -f, math.exp(x[0]), math.exp(x[1])

    def best(self, g_s, starts=None):
        """``(F, g_l, L)``; with matching the unmatched circuit (L -> inf) competes."""
        unm = self.best_unmatched(g_s)
        if not self.matching:
            return unm
        mat = self.best_matched(g_s, starts)
        # ties keep the inductor-free circuit
        return mat if mat[0] > unm[0] else unm


def _bisect_g_s(prob, eta, box, n_scan=21, iters=48):
    """Largest g_s whose best band-average gain still reaches eta.

    A log-spaced scan locates the upper-most feasible node; bisection in
    log g_s then refines inside the bracket above it.  The lower end of the
    bracket is always feasible.
    """
    scan = np.exp(np.linspace(math.log(box.g_s[0]), math.log(box.g_s[1]), n_scan))
    vals = [prob.scan_value(float(g)) for g in scan]
    feas = [i for i, v in enumerate(vals) if v[0] >= eta]
    if not feas:
        return None
    i = feas[-1]
    if i == n_scan - 1:
        return float(scan[-1]), vals[-1]
    lo, hi = math.log(scan[i]), math.log(scan[i + 1])
    best = (float(scan[i]), vals[i])
    starts = prob.warm_starts(float(scan[i]), float(scan[i + 1]))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        g = math.exp(mid)
        v = prob.best(g, starts)
        if v[0] >= eta:
            lo, best = mid, (g, v)
        else:
            hi = mid
        if hi - lo <= 1e-13:
            break
    return best


class _ScannedB(_ScenarioB):
    def scan_value(self, g_s):
        if g_s not in self._scan_opt:
            self._scan_opt[g_s] = self.best(g_s)
        return self._scan_opt[g_s]

    def warm_starts(self, g_lo, g_hi):
        if not self.matching:
            return None
        pts = []
        for g in (g_lo, g_hi):
            F, g_l, L = self._scan_opt[g]
            pts.append((math.log(g_l), math.log(L if L is not None else self.box.L[1])))
        return np.unique(np.array(pts), axis=0)


def _b_multiplier(circuit, P, omega_B, prob, g_s, g_l, L):
    """mu from the g_s stationarity condition ``C'(g_s) + mu P dF/dg_s = 0``."""
    h = 1e-6 * g_s
    c = lambda g: omega_B * math.log2(1.0 + P / (omega_B * (1.0 + circuit.g_o / g) * circuit.N0))
    dC = (c(g_s + h) - c(g_s - h)) / (2 * h)
    dG = (prob.gbar(g_s + h, g_l, L) - prob.gbar(g_s - h, g_l, L)) / (2 * h)
    return -dC / (P * dG) if dG != 0 else math.inf


def optimize_terminations_B(
    eta,
    circuit,
    P,
    omega_B,
    with_matching=False,
    box=None,
    multistart=5,
    tol=1e-8,
    band=None,
    placement=Placement.PARALLEL_TO_CGD,
    _prob=None,
):
    """Best ``(g_s, g_l[, L])`` for a flat PSD of bandwidth ``omega_B``.

    Capacity grows with ``g_s`` alone, so the optimum is the largest ``g_s``
    for which some load side still meets the band-average gain target.
    """
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    box = box if box is not None else Box()
    if _prob is None:
        band = band if band is not None else FrequencyGrid.symmetric(0.5 * omega_B, 8192, 0.0)
        _prob = _ScannedB(circuit, omega_B, band, box, Placement(placement), multistart, tol, with_matching)
    found = _bisect_g_s(_prob, eta, box)
    if found is None:
        g_s = box.g_s[0]
        return ParetoPoint(float(eta), 0.0, g_s, math.nan, None, math.nan, math.nan, 0.0, Status.INFEASIBLE)
    g_s, (F, g_l, L) = found
    term = Termination(g_s, g_l, None if L is None else Matching(L, _prob.placement))
    cap = capacity_uniform(circuit, term, P, omega_B)
    if g_s >= box.g_s[1]:
        status, mu = Status.INACTIVE, 0.0
    else:
        status = Status.ACTIVE
        mu = _b_multiplier(circuit, P, omega_B, _prob, g_s, g_l, L)
    nf = noise_figure(circuit, term) * circuit.N0
    # flat PSD: the power multiplier is the marginal capacity per unit power
    lam = 1.0 / (LN2 * (nf + P / omega_B))
    return ParetoPoint(
        eta=float(eta),
        capacity=cap,
        g_s=g_s,
        g_l=g_l,
        L=L,
        lam=lam,
        mu=mu,
        p_out=P * F,
        status=status,
        support_measure=omega_B,
        peak_psd=P / omega_B,
    )


# -- frontier --------------------------------------------------------------------


def _point(cfg, circuit, eta, prob=None):
    if cfg.scenario is Scenario.A:
        return optimize_terminations_A(
            eta, circuit, cfg.P, cfg.psd_grid(), cfg.box, cfg.multistart, cfg.tol
        )
    return optimize_terminations_B(
        eta,
        circuit,
        cfg.P,
        cfg.omega_B,
        with_matching=cfg.scenario is Scenario.BL,
        box=cfg.box,
        multistart=cfg.multistart,
        tol=cfg.tol,
        band=cfg.band_grid(),
        placement=cfg.placement,
        _prob=prob,
    )


def _point_job(args):
    return _point(*args)


def trace_pareto(cfg, circuit, workers=1):
    """One optimized point per ``eta`` in ``cfg.eta_grid``, in order.

    Infeasible levels are reported with status ``Infeasible``; the sweep
    continues past them.  With ``workers > 1`` points are computed in
    separate processes; results do not depend on the worker count.
    """
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_point_job, [(cfg, circuit, e) for e in cfg.eta_grid]))
    prob = None
    if cfg.scenario is not Scenario.A:
        # scan values depend on g_s only and are shared across eta
        prob = _ScannedB(
            circuit,
            cfg.omega_B,
            cfg.band_grid(),
            cfg.box,
            cfg.placement,
            cfg.multistart,
            cfg.tol,
            cfg.scenario is Scenario.BL,
        )
    return [_point(cfg, circuit, e, prob) for e in cfg.eta_grid]


def eta_max(scenario, circuit, box=None, grid=None, omega_B=0.1, placement=Placement.PARALLEL_TO_CGD, multistart=5, band_samples=8192):
    """Largest reachable transfer factor over the box.

    Scenario A: sup of the peak sampled gain.  Scenario B: sup of the band
    average gain (with the inductor as an extra variable for ``BL``).
    """
    scenario = Scenario.parse(scenario)
    box = box if box is not None else Box()
    if scenario is Scenario.A:
        grid = grid if grid is not None else FrequencyGrid.symmetric()
        s_half, _ = grid.half()
        fun = lambda x: -float(power_gain(circuit, Termination(*np.exp(x)), s_half).max())
        f, _ = _multistart(fun, [box.g_s, box.g_l], multistart, 1e-10)
        return -f
    band = FrequencyGrid.symmetric(0.5 * omega_B, band_samples, grading=0.0)
    prob = _ScenarioB(circuit, omega_B, band, box, Placement(placement), multistart, 1e-10, False)
    if scenario is Scenario.B:
        fun = lambda x: -prob.gbar(math.exp(x[0]), math.exp(x[1]))
        f, _ = _multistart(fun, [box.g_s, box.g_l], multistart, 1e-10)
        return -f
    fun = lambda x: -prob.gbar(math.exp(x[0]), math.exp(x[1]), math.exp(x[2]))
    f, _ = _multistart(fun, [box.g_s, box.g_l, box.L], multistart, 1e-10)
    f0 = -eta_max(Scenario.B, circuit, box, omega_B=omega_B, multistart=multistart, band_samples=band_samples)
    return -min(f, f0)


def default_eta_grid(emax, n=50, low=1e-4):
    """0 followed by ``n - 1`` log-spaced levels up to ``0.98 * emax``."""
    if n < 2:
        return (0.0,)
    return (0.0,) + tuple(float(e) for e in np.geomspace(low * emax, 0.98 * emax, n - 1))
