"""Slow, independent reference computations.

Nothing here shares code paths with the production solvers beyond the
data types: the circuit is re-derived by nodal analysis, the dual problem is
scanned by brute force, the primal is maximized directly, and the band
integral of the gain is done in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .circuit import CircuitParams, FrequencyGrid, Matching, Placement, Termination
from .spectrum import INFEASIBLE_MARGIN, Status

__all__ = [
    "BranchKind",
    "Branch",
    "Netlist",
    "SingularCircuitError",
    "UnsupportedConfigurationError",
    "ConvergenceError",
    "nodal_solve",
    "amplifier_netlist",
    "two_port_response",
    "DualScan",
    "brute_force_duals",
    "DirectResult",
    "direct_psd_maximizer",
    "KktReport",
    "kkt_residuals",
    "analytic_band_gain_integral",
    "log_grid_scan",
]

LN2 = math.log(2.0)
GROUND = "0"


class SingularCircuitError(ArithmeticError):
    def __init__(self, omega, msg="admittance matrix is singular"):
        super().__init__(f"{msg} at omega={omega!r}")
        self.omega = omega


class UnsupportedConfigurationError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residuals):
        super().__init__(f"{msg}: {residuals}")
        self.residuals = residuals


# -- nodal analysis --------------------------------------------------------------


class BranchKind(str, Enum):
    CONDUCTANCE = "Conductance"
    CAPACITANCE = "Capacitance"
    INDUCTANCE = "Inductance"
    VCCS = "VCCS"
    CURRENT_SOURCE = "CurrentSource"


@dataclass(frozen=True)
class Branch:
    """One netlist element between ``terminals = (a, b)``.

    A VCCS drives ``value * (v[c] - v[d])`` out of ``a`` into ``b`` where
    ``control = (c, d)``.  A current source drives ``value`` from ``a`` to
    ``b`` through itself, i.e. into node ``b``.
    """

    kind: BranchKind
    terminals: tuple
    value: complex
    control: Optional[tuple] = None


@dataclass(frozen=True)
class Netlist:
    nodes: tuple
    branches: tuple

    def __post_init__(self):
        if GROUND not in self.nodes:
            raise ValueError("netlist needs a ground node '0'")
        known = set(self.nodes)
        adj = {n: set() for n in self.nodes}
        for br in self.branches:
            used = tuple(br.terminals) + tuple(br.control or ())
            if not set(used) <= known:
                raise ValueError(f"branch {br} references unknown nodes")
            if br.kind is BranchKind.VCCS and br.control is None:
                raise ValueError("VCCS needs control terminals")
            if br.kind in (BranchKind.CONDUCTANCE, BranchKind.CAPACITANCE, BranchKind.INDUCTANCE):
                if not br.value > 0:
                    raise ValueError(f"{br.kind.value} value must be positive")
            a, b = br.terminals
            adj[a].add(b)
            adj[b].add(a)
        seen, todo = {GROUND}, [GROUND]
        while todo:
            for m in adj[todo.pop()] - seen:
                seen.add(m)
                todo.append(m)
        if seen != known:
            raise ValueError(f"netlist is not connected: {sorted(known - seen)}")


def nodal_solve(netlist, omega):
    """Node voltages of ``Y(jw) u = i`` (ground excluded).

    Returns a dict ``node -> complex voltage`` including ground at 0.
    """
    idx = {n: k for k, n in enumerate(x for x in netlist.nodes if x != GROUND)}
    n = len(idx)
    Y = np.zeros((n, n), dtype=complex)
    rhs = np.zeros(n, dtype=complex)
    jw = 1j * omega

    def stamp(r, c, y):
        if r in idx and c in idx:
            Y[idx[r], idx[c]] += y

    for br in netlist.branches:
        a, b = br.terminals
        if br.kind is BranchKind.CURRENT_SOURCE:
            if a in idx:
                rhs[idx[a]] -= br.value
            if b in idx:
                rhs[idx[b]] += br.value
            continue
        if br.kind is BranchKind.VCCS:
            c, d = br.control
            stamp(a, c, br.value)
            stamp(a, d, -br.value)
            stamp(b, c, -br.value)
            stamp(b, d, br.value)
            continue
        if br.kind is BranchKind.CONDUCTANCE:
            y = br.value
        elif br.kind is BranchKind.CAPACITANCE:
            y = jw * br.value
        else:
            if omega == 0:
                raise SingularCircuitError(omega, "inductor is a short at DC")
            y = 1.0 / (jw * br.value)
        stamp(a, a, y)
        stamp(b, b, y)
        stamp(a, b, -y)
        stamp(b, a, -y)
    if n and np.linalg.cond(Y) > 1e14:
        raise SingularCircuitError(omega)
    try:
        u = np.linalg.solve(Y, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularCircuitError(omega) from exc
    out = {GROUND: 0j}
    out.update({node: complex(u[k]) for node, k in idx.items()})
    return out


def amplifier_netlist(params, term, i_s=1.0):
    """Amplifier with Norton source, ``C_gd`` feedback and resistive drain.

    Nodes: ``g`` (gate), ``d`` (drain).  ``g_d`` is a separate drain
    conductance next to the load.
    """
    G, D = "g", "d"
    br = [
        Branch(BranchKind.CURRENT_SOURCE, (GROUND, G), i_s),
        Branch(BranchKind.CONDUCTANCE, (G, GROUND), term.g_s),
        Branch(BranchKind.CAPACITANCE, (G, D), params.C_gd),
        Branch(BranchKind.VCCS, (D, GROUND), params.g_m, control=(G, GROUND)),
        Branch(BranchKind.CONDUCTANCE, (D, GROUND), term.g_l),
    ]
    if params.g_d > 0:
        br.append(Branch(BranchKind.CONDUCTANCE, (D, GROUND), params.g_d))
    m = term.matching
    if m is not None:
        where = {
            Placement.PARALLEL_TO_CGD: (G, D),
            Placement.SHUNT_OUTPUT: (D, GROUND),
            Placement.SHUNT_INPUT: (G, GROUND),
        }[m.placement]
        br.append(Branch(BranchKind.INDUCTANCE, where, m.L))
    return Netlist((GROUND, G, D), tuple(br))


def two_port_response(params, term, omega):
    """``(H, gain)`` from nodal analysis.

    ``H = u_L g_s / i_s``; gain is load power ``|u_L|^2 g_l`` over the
    available source power ``|i_s|^2 / (4 g_s)``.
    """
    i_s = 1.0
    u = nodal_solve(amplifier_netlist(params, term, i_s), omega)
    uL = u["d"]
    H = uL * term.g_s / i_s
    gain = abs(uL) ** 2 * term.g_l / (abs(i_s) ** 2 / (4.0 * term.g_s))
    return H, gain


# -- brute-force dual scan -----------------------------------------------------


@dataclass(frozen=True)
class DualScan:
    lam: float
    mu: float
    capacity: float
    p_out: float
    status: Status
    psd: np.ndarray = field(repr=False, default=None)


def _lam_bisect(mu, G, w, P, nf, iters=90):
    """Power multiplier by geometric bisection on ``lam - mu*max(G)``.

    ``mu`` may be an array; rows are solved together.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))[:, None]
    gap = (G.max() - G)[None, :]
    lo = np.full(mu.shape, 1e-300)
    hi = np.full(mu.shape, 1.0 / (LN2 * nf))
    for _ in range(iters):
        mid = np.sqrt(lo * hi)
        phi = np.maximum(1.0 / (LN2 * (mid + mu * gap)) - nf, 0.0)
        too_much = phi @ w > P
        lo = np.where(too_much[:, None], mid, lo)
        hi = np.where(too_much[:, None], hi, mid)
    tau = hi
    phi = np.maximum(1.0 / (LN2 * (tau + mu * gap)) - nf, 0.0)
    return (mu * G.max() + tau).ravel(), phi


def brute_force_duals(gain, budget, n_mu=2000, golden_iters=120):
    """Dual multipliers by scanning ``mu`` and refining by golden section.

    The ``mu`` axis is a 2000-point geometric grid reaching far enough that
    the transfer target is crossed; ``lam`` comes from plain bisection at
    every ``mu``.  Golden-section search then minimizes the transfer
    mismatch inside the crossing cell.
    """
    G_full = np.asarray(gain.values, dtype=float)
    P, eta, nf = budget.P, budget.eta, budget.nf_n0
    if eta >= (1.0 - INFEASIBLE_MARGIN) * G_full.max():
        return DualScan(math.nan, math.nan, 0.0, 0.0, Status.INFEASIBLE, np.zeros_like(G_full))
    n = G_full.size
    if np.array_equal(G_full, G_full[::-1]):
        # even integrands: work on w >= 0 with folded weights, exact for the trapezoid
        _, w = gain.grid.half()
        G = G_full[n // 2:]
        unfold = lambda phi: np.concatenate([phi[::-1] if n % 2 == 0 else phi[:0:-1], phi])
    else:
        G, w = G_full, np.asarray(gain.grid.weights, dtype=float)
        unfold = lambda phi: phi
    target = eta * P

    def at(mu):
        lam, phi = _lam_bisect(mu, G, w, P, nf)
        return lam[0], phi[0]

    lam0, phi0 = at(0.0)
    if phi0 @ (w * G) >= target:
        return DualScan(
            lam0, 0.0, float(w @ np.log2(1 + phi0 / nf)), float(phi0 @ (w * G)), Status.INACTIVE, unfold(phi0)
        )

    mu_hi = 1.0 / (LN2 * nf * G.max())
    while at(mu_hi)[1] @ (w * G) < target:
        mu_hi *= 10.0
    mus = np.geomspace(mu_hi * 1e-12, mu_hi, n_mu)
    transfer = np.empty(n_mu)
    for s in range(0, n_mu, 250):
        _, phis = _lam_bisect(mus[s:s + 250], G, w, P, nf)
        transfer[s:s + 250] = phis @ (w * G)
    k = int(np.argmax(transfer >= target))
    a = mus[k - 1] if k > 0 else 0.0
    b = mus[k]

    def mismatch(mu):
        return abs(at(mu)[1] @ (w * G) - target)

    r = (math.sqrt(5) - 1) / 2
    c, d = b - r * (b - a), a + r * (b - a)
    fc, fd = mismatch(c), mismatch(d)
    for _ in range(golden_iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - r * (b - a)
            fc = mismatch(c)
        else:
            a, c, fc = c, d, fd
            d = a + r * (b - a)
            fd = mismatch(d)
    mu = 0.5 * (a + b)
    lam, phi = at(mu)
    return DualScan(
        float(lam), float(mu), float(w @ np.log2(1 + phi / nf)), float(phi @ (w * G)), Status.ACTIVE, unfold(phi)
    )


# -- direct primal maximization ------------------------------------------------


@dataclass(frozen=True)
class DirectResult:
    psd: np.ndarray = field(repr=False)
    objective: float
    iterations: int
    step_change: float


def _alpha_for(v, w, P):
    """alpha with sum(w * max(0, v + alpha)) = P (exact, by sorting)."""
    order = np.argsort(-v, kind="stable")
    vs, ws = v[order], w[order]
    cw = np.cumsum(ws)
    cwv = np.cumsum(ws * vs)
    alphas = (P - cwv) / cw
    nxt = np.append(vs[1:], -np.inf)
    k = int(np.argmax(nxt + alphas <= 0))
    return alphas[k]


def _project(y, G, w, P, target, beta0=0.0):
    """Weighted-L2 projection onto {x >= 0, <w,x> = P, <wG,x> >= target}.

    The solution is ``max(0, y + alpha + beta G)`` with ``beta >= 0``;
    ``alpha`` is exact for each ``beta`` and ``beta`` is found by a
    bracketed secant search on the (monotone) transfer.
    """
    wG = w * G

    def x_of(beta):
        v = y + beta * G
        return np.maximum(0.0, v + _alpha_for(v, w, P))

    x = x_of(0.0)
    t0 = x @ wG - target
    if t0 >= 0:
        return x, 0.0
    lo, flo = 0.0, t0
    hi = max(beta0, 1e-12 * (1 + np.abs(y).max()))
    x = x_of(hi)
    fhi = x @ wG - target
    while fhi < 0:
        lo, flo = hi, fhi
        hi *= 2.0
        x = x_of(hi)
        fhi = x @ wG - target
    for _ in range(200):
        beta = hi - fhi * (hi - lo) / (fhi - flo)
        if not lo < beta < hi:
            beta = 0.5 * (lo + hi)
        x = x_of(beta)
        f = x @ wG - target
        if abs(f) <= 1e-14 * max(target, 1e-300) or hi - lo <= 4 * np.spacing(hi):
            break
        if f < 0:
            lo, flo = beta, f
        else:
            hi, fhi = beta, f
    return x, beta


def direct_psd_maximizer(gain, budget, iters=10_000, tol=1e-13, strict=True):
    """Maximize the discretized objective over the PSD itself.

    Accelerated projected gradient ascent (FISTA) in the quadrature-weighted
    inner product, step ``1/L`` with ``L = 1/(ln2 nf^2)``.  Every iterate is
    projected exactly onto the feasible set.

    Raises :class:`ConvergenceError` when the iterates are still moving after
    ``iters`` steps (``strict=True``).
    """
    G = np.asarray(gain.values, dtype=float)
    w = np.asarray(gain.grid.weights, dtype=float)
    P, nf = budget.P, budget.nf_n0
    target = budget.eta * P
    if budget.eta >= (1.0 - INFEASIBLE_MARGIN) * G.max():
        raise UnsupportedConfigurationError("transfer target is infeasible")
    step = LN2 * nf * nf
    x, beta = _project(np.full_like(G, P / w.sum()), G, w, P, target)
    y, t = x.copy(), 1.0
    change = math.inf
    k = 0
    for k in range(1, iters + 1):
        grad = 1.0 / (LN2 * (nf + y))
        x_new, beta = _project(y + step * grad, G, w, P, target, beta)
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        y = x_new + ((t - 1) / t_new) * (x_new - x)
        change = math.sqrt(w @ (x_new - x) ** 2) / max(math.sqrt(w @ x_new**2), 1e-300)
        x, t = x_new, t_new
        if change <= tol:
            break
    if strict and change > 1e-6:
        raise ConvergenceError("direct maximizer did not settle", {"step_change": change, "iterations": k})
    return DirectResult(x, float(w @ np.log2(1.0 + x / nf)), k, change)


# -- KKT residuals ------------------------------------------------------------------


@dataclass(frozen=True)
class KktReport:
    """Residuals of the optimality system, each scaled to be dimensionless.

    ``stationarity_residual`` covers the PSD (sup over the grid, relative to
    ``lam``); ``outer_residual`` covers the circuit variables (log-scaled
    Lagrangian derivative relative to capacity, with box constraints
    projected out).
    """

    stationarity_residual: float
    primal_power_residual: float
    transfer_residual: float
    slackness_residual: float
    dual_residual: float
    outer_residual: float
    tolerances: dict = field(default_factory=dict)

    def residuals(self):
        return {
            "stationarity": self.stationarity_residual,
            "primal_power": self.primal_power_residual,
            "transfer": self.transfer_residual,
            "slackness": self.slackness_residual,
            "dual": self.dual_residual,
            "outer": self.outer_residual,
        }

    @property
    def passed(self):
        return all(v <= self.tolerances.get(k, 1e-6) for k, v in self.residuals().items())

    @property
    def worst(self):
        return max(self.residuals().values())


def _fd_log(f, x, rel=1e-6, floor=1e-9):
    h = max(rel * abs(x), floor)
    return x * (f(x + h) - f(x - h)) / (2 * h)


def _projected(deriv_of_objective, x, bounds, at_tol=1e-9):
    """Part of an objective gradient (to be maximized) not blocked by the box."""
    lo, hi = bounds
    if abs(math.log(x / hi)) <= at_tol:
        return max(0.0, -deriv_of_objective)
    if abs(math.log(x / lo)) <= at_tol:
        return max(0.0, deriv_of_objective)
    return abs(deriv_of_objective)


def kkt_residuals(solution, point, circuit, budget, box=None, band=None, placement=None, gain=None, tol=1e-6):
    """KKT residuals of a spectral solution or a frontier point.

    Pass the :class:`~ampcap.spectrum.SpectralSolution` for PSD-optimized
    points (scenario A); the outer residual is evaluated when ``point`` is
    given.  A bare spectral solution needs its ``gain`` profile instead.  For
    flat-PSD points (scenario B) pass ``solution=None`` and the band grid used
    for the gain average.
    """
    from .circuit import noise_figure, power_gain

    tols = {k: tol for k in ("stationarity", "primal_power", "transfer", "slackness", "dual", "outer")}
    status = point.status if point is not None else getattr(solution, "status", None)
    if status is Status.INFEASIBLE:
        return KktReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, tols)
    P, eta = budget.P, budget.eta
    bounds = {}
    if box is not None:
        bounds = {"g_s": box.g_s, "g_l": box.g_l, "L": box.L}

    if solution is not None:
        sol = solution
        w = sol.grid.weights
        phi = sol.psd
        nf = budget.nf_n0
        lam, mu = sol.lam, sol.mu
        if point is not None:
            term = Termination(point.g_s, point.g_l)
            G_vals = power_gain(circuit, term, sol.grid.samples)
            nf = noise_figure(circuit, term) * circuit.N0
        elif gain is not None:
            G_vals = np.asarray(gain.values)
        else:
            raise ValueError("need the frontier point or the gain profile")
        price = lam - mu * G_vals
        marg = 1.0 / (LN2 * (nf + phi))
        wet = phi > 0
        stat = np.where(wet, np.abs(marg - price), np.maximum(0.0, marg - price)) / lam
        stationarity = float(stat.max())
        power = abs(float(w @ phi) - P) / P
        p_out = float(w @ (phi * G_vals))
        transfer = max(0.0, eta * P - p_out) / P
        slack = abs(mu * (p_out - eta * P)) / P
        dual = max(0.0, -mu)
        cap = float(w @ np.log2(1.0 + phi / nf))

        def lag(g_s, g_l):
            t = Termination(g_s, g_l)
            nf_t = noise_figure(circuit, t) * circuit.N0
            G_t = power_gain(circuit, t, sol.grid.samples)
            return -float(w @ np.log2(1.0 + phi / nf_t)) - mu * float(w @ (phi * G_t))

        outer = 0.0
        if point is not None:
            d_s = -_fd_log(lambda v: lag(v, point.g_l), point.g_s)
            d_l = -_fd_log(lambda v: lag(point.g_s, v), point.g_l)
            for name, d, x in (("g_s", d_s, point.g_s), ("g_l", d_l, point.g_l)):
                r = _projected(d, x, bounds[name]) if name in bounds else abs(d)
                outer = max(outer, r / max(cap, 1e-300))
        return KktReport(stationarity, power, transfer, slack, dual, outer, tols)

    # flat PSD: only the circuit variables are free
    if band is None:
        raise ValueError("flat-PSD residuals need the band grid")
    omega_B = 2.0 * band.omega_max
    placement = Placement(placement or Placement.PARALLEL_TO_CGD)

    def gbar(g_s, g_l, L):
        m = None if L is None else Matching(L, placement)
        return float(band.integrate(power_gain(circuit, Termination(g_s, g_l, m), band.samples))) / omega_B

    g_s, g_l, L = point.g_s, point.g_l, point.L
    F = gbar(g_s, g_l, L)
    transfer = max(0.0, eta - F)
    mu = point.mu
    dual = max(0.0, -mu)
    slack = abs(mu * (F - eta))
    outer = 0.0
    if point.status is Status.ACTIVE:
        # stationarity in g_l (and L) of the constraint, scaled by the g_s one
        dF_s = _fd_log(lambda v: gbar(v, g_l, L), g_s)
        if dF_s >= 0:
            dual = max(dual, 1.0)
        free = [("g_l", _fd_log(lambda v: gbar(g_s, v, L), g_l), g_l)]
        if L is not None:
            free.append(("L", _fd_log(lambda v: gbar(g_s, g_l, v), L), L))
        for name, d, x in free:
            r = _projected(d, x, bounds[name]) if name in bounds else abs(d)
            outer = max(outer, r / abs(dF_s))
    return KktReport(0.0, 0.0, transfer, slack, dual, outer, tols)


# -- closed-form band integral -----------------------------------------------------


def analytic_band_gain_integral(circuit, term, omega_B):
    """Closed-form ``int_{-wB/2}^{wB/2} G(w) dw`` for the unmatched amplifier.

    With ``x = C_gd w``, ``a = g_s (g_l + g_d)``, ``b = g_s + g_l + g_d + g_m``:
    ``G = 4 g_s g_l [1/b^2 + (g_m^2 - a^2/b^2) / (a^2 + b^2 x^2)]``, whose
    antiderivative is a linear term plus an arctangent.
    """
    if term.matching is not None:
        raise UnsupportedConfigurationError("closed form covers the unmatched circuit only")
    C = circuit.C_gd
    a = term.g_s * (term.g_l + circuit.g_d)
    b = term.g_s + term.g_l + circuit.g_d + circuit.g_m
    k = 4.0 * term.g_s * term.g_l
    lin = omega_B / b**2
    z = b * C * omega_B / (2.0 * a)
    atan_term = (circuit.g_m**2 - (a / b) ** 2) * 2.0 * math.atan(z) / (C * a * b)
    return k * (lin + atan_term)


def log_grid_scan(fun, bounds, n=64):
    """Exhaustive maximization of ``fun(*params)`` over a log-spaced grid.

    Returns ``(best_value, best_params)``.
    """
    axes = [np.geomspace(lo, hi, n) for lo, hi in bounds]
    best, arg = -math.inf, None
    for combo in np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(bounds)):
        v = fun(*combo)
        if v > best:
            best, arg = v, tuple(float(c) for c in combo)
    return best, arg
