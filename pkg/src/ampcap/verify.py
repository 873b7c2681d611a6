"""Oracle cross-checks behind the ``verify`` subcommand.

Every check draws its cases from a fixed seed, so reports are reproducible.
Circuit functions are looked up on the module at call time, which lets tests
inject faults with ``monkeypatch``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import circuit as C
from . import oracle as O
from . import pareto as Pa
from . import spectrum as S

__all__ = ["CheckResult", "run_checks", "format_report", "SEED"]

SEED = 20240611


@dataclass(frozen=True)
class CheckResult:
    name: str
    worst: float
    tol: float
    error: str = ""

    @property
    def passed(self):
        return bool(self.worst <= self.tol)


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def _random_term(rng, placement=None):
    m = None if placement is None else C.Matching(10 ** rng.uniform(-1, 2), placement)
    return C.Termination(10 ** rng.uniform(-1, 1), 10 ** rng.uniform(-1, 1), m)


def check_nodal(n, rng):
    worst = 0.0
    for _ in range(n):
        params = C.CircuitParams(g_d=rng.uniform(0, 0.3), g_o=rng.uniform(0, 0.3))
        for pl in (None, *C.Placement):
            term = _random_term(rng, pl)
            for w in (0.1, 1.0, 10.0):
                H, G = O.two_port_response(params, term, w)
                worst = max(
                    worst,
                    _rel(C.transfer_function(params, term, w), H),
                    _rel(C.power_gain(params, term, w), G),
                )
        # resonance identity for the inductor across C_gd
        term = _random_term(rng, C.Placement.PARALLEL_TO_CGD)
        w0 = 1.0 / math.sqrt(term.L * params.C_gd)
        expect = 4 * term.g_l * params.g_m**2 / (term.g_s * (term.g_l + params.g_d) ** 2)
        worst = max(worst, _rel(C.power_gain(params, term, w0), expect))
    return CheckResult("nodal analysis vs closed form", worst, 1e-12)


def random_active_instances(n, rng, grid):
    """Low-pass gain profiles with a binding transfer constraint."""
    out = []
    while len(out) < n:
        params = C.CircuitParams(g_d=rng.uniform(0.02, 0.3))
        term = C.Termination(10 ** rng.uniform(-1, 1), 10 ** rng.uniform(-1, 1))
        gain = C.gain_profile(params, term, grid)
        nf = C.noise_figure(params, term) * params.N0
        P = 10 ** rng.uniform(-2, 0)
        free = S.solve_constrained(S.BudgetSpec(P, 0.0, nf), gain)
        lo = free.p_out / P
        if lo >= 0.9 * gain.max:
            continue
        eta = lo + rng.uniform(0.05, 0.95) * (0.99 * gain.max - lo)
        out.append((gain, S.BudgetSpec(P, eta, nf)))
    return out


def check_duals(instances):
    cap = pw = direct = 0.0
    for gain, budget in instances:
        sol = S.solve_constrained(budget, gain)
        bf = O.brute_force_duals(gain, budget)
        dm = O.direct_psd_maximizer(gain, budget)
        cap = max(cap, _rel(sol.capacity, bf.capacity))
        pw = max(pw, _rel(sol.p_out, bf.p_out))
        direct = max(direct, _rel(dm.objective, sol.capacity))
    return [
        CheckResult("dual solver vs brute-force duals (capacity)", cap, 1e-4),
        CheckResult("dual solver vs brute-force duals (p_out)", pw, 1e-4),
        CheckResult("dual solver vs direct maximizer", direct, 1e-5),
    ]


def check_waterfilling(n, rng, grid):
    worst = 0.0
    for _ in range(n):
        params = C.CircuitParams(g_d=rng.uniform(0.02, 0.3))
        term = C.Termination(10 ** rng.uniform(-1, 1), 10 ** rng.uniform(-1, 1))
        nf = C.noise_figure(params, term) * params.N0
        P = 10 ** rng.uniform(-2, 1)
        sol = S.solve_constrained(S.BudgetSpec(P, 0.0, nf), C.gain_profile(params, term, grid))
        ref, _ = S.classic_waterfilling(np.full(len(grid), nf), grid.weights, P)
        worst = max(worst, float(np.abs(sol.psd - ref).max()) / max(float(ref.max()), 1e-300))
    return CheckResult("eta=0 vs classic waterfilling", worst, 1e-10)


def check_band(n, rng, samples):
    gint = cap = 0.0
    for _ in range(n):
        params = C.CircuitParams(g_d=rng.uniform(0, 0.3), g_o=rng.uniform(0, 0.3))
        term = C.Termination(10 ** rng.uniform(-1, 1), 10 ** rng.uniform(-1, 1))
        omega_B = rng.uniform(0.01, 0.2)
        band = C.FrequencyGrid.symmetric(omega_B / 2, samples, grading=0.0)
        quad = Pa.band_average_gain(params, term, omega_B, band) * omega_B
        gint = max(gint, _rel(quad, O.analytic_band_gain_integral(params, term, omega_B)))
        P = 10 ** rng.uniform(-2, 0)
        nf = C.noise_figure(params, term) * params.N0
        flat = band.integrate(np.log2(1 + np.full(samples, P / omega_B) / nf))
        cap = max(cap, _rel(Pa.capacity_uniform(params, term, P, omega_B), flat))
    return [
        CheckResult("band gain integral vs closed form", gint, 1e-9),
        CheckResult("flat-PSD capacity vs quadrature", cap, 1e-10),
    ]


def check_kkt(etas_frac, circuit, P, grid, box, multistart):
    emax = Pa.eta_max("A", circuit, box, grid, multistart=multistart)
    worst = 0.0
    for f in etas_frac:
        eta = f * emax
        pt = Pa.optimize_terminations_A(eta, circuit, P, grid, box, multistart)
        if pt.solution is None:
            continue
        nf = C.noise_figure(circuit, C.Termination(pt.g_s, pt.g_l)) * circuit.N0
        rep = O.kkt_residuals(pt.solution, pt, circuit, S.BudgetSpec(P, eta, nf), box=box)
        worst = max(worst, rep.worst)
    return CheckResult("KKT residuals of optimized points", worst, 1e-6)


def _guarded(name, tol, fn, *args):
    """Run one check; an exception becomes a failed result."""
    try:
        res = fn(*args)
    except Exception as exc:  # noqa: BLE001
        return [CheckResult(name, math.inf, tol, f"{type(exc).__name__}: {exc}")]
    return res if isinstance(res, list) else [res]


def run_checks(cfg, quick=False):
    """Run the oracle suite for ``cfg`` (a :class:`~ampcap.config.RunConfig`)."""
    rng = np.random.default_rng(SEED)
    small = C.FrequencyGrid.symmetric(50.0, 256 if quick else 1024, 10.0)
    results = _guarded("nodal analysis vs closed form", 1e-12, check_nodal, 3 if quick else 20, rng)
    results += _guarded(
        "dual solver vs oracles", 1e-5,
        lambda: check_duals(random_active_instances(2 if quick else 10, rng, small)),
    )
    results += _guarded("eta=0 vs classic waterfilling", 1e-10, check_waterfilling, 3 if quick else 10, rng, small)
    # trapezoid error reaches ~3e-9 at 8192 samples; 4x finer keeps it below 1e-9
    results += _guarded("band gain integral vs closed form", 1e-9, check_band, 5 if quick else 100, rng, 32768)
    circuit = cfg.circuits()[0]
    if quick:
        grid = C.FrequencyGrid.symmetric(50.0, 512, 10.0)
        args = ((0.01,), circuit, cfg.P_norm, grid, cfg.box(), 2)
    else:
        args = ((1e-3, 0.1, 0.5), circuit, cfg.P_norm, cfg.frequency_grid(), cfg.box(), cfg.multistart)
    results += _guarded("KKT residuals of optimized points", 1e-6, check_kkt, *args)
    return results


def format_report(results):
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  {'worst':>10}  {'tol':>8}  result"]
    for r in results:
        line = f"{r.name:<{width}}  {r.worst:>10.3e}  {r.tol:>8.0e}  {'PASS' if r.passed else 'FAIL'}"
        lines.append(line + (f"  ({r.error})" if r.error else ""))
    return "\n".join(lines)
