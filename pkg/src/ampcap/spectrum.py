"""Waterfilling under a gain-weighted power-transfer constraint.

For a fixed gain profile ``G`` and flat noise floor ``nf_n0`` we solve::

    max  int log2(1 + phi/nf_n0) dw
    s.t. int phi dw = P,  int phi G dw >= eta P,  phi >= 0

Stationarity gives ``phi = (1/(ln2 (lam - mu G)) - nf_n0)^+``.  The power
multiplier ``lam`` is found for each ``mu`` from the power budget, and ``mu``
from the transfer constraint when it binds.  With ``mu = 0`` the solution is
classic waterfilling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numba import njit

from .circuit import FrequencyGrid, GainProfile

__all__ = [
    "Status",
    "BudgetSpec",
    "SpectralSolution",
    "DualDomainError",
    "psd_from_duals",
    "lambda_for_power",
    "solve_constrained",
    "capacity_of",
    "transferred_power",
    "classic_waterfilling",
    "INFEASIBLE_MARGIN",
]

LN2 = math.log(2.0)

# eta above (1 - margin) * max G counts as infeasible
INFEASIBLE_MARGIN = 1e-6
POWER_RTOL = 1e-12
TRANSFER_RTOL = 1e-10
MAX_ITER = 200


class Status(str, Enum):
    INACTIVE = "ConstraintInactive"
    ACTIVE = "ConstraintActive"
    INFEASIBLE = "Infeasible"


class DualDomainError(ValueError):
    """Raised when ``lam <= mu * max(G)``: the stationary PSD has infinite power."""


@dataclass(frozen=True)
class BudgetSpec:
    P: float
    eta: float
    nf_n0: float

    def __post_init__(self):
        if not (np.isfinite(self.P) and self.P > 0):
            raise ValueError(f"P must be positive, got {self.P}")
        if not (np.isfinite(self.nf_n0) and self.nf_n0 > 0):
            raise ValueError(f"nf_n0 must be positive, got {self.nf_n0}")
        if not (np.isfinite(self.eta) and self.eta >= 0):
            raise ValueError(f"eta must be nonnegative, got {self.eta}")


@dataclass(frozen=True, eq=False)
class SpectralSolution:
    """Optimal PSD on a grid together with its multipliers.

    For ``Infeasible`` solutions the PSD is zero and ``lam``/``mu`` are NaN.
    ``boundary_warning`` is set when the PSD is still positive at the outer
    grid sample, i.e. the support is truncated by the grid.
    """

    grid: FrequencyGrid
    psd: np.ndarray = field(repr=False)
    lam: float
    mu: float
    capacity: float
    p_out: float
    status: Status
    support_measure: float
    budget: BudgetSpec
    boundary_warning: bool = False

    @property
    def peak(self):
        return float(self.psd.max())


def _check_gain(gain):
    if not isinstance(gain, GainProfile):
        raise TypeError("gain must be a GainProfile")


def psd_from_duals(lam, mu, gain, nf_n0):
    """PSD ``max(0, 1/(ln2 (lam - mu G)) - nf_n0)`` on the gain's grid."""
    _check_gain(gain)
    denom = lam - mu * gain.values
    if np.any(denom <= 0):
        raise DualDomainError(
            f"lam={lam!r} must exceed mu*max(G)={mu * gain.max!r}"
        )
    return np.maximum(0.0, 1.0 / (LN2 * denom) - nf_n0)


# -- half-grid kernels -------------------------------------------------------
#
# The gain is even, so everything is computed on w >= 0 with folded weights.
# lam is written as mu*Gmax + tau with tau > 0, which keeps lam - mu*G free of
# cancellation when mu is large.


@njit(cache=True)
def _solve_tau(mu, P, d, w, nf, tau0=-1.0, rtol=POWER_RTOL):
    """tau such that the total power equals P.

    Power is convex and strictly decreasing in tau: a Newton step from the
    left never overshoots, and one from the right lands on the left.  The
    step is kept inside a bracket and falls back to bisection on round-off.
    A negative ``tau0`` means no warm start.
    """
    n = d.size
    W = 0.0
    for i in range(n):
        W += w[i]
    tau_hi = 1.0 / (LN2 * (nf + P / W))
    if mu == 0.0:
        return tau_hi
    # samples with d >= 1/(ln2 nf mu) stay dry for every tau > 0
    cut = 1.0 / (LN2 * nf * mu)
    w_live = 0.0
    w_top = 0.0
    md_max = 0.0
    for i in range(n):
        if d[i] < cut:
            w_live += w[i]
            md_max = max(md_max, mu * d[i])
            if d[i] == 0.0:
                w_top += w[i]
    # every live sample at t <= 1/(ln2 (nf + P/W_live)) carries >= P/W_live
    tau_live = 1.0 / (LN2 * (nf + P / w_live))
    lo = max(tau_live - md_max, 1.0 / (LN2 * (nf + P / w_top)))
    hi = tau_hi
    tau = tau0 if lo < tau0 < hi else lo
    for _ in range(MAX_ITER):
        r = -P
        slope = 0.0
        for i in range(n):
            if d[i] < cut:
                k = 1.0 / (tau + mu * d[i])
                phi = k / LN2 - nf
                if phi > 0.0:
                    r += w[i] * phi
                    slope += w[i] * k * k / LN2
        if abs(r) <= rtol * P:
            return tau
        if r > 0:
            lo = tau
        else:
            hi = tau
        nxt = tau + r / slope if slope > 0 else 0.5 * (lo + hi)
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if nxt == tau or hi - lo <= 4 * np.spacing(hi):
            return tau
        tau = nxt
    return tau


@njit(cache=True)
def _path_kernel(mu, P, d, G, w, nf, tau0):
    tau = _solve_tau(mu, P, d, w, nf, tau0)
    n = d.size
    phi = np.zeros(n)
    sc = scg = p_out = 0.0
    for i in range(n):
        inv = 1.0 / (LN2 * (tau + mu * d[i]))
        p = inv - nf
        if p > 0.0:
            phi[i] = p
            p_out += w[i] * G[i] * p
            c = w[i] * LN2 * inv * inv
            sc += c
            scg += c * G[i]
    # c-weighted variance of G, computed around the mean for accuracy
    mean = scg / sc
    slope = 0.0
    for i in range(n):
        if phi[i] > 0.0:
            inv = 1.0 / (LN2 * (tau + mu * d[i]))
            dg = G[i] - mean
            slope += w[i] * LN2 * inv * inv * dg * dg
    return tau, phi, p_out, slope


def _path_point(mu, P, d, G, w, nf, tau0=None):
    """PSD on the lam(mu) path, its transfer and d(transfer)/d(mu).

    Along the path ``dphi/dmu = c (G - lam')`` on the support with
    ``c = ln2 / (ln2 t)^2`` and ``lam' = sum(wcG)/sum(wc)``, so the slope is
    the c-weighted spread of G, never negative.
    """
    return _path_kernel(float(mu), float(P), d, G, w, float(nf), -1.0 if tau0 is None else float(tau0))


def _half_state(G_half, w_half, P, nf, mu):
    Gmax = G_half.max()
    d = Gmax - G_half
    tau = _solve_tau(float(mu), float(P), d, w_half, float(nf))
    phi = np.maximum(1.0 / (LN2 * (tau + mu * d)) - nf, 0.0)
    return mu * Gmax + tau, phi


def _solve_half(G_half, w_half, P, eta, nf):
    """Core solve on folded arrays.

    Returns ``(lam, mu, phi_half, status)``.  The transfer constraint is
    matched by a Newton iteration in mu kept inside a bracket
    ``excess(lo) < 0 <= excess(hi)``; steps leaving the bracket are replaced
    by (geometric) bisection.
    """
    Gmax = float(G_half.max())
    W = float(w_half.sum())
    if eta >= (1.0 - INFEASIBLE_MARGIN) * Gmax:
        return math.nan, math.nan, np.zeros_like(G_half), Status.INFEASIBLE
    # mu = 0: flat floor, flat water level
    lam0 = 1.0 / (LN2 * (nf + P / W))
    phi0 = np.full_like(G_half, P / W)
    target = eta * P
    if float(np.sum(w_half * G_half * phi0)) >= target:
        return lam0, 0.0, phi0, Status.INACTIVE

    d = Gmax - G_half
    lo, hi = 0.0, math.inf
    mu, tau = 0.0, None
    tau, phi, p_out, slope = _path_point(0.0, P, d, G_half, w_half, nf)
    best = None
    for _ in range(4 * MAX_ITER):
        r = p_out - target
        if r >= 0:
            hi = mu
            best = (mu, tau, phi)
            if r <= TRANSFER_RTOL * target:
                break
        else:
            lo = mu
        if hi - lo <= 4 * np.spacing(hi):
            break
        nxt = mu - r / slope if slope > 0 else math.inf
        if not lo < nxt < hi:
            if math.isinf(hi):
                nxt = 2.0 * lo if lo > 0 else lam0 / (2.0 * Gmax)
            elif lo > 0 and hi > 4 * lo:
                nxt = math.sqrt(lo * hi)
            else:
                nxt = 0.5 * (lo + hi)
        mu = nxt
        tau, phi, p_out, slope = _path_point(mu, P, d, G_half, w_half, nf, tau)
    if best is None:  # pragma: no cover - Dirac limit round-off
        return math.nan, math.nan, np.zeros_like(G_half), Status.INFEASIBLE
    mu, tau, phi = best
    return mu * Gmax + tau, mu, phi, Status.ACTIVE


def _unfold(half, n):
    if n % 2 == 0:
        return np.concatenate((half[::-1], half))
    return np.concatenate((half[:0:-1], half))


def _fold_gain(gain):
    grid = gain.grid
    s, w = grid.half()
    G = gain.values[grid.samples.size // 2:]
    return G, w


def lambda_for_power(mu, P, gain, nf_n0):
    """Power multiplier for a given ``mu`` such that the PSD integrates to ``P``."""
    _check_gain(gain)
    if not P > 0:
        raise ValueError(f"P must be positive, got {P}")
    if mu < 0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    G, w = _fold_gain(gain)
    return _half_state(G, w, P, nf_n0, float(mu))[0]


def _support_measure(psd, grid):
    return float(np.sum(grid.weights[psd > 0]))


def solve_constrained(budget, gain):
    """Optimal PSD, multipliers and capacity for one gain profile."""
    _check_gain(gain)
    grid = gain.grid
    G, w = _fold_gain(gain)
    lam, mu, phi_half, status = _solve_half(G, w, budget.P, budget.eta, budget.nf_n0)
    psd = _unfold(phi_half, grid.samples.size)
    psd.flags.writeable = False
    if status is Status.INFEASIBLE:
        cap = p_out = 0.0
    else:
        cap = float(np.sum(w * np.log2(1.0 + phi_half / budget.nf_n0)))
        p_out = float(np.sum(w * G * phi_half))
    return SpectralSolution(
        grid=grid,
        psd=psd,
        lam=lam,
        mu=mu,
        capacity=cap,
        p_out=p_out,
        status=status,
        support_measure=_support_measure(psd, grid),
        budget=budget,
        boundary_warning=bool(psd[-1] > 0),
    )


def capacity_of(psd, nf_n0, grid):
    """Quadrature of ``log2(1 + psd/nf_n0)`` over the grid."""
    psd = np.asarray(psd, dtype=float)
    if np.any(psd < 0):
        raise ValueError("psd must be nonnegative")
    return float(grid.integrate(np.log2(1.0 + psd / nf_n0)))


def transferred_power(psd, gain, grid):
    """Quadrature of ``psd * G`` over the grid."""
    psd = np.asarray(psd, dtype=float)
    if gain.grid is not grid and (
        gain.grid.samples.shape != grid.samples.shape
        or not np.array_equal(gain.grid.samples, grid.samples)
    ):
        raise ValueError("gain profile and psd live on different grids")
    if psd.shape != grid.samples.shape:
        raise ValueError(f"psd has shape {psd.shape}, grid has {grid.samples.shape}")
    return float(grid.integrate(psd * gain.values))


def classic_waterfilling(floor, weights, P):
    """Weighted waterfilling over parallel channels.

    Parameters
    ----------
    floor : array_like
        Effective noise level of each channel (noise PSD over ``|H|^2``).
    weights : array_like
        Quadrature weight (bandwidth) of each channel.
    P : float
        Total power.

    Returns
    -------
    (psd, level) : (np.ndarray, float)
        ``psd = max(0, level - floor)`` with ``sum(weights * psd) = P``.
    """
    floor = np.asarray(floor, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(floor, kind="stable")
    f = floor[order]
    w = weights[order]
    cw = np.cumsum(w)
    cwf = np.cumsum(w * f)
    levels = (P + cwf) / cw
    # first k whose level does not reach the next floor
    nxt = np.append(f[1:], np.inf)
    k = int(np.argmax(levels <= nxt))
    level = float(levels[k])
    return np.maximum(level - floor, 0.0), level
