"""Small-signal two-port amplifier model.

The amplifier is a transconductance stage driven by a Norton source
(``i_s`` in parallel with ``g_s``).  A gate-drain capacitance ``C_gd``
couples input and output, the drain carries the output conductance ``g_d``
in parallel with the load ``g_l``.  An optional single inductor can be
inserted as a matching element at one of three places.

All quantities are in normalized units (conductance in units of ``g_m``,
angular frequency in units of ``g_m / C_gd``, power in units of
``N0 * g_m / C_gd``).  :meth:`CircuitParams.from_physical` performs the
conversion and returns the scales used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

__all__ = [
    "Placement",
    "Matching",
    "CircuitParams",
    "Termination",
    "Units",
    "FrequencyGrid",
    "GainProfile",
    "transfer_function",
    "power_gain",
    "noise_figure",
    "output_noise_psd",
    "gain_profile",
    "dc_gain",
]


class Placement(str, Enum):
    """Where the matching inductor is connected."""

    PARALLEL_TO_CGD = "ParallelToCgd"
    SHUNT_OUTPUT = "ShuntOutput"
    SHUNT_INPUT = "ShuntInput"


def _check_finite(name, value):
    if not np.all(np.isfinite(value)):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class Units:
    """Scales mapping normalized quantities back to physical ones."""

    conductance: float = 1.0
    frequency: float = 1.0
    power: float = 1.0
    inductance: float = 1.0

    def to_dict(self):
        return {
            "conductance": self.conductance,
            "frequency": self.frequency,
            "power": self.power,
            "inductance": self.inductance,
        }


@dataclass(frozen=True)
class CircuitParams:
    """Device constants of the amplifier.

    ``g_o`` defaults to ``g_d`` so that a single knob sets both the drain
    conductance and the device noise.
    """

    g_d: float = 0.1
    g_o: Optional[float] = None
    g_m: float = 1.0
    C_gd: float = 1.0
    N0: float = 1.0

    def __post_init__(self):
        if self.g_o is None:
            object.__setattr__(self, "g_o", self.g_d)
        for name in ("g_m", "C_gd", "g_d", "g_o", "N0"):
            _check_finite(name, getattr(self, name))
        for name in ("g_m", "C_gd", "N0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("g_d", "g_o"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")

    @classmethod
    def from_physical(cls, g_m, C_gd, g_d, g_o=None, N0=1.0):
        """Normalize physical device values.

        Returns
        -------
        (CircuitParams, Units)
            Normalized parameters (``g_m = C_gd = N0 = 1``) and the scales
            that convert normalized results back to physical units.
        """
        for name, v in (("g_m", g_m), ("C_gd", C_gd), ("N0", N0)):
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")
        g_o = g_d if g_o is None else g_o
        units = Units(
            conductance=g_m,
            frequency=g_m / C_gd,
            power=N0 * g_m / C_gd,
            inductance=C_gd / g_m**2,
        )
        return cls(g_d=g_d / g_m, g_o=g_o / g_m), units

    @property
    def is_normalized(self):
        return self.g_m == 1.0 and self.C_gd == 1.0 and self.N0 == 1.0


@dataclass(frozen=True)
class Matching:
    L: float
    placement: Placement = Placement.PARALLEL_TO_CGD

    def __post_init__(self):
        _check_finite("L", self.L)
        if self.L <= 0:
            raise ValueError(f"L must be positive, got {self.L}")
        object.__setattr__(self, "placement", Placement(self.placement))


@dataclass(frozen=True)
class Termination:
    """Source/load conductances and an optional matching inductor."""

    g_s: float
    g_l: float
    matching: Optional[Matching] = None

    def __post_init__(self):
        _check_finite("g_s", self.g_s)
        _check_finite("g_l", self.g_l)
        if self.g_s <= 0:
            raise ValueError(f"g_s must be positive, got {self.g_s}")
        if self.g_l <= 0:
            raise ValueError(f"g_l must be positive, got {self.g_l}")

    @property
    def L(self):
        return None if self.matching is None else self.matching.L


def _readonly(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Symmetric angular-frequency grid with trapezoidal weights.

    Use :meth:`symmetric` to build one.  ``grading > 0`` clusters samples
    around DC with a sinh map, which keeps narrow low-frequency gain peaks
    resolved without inflating the sample count.
    """

    omega_max: float
    samples: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    grading: float = 0.0

    @classmethod
    def symmetric(cls, omega_max=50.0, n=4096, grading=10.0):
        if not omega_max > 0:
            raise ValueError(f"omega_max must be positive, got {omega_max}")
        if n < 2:
            raise ValueError(f"need at least 2 samples, got {n}")
        if grading < 0:
            raise ValueError(f"grading must be nonnegative, got {grading}")
        t = np.linspace(-1.0, 1.0, n)
        # exact symmetry: mirror the nonnegative half
        t = 0.5 * (t - t[::-1])
        if grading > 0:
            w = omega_max * np.sinh(grading * t) / math.sinh(grading)
        else:
            w = omega_max * t
        w[0], w[-1] = -omega_max, omega_max
        return cls.from_samples(w, grading=grading)

    @classmethod
    def from_samples(cls, samples, grading=0.0):
        s = np.asarray(samples, dtype=float)
        if s.ndim != 1 or s.size < 2 or np.any(np.diff(s) <= 0):
            raise ValueError("samples must be a strictly increasing 1-D array")
        if not np.allclose(s, -s[::-1], rtol=0, atol=1e-14 * abs(s[-1])):
            raise ValueError("samples must be symmetric about 0")
        d = np.diff(s)
        wts = np.zeros_like(s)
        wts[:-1] += 0.5 * d
        wts[1:] += 0.5 * d
        return cls(float(s[-1]), _readonly(s), _readonly(wts), float(grading))

    def __len__(self):
        return self.samples.size

    def integrate(self, values):
        """Trapezoidal quadrature of ``values`` sampled on the grid."""
        v = np.asarray(values)
        if v.shape[-1] != self.samples.size:
            raise ValueError(
                f"values have {v.shape[-1]} samples, grid has {self.samples.size}"
            )
        return v @ self.weights

    def half(self):
        """Nonnegative samples with weights folded for even integrands."""
        n = self.samples.size
        k = n // 2
        w = self.weights[k:].copy()
        if n % 2 == 0:
            w *= 2.0
        else:
            w[1:] *= 2.0
        return self.samples[k:], w

    def refined(self, factor=4):
        """Grid with every interval split into ``factor`` equal pieces."""
        s = self.samples
        frac = np.arange(factor) / factor
        fine = (s[:-1, None] + np.diff(s)[:, None] * frac).ravel()
        fine = np.append(fine, s[-1])
        fine = 0.5 * (fine - fine[::-1])
        return FrequencyGrid.from_samples(fine, grading=self.grading)

    def band(self, half_width):
        """Sub-grid of samples inside ``[-half_width, half_width]`` plus endpoints."""
        if half_width > self.omega_max * (1 + 1e-12):
            raise ValueError(
                f"band half-width {half_width} exceeds grid bound {self.omega_max}"
            )
        inner = self.samples[np.abs(self.samples) < half_width * (1 - 1e-12)]
        return FrequencyGrid.from_samples(
            np.concatenate(([-half_width], inner, [half_width])), grading=self.grading
        )


@dataclass(frozen=True, eq=False)
class GainProfile:
    grid: FrequencyGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.samples.shape:
            raise ValueError("gain values must match the grid")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("gain values must be finite and nonnegative")
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def constant(cls, grid, g):
        return cls(grid, np.full(grid.samples.shape, float(g)))

    @property
    def max(self):
        return float(self.values.max())


def _omega(omega):
    w = np.asarray(omega, dtype=float)
    _check_finite("omega", w)
    return w


def _branches(params, term, w):
    """Feedback, input-node and output-node admittances at ``w``.

    Inductive branches are evaluated with ``w == 0`` replaced by 1 so the
    caller can patch the DC entries from the analytic limits.
    """
    jw = 1j * w
    yf = jw * params.C_gd
    y1 = term.g_s + 0j * w
    y2 = term.g_l + params.g_d + 0j * w
    m = term.matching
    if m is not None:
        ws = np.where(w == 0, 1.0, w)
        yL = 1.0 / (1j * ws * m.L)
        if m.placement is Placement.PARALLEL_TO_CGD:
            yf = yf + yL
        elif m.placement is Placement.SHUNT_OUTPUT:
            y2 = y2 + yL
        else:
            y1 = y1 + yL
    return yf, y1, y2


def transfer_function(params, term, omega):
    """``H(jw) = u_L / (i_s / g_s)`` of the amplifier.

    With no matching element this is
    ``(jw C_gd g_s - g_m g_s) / (g_s (g_l + g_d) + jw C_gd (g_s + g_l + g_d + g_m))``.
    At DC a shunt inductor shorts its node (``H = 0``); an inductor across
    ``C_gd`` ties gate and drain together.
    """
    w = _omega(omega)
    yf, y1, y2 = _branches(params, term, w)
    H = term.g_s * (yf - params.g_m) / (y1 * y2 + yf * (y1 + y2 + params.g_m))
    m = term.matching
    if m is not None and np.any(w == 0):
        H = np.array(H, dtype=complex)
        dc = w == 0
        if m.placement is Placement.PARALLEL_TO_CGD:
            H[dc] = term.g_s / (term.g_s + term.g_l + params.g_d + params.g_m)
        else:
            H[dc] = 0.0
    return H if np.ndim(H) else complex(H)


def power_gain(params, term, omega):
    """Delivered load power over available source power, ``4 (g_l/g_s) |H|^2``."""
    w = _omega(omega)
    if term.matching is not None:
        H = transfer_function(params, term, w)
        G = 4.0 * term.g_l / term.g_s * np.abs(H) ** 2
    else:
        g_s, g_l = term.g_s, term.g_l
        a = g_s * (g_l + params.g_d)
        b = g_s + g_l + params.g_d + params.g_m
        x2 = (w * params.C_gd) ** 2
        G = 4.0 * g_s * g_l * (params.g_m**2 + x2) / (a * a + x2 * b * b)
    return G if np.ndim(G) else float(G)


def dc_gain(params, term):
    """Unmatched power gain at DC, ``4 g_l g_m^2 / (g_s (g_l + g_d)^2)``."""
    return 4.0 * term.g_l * params.g_m**2 / (term.g_s * (term.g_l + params.g_d) ** 2)


def noise_figure(params, term):
    """Noise factor ``1 + g_o / g_s``; flat in frequency for this model."""
    if not term.g_s > 0:
        raise ValueError(f"g_s must be positive, got {term.g_s}")
    return 1.0 + params.g_o / term.g_s


def output_noise_psd(params, term, omega):
    """Output noise PSD ``N_F N0 |H|^2``."""
    H = transfer_function(params, term, omega)
    return noise_figure(params, term) * params.N0 * np.abs(H) ** 2


def gain_profile(params, term, grid):
    """Sample :func:`power_gain` on ``grid``, symmetrized to exact evenness."""
    g = power_gain(params, term, grid.samples)
    g = 0.5 * (g + g[::-1])
    return GainProfile(grid, g)
