import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ampcap.circuit import (
    CircuitParams,
    FrequencyGrid,
    GainProfile,
    Matching,
    Placement,
    Termination,
    dc_gain,
    gain_profile,
    noise_figure,
    output_noise_psd,
    power_gain,
    transfer_function,
)
from ampcap.oracle import two_port_response

cond = st.floats(1e-2, 1e2)
g_dev = st.floats(0.0, 0.5)
omega = st.floats(-100.0, 100.0)
placements = st.sampled_from([None, *Placement])


def make_term(g_s, g_l, placement=None, L=1.0):
    return Termination(g_s, g_l, None if placement is None else Matching(L, placement))


# -- closed-form values ---------------------------------------------------------


def test_transfer_dc_and_high_frequency():
    p = CircuitParams(g_d=0.0)
    t = Termination(1.0, 1.0)
    assert transfer_function(p, t, 0.0) == pytest.approx(-1.0, abs=1e-15)
    assert transfer_function(p, t, 1e9) == pytest.approx(1 / 3, rel=1e-8)


def test_power_gain_values():
    t = Termination(1.0, 1.0)
    assert power_gain(CircuitParams(g_d=0.0), t, 0.0) == pytest.approx(4.0, rel=1e-15)
    assert power_gain(CircuitParams(g_d=0.1), t, 0.0) == pytest.approx(4 / 1.21, rel=1e-15)
    assert power_gain(CircuitParams(g_d=0.0), t, 1e9) == pytest.approx(4 / 9, rel=1e-8)


@pytest.mark.parametrize("g_o,g_s,expected", [(0.0, 3.0, 1.0), (0.1, 1.0, 1.1), (0.1, 0.5, 1.2)])
def test_noise_figure_values(g_o, g_s, expected):
    p = CircuitParams(g_d=0.1, g_o=g_o)
    assert noise_figure(p, Termination(g_s, 1.0)) == pytest.approx(expected, rel=1e-15)


def test_noise_figure_rejects_nonpositive_source():
    fake = type("T", (), {"g_s": 0.0})()
    with pytest.raises(ValueError):
        noise_figure(CircuitParams(), fake)


def test_output_noise_psd_dc_value():
    p = CircuitParams(g_d=0.0, g_o=0.1)
    assert output_noise_psd(p, Termination(1.0, 1.0), 0.0) == pytest.approx(1.1, rel=1e-14)


def test_output_noise_over_transfer_is_flat():
    p = CircuitParams(g_d=0.2, g_o=0.3)
    t = Termination(0.7, 2.0)
    w = np.linspace(-20, 20, 101)
    ratio = output_noise_psd(p, t, w) / np.abs(transfer_function(p, t, w)) ** 2
    np.testing.assert_allclose(ratio, noise_figure(p, t) * p.N0, rtol=1e-13)


def test_noiseless_device_noise_is_transfer_squared():
    p = CircuitParams(g_d=0.2, g_o=0.0)
    t = Termination(0.4, 1.5)
    w = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(output_noise_psd(p, t, w), np.abs(transfer_function(p, t, w)) ** 2, rtol=1e-14)


def test_default_noise_conductance_follows_drain():
    assert CircuitParams(g_d=0.15).g_o == 0.15
    assert CircuitParams(g_d=0.15, g_o=0.0).g_o == 0.0


@pytest.mark.parametrize(
    "kwargs", [{"g_m": 0.0}, {"C_gd": -1.0}, {"N0": 0.0}, {"g_d": -0.1}, {"g_o": -1e-3}, {"g_d": math.nan}]
)
def test_circuit_params_validation(kwargs):
    with pytest.raises(ValueError):
        CircuitParams(**kwargs)


@pytest.mark.parametrize("args", [(0.0, 1.0), (1.0, -1.0), (math.inf, 1.0)])
def test_termination_validation(args):
    with pytest.raises(ValueError):
        Termination(*args)


def test_matching_validation():
    with pytest.raises(ValueError):
        Matching(0.0)
    with pytest.raises(ValueError):
        Matching(1.0, "Series")


def test_non_finite_frequency_rejected():
    with pytest.raises(ValueError):
        power_gain(CircuitParams(), Termination(1.0, 1.0), math.nan)


def test_from_physical_normalizes():
    params, units = CircuitParams.from_physical(g_m=0.02, C_gd=5e-15, g_d=0.002, N0=4e-21)
    assert params.g_d == pytest.approx(0.1)
    assert params.g_o == pytest.approx(0.1)
    assert params.is_normalized
    assert units.frequency == pytest.approx(0.02 / 5e-15)
    assert units.power == pytest.approx(4e-21 * 0.02 / 5e-15)
    assert units.inductance == pytest.approx(5e-15 / 0.02**2)


def test_dc_gain_matches_power_gain():
    p = CircuitParams(g_d=0.13)
    t = Termination(0.3, 0.7)
    assert dc_gain(p, t) == pytest.approx(power_gain(p, t, 0.0), rel=1e-14)


# -- matching element ----------------------------------------------------------------


def test_parallel_inductor_resonance_removes_feedback():
    p = CircuitParams(g_d=0.1)
    for L in (0.5, 3.0, 400.0):
        t = Termination(0.8, 0.25, Matching(L, Placement.PARALLEL_TO_CGD))
        w0 = 1 / math.sqrt(L * p.C_gd)
        expected = 4 * t.g_l * p.g_m**2 / (t.g_s * (t.g_l + p.g_d) ** 2)
        assert power_gain(p, t, w0) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("placement", list(Placement))
def test_dc_limit_with_inductor_is_finite(placement):
    p = CircuitParams(g_d=0.1)
    t = Termination(1.0, 1.0, Matching(2.0, placement))
    w = np.array([-1e-9, 0.0, 1e-9])
    g = power_gain(p, t, w)
    assert np.all(np.isfinite(g))
    # the DC entry is the continuous limit
    assert g[1] == pytest.approx(g[0], rel=1e-6, abs=1e-12)


def test_shunt_inductor_shorts_at_dc():
    p = CircuitParams(g_d=0.1)
    for pl in (Placement.SHUNT_INPUT, Placement.SHUNT_OUTPUT):
        assert power_gain(p, Termination(1.0, 1.0, Matching(2.0, pl)), 0.0) == 0.0


def test_parallel_inductor_dc_ties_gate_to_drain():
    p = CircuitParams(g_d=0.1)
    t = Termination(1.0, 1.0, Matching(2.0, Placement.PARALLEL_TO_CGD))
    H0 = t.g_s / (t.g_s + t.g_l + p.g_d + p.g_m)
    assert transfer_function(p, t, 0.0) == pytest.approx(H0, rel=1e-15)


# -- cross-validation against nodal analysis --------------------------------------


def test_nodal_cross_validation_random(rng):
    worst = 0.0
    for _ in range(20):
        p = CircuitParams(g_d=rng.uniform(0, 0.5), g_o=rng.uniform(0, 0.5))
        for pl in (None, *Placement):
            t = make_term(10 ** rng.uniform(-1.5, 1.5), 10 ** rng.uniform(-1.5, 1.5), pl, 10 ** rng.uniform(-1, 3))
            for w in (0.1, 1.0, 10.0):
                H, G = two_port_response(p, t, w)
                worst = max(worst, abs(transfer_function(p, t, w) - H) / abs(H), abs(power_gain(p, t, w) - G) / G)
    assert worst <= 1e-12


@given(g_s=cond, g_l=cond, g_d=g_dev, w=st.floats(1e-3, 100.0), pl=placements, L=st.floats(1e-2, 1e4))
def test_nodal_cross_validation_property(g_s, g_l, g_d, w, pl, L):
    p = CircuitParams(g_d=g_d)
    t = make_term(g_s, g_l, pl, L)
    H, G = two_port_response(p, t, w)
    assert abs(transfer_function(p, t, w) - H) <= 1e-11 * abs(H) + 1e-300
    assert power_gain(p, t, w) == pytest.approx(G, rel=1e-11, abs=1e-300)


# -- properties ----------------------------------------------------------------------


@given(g_s=cond, g_l=cond, g_d=g_dev, w=omega, pl=placements, L=st.floats(1e-2, 1e4))
def test_gain_even_and_nonnegative(g_s, g_l, g_d, w, pl, L):
    p = CircuitParams(g_d=g_d)
    t = make_term(g_s, g_l, pl, L)
    g = power_gain(p, t, w)
    assert g >= 0
    assert g == pytest.approx(power_gain(p, t, -w), rel=1e-12, abs=1e-300)


@given(g_s=cond, g_l=cond, g_d=g_dev, w=omega, pl=placements, L=st.floats(1e-2, 1e4))
def test_gain_transfer_consistency(g_s, g_l, g_d, w, pl, L):
    p = CircuitParams(g_d=g_d)
    t = make_term(g_s, g_l, pl, L)
    H = transfer_function(p, t, w)
    assert power_gain(p, t, w) == pytest.approx(4 * g_l / g_s * abs(H) ** 2, rel=1e-12, abs=1e-300)


@given(g_s=cond, g_l=cond, g_d=g_dev)
def test_low_pass_regime_is_decreasing(g_s, g_l, g_d):
    p = CircuitParams(g_d=g_d)
    a, b = g_s * (g_l + g_d), g_s + g_l + g_d + p.g_m
    w = np.linspace(0, 50, 400)
    g = power_gain(p, Termination(g_s, g_l), w)
    if a < b * p.g_m:
        assert np.all(np.diff(g) < 0)
    else:
        assert np.all(np.diff(g) >= 0)


@given(g_s=cond, L=st.floats(1e-2, 1e3), C=st.floats(0.1, 10), g_m=st.floats(0.1, 10), g_l=cond)
def test_noise_figure_depends_on_source_only(g_s, L, C, g_m, g_l):
    base = noise_figure(CircuitParams(g_d=0.1), Termination(g_s, 1.0))
    other = noise_figure(CircuitParams(g_d=0.1, g_m=g_m, C_gd=C), Termination(g_s, g_l, Matching(L)))
    assert other == base


def test_zero_drain_conductance_reproduces_reference_transfer():
    p = CircuitParams(g_d=0.0, g_m=1.7, C_gd=0.6)
    g_s, g_l = 0.9, 2.3
    w = np.linspace(-10, 10, 41)
    jw = 1j * w
    reference = (jw * p.C_gd * g_s - p.g_m * g_s) / (g_s * g_l + jw * p.C_gd * (g_s + g_l + p.g_m))
    np.testing.assert_allclose(transfer_function(p, Termination(g_s, g_l), w), reference, rtol=1e-14)


# -- grids and profiles ----------------------------------------------------------------


@pytest.mark.parametrize("n,grading", [(2, 0.0), (7, 0.0), (4096, 10.0), (1025, 3.0)])
def test_grid_invariants(n, grading):
    g = FrequencyGrid.symmetric(50.0, n, grading)
    assert g.weights.sum() == pytest.approx(100.0, rel=1e-12)
    np.testing.assert_array_equal(g.samples, -g.samples[::-1])
    assert np.all(np.diff(g.samples) > 0)


def test_grid_half_folds_even_integrands(default_grid):
    s, w = default_grid.half()
    f = lambda x: np.exp(-x * x)
    assert w @ f(s) == pytest.approx(default_grid.integrate(f(default_grid.samples)), rel=1e-14)


def test_grid_refined_and_band(default_grid):
    fine = default_grid.refined(4)
    assert len(fine) == 4 * (len(default_grid) - 1) + 1
    assert fine.weights.sum() == pytest.approx(100.0, rel=1e-12)
    band = default_grid.band(0.05)
    assert band.omega_max == 0.05
    with pytest.raises(ValueError):
        default_grid.band(60.0)


def test_grid_rejects_bad_samples():
    with pytest.raises(ValueError):
        FrequencyGrid.from_samples([-1.0, 0.0, 2.0])
    with pytest.raises(ValueError):
        FrequencyGrid.symmetric(-1.0)


def test_gain_profile_matches_pointwise(small_grid):
    p = CircuitParams(g_d=0.1)
    t = Termination(0.5, 0.3)
    prof = gain_profile(p, t, small_grid)
    np.testing.assert_allclose(prof.values, power_gain(p, t, small_grid.samples), rtol=1e-15)
    np.testing.assert_array_equal(prof.values, prof.values[::-1])
    assert not prof.values.flags.writeable


@pytest.mark.parametrize("placement", list(Placement))
def test_gain_profile_with_matching_vs_nodal(placement, small_grid, rng):
    p = CircuitParams(g_d=0.1)
    t = Termination(0.6, 0.4, Matching(3.0, placement))
    prof = gain_profile(p, t, small_grid)
    assert np.all(np.isfinite(prof.values))
    for k in rng.choice(np.flatnonzero(small_grid.samples != 0), 25, replace=False):
        _, G = two_port_response(p, t, small_grid.samples[k])
        assert prof.values[k] == pytest.approx(G, rel=1e-12)


def test_gain_profile_validation(small_grid):
    with pytest.raises(ValueError):
        GainProfile(small_grid, -np.ones(len(small_grid)))
    with pytest.raises(ValueError):
        GainProfile(small_grid, np.ones(3))
