import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from descentgen import atmosphere as atm
from descentgen.errors import DomainError, NonDescendingProfileError, SingularityError
from descentgen.physics import (
    AircraftConfig,
    DescentProfile,
    EsfRegime,
    energy_share_factor,
    exact_esf,
    fl_to_m,
    idle_thrust,
    infer_drag,
    integrate_descent,
    m_to_fl,
    nominal_profile,
    nominal_trajectory,
    rocd,
    rocd_from_state,
    select_regime,
)

from conftest import load_cfg

C = atm.ISA


# ---------------------------------------------------------------- ESF oracle

def _symbolic_esf(regime, mach, h0):
    """Share factor 1/(1 + V/g0 dV/dh) differentiated symbolically along the regime's speed law.

    Uses the textbook ideal-gas atmosphere and the compressible CAS law written out
    independently of the package.
    """
    h, vc = sp.symbols("h vc", positive=True)
    T0, p0, R, g0, k = (sp.Float(x, 30) for x in (C.T0, C.p0, C.R, C.g0, C.kappa))
    L = sp.Float(C.lapse_rate, 30)
    below = regime in (EsfRegime.ConstCasBelowTrop, EsfRegime.ConstMachBelowTrop)
    if below:
        T = T0 + L * h
        p = p0 * (T / T0) ** (-g0 / (L * R))
    else:
        Tt = T0 + L * C.h_trop
        T = Tt + 0 * h
        p = p0 * (Tt / T0) ** (-g0 / (L * R)) * sp.exp(-g0 / (R * Tt) * (h - C.h_trop))
    rho, rho0, mu = p / (R * T), p0 / (R * T0), (k - 1) / k
    a = sp.sqrt(k * R * T)
    if regime in (EsfRegime.ConstCasBelowTrop, EsfRegime.ConstCasAboveTrop):
        inner = (1 + p0 / p * ((1 + mu / 2 * rho0 / p0 * vc**2) ** (1 / mu) - 1)) ** mu - 1
        V = sp.sqrt(2 / mu * p / rho * inner)
        cas = sp.nsolve((V / a).subs(h, h0) - mach, vc, 150, prec=30)
        V = V.subs(vc, cas)
    else:
        V = mach * a
    f = 1 / (1 + V / g0 * sp.diff(V, h))
    return float(f.subs(h, h0).evalf(30))


@pytest.mark.parametrize("regime,h0", [
    (EsfRegime.ConstCasBelowTrop, 6000.0),
    (EsfRegime.ConstCasAboveTrop, 12500.0),
    (EsfRegime.ConstMachBelowTrop, 9000.0),
    (EsfRegime.ConstMachAboveTrop, 12500.0),
])
@pytest.mark.parametrize("mach", [0.3, 0.6, 0.8])
def test_esf_matches_symbolic_oracle(regime, h0, mach):
    assert energy_share_factor(mach, regime) == pytest.approx(_symbolic_esf(regime, mach, h0), rel=1e-10)


def test_esf_trivial_limits():
    assert energy_share_factor(0.42, EsfRegime.ConstMachAboveTrop) == 1.0
    assert energy_share_factor(1e-6, EsfRegime.ConstCasBelowTrop) == pytest.approx(1.0, abs=1e-10)
    M = np.linspace(0.01, 0.99, 300)
    for r in EsfRegime:
        f = energy_share_factor(M, np.full(M.shape, int(r)))
        assert np.all((f > 0) & (f <= 1.35))
        assert np.max(np.abs(np.diff(f))) < 0.01  # continuous on a fine sweep


@pytest.mark.parametrize("M", [0.0, 1.0, -0.1, float("nan")])
def test_esf_domain(M):
    with pytest.raises(DomainError):
        energy_share_factor(M, EsfRegime.ConstCasBelowTrop)


def test_regime_selection(cfg):
    ht = cfg.transition_altitude
    assert 8000 < ht < C.h_trop
    assert select_regime(ht - 1, ht) == EsfRegime.ConstCasBelowTrop
    assert select_regime(ht + 1, ht) == EsfRegime.ConstMachBelowTrop
    assert select_regime(11500.0, ht) == EsfRegime.ConstMachAboveTrop
    assert select_regime(11500.0, 12000.0) == EsfRegime.ConstCasAboveTrop
    r = select_regime(np.array([1000.0, 10500.0, 11500.0]), ht)
    assert list(r) == [0, 2, 3]


def test_exact_esf():
    assert exact_esf(200.0, 0.0) == 1.0
    assert exact_esf(200.0, -0.01) == pytest.approx(1.0 / (1.0 - 200.0 * 0.01 / C.g0))
    with pytest.raises(SingularityError):
        exact_esf(200.0, -1.0)


# --------------------------------------------------------------- idle thrust

def test_idle_thrust_cases(cfg):
    flat = load_cfg(idle_thrust_coeffs=[7000.0, 1e300, 0.0])
    np.testing.assert_allclose(idle_thrust(np.linspace(0, 12000, 7), flat), 7000.0)
    assert idle_thrust(0.0, cfg) == 6000.0
    h = np.array([0.0, 3000.0, 6000.0, 9000.0, 12000.0])
    # 6000 * (1 - h/40000)
    np.testing.assert_allclose(idle_thrust(h, cfg), [6000.0, 5550.0, 5100.0, 4650.0, 4200.0])
    quad = load_cfg(idle_thrust_coeffs=[5000.0, 10000.0, 1e-8])
    assert idle_thrust(5000.0, quad) == pytest.approx(5000.0 * (1 - 0.5 + 0.25))


# ---------------------------------------------------------------------- ROCD

def test_rocd_hand_example():
    val = rocd_from_state(0.0, 40000.0, 200.0, 65000.0, 0.7)
    assert val == pytest.approx(-40000 * 200 / (65000 * 9.80665) * 0.7, rel=1e-15)
    assert val == pytest.approx(-8.785, abs=5e-4)


def test_rocd_hand_example_through_rocd():
    # zero thrust, sea level: V_TAS = CAS; f from the regime
    cfg = load_cfg(idle_thrust_coeffs=[0.0, 1.0, 0.0])
    M = 200.0 / atm.speed_of_sound(0.0)
    f = energy_share_factor(M, EsfRegime.ConstCasBelowTrop)
    assert rocd(0.0, 40000.0, 200.0, cfg) == pytest.approx(-40000 * 200 / (65000 * C.g0) * f, rel=1e-12)
    assert infer_drag(0.0, -40000 * 200 / (65000 * C.g0) * f, 200.0, M, cfg) == pytest.approx(40000.0, rel=1e-12)


def test_rocd_zero_excess_thrust_and_mass_scaling(cfg):
    h = 3000.0
    t = idle_thrust(h, cfg)
    assert rocd(h, t, 140.0, cfg) == pytest.approx(0.0, abs=1e-12)
    heavy = load_cfg(mass=2 * cfg.mass)
    assert rocd(h, 40000.0, 140.0, heavy) == pytest.approx(0.5 * rocd(h, 40000.0, 140.0, cfg), rel=1e-14)


def test_rocd_domain(cfg):
    for args in [(1000.0, float("nan"), 140.0), (1000.0, -1.0, 140.0), (1000.0, 1000.0, 0.0)]:
        with pytest.raises(DomainError):
            rocd(*args, cfg)


def test_infer_drag_trivial(cfg):
    zero = load_cfg(idle_thrust_coeffs=[0.0, 1.0, 0.0])
    assert infer_drag(5000.0, 0.0, 140.0, 0.6, zero) == 0.0
    with pytest.raises(DomainError):
        infer_drag(5000.0, float("inf"), 140.0, 0.6, cfg)


@settings(max_examples=300, deadline=None)
@given(st.floats(10000.0, 90000.0), st.floats(80.0, 200.0), st.floats(0.0, 12500.0), st.floats(40000.0, 80000.0))
def test_infer_drag_inverts_rocd(D, v_cas, h, m):
    cfg = load_cfg(mass=m)
    v_tas = atm.cas_to_tas(v_cas, h)
    M = atm.mach_number(v_tas, h)
    if not 0 < M < 1:
        return
    r = rocd(h, D, v_cas, cfg)
    assert infer_drag(h, r, v_cas, M, cfg) == pytest.approx(D, rel=1e-9)


# ---------------------------------------------------------------- integrator

def _constant_rate_profile(cfg, levels, rate=-10.0, cas=140.0):
    v = np.full(len(levels), cas)
    M = atm.mach_number(atm.cas_to_tas(v, levels), levels)
    return DescentProfile(levels, infer_drag(levels, rate, v, M, cfg), v)


def test_constant_rate_quadrature(cfg):
    levels = 5000.0 + 100.0 * np.arange(11)
    prof = _constant_rate_profile(cfg, levels)
    tr = integrate_descent(prof, levels[-1], cfg)
    assert tr.time_to_bottom == pytest.approx(100.0, abs=1e-9)
    np.testing.assert_allclose(tr.rocd, -10.0, rtol=1e-12)
    np.testing.assert_allclose(tr.t, 10.0 * np.arange(11), atol=1e-9)
    np.testing.assert_array_equal(tr.h, levels[::-1])


def test_start_at_bottom_is_empty(cfg):
    levels = 5000.0 + 100.0 * np.arange(11)
    tr = integrate_descent(_constant_rate_profile(cfg, levels), levels[0], cfg)
    assert tr.time_to_bottom == 0.0
    assert len(tr) == 1


def test_step_refinement_and_monotonicity(cfg):
    levels = fl_to_m(np.arange(150, 378))
    prof = nominal_profile(cfg, levels)
    coarse = integrate_descent(prof, levels[-1], cfg)
    fine = integrate_descent(prof, levels[-1], cfg, substeps=2)
    assert abs(fine.time_to_bottom / coarse.time_to_bottom - 1) < 1e-3
    assert np.all(np.diff(coarse.t) > 0)
    assert np.all(np.diff(coarse.h) < 0)
    assert np.all(coarse.rocd < 0)
    np.testing.assert_array_equal(fine.h, coarse.h)


def test_additivity(cfg):
    levels = fl_to_m(np.arange(150, 378))
    prof = nominal_profile(cfg, levels)
    mid = levels[100]
    whole = integrate_descent(prof, levels[-1], cfg).time_to_bottom
    upper = integrate_descent(prof, levels[-1], cfg, h_end=mid).time_to_bottom
    lower = integrate_descent(prof, mid, cfg).time_to_bottom
    assert upper + lower == pytest.approx(whole, rel=1e-9)


def test_partial_start_between_levels(cfg):
    levels = 5000.0 + 100.0 * np.arange(11)
    tr = integrate_descent(_constant_rate_profile(cfg, levels), 5450.0, cfg)
    assert tr.h[0] == 5450.0 and tr.h[-1] == 5000.0
    # drag is interpolated linearly off-grid, so the rate at 5450 m is only close to -10
    assert tr.time_to_bottom == pytest.approx(45.0, rel=1e-6)


def test_non_descending_profile(cfg):
    levels = 5000.0 + 100.0 * np.arange(11)
    prof = DescentProfile(levels, np.full(11, 100.0), np.full(11, 140.0))  # thrust exceeds drag
    with pytest.raises(NonDescendingProfileError):
        integrate_descent(prof, levels[-1], cfg)


def test_integration_limits(cfg):
    levels = 5000.0 + 100.0 * np.arange(11)
    prof = _constant_rate_profile(cfg, levels)
    with pytest.raises(DomainError):
        integrate_descent(prof, 7000.0, cfg)


def test_profile_validation():
    with pytest.raises(DomainError):
        DescentProfile(np.arange(3.0), np.ones(2), np.ones(3))
    with pytest.raises(DomainError):
        DescentProfile(np.arange(3.0), np.ones(3), np.array([1.0, 0.0, 1.0]))


def test_exact_profile_mode_constant_tas(cfg):
    # constant TAS gives a share factor of one in the exact mode
    ex = load_cfg(esf_mode="exact_profile", idle_thrust_coeffs=[0.0, 1.0, 0.0])
    levels = 5000.0 + 100.0 * np.arange(11)
    cas = atm.tas_to_cas(np.full(11, 200.0), levels)
    prof = DescentProfile(levels, np.full(11, 30000.0), cas)
    tr = integrate_descent(prof, levels[-1], ex)
    np.testing.assert_allclose(tr.rocd, -30000 * 200 / (ex.mass * C.g0), rtol=1e-9)


def test_nominal_trajectory(cfg):
    levels = fl_to_m(np.arange(150, 378))
    tr = nominal_trajectory(cfg, levels)
    assert tr.h[0] == levels[-1] and tr.h[-1] == levels[0]
    assert 300.0 < tr.time_to_bottom < 1500.0


# --------------------------------------------------------------------- config

def test_flight_levels():
    assert fl_to_m(150) == pytest.approx(4572.0, abs=1e-9)
    assert abs(fl_to_m(377) - 11490.0) < 1.0
    assert m_to_fl(fl_to_m(250.0)) == pytest.approx(250.0)


def test_config_validation_and_round_trip(cfg):
    assert AircraftConfig.from_dict(cfg.to_dict()) == cfg
    for bad in [dict(mass=0.0), dict(max_fl=150), dict(mach_ref=1.0), dict(esf_mode="other"),
                dict(idle_thrust_coeffs=[1.0, 2.0])]:
        with pytest.raises(DomainError):
            load_cfg(**bad)
    assert math.isfinite(cfg.transition_altitude)
