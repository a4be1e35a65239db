import math

import numpy as np
import pytest

from levitodyn.constants import C, EPS0, HBAR, KB, M_N2, TWO_PI
from levitodyn.noise import (CouplingModel, DecoherenceBudget, LinearDecoherenceLaw,
                             budget_from_linear_law, coupling_from_angle, g_max, gamma_m_from_slope,
                             gas_damping, rayleigh_cross_section, rayleigh_polarizability,
                             recoil_rates, sphere_mass, thermal_rate, total_decoherence)
from levitodyn.params import load_config, dump_config
from levitodyn.presets import LINEAR_LAW, reference_environment

WX, WY = TWO_PI * 128e3, TWO_PI * 115e3


@pytest.fixture
def env():
    return reference_environment(pressure=1.0)


def test_gas_damping_hand_formula(env):
    # same formula evaluated term by term
    vbar_term = math.sqrt(M_N2 / (2 * KB * 293.0))
    expected = 8 * math.sqrt(math.pi) / 3 * (62.5e-9) ** 2 / sphere_mass(62.5e-9) * vbar_term * (2 + math.pi / 4)
    assert gas_damping(env) == pytest.approx(expected, rel=1e-13)


def test_gas_damping_reference_value(env):
    assert gas_damping(env) / TWO_PI == pytest.approx(9.7, rel=0.02)


def test_gas_damping_zero_and_linear(env):
    assert gas_damping(env.replace(pressure=0.0)) == 0.0
    a = gas_damping(env.replace(pressure=3e-5))
    assert gas_damping(env.replace(pressure=6e-5)) == 2 * a


def test_gas_damping_temperature_scaling(env):
    assert gas_damping(env.replace(temperature=4 * 293.0)) == pytest.approx(gas_damping(env) / 2, rel=1e-14)


def test_recoil_reference_values(env):
    gx, gy = recoil_rates(env, WX, WY)
    assert gy / TWO_PI == pytest.approx(1.7e3, rel=1e-12)
    assert gx / TWO_PI == pytest.approx(3.0e3, rel=0.05)
    assert gx / gy == pytest.approx(1.8, rel=0.01)
    assert gx / gy == pytest.approx(2 * WY**2 / (WX * WY), rel=1e-14)


def test_recoil_isotropic_ratio(env):
    gx, gy = recoil_rates(env, WX, WX)
    assert gx / gy == 2.0


def test_recoil_scales_with_intensity(env):
    gx, gy = recoil_rates(env, WX, WY)
    gx2, gy2 = recoil_rates(env.replace(intensity=3 * env.intensity), WX, WY)
    assert gx2 == pytest.approx(3 * gx, rel=1e-14) and gy2 == pytest.approx(3 * gy, rel=1e-14)


def test_rejects_bad_inputs(env):
    with pytest.raises(ValueError):
        recoil_rates(env, 0.0, WY)
    with pytest.raises(ValueError):
        g_max(env, -1.0)


def test_rayleigh_helpers():
    r = 62.5e-9
    n = 1.45
    alpha = 4 * math.pi * EPS0 * r**3 * (n**2 - 1) / (n**2 + 2)
    assert rayleigh_polarizability(r) == pytest.approx(alpha, rel=1e-14)
    k = TWO_PI / 1064e-9
    assert rayleigh_cross_section(r, 1064e-9) == pytest.approx(k**4 * alpha**2 / (6 * math.pi * EPS0**2), rel=1e-14)


def test_budget_bookkeeping(env):
    b = total_decoherence(env, WX, WY, gamma_extra=(10.0, 20.0))
    assert b.gamma_x == b.thermal_x + b.recoil_x + b.extra_x
    assert b.gamma_y == b.extra_y + b.recoil_y + b.thermal_y
    assert b.thermal_x == pytest.approx(thermal_rate(b.gamma_m, WX), rel=1e-14)
    zero = total_decoherence(env.replace(pressure=0.0), WX, WY)
    assert zero.gamma_x == zero.recoil_x and zero.gamma_y == zero.recoil_y
    with pytest.raises(ValueError):
        DecoherenceBudget(1.0, -1.0, 0.0, 0.0, 0.0)


def test_linear_law_total_rate():
    b = budget_from_linear_law(LINEAR_LAW, 7.2e-6, TWO_PI * 125.9e3, TWO_PI * 115.95e3)
    assert b.gamma_x / TWO_PI == pytest.approx(7.85e3, rel=0.01)
    assert b.gamma_y / TWO_PI == pytest.approx(7.45e3, rel=0.01)
    assert b.gamma_m / TWO_PI / 7.2e-6 == pytest.approx(gamma_m_from_slope(7.05e8, TWO_PI * 125.9e3), rel=1e-12)


def test_budget_into_config(tmp_path, strong):
    b = budget_from_linear_law(LINEAR_LAW, 1.4e-5, strong.omega_x, strong.omega_y)
    p = b.apply(strong)
    dump_config(p, tmp_path / "b.cfg", {k: v for k, v in b.to_hz_dict().items() if k.startswith(("thermal", "recoil"))})
    back, extras = load_config(tmp_path / "b.cfg")
    assert back.gamma_x == pytest.approx(b.gamma_x, rel=1e-15)
    assert extras["recoil_x_hz"] == pytest.approx(LINEAR_LAW.a_x, rel=1e-12)


def test_g_max_hand_formula(env):
    eps_c = math.sqrt(HBAR * env.cavity_omega / (2 * EPS0 * env.cavity_volume))
    eps_tw = math.sqrt(2 * env.intensity / (EPS0 * C))
    expected = env.polarizability * eps_c * eps_tw * env.cavity_omega / (2 * HBAR * C) * math.sqrt(HBAR / (2 * env.mass * WX))
    assert g_max(env, WX) == pytest.approx(expected, rel=1e-14)


def test_g_max_reference_value(env):
    assert g_max(env, WX) / TWO_PI == pytest.approx(31.7e3, rel=0.06)


def test_g_max_diameter_uncertainty(env):
    # +/- 5 nm on 125 nm at fixed intensity propagates as R^1.5: about 6 %
    lo = reference_environment(diameter=120e-9, intensity=env.intensity)
    hi = reference_environment(diameter=130e-9, intensity=env.intensity)
    spread = 0.5 * (g_max(hi, WX) - g_max(lo, WX)) / g_max(env, WX)
    assert spread == pytest.approx(1.9 / 31.7, rel=0.05)


def test_g_max_scales_with_sqrt_intensity(env):
    assert g_max(env.replace(intensity=4 * env.intensity), WX) == pytest.approx(2 * g_max(env, WX), rel=1e-14)


def test_coupling_angle_rules(env):
    cm = coupling_from_angle(env.replace(theta=math.pi / 2), WX, WY)
    assert cm.g_x == pytest.approx(cm.g_max, rel=1e-15)
    assert abs(cm.g_y) < 1e-12 * cm.g_max
    zero = cm.at(0.0)
    assert zero.g_x == 0.0 and zero.g_y == 0.0
    bound = cm.g_max * max(1.0, math.sqrt(WX / WY))
    for th in np.linspace(0, math.pi, 50, endpoint=False):
        c = cm.at(th)
        assert abs(c.g_x) <= bound and abs(c.g_y) <= bound


def test_g_y_maximal_at_quarter_pi():
    cm = CouplingModel(1.0, 0.0, WX, WY)
    d = lambda th: cm.at(th + 1e-6).g_y - cm.at(th - 1e-6).g_y
    assert d(math.pi / 4 - 0.01) > 0 > d(math.pi / 4 + 0.01)


def test_gamma_m_from_slope_values():
    assert gamma_m_from_slope(7.05e8, TWO_PI * 128e3, 293.0) == pytest.approx(14.4, rel=0.05)
    assert gamma_m_from_slope(7.64e8, TWO_PI * 115e3, 293.0) == pytest.approx(14.0, rel=0.05)
    a = gamma_m_from_slope(7.05e8, WX, 293.0)
    assert gamma_m_from_slope(7.05e8, WX, 586.0) == pytest.approx(a / 2, rel=1e-15)


def test_law_damping_axis_choice():
    law_y = LinearDecoherenceLaw(1.0, 1.0, 7.05e8, 7.64e8, axis_for_damping="y")
    b = budget_from_linear_law(law_y, 1e-5, WX, WY)
    assert b.gamma_m / TWO_PI == pytest.approx(gamma_m_from_slope(7.64e8, WY) * 1e-5, rel=1e-14)
    with pytest.raises(ValueError):
        budget_from_linear_law(law_y, -1.0, WX, WY)
