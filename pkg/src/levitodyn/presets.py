"""Named parameter sets of the reference experiment.

The decoherence rates follow the measured linear law ``Gamma_j/2pi = a_j + b_j P``
unless a set quotes them directly.
"""

from __future__ import annotations

import math

from .constants import C, TWO_PI
from .noise import (ND_YAG_WAVELENGTH, LinearDecoherenceLaw, budget_from_linear_law, cavity_mode_volume,
                    intensity_cross_section_from_recoil, rayleigh_cross_section, silica_environment,
                    sphere_mass)
from .params import ParticleEnvironment, SystemParams

KAPPA_HZ = 57e3
OMEGA_LO_HZ = 0.9e6
ETA = 0.295

# intercepts [Hz] and slopes [Hz/Pa] with their 1-sigma errors
LINEAR_LAW = LinearDecoherenceLaw(a_x=2.79e3, a_y=1.97e3, b_x=7.05e8, b_y=7.64e8)
LINEAR_LAW_SIGMA = {"a_x": 0.06e3, "a_y": 0.15e3, "b_x": 0.02e8, "b_y": 0.03e8}

LOW_PRESSURE = 7.2e-6  # Pa
HIGH_PRESSURE = 7.2e-5  # Pa
ANGLE_PRESSURE = 1.4e-5  # Pa
ANGLE_G_MAX_HZ = 31e3


def _with_law(pressure, omega_x_hz, omega_y_hz, **hz):
    base = SystemParams.from_hz(omega_x_hz=omega_x_hz, omega_y_hz=omega_y_hz,
                                gamma_m_hz=0.0, gamma_x_hz=0.0, gamma_y_hz=0.0, **hz)
    budget = budget_from_linear_law(LINEAR_LAW, pressure, base.omega_x, base.omega_y)
    return budget.apply(base)


def strong_1d(pressure: float = LOW_PRESSURE) -> SystemParams:
    """Strongly coupled X, weakly coupled Y, red detuned by 120 kHz."""
    return _with_law(pressure, 125.9e3, 115.95e3, detuning_hz=-120e3, kappa_hz=KAPPA_HZ,
                     g_x_hz=24.7e3, g_y_hz=4.1e3, eta=ETA, omega_lo_hz=OMEGA_LO_HZ)


def detuning_base(detuning_hz: float = -120e3) -> SystemParams:
    """Theory set used for the occupancy-vs-detuning curves."""
    gm = TWO_PI * 14.4 * LOW_PRESSURE
    return SystemParams.from_hz(
        detuning_hz=detuning_hz, kappa_hz=KAPPA_HZ, omega_x_hz=125.9e3, omega_y_hz=115.95e3,
        g_x_hz=23.5e3, g_y_hz=3.5e3, gamma_m_hz=gm / TWO_PI, gamma_x_hz=7.85e3,
        gamma_y_hz=7.45e3, eta=ETA, omega_lo_hz=OMEGA_LO_HZ,
    )


def angle_base(theta: float = math.pi / 2) -> SystemParams:
    """Theory set for the polarization-angle curves, linear polarization at ``theta``."""
    wx, wy = 125e3, 114.4e3
    gx = ANGLE_G_MAX_HZ * math.sin(theta) ** 2
    gy = ANGLE_G_MAX_HZ * math.sqrt(wx / wy) * math.sin(theta) * math.cos(theta)
    return SystemParams.from_hz(
        detuning_hz=-130e3, kappa_hz=KAPPA_HZ, omega_x_hz=wx, omega_y_hz=wy,
        g_x_hz=gx, g_y_hz=abs(gy), gamma_m_hz=14.4 * ANGLE_PRESSURE,
        gamma_x_hz=12.4e3, gamma_y_hz=12.3e3, eta=ETA, omega_lo_hz=OMEGA_LO_HZ,
    )


def balanced_2d() -> SystemParams:
    """Near-equal couplings: the best two-dimensional cooling point."""
    return angle_base().replace(g_x=TWO_PI * 13.8e3, g_y=TWO_PI * 14.8e3)


PRESETS = {
    "strong-1d": strong_1d,
    "strong-1d-high-pressure": lambda: strong_1d(HIGH_PRESSURE),
    "detuning-base": detuning_base,
    "angle-base": angle_base,
    "balanced-2d": balanced_2d,
}


def preset(name: str) -> SystemParams:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# --- particle and cavity ---------------------------------------------------

DIAMETER = 125e-9  # m
FSR_HZ = 3.07e9
CAVITY_WAIST = 36e-6  # m, assumed: not quoted with the other cavity data
RECOIL_Y_HZ = 1.7e3  # intercept-derived recoil rate along the polarization
RECOIL_OMEGA_Y_HZ = 115e3


def reference_environment(pressure: float = 0.0, theta: float = math.pi / 2,
                          diameter: float = DIAMETER, intensity: float | None = None) -> ParticleEnvironment:
    """Silica sphere in nitrogen with the tweezer intensity fixed by the Y recoil rate.

    ``I_tw sigma`` is obtained by inverting the recoil formula at
    ``RECOIL_Y_HZ``; sigma is the Rayleigh value for ``DIAMETER``.
    """
    if intensity is None:
        r = DIAMETER / 2
        i_sigma = intensity_cross_section_from_recoil(
            TWO_PI * RECOIL_Y_HZ, sphere_mass(r), TWO_PI * C / ND_YAG_WAVELENGTH, TWO_PI * RECOIL_OMEGA_Y_HZ)
        intensity = i_sigma / rayleigh_cross_section(r, ND_YAG_WAVELENGTH)
    length = C / (2 * FSR_HZ)
    return silica_environment(diameter, pressure=pressure, intensity=intensity,
                              cavity_volume=cavity_mode_volume(CAVITY_WAIST, length), theta=theta)
