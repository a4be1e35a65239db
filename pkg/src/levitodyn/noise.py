"""Calibration physics: gas damping, photon-recoil heating, decoherence budget
and the coupling-vs-polarization-angle model.

Two pathways fill a :class:`DecoherenceBudget`: the ab-initio one
(:func:`total_decoherence`, from a :class:`ParticleEnvironment`) and the
measured linear law ``Gamma_j/2pi = a_j + b_j P`` (:func:`budget_from_linear_law`).
They are kept separate on purpose; measured slopes typically exceed the
free-molecular prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import C, DEFAULT_TEMPERATURE, EPS0, HBAR, KB, M_N2, TWO_PI
from .params import ParticleEnvironment, SystemParams

SILICA_DENSITY = 2000.0  # kg/m^3
SILICA_INDEX = 1.45
ND_YAG_WAVELENGTH = 1064e-9


def _positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise ValueError(f"{k} must be > 0, got {v!r}")


# --- particle helpers ----------------------------------------------------

def sphere_mass(radius: float, density: float = SILICA_DENSITY) -> float:
    return 4.0 / 3.0 * math.pi * radius**3 * density


def rayleigh_polarizability(radius: float, index: float = SILICA_INDEX) -> float:
    """SI polarizability ``4 pi eps0 R^3 (n^2 - 1)/(n^2 + 2)``."""
    return 4 * math.pi * EPS0 * radius**3 * (index**2 - 1) / (index**2 + 2)


def rayleigh_cross_section(radius: float, wavelength: float, index: float = SILICA_INDEX) -> float:
    """Total Rayleigh scattering cross-section ``k^4 alpha^2 / (6 pi eps0^2)``."""
    k = TWO_PI / wavelength
    alpha = rayleigh_polarizability(radius, index)
    return k**4 * alpha**2 / (6 * math.pi * EPS0**2)


def cavity_mode_volume(waist: float, length: float) -> float:
    """Gaussian TEM00 mode volume ``pi w0^2 L / 4``."""
    return math.pi * waist**2 * length / 4


def silica_environment(
    diameter: float,
    *,
    pressure: float = 0.0,
    intensity: float,
    cavity_volume: float,
    temperature: float = DEFAULT_TEMPERATURE,
    theta: float = math.pi / 2,
    density: float = SILICA_DENSITY,
    index: float = SILICA_INDEX,
    wavelength: float = ND_YAG_WAVELENGTH,
    gas_mass: float = M_N2,
) -> ParticleEnvironment:
    """Environment for a silica sphere in nitrogen, alpha and sigma from Rayleigh theory.

    The laser and cavity frequencies are taken equal; their difference
    (the detuning) is irrelevant at this level.
    """
    R = diameter / 2
    omega_l = TWO_PI * C / wavelength
    return ParticleEnvironment(
        radius=R,
        mass=sphere_mass(R, density),
        gas_mass=gas_mass,
        pressure=pressure,
        intensity=intensity,
        cross_section=rayleigh_cross_section(R, wavelength, index),
        laser_omega=omega_l,
        cavity_omega=omega_l,
        cavity_volume=cavity_volume,
        polarizability=rayleigh_polarizability(R, index),
        temperature=temperature,
        theta=theta,
    )


# --- rates ---------------------------------------------------------------

def gas_damping(env: ParticleEnvironment) -> float:
    """Free-molecular gas damping rate Gamma_m [rad/s].

    ``(8 sqrt(pi)/3) (R^2/m) sqrt(m_gas/(2 kB T)) (2 + pi/4) P``. Valid when
    the mean free path is much larger than the particle; not checked.
    """
    _positive(radius=env.radius, mass=env.mass, gas_mass=env.gas_mass, temperature=env.temperature)
    if env.pressure < 0:
        raise ValueError("pressure must be >= 0")
    return (8 * math.sqrt(math.pi) / 3 * env.radius**2 / env.mass
            * math.sqrt(env.gas_mass / (2 * KB * env.temperature))
            * (2 + math.pi / 4) * env.pressure)


def recoil_rates(env: ParticleEnvironment, omega_x: float, omega_y: float) -> tuple[float, float]:
    """Photon-recoil decoherence (Gamma^d_X, Gamma^d_Y) for linear tweezer polarization.

    Along the polarization (Y)::

        Gamma^d_Y = (1/5) hbar omega_L^2 / (2 m c^2 Omega_Y) * I sigma / (hbar omega_L)

    and ``Gamma^d_X = 2 Gamma^d_Y Omega_Y / Omega_X``.
    """
    _positive(omega_x=omega_x, omega_y=omega_y, mass=env.mass, intensity=env.intensity,
              cross_section=env.cross_section, laser_omega=env.laser_omega)
    photon_rate = env.intensity * env.cross_section / (HBAR * env.laser_omega)
    gy = 0.2 * HBAR * env.laser_omega**2 / (2 * env.mass * C**2 * omega_y) * photon_rate
    gx = 2 * gy * omega_y / omega_x
    return gx, gy


def intensity_cross_section_from_recoil(gamma_d_y: float, mass: float, laser_omega: float, omega_y: float) -> float:
    """Invert the Y recoil formula for the product ``I_tw * sigma`` [W]."""
    _positive(gamma_d_y=gamma_d_y, mass=mass, laser_omega=laser_omega, omega_y=omega_y)
    return 10 * mass * C**2 * omega_y * gamma_d_y / laser_omega


@dataclass(frozen=True)
class DecoherenceBudget:
    """Per-axis decoherence rates [rad/s]: thermal + recoil + extra."""

    gamma_m: float
    thermal_x: float
    thermal_y: float
    recoil_x: float
    recoil_y: float
    extra_x: float = 0.0
    extra_y: float = 0.0

    def __post_init__(self):
        for name in ("gamma_m", "thermal_x", "thermal_y", "recoil_x", "recoil_y", "extra_x", "extra_y"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def gamma_x(self) -> float:
        return self.thermal_x + self.recoil_x + self.extra_x

    @property
    def gamma_y(self) -> float:
        return self.thermal_y + self.recoil_y + self.extra_y

    def apply(self, params: SystemParams) -> SystemParams:
        """Copy of ``params`` with Gamma_m, Gamma_X, Gamma_Y taken from this budget."""
        return params.replace(gamma_m=self.gamma_m, gamma_x=self.gamma_x, gamma_y=self.gamma_y)

    def to_hz_dict(self) -> dict:
        keys = ("gamma_m", "thermal_x", "thermal_y", "recoil_x", "recoil_y", "extra_x", "extra_y")
        d = {f"{k}_hz": getattr(self, k) / TWO_PI for k in keys}
        d["gamma_x_hz"] = self.gamma_x / TWO_PI
        d["gamma_y_hz"] = self.gamma_y / TWO_PI
        return d


def thermal_rate(gamma_m: float, omega: float, temperature: float = DEFAULT_TEMPERATURE) -> float:
    """Gas contribution ``kB T Gamma_m / (hbar Omega)`` to the decoherence rate."""
    return KB * temperature * gamma_m / (HBAR * omega)


def total_decoherence(env: ParticleEnvironment, omega_x: float, omega_y: float,
                      gamma_extra: tuple[float, float] = (0.0, 0.0)) -> DecoherenceBudget:
    gm = gas_damping(env)
    rx, ry = recoil_rates(env, omega_x, omega_y)
    return DecoherenceBudget(
        gamma_m=gm,
        thermal_x=thermal_rate(gm, omega_x, env.temperature),
        thermal_y=thermal_rate(gm, omega_y, env.temperature),
        recoil_x=rx, recoil_y=ry,
        extra_x=gamma_extra[0], extra_y=gamma_extra[1],
    )


@dataclass(frozen=True)
class LinearDecoherenceLaw:
    """Measured ``Gamma_j/2pi = a_j + b_j P`` (a in Hz, b in Hz/Pa)."""

    a_x: float
    a_y: float
    b_x: float
    b_y: float
    temperature: float = DEFAULT_TEMPERATURE
    axis_for_damping: str = "x"


def gamma_m_from_slope(b: float, omega: float, temperature: float = DEFAULT_TEMPERATURE) -> float:
    """Pressure-normalized gas damping ``Gamma_m/(2 pi P) = b hbar Omega / (kB T)`` [Hz/Pa].

    ``b`` is the measured slope of Gamma_j/2pi against pressure [Hz/Pa] and
    ``omega`` the mode's angular frequency.
    """
    return b * HBAR * omega / (KB * temperature)


def budget_from_linear_law(law: LinearDecoherenceLaw, pressure: float,
                           omega_x: float, omega_y: float) -> DecoherenceBudget:
    """Budget at ``pressure`` from measured intercepts and slopes.

    The slope term is the thermal part; the intercept is booked as recoil.
    Gamma_m comes from the slope of the axis named in ``axis_for_damping``.
    """
    if pressure < 0:
        raise ValueError("pressure must be >= 0")
    if law.axis_for_damping == "x":
        gm = TWO_PI * gamma_m_from_slope(law.b_x, omega_x, law.temperature) * pressure
    else:
        gm = TWO_PI * gamma_m_from_slope(law.b_y, omega_y, law.temperature) * pressure
    return DecoherenceBudget(
        gamma_m=gm,
        thermal_x=TWO_PI * law.b_x * pressure,
        thermal_y=TWO_PI * law.b_y * pressure,
        recoil_x=TWO_PI * law.a_x,
        recoil_y=TWO_PI * law.a_y,
    )


# --- coupling --------------------------------------------------------------

@dataclass(frozen=True)
class CouplingModel:
    g_max: float
    theta: float
    omega_x: float
    omega_y: float

    @property
    def g_x(self) -> float:
        return self.g_max * math.sin(self.theta) ** 2

    @property
    def g_y(self) -> float:
        return self.g_max * math.sqrt(self.omega_x / self.omega_y) * math.sin(self.theta) * math.cos(self.theta)

    def at(self, theta: float) -> "CouplingModel":
        return CouplingModel(self.g_max, theta, self.omega_x, self.omega_y)


def g_max(env: ParticleEnvironment, omega_x: float) -> float:
    """``alpha eps_c eps_tw omega_c / (2 hbar c) * sqrt(hbar / (2 m Omega_X))``.

    ``eps_c = sqrt(hbar omega_c / (2 eps0 V_c))`` is the single-photon
    cavity field and ``eps_tw = sqrt(2 I_tw / (eps0 c))`` the tweezer field.
    """
    _positive(omega_x=omega_x)
    eps_c = math.sqrt(HBAR * env.cavity_omega / (2 * EPS0 * env.cavity_volume))
    eps_tw = math.sqrt(2 * env.intensity / (EPS0 * C))
    x_zpf = math.sqrt(HBAR / (2 * env.mass * omega_x))
    return env.polarizability * eps_c * eps_tw * env.cavity_omega / (2 * HBAR * C) * x_zpf


def coupling_from_angle(env: ParticleEnvironment, omega_x: float, omega_y: float) -> CouplingModel:
    _positive(omega_y=omega_y)
    return CouplingModel(g_max(env, omega_x), env.theta, omega_x, omega_y)
