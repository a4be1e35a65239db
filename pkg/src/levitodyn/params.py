"""Parameter containers and their file formats.

All rates and frequencies are stored as angular frequencies [rad/s]. Files
use ordinary frequencies [Hz]; the conversion happens only in
``from_hz``/``to_hz_dict`` and the config readers below.

Config schema (flat ``key = value`` text, ``#`` starts a comment)::

    detuning_hz   cavity detuning Delta/2pi (negative = red)
    kappa_hz      cavity linewidth kappa/2pi
    omega_x_hz    X mechanical frequency
    omega_y_hz    Y mechanical frequency
    g_x_hz        X coupling
    g_y_hz        Y coupling
    gamma_m_hz    gas damping rate Gamma_m/2pi
    gamma_x_hz    X total decoherence rate
    gamma_y_hz    Y total decoherence rate
    eta           detection efficiency
    omega_lo_hz   local oscillator offset

Unknown keys are kept as floats in the ``extras`` mapping returned by
:func:`load_config`.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .constants import DEFAULT_TEMPERATURE, TWO_PI

SCHEMA_VERSION = 1

# (attribute, config key) pairs; order is the canonical file order
_FREQ_KEYS = (
    ("detuning", "detuning_hz"),
    ("kappa", "kappa_hz"),
    ("omega_x", "omega_x_hz"),
    ("omega_y", "omega_y_hz"),
    ("g_x", "g_x_hz"),
    ("g_y", "g_y_hz"),
    ("gamma_m", "gamma_m_hz"),
    ("gamma_x", "gamma_x_hz"),
    ("gamma_y", "gamma_y_hz"),
)
_LO_KEY = ("omega_lo", "omega_lo_hz")
PARAM_KEYS = tuple(k for _, k in _FREQ_KEYS) + ("eta", _LO_KEY[1])


@dataclass(frozen=True)
class SystemParams:
    """Optomechanical parameter set, angular units [rad/s]."""

    detuning: float
    kappa: float
    omega_x: float
    omega_y: float
    g_x: float
    g_y: float
    gamma_m: float
    gamma_x: float
    gamma_y: float
    eta: float = 1.0
    omega_lo: float = TWO_PI * 0.9e6

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ValueError(f"{f.name} must be finite, got {v!r}")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")
        if self.omega_x <= 0 or self.omega_y <= 0:
            raise ValueError("mechanical frequencies must be > 0")
        if self.gamma_m < 0:
            raise ValueError("gamma_m must be >= 0")
        if self.gamma_x < 0 or self.gamma_y < 0:
            raise ValueError("decoherence rates must be >= 0")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")

    @classmethod
    def from_hz(cls, **kw) -> "SystemParams":
        """Build from ordinary frequencies; keys as in the config schema."""
        args = {}
        for attr, key in _FREQ_KEYS + (_LO_KEY,):
            if key in kw:
                args[attr] = TWO_PI * float(kw.pop(key))
        if "eta" in kw:
            args["eta"] = float(kw.pop("eta"))
        if kw:
            raise TypeError(f"unknown keys: {sorted(kw)}")
        return cls(**args)

    def to_hz_dict(self) -> dict:
        d = {key: getattr(self, attr) / TWO_PI for attr, key in _FREQ_KEYS}
        d["eta"] = self.eta
        d[_LO_KEY[1]] = self.omega_lo / TWO_PI
        return d

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def swap_axes(self) -> "SystemParams":
        """Exchange the X and Y labels."""
        return self.replace(
            omega_x=self.omega_y, omega_y=self.omega_x,
            g_x=self.g_y, g_y=self.g_x,
            gamma_x=self.gamma_y, gamma_y=self.gamma_x,
        )

    def fingerprint(self) -> str:
        """Short stable hash used to tag derived artifacts."""
        import hashlib

        text = json.dumps(self.to_hz_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ParticleEnvironment:
    """Physical inputs of the calibration formulas (SI units).

    ``polarizability`` is the SI polarizability alpha [C m^2 / V] and
    ``theta`` the angle between cavity axis and tweezer polarization.
    """

    radius: float
    mass: float
    gas_mass: float
    pressure: float
    intensity: float
    cross_section: float
    laser_omega: float
    cavity_omega: float
    cavity_volume: float
    polarizability: float
    temperature: float = DEFAULT_TEMPERATURE
    theta: float = math.pi / 2

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ValueError(f"{f.name} must be finite")
        # zero pressure is allowed: it switches gas damping off
        positive = [f.name for f in dataclasses.fields(self) if f.name not in ("pressure", "theta")]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.pressure < 0:
            raise ValueError("pressure must be >= 0")
        if not 0.0 <= self.theta < math.pi:
            raise ValueError("theta must lie in [0, pi)")

    def replace(self, **changes) -> "ParticleEnvironment":
        return dataclasses.replace(self, **changes)


def _parse_flat(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            out[key] = float(value)
        except ValueError:
            raise ValueError(f"line {lineno}: value for {key!r} is not a number") from None
    return out


def load_config(path) -> tuple[SystemParams, dict]:
    """Read a flat key-value or JSON config. Returns (params, extras)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        raw = json.loads(text)
        raw = raw.get("params", raw)
    else:
        raw = _parse_flat(text)
    raw.pop("schema_version", None)
    known = {k: raw[k] for k in PARAM_KEYS if k in raw}
    extras = {k: float(v) for k, v in raw.items() if k not in PARAM_KEYS}
    return SystemParams.from_hz(**known), extras


def dump_config(params: SystemParams, path, extras: dict | None = None) -> None:
    """Write params in the format implied by the file suffix."""
    path = Path(path)
    values = params.to_hz_dict()
    if extras:
        values.update(extras)
    if path.suffix.lower() == ".json":
        doc = {"schema_version": SCHEMA_VERSION, "params": values}
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        lines = ["# frequencies in Hz", f"schema_version = {SCHEMA_VERSION}"]
        lines += [f"{k} = {v!r}" for k, v in values.items()]
        path.write_text("\n".join(lines) + "\n")
