"""Parameter sweeps over detuning, polarization angle or pressure."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constants import TWO_PI
from .drift import build_drift, eigenmodes, DEFAULT_EPS_STAB
from .noise import LinearDecoherenceLaw, budget_from_linear_law, g_max as g_max_of_env, total_decoherence
from .occupancy import occupancy_profile, steady_covariance
from .params import SCHEMA_VERSION, ParticleEnvironment, SystemParams
from .spectra import FrequencyGrid, Spectrum, output_spectrum, save_spectrum, sideband_asymmetry

VARIABLES = ("detuning", "angle", "pressure")
OUTPUTS = ("spectrum", "asymmetry", "occupancy")
UNITS = {"detuning": "kHz", "angle": "deg", "pressure": "Pa"}


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep.

    ``values`` are in file units: detuning in kHz, angle in degrees,
    pressure in Pa. For an angle sweep the couplings follow
    ``g_X = g_max sin^2 theta`` and ``g_Y = g_max sqrt(Omega_X/Omega_Y) sin theta cos theta``
    with ``g_max`` taken from ``g_max`` [rad/s], else from ``env``, else
    from ``base.g_x``. A pressure sweep uses ``env`` (ab-initio budget) if
    given, otherwise the linear law ``law``.
    """

    variable: str
    values: tuple
    base: SystemParams
    outputs: tuple = ("occupancy",)
    g_max: float | None = None
    law: LinearDecoherenceLaw | None = None
    env: ParticleEnvironment | None = None
    n_spectrum: int = 2**14
    n_asymmetry: int = 2048
    n_phi: int = 720

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ValueError(f"variable must be one of {VARIABLES}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if not self.values:
            raise ValueError("sweep grid is empty")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("sweep values must be finite")
        bad = set(self.outputs) - set(OUTPUTS)
        if bad:
            raise ValueError(f"unknown outputs {sorted(bad)}")
        if self.variable == "pressure" and self.law is None and self.env is None:
            raise ValueError("pressure sweep needs a linear law or an environment")

    def point(self, value: float) -> SystemParams:
        b = self.base
        if self.variable == "detuning":
            return b.replace(detuning=TWO_PI * 1e3 * value)
        if self.variable == "angle":
            th = math.radians(value)
            if self.g_max is not None:
                gm = self.g_max
            elif self.env is not None:
                gm = g_max_of_env(self.env, b.omega_x)
            else:
                gm = b.g_x
            gx = gm * math.sin(th) ** 2
            gy = gm * math.sqrt(b.omega_x / b.omega_y) * math.sin(th) * math.cos(th)
            # the sign of g_Y is a gauge choice (y -> -y)
            return b.replace(g_x=gx, g_y=abs(gy))
        if self.env is not None:
            budget = total_decoherence(self.env.replace(pressure=value), b.omega_x, b.omega_y)
        else:
            budget = budget_from_linear_law(self.law, value, b.omega_x, b.omega_y)
        return budget.apply(b)


@dataclass(frozen=True, eq=False)
class SweepRecord:
    index: int
    value: float
    params: SystemParams
    stable: bool
    eigenvalues: np.ndarray
    occupancy: dict | None = None
    profile: tuple | None = None
    spectrum: Spectrum | None = None
    asymmetry: Spectrum | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        lam = self.eigenvalues
        d = {
            "index": self.index,
            "value": self.value,
            "params": self.params.to_hz_dict(),
            "params_hash": self.params.fingerprint(),
            "stable": self.stable,
            "max_real_eigenvalue": float(lam.real.max()),
            "eigen_centers_hz": (lam.imag / TWO_PI).tolist(),
            "eigen_widths_hz": (-2 * lam.real / TWO_PI).tolist(),
        }
        if self.occupancy is not None:
            d["occupancy"] = self.occupancy
        if self.error:
            d["error"] = self.error
        return d


def asymmetry_grid(params: SystemParams, n: int = 2048) -> FrequencyGrid:
    """Positive offsets spanning both mechanical frequencies plus 2 kappa."""
    lo = max(min(params.omega_x, params.omega_y) - 2 * params.kappa, TWO_PI * 1e3)
    hi = max(params.omega_x, params.omega_y) + 2 * params.kappa
    return FrequencyGrid.linspace(lo, hi, n)


def _run_point(spec: SweepSpec, i: int, value: float) -> SweepRecord:
    p = spec.point(value)
    es = eigenmodes(build_drift(p))
    stable = bool(es.eigenvalues.real.max() < -DEFAULT_EPS_STAB)
    if not stable:
        return SweepRecord(i, value, p, False, es.eigenvalues, error="unstable")
    occ = prof = spec_ = asym = None
    if "occupancy" in spec.outputs:
        pr = occupancy_profile(p, spec.n_phi, steady_covariance(build_drift(p)))
        occ = pr.summary()
        prof = (pr.phis, pr.values)
    if "spectrum" in spec.outputs:
        spec_ = output_spectrum(p, FrequencyGrid.default(p, spec.n_spectrum))
    if "asymmetry" in spec.outputs:
        asym = sideband_asymmetry(p, asymmetry_grid(p, spec.n_asymmetry))
    return SweepRecord(i, value, p, True, es.eigenvalues, occ, prof, spec_, asym)


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[SweepRecord]:
    """One record per grid value, in grid order. Unstable points are recorded, not computed."""
    if workers == 1:
        return [_run_point(spec, i, v) for i, v in enumerate(spec.values)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda iv: _run_point(spec, *iv), enumerate(spec.values)))


def save_archive(spec: SweepSpec, records: list[SweepRecord], out_dir) -> Path:
    """Write ``sweep.json``, a summary ``sweep.csv`` and per-point spectra."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "variable": spec.variable,
        "unit": UNITS[spec.variable],
        "outputs": list(spec.outputs),
        "base": spec.base.to_hz_dict(),
        "records": [r.to_dict() for r in records],
    }
    path = out / "sweep.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    cols = ["index", "value", "stable", "g_x_hz", "g_y_hz", "gamma_x_hz", "gamma_y_hz",
            "n_min", "n_max", "phi_min_deg", "phi_max_deg", "n_eff_0", "n_eff_pi_2"]
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            hz = r.params.to_hz_dict()
            occ = r.occupancy or {}
            row = [r.index, repr(r.value), int(r.stable)]
            row += [repr(hz[k]) for k in ("g_x_hz", "g_y_hz", "gamma_x_hz", "gamma_y_hz")]
            row += [repr(float(occ[k])) if k in occ else "" for k in cols[7:]]
            w.writerow(row)
    for r in records:
        if r.spectrum is not None:
            save_spectrum(r.spectrum, out / f"spectrum_{r.index:04d}.csv")
        if r.asymmetry is not None:
            save_spectrum(r.asymmetry, out / f"asymmetry_{r.index:04d}.csv")
        if r.profile is not None:
            save_profile_csv(r.profile, out / f"occupancy_{r.index:04d}.csv")
    return path


def save_profile_csv(profile, path) -> None:
    phis, vals = profile
    np.savetxt(path, np.column_stack([np.degrees(phis), vals]), delimiter=",",
               header="phi_deg,n_eff", comments="", fmt="%.17g")
