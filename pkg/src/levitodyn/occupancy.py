"""Steady-state second moments and the effective thermal occupancy.

Two independent routes to the covariance: the algebraic Lyapunov equation
``A V + V A^T + D = 0`` and integration of the symmetrized spectra
(:func:`levitodyn.spectra.spectral_covariance`).

For a direction phi in the X-Y plane, with ``x_phi = x sin(phi) + y cos(phi)``
and ``p_phi = p_x sin(phi) + p_y cos(phi)``::

    n_eff(phi) = (sqrt(<x_phi^2><p_phi^2>) * 2/hbar - 1) / 2

In zero-point units the 2/hbar becomes 1 (see ``spectra.direction_weights``).
phi = 0 is the Y direction, phi = pi/2 the X direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .drift import DriftSystem, build_drift, require_stable
from .params import SystemParams
from .spectra import direction_weights, spectral_covariance


@dataclass(frozen=True, eq=False)
class CovarianceState:
    """Symmetrized covariance over (x_c, p_c, x, p_x, y, p_y), zero-point units."""

    V: np.ndarray

    def __post_init__(self):
        V = np.array(self.V, dtype=float)
        V.setflags(write=False)
        object.__setattr__(self, "V", V)

    def photon_number(self) -> float:
        """Intracavity <a^dag a>."""
        return 0.25 * (self.V[0, 0] + self.V[1, 1]) - 0.5

    def direction_variances(self, params: SystemParams, phi: float, omega_ref=None) -> tuple[float, float]:
        wx, wp = direction_weights(params, phi, omega_ref)
        X = self.V[np.ix_([2, 4], [2, 4])]
        P = self.V[np.ix_([3, 5], [3, 5])]
        return float(wx @ X @ wx), float(wp @ P @ wp)


def solve_lyapunov(A: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Dense solve of ``A V + V A^T + D = 0`` via Kronecker linearization."""
    n = A.shape[0]
    eye = np.eye(n)
    K = np.kron(eye, A) + np.kron(A, eye)
    # column-major vec: vec(A V) = (I kron A) vec(V), vec(V A^T) = (A kron I) vec(V)
    v = np.linalg.solve(K, -D.reshape(-1, order="F"))
    V = v.reshape(n, n, order="F")
    return 0.5 * (V + V.T)


def steady_covariance(sys: DriftSystem) -> CovarianceState:
    require_stable(sys)
    return CovarianceState(solve_lyapunov(np.asarray(sys.A), np.asarray(sys.D)))


def variances_from_spectra(params: SystemParams, phi: float, omega_ref=None,
                           method: str = "auto") -> tuple[float, float]:
    """(<x_phi^2>, <p_phi^2>) as integrals of the position and momentum spectra."""
    wx, wp = direction_weights(params, phi, omega_ref)
    rows = np.zeros((2, 6))
    rows[0, [2, 4]] = wx
    rows[1, [3, 5]] = wp
    V = spectral_covariance(params, method=method, rows=rows)
    return float(V[0, 0]), float(V[1, 1])


def n_eff_from_variances(x2: float, p2: float) -> float:
    return float(0.5 * (np.sqrt(x2 * p2) - 1.0))


def _n_eff_cov(cov: CovarianceState, params, phi):
    return n_eff_from_variances(*cov.direction_variances(params, phi))


def n_eff(params: SystemParams, phi: float, cov: CovarianceState | None = None) -> float:
    cov = cov or steady_covariance(build_drift(params))
    return _n_eff_cov(cov, params, phi)


@dataclass(frozen=True, eq=False)
class OccupancyProfile:
    phis: np.ndarray
    values: np.ndarray
    n_min: float
    n_max: float
    phi_min: float
    phi_max: float
    n_y: float  # n_eff(0)
    n_x: float  # n_eff(pi/2)

    def summary(self) -> dict:
        return {
            "n_min": self.n_min, "n_max": self.n_max,
            "phi_min_deg": float(np.degrees(self.phi_min)),
            "phi_max_deg": float(np.degrees(self.phi_max)),
            "n_eff_0": self.n_y, "n_eff_pi_2": self.n_x,
        }


def _refine(f, phis, k, sign):
    """Golden-section polish of an extremum bracketed by the scan neighbours."""
    step = phis[1] - phis[0]
    g = lambda t: sign * f(t)
    a, b, c = phis[k] - step, phis[k], phis[k] + step
    try:
        res = minimize_scalar(g, bracket=(a, b, c), method="golden", options={"xtol": 1e-9})
    except ValueError:  # flat profile: no strict bracket
        return b % np.pi, sign * g(b)
    if res.success and g(res.x) <= g(b) and abs(res.x - b) <= step:
        return res.x % np.pi, sign * res.fun
    return b % np.pi, sign * g(b)


def occupancy_profile(params: SystemParams, n_samples: int = 720,
                      cov: CovarianceState | None = None) -> OccupancyProfile:
    """Dense phi scan over [0, pi) with golden-section refinement of the extrema."""
    if n_samples < 16:
        raise ValueError("n_samples must be >= 16")
    cov = cov or steady_covariance(build_drift(params))
    f = lambda t: _n_eff_cov(cov, params, t)
    phis = np.arange(n_samples) * (np.pi / n_samples)
    vals = np.array([f(t) for t in phis])
    kmin = int(np.argmin(vals))
    kmax = int(np.argmax(vals))
    phi_min, n_min = _refine(f, phis, kmin, +1.0)
    phi_max, n_max = _refine(f, phis, kmax, -1.0)
    return OccupancyProfile(phis, vals, float(min(n_min, vals.min())), float(max(n_max, vals.max())),
                            float(phi_min), float(phi_max), float(f(0.0)), float(f(np.pi / 2)))
