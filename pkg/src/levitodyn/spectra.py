"""Frequency-domain solution: transfer matrices, heterodyne spectra, asymmetry.

Fourier convention: ``f(Omega) = int f(t) exp(i Omega t) dt`` with noise
correlators ``<xi_j(Omega) xi_k(Omega')> = 2 pi N_jk delta(Omega + Omega')``.
With this convention positive frequencies in the rotating frame are above
the laser, so the anti-Stokes sideband of a red-detuned drive sits at
``Omega_LO + Omega_j``.

The spectrum of two operators ``o1 = c1.u + d1.xi`` and ``o2 = c2.u + d2.xi``
(``u`` the ladder vector, ``xi`` the noise vector) is::

    S_{o1 o2}(Omega) = sum_jk T1_j(-Omega) N_jk T2_k(Omega),
    Tn(Omega) = cn (-i Omega - M)^-1 L + dn

so that ``int S_{o1 o2} dOmega / 2pi = <o1 o2>``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constants import TWO_PI
from .drift import (
    R_LADDER_TO_QUAD,
    UnstableSystemError,
    build_drift,
    ladder_matrices,
    require_stable,
)
from .params import SCHEMA_VERSION, SystemParams

ASYMMETRY_FLOOR = 1e-4
KINDS = ("heterodyne-full", "anti-Stokes", "Stokes", "position", "momentum", "asymmetry", "psd")


def noise_correlation() -> np.ndarray:
    """Input-noise second moments ``N`` over ``drift.NOISES``.

    The leading 6x6 block is the cavity vacuum and the symmetric mechanical
    noise; the trailing block is the zero-point noise of the gas damping.
    """
    N = np.zeros((10, 10))
    N[0, 1] = 1.0  # <a_in a_in^dag>
    for b in (2, 4):
        N[b, b + 1] = N[b + 1, b] = 1.0
    for b in (6, 8):
        N[b, b + 1] = 1.0
    return N


NOISE_CORRELATION = noise_correlation()
NOISE_CORRELATION.setflags(write=False)


class SingularFrequencyError(ArithmeticError):
    def __init__(self, omega):
        self.omega = omega
        super().__init__(f"(-i Omega - M) is singular at Omega = {omega!r} rad/s")


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Uniformly spaced angular frequencies [rad/s]."""

    omegas: np.ndarray

    def __post_init__(self):
        w = np.array(self.omegas, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("grid needs at least two points")
        d = np.diff(w)
        if np.any(d <= 0):
            raise ValueError("grid must be strictly increasing")
        tol = 1e-9 * d.mean() + 64 * np.finfo(float).eps * np.abs(w).max()
        if np.max(np.abs(d - d.mean())) > tol:
            raise ValueError("grid spacing is not uniform")
        w.setflags(write=False)
        object.__setattr__(self, "omegas", w)

    @classmethod
    def linspace(cls, start, stop, n) -> "FrequencyGrid":
        return cls(np.linspace(start, stop, int(n)))

    @classmethod
    def from_hz(cls, start_hz, stop_hz, n) -> "FrequencyGrid":
        return cls.linspace(TWO_PI * start_hz, TWO_PI * stop_hz, n)

    @classmethod
    def default(cls, params: SystemParams, n: int = 2**16) -> "FrequencyGrid":
        """``n`` points spanning Omega_LO +/- (max(Omega_X, Omega_Y) + 10 kappa)."""
        half = max(params.omega_x, params.omega_y) + 10 * params.kappa
        return cls.linspace(params.omega_lo - half, params.omega_lo + half, n)

    @property
    def spacing(self) -> float:
        return float((self.omegas[-1] - self.omegas[0]) / (self.omegas.size - 1))

    @property
    def hz(self) -> np.ndarray:
        return self.omegas / TWO_PI

    def __len__(self):
        return self.omegas.size


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Sampled spectrum on a :class:`FrequencyGrid`.

    ``values`` are shot-noise units for heterodyne spectra, or a density per
    Hz (so that ``sum(values) * df`` is the variance) otherwise.
    """

    grid: FrequencyGrid
    values: np.ndarray
    normalization: str = "shot-noise"
    kind: str = "heterodyne-full"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.omegas.shape:
            raise ValueError("values and grid differ in length")
        if self.normalization not in ("shot-noise", "raw"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def integral(self) -> float:
        """Trapezoidal ``int values dOmega / 2pi``."""
        return float(np.trapezoid(self.values, self.grid.omegas) / TWO_PI)


# --- propagation ---------------------------------------------------------

def transfer_matrix(params: SystemParams, omega: float) -> np.ndarray:
    """``T(Omega) = (-i Omega - M)^-1 L`` (6 x 10, ladder rows, noise columns)."""
    M, L = ladder_matrices(params)
    K = -1j * omega * np.eye(6) - M
    if np.linalg.cond(K) > 1e14:
        raise SingularFrequencyError(omega)
    return np.linalg.solve(K, L)


class _Propagator:
    """Evaluates rows of T(Omega) on many frequencies at once.

    Uses the eigen-decomposition of M, which turns every frequency into a
    diagonal scaling; falls back to batched solves when M is close to
    defective.
    """

    def __init__(self, params: SystemParams):
        self.M, self.L = ladder_matrices(params)
        lam, V = np.linalg.eig(self.M)
        self.lam = lam
        self.use_eig = np.linalg.cond(V) < 1e8
        if self.use_eig:
            self.V = V
            self.VinvL = np.linalg.solve(V, self.L)

    def rows(self, c: np.ndarray, omegas: np.ndarray) -> np.ndarray:
        """``c @ T(Omega)`` for each Omega; c has shape (r, 6). Returns (n, r, 10)."""
        omegas = np.asarray(omegas, dtype=float)
        if self.use_eig:
            cv = np.asarray(c) @ self.V  # (r, 6)
            res = 1.0 / (-1j * omegas[:, None] - self.lam[None, :])  # (n, 6)
            return np.einsum("rk,nk,kj->nrj", cv, res, self.VinvL, optimize=True)
        K = -1j * omegas[:, None, None] * np.eye(6) - self.M
        T = np.linalg.solve(K, np.broadcast_to(self.L, (omegas.size, 6, 10)))
        return np.einsum("rk,nkj->nrj", c, T)


def _cross_spectra(prop: _Propagator, c1, d1, c2, d2, omegas) -> np.ndarray:
    """Matrix of spectra S_{o1_i o2_l}(Omega), shape (n, r1, r2)."""
    t1 = prop.rows(c1, -omegas) + np.asarray(d1)[None]
    t2 = prop.rows(c2, omegas) + np.asarray(d2)[None]
    return np.einsum("nij,jk,nlk->nil", t1, NOISE_CORRELATION, t2, optimize=True)


def _output_ops(kappa):
    c_out = np.zeros((1, 6)); c_out[0, 0] = np.sqrt(kappa)
    d_out = np.zeros((1, 10)); d_out[0, 0] = -1.0
    c_dag = np.zeros((1, 6)); c_dag[0, 1] = np.sqrt(kappa)
    d_dag = np.zeros((1, 10)); d_dag[0, 1] = -1.0
    return c_out, d_out, c_dag, d_dag


def output_photon_spectrum(params: SystemParams, omegas, _prop=None) -> np.ndarray:
    """Normally ordered spectrum of the output field ``sqrt(kappa) a - a_in``.

    Positive Omega is above the laser frequency. Integrates (dOmega/2pi) to
    the output photon flux ``kappa <a^dag a>``.
    """
    prop = _prop or _Propagator(params)
    c_out, d_out, c_dag, d_dag = _output_ops(params.kappa)
    S = _cross_spectra(prop, c_dag, d_dag, c_out, d_out, np.asarray(omegas, float))
    return S[:, 0, 0].real


def intracavity_photon_spectrum(params: SystemParams, omegas) -> np.ndarray:
    """Normally ordered spectrum of the intracavity field ``a``."""
    prop = _Propagator(params)
    c = np.zeros((1, 6)); c[0, 0] = 1.0
    cd = np.zeros((1, 6)); cd[0, 1] = 1.0
    z = np.zeros((1, 10))
    return _cross_spectra(prop, cd, z, c, z, np.asarray(omegas, float))[:, 0, 0].real


def heterodyne_excess(params: SystemParams, omegas) -> np.ndarray:
    """``S_out - 1`` at absolute heterodyne frequencies, without coverage checks."""
    omegas = np.asarray(omegas, dtype=float)
    prop = _Propagator(params)
    n = omegas.size
    both = np.concatenate([omegas - params.omega_lo, -omegas - params.omega_lo])
    s = output_photon_spectrum(params, both, _prop=prop)
    return params.eta * (s[:n] + s[n:])


def output_spectrum(params: SystemParams, grid: FrequencyGrid | None = None) -> Spectrum:
    """Shot-noise-normalized heterodyne spectrum.

    ``S_out(Omega) = eta (S_aa(Omega - Omega_LO) + S_a+a+(Omega + Omega_LO)) + 1 - eta``
    where ``S_a+a+`` is the anti-normally ordered spectrum, so far from all
    resonances ``S_out -> 1``.
    """
    require_stable(build_drift(params))
    grid = grid or FrequencyGrid.default(params)
    need = max(params.omega_x, params.omega_y) + 5 * params.kappa
    w = grid.omegas
    if w[0] > params.omega_lo - need or w[-1] < params.omega_lo + need:
        raise ValueError(
            "grid must cover Omega_LO +/- (max(Omega_X, Omega_Y) + 5 kappa) to include both sidebands"
        )
    values = 1.0 + heterodyne_excess(params, w)
    return Spectrum(grid, values, "shot-noise", "heterodyne-full", _meta(params))


def _meta(params, **extra):
    m = {"params_hash": params.fingerprint(), "params": params.to_hz_dict()}
    m.update(extra)
    return m


def cavity_filter_ratio(params: SystemParams, omegas) -> np.ndarray:
    """``((Omega - Delta)^2 + (kappa/2)^2) / ((Omega + Delta)^2 + (kappa/2)^2)``."""
    w = np.asarray(omegas, dtype=float)
    k2 = (0.5 * params.kappa) ** 2
    return ((w - params.detuning) ** 2 + k2) / ((w + params.detuning) ** 2 + k2)


def asymmetry_from_excess(params, omegas, stokes_excess, anti_excess, floor=ASYMMETRY_FLOOR):
    """Corrected asymmetry from ``S_out - 1`` on both sides; NaN where undefined."""
    stokes_excess = np.asarray(stokes_excess, float)
    anti_excess = np.asarray(anti_excess, float)
    valid = (np.abs(stokes_excess) > floor) & (np.abs(anti_excess) > floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        A = stokes_excess / anti_excess * cavity_filter_ratio(params, omegas)
    return np.where(valid, A, np.nan), valid


def sideband_asymmetry(params: SystemParams, grid: FrequencyGrid, floor: float = ASYMMETRY_FLOOR) -> Spectrum:
    """Cavity-corrected Stokes / anti-Stokes ratio A(Omega), Omega > 0 offsets from the LO.

    Bins where either sideband excess is below ``floor`` are NaN and listed in
    ``metadata['invalid_bins']``. The detection efficiency cancels exactly.
    """
    require_stable(build_drift(params))
    w = grid.omegas
    if w[0] <= 0:
        raise ValueError("asymmetry grid must be strictly positive")
    prop = _Propagator(params)
    # S_out(Omega_LO -/+ w) - 1; the image terms sit near -2 Omega_LO
    lo = params.omega_lo
    args = np.concatenate([-w, -2 * lo + w, w, -2 * lo - w])
    s = output_photon_spectrum(params, args, _prop=prop).reshape(4, -1)
    stokes = params.eta * (s[0] + s[1])
    anti = params.eta * (s[2] + s[3])
    A, valid = asymmetry_from_excess(params, w, stokes, anti, floor)
    meta = _meta(params, invalid_bins=np.flatnonzero(~valid).tolist())
    return Spectrum(grid, A, "shot-noise", "asymmetry", meta)


# --- quadratures -------------------------------------------------------------

def direction_weights(params: SystemParams, phi: float, omega_ref: float | None = None):
    """Weights turning (x, y) and (p_x, p_y) into x_phi, p_phi.

    ``x_phi = x sin(phi) + y cos(phi)`` in physical units. Each axis has its
    own zero-point scale, so the combined coordinate is expressed in the
    zero-point units of an oscillator at ``omega_ref`` (default: geometric
    mean of Omega_X and Omega_Y). The product <x_phi^2><p_phi^2> does not
    depend on that choice.
    """
    if omega_ref is None:
        omega_ref = np.sqrt(params.omega_x * params.omega_y)
    s, c = np.sin(phi), np.cos(phi)
    wx = np.array([s * np.sqrt(omega_ref / params.omega_x), c * np.sqrt(omega_ref / params.omega_y)])
    wp = np.array([s * np.sqrt(params.omega_x / omega_ref), c * np.sqrt(params.omega_y / omega_ref)])
    return wx, wp


def _quad_rows(params, phi, omega_ref=None):
    wx, wp = direction_weights(params, phi, omega_ref)
    rx = np.zeros(6); rx[[2, 4]] = wx
    rp = np.zeros(6); rp[[3, 5]] = wp
    return np.vstack([rx, rp])


def symmetrized_quadrature_spectra(params: SystemParams, rows: np.ndarray, omegas, _prop=None) -> np.ndarray:
    """Symmetrized spectral matrix of quadrature combinations ``rows @ q``.

    Returns shape (n, r, r); ``int ... dOmega/2pi`` gives the symmetrized
    covariance ``(1/2) <{q_i, q_l}>``.
    """
    prop = _prop or _Propagator(params)
    omegas = np.asarray(omegas, dtype=float)
    c = np.asarray(rows) @ R_LADDER_TO_QUAD
    z = np.zeros((c.shape[0], 10))
    S_pos = _cross_spectra(prop, c, z, c, z, omegas)
    S_neg = _cross_spectra(prop, c, z, c, z, -omegas)
    return 0.5 * (S_pos + np.swapaxes(S_neg, 1, 2)).real


def quadrature_spectrum(params: SystemParams, grid: FrequencyGrid, phi: float,
                        which: str = "position", omega_ref: float | None = None) -> Spectrum:
    """Symmetrized spectrum of x_phi or p_phi in zero-point units (per Hz)."""
    if which not in ("position", "momentum"):
        raise ValueError("which must be 'position' or 'momentum'")
    require_stable(build_drift(params))
    row = _quad_rows(params, phi, omega_ref)[0 if which == "position" else 1][None]
    S = symmetrized_quadrature_spectra(params, row, grid.omegas)[:, 0, 0]
    return Spectrum(grid, S, "raw", which, _meta(params, phi=float(phi)))


# --- spectral integration ----------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(96)
MAX_TRAPZ_POINTS = 2**21


def spectral_covariance(params: SystemParams, method: str = "auto", rows: np.ndarray | None = None) -> np.ndarray:
    """Second moments obtained by integrating the symmetrized spectra.

    ``rows`` selects quadrature combinations (default: identity, i.e. the
    full 6x6 matrix over x_c, p_c, x, p_x, y, p_y).

    The spectra are rational in Omega with poles at ``+/- Im(lambda_k) + i Re(lambda_k)``.
    Three quadratures over [-W, W], all completed by Gauss-Legendre on the
    tails after mapping Omega = W / t:

    ``panels`` (default): Gauss-Legendre panels graded geometrically
    around every pole (panel length never exceeds the distance to any
    pole), so the cost grows only like log(W / a) for a half-width a.
    ``trapezoid``: uniform grid with spacing a third of the narrowest
    half-width; the error decays like exp(-2 pi a / h).
    ``adaptive``: ``scipy.integrate.quad_vec`` with the mode frequencies as
    breakpoints. ``auto`` means ``panels``.
    """
    sys = build_drift(params)
    require_stable(sys)
    rows = np.eye(6) if rows is None else np.atleast_2d(rows)
    prop = _Propagator(params)
    lam = prop.lam
    a_min = np.abs(lam.real).min()
    W = max(2.0 * np.abs(lam).max(), np.abs(lam.imag).max() + 10 * params.kappa)
    if method == "auto":
        method = "panels"

    def f(w):
        return symmetrized_quadrature_spectra(params, rows, w, _prop=prop)

    if method == "panels":
        nodes, weights = pole_graded_rule(lam, W)
        total = np.zeros((rows.shape[0],) * 2)
        chunk = 2**15
        for i in range(0, nodes.size, chunk):
            total += np.einsum("n,nij->ij", weights[i:i + chunk], f(nodes[i:i + chunk]))
        total += _tails(f, W)
    elif method == "trapezoid":
        h = a_min / 3.0
        n = int(np.ceil(2 * W / h)) + 1
        if n > MAX_TRAPZ_POINTS:
            raise ValueError(f"trapezoid would need {n} points; use method='panels'")
        total = np.zeros((rows.shape[0],) * 2)
        grid = np.linspace(-W, W, n)
        step = grid[1] - grid[0]
        chunk = 2**15
        for i in range(0, n, chunk):
            part = f(grid[i:i + chunk])
            total += part.sum(axis=0) * step
        total -= 0.5 * step * (f(grid[:1])[0] + f(grid[-1:])[0])
        total += _tails(f, W)
    elif method == "adaptive":
        from scipy.integrate import quad_vec

        centers = np.unique(np.round(np.abs(lam.imag), 6))
        pts = np.sort(np.concatenate([-centers, centers]))
        pts = pts[(pts > -W) & (pts < W)]
        total = np.zeros((rows.shape[0],) * 2)
        edges = np.concatenate([[-W], pts, [W]])
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi - lo <= 0:
                continue
            val, _ = quad_vec(lambda w: f(np.array([w]))[0], lo, hi, epsrel=1e-10, epsabs=0, limit=20000)
            total += val
        total += _tails(f, W)
    else:
        raise ValueError(f"unknown method {method!r}")
    V = total / TWO_PI
    return 0.5 * (V + V.T)


_PANEL_NODES, _PANEL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def pole_graded_rule(lam, W: float) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on [-W, W].

    Breakpoints sit at ``c +/- a 2^m / 2`` for every pole (centre c,
    half-width a), so each panel is shorter than its distance to any pole.
    """
    cs = np.concatenate([lam.imag, -lam.imag])
    as_ = np.concatenate([np.abs(lam.real), np.abs(lam.real)])
    br = [np.array([-W, W])]
    for c, a in zip(cs, as_):
        m = int(np.ceil(np.log2(4 * W / a))) + 1
        d = 0.5 * a * 2.0 ** np.arange(m)
        br.append(c - d)
        br.append(c + d)
    b = np.concatenate(br)
    b = np.unique(np.clip(b, -W, W))
    b = b[np.concatenate([[True], np.diff(b) > 1e-12 * W])]
    lo, hi = b[:-1], b[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * _PANEL_NODES[None]).ravel()
    weights = (half[:, None] * _PANEL_WEIGHTS[None]).ravel()
    return nodes, weights


def _tails(f, W):
    # int_W^inf g(w) dw = int_0^1 g(W/t) W/t^2 dt, same for the negative side
    t = 0.5 * (_GL_NODES + 1.0)
    wt = 0.5 * _GL_WEIGHTS
    w = W / t
    jac = (W / t**2)[:, None, None]
    pos = (f(w) * jac * wt[:, None, None]).sum(axis=0)
    neg = (f(-w) * jac * wt[:, None, None]).sum(axis=0)
    return pos + neg


# --- serialization -----------------------------------------------------------

def save_spectrum(spec: Spectrum, path) -> None:
    """CSV (frequency [Hz], value) plus a JSON sidecar with the same stem."""
    path = Path(path)
    data = np.column_stack([spec.grid.hz, spec.values])
    np.savetxt(path, data, delimiter=",", header="frequency_hz,value", comments="", fmt="%.17g")
    side = {
        "schema_version": SCHEMA_VERSION,
        "kind": spec.kind,
        "normalization": spec.normalization,
        "grid": {"start_hz": float(spec.grid.hz[0]), "stop_hz": float(spec.grid.hz[-1]),
                 "n": int(len(spec.grid))},
        "metadata": spec.metadata,
    }
    path.with_suffix(".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")


def load_spectrum(path) -> Spectrum:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    side_path = path.with_suffix(".json")
    side = json.loads(side_path.read_text()) if side_path.exists() else {}
    grid = FrequencyGrid(TWO_PI * data[:, 0])
    return Spectrum(grid, data[:, 1], side.get("normalization", "shot-noise"),
                    side.get("kind", "heterodyne-full"), side.get("metadata", {}))
