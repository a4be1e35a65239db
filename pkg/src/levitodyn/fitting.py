"""Parameter inference from heterodyne spectra and decoherence-vs-pressure data."""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares, minimize

from .constants import DEFAULT_TEMPERATURE, TWO_PI
from .drift import build_drift, is_stable
from .noise import gamma_m_from_slope  # noqa: F401  (re-exported)
from .params import SCHEMA_VERSION, SystemParams
from .spectra import Spectrum, heterodyne_excess, sideband_asymmetry

log = logging.getLogger(__name__)

FIT_PARAMS = ("omega_x", "omega_y", "g_x", "g_y", "gamma_x", "gamma_y")
FIXED_PARAMS = ("detuning", "kappa", "eta", "omega_lo", "gamma_m")
_UNSTABLE_RESIDUAL = 1e6


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class FitConfig:
    """What to fit and how.

    ``base`` supplies the fixed parameters and, unless overridden in
    ``initial``, the starting point. ``initial`` and ``bounds`` are in rad/s.
    Bins are weighted with ``sigma = S / sqrt(n_avg)``, the scatter of an
    average of ``n_avg`` periodograms. The first pass takes ``S`` from the
    data; each of ``reweight`` further passes takes it from the model at the
    previous optimum, which removes the low bias of data-derived weights.
    """

    base: SystemParams
    free: tuple = FIT_PARAMS
    initial: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    n_avg: float = 1.0
    amplitude: bool = False
    gtol: float = 1e-14
    xtol: float = 1e-14
    ftol: float = 1e-14
    max_nfev: int = 2000
    diff_step: float = 1e-6
    reweight: int = 2

    def __post_init__(self):
        object.__setattr__(self, "free", tuple(self.free))
        bad = set(self.free) - set(FIT_PARAMS)
        if bad:
            raise ValueError(f"cannot fit {sorted(bad)}; free parameters must come from {FIT_PARAMS}")
        if len(set(self.free)) != len(self.free) or not self.free:
            raise ValueError("free parameters must be non-empty and unique")
        if not self.n_avg > 0:
            raise ValueError("n_avg must be > 0")
        if self.reweight < 0:
            raise ValueError("reweight must be >= 0")
        for name, x0 in self.start().items():
            lo, hi = self.bound(name)
            if not lo <= x0 <= hi:
                raise ValueError(f"initial {name} = {x0} outside bounds [{lo}, {hi}]")

    def start(self) -> dict:
        return {k: float(self.initial.get(k, getattr(self.base, k))) for k in self.free}

    def bound(self, name) -> tuple[float, float]:
        return tuple(float(v) for v in self.bounds.get(name, (0.0, np.inf)))

    def with_eta(self, eta: float, initial: dict | None = None) -> "FitConfig":
        from dataclasses import replace
        return replace(self, base=self.base.replace(eta=eta),
                       initial=dict(initial) if initial is not None else self.initial)


@dataclass(frozen=True, eq=False)
class FitResult:
    params: SystemParams
    values: dict
    sigmas: dict
    chi2: float
    reduced_chi2: float
    dof: int
    success: bool
    status: str
    nfev: int
    residuals: np.ndarray
    at_bound: dict
    swapped: bool = False
    amplitude: float = 1.0
    amplitude_sigma: float = 0.0
    cost_history: tuple = ()
    rejected_unstable: int = 0

    def to_dict(self) -> dict:
        hz = lambda d: {f"{k}_hz": v / TWO_PI for k, v in d.items()}
        return {
            "schema_version": SCHEMA_VERSION,
            "params": self.params.to_hz_dict(),
            "fitted": hz(self.values),
            "sigma": hz(self.sigmas),
            "chi2": self.chi2,
            "reduced_chi2": self.reduced_chi2,
            "dof": self.dof,
            "success": self.success,
            "status": self.status,
            "nfev": self.nfev,
            "at_bound": self.at_bound,
            "swapped": self.swapped,
            "amplitude": self.amplitude,
            "amplitude_sigma": self.amplitude_sigma,
            "rejected_unstable": self.rejected_unstable,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def model_spectrum(params: SystemParams, omegas, amplitude: float = 1.0) -> np.ndarray:
    """Heterodyne model at absolute frequencies ``omegas`` (no coverage check)."""
    return 1.0 + amplitude * heterodyne_excess(params, omegas)


def _check_coverage(data: Spectrum, p: SystemParams):
    w = data.grid.omegas
    lo = min(p.omega_x, p.omega_y) - p.kappa
    hi = max(p.omega_x, p.omega_y) + p.kappa
    for side in (+1, -1):
        a, b = sorted((p.omega_lo + side * lo, p.omega_lo + side * hi))
        if w[0] <= a and w[-1] >= b:
            return
    raise ValueError("data must cover at least one full motional sideband")


class _Objective:
    """Weighted residuals in scaled coordinates ``u = theta / scale``."""

    def __init__(self, data: Spectrum, cfg: FitConfig):
        self.cfg = cfg
        self.w = data.grid.omegas
        self.y = data.values
        self._cache: dict[bytes, np.ndarray] = {}
        self.set_sigma(self.y)
        self.names = cfg.free + (("amplitude",) if cfg.amplitude else ())
        start = cfg.start()
        self.scale = np.array([abs(start[k]) or 1.0 for k in cfg.free] + ([1.0] if cfg.amplitude else []))
        lo = [cfg.bound(k)[0] for k in cfg.free] + ([0.0] if cfg.amplitude else [])
        hi = [cfg.bound(k)[1] for k in cfg.free] + ([np.inf] if cfg.amplitude else [])
        self.lo = np.array(lo) / self.scale
        self.hi = np.array(hi) / self.scale
        self.u0 = np.array([start[k] for k in cfg.free] + ([1.0] if cfg.amplitude else [])) / self.scale
        self.rejected = 0
        self.history: list[float] = []

    def set_sigma(self, level) -> None:
        sigma = np.abs(level) / np.sqrt(self.cfg.n_avg)
        if np.any(sigma <= 0):
            raise ValueError("spectrum values must be non-zero to derive bin weights")
        self.sigma = sigma
        self._cache.clear()

    def params_at(self, u) -> tuple[SystemParams, float]:
        theta = np.asarray(u) * self.scale
        n = len(self.cfg.free)
        p = self.cfg.base.replace(**{k: float(v) for k, v in zip(self.cfg.free, theta[:n])})
        return p, (float(theta[n]) if self.cfg.amplitude else 1.0)

    def __call__(self, u) -> np.ndarray:
        key = np.asarray(u, float).tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        try:
            p, amp = self.params_at(u)
            ok = is_stable(build_drift(p))
        except ValueError:
            ok = False
        if ok:
            r = (model_spectrum(p, self.w, amp) - self.y) / self.sigma
        else:
            self.rejected += 1
            log.debug("rejected unstable trial %s", u * self.scale)
            r = np.full(self.y.size, _UNSTABLE_RESIDUAL)
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[key] = r
        return r

    def jac(self, u) -> np.ndarray:
        # least_squares asks for J only at accepted iterates: log the cost there
        u = np.asarray(u, float)
        r0 = self(u)
        self.history.append(0.5 * float(r0 @ r0))
        J = np.empty((r0.size, u.size))
        for i in range(u.size):
            h = self.cfg.diff_step * max(abs(u[i]), 1.0)
            up, um = u.copy(), u.copy()
            up[i] += h
            um[i] -= h
            # stay feasible near a bound
            if up[i] > self.hi[i]:
                up[i] = u[i]
            if um[i] < self.lo[i]:
                um[i] = u[i]
            J[:, i] = (self(up) - self(um)) / (up[i] - um[i])
        return J

    def cost(self, u) -> float:
        r = self(np.clip(u, self.lo, self.hi))
        return 0.5 * float(r @ r)


def _lsq(obj: _Objective, u0):
    cfg = obj.cfg
    return least_squares(obj, u0, jac=obj.jac, bounds=(obj.lo, obj.hi), method="trf",
                         x_scale=1.0, gtol=cfg.gtol, xtol=cfg.xtol, ftol=cfg.ftol,
                         max_nfev=cfg.max_nfev)


def _minimize(obj, u0):
    """Trust-region run; on a stall, a simplex restart and a second polish."""
    obj.history.clear()
    res = _lsq(obj, u0)
    if res.status <= 0 or not res.success:
        log.info("trust-region fit stalled (%s); simplex restart", res.message)
        nm = minimize(obj.cost, res.x, method="Nelder-Mead",
                      options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000, "adaptive": True})
        res2 = _lsq(obj, np.clip(nm.x, obj.lo, obj.hi))
        if res2.cost <= res.cost:
            res2.nfev += res.nfev + nm.nfev
            res = res2
    return res


def fit_spectrum(data: Spectrum, cfg: FitConfig) -> FitResult:
    """Weighted least-squares fit of the heterodyne model to ``data``.

    Trust-region reflective steps with a central-difference Jacobian. If a
    run stalls, a Nelder-Mead restart is followed by a second trust-region
    polish. ``cost_history`` covers the final weighting pass.
    """
    if data.normalization != "shot-noise":
        raise ValueError("data must be shot-noise normalized")
    if not np.all(np.isfinite(data.values)):
        raise ValueError("data contains non-finite values")
    _check_coverage(data, cfg.base.replace(**cfg.start()))
    obj = _Objective(data, cfg)
    if obj.cost(obj.u0) >= 0.5 * obj.y.size * _UNSTABLE_RESIDUAL**2:
        raise FitError("initial parameters give an unstable system")

    res = _minimize(obj, obj.u0)
    nfev = res.nfev
    for _ in range(cfg.reweight):
        p, amp = obj.params_at(res.x)
        obj.set_sigma(model_spectrum(p, obj.w, amp))
        res = _minimize(obj, res.x)
        nfev += res.nfev

    u = res.x
    p, amp = obj.params_at(u)
    r = obj(u)
    chi2 = float(r @ r)
    J = obj.jac(u)
    obj.history.pop()  # the final jac call is not an optimizer step
    try:
        cov_u = np.linalg.inv(J.T @ J)
        sig = np.sqrt(np.clip(np.diag(cov_u), 0, None)) * obj.scale
    except np.linalg.LinAlgError:
        sig = np.full(u.size, np.inf)

    names = obj.names
    theta = u * obj.scale
    at_bound = {}
    for i, k in enumerate(names):
        tol = 1e-8 * max(abs(theta[i]), 1.0)
        at_bound[k] = bool(abs(theta[i] - obj.lo[i] * obj.scale[i]) <= tol
                           or abs(theta[i] - obj.hi[i] * obj.scale[i]) <= tol)
    if any(at_bound.values()):
        log.warning("parameters at bound: %s", [k for k, v in at_bound.items() if v])

    values = {k: float(getattr(p, k)) for k in cfg.free}
    sigmas = {k: float(s) for k, s in zip(cfg.free, sig)}
    swapped = False
    if p.omega_x < p.omega_y:
        p = p.swap_axes()
        swapped = True
        pair = {"omega_x": "omega_y", "omega_y": "omega_x", "g_x": "g_y", "g_y": "g_x",
                "gamma_x": "gamma_y", "gamma_y": "gamma_x"}
        values = {pair[k]: v for k, v in values.items()}
        sigmas = {pair[k]: v for k, v in sigmas.items()}
        at_bound = {pair.get(k, k): v for k, v in at_bound.items()}
    dof = max(r.size - u.size, 1)
    return FitResult(
        params=p, values=values, sigmas=sigmas, chi2=chi2, reduced_chi2=chi2 / dof, dof=dof,
        success=bool(res.success), status=str(res.message), nfev=int(nfev),
        residuals=r, at_bound=at_bound, swapped=swapped,
        amplitude=amp, amplitude_sigma=float(sig[-1]) if cfg.amplitude else 0.0,
        cost_history=tuple(obj.history), rejected_unstable=obj.rejected,
    )


# --- decoherence vs pressure -------------------------------------------------

class RankDeficiencyError(ValueError):
    pass


@dataclass(frozen=True)
class LinearFit:
    """``Gamma/2pi = a + b P``; a in Hz, b in Hz/Pa."""

    a: float
    b: float
    sigma_a: float
    sigma_b: float
    cov_ab: float
    chi2: float
    dof: int
    residuals: tuple = ()

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "a_hz": self.a, "b_hz_per_pa": self.b,
                "sigma_a_hz": self.sigma_a, "sigma_b_hz_per_pa": self.sigma_b,
                "cov_ab_hz2_per_pa": self.cov_ab, "chi2": self.chi2, "dof": self.dof}


def regress_gamma_vs_pressure(points) -> LinearFit:
    """Weighted straight-line fit of decoherence rate against pressure.

    ``points`` is an iterable of ``(P [Pa], Gamma [rad/s], sigma_Gamma [rad/s])``.
    Uncertainties are absolute (the sigmas are taken at face value).
    """
    arr = np.asarray(list(points), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("points must be (pressure, gamma, sigma) triples")
    P, G, s = arr.T
    G = G / TWO_PI
    s = s / TWO_PI
    if np.any(s <= 0):
        raise ValueError("sigmas must be > 0")
    if np.unique(P).size < 2:
        raise RankDeficiencyError("need at least two distinct pressures")
    if P.size < 3 or P.max() < 10 * max(P.min(), np.finfo(float).tiny):
        warnings.warn("fewer than 3 points or less than one decade of pressure", stacklevel=2)
    w = 1.0 / s
    X = np.column_stack([np.ones_like(P), P]) * w[:, None]
    coef, *_ = np.linalg.lstsq(X, G * w, rcond=None)
    cov = np.linalg.inv(X.T @ X)
    res = G - coef[0] - coef[1] * P
    chi2 = float(np.sum((res * w) ** 2))
    return LinearFit(float(coef[0]), float(coef[1]), float(np.sqrt(cov[0, 0])),
                     float(np.sqrt(cov[1, 1])), float(cov[0, 1]), chi2, int(P.size - 2),
                     tuple(res.tolist()))


def ratio_with_error(x: float, sx: float, y: float, sy: float) -> tuple[float, float]:
    """``x / y`` with first-order uncorrelated error propagation."""
    r = x / y
    return r, abs(r) * float(np.hypot(sx / x, sy / y))


def read_regression_csv(path) -> list[tuple[float, float, float]]:
    """Rows of ``pressure_pa, gamma_hz, sigma_hz`` (header line optional)."""
    pts = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        cells = [c.strip() for c in line.split(",")]
        try:
            P, g, s = (float(c) for c in cells[:3])
        except ValueError:
            continue  # header
        pts.append((P, TWO_PI * g, TWO_PI * s))
    if not pts:
        raise ValueError(f"{path}: no data rows")
    return pts


# --- detection-efficiency scan ----------------------------------------------

@dataclass(frozen=True, eq=False)
class EfficiencyScan:
    etas: np.ndarray
    chi2_spectrum: np.ndarray
    chi2_asymmetry: np.ndarray
    fits: tuple

    @property
    def best_eta_spectrum(self) -> float:
        return float(self.etas[np.nanargmin(self.chi2_spectrum)])

    @property
    def best_eta_asymmetry(self) -> float:
        return float(self.etas[np.nanargmin(self.chi2_asymmetry)])

    def rows(self):
        return list(zip(self.etas.tolist(), self.chi2_spectrum.tolist(), self.chi2_asymmetry.tolist()))


def asymmetry_chi2(params: SystemParams, asym: Spectrum, sigma=1.0) -> float:
    # mask from the data only; the model is unfloored so eta cancels exactly
    model = sideband_asymmetry(params, asym.grid, floor=0.0).values
    ok = np.isfinite(model) & np.isfinite(asym.values)
    if not ok.any():
        return float("nan")
    sig = np.broadcast_to(np.asarray(sigma, float), asym.values.shape)
    return float(np.sum(((model[ok] - asym.values[ok]) / sig[ok]) ** 2))


def efficiency_scan(data_pair: tuple[Spectrum, Spectrum], etas, cfg: FitConfig,
                    refit: bool = True, asym_sigma=1.0) -> EfficiencyScan:
    """Chi-square of the spectrum fit and of the implied asymmetry versus eta.

    At each eta the free parameters are refitted to the spectrum (warm
    started from the previous point); the asymmetry chi-square uses those
    parameters. With ``refit=False`` the parameters stay at ``cfg``'s start
    and only eta changes, so the asymmetry curve is flat.
    """
    spec, asym = data_pair
    etas = np.asarray(etas, dtype=float)
    if etas.size == 0 or np.any(etas <= 0) or np.any(etas > 1):
        raise ValueError("eta grid must be non-empty and inside (0, 1]")
    c_spec = np.full(etas.size, np.nan)
    c_asym = np.full(etas.size, np.nan)
    fits = []
    warm = cfg.start()
    for i, eta in enumerate(etas):
        if refit:
            try:
                fr = fit_spectrum(spec, cfg.with_eta(float(eta), warm))
            except (FitError, ValueError) as exc:
                log.warning("eta = %.4g: fit failed (%s)", eta, exc)
                fits.append(None)
                continue
            p = fr.params
            c_spec[i] = fr.chi2
            warm = {k: getattr(p, k) for k in cfg.free}
            fits.append(fr)
        else:
            p = cfg.base.replace(eta=float(eta), **cfg.start())
            obj = _Objective(spec, cfg.with_eta(float(eta)))
            c_spec[i] = 2 * obj.cost(obj.u0)
            fits.append(None)
        c_asym[i] = asymmetry_chi2(p, asym, asym_sigma)
    return EfficiencyScan(etas, c_spec, c_asym, tuple(fits))
