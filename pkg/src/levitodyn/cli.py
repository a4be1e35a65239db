"""Command-line interface: ``levitodyn <command> [options]``.

Exit codes: 0 success, 2 bad arguments or config, 3 unstable system,
4 fit failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .constants import TWO_PI
from .drift import UnstableSystemError, build_drift, eigenmodes, require_stable
from .fitting import (
    FIT_PARAMS,
    FitConfig,
    FitError,
    efficiency_scan,
    fit_spectrum,
    gamma_m_from_slope,
    read_regression_csv,
    regress_gamma_vs_pressure,
)
from .noise import LinearDecoherenceLaw
from .occupancy import occupancy_profile, steady_covariance
from .params import SCHEMA_VERSION, dump_config, load_config
from .presets import LINEAR_LAW, PRESETS, preset
from .psd import TimeSeries, normalize_to_shot_noise, synthesize, welch_psd_file, write_time_series
from .spectra import (
    FrequencyGrid,
    Spectrum,
    heterodyne_excess,
    load_spectrum,
    output_spectrum,
    save_spectrum,
    sideband_asymmetry,
)
from .sweep import OUTPUTS, SweepSpec, asymmetry_grid, run_sweep, save_archive, save_profile_csv

EXIT_OK, EXIT_ARGS, EXIT_UNSTABLE, EXIT_FIT, EXIT_IO = 0, 2, 3, 4, 5

log = logging.getLogger("levitodyn")


class UsageError(ValueError):
    pass


# --- helpers -----------------------------------------------------------------

def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _law_from_extras(extras: dict) -> LinearDecoherenceLaw:
    keys = ("a_x_hz", "a_y_hz", "b_x_hz_per_pa", "b_y_hz_per_pa")
    if all(k in extras for k in keys):
        return LinearDecoherenceLaw(*(extras[k] for k in keys))
    return LINEAR_LAW


def _g_max(extras):
    return TWO_PI * extras["g_max_hz"] if "g_max_hz" in extras else None


def load_params(args):
    """Parameters from --config or --preset, then flag overrides."""
    if args.config and args.preset:
        raise UsageError("use either --config or --preset")
    if args.config:
        params, extras = load_config(args.config)
    elif args.preset:
        try:
            params, extras = preset(args.preset), {}
        except KeyError as exc:
            raise UsageError(str(exc)) from None
    else:
        raise UsageError("a parameter set is required (--config or --preset)")
    if args.detuning_khz is not None:
        params = SweepSpec("detuning", (args.detuning_khz,), params).point(args.detuning_khz)
    if args.pressure_pa is not None:
        if args.pressure_pa < 0:
            raise UsageError("--pressure-pa must be >= 0")
        spec = SweepSpec("pressure", (args.pressure_pa,), params, law=_law_from_extras(extras))
        params = spec.point(args.pressure_pa)
    if args.angle_deg is not None:
        spec = SweepSpec("angle", (args.angle_deg,), params, g_max=_g_max(extras))
        params = spec.point(args.angle_deg)
    if args.eta is not None:
        params = params.replace(eta=args.eta)
    return params, extras


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _modes_doc(params):
    es = eigenmodes(build_drift(params))
    c, w = es.positive_modes()
    return {"schema_version": SCHEMA_VERSION, "stable": es.stable,
            "centers_hz": (c / TWO_PI).tolist(), "widths_hz": (w / TWO_PI).tolist(),
            "params": params.to_hz_dict()}


def _parse_values(text: str) -> list[float]:
    """``start:stop:num`` (inclusive linspace) or a comma list."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            return np.linspace(float(a), float(b), int(n)).tolist()
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse sweep values {text!r}") from None


# --- commands ----------------------------------------------------------------

def cmd_simulate(args):
    params, extras = load_params(args)
    require_stable(build_drift(params))
    out = _out_dir(args)
    grid = FrequencyGrid.default(params, args.grid)
    spec = output_spectrum(params, grid)
    if args.noise:
        rng = np.random.default_rng(args.seed)
        noisy = spec.values * (1 + args.noise * rng.standard_normal(spec.values.size))
        meta = dict(spec.metadata, noise=args.noise, seed=args.seed)
        spec = Spectrum(spec.grid, noisy, "shot-noise", "heterodyne-full", meta)
    save_spectrum(spec, out / "spectrum.csv")
    _write_json(out / "modes.json", _modes_doc(params))
    dump_config(params, out / "params.cfg", extras)
    if args.timeseries:
        rate = args.sample_rate
        ts_params = params
        fn = lambda f: 1.0 + heterodyne_excess(ts_params, TWO_PI * np.asarray(f))
        rng = np.random.default_rng(args.seed)
        x = synthesize(fn, rate, args.timeseries, rng)
        write_time_series(TimeSeries(rate, x, {"params_hash": params.fingerprint(), "seed": args.seed}),
                          out / "timeseries.bin")
    return EXIT_OK


def cmd_asymmetry(args):
    params, _ = load_params(args)
    require_stable(build_drift(params))
    out = _out_dir(args)
    asym = sideband_asymmetry(params, asymmetry_grid(params, args.grid))
    save_spectrum(asym, out / "asymmetry.csv")
    return EXIT_OK


def cmd_occupancy(args):
    params, _ = load_params(args)
    sys_ = build_drift(params)
    require_stable(sys_)
    out = _out_dir(args)
    prof = occupancy_profile(params, args.samples, steady_covariance(sys_))
    save_profile_csv((prof.phis, prof.values), out / "occupancy.csv")
    doc = {"schema_version": SCHEMA_VERSION, "params": params.to_hz_dict()}
    doc.update(prof.summary())
    _write_json(out / "occupancy.json", doc)
    return EXIT_OK


def _fit_config(args, params):
    free = tuple(args.free.split(",")) if args.free else FIT_PARAMS
    return FitConfig(base=params, free=free, n_avg=args.n_avg, amplitude=args.amplitude)


def cmd_fit(args):
    params, extras = load_params(args)
    out = _out_dir(args)
    data = load_spectrum(args.data)
    try:
        cfg = _fit_config(args, params)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.eta_scan:
        asym = load_spectrum(args.asymmetry) if args.asymmetry else sideband_asymmetry(
            params, asymmetry_grid(params))
        scan = efficiency_scan((data, asym), _parse_values(args.eta_scan), cfg)
        with open(out / "eta_scan.csv", "w") as fh:
            fh.write("eta,chi2_spectrum,chi2_asymmetry\n")
            for row in scan.rows():
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
        _write_json(out / "eta_scan.json", {"schema_version": SCHEMA_VERSION,
                                            "best_eta_spectrum": scan.best_eta_spectrum,
                                            "best_eta_asymmetry": scan.best_eta_asymmetry})
        return EXIT_OK
    res = fit_spectrum(data, cfg)
    res.save(out / "fit.json")
    dump_config(res.params, out / "fitted.cfg", extras)
    if not res.success:
        log.error("fit did not converge: %s", res.status)
        return EXIT_FIT
    return EXIT_OK


def cmd_regress(args):
    out = _out_dir(args)
    pts = read_regression_csv(args.data)
    fit = regress_gamma_vs_pressure(pts)
    doc = fit.to_dict()
    if args.omega_khz:
        doc["gamma_m_per_pa_hz"] = gamma_m_from_slope(fit.b, TWO_PI * 1e3 * args.omega_khz, args.temperature)
    _write_json(out / "regress.json", doc)
    return EXIT_OK


def cmd_sweep(args):
    params, extras = load_params(args)
    outputs = tuple(args.outputs.split(","))
    try:
        spec = SweepSpec(args.variable, _parse_values(args.values), params, outputs,
                         g_max=_g_max(extras), law=_law_from_extras(extras),
                         n_spectrum=args.grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    records = run_sweep(spec, workers=args.workers)
    save_archive(spec, records, _out_dir(args))
    return EXIT_OK


def cmd_psd(args):
    out = _out_dir(args)
    psd = welch_psd_file(args.input, args.segment, args.overlap, args.window)
    save_spectrum(psd, out / "psd.csv")
    return EXIT_OK


def cmd_normalize(args):
    out = _out_dir(args)
    psd = load_spectrum(args.input)
    norm = normalize_to_shot_noise(psd, (args.band[0], args.band[1]))
    save_spectrum(norm, out / "normalized.csv")
    return EXIT_OK


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="parameter file (key = value or .json)")
    common.add_argument("--preset", help=f"named parameter set: {', '.join(sorted(PRESETS))}")
    common.add_argument("--out-dir", default=".", help="directory for output artifacts")
    common.add_argument("--grid", type=int, default=None, help="number of frequency points")
    common.add_argument("--seed", type=int, default=0, help="random seed")
    common.add_argument("--eta", type=float, help="override detection efficiency")
    common.add_argument("--detuning-khz", type=float, help="override detuning Delta/2pi [kHz]")
    common.add_argument("--angle-deg", type=float, help="polarization angle theta [deg]")
    common.add_argument("--pressure-pa", type=float, help="pressure [Pa] for the decoherence law")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="levitodyn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="heterodyne spectrum and eigenmodes")
    s.add_argument("--noise", type=float, default=0.0, help="relative multiplicative noise")
    s.add_argument("--timeseries", type=int, default=0, help="also synthesize N photocurrent samples")
    s.add_argument("--sample-rate", type=float, default=4e6, help="sample rate for --timeseries [Hz]")
    s.set_defaults(func=cmd_simulate, grid_default=2**16)

    s = sub.add_parser("asymmetry", parents=[common], help="corrected sideband asymmetry")
    s.set_defaults(func=cmd_asymmetry, grid_default=2048)

    s = sub.add_parser("occupancy", parents=[common], help="n_eff versus direction")
    s.add_argument("--samples", type=int, default=720)
    s.set_defaults(func=cmd_occupancy, grid_default=None)

    s = sub.add_parser("fit", parents=[common], help="fit the model to a spectrum")
    s.add_argument("--data", required=True, help="shot-noise-normalized spectrum CSV")
    s.add_argument("--free", help=f"comma list from {','.join(FIT_PARAMS)}")
    s.add_argument("--n-avg", type=float, default=1.0, help="periodograms per bin (weights)")
    s.add_argument("--amplitude", action="store_true", help="fit an overall amplitude")
    s.add_argument("--eta-scan", help="eta grid start:stop:num or list")
    s.add_argument("--asymmetry", help="measured asymmetry CSV for --eta-scan")
    s.set_defaults(func=cmd_fit, grid_default=None)

    s = sub.add_parser("regress", parents=[common], help="decoherence rate versus pressure")
    s.add_argument("--data", required=True, help="CSV of pressure_pa,gamma_hz,sigma_hz")
    s.add_argument("--omega-khz", type=float, help="mode frequency for the gas-damping estimate")
    s.add_argument("--temperature", type=float, default=293.0)
    s.set_defaults(func=cmd_regress, grid_default=None)

    s = sub.add_parser("sweep", parents=[common], help="sweep detuning, angle or pressure")
    s.add_argument("--variable", required=True, choices=("detuning", "angle", "pressure"))
    s.add_argument("--values", required=True, help="start:stop:num or comma list (kHz, deg, Pa)")
    s.add_argument("--outputs", default="occupancy", help=f"comma list from {','.join(OUTPUTS)}")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_sweep, grid_default=2**14)

    s = sub.add_parser("psd", parents=[common], help="Welch PSD of a time series")
    s.add_argument("--input", required=True, help="time series (.bin or .csv)")
    s.add_argument("--segment", type=int, help="segment length (default: <= 50 Hz bins)")
    s.add_argument("--overlap", type=float, default=0.5)
    s.add_argument("--window", default="hann")
    s.set_defaults(func=cmd_psd, grid_default=None)

    s = sub.add_parser("normalize", parents=[common], help="normalize a PSD to shot noise")
    s.add_argument("--input", required=True, help="raw PSD CSV")
    s.add_argument("--band", type=float, nargs=2, required=True, metavar=("LO_HZ", "HI_HZ"))
    s.set_defaults(func=cmd_normalize, grid_default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.grid is None:
        args.grid = args.grid_default
    elif args.grid < 16:
        print("error: --grid must be >= 16", file=sys.stderr)
        return EXIT_ARGS
    try:
        return args.func(args)
    except UnstableSystemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except FitError as exc:
        print(f"error: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
