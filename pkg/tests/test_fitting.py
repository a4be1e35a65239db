import json
import numpy as np
import pytest

from levitodyn import FrequencyGrid, Spectrum, sideband_asymmetry
from levitodyn.constants import TWO_PI
from levitodyn.fitting import (FIT_PARAMS, FitConfig, FitError, RankDeficiencyError, _Objective,
                               efficiency_scan, fit_spectrum, model_spectrum, ratio_with_error,
                               read_regression_csv, regress_gamma_vs_pressure)
from levitodyn.presets import LINEAR_LAW, LINEAR_LAW_SIGMA
from levitodyn.sweep import asymmetry_grid


def anti_stokes_grid(p, n=6000):
    return FrequencyGrid.from_hz(p.omega_lo / TWO_PI + 50e3, p.omega_lo / TWO_PI + 200e3, n)


def synth(p, grid=None, noise=0.0, seed=0):
    grid = grid or anti_stokes_grid(p)
    y = model_spectrum(p, grid.omegas)
    if noise:
        y = y * (1 + noise * np.random.default_rng(seed).standard_normal(y.size))
    return Spectrum(grid, y)


def perturbed(p, rel=3e-3):
    return {k: getattr(p, k) * (1 + rel * (-1) ** i) for i, k in enumerate(FIT_PARAMS)}


@pytest.mark.parametrize("name", ["strong", "theory", "balanced"])
def test_noiseless_recovery(request, name):
    p = request.getfixturevalue(name)
    res = fit_spectrum(synth(p), FitConfig(base=p, initial=perturbed(p), n_avg=1e4))
    assert res.success
    for k in FIT_PARAMS:
        assert res.values[k] == pytest.approx(getattr(p, k), rel=1e-6), k
    assert not res.swapped
    assert res.chi2 < 1e-10


def test_cost_decreases_monotonically(strong):
    res = fit_spectrum(synth(strong, noise=0.01, seed=3), FitConfig(base=strong, initial=perturbed(strong, 1e-2), n_avg=1e4))
    h = np.array(res.cost_history)
    assert h.size >= 3
    assert np.all(np.diff(h) <= 0)


def test_fit_is_deterministic(strong):
    data = synth(strong, noise=0.01, seed=4)
    cfg = FitConfig(base=strong, initial=perturbed(strong), n_avg=1e4)
    a, b = fit_spectrum(data, cfg), fit_spectrum(data, cfg)
    assert a.to_dict() == b.to_dict()
    np.testing.assert_array_equal(a.residuals, b.residuals)


def test_model_reweighting_reduces_bias(strong):
    # data-derived weights pull decoherence rates low; model weights do not
    starts = perturbed(strong)
    bias = {}
    for passes in (0, 2):
        pulls = []
        for seed in range(6):
            res = fit_spectrum(synth(strong, noise=0.01, seed=100 + seed),
                               FitConfig(base=strong, initial=starts, n_avg=1e4, reweight=passes))
            pulls.append((res.values["gamma_x"] - strong.gamma_x) / res.sigmas["gamma_x"])
        bias[passes] = np.mean(pulls)
    assert abs(bias[2]) < abs(bias[0])


def test_noisy_recovery_within_three_sigma(strong):
    res = fit_spectrum(synth(strong, noise=0.01, seed=11), FitConfig(base=strong, initial=perturbed(strong), n_avg=1e4))
    assert abs(res.values["g_x"] - strong.g_x) < 3 * res.sigmas["g_x"]
    assert res.values["g_x"] / TWO_PI == pytest.approx(24.7e3, rel=0.01)
    assert 0.8 < res.reduced_chi2 < 1.2
    assert all(s > 0 for s in res.sigmas.values())


def test_near_equal_couplings(balanced):
    res = fit_spectrum(synth(balanced, noise=0.01, seed=2), FitConfig(base=balanced, initial=perturbed(balanced), n_avg=1e4))
    gx, gy = res.values["g_x"] / TWO_PI, res.values["g_y"] / TWO_PI
    assert gx == pytest.approx(13.8e3, rel=0.02) and gy == pytest.approx(14.8e3, rel=0.02)


def test_axis_labels_enforced(strong):
    swapped = strong.swap_axes()
    init = {k: getattr(swapped, k) * 1.001 for k in FIT_PARAMS}
    res = fit_spectrum(synth(strong), FitConfig(base=swapped, initial=init, n_avg=1e4))
    assert res.swapped
    assert res.params.omega_x > res.params.omega_y
    assert res.values["omega_x"] == pytest.approx(strong.omega_x, rel=1e-6)
    assert res.values["g_x"] == pytest.approx(strong.g_x, rel=1e-6)


def test_bound_flag(strong):
    hi = strong.g_y * 0.9
    cfg = FitConfig(base=strong, initial={"g_y": 0.8 * strong.g_y}, bounds={"g_y": (0.0, hi)}, n_avg=1e4)
    res = fit_spectrum(synth(strong), cfg)
    assert res.at_bound["g_y"]
    assert res.values["g_y"] <= hi


def test_partial_free_set(strong):
    cfg = FitConfig(base=strong.replace(g_x=strong.g_x * 1.01), free=("g_x",), n_avg=1e4)
    res = fit_spectrum(synth(strong), cfg)
    assert set(res.values) == {"g_x"}
    assert res.values["g_x"] == pytest.approx(strong.g_x, rel=1e-8)


def test_amplitude_nuisance(strong):
    g = anti_stokes_grid(strong)
    data = Spectrum(g, model_spectrum(strong, g.omegas, amplitude=0.8))
    cfg = FitConfig(base=strong, free=("g_x", "omega_x"), amplitude=True, n_avg=1e4)
    res = fit_spectrum(data, cfg)
    assert res.amplitude == pytest.approx(0.8, rel=1e-6)


def test_unstable_trials_penalized(strong):
    obj = _Objective(synth(strong), FitConfig(base=strong, n_avg=1e4))
    bad = obj.u0.copy()
    bad[FIT_PARAMS.index("g_x")] *= 100
    r = obj(bad)
    assert obj.rejected == 1 and np.all(r == r[0]) and r[0] > 1e5


def test_unstable_start_raises(strong):
    p = strong.replace(g_x=strong.g_x * 100)
    with pytest.raises(FitError):
        fit_spectrum(synth(strong), FitConfig(base=p, n_avg=1e4))


def test_preconditions(strong):
    data = synth(strong)
    with pytest.raises(ValueError, match="normalized"):
        fit_spectrum(Spectrum(data.grid, data.values, "raw", "psd"), FitConfig(base=strong))
    narrow = FrequencyGrid.from_hz(0.95e6, 0.96e6, 100)
    with pytest.raises(ValueError, match="sideband"):
        fit_spectrum(Spectrum(narrow, np.ones(100)), FitConfig(base=strong))
    with pytest.raises(ValueError):
        FitConfig(base=strong, free=("kappa",))
    with pytest.raises(ValueError):
        FitConfig(base=strong, reweight=-1)
    with pytest.raises(ValueError):
        FitConfig(base=strong, bounds={"g_x": (0, strong.g_x / 2)})


def test_result_json(tmp_path, strong):
    res = fit_spectrum(synth(strong), FitConfig(base=strong, free=("g_x",), n_avg=1e4))
    res.save(tmp_path / "fit.json")
    doc = json.loads((tmp_path / "fit.json").read_text())
    assert doc["schema_version"] == 1
    assert doc["fitted"]["g_x_hz"] == pytest.approx(24.7e3, rel=1e-8)


# --- regression ------------------------------------------------------------

def test_two_points_exact():
    with pytest.warns(UserWarning):
        fit = regress_gamma_vs_pressure([(1e-6, TWO_PI * 3.0e3, 1.0), (1e-5, TWO_PI * 10.0e3, 1.0)])
    b = 7e3 / 9e-6
    assert fit.b == pytest.approx(b, rel=1e-12)
    assert fit.a == pytest.approx(3e3 - b * 1e-6, rel=1e-12)
    assert fit.chi2 == pytest.approx(0.0, abs=1e-12)


def test_exact_linear_data_residuals():
    P = np.logspace(-6, -3, 12)
    G = 2.79e3 + 7.05e8 * P
    fit = regress_gamma_vs_pressure(zip(P, TWO_PI * G, TWO_PI * 0.01 * G))
    assert np.max(np.abs(fit.residuals) / G) < 1e-12
    assert fit.a == pytest.approx(2.79e3, rel=1e-10) and fit.b == pytest.approx(7.05e8, rel=1e-12)


def test_rank_deficient():
    with pytest.raises(RankDeficiencyError):
        regress_gamma_vs_pressure([(1e-5, 1.0, 1.0)] * 4)


def test_few_points_warn():
    with pytest.warns(UserWarning):
        regress_gamma_vs_pressure([(1e-5, 1.0, 1.0), (2e-5, 2.0, 1.0)])


def test_noisy_round_trip():
    rng = np.random.default_rng(7)
    P = np.logspace(-6, -3, 15)
    G = 2.79e3 + 7.05e8 * P
    s = 0.05 * G
    obs = G + s * rng.standard_normal(P.size)
    fit = regress_gamma_vs_pressure(zip(P, TWO_PI * obs, TWO_PI * s))
    assert abs(fit.a - 2.79e3) < 3 * fit.sigma_a
    assert abs(fit.b - 7.05e8) < 3 * fit.sigma_b


def test_intercept_ratio():
    r, s = ratio_with_error(LINEAR_LAW.a_x, LINEAR_LAW_SIGMA["a_x"], LINEAR_LAW.a_y, LINEAR_LAW_SIGMA["a_y"])
    assert abs(r - 1.42) <= 0.14
    assert s == pytest.approx(r * np.hypot(0.06 / 2.79, 0.15 / 1.97), rel=1e-12)


def test_regression_csv(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("pressure_pa,gamma_hz,sigma_hz\n1e-6,3000,30\n1e-5,9000,90\n# note\n1e-4,70000,700\n")
    pts = read_regression_csv(path)
    assert len(pts) == 3 and pts[0][1] == pytest.approx(TWO_PI * 3000)


# --- efficiency scan ------------------------------------------------------------

@pytest.fixture(scope="module")
def scan_data():
    from levitodyn.presets import strong_1d
    p = strong_1d()
    lo = p.omega_lo / TWO_PI
    full = FrequencyGrid.from_hz(lo - 200e3, lo + 200e3, 8001)
    spec = synth(p, full)
    asym = sideband_asymmetry(p, asymmetry_grid(p, 801))
    return p, spec, asym


def test_single_point_scan_equals_fit(scan_data):
    p, spec, asym = scan_data
    cfg = FitConfig(base=p, initial=perturbed(p), n_avg=1e4)
    scan = efficiency_scan((spec, asym), [0.4], cfg)
    direct = fit_spectrum(spec, cfg.with_eta(0.4))
    assert scan.chi2_spectrum[0] == pytest.approx(direct.chi2, rel=1e-9)


def test_scan_without_refit_flat_asymmetry(scan_data):
    p, spec, asym = scan_data
    cfg = FitConfig(base=p.replace(gamma_x=p.gamma_x * 1.1), n_avg=1e4)
    scan = efficiency_scan((spec, asym), [0.2, 0.3, 0.5], cfg, refit=False)
    np.testing.assert_allclose(scan.chi2_asymmetry, scan.chi2_asymmetry[0], rtol=1e-9)
    assert scan.chi2_spectrum.std() > 0


def test_scan_round_trip(scan_data):
    p, spec, asym = scan_data
    cfg = FitConfig(base=p, initial=perturbed(p), n_avg=1e4)
    etas = [0.2, 0.25, 0.295, 0.35, 0.4]
    scan = efficiency_scan((spec, asym), etas, cfg)
    assert abs(scan.best_eta_spectrum - 0.295) <= 0.05
    assert abs(scan.best_eta_asymmetry - 0.295) <= 0.05


def test_scan_rejects_bad_grid(scan_data):
    p, spec, asym = scan_data
    with pytest.raises(ValueError):
        efficiency_scan((spec, asym), [0.0, 0.5], FitConfig(base=p))
