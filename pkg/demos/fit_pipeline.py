"""Synthetic photocurrent -> Welch PSD -> shot-noise normalization -> model fit."""

import numpy as np

from levitodyn import Spectrum
from levitodyn.constants import TWO_PI
from levitodyn.fitting import FIT_PARAMS, FitConfig, fit_spectrum
from levitodyn.psd import TimeSeries, normalize_to_shot_noise, synthesize, welch_psd
from levitodyn.spectra import heterodyne_excess
from levitodyn.presets import strong_1d

truth = strong_1d()
fs, n, nperseg = 4e6, 1 << 22, 1 << 16
rng = np.random.default_rng(7)
x = synthesize(lambda f: 1.0 + heterodyne_excess(truth, TWO_PI * f), fs, n, rng)
psd = welch_psd(TimeSeries(fs, x), nperseg)
norm = normalize_to_shot_noise(psd, (1.4e6, 1.9e6))
print(f"{psd.metadata['n_segments']} segments, bin width {fs / nperseg:.1f} Hz")

lo = truth.omega_lo / TWO_PI
sel = (norm.grid.hz > lo + 50e3) & (norm.grid.hz < lo + 200e3)
data = Spectrum(type(norm.grid)(norm.grid.omegas[sel]), norm.values[sel])

start = {k: getattr(truth, k) * 1.005 for k in FIT_PARAMS}
# neighbouring Hann bins are correlated, so the quoted sigmas are somewhat optimistic
res = fit_spectrum(data, FitConfig(base=truth, initial=start, n_avg=psd.metadata["n_segments"]))
print(f"reduced chi2 {res.reduced_chi2:.3f}\n")
print("param       true [kHz]   fit [kHz]    sigma [kHz]   pull")
for k in FIT_PARAMS:
    t, v, s = getattr(truth, k) / TWO_PI / 1e3, res.values[k] / TWO_PI / 1e3, res.sigmas[k] / TWO_PI / 1e3
    print(f"{k:10s} {t:11.4f} {v:11.4f} {s:12.4f} {(v - t) / s:7.2f}")
