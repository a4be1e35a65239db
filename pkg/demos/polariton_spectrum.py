"""Strongly coupled X mode: eigenmodes, heterodyne spectrum and sideband asymmetry."""

import numpy as np

from levitodyn import FrequencyGrid, build_drift, eigenmodes, output_spectrum, sideband_asymmetry
from levitodyn.constants import TWO_PI
from levitodyn.presets import strong_1d

p = strong_1d()
centers, widths = eigenmodes(build_drift(p)).positive_modes()
print("mode      center [kHz]   width [kHz]")
for c, w in sorted(zip(centers, widths)):
    print(f"          {c / TWO_PI / 1e3:10.3f}   {w / TWO_PI / 1e3:10.4f}")

spec = output_spectrum(p, FrequencyGrid.default(p, 2**15))
k = np.argmax(spec.values)
print(f"\nstrongest heterodyne feature: {spec.values[k]:.3f} x shot noise at {spec.grid.hz[k] / 1e6:.4f} MHz")

grid = FrequencyGrid.from_hz(90e3, 160e3, 7001)
a = sideband_asymmetry(p, grid).values
f = grid.hz / 1e3
print("\noffset [kHz]   asymmetry")
for x in (95, 100, 110, 116, 116.2, 120, 123, 130, 142, 150):
    print(f"{x:12.1f}   {np.interp(x, f, a):9.4f}")
