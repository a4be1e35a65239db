"""Occupancy extremes versus detuning and versus polarization angle."""

import numpy as np

from levitodyn.constants import TWO_PI
from levitodyn.presets import ANGLE_G_MAX_HZ, angle_base, detuning_base
from levitodyn.sweep import SweepSpec, run_sweep

print("detuning [kHz]   n_min    n_max")
for r in run_sweep(SweepSpec("detuning", np.arange(-220.0, -79.0, 20.0), detuning_base())):
    print(f"{r.value:14.0f}   {r.occupancy['n_min']:6.3f}   {r.occupancy['n_max']:6.3f}")

print("\nangle [deg]   g_X [kHz]   g_Y [kHz]   n_min    n_max")
spec = SweepSpec("angle", np.arange(20.0, 81.0, 10.0), angle_base(), g_max=TWO_PI * ANGLE_G_MAX_HZ)
for r in run_sweep(spec):
    hz = r.params.to_hz_dict()
    print(f"{r.value:11.0f}   {hz['g_x_hz'] / 1e3:9.2f}   {hz['g_y_hz'] / 1e3:9.2f}   "
          f"{r.occupancy['n_min']:6.3f}   {r.occupancy['n_max']:6.3f}")
