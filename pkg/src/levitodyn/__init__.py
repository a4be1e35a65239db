"""Linearized quantum Langevin model of a levitated nanosphere moving in the
plane transverse to its tweezer, coupled to a cavity by coherent scattering.
"""

from .params import SystemParams, ParticleEnvironment
from .drift import DriftSystem, EigenStructure, build_drift, eigenmodes, is_stable
from .spectra import (
    FrequencyGrid,
    Spectrum,
    transfer_matrix,
    output_spectrum,
    sideband_asymmetry,
    quadrature_spectrum,
)
from .occupancy import (
    CovarianceState,
    OccupancyProfile,
    steady_covariance,
    variances_from_spectra,
    n_eff,
    occupancy_profile,
)

__version__ = "0.1.0"
