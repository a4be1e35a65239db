"""Physical constants (CODATA 2018, SI units)."""

HBAR = 1.054571817e-34  # J s
KB = 1.380649e-23  # J / K
C = 299792458.0  # m / s
EPS0 = 8.8541878128e-12  # F / m
AMU = 1.66053906660e-27  # kg

TWO_PI = 6.283185307179586

# molecular nitrogen
M_N2 = 28.0134 * AMU

DEFAULT_TEMPERATURE = 293.0  # K
