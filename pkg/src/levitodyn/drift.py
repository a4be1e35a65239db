"""Linear drift/diffusion system of the cavity + two mechanical modes.

Quadrature basis, fixed everywhere in the package::

    index   0     1     2    3     4    5
            x_c   p_c   x    p_x   y    p_y

with ``x = b + b^dag`` and ``p = i (b^dag - b)`` (likewise for the cavity
field ``a``). In these units a ground-state oscillator has <x^2> = <p^2> = 1.

The ladder basis used for the Fourier-space solution is
``(a, a^dag, b_X, b_X^dag, b_Y, b_Y^dag)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import SystemParams

QUADRATURES = ("x_c", "p_c", "x", "p_x", "y", "p_y")
LADDER = ("a", "a+", "b_X", "b_X+", "b_Y", "b_Y+")
NOISES = ("a_in", "a_in+", "b_nX", "b_nX+", "b_nY", "b_nY+", "v_X", "v_X+", "v_Y", "v_Y+")

DEFAULT_EPS_STAB = 1e-6  # rad/s

# ladder -> quadrature change of basis, per mode [[1, 1], [-i, i]]
_R1 = np.array([[1.0, 1.0], [-1j, 1j]])
R_LADDER_TO_QUAD = np.kron(np.eye(3), _R1)


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DriftSystem:
    """Drift ``A`` and symmetric diffusion ``D`` (both 6x6, rad/s)."""

    A: np.ndarray
    D: np.ndarray
    params: SystemParams | None = None

    def __post_init__(self):
        object.__setattr__(self, "A", _frozen(self.A))
        object.__setattr__(self, "D", _frozen(self.D))


@dataclass(frozen=True, eq=False)
class EigenStructure:
    """Eigen-decomposition of the drift matrix.

    ``eigenvalues`` are sorted by imaginary part (ties by real part), so the
    negative-frequency partners come first.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    stable: bool

    @property
    def centers(self) -> np.ndarray:
        return self.eigenvalues.imag

    @property
    def widths(self) -> np.ndarray:
        return -2.0 * self.eigenvalues.real

    def positive_modes(self) -> tuple[np.ndarray, np.ndarray]:
        """(center, full width) of the modes with Im(lambda) > 0, ascending."""
        lam = self.eigenvalues[self.eigenvalues.imag > 0]
        return lam.imag, -2.0 * lam.real


def ladder_matrices(params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Equations of motion in the ladder basis: ``du/dt = M u + L xi``.

    ``xi`` runs over :data:`NOISES`. Besides the cavity input and the
    mechanical decoherence noise, each mechanical mode carries the
    zero-point noise ``v_j`` that accompanies the gas damping Gamma_m; it
    keeps the commutators intact and is what makes an undriven oscillator
    relax to <x^2> = 2 Gamma_j / Gamma_m + 1.
    """
    p = params
    M = np.zeros((6, 6), dtype=complex)
    M[0, 0] = 1j * p.detuning - 0.5 * p.kappa
    M[1, 1] = -1j * p.detuning - 0.5 * p.kappa
    L = np.zeros((6, 10))
    L[0, 0] = L[1, 1] = np.sqrt(p.kappa)
    for j, (om, g, gam) in enumerate(((p.omega_x, p.g_x, p.gamma_x), (p.omega_y, p.g_y, p.gamma_y))):
        b = 2 + 2 * j
        M[0, b] = M[0, b + 1] = 1j * g
        M[1, b] = M[1, b + 1] = -1j * g
        M[b, b] = -1j * om - 0.5 * p.gamma_m
        M[b + 1, b + 1] = 1j * om - 0.5 * p.gamma_m
        M[b, 0] = M[b, 1] = 1j * g
        M[b + 1, 0] = M[b + 1, 1] = -1j * g
        L[b, b] = L[b + 1, b + 1] = np.sqrt(gam)
        L[b, 6 + 2 * j] = L[b + 1, 7 + 2 * j] = np.sqrt(p.gamma_m)
    return M, L


def build_drift(params: SystemParams) -> DriftSystem:
    p = params
    k2 = 0.5 * p.kappa
    gm2 = 0.5 * p.gamma_m
    A = np.array([
        [-k2, -p.detuning, 0.0, 0.0, 0.0, 0.0],
        [p.detuning, -k2, 2 * p.g_x, 0.0, 2 * p.g_y, 0.0],
        [0.0, 0.0, -gm2, p.omega_x, 0.0, 0.0],
        [2 * p.g_x, 0.0, -p.omega_x, -gm2, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, -gm2, p.omega_y],
        [2 * p.g_y, 0.0, 0.0, 0.0, -p.omega_y, -gm2],
    ])
    dx = 2 * p.gamma_x + p.gamma_m
    dy = 2 * p.gamma_y + p.gamma_m
    D = np.diag([p.kappa, p.kappa, dx, dx, dy, dy])
    return DriftSystem(A, D, params)


def eigenmodes(sys: DriftSystem) -> EigenStructure:
    lam, vec = np.linalg.eig(sys.A)
    order = np.lexsort((lam.real, lam.imag))
    lam = lam[order]
    return EigenStructure(lam, vec[:, order], bool(lam.real.max() < -DEFAULT_EPS_STAB))


def is_stable(sys: DriftSystem, eps_stab: float = DEFAULT_EPS_STAB) -> bool:
    return bool(np.linalg.eigvals(sys.A).real.max() < -eps_stab)


class UnstableSystemError(RuntimeError):
    """Raised when a steady state is requested for a non-decaying system."""

    def __init__(self, eigenvalues, message="system is not stable"):
        self.eigenvalues = np.asarray(eigenvalues)
        worst = self.eigenvalues.real.max()
        super().__init__(f"{message}: max Re(lambda) = {worst:.6g} rad/s")


def require_stable(sys: DriftSystem, eps_stab: float = DEFAULT_EPS_STAB) -> None:
    lam = np.linalg.eigvals(sys.A)
    if not lam.real.max() < -eps_stab:
        raise UnstableSystemError(lam)
