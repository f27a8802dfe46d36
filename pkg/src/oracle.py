"""
Closed-form results used as ground truth for the lattice walk.

Three families live here: the exact momentum-space evolution of a plane
wave (a 2n x 2n matrix per step), the continuum vacuum formulas, and the
two-flavor matter (MSW) formulas: mixing angle in matter, adiabaticity,
level crossing and the crossing probability.
"""
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np
from scipy.linalg import block_diag

from src.lattice import DimensionMismatchError, build_coin
from src.mixing import FlavorMixer
from src.schema import CoinParameters, ExperimentSpec, Flavor, Spin

logger = logging.getLogger(__name__)

# phase = PHASE_CONVERSION * dm2[eV^2] * L[km] / (2 E[GeV])
PHASE_CONVERSION = 5.08
RELATIVISTIC_RATIO = 5.0
DEGENERACY_TOLERANCE = 1e-15
CLAMP_TOLERANCE = 1e-12


class DegenerateMixingError(ValueError):
    """Vacuum angle 0 or pi/2 at exact resonance: the matter angle is undefined."""


def _index(value: Union[Flavor, Spin, int]) -> int:
    return value.index if isinstance(value, (Flavor, Spin)) else int(value)


@dataclass(frozen=True)
class PlaneWaveSpec:
    """Per-site wavenumber kappa = k * epsilon of a lattice plane wave."""

    kappa: float
    mode_index: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.kappa < math.pi:
            raise ValueError(f"kappa must lie in (0, pi), got {self.kappa}")

    @classmethod
    def from_lattice(cls, n_sites: int, mode_index: int) -> "PlaneWaveSpec":
        return cls(2 * math.pi * mode_index / n_sites, mode_index)

    def is_relativistic(self, coins: CoinParameters) -> bool:
        return self.kappa >= RELATIVISTIC_RATIO * float(np.max(np.abs(coins.eps_thetas)))


@dataclass(frozen=True)
class EffectiveHamiltonian:
    """
    Linearized one-particle Hamiltonian at wavenumber k.

    `masses` are the mass parameters theta_h in the same units as k; `rho` is
    the matter density at a single evaluation point, acting on the electron
    flavor. `units` only tags whether k is a lattice or a physical quantity.
    """

    k: float
    masses: Tuple[float, ...]
    mixer: FlavorMixer
    rho: float = 0.0
    units: Literal["lattice", "physical"] = "lattice"

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"k must be positive, got {self.k}")
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))
        if len(self.masses) != self.mixer.dimension:
            raise DimensionMismatchError(
                f"{len(self.masses)} masses for a {self.mixer.dimension}-flavor mixer"
            )

    @property
    def n_flavors(self) -> int:
        return len(self.masses)

    @property
    def dm2(self) -> float:
        """theta_2^2 - theta_1^2"""
        return self.masses[1] ** 2 - self.masses[0] ** 2

    @property
    def relativistic(self) -> bool:
        return self.k >= RELATIVISTIC_RATIO * max(abs(m) for m in self.masses)


@dataclass(frozen=True)
class MswPoint:
    phi_m: float
    resonance_factor: float
    sin2_2phi_m: float
    rho: float
    gamma: float = field(default=math.inf)


# ---- Momentum space ----

def momentum_step_matrix(
    kappa: float,
    coins: CoinParameters,
    mixer: FlavorMixer,
    uniform_rho: Optional[float] = None,
) -> np.ndarray:
    """
    One walk step acting on a plane wave exp(i kappa p).

    The 2n-vector is ordered (flavor, spin) with index 2h + s. The shift acts
    on a plane wave as D = diag(exp(i kappa), exp(-i kappa)), so the step is
    V R (+)_h (D Q_h) R^dagger with V the optional uniform matter phase on the
    electron rows.

    Raises:
        DimensionMismatchError: if the mixer and the coin angles disagree
    """
    n_flavors = coins.n_flavors
    if mixer.dimension != n_flavors:
        raise DimensionMismatchError(
            f"mixer is {mixer.dimension}x{mixer.dimension} but there are {n_flavors} coin angles"
        )

    shift_phase = np.diag([np.exp(1j * kappa), np.exp(-1j * kappa)])
    blocks = [shift_phase @ build_coin(coins.epsilon, theta) for theta in coins.thetas]
    rotation = np.kron(mixer.matrix, np.eye(2))
    matrix = rotation @ block_diag(*blocks) @ rotation.conj().T

    if uniform_rho is not None:
        matrix[0:2, :] *= np.exp(1j * coins.epsilon * uniform_rho)
    return matrix


def evolve_plane_wave(
    kappa: float,
    coins: CoinParameters,
    mixer: FlavorMixer,
    steps: int,
    flavor: Union[Flavor, int] = Flavor.E,
    spin: Union[Spin, int] = Spin.UP,
    uniform_rho: Optional[float] = None,
    stride: int = 1,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Flavor probabilities of a plane wave under repeated momentum-space steps.

    Args:
        kappa: per-site wavenumber
        coins: lattice step and coin angles
        mixer: flavor mixing matrix
        steps: number of steps to apply
        flavor: initial flavor
        spin: initial spin component
        uniform_rho: optional uniform matter density
        stride: record every `stride` steps (the last step is always recorded)

    Returns:
        (step indices, probabilities of shape (rows, n_flavors))
    """
    if steps < 1 or stride < 1:
        raise ValueError(f"steps and stride must be positive, got steps={steps}, stride={stride}")
    n_flavors = coins.n_flavors
    flavor_index = _index(flavor)
    if flavor_index >= n_flavors:
        raise ValueError(f"flavor index {flavor_index} needs more than {n_flavors} flavors")

    one_step = momentum_step_matrix(kappa, coins, mixer, uniform_rho)
    strided = np.linalg.matrix_power(one_step, stride)

    vector = np.zeros(2 * n_flavors, dtype=np.complex128)
    vector[2 * flavor_index + _index(spin)] = 1.0

    recorded = [0]
    rows = [_spinor_probabilities(vector)]
    j = 0
    while j + stride <= steps:
        vector = strided @ vector
        j += stride
        recorded.append(j)
        rows.append(_spinor_probabilities(vector))
    if j < steps:
        vector = np.linalg.matrix_power(one_step, steps - j) @ vector
        recorded.append(steps)
        rows.append(_spinor_probabilities(vector))

    return np.asarray(recorded), np.asarray(rows)


def _spinor_probabilities(vector: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(vector.reshape(-1, 2)) ** 2, axis=1)


def lattice_dispersion(eps_theta: float, kappa: float) -> float:
    """Eigenphase omega = arccos(cos(eps theta) cos(kappa)) of the one-flavor step."""
    return math.acos(min(1.0, max(-1.0, math.cos(eps_theta) * math.cos(kappa))))


def effective_wavenumber(eps_theta1: float, eps_theta2: float, kappa: float, epsilon: float = 1.0) -> float:
    """
    Wavenumber k for which the continuum phase rate (theta_2^2 - theta_1^2)/(2k)
    equals the walk's exact oscillation rate.

    For small angles this tends to kappa / epsilon.
    """
    delta_omega = lattice_dispersion(eps_theta2, kappa) - lattice_dispersion(eps_theta1, kappa)
    if delta_omega == 0.0:
        raise ValueError("equal coin angles give no oscillation, effective wavenumber undefined")
    return (eps_theta2**2 - eps_theta1**2) / (2 * epsilon * delta_omega)


# ---- Continuum vacuum formulas ----

def vacuum_transition_probability(
    mixer: FlavorMixer,
    energies: Sequence[float],
    t: float,
    alpha: Union[Flavor, int],
    beta: Union[Flavor, int],
) -> float:
    """|sum_i R_beta,i exp(-i E_i t) R*_alpha,i|^2"""
    energies = np.asarray(energies, dtype=float)
    if energies.shape != (mixer.dimension,):
        raise DimensionMismatchError(
            f"{energies.size} energies for a {mixer.dimension}-flavor mixer"
        )
    matrix = mixer.matrix
    a, b = _index(alpha), _index(beta)
    amplitude = np.sum(matrix[b, :] * np.exp(-1j * energies * t) * matrix[a, :].conj())
    return float(abs(amplitude) ** 2)


def continuum_energies(h: EffectiveHamiltonian) -> np.ndarray:
    """E_i = k + theta_i^2 / (2k), valid for k well above every mass."""
    if not h.relativistic:
        logger.warning(
            f"k={h.k} is below {RELATIVISTIC_RATIO:g}x the largest mass {max(abs(m) for m in h.masses)}; "
            "continuum energies are outside their regime"
        )
    masses = np.asarray(h.masses, dtype=float)
    return h.k + masses**2 / (2 * h.k)


def physical_phase(spec: ExperimentSpec) -> float:
    return PHASE_CONVERSION * spec.dm2 * spec.baseline / (2 * spec.energy)


def continuum_phase(theta1: float, theta2: float, k: float, t: float) -> float:
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    return (theta2**2 - theta1**2) * t / (2 * k)


def two_flavor_probability(phi: float, phase: float) -> float:
    """sin^2(2 phi) sin^2(phase), the two-flavor transition with the phase as given."""
    return math.sin(2 * phi) ** 2 * math.sin(phase) ** 2


# ---- Matter ----

def _check_matter_inputs(phi: float, dm2: float, k: float) -> None:
    if not dm2 > 0:
        raise ValueError(f"dm2 must be positive, got {dm2}")
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    if not 0.0 <= phi <= math.pi / 2:
        raise ValueError(f"phi must lie in [0, pi/2], got {phi}")


def resonance_density(phi: float, dm2: float, k: float) -> float:
    """Density at which sin^2(2 Phi) reaches 1."""
    _check_matter_inputs(phi, dm2, k)
    return dm2 * math.cos(2 * phi) / (2 * k)


def _bracket(phi: float, dm2: float, k: float, rho: float) -> float:
    return math.cos(2 * phi) - 2 * k * rho / dm2


def mixing_angle_gradient(phi: float, dm2: float, k: float, rho: float, drho_dx: float) -> float:
    """d Phi / dx = k sin(2 phi) rho' / (dm2 A)"""
    _check_matter_inputs(phi, dm2, k)
    sin_2phi = math.sin(2 * phi)
    bracket = _bracket(phi, dm2, k, rho)
    resonance_factor = bracket**2 + sin_2phi**2
    if resonance_factor == 0.0:
        raise DegenerateMixingError(f"phi={phi} at exact resonance rho={rho}")
    return k * sin_2phi * drho_dx / (dm2 * resonance_factor)


def adiabaticity(phi: float, dm2: float, k: float, rho: float, drho_dx: float) -> float:
    """
    gamma = dm2 / (4 k |d Phi / dx|).

    Returns math.inf when the mixing angle does not vary (constant density).
    """
    gradient = mixing_angle_gradient(phi, dm2, k, rho, drho_dx)
    if gradient == 0.0:
        return math.inf
    return dm2 / (4 * k * abs(gradient))


def matter_mixing_angle(phi: float, dm2: float, k: float, rho: float, drho_dx: float = 0.0) -> MswPoint:
    """
    Mixing angle in matter of density rho.

    The branch Phi = atan2(sin 2phi, cos 2phi - 2 k rho / dm2) / 2 is
    continuous in rho, equals phi in vacuum, passes pi/4 at resonance and
    tends to pi/2 at high density.

    Args:
        phi: vacuum mixing angle in [0, pi/2]
        dm2: theta_2^2 - theta_1^2, positive
        k: wavenumber (identified with the energy)
        rho: density at the evaluation point
        drho_dx: density gradient, used for the adiabaticity

    Raises:
        DegenerateMixingError: phi is 0 or pi/2 and rho sits exactly on resonance
    """
    _check_matter_inputs(phi, dm2, k)
    sin_2phi = math.sin(2 * phi)
    bracket = _bracket(phi, dm2, k, rho)
    if abs(sin_2phi) < DEGENERACY_TOLERANCE and abs(bracket) < DEGENERACY_TOLERANCE:
        raise DegenerateMixingError(f"phi={phi} at exact resonance rho={rho}: matter angle undefined")

    resonance_factor = bracket**2 + sin_2phi**2
    gamma = adiabaticity(phi, dm2, k, rho, drho_dx)
    return MswPoint(
        phi_m=0.5 * math.atan2(sin_2phi, bracket),
        resonance_factor=resonance_factor,
        sin2_2phi_m=sin_2phi**2 / resonance_factor,
        rho=rho,
        gamma=gamma,
    )


def effective_hamiltonian_matrix(h: EffectiveHamiltonian) -> np.ndarray:
    """k I + R diag(theta^2) R^dagger / (2k) + diag(rho, 0, ...)"""
    return h.k * np.eye(h.n_flavors) + _mass_and_matter(h)


def _mass_and_matter(h: EffectiveHamiltonian) -> np.ndarray:
    masses = np.diag(np.asarray(h.masses, dtype=float) ** 2)
    matrix = h.mixer.matrix @ masses @ h.mixer.dagger / (2 * h.k)
    matrix[0, 0] += h.rho
    return matrix


def _two_level(h: EffectiveHamiltonian) -> Tuple[float, float]:
    if h.n_flavors != 2:
        raise DimensionMismatchError("matter eigenvalues are two-flavor only")
    m = _mass_and_matter(h)
    a, d = m[0, 0].real, m[1, 1].real
    mean = 0.5 * (a + d)
    half_gap = math.hypot(0.5 * (a - d), abs(m[0, 1]))
    return mean, half_gap


def matter_eigenvalues(h: EffectiveHamiltonian) -> Tuple[float, float]:
    """Ascending eigenvalues (E1m, E2m) of the two-flavor matter Hamiltonian."""
    mean, half_gap = _two_level(h)
    return h.k + mean - half_gap, h.k + mean + half_gap


def matter_level_gap(h: EffectiveHamiltonian) -> float:
    """E2m - E1m, computed without the common k offset."""
    _, half_gap = _two_level(h)
    return 2 * half_gap


def crossing_probability(gamma: float, phi: float) -> float:
    """
    Probability of jumping between matter eigenstates across the resonance.

        P_c = (exp(-a) - exp(-a / sin^2 phi)) / (1 - exp(-a / sin^2 phi)),  a = pi gamma / 2

    gamma = 0 gives the sudden limit cos^2 phi, gamma = inf gives 0.
    """
    if math.isnan(gamma) or gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    if not 0.0 < phi < math.pi / 2:
        raise ValueError(f"phi must lie in (0, pi/2), got {phi}")
    if gamma == 0.0:
        return math.cos(phi) ** 2
    if math.isinf(gamma):
        return 0.0

    a = math.pi * gamma / 2
    b = a / math.sin(phi) ** 2
    # exp(-a) - exp(-b) = exp(-a) (1 - exp(-(b - a))), accurate for small and large a
    numerator = math.exp(-a) * -math.expm1(-a / math.tan(phi) ** 2)
    denominator = -math.expm1(-b)
    return min(1.0, max(0.0, numerator / denominator))


def asymptotic_transition(crossing: float, phi_i: float, phi_f: float) -> float:
    """P = 1/2 - (1/2 - P_c) cos(2 Phi_f) cos(2 Phi_i)"""
    if not 0.0 <= crossing <= 1.0:
        raise ValueError(f"crossing probability must lie in [0, 1], got {crossing}")
    probability = 0.5 - (0.5 - crossing) * math.cos(2 * phi_f) * math.cos(2 * phi_i)
    if -CLAMP_TOLERANCE < probability < 0.0:
        return 0.0
    if 1.0 < probability < 1.0 + CLAMP_TOLERANCE:
        return 1.0
    return probability
