"""
Lattice kernel of the flavor-mixed quantum walk.

Amplitudes are a complex array of shape (n_sites, n_flavors, 2) indexed by
(site p, flavor h, spin s), with s = 0 for spin up and s = 1 for spin down.
One timestep in the flavor basis is

    V . R (+)_h (S Q_h) R^dagger

where Q_h is the per-flavor coin, S the spin-dependent shift on a periodic
lattice and V the optional matter phase on the electron flavor.
"""
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple, Union
import logging
import math

import numpy as np
from tqdm import tqdm

from src.mixing import FlavorMixer
from src.schema import Basis, CoinParameters, Flavor, MatterProfile, Spin

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-12


class DimensionMismatchError(ValueError):
    """A state and an operator disagree on the number of sites or flavors."""


@dataclass(frozen=True)
class LatticeState:
    amplitudes: np.ndarray
    basis: Basis = Basis.FLAVOR

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=np.complex128)
        if amplitudes.ndim != 3 or amplitudes.shape[2] != 2:
            raise DimensionMismatchError(
                f"amplitudes must have shape (n_sites, n_flavors, 2), got {amplitudes.shape}"
            )
        if amplitudes.shape[0] < 2:
            raise ValueError(f"n_sites must be at least 2, got {amplitudes.shape[0]}")
        if amplitudes.shape[1] not in (2, 3):
            raise ValueError(f"n_flavors must be 2 or 3, got {amplitudes.shape[1]}")
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "basis", Basis(self.basis))

    @classmethod
    def from_amplitudes(cls, amplitudes: np.ndarray, basis: Basis = Basis.FLAVOR) -> "LatticeState":
        """Build a state and require it to be normalized."""
        state = cls(amplitudes, basis)
        if not abs(state.norm - 1.0) <= NORM_TOLERANCE:
            raise ValueError(f"state is not normalized (norm = {state.norm!r})")
        return state

    @property
    def n_sites(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def n_flavors(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def norm(self) -> float:
        """Total squared magnitude."""
        flat = self.amplitudes.ravel()
        return float(np.vdot(flat, flat).real)


def _index(value: Union[Flavor, Spin, int]) -> int:
    return value.index if isinstance(value, (Flavor, Spin)) else int(value)


def build_coin(epsilon: float, theta: float) -> np.ndarray:
    """Q = [[cos(eps theta), i sin(eps theta)], [i sin(eps theta), cos(eps theta)]]"""
    cos_angle = math.cos(epsilon * theta)
    sin_angle = math.sin(epsilon * theta)
    return np.array([[cos_angle, 1j * sin_angle], [1j * sin_angle, cos_angle]], dtype=np.complex128)


def coin_stack(coins: CoinParameters) -> np.ndarray:
    return np.stack([build_coin(coins.epsilon, theta) for theta in coins.thetas])


def _shift_array(amplitudes: np.ndarray) -> np.ndarray:
    # up at p takes the old up at p+1, down at p takes the old down at p-1
    shifted = np.empty_like(amplitudes)
    shifted[:, :, 0] = np.roll(amplitudes[:, :, 0], -1, axis=0)
    shifted[:, :, 1] = np.roll(amplitudes[:, :, 1], 1, axis=0)
    return shifted


def _block_step_array(amplitudes: np.ndarray, coins: np.ndarray) -> np.ndarray:
    return _shift_array(np.einsum("hst,pht->phs", coins, amplitudes))


def _rotate_flavors(matrix: np.ndarray, amplitudes: np.ndarray) -> np.ndarray:
    return np.einsum("ab,pbs->pas", matrix, amplitudes)


def _mixed_step_array(
    amplitudes: np.ndarray,
    matrix: np.ndarray,
    coins: np.ndarray,
    phases: Optional[np.ndarray],
) -> np.ndarray:
    mass = _rotate_flavors(matrix.conj().T, amplitudes)
    flavor = _rotate_flavors(matrix, _block_step_array(mass, coins))
    if phases is not None:
        flavor[:, 0, :] *= phases[:, np.newaxis]
    return flavor


def shift(state: LatticeState) -> LatticeState:
    """Spin-dependent translation S on the periodic lattice."""
    return LatticeState(_shift_array(state.amplitudes), state.basis)


@dataclass(frozen=True)
class StepOperatorSpec:
    coins: CoinParameters
    mixer: FlavorMixer
    matter: Optional[MatterProfile] = None
    boundary: str = "periodic"

    def __post_init__(self):
        if self.mixer.dimension != self.coins.n_flavors:
            raise DimensionMismatchError(
                f"mixer is {self.mixer.dimension}x{self.mixer.dimension} "
                f"but there are {self.coins.n_flavors} coin angles"
            )
        if self.boundary != "periodic":
            raise ValueError(f"only periodic boundaries are supported, got {self.boundary!r}")

    @property
    def n_flavors(self) -> int:
        return self.coins.n_flavors

    def check(self, state: LatticeState) -> None:
        if state.n_flavors != self.n_flavors:
            raise DimensionMismatchError(
                f"state has {state.n_flavors} flavors, step operator expects {self.n_flavors}"
            )
        if self.matter is not None:
            try:
                self.matter.check_sites(state.n_sites)
            except ValueError as e:
                raise DimensionMismatchError(str(e)) from e

    def matter_phases(self, n_sites: int) -> Optional[np.ndarray]:
        """exp(i eps rho_p) for every site, or None in vacuum."""
        if self.matter is None:
            return None
        rho = self.matter.site_densities(n_sites, self.coins.epsilon)
        return np.exp(1j * self.coins.epsilon * rho)


def step(state: LatticeState, spec: StepOperatorSpec) -> LatticeState:
    """One timestep of the flavor-mixed walk on a flavor-basis state."""
    if state.basis is not Basis.FLAVOR:
        raise ValueError("step acts on flavor-basis states; use block_step in the mass basis")
    spec.check(state)
    amplitudes = _mixed_step_array(
        state.amplitudes,
        spec.mixer.matrix,
        coin_stack(spec.coins),
        spec.matter_phases(state.n_sites),
    )
    return LatticeState(amplitudes, Basis.FLAVOR)


def block_step(state: LatticeState, coins: CoinParameters) -> LatticeState:
    """The unmixed walk (+)_h S Q_h acting on a mass-basis state."""
    if state.basis is not Basis.MASS:
        raise ValueError("block_step acts on mass-basis states")
    if state.n_flavors != coins.n_flavors:
        raise DimensionMismatchError(
            f"state has {state.n_flavors} flavors, got {coins.n_flavors} coin angles"
        )
    return LatticeState(_block_step_array(state.amplitudes, coin_stack(coins)), Basis.MASS)


def to_flavor_basis(state: LatticeState, mixer: FlavorMixer) -> LatticeState:
    if state.basis is not Basis.MASS:
        raise ValueError("state is already in the flavor basis")
    if state.n_flavors != mixer.dimension:
        raise DimensionMismatchError(f"state has {state.n_flavors} flavors, mixer is {mixer.dimension}-dimensional")
    return LatticeState(_rotate_flavors(mixer.matrix, state.amplitudes), Basis.FLAVOR)


def to_mass_basis(state: LatticeState, mixer: FlavorMixer) -> LatticeState:
    if state.basis is not Basis.FLAVOR:
        raise ValueError("state is already in the mass basis")
    if state.n_flavors != mixer.dimension:
        raise DimensionMismatchError(f"state has {state.n_flavors} flavors, mixer is {mixer.dimension}-dimensional")
    return LatticeState(_rotate_flavors(mixer.dagger, state.amplitudes), Basis.MASS)


def evolve(
    state: LatticeState,
    spec: StepOperatorSpec,
    steps: int,
    stride: int = 1,
    show_progress: bool = False,
) -> Iterator[Tuple[int, LatticeState]]:
    """
    Apply `step` repeatedly, yielding (j, state) at j = 0, every `stride`
    steps and at the final step.

    The operator pieces are built once and the loop works on raw arrays; the
    states it yields are the same as those of repeated `step` calls.
    """
    if state.basis is not Basis.FLAVOR:
        raise ValueError("evolve acts on flavor-basis states")
    if steps < 1 or stride < 1:
        raise ValueError(f"steps and stride must be positive, got steps={steps}, stride={stride}")
    spec.check(state)

    matrix = spec.mixer.matrix
    coins = coin_stack(spec.coins)
    phases = spec.matter_phases(state.n_sites)

    yield 0, state
    amplitudes = state.amplitudes
    for j in tqdm(range(1, steps + 1), disable=not show_progress, desc="walk", unit="step"):
        amplitudes = _mixed_step_array(amplitudes, matrix, coins, phases)
        if j % stride == 0 or j == steps:
            yield j, LatticeState(amplitudes, Basis.FLAVOR)


def flavor_probabilities(state: LatticeState) -> np.ndarray:
    """Probability of each flavor (or mass eigenstate), summed over sites and spin."""
    return np.sum(np.abs(state.amplitudes) ** 2, axis=(0, 2))


def position_density(state: LatticeState) -> np.ndarray:
    return np.sum(np.abs(state.amplitudes) ** 2, axis=(1, 2))


def plane_wave_state(
    n_sites: int,
    mode_index: int,
    flavor: Union[Flavor, int] = Flavor.E,
    spin: Union[Spin, int] = Spin.UP,
    n_flavors: int = 2,
) -> LatticeState:
    """
    exp(i kappa p) / sqrt(n_sites) on one flavor and spin, kappa = 2 pi m / n_sites.

    This is an exact eigenvector of `shift` on the periodic lattice.
    """
    if not 0 <= mode_index < n_sites:
        raise ValueError(f"mode_index must lie in [0, {n_sites}), got {mode_index}")
    flavor_index, spin_index = _index(flavor), _index(spin)
    if flavor_index >= n_flavors:
        raise ValueError(f"flavor index {flavor_index} needs more than {n_flavors} flavors")

    kappa = 2 * math.pi * mode_index / n_sites
    amplitudes = np.zeros((n_sites, n_flavors, 2), dtype=np.complex128)
    amplitudes[:, flavor_index, spin_index] = np.exp(1j * kappa * np.arange(n_sites)) / math.sqrt(n_sites)
    return LatticeState.from_amplitudes(amplitudes, Basis.FLAVOR)


def wave_packet_state(
    n_sites: int,
    center: float,
    width: float,
    mode_index: int,
    flavor: Union[Flavor, int] = Flavor.E,
    spin: Union[Spin, int] = Spin.UP,
    n_flavors: int = 2,
) -> LatticeState:
    """Gaussian envelope exp(-(p - center)^2 / (4 width^2)) times exp(i kappa p), normalized."""
    if not 0 <= mode_index < n_sites:
        raise ValueError(f"mode_index must lie in [0, {n_sites}), got {mode_index}")
    if not (math.isfinite(width) and width > 0 and width**2 > 0):
        raise ValueError(f"packet width must be positive and finite, got {width}")
    if not math.isfinite(center):
        raise ValueError(f"packet center must be finite, got {center}")
    flavor_index, spin_index = _index(flavor), _index(spin)
    if flavor_index >= n_flavors:
        raise ValueError(f"flavor index {flavor_index} needs more than {n_flavors} flavors")

    sites = np.arange(n_sites)
    kappa = 2 * math.pi * mode_index / n_sites
    offsets = (sites - center) ** 2
    # relative to the nearest site, which keeps weight 1 however narrow the packet
    envelope = np.exp(-(offsets - offsets.min()) / (4 * width**2))
    envelope /= np.linalg.norm(envelope)

    amplitudes = np.zeros((n_sites, n_flavors, 2), dtype=np.complex128)
    amplitudes[:, flavor_index, spin_index] = envelope * np.exp(1j * kappa * sites)
    return LatticeState.from_amplitudes(amplitudes, Basis.FLAVOR)
