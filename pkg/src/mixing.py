"""
Flavor-mixing unitaries.

The two-flavor mixer is a plane rotation; the three-flavor PMNS matrix is the
product of three Gell-Mann exponentials, each of which is itself a plane
rotation in one 2x2 block and is built in closed form.
"""
from dataclasses import dataclass
import logging
import math

import numpy as np

from src.schema import MixingAngles

logger = logging.getLogger(__name__)

UNITARITY_TOLERANCE = 1e-13

# block (row, column) that each supported Gell-Mann matrix acts on
_GELL_MANN_BLOCKS = {2: (0, 1), 5: (0, 2), 7: (1, 2)}


@dataclass(frozen=True)
class FlavorMixer:
    matrix: np.ndarray
    angles: MixingAngles

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.complex128)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] not in (2, 3):
            raise ValueError(f"mixer must be a 2x2 or 3x3 matrix, got shape {matrix.shape}")
        defect = np.max(np.abs(matrix @ matrix.conj().T - np.eye(matrix.shape[0])))
        if defect > UNITARITY_TOLERANCE:
            raise ValueError(f"mixer is not unitary (|R R^dagger - I| = {defect:.3e})")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def dagger(self) -> np.ndarray:
        return self.matrix.conj().T


def _plane_rotation(n: int, block: tuple[int, int], phi: float) -> np.ndarray:
    rotation = np.eye(n, dtype=np.complex128)
    r, c = block
    cos_phi, sin_phi = math.cos(phi), math.sin(phi)
    rotation[r, r] = cos_phi
    rotation[c, c] = cos_phi
    rotation[r, c] = sin_phi
    rotation[c, r] = -sin_phi
    return rotation


def rotation_2flavor(phi: float) -> FlavorMixer:
    """[[cos phi, sin phi], [-sin phi, cos phi]]"""
    return FlavorMixer(_plane_rotation(2, (0, 1), phi), MixingAngles(phi_12=phi))


def gell_mann(index: int) -> np.ndarray:
    """
    Return the Gell-Mann matrix lambda_2, lambda_5 or lambda_7.

    These are the three antisymmetric generators (-i above the diagonal, +i
    below) that generate the real rotations of the PMNS matrix.

    Raises:
        ValueError: for any other index
    """
    if index not in _GELL_MANN_BLOCKS:
        raise ValueError(f"only Gell-Mann matrices 2, 5 and 7 are supported, got {index}")
    r, c = _GELL_MANN_BLOCKS[index]
    lam = np.zeros((3, 3), dtype=np.complex128)
    lam[r, c] = -1j
    lam[c, r] = 1j
    return lam


def gell_mann_exponential(index: int, phi: float) -> np.ndarray:
    """exp(i phi lambda_index) as the plane rotation it equals (lambda^3 = lambda)."""
    if index not in _GELL_MANN_BLOCKS:
        raise ValueError(f"only Gell-Mann matrices 2, 5 and 7 are supported, got {index}")
    return _plane_rotation(3, _GELL_MANN_BLOCKS[index], phi)


def pmns(angles: MixingAngles) -> FlavorMixer:
    """
    R = exp(i phi_mu_tau lambda_7) exp(i phi_e_tau lambda_5) exp(i phi_e_mu lambda_2).

    No CP phase: the result is real orthogonal with determinant +1.
    """
    if angles.n_flavors != 3:
        raise ValueError("pmns needs the three-flavor angles phi_e_mu, phi_e_tau, phi_mu_tau")
    matrix = (
        gell_mann_exponential(7, angles.phi_mu_tau)
        @ gell_mann_exponential(5, angles.phi_e_tau)
        @ gell_mann_exponential(2, angles.phi_e_mu)
    )
    return FlavorMixer(matrix, angles)


def build_mixer(angles: MixingAngles) -> FlavorMixer:
    if angles.n_flavors == 2:
        return rotation_2flavor(angles.phi_12)
    return pmns(angles)


def series_exponential(matrix: np.ndarray, terms: int = 24) -> np.ndarray:
    """
    Matrix exponential by scaling and squaring a truncated Taylor series.

    Slow and general; used only to check the closed-form rotations.
    """
    matrix = np.asarray(matrix, dtype=np.complex128)
    norm = np.linalg.norm(matrix, ord=1)
    squarings = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    scaled = matrix / 2**squarings

    result = np.eye(matrix.shape[0], dtype=np.complex128)
    term = np.eye(matrix.shape[0], dtype=np.complex128)
    for n in range(1, terms + 1):
        term = term @ scaled / n
        result = result + term

    for _ in range(squarings):
        result = result @ result
    return result
