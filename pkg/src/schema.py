from enum import Enum
from typing import Annotated, List, Literal, Optional, Union
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class Flavor(str, Enum):
    E = "e"
    MU = "mu"
    TAU = "tau"

    @property
    def index(self) -> int:
        return list(Flavor).index(self)


class Spin(str, Enum):
    UP = "up"
    DOWN = "down"

    @property
    def index(self) -> int:
        return 0 if self is Spin.UP else 1


class Basis(str, Enum):
    MASS = "mass"
    FLAVOR = "flavor"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)


class CoinParameters(StrictModel):
    """Lattice step and per-flavor coin angles (the mass parameters)."""

    epsilon: float = Field(gt=0)
    thetas: List[float] = Field(min_length=2, max_length=3)

    @model_validator(mode="after")
    def _relativistic_regime(self):
        for theta in self.thetas:
            if abs(self.epsilon * theta) >= math.pi / 2:
                raise ValueError(
                    f"coins.thetas: epsilon*theta must lie in (-pi/2, pi/2), got {self.epsilon * theta}"
                )
        return self

    @property
    def n_flavors(self) -> int:
        return len(self.thetas)

    @property
    def eps_thetas(self) -> np.ndarray:
        return self.epsilon * np.asarray(self.thetas, dtype=float)


class MixingAngles(StrictModel):
    """
    Either the single two-flavor angle phi_12 or the three PMNS angles.

    All angles are in radians; [0, pi/2] is the canonical range but no
    wrapping is applied.
    """

    phi_12: Optional[float] = None
    phi_e_mu: Optional[float] = None
    phi_e_tau: Optional[float] = None
    phi_mu_tau: Optional[float] = None

    @model_validator(mode="after")
    def _one_family(self):
        three = (self.phi_e_mu, self.phi_e_tau, self.phi_mu_tau)
        if self.phi_12 is not None:
            if any(angle is not None for angle in three):
                raise ValueError(
                    "angles: give either phi_12 (two flavors) or "
                    "phi_e_mu/phi_e_tau/phi_mu_tau (three flavors), not both"
                )
        elif any(angle is None for angle in three):
            raise ValueError("angles: three-flavor mixing needs phi_e_mu, phi_e_tau and phi_mu_tau")
        return self

    @property
    def n_flavors(self) -> int:
        return 2 if self.phi_12 is not None else 3


class _Profile(StrictModel):
    def density(self, x, epsilon: float = 1.0) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x, epsilon: float = 1.0) -> np.ndarray:
        raise NotImplementedError

    def site_densities(self, n_sites: int, epsilon: float) -> np.ndarray:
        """Density rho_p at every site position x_p = p * epsilon."""
        return self.density(np.arange(n_sites) * epsilon, epsilon)

    def check_sites(self, n_sites: int) -> None:
        pass

    @property
    def is_uniform(self) -> bool:
        return False


class UniformProfile(_Profile):
    kind: Literal["uniform"] = "uniform"
    rho0: float

    def density(self, x, epsilon: float = 1.0) -> np.ndarray:
        return np.full(np.shape(x), self.rho0, dtype=float)

    def gradient(self, x, epsilon: float = 1.0) -> np.ndarray:
        return np.zeros(np.shape(x), dtype=float)

    @property
    def is_uniform(self) -> bool:
        return True


class LinearProfile(_Profile):
    kind: Literal["linear"] = "linear"
    slope: float
    intercept: float = 0.0

    def density(self, x, epsilon: float = 1.0) -> np.ndarray:
        return self.slope * np.asarray(x, dtype=float) + self.intercept

    def gradient(self, x, epsilon: float = 1.0) -> np.ndarray:
        return np.full(np.shape(x), self.slope, dtype=float)

    @property
    def is_uniform(self) -> bool:
        return self.slope == 0.0


class TableProfile(_Profile):
    """Per-site densities; positions between sites are linearly interpolated."""

    kind: Literal["table"] = "table"
    values: List[float] = Field(min_length=2)

    def density(self, x, epsilon: float = 1.0) -> np.ndarray:
        sites = np.asarray(x, dtype=float) / epsilon
        return np.interp(sites, np.arange(len(self.values)), self.values)

    def gradient(self, x, epsilon: float = 1.0) -> np.ndarray:
        slopes = np.gradient(np.asarray(self.values, dtype=float), epsilon)
        sites = np.asarray(x, dtype=float) / epsilon
        return np.interp(sites, np.arange(len(self.values)), slopes)

    def site_densities(self, n_sites: int, epsilon: float) -> np.ndarray:
        self.check_sites(n_sites)
        return np.asarray(self.values, dtype=float)

    def check_sites(self, n_sites: int) -> None:
        if len(self.values) != n_sites:
            raise ValueError(
                f"matter.values: table has {len(self.values)} entries, lattice has {n_sites} sites"
            )

    @property
    def is_uniform(self) -> bool:
        return len(set(self.values)) == 1


MatterProfile = Annotated[
    Union[UniformProfile, LinearProfile, TableProfile],
    Field(discriminator="kind"),
]


class ExperimentSpec(StrictModel):
    """Physical oscillation experiment: dm2 in eV^2, energy in GeV, baseline in km."""

    dm2: float = Field(gt=0)
    energy: float = Field(gt=0)
    baseline: float = Field(ge=0)
    angles: Optional[MixingAngles] = None


class WavePacket(StrictModel):
    center: float
    width: float = Field(gt=0)


class LatticeConfig(StrictModel):
    n_sites: int = Field(ge=2)
    mode_index: int = Field(ge=0)
    steps: int = Field(ge=1)
    # continuum wavenumber for the oracle-only scenarios; defaults to kappa / epsilon
    k: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _mode_in_zone(self):
        if self.mode_index >= self.n_sites:
            raise ValueError(
                f"lattice.mode_index: must be below n_sites={self.n_sites}, got {self.mode_index}"
            )
        return self

    @property
    def kappa(self) -> float:
        return 2 * math.pi * self.mode_index / self.n_sites


class InitialCondition(StrictModel):
    flavor: Flavor = Flavor.E
    spin: Spin = Spin.UP
    packet: Optional[WavePacket] = None


class OutputConfig(StrictModel):
    path: Optional[str] = None
    format: Literal["csv", "json"] = "csv"
    stride: int = Field(default=1, ge=1)


Scenario = Literal["vacuum", "matter", "levels", "compare", "map-experiment"]
# largest kappa for which map-experiment trusts the continuum phase
MAX_MAPPING_KAPPA = 0.3


class ScenarioConfig(StrictModel):
    scenario: Scenario
    lattice: LatticeConfig
    coins: CoinParameters
    angles: MixingAngles
    matter: Optional[MatterProfile] = None
    initial: InitialCondition = Field(default_factory=InitialCondition)
    output: OutputConfig = Field(default_factory=OutputConfig)
    experiment: Optional[ExperimentSpec] = None
    boundary: Literal["periodic"] = "periodic"
    # free text shown to readers of the example; not echoed into outputs
    description: Optional[str] = None

    @model_validator(mode="after")
    def _consistent_with_scenario(self):
        n_flavors = self.angles.n_flavors
        if self.coins.n_flavors != n_flavors:
            raise ValueError(
                f"coins.thetas: angles describe {n_flavors} flavors, got {self.coins.n_flavors} coin angles"
            )
        if self.initial.flavor.index >= n_flavors:
            raise ValueError(f"initial.flavor: '{self.initial.flavor.value}' needs three flavors")
        if self.matter is not None:
            self.matter.check_sites(self.lattice.n_sites)

        if self.scenario == "vacuum" and self.matter is not None:
            raise ValueError("matter: the vacuum scenario takes no matter profile")
        if self.scenario in ("matter", "levels"):
            if self.matter is None:
                raise ValueError(f"matter: required by the {self.scenario} scenario")
            if n_flavors != 2:
                raise ValueError(f"angles: the {self.scenario} scenario is two-flavor only (use phi_12)")
        if self.scenario == "compare":
            if self.matter is not None and not self.matter.is_uniform:
                raise ValueError("matter: compare needs vacuum or uniform matter, the momentum oracle is exact only there")
            if self.initial.packet is not None:
                raise ValueError("initial.packet: compare runs plane waves only")
        if self.scenario in ("matter", "levels") and self.lattice.k is None and self.lattice.mode_index == 0:
            raise ValueError(
                f"lattice.mode_index: the {self.scenario} scenario needs kappa > 0 or an explicit lattice.k"
            )
        if self.scenario == "map-experiment":
            if self.experiment is None:
                raise ValueError("experiment: required by the map-experiment scenario")
            if not 0.0 < self.lattice.kappa <= MAX_MAPPING_KAPPA:
                raise ValueError(
                    f"lattice.mode_index: map-experiment needs 0 < kappa <= {MAX_MAPPING_KAPPA}, "
                    f"got kappa={self.lattice.kappa:.6g}"
                )
        return self

    @property
    def n_flavors(self) -> int:
        return self.angles.n_flavors
