"""
Scenario runners behind the nu-walk command line.

Each runner takes a validated ScenarioConfig and returns one of the result
tables from src.output; nothing here touches files.
"""
from typing import Any, Dict, Optional
import logging
import math

import numpy as np

from src.evaluation import log_comparison_metrics, log_mapping_metrics, log_series_metrics, max_abs_deviation
from src.lattice import (
    DimensionMismatchError,
    LatticeState,
    StepOperatorSpec,
    evolve,
    flavor_probabilities,
    plane_wave_state,
    wave_packet_state,
)
from src.mixing import build_mixer
from src.oracle import (
    EffectiveHamiltonian,
    adiabaticity,
    asymptotic_transition,
    continuum_phase,
    crossing_probability,
    effective_wavenumber,
    evolve_plane_wave,
    matter_eigenvalues,
    matter_level_gap,
    matter_mixing_angle,
    physical_phase,
    resonance_density,
)
from src.output import (
    ComparisonReport,
    ExperimentMapping,
    LevelTable,
    ProbabilitySeries,
    ScenarioResult,
)
from src.schema import MAX_MAPPING_KAPPA, ExperimentSpec, ScenarioConfig, Spin

logger = logging.getLogger(__name__)

# coin angles must stay below kappa / MASS_RATIO for the continuum phase to hold
MASS_RATIO = 5.0


class InfeasibleMappingError(ValueError):
    """The requested phase needs more steps than the budget allows."""

    def __init__(self, message: str, minimal_steps: int):
        super().__init__(message)
        self.minimal_steps = minimal_steps


def _require(config: ScenarioConfig, scenario: str) -> None:
    if config.scenario != scenario:
        raise ValueError(f"expected a {scenario} config, got {config.scenario}")


def _meta(config: ScenarioConfig) -> Dict[str, Any]:
    return config.model_dump(mode="json", exclude={"description"})


def step_operator(config: ScenarioConfig) -> StepOperatorSpec:
    return StepOperatorSpec(
        coins=config.coins,
        mixer=build_mixer(config.angles),
        matter=config.matter,
        boundary=config.boundary,
    )


def initial_state(config: ScenarioConfig) -> LatticeState:
    """Plane wave, or a Gaussian packet when `initial.packet` is set."""
    lattice, initial = config.lattice, config.initial
    if initial.packet is None:
        return plane_wave_state(
            lattice.n_sites, lattice.mode_index, initial.flavor, initial.spin, config.n_flavors
        )
    return wave_packet_state(
        lattice.n_sites,
        initial.packet.center,
        initial.packet.width,
        lattice.mode_index,
        initial.flavor,
        initial.spin,
        config.n_flavors,
    )


def _walk_series(config: ScenarioConfig, show_progress: bool = False) -> ProbabilitySeries:
    logger.info({
        "event": "scenario_start",
        "scenario": config.scenario,
        "n_sites": config.lattice.n_sites,
        "n_flavors": config.n_flavors,
        "steps": config.lattice.steps,
    })
    steps, probabilities, norms = [], [], []
    for j, state in evolve(
        initial_state(config),
        step_operator(config),
        config.lattice.steps,
        stride=config.output.stride,
        show_progress=show_progress,
    ):
        steps.append(j)
        probabilities.append(flavor_probabilities(state))
        norms.append(state.norm)

    steps = np.asarray(steps)
    return ProbabilitySeries(
        steps=steps,
        times=steps * config.coins.epsilon,
        probabilities=np.asarray(probabilities),
        norms=np.asarray(norms),
        meta=_meta(config),
    )


def run_vacuum(config: ScenarioConfig, show_progress: bool = False) -> ProbabilitySeries:
    _require(config, "vacuum")
    series = _walk_series(config, show_progress)
    log_series_metrics(config.scenario, series)
    return series


def run_matter(config: ScenarioConfig, show_progress: bool = False) -> ProbabilitySeries:
    """Walk through the matter profile and attach the asymptotic-probability oracle."""
    _require(config, "matter")
    series = _walk_series(config, show_progress)
    series.oracle = matter_trajectory_oracle(config)
    log_series_metrics(config.scenario, series)
    return series


def matter_trajectory_oracle(config: ScenarioConfig) -> Optional[Dict[str, Any]]:
    """
    Asymptotic transition probability along the path of the initial packet.

    The spin-up component moves one site per step toward lower sites and
    spin-down toward higher sites; a plane wave starts at the first site of
    its path. The spin-down component is the negative-energy branch, which
    sees the matter potential with the opposite sign.

    Returns None (with a warning) when the two-flavor matter formulas do not
    apply to the configured angles and masses, and for a plane wave in
    non-uniform matter, which has no single trajectory.
    """
    theta1, theta2 = config.coins.thetas
    epsilon = config.coins.epsilon
    n_sites = config.lattice.n_sites
    phi = config.angles.phi_12
    dm2 = theta2**2 - theta1**2

    if dm2 <= 0:
        logger.warning("Matter oracle skipped: needs theta_2 > theta_1 in magnitude")
        return None
    if not 0.0 < phi < math.pi / 2:
        logger.warning(f"Matter oracle skipped: phi_12={phi} outside (0, pi/2)")
        return None
    if config.initial.packet is None and not config.matter.is_uniform:
        logger.warning("Matter oracle skipped: a plane wave samples every density at once; set initial.packet")
        return None

    if config.lattice.k is not None:
        k = config.lattice.k
    else:
        k = effective_wavenumber(epsilon * theta1, epsilon * theta2, config.lattice.kappa, epsilon)

    spin = config.initial.spin
    direction = -1 if spin is Spin.UP else 1
    sign = 1.0 if spin is Spin.UP else -1.0
    if config.initial.packet is not None:
        start_site = config.initial.packet.center
    else:
        start_site = n_sites - 1 if spin is Spin.UP else 0

    length = n_sites * epsilon
    path = (start_site + direction * np.arange(config.lattice.steps + 1)) * epsilon
    positions = np.mod(path, length)
    densities = sign * config.matter.density(positions, epsilon)

    start = matter_mixing_angle(phi, dm2, k, float(densities[0]))
    end = matter_mixing_angle(phi, dm2, k, float(densities[-1]))

    rho_r = resonance_density(phi, dm2, k)
    offset = densities - rho_r
    crossings = np.nonzero(np.sign(offset[:-1]) * np.sign(offset[1:]) <= 0)[0]

    resonance_x: Any = "none"
    gamma_r = math.inf
    if crossings.size:
        j = int(crossings[0])
        if offset[j] == offset[j + 1]:
            fraction = 0.0
        else:
            fraction = offset[j] / (offset[j] - offset[j + 1])
        resonance_x = float(np.mod(path[j] + fraction * (path[j + 1] - path[j]), length))
        gradient = sign * float(config.matter.gradient(resonance_x, epsilon))
        gamma_r = adiabaticity(phi, dm2, k, rho_r, gradient)

    crossing = crossing_probability(gamma_r, phi)
    oracle = {
        "k": k,
        "dm2": dm2,
        "x_initial": float(positions[0]),
        "x_final": float(positions[-1]),
        "phi_initial": start.phi_m,
        "phi_final": end.phi_m,
        "resonance_density": rho_r,
        "resonance_x": resonance_x,
        "gamma_r": gamma_r,
        "crossing_probability": crossing,
        "asymptotic_transition": asymptotic_transition(crossing, start.phi_m, end.phi_m),
    }
    logger.info({"event": "matter_oracle", **oracle})
    return oracle


def run_levels(config: ScenarioConfig) -> LevelTable:
    """Instantaneous matter eigenvalues at every lattice position."""
    _require(config, "levels")
    n_sites, epsilon = config.lattice.n_sites, config.coins.epsilon
    k = config.lattice.k if config.lattice.k is not None else config.lattice.kappa / epsilon
    mixer = build_mixer(config.angles)

    x = np.arange(n_sites) * epsilon
    rho = config.matter.site_densities(n_sites, epsilon)
    e1, e2, gap = [], [], []
    for density in rho:
        h = EffectiveHamiltonian(k=k, masses=tuple(config.coins.thetas), mixer=mixer, rho=float(density))
        lower, upper = matter_eigenvalues(h)
        e1.append(lower)
        e2.append(upper)
        gap.append(matter_level_gap(h))

    table = LevelTable(
        x=x, rho=np.asarray(rho, dtype=float), e1=np.asarray(e1), e2=np.asarray(e2), gap=np.asarray(gap),
        meta=_meta(config),
    )
    logger.info({"event": "scenario_done", "scenario": "levels", "rows": n_sites, "resonance_x": table.resonance_x})
    return table


def momentum_series(config: ScenarioConfig) -> ProbabilitySeries:
    """The plane-wave run of `config` evolved in momentum space."""
    uniform_rho = None
    if config.matter is not None:
        if not config.matter.is_uniform:
            raise ValueError("momentum-space evolution needs vacuum or uniform matter")
        uniform_rho = float(config.matter.site_densities(config.lattice.n_sites, config.coins.epsilon)[0])

    steps, probabilities = evolve_plane_wave(
        config.lattice.kappa,
        config.coins,
        build_mixer(config.angles),
        config.lattice.steps,
        config.initial.flavor,
        config.initial.spin,
        uniform_rho=uniform_rho,
        stride=config.output.stride,
    )
    return ProbabilitySeries(
        steps=steps,
        times=steps * config.coins.epsilon,
        probabilities=probabilities,
        norms=probabilities.sum(axis=1),
        meta=_meta(config),
    )


def compare_series(first: ProbabilitySeries, second: ProbabilitySeries) -> np.ndarray:
    """
    Per-flavor max |P_first - P_second| over all recorded steps.

    Raises:
        DimensionMismatchError: if the runs differ in sites, flavors or recorded steps
    """
    first_sites = first.meta.get("lattice", {}).get("n_sites")
    second_sites = second.meta.get("lattice", {}).get("n_sites")
    if first_sites != second_sites:
        raise DimensionMismatchError(f"runs have {first_sites} and {second_sites} sites")
    if first.n_flavors != second.n_flavors:
        raise DimensionMismatchError(f"runs have {first.n_flavors} and {second.n_flavors} flavors")
    if not np.array_equal(first.steps, second.steps):
        raise DimensionMismatchError("runs recorded different steps")
    return max_abs_deviation(first.probabilities, second.probabilities)


def run_compare(config: ScenarioConfig, show_progress: bool = False) -> ComparisonReport:
    """Lattice walk against the momentum-space oracle for the same plane wave."""
    _require(config, "compare")
    if config.matter is not None and not config.matter.is_uniform:
        raise ValueError("compare needs vacuum or uniform matter")

    lattice = _walk_series(config, show_progress)
    momentum = momentum_series(config)
    deviations = compare_series(lattice, momentum)

    report = ComparisonReport(
        labels=lattice.labels,
        deviations=[float(d) for d in deviations],
        meta=_meta(config),
    )
    log_comparison_metrics(report)
    return report


def minimal_steps(spec: ExperimentSpec, kappa: float = MAX_MAPPING_KAPPA) -> int:
    """Fewest steps that reach the physical phase with every coin angle below kappa / 5."""
    phase = physical_phase(spec)
    return max(1, math.ceil(2 * MASS_RATIO**2 * phase / kappa))


def required_steps(spec: ExperimentSpec, theta1: float, theta2: float, kappa: float, epsilon: float = 1.0) -> float:
    """Steps for which the continuum phase of (theta1, theta2, kappa / epsilon) matches the experiment."""
    rate = continuum_phase(theta1, theta2, kappa / epsilon, epsilon)
    if rate == 0.0:
        raise ValueError("equal masses accumulate no phase")
    return physical_phase(spec) / rate


def map_experiment(
    spec: ExperimentSpec,
    target_steps: int,
    kappa: float = MAX_MAPPING_KAPPA,
    epsilon: float = 1.0,
) -> ExperimentMapping:
    """
    Lattice parameters whose continuum phase after `target_steps` equals the
    experiment's oscillation phase.

    The lighter state is massless and the heavier one takes the whole phase:
    eps*theta2 = sqrt(2 kappa phase / steps).

    Raises:
        InfeasibleMappingError: the mass would leave the relativistic window
    """
    if target_steps < 1:
        raise ValueError(f"target_steps must be at least 1, got {target_steps}")
    if not 0.0 < kappa <= MAX_MAPPING_KAPPA:
        raise ValueError(f"kappa must lie in (0, {MAX_MAPPING_KAPPA}], got {kappa}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")

    target = physical_phase(spec)
    eps_theta2 = math.sqrt(2 * kappa * target / target_steps)
    if eps_theta2 > kappa / MASS_RATIO * (1 + 1e-12):
        needed = minimal_steps(spec, kappa)
        raise InfeasibleMappingError(
            f"phase {target:.6g} rad needs at least {needed} steps at kappa={kappa:g}, got {target_steps}",
            minimal_steps=needed,
        )

    theta1, theta2 = 0.0, eps_theta2 / epsilon
    mapping = ExperimentMapping(
        theta1=theta1,
        theta2=theta2,
        kappa=kappa,
        epsilon=epsilon,
        steps=target_steps,
        target_phase=target,
        achieved_phase=continuum_phase(theta1, theta2, kappa / epsilon, target_steps * epsilon),
    )
    log_mapping_metrics(mapping)
    return mapping


def run_map_experiment(config: ScenarioConfig) -> ExperimentMapping:
    _require(config, "map-experiment")
    mapping = map_experiment(
        config.experiment,
        config.lattice.steps,
        kappa=config.lattice.kappa,
        epsilon=config.coins.epsilon,
    )
    mapping.meta = _meta(config)
    return mapping


def run_scenario(config: ScenarioConfig, show_progress: bool = False) -> ScenarioResult:
    if config.scenario == "vacuum":
        return run_vacuum(config, show_progress)
    if config.scenario == "matter":
        return run_matter(config, show_progress)
    if config.scenario == "levels":
        return run_levels(config)
    if config.scenario == "compare":
        return run_compare(config, show_progress)
    return run_map_experiment(config)
