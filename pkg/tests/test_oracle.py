import math

import numpy as np
import pytest

from src.evaluation import fit_oscillation_frequency, max_abs_deviation
from src.lattice import (
    DimensionMismatchError,
    StepOperatorSpec,
    build_coin,
    evolve,
    flavor_probabilities,
    plane_wave_state,
)
from src.mixing import build_mixer, pmns, rotation_2flavor
from src.oracle import (
    DegenerateMixingError,
    EffectiveHamiltonian,
    PlaneWaveSpec,
    adiabaticity,
    asymptotic_transition,
    continuum_energies,
    continuum_phase,
    crossing_probability,
    effective_hamiltonian_matrix,
    effective_wavenumber,
    evolve_plane_wave,
    lattice_dispersion,
    matter_eigenvalues,
    matter_level_gap,
    matter_mixing_angle,
    mixing_angle_gradient,
    momentum_step_matrix,
    physical_phase,
    resonance_density,
    two_flavor_probability,
    vacuum_transition_probability,
)
from src.schema import CoinParameters, ExperimentSpec, MixingAngles, UniformProfile

COINS = CoinParameters(epsilon=1.0, thetas=[0.05, 0.15])
THREE_COINS = CoinParameters(epsilon=1.0, thetas=[0.02, 0.05, 0.1])
THREE_ANGLES = MixingAngles(phi_e_mu=0.59, phi_e_tau=0.15, phi_mu_tau=0.84)
REFERENCE_ANGLES = MixingAngles(phi_e_mu=0.34, phi_e_tau=0.54, phi_mu_tau=0.45)

# Level-crossing parameters: theta_e = 0.1, theta_mu = 0.2, k = 100
THETA_E, THETA_MU, K = 0.1, 0.2, 100.0
DM2 = THETA_MU**2 - THETA_E**2


# ---- Momentum-space step ----

def test_momentum_step_identity_limit():
    coins = CoinParameters(epsilon=1.0, thetas=[0.0, 0.0])

    np.testing.assert_allclose(momentum_step_matrix(0.0, coins, rotation_2flavor(0.4)), np.eye(4), atol=1e-15)


@pytest.mark.parametrize("coins,mixer", [
    (COINS, rotation_2flavor(0.4)),
    (THREE_COINS, pmns(THREE_ANGLES)),
])
@pytest.mark.parametrize("rho", [None, 0.3])
def test_momentum_step_is_unitary(coins, mixer, rho):
    matrix = momentum_step_matrix(0.7, coins, mixer, uniform_rho=rho)

    np.testing.assert_allclose(matrix @ matrix.conj().T, np.eye(2 * coins.n_flavors), atol=1e-14)


def test_momentum_step_without_mixing_is_block_diagonal():
    kappa = 0.5
    matrix = momentum_step_matrix(kappa, COINS, rotation_2flavor(0.0))
    shift_phase = np.diag([np.exp(1j * kappa), np.exp(-1j * kappa)])

    np.testing.assert_allclose(matrix[:2, :2], shift_phase @ build_coin(1.0, 0.05), atol=1e-15)
    np.testing.assert_allclose(matrix[2:, 2:], shift_phase @ build_coin(1.0, 0.15), atol=1e-15)
    np.testing.assert_allclose(matrix[:2, 2:], 0.0, atol=1e-15)


def test_momentum_step_rejects_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        momentum_step_matrix(0.5, THREE_COINS, rotation_2flavor(0.4))


@pytest.mark.parametrize("coins,angles", [
    (COINS, MixingAngles(phi_12=0.4)),
    (THREE_COINS, THREE_ANGLES),
    (THREE_COINS, REFERENCE_ANGLES),
])
@pytest.mark.parametrize("rho", [None, 0.02])
def test_lattice_walk_equals_momentum_oracle(coins, angles, rho):
    n_sites, mode_index, steps = 32, 3, 1000
    mixer = build_mixer(angles)
    matter = UniformProfile(rho0=rho) if rho is not None else None
    spec = StepOperatorSpec(coins, mixer, matter)

    lattice = np.array([
        flavor_probabilities(state)
        for _, state in evolve(plane_wave_state(n_sites, mode_index, n_flavors=coins.n_flavors), spec, steps)
    ])
    _, momentum = evolve_plane_wave(2 * math.pi * mode_index / n_sites, coins, mixer, steps, uniform_rho=rho)

    assert np.max(max_abs_deviation(lattice, momentum)) < 1e-10


def test_evolve_plane_wave_stride_records_final_step():
    mixer = rotation_2flavor(0.4)

    steps, strided = evolve_plane_wave(0.6, COINS, mixer, 10, stride=4)
    _, every = evolve_plane_wave(0.6, COINS, mixer, 10)

    np.testing.assert_array_equal(steps, [0, 4, 8, 10])
    np.testing.assert_allclose(strided, every[[0, 4, 8, 10]], atol=1e-13)


# ---- Dispersion ----

def test_lattice_dispersion_examples():
    assert lattice_dispersion(0.0, 0.4) == pytest.approx(0.4, abs=1e-15)
    assert lattice_dispersion(0.3, 0.0) == pytest.approx(0.3, abs=1e-15)
    assert lattice_dispersion(0.01, 0.3) == pytest.approx(math.acos(math.cos(0.01) * math.cos(0.3)))
    assert lattice_dispersion(0.01, 0.3) == pytest.approx(0.30016, abs=1e-5)


def test_lattice_dispersion_is_eigenphase_of_one_step():
    kappa, eps_theta = 0.7, 0.2
    one_step = np.diag([np.exp(1j * kappa), np.exp(-1j * kappa)]) @ build_coin(1.0, eps_theta)
    omega = lattice_dispersion(eps_theta, kappa)

    np.testing.assert_allclose(np.sort(np.angle(np.linalg.eigvals(one_step))), [-omega, omega], atol=1e-14)


def test_lattice_dispersion_relativistic_limit():
    assert lattice_dispersion(1e-3, 2e-3) == pytest.approx(math.hypot(1e-3, 2e-3), rel=1e-6)


def test_walk_oscillates_at_lattice_dispersion_difference():
    n_sites, mode_index, steps = 16, 2, 20000
    kappa = 2 * math.pi * mode_index / n_sites
    spec = StepOperatorSpec(COINS, rotation_2flavor(0.4))

    p_mu = [
        flavor_probabilities(state)[1]
        for _, state in evolve(plane_wave_state(n_sites, mode_index), spec, steps)
    ]
    fitted = fit_oscillation_frequency(np.arange(steps + 1), np.asarray(p_mu))

    delta_omega = lattice_dispersion(0.15, kappa) - lattice_dispersion(0.05, kappa)
    assert steps * delta_omega / (2 * math.pi) >= 10
    assert fitted == pytest.approx(delta_omega, rel=1e-6)


def _continuum_error(kappa, eps_theta1, eps_theta2, stride):
    coins = CoinParameters(epsilon=1.0, thetas=[eps_theta1, eps_theta2])
    delta_omega = lattice_dispersion(eps_theta2, kappa) - lattice_dispersion(eps_theta1, kappa)
    steps = stride * math.ceil(3.5 * 2 * math.pi / delta_omega / stride)

    recorded, probabilities = evolve_plane_wave(kappa, coins, rotation_2flavor(0.4), steps, stride=stride)
    fitted = fit_oscillation_frequency(recorded.astype(float), probabilities[:, 1])

    continuum = (eps_theta2**2 - eps_theta1**2) / (2 * kappa)
    return abs(fitted - continuum) / continuum


def test_continuum_limit_converges_quadratically():
    kappa = 2 * math.pi / 32
    coarse = _continuum_error(kappa, 0.01 * kappa, 0.02 * kappa, stride=250)
    fine = _continuum_error(kappa / 2, 0.005 * kappa, 0.01 * kappa, stride=500)

    assert coarse < 0.02
    assert 3.0 <= coarse / fine <= 5.0


def test_effective_wavenumber_tends_to_kappa():
    kappa = 0.05
    assert effective_wavenumber(1e-4, 3e-4, kappa) == pytest.approx(kappa, rel=1e-3)
    with pytest.raises(ValueError):
        effective_wavenumber(0.1, 0.1, kappa)


def test_plane_wave_spec():
    spec = PlaneWaveSpec.from_lattice(16, 2)

    assert spec.kappa == pytest.approx(math.pi / 4)
    assert spec.is_relativistic(COINS)
    assert not PlaneWaveSpec(0.5).is_relativistic(CoinParameters(epsilon=1.0, thetas=[0.05, 0.2]))
    with pytest.raises(ValueError):
        PlaneWaveSpec(0.0)


# ---- Continuum vacuum formulas ----

def test_vacuum_probability_at_zero_time_is_identity():
    mixer = pmns(THREE_ANGLES)

    for alpha in range(3):
        for beta in range(3):
            expected = 1.0 if alpha == beta else 0.0
            assert vacuum_transition_probability(mixer, [1.0, 2.0, 3.5], 0.0, alpha, beta) == pytest.approx(expected, abs=1e-15)


def test_vacuum_probability_with_degenerate_energies_never_oscillates():
    mixer = pmns(THREE_ANGLES)

    assert vacuum_transition_probability(mixer, [2.0, 2.0, 2.0], 37.0, 0, 0) == pytest.approx(1.0, abs=1e-14)
    assert vacuum_transition_probability(mixer, [2.0, 2.0, 2.0], 37.0, 0, 2) == pytest.approx(0.0, abs=1e-14)


def test_vacuum_probability_maximal_mixing():
    delta, t = 0.3, 4.0

    p = vacuum_transition_probability(rotation_2flavor(math.pi / 4), [1.0, 1.0 + delta], t, 0, 1)

    assert p == pytest.approx(math.sin(delta * t / 2) ** 2, abs=1e-14)


def test_vacuum_probability_is_conserved_for_random_samples():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(10_000):
        phi_e_mu, phi_e_tau, phi_mu_tau = rng.uniform(0, math.pi / 2, size=3)
        mixer = pmns(MixingAngles(phi_e_mu=phi_e_mu, phi_e_tau=phi_e_tau, phi_mu_tau=phi_mu_tau))
        energies = rng.uniform(0, 10, size=3)
        t = rng.uniform(0, 100)
        alpha = int(rng.integers(3))
        total = sum(vacuum_transition_probability(mixer, energies, t, alpha, beta) for beta in range(3))
        worst = max(worst, abs(total - 1.0))

    assert worst < 1e-12


def test_vacuum_probability_matches_2flavor_closed_form():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        phi = rng.uniform(0, math.pi / 2)
        e1, e2 = rng.uniform(0, 10, size=2)
        t = rng.uniform(0, 100)

        p = vacuum_transition_probability(rotation_2flavor(phi), [e1, e2], t, 0, 1)

        assert p == pytest.approx(math.sin(2 * phi) ** 2 * math.sin((e2 - e1) * t / 2) ** 2, abs=1e-12)


def test_vacuum_probability_rejects_wrong_energy_count():
    with pytest.raises(DimensionMismatchError):
        vacuum_transition_probability(rotation_2flavor(0.3), [1.0, 2.0, 3.0], 1.0, 0, 1)


def test_continuum_energies():
    mixer = rotation_2flavor(0.3)

    np.testing.assert_allclose(continuum_energies(EffectiveHamiltonian(50.0, (0.0, 0.0), mixer)), [50.0, 50.0])
    energies = continuum_energies(EffectiveHamiltonian(K, (THETA_E, THETA_MU), mixer))
    assert energies[1] == pytest.approx(100.0002, abs=1e-12)
    assert energies[1] - energies[0] == pytest.approx(DM2 / (2 * K), rel=1e-9)


def test_continuum_energies_warns_outside_relativistic_regime(caplog):
    continuum_energies(EffectiveHamiltonian(0.3, (0.1, 0.2), rotation_2flavor(0.3)))

    assert "outside their regime" in caplog.text


def test_effective_hamiltonian_rejects_mass_count_mismatch():
    with pytest.raises(DimensionMismatchError):
        EffectiveHamiltonian(K, (0.1, 0.2, 0.3), rotation_2flavor(0.3))
    with pytest.raises(ValueError):
        EffectiveHamiltonian(0.0, (0.1, 0.2), rotation_2flavor(0.3))


@pytest.mark.parametrize("dm2,energy,baseline,expected", [
    (1.0, 1.0, 0.0, 0.0),
    (1.0, 1.0, 1.0, 2.54),
    (2.5e-3, 0.6, 295.0, 3.122),
])
def test_physical_phase(dm2, energy, baseline, expected):
    spec = ExperimentSpec(dm2=dm2, energy=energy, baseline=baseline)

    assert physical_phase(spec) == pytest.approx(expected, abs=1e-3)


def test_continuum_phase():
    assert continuum_phase(0.3, 0.3, 10.0, 50.0) == 0.0
    assert continuum_phase(THETA_E, THETA_MU, K, 200.0) == pytest.approx(0.03)
    assert continuum_phase(THETA_E, THETA_MU, K, 400.0) == pytest.approx(2 * continuum_phase(THETA_E, THETA_MU, K, 200.0))


def test_two_flavor_probability():
    assert two_flavor_probability(math.pi / 4, math.pi / 2) == pytest.approx(1.0)
    assert two_flavor_probability(0.3, 0.0) == 0.0


def test_two_flavor_probability_at_half_continuum_phase_is_exact():
    phi, t = 0.4, 350.0
    energies = continuum_energies(EffectiveHamiltonian(k=K, masses=(THETA_E, THETA_MU), mixer=rotation_2flavor(phi)))

    exact = vacuum_transition_probability(rotation_2flavor(phi), energies, t, 0, 1)

    assert two_flavor_probability(phi, continuum_phase(THETA_E, THETA_MU, K, t) / 2) == pytest.approx(exact, abs=1e-9)


# ---- Matter ----

def test_matter_angle_in_vacuum():
    point = matter_mixing_angle(0.3, DM2, K, 0.0)

    assert point.resonance_factor == pytest.approx(1.0, abs=1e-15)
    assert point.phi_m == pytest.approx(0.3, abs=1e-15)
    assert point.gamma == math.inf


@pytest.mark.parametrize("phi", [0.12, 0.34, 0.6])
def test_matter_angle_at_resonance(phi):
    rho_r = resonance_density(phi, DM2, K)

    point = matter_mixing_angle(phi, DM2, K, rho_r)

    assert rho_r == pytest.approx(DM2 * math.cos(2 * phi) / (2 * K))
    assert point.sin2_2phi_m == pytest.approx(1.0, abs=1e-15)
    assert point.phi_m == pytest.approx(math.pi / 4, abs=1e-12)


def test_matter_angle_is_continuous_and_tends_to_half_pi():
    phi = 0.3
    rho_r = resonance_density(phi, DM2, K)
    angles = [matter_mixing_angle(phi, DM2, K, rho).phi_m for rho in np.linspace(0, 10 * rho_r, 200)]

    assert np.all(np.diff(angles) > 0)
    assert matter_mixing_angle(phi, DM2, K, 1e6 * rho_r).phi_m == pytest.approx(math.pi / 2, abs=1e-5)
    assert matter_mixing_angle(phi, DM2, K, 1e6 * rho_r).sin2_2phi_m < 1e-10


def test_matter_angle_degenerate_at_resonance():
    with pytest.raises(DegenerateMixingError):
        matter_mixing_angle(0.0, DM2, K, DM2 / (2 * K))


def test_matter_angle_rejects_bad_inputs():
    with pytest.raises(ValueError):
        matter_mixing_angle(0.3, -DM2, K, 0.0)
    with pytest.raises(ValueError):
        matter_mixing_angle(0.3, DM2, 0.0, 0.0)
    with pytest.raises(ValueError):
        matter_mixing_angle(2.0, DM2, K, 0.0)


@pytest.mark.parametrize("rho", [0.0, 5e-5, 1.2e-4, 3e-4])
def test_mixing_angle_gradient_matches_finite_difference(rho):
    phi, slope = 0.3, 2.0
    h = 5e-10

    numeric = (
        matter_mixing_angle(phi, DM2, K, rho + slope * h).phi_m
        - matter_mixing_angle(phi, DM2, K, rho - slope * h).phi_m
    ) / (2 * h)

    assert mixing_angle_gradient(phi, DM2, K, rho, slope) == pytest.approx(numeric, rel=1e-6)


def test_adiabaticity_at_resonance_for_linear_density():
    phi = 0.3
    rho_r = resonance_density(phi, DM2, K)

    gamma_r = adiabaticity(phi, DM2, K, rho_r, 1.0)

    assert mixing_angle_gradient(phi, DM2, K, rho_r, 1.0) == pytest.approx(K / (DM2 * math.sin(2 * phi)))
    assert gamma_r == pytest.approx(math.sin(2 * phi) * DM2**2 / (4 * K**2))
    assert adiabaticity(phi, DM2, K, rho_r, 0.5) == pytest.approx(2 * gamma_r)
    assert adiabaticity(phi, DM2, K, rho_r, 0.0) == math.inf


def test_matter_eigenvalues_in_vacuum():
    h = EffectiveHamiltonian(K, (THETA_E, THETA_MU), rotation_2flavor(0.7))

    lower, upper = matter_eigenvalues(h)

    assert lower == pytest.approx(K + THETA_E**2 / (2 * K), abs=1e-12)
    assert upper == pytest.approx(K + THETA_MU**2 / (2 * K), abs=1e-12)
    np.testing.assert_allclose(np.linalg.eigvalsh(effective_hamiltonian_matrix(h)), [lower, upper], atol=1e-12)


@pytest.mark.parametrize("phi", [0.12, 0.34, 0.6])
def test_level_gap_minimum_at_resonance(phi):
    mixer = rotation_2flavor(phi)
    rho_r = resonance_density(phi, DM2, K)
    expected = DM2 * math.sin(2 * phi) / (2 * K)

    gap_at_resonance = matter_level_gap(EffectiveHamiltonian(K, (THETA_E, THETA_MU), mixer, rho_r))
    sweep = [
        matter_level_gap(EffectiveHamiltonian(K, (THETA_E, THETA_MU), mixer, rho))
        for rho in np.linspace(0, 2 * rho_r, 401)
    ]

    assert gap_at_resonance == pytest.approx(expected, rel=1e-8)
    assert min(sweep) == pytest.approx(expected, rel=1e-8)
    assert int(np.argmin(sweep)) == 200


def test_smaller_vacuum_angle_gives_narrower_avoided_crossing():
    rho = np.linspace(0, 2 * resonance_density(0.12, DM2, K), 201)

    def min_gap(phi):
        mixer = rotation_2flavor(phi)
        return min(matter_level_gap(EffectiveHamiltonian(K, (THETA_E, THETA_MU), mixer, r)) for r in rho)

    assert min_gap(0.12) < min_gap(0.84)


def test_matter_eigenvalues_are_two_flavor_only():
    with pytest.raises(DimensionMismatchError):
        matter_eigenvalues(EffectiveHamiltonian(K, (0.1, 0.2, 0.3), pmns(THREE_ANGLES)))


def test_crossing_probability_limits():
    phi = math.pi / 4

    assert crossing_probability(0.0, 0.3) == pytest.approx(math.cos(0.3) ** 2)
    assert crossing_probability(math.inf, 0.3) == 0.0
    assert crossing_probability(1.0, phi) == pytest.approx(
        (math.exp(-math.pi / 2) - math.exp(-math.pi)) / (1 - math.exp(-math.pi)), abs=1e-14
    )
    assert crossing_probability(1.0, phi) == pytest.approx(0.1721, abs=1e-4)


def test_crossing_probability_adiabatic_limit():
    assert crossing_probability(10.0, 0.3) < 1e-6


@pytest.mark.parametrize("phi", [0.12, 0.34, 0.84])
def test_crossing_probability_sudden_limit(phi):
    assert abs(crossing_probability(1e-6, phi) - math.cos(phi) ** 2) < 1e-5


@pytest.mark.parametrize("phi", [0.12, 0.34, 0.84])
def test_crossing_probability_decreases_with_gamma(phi):
    values = [crossing_probability(gamma, phi) for gamma in np.logspace(-4, 1.5, 60)]

    assert np.all(np.diff(values) < 0)
    assert all(0.0 <= value <= 1.0 for value in values)


def test_crossing_probability_rejects_bad_inputs():
    with pytest.raises(ValueError):
        crossing_probability(-1.0, 0.3)
    with pytest.raises(ValueError):
        crossing_probability(1.0, 0.0)
    with pytest.raises(ValueError):
        crossing_probability(1.0, math.pi / 2)


def test_asymptotic_transition():
    phi = 0.3

    assert asymptotic_transition(0.5, 0.2, 1.1) == pytest.approx(0.5)
    assert asymptotic_transition(0.0, math.pi / 2, phi) == pytest.approx(math.cos(phi) ** 2)
    assert asymptotic_transition(0.0, 0.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        asymptotic_transition(1.5, 0.0, 0.0)
