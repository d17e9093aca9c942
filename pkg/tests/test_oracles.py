"""Closed-form subspace propagators against brute-force matrix exponentials."""

import numpy as np
import pytest
from scipy.linalg import expm

from usctraj.model import SystemParams, effective_couplings
from usctraj.oracles import (
    ZETA_VARIANTS,
    _sinq,
    big_gamma,
    eta_parameter,
    expectations_1p2a,
    one_photon_subspace_hamiltonian,
    qq_expectations_after_collective_jump,
    qq_expectations_after_local_jump,
    qq_subspace_hamiltonian,
    u_1p2a,
    u_qq,
    zeta_parameter,
)

PROPAGATOR_TOL = 1e-8
EXPECTATION_TOL = 1e-6


def brute_force(h, times):
    return np.stack([expm(-1j * h * t) for t in times])


def two_periods(freq, n=160):
    period = 2.0 * np.pi / freq
    return np.linspace(0.0, 2.0 * period, n)


@pytest.fixture(scope="module")
def p_dissipative():
    return SystemParams(kappa=4e-5, gamma1=4e-5, gamma2=4e-5, gamma_c=2e-5)


def test_sinq_limit_and_identity():
    t = np.linspace(0.0, 10.0, 7)
    np.testing.assert_allclose(_sinq(t, 0.0), t / 4.0, atol=1e-15)
    x = 0.37
    np.testing.assert_allclose(_sinq(t, x), np.sin(x * t / 4.0) / x, atol=1e-15)


def test_sinq_continuous_through_zero():
    t = np.array([5.0])
    vals = [float(np.real(_sinq(t, x)[0])) for x in (1e-4, 1e-8, 0.0)]
    # the x = 1e-4 point sits a Taylor remainder ~ (x t/4)^2 / 6 away
    assert abs(vals[0] - vals[2]) < 1e-8
    assert abs(vals[1] - vals[2]) < 1e-15


def test_eta_parameter_values():
    # balanced rates: eta = 4 |omega3| exactly
    p_bal = SystemParams(kappa=8e-5, gamma1=4e-5, gamma2=4e-5)
    assert eta_parameter(p_bal) == pytest.approx(0.004, abs=1e-15)
    # unbalanced: the quoted quadrature formula
    p = SystemParams(kappa=4e-5, gamma1=4e-5, gamma2=4e-5)
    expected = np.sqrt(0.004**2 - (4e-5) ** 2)
    assert eta_parameter(p) == pytest.approx(expected, abs=1e-15)
    # overdamped: imaginary
    p_over = SystemParams(theta=np.pi / 2, kappa=1e-3)
    eta = eta_parameter(p_over)
    assert eta.real == 0.0 and eta.imag > 0


def test_pair_propagator_equals_matrix_exponential(p_dissipative):
    p = p_dissipative
    eta = eta_parameter(p)
    times = two_periods(eta.real / 2.0)
    h = one_photon_subspace_hamiltonian(p)
    u_closed = u_1p2a(times, p)
    u_ref = brute_force(h, times)
    assert np.max(np.abs(u_closed - u_ref)) < PROPAGATOR_TOL


def test_pair_propagator_overdamped_branch():
    p = SystemParams(theta=np.pi / 2, kappa=1e-3, gamma1=1e-5, gamma2=1e-5)
    times = np.linspace(0.0, 5000.0, 50)
    u_closed = u_1p2a(times, p)
    u_ref = brute_force(one_photon_subspace_hamiltonian(p), times)
    assert np.max(np.abs(u_closed - u_ref)) < PROPAGATOR_TOL


def test_pair_propagator_energy_offset(p_dissipative):
    p = p_dissipative
    times = np.linspace(0.0, 800.0, 9)
    e0 = 1.98
    u_closed = u_1p2a(times, p, energy=e0)
    u_ref = brute_force(one_photon_subspace_hamiltonian(p, energy=e0), times)
    assert np.max(np.abs(u_closed - u_ref)) < PROPAGATOR_TOL


def test_pair_expectations_against_projection(p_dissipative):
    p = p_dissipative
    eta = eta_parameter(p)
    times = two_periods(eta.real / 2.0)
    u_ref = brute_force(one_photon_subspace_hamiltonian(p), times)
    phi = u_ref @ np.array([1.0, 0.0])
    norm = np.abs(phi[:, 0]) ** 2 + np.abs(phi[:, 1]) ** 2
    pc, pq = expectations_1p2a(times, p)
    np.testing.assert_allclose(pc, np.abs(phi[:, 0]) ** 2 / norm, atol=EXPECTATION_TOL)
    np.testing.assert_allclose(pq, np.abs(phi[:, 1]) ** 2 / norm, atol=EXPECTATION_TOL)


def test_pair_population_oscillates_at_half_eta():
    # with kappa = Gamma the conditional photon population is
    # cos^2(eta t / 4): angular frequency eta / 2
    p = SystemParams(kappa=8e-5, gamma1=4e-5, gamma2=4e-5)
    eta = eta_parameter(p).real
    times = np.linspace(0.0, 4.0 * np.pi / eta, 400)
    pc, _ = expectations_1p2a(times, p)
    np.testing.assert_allclose(pc, np.cos(eta * times / 4.0) ** 2, atol=1e-12)


def test_qq_model_variant_equals_matrix_exponential():
    cases = [
        SystemParams(gamma1=3e-4, gamma2=1e-4, gamma_c=0.0, delta=0.0),
        SystemParams(gamma1=0.0, gamma2=0.0, gamma_c=4e-4, delta=0.0),
        SystemParams(gamma1=2e-4, gamma2=1e-4, gamma_c=3e-4, delta=0.004),
    ]
    for p in cases:
        zeta = zeta_parameter(p)
        freq = max(abs(zeta) / 2.0, 1e-3)
        times = two_periods(freq)
        h = qq_subspace_hamiltonian(p)
        u_closed = u_qq(times, p, zeta_variant="model")
        u_ref = brute_force(h, times)
        assert np.max(np.abs(u_closed - u_ref)) < PROPAGATOR_TOL


def test_qq_energy_offset_and_delta_override():
    p = SystemParams(gamma1=2e-4, gamma2=1e-4, gamma_c=3e-4, delta=0.004)
    times = np.linspace(0.0, 3000.0, 40)
    d_eff, e0 = 0.0035, 0.99
    u_closed = u_qq(times, p, zeta_variant="model", delta=d_eff, energy=e0)
    u_ref = brute_force(qq_subspace_hamiltonian(p, delta=d_eff, energy=e0), times)
    assert np.max(np.abs(u_closed - u_ref)) < PROPAGATOR_TOL


def test_qq_variants_agree_only_at_zero_detuning():
    p0 = SystemParams(gamma1=2e-4, gamma2=1e-4, gamma_c=3e-4, delta=0.0)
    times = np.linspace(0.0, 5000.0, 30)
    np.testing.assert_allclose(
        u_qq(times, p0, zeta_variant="printed"),
        u_qq(times, p0, zeta_variant="model"),
        atol=1e-12,
    )
    pd = SystemParams(gamma1=2e-4, gamma2=1e-4, gamma_c=3e-4, delta=0.004)
    diff = np.max(
        np.abs(
            u_qq(times, pd, zeta_variant="printed")
            - u_qq(times, pd, zeta_variant="model")
        )
    )
    # the conventions weight the detuning differently; the mismatch is real
    assert diff > 1e-3


def test_zeta_values():
    assert ZETA_VARIANTS == ("model", "printed")
    # gamma_c only, identical resonant qubits: zeta = 4 omega2 - i gamma_c
    p = SystemParams(gamma_c=5e-4)
    ec = effective_couplings(p)
    zeta = zeta_parameter(p)
    expected = 4.0 * ec.omega2 - 1j * 5e-4
    # zeta is defined through a square of this quantity; compare magnitudes
    assert abs(zeta**2 - expected**2) < 1e-18
    with pytest.raises(ValueError):
        zeta_parameter(p, zeta_variant="bogus")


def test_local_jump_exchange_between_qubits():
    # lossless identical qubits: the surviving excitation swaps at the
    # exchange frequency, population of qubit 2 = cos^2(omega2 t)
    p = SystemParams()
    ec = effective_couplings(p)
    times = np.linspace(0.0, 2.0 * np.pi / abs(ec.omega2), 300)
    c1, c2 = qq_expectations_after_local_jump(times, p)
    np.testing.assert_allclose(c2, np.cos(ec.omega2 * times) ** 2, atol=1e-10)
    np.testing.assert_allclose(c1 + c2, 1.0, atol=1e-12)


def test_local_jump_freezes_on_rotating_wave_branch():
    # detuned qubits without exchange or collective decay: nothing moves
    p = SystemParams(delta=0.15, gamma1=4e-5, gamma2=4e-5, gamma_c=0.0)
    assert effective_couplings(p).omega2 == 0.0
    times = np.linspace(0.0, 40000.0, 100)
    c1, c2 = qq_expectations_after_local_jump(times, p)
    np.testing.assert_allclose(c1, 0.0, atol=1e-12)
    np.testing.assert_allclose(c2, 1.0, atol=1e-12)


def test_local_jump_collective_filtering_converges_to_half():
    # identical qubits, collective decay: the no-jump record filters toward
    # the dark antisymmetric state, so both populations approach 1/2
    p = SystemParams(gamma_c=5e-4)
    times = np.array([0.0, 1e5, 2e5])
    c1, c2 = qq_expectations_after_local_jump(times, p)
    assert c1[0] == pytest.approx(0.0, abs=1e-12)
    assert c2[0] == pytest.approx(1.0, abs=1e-12)
    assert abs(c1[-1] - 0.5) < 1e-2
    assert abs(c2[-1] - 0.5) < 1e-2


def test_collective_jump_symmetric_point_is_stationary():
    p = SystemParams(gamma_c=5e-4)
    times = np.linspace(0.0, 5e4, 60)
    c1, c2 = qq_expectations_after_collective_jump(times, p)
    np.testing.assert_allclose(c1, 0.5, atol=1e-6)
    np.testing.assert_allclose(c2, 0.5, atol=1e-6)


def test_collective_jump_rate_imbalance_direction():
    times = np.linspace(0.0, 3e4, 50)
    p_fast1 = SystemParams(delta=0.15, gamma1=4e-4, gamma2=4e-5, gamma_c=5e-4)
    c1, c2 = qq_expectations_after_collective_jump(times, p_fast1)
    # the lossier qubit drains monotonically
    assert np.all(np.diff(c1) < 0)
    assert np.all(np.diff(c2) > 0)
    p_fast2 = SystemParams(delta=0.15, gamma1=4e-5, gamma2=4e-4, gamma_c=5e-4)
    d1, d2 = qq_expectations_after_collective_jump(times, p_fast2)
    assert np.all(np.diff(d1) > 0)
    assert np.all(np.diff(d2) < 0)
    # swapping the qubit roles mirrors the curves
    np.testing.assert_allclose(c1, d2, atol=1e-12)


def test_big_gamma_sum():
    p = SystemParams(gamma1=1e-4, gamma2=2e-4, gamma_c=3e-4)
    assert big_gamma(p) == pytest.approx(6e-4, abs=1e-18)
