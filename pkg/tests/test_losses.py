from math import comb, exp, factorial, sqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from focklat.fockspace import DensityMatrix, embed_state, truncated_basis
from focklat.hamiltonian import build_hamiltonian
from focklat.lattice import localized_patch
from focklat.losses import (
    apply_channel,
    apply_two_core_channel,
    kraus_set,
    lift_to_mode,
    loss_branches,
    lossy_qubit_report,
    master_equation_residual,
    mean_photon_number,
    propagate_density,
    span_fidelity,
)
from focklat.states import CATALOG, localized_state

RHOMB = CATALOG["rhomboidal"]


def psi_r(n, cutoff=None):
    return localized_state(RHOMB, n, truncated_basis(2, n if cutoff is None else cutoff))


@pytest.mark.parametrize("gamma", [0.1, 0.5, 0.9])
def test_completeness(gamma):
    assert kraus_set(gamma, 8).completeness_error() < 1e-12


@settings(max_examples=30)
@given(st.floats(0.0, 0.999), st.integers(0, 12))
def test_completeness_property(gamma, n_max):
    ks = kraus_set(gamma, n_max)
    assert ks.completeness_error() < 1e-12
    for k, e in enumerate(ks.operators):
        rows, cols = np.nonzero(e)
        assert np.all(cols - rows == k)


def test_zero_loss_is_identity():
    ks = kraus_set(0.0, 5)
    assert np.array_equal(ks.operators[0], np.eye(6))
    assert all(not e.any() for e in ks.operators[1:])


def test_single_photon_decay_amplitude():
    e1 = kraus_set(0.3, 3).operators[1]
    assert e1[0, 1] == pytest.approx(sqrt(0.3))


def test_matches_exponential_form_with_half_rate():
    # E_k = sqrt(g**k / k!) exp(-r dt a^dag a / 2) a**k with g = 1 - exp(-r dt)
    rate_dt, n_max = 0.4, 6
    gamma = 1 - exp(-rate_dt)
    a = np.diag(np.sqrt(np.arange(1, n_max + 1)), 1)
    num = np.diag(np.arange(n_max + 1))
    ks = kraus_set(gamma, n_max)
    for k in range(n_max + 1):
        ref = sqrt(gamma**k / factorial(k)) * expm(-rate_dt * num / 2) @ np.linalg.matrix_power(a, k)
        assert np.allclose(ks.operators[k], ref, atol=1e-13)


def test_full_rate_exponent_is_not_trace_preserving():
    rate_dt, n_max = 0.4, 6
    gamma = 1 - exp(-rate_dt)
    a = np.diag(np.sqrt(np.arange(1, n_max + 1)), 1)
    num = np.diag(np.arange(n_max + 1))
    ops = [sqrt(gamma**k / factorial(k)) * expm(-rate_dt * num) @ np.linalg.matrix_power(a, k) for k in range(n_max + 1)]
    total = sum(e.T @ e for e in ops)
    assert np.abs(total - np.eye(n_max + 1)).max() > 0.1


def test_gamma_range():
    for bad in (-0.1, 1.0, 1.5):
        with pytest.raises(ValueError):
            kraus_set(bad, 3)


def test_lifted_operator_acts_on_one_mode():
    basis = truncated_basis(3, 3)
    e = lift_to_mode(0.2, 1, basis, 2).toarray()
    i, j = basis.index((0, 1, 2)), basis.index((0, 1, 1))
    assert e[j, i] == pytest.approx(sqrt(2 * 0.2 * 0.8))


@pytest.mark.parametrize("gamma", [0.0, 0.2, 0.7])
@pytest.mark.parametrize("n", [1, 2, 4])
def test_output_is_valid_and_stays_in_family(gamma, n):
    rho = apply_two_core_channel(psi_r(n), (0, 1), gamma)
    rho.validate(tol=1e-12, psd_tol=1e-10)
    assert span_fidelity(rho) == pytest.approx(1.0, abs=1e-10)


def test_zero_loss_channel_is_identity():
    rho = psi_r(3).density_matrix()
    assert np.allclose(apply_two_core_channel(rho, (0, 1), 0.0).matrix, rho.matrix)


def test_binomial_photon_statistics():
    gamma, n = 0.35, 2
    rho = apply_two_core_channel(psi_r(n), (0, 1), gamma)
    for m in range(n + 1):
        v = localized_state(RHOMB, m, rho.basis).amplitudes
        w = np.vdot(v, rho.matrix @ v).real
        assert w == pytest.approx(comb(n, m) * (1 - gamma) ** m * gamma ** (n - m), abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 0.95), st.integers(0, 10_000))
def test_mean_photon_number_decays(gamma, seed):
    rng = np.random.default_rng(seed)
    basis = truncated_basis(2, 3)
    v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    v /= np.linalg.norm(v)
    rho = DensityMatrix(basis, np.outer(v, v.conj()))
    out = apply_two_core_channel(rho, (0, 1), gamma)
    assert mean_photon_number(out) == pytest.approx((1 - gamma) * mean_photon_number(rho), abs=1e-10)


def test_sequential_application_composes():
    rho = psi_r(3).density_matrix()
    g1, g2 = 0.2, 0.3
    twice = apply_channel(apply_channel(rho, 0, g1), 0, g2)
    once = apply_channel(rho, 0, 1 - (1 - g1) * (1 - g2))
    assert np.allclose(twice.matrix, once.matrix, atol=1e-13)


def test_master_equation_consistency():
    rho = psi_r(3).density_matrix()
    r1 = master_equation_residual(rho, (0, 1), 1.0, 1e-3)
    r2 = master_equation_residual(rho, (0, 1), 1.0, 1e-4)
    assert r1 < 1e-2
    assert r2 == pytest.approx(r1 / 10, rel=0.05)


def test_branches_sum_to_channel():
    rho = psi_r(3).density_matrix()
    total = sum(loss_branches(rho, (0, 1), 0.4).values())
    assert np.allclose(total, apply_two_core_channel(rho, (0, 1), 0.4).matrix, atol=1e-13)


def test_qubit_report_no_loss():
    rep = lossy_qubit_report(0.6, 0.8, 2, 1, 0.0)
    assert len(rep.branches) == 1
    b = rep.branches[0]
    assert b.k == 0 and b.weight == pytest.approx(1.0) and b.overlap == pytest.approx(1.0)


def test_qubit_report_single_photon_encoding():
    rep = lossy_qubit_report(2**-0.5, 2**-0.5, 1, 1, 0.3)
    first = rep.branches[0]
    assert first.k == 0 and first.coherence > 0.1
    assert sum(b.weight for b in rep.branches) == pytest.approx(1.0, abs=1e-12)
    for b in rep.branches:
        assert b.purity == pytest.approx(1.0, abs=1e-10)
        assert b.overlap == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 3), st.integers(1, 3), st.floats(0.01, 0.9), st.floats(0.1, 1.4))
def test_every_branch_is_a_coherent_superposition(n, m, gamma, angle):
    rep = lossy_qubit_report(np.cos(angle), np.sin(angle), n, m, gamma)
    for b in rep.branches:
        assert b.purity == pytest.approx(1.0, abs=1e-10)
        assert b.overlap == pytest.approx(1.0, abs=1e-10)


def test_qubit_report_validates():
    with pytest.raises(ValueError):
        lossy_qubit_report(1.0, 1.0, 1, 1, 0.1)
    with pytest.raises(ValueError):
        lossy_qubit_report(1.0, 0.0, 1, 0, 0.1)


def test_localization_survives_loss_and_propagation():
    lat = localized_patch("rhomboidal")
    basis = truncated_basis(lat.size, 3)
    psi = embed_state(localized_state(RHOMB, 3), basis, lat.cell_sites)
    rho = apply_two_core_channel(psi, lat.cell_sites, 0.4)
    out = propagate_density(build_hamiltonian(lat, basis), rho, 5.0)
    pops = np.real(np.diag(out.matrix)) @ basis.occupations
    assert pops[list(lat.connectors)].sum() < 1e-12


def test_channel_needs_truncated_basis():
    with pytest.raises(ValueError):
        apply_two_core_channel(localized_state(RHOMB, 2), (0, 1), 0.1)
