from math import comb, sqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from focklat.entanglement import (
    as_two_qubits,
    concurrence,
    concurrence_closed_form,
    decomposition_average_concurrences,
    max_concurrence,
    monogamy,
    negativity,
    negativity_asymptotic_leading,
    negativity_closed_form,
    ph_test,
    rho_ab_from_blocks,
    schmidt,
    schmidt_closed_form,
    stub_tripartite_closed_form,
    stub_tripartite_coefficients,
    wootters_concurrence,
)
from focklat.fockspace import DensityMatrix, StateVector, enumerate_basis, fidelity, partial_trace, truncated_basis
from focklat.states import CATALOG, localized_state

import oracles

RHOMB = CATALOG["rhomboidal"]
STUB = CATALOG["stub"]


def psi_r(n):
    return localized_state(RHOMB, n)


def psi_s(n):
    return localized_state(STUB, n)


def test_schmidt_examples():
    assert np.allclose(schmidt(psi_r(1), [0]).coefficients, [2**-0.5, 2**-0.5])
    assert np.allclose(schmidt(psi_r(2), [0]).coefficients, [2**-0.5, 0.5, 0.5])


@pytest.mark.parametrize("n", range(1, 13))
def test_schmidt_matches_closed_form(n):
    spec = schmidt(psi_r(n), [0])
    assert spec.rank() == n + 1
    assert np.allclose(spec.coefficients, schmidt_closed_form(n), atol=1e-12)
    assert np.sum(spec.coefficients**2) == pytest.approx(1.0, abs=1e-12)


def test_schmidt_rejects_mixed_input():
    with pytest.raises(TypeError):
        schmidt(psi_r(1).density_matrix(), [0])


def test_negativity_small_n():
    assert negativity(psi_r(1), [0]) == pytest.approx(1.0, abs=1e-12)
    assert negativity(psi_r(2), [0]) == pytest.approx(0.25 + 1 / sqrt(2), abs=1e-12)


@pytest.mark.parametrize("n", range(1, 11))
def test_negativity_routes_agree(n):
    a = negativity(psi_r(n), [0], "schmidt")
    b = negativity(psi_r(n), [0], "pt")
    assert abs(a - b) < 1e-10
    assert a == pytest.approx(negativity_closed_form(n), abs=1e-12)


def test_negativity_matches_product_space_oracle():
    n = 3
    full = oracles.to_product(psi_r(n), n)
    norm = oracles.negativity_trace_norm(np.outer(full, full.conj()), n + 1, n + 1)
    assert negativity(psi_r(n), [0]) == pytest.approx((norm - 1) / n, abs=1e-12)


def test_negativity_zero_photons_warns():
    with pytest.warns(RuntimeWarning):
        assert negativity(psi_r(0), [0]) == 0.0


def test_negativity_closed_form_switches_to_log_gamma_smoothly():
    exact_20 = negativity_closed_form(20)
    s = sum(sqrt(comb(21, i)) for i in range(22))
    assert negativity_closed_form(21) == pytest.approx((s * s / 2**21 - 1) / 21, rel=1e-12)
    assert exact_20 > negativity_closed_form(21)


def test_large_n_negativity_follows_gaussian_asymptote():
    # sum_i sqrt(binom(N, i)) 2**(-N/2) ~ (2 pi N)**(1/4), so N_neg ~ sqrt(2 pi / N) - 1/N
    for n in (200, 1000):
        assert negativity_closed_form(n) == pytest.approx(negativity_asymptotic_leading(n), rel=5e-3)


def test_concurrence_examples():
    assert concurrence(psi_r(1), [0]) == pytest.approx(1.0, abs=1e-12)
    expected = sqrt(2 * (1 - 3 / 8)) / sqrt(4 / 3)
    assert concurrence(psi_r(2), [0]) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("n", range(1, 21))
def test_concurrence_closed_form_matches_definition(n):
    for normalized in (True, False):
        assert concurrence(psi_r(n), [0], normalized) == pytest.approx(
            concurrence_closed_form(n, normalized), abs=1e-10
        )
    k = schmidt(psi_r(n), [0]).coefficients
    assert concurrence(psi_r(n), [0], False) == pytest.approx(oracles.concurrence_from_schmidt(k), abs=1e-12)


def test_concurrence_large_n_value():
    value = concurrence_closed_form(1000)
    assert value == pytest.approx(0.991535753184, abs=1e-9)
    assert concurrence_closed_form(21) == pytest.approx(
        sqrt(2 * (1 - comb(42, 21) / 4**21)) / max_concurrence(21), rel=1e-12
    )


def test_figure_shape():
    neg = [negativity(psi_r(n), [0]) for n in range(1, 13)]
    conc = [concurrence(psi_r(n), [0]) for n in range(1, 13)]
    assert all(a > b for a, b in zip(neg, neg[1:]))
    dip = int(np.argmin(conc))
    assert 0 < dip < 11
    assert all(a > b for a, b in zip(conc[: dip + 1], conc[1 : dip + 1]))
    assert all(a < b for a, b in zip(conc[dip:], conc[dip + 1 :]))


def test_ph_single_photon_stub():
    rho = partial_trace(psi_s(1), [0, 1])
    assert ph_test(rho, [0]) == pytest.approx((1 - sqrt(5)) / 6, abs=1e-10)


@pytest.mark.parametrize("n", range(1, 13))
def test_ph_reductions_negative_and_symmetric(n):
    psi = psi_s(n)
    values = [ph_test(partial_trace(psi, keep), [0]) for keep in ([0, 1], [0, 2], [1, 2])]
    assert max(values) < -1e-6
    assert max(values) - min(values) < 1e-10


def test_ph_product_and_maximally_mixed_controls():
    b = enumerate_basis(2, 2)
    assert ph_test(StateVector.fock(b, (1, 1)), [0]) >= -1e-12
    t = truncated_basis(2, 3)
    assert ph_test(DensityMatrix(t, np.eye(t.dim) / t.dim), [0]) >= -1e-12


@pytest.mark.parametrize("n", range(1, 7))
def test_stub_tripartite_decomposition(n):
    dec = stub_tripartite_coefficients(n)
    assert np.all(dec.coefficients > 0)
    assert np.sum(dec.coefficients**2) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(dec.coefficients, stub_tripartite_closed_form(n), atol=1e-12)
    assert fidelity(dec.reconstruct(), psi_s(n)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n", range(2, 7))
def test_partner_state_recurrence(n):
    now, before = stub_tripartite_coefficients(n), stub_tripartite_coefficients(n - 1)
    for i in range(1, n + 1):
        assert np.allclose(now.partners[i].amplitudes, before.partners[i - 1].amplitudes, atol=1e-12)


def test_monogamy_single_photon_is_saturated():
    r = monogamy(1)
    assert r.c2_a_bc == pytest.approx(8 / 9, abs=1e-12)
    assert r.c2_ab == pytest.approx(4 / 9, abs=1e-12)
    assert r.c2_ac == pytest.approx(4 / 9, abs=1e-12)
    assert abs(r.gap) < 1e-10


def test_single_photon_pair_concurrence_matches_wootters():
    rho = as_two_qubits(partial_trace(psi_s(1), [0, 1]))
    assert wootters_concurrence(rho) ** 2 == pytest.approx(monogamy(1).c2_ab, abs=1e-12)


@pytest.mark.parametrize("n", range(2, 7))
def test_monogamy_gap_nonzero(n):
    r = monogamy(n)
    assert abs(r.gap) > 1e-6
    assert abs(r.c2_ab - r.c2_ac) < 1e-10
    for v in (r.c2_a_bc, r.c2_ab, r.c2_ac):
        assert 0 <= v <= 2


@pytest.mark.parametrize("n", range(1, 9))
def test_monogamy_closed_forms(n):
    r = monogamy(n)
    assert r.c2_a_bc == pytest.approx(r.c2_a_bc_closed, abs=1e-12)
    assert r.c2_ab == pytest.approx(r.c2_ab_closed, abs=1e-10)
    assert r.c2_ab == pytest.approx(r.c2_ac, abs=1e-10)


def test_monogamy_frozen_two_photon_values():
    r = monogamy(2)
    assert r.c2_a_bc == pytest.approx(32 / 27, abs=1e-12)
    assert r.gap == pytest.approx(-0.587088583704, abs=1e-9)


@pytest.mark.parametrize("n", range(1, 9))
def test_rho_ab_block_identity(n):
    rho = partial_trace(psi_s(n), [0, 1])
    assert np.abs(rho.matrix - rho_ab_from_blocks(n).matrix).max() < 1e-12


def test_rho_ab_weight_with_reversed_power_fails():
    n = 2
    basis = truncated_basis(2, n)
    wrong = sum(
        2.0 ** (n - m) * comb(n, m) / 3.0**n
        * np.outer(localized_state(RHOMB, m, basis).amplitudes, localized_state(RHOMB, m, basis).amplitudes)
        for m in range(n + 1)
    )
    assert np.abs(partial_trace(psi_s(n), [0, 1]).matrix - wrong).max() > 0.1


def test_single_photon_decompositions_all_agree():
    avg = decomposition_average_concurrences(1, samples=200, extra=1, seed=4)
    assert avg.max() - avg.min() < 1e-8
    assert avg.mean() == pytest.approx(2 / 3, abs=1e-10)


@pytest.mark.parametrize("n", [2, 3])
def test_multiphoton_decompositions_are_not_equivalent(n):
    avg = decomposition_average_concurrences(n, samples=200, seed=5)
    sector = sqrt(monogamy(n).c2_ab)
    assert avg.max() - avg.min() > 1e-3
    assert avg.min() < sector


def test_decomposition_sampler_is_seeded():
    a = decomposition_average_concurrences(2, samples=5, seed=9)
    b = decomposition_average_concurrences(2, samples=5, seed=9)
    assert np.array_equal(a, b)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_random_two_mode_states_routes_agree(seed):
    rng = np.random.default_rng(seed)
    basis = enumerate_basis(2, 4)
    v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    psi = StateVector(basis, v / np.linalg.norm(v))
    assert negativity(psi, [0], "schmidt") == pytest.approx(negativity(psi, [0], "pt"), abs=1e-10)
    c = concurrence(psi, [0], normalized=False)
    assert 0 <= c <= max_concurrence(4) + 1e-12
