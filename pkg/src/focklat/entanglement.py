"""Entanglement of localized photon states.

Concurrence here is the I-concurrence ``sqrt(2 (1 - Tr rho_A^2))``; the
"normalized" variant divides by its maximum ``sqrt(2 (1 - 1/(N+1)))`` on
an ``N+1`` dimensional subsystem. Negativity is ``(||rho^T_A|| - 1)/(d-1)``
with ``d = N + 1``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import comb, exp, lgamma, log, pi, sqrt
from typing import Sequence

import numpy as np

from .fockspace import (
    DensityMatrix,
    StateVector,
    FockBasis,
    enumerate_basis,
    partial_trace,
    partial_transpose,
    truncated_basis,
    _split,
)
from .states import CATALOG, localized_state

__all__ = [
    "SchmidtSpectrum",
    "MonogamyReport",
    "StubDecomposition",
    "amplitude_matrix",
    "schmidt",
    "schmidt_closed_form",
    "negativity",
    "negativity_closed_form",
    "negativity_asymptotic",
    "negativity_asymptotic_leading",
    "concurrence",
    "concurrence_closed_form",
    "max_concurrence",
    "ph_test",
    "stub_tripartite_coefficients",
    "stub_tripartite_closed_form",
    "rho_ab_from_blocks",
    "sector_average_concurrence",
    "monogamy",
    "decomposition_average_concurrences",
    "wootters_concurrence",
]

_LOG2 = log(2.0)


@dataclass
class SchmidtSpectrum:
    coefficients: np.ndarray  # nonincreasing

    def rank(self, tol: float = 1e-12) -> int:
        return int(np.count_nonzero(self.coefficients > tol))


@dataclass
class MonogamyReport:
    N: int
    c2_a_bc: float
    c2_ab: float
    c2_ac: float
    c2_a_bc_closed: float
    c2_ab_closed: float

    @property
    def gap(self) -> float:
        return self.c2_a_bc - self.c2_ab - self.c2_ac


def _require_pure(state) -> StateVector:
    if not isinstance(state, StateVector):
        raise TypeError("a pure StateVector is required; use ph_test for mixed states")
    return state


def amplitude_matrix(state: StateVector, modes_a: Sequence[int]) -> np.ndarray:
    basis_a, basis_b, ia, ib = _split(state.basis, modes_a)
    psi = np.zeros((basis_a.dim, basis_b.dim), dtype=complex)
    psi[ia, ib] = state.amplitudes
    return psi


def schmidt(state: StateVector, modes_a: Sequence[int]) -> SchmidtSpectrum:
    state = _require_pure(state)
    sv = np.linalg.svd(amplitude_matrix(state, modes_a), compute_uv=False)
    return SchmidtSpectrum(np.sort(sv)[::-1])


def schmidt_closed_form(n_photons: int) -> np.ndarray:
    """``2**(-N/2) sqrt(binom(N, i))``, sorted nonincreasing."""
    k = np.array([sqrt(comb(n_photons, i) / 2.0**n_photons) for i in range(n_photons + 1)])
    return np.sort(k)[::-1]


def _photons(state: StateVector) -> int:
    if not isinstance(state.basis, FockBasis):
        raise ValueError("a fixed photon-number state is required")
    return state.basis.total_photons


def negativity(state: StateVector, modes_a: Sequence[int], method: str = "schmidt", cross_check: bool = False) -> float:
    """Negativity with ``d = N + 1``; ``method`` is ``'schmidt'`` or ``'pt'``."""
    state = _require_pure(state)
    n = _photons(state)
    if n == 0:
        warnings.warn("negativity undefined for N = 0 (d - 1 = 0); returning 0", RuntimeWarning)
        return 0.0
    if method == "schmidt":
        k = schmidt(state, modes_a).coefficients
        trace_norm = float(k.sum() ** 2)
    elif method == "pt":
        trace_norm = float(np.abs(np.linalg.eigvalsh(partial_transpose(state, modes_a))).sum())
    else:
        raise ValueError(f"unknown method {method!r}")
    value = (trace_norm - 1.0) / n
    if cross_check:
        other = negativity(state, modes_a, "pt" if method == "schmidt" else "schmidt")
        if abs(other - value) > 1e-10:
            raise ArithmeticError(f"negativity routes disagree: {value!r} vs {other!r}")
    return value


def negativity_closed_form(n_photons: int) -> float:
    """Negativity of the rhomboidal ``|psi_N>`` from its Schmidt coefficients."""
    n = n_photons
    if n < 1:
        raise ValueError("N >= 1 required")
    if n <= 20:
        s = sum(sqrt(comb(n, i)) for i in range(n + 1))
        return (s * s / 2.0**n - 1.0) / n
    logs = np.array([0.5 * (lgamma(n + 1) - lgamma(i + 1) - lgamma(n - i + 1)) for i in range(n + 1)])
    logs -= 0.5 * n * _LOG2
    s = np.exp(logs).sum()
    return (s * s - 1.0) / n


def negativity_asymptotic(n_photons: int) -> float:
    """Large-N law as printed with the figure: ``sqrt(2/pi) N**-1.5 - 1/N``."""
    return sqrt(2 / pi) * n_photons**-1.5 - 1.0 / n_photons


def negativity_asymptotic_leading(n_photons: int) -> float:
    """Gaussian (Laplace) approximation of the Schmidt sum: ``sqrt(2 pi / N) - 1/N``."""
    return sqrt(2 * pi / n_photons) - 1.0 / n_photons


def max_concurrence(n_photons: int) -> float:
    return sqrt(2.0 * (1.0 - 1.0 / (n_photons + 1)))


def concurrence(state: StateVector, modes_a: Sequence[int], normalized: bool = True) -> float:
    state = _require_pure(state)
    rho_a = partial_trace(state, modes_a)
    c = sqrt(max(0.0, 2.0 * (1.0 - rho_a.purity)))
    if not normalized:
        return c
    n = _photons(state)
    return 0.0 if n == 0 else c / max_concurrence(n)


def concurrence_closed_form(n_photons: int, normalized: bool = True) -> float:
    """Concurrence of the rhomboidal ``|psi_N>``: ``sqrt(2 (1 - binom(2N,N)/4**N))``."""
    n = n_photons
    if n <= 20:
        ratio = comb(2 * n, n) / 4.0**n
    else:
        ratio = exp(lgamma(2 * n + 1) - 2 * lgamma(n + 1) - 2 * n * _LOG2)
    c = sqrt(2.0 * (1.0 - ratio))
    if not normalized:
        return c
    return 0.0 if n == 0 else c / max_concurrence(n)


def ph_test(rho: DensityMatrix | StateVector, modes: Sequence[int]) -> float:
    """Smallest eigenvalue of the partial transpose over ``modes``."""
    return float(np.linalg.eigvalsh(partial_transpose(rho, modes)).min())


@dataclass
class StubDecomposition:
    N: int
    coefficients: np.ndarray  # K_i for i photons on A, i = 0..N
    partners: list[StateVector]  # normalised |i'_N> on (B, C), fixed N - i

    def reconstruct(self) -> StateVector:
        basis = enumerate_basis(3, self.N)
        amps = np.zeros(basis.dim, dtype=complex)
        for i, (k, partner) in enumerate(zip(self.coefficients, self.partners)):
            for occ, a in partner.nonzero().items():
                amps[basis.index((i,) + occ)] += k * a
        return StateVector(basis, amps)


def stub_tripartite_coefficients(n_photons: int) -> StubDecomposition:
    """Split the stub ``|psi_N>`` as ``sum_i K_i |i>_A |i'_N>_BC``.

    Computed from the state itself: ``K_i`` is the norm of the block with
    ``i`` photons on A and the partner is that block normalised.
    """
    if n_photons < 1:
        raise ValueError("N >= 1 required")
    psi = localized_state(CATALOG["stub"], n_photons)
    ks, partners = [], []
    for i in range(n_photons + 1):
        sub = enumerate_basis(2, n_photons - i)
        amps = np.array([psi.amplitudes[psi.basis.index((i,) + occ)] for occ in sub.states])
        k = float(np.linalg.norm(amps))
        ks.append(k)
        partners.append(StateVector(sub, amps / k))
    return StubDecomposition(n_photons, np.array(ks), partners)


def stub_tripartite_closed_form(n_photons: int) -> np.ndarray:
    """``K_i = 3**(-N/2) sqrt(binom(N, i)) * sqrt(2**(N-i))``.

    The bracket is the trinomial sum ``sum_{q+t=N-i} (N-i)!/(q! t!) = 2**(N-i)``.
    """
    n = n_photons
    return np.array([sqrt(comb(n, i) * 2.0 ** (n - i) / 3.0**n) for i in range(n + 1)])


def rho_ab_from_blocks(n_photons: int) -> DensityMatrix:
    """``3**-N sum_M 2**M binom(N, M) |psi_M><psi_M|`` on a truncated two-mode basis."""
    n = n_photons
    basis = truncated_basis(2, n)
    rho = np.zeros((basis.dim, basis.dim), dtype=complex)
    for m in range(n + 1):
        v = localized_state(CATALOG["rhomboidal"], m, basis).amplitudes
        rho += (2.0**m * comb(n, m) / 3.0**n) * np.outer(v, v.conj())
    return DensityMatrix(basis, rho)


def _pure_concurrence_any(amps: np.ndarray, basis) -> float:
    """Unnormalised concurrence of a (possibly multi-sector) two-mode pure state."""
    state = StateVector(basis, amps / np.linalg.norm(amps))
    rho_a = partial_trace(state, [0])
    return sqrt(max(0.0, 2.0 * (1.0 - rho_a.purity)))


def sector_average_concurrence(rho: DensityMatrix, rank_tol: float = 1e-12) -> float:
    """Average pure-state concurrence over the photon-number blocks of a two-mode ``rho``.

    Each block must be rank one; its eigenvector is taken as the pure
    member of the decomposition and weighted by the block trace.
    """
    basis = rho.basis
    if basis.mode_count != 2:
        raise ValueError("two-mode density matrix required")
    total = 0.0
    for m in range(basis.max_total + 1):
        sl = basis.sector_slice(m)
        block = rho.matrix[sl, sl]
        w = float(np.trace(block).real)
        if w < rank_tol:
            continue
        evals, evecs = np.linalg.eigh(block)
        if evals[-2:-1].size and evals[-2] > rank_tol * max(w, 1.0):
            raise ValueError(f"sector {m} block is not rank one")
        sub = enumerate_basis(2, m)
        total += w * _pure_concurrence_any(evecs[:, -1], sub)
    return total


def monogamy(n_photons: int) -> MonogamyReport:
    """Both sides of the CKW relation for the stub state ``|psi_N>``."""
    n = n_photons
    if n < 1:
        raise ValueError("N >= 1 required")
    psi = localized_state(CATALOG["stub"], n)
    rho_a = partial_trace(psi, [0])
    c2_a_bc = 2.0 * (1.0 - rho_a.purity)
    c_ab = sector_average_concurrence(partial_trace(psi, [0, 1]))
    c_ac = sector_average_concurrence(partial_trace(psi, [0, 2]))
    closed_abc = 2.0 - 2.0 / 9.0**n * sum(comb(n, m) ** 2 * 4.0 ** (n - m) for m in range(n + 1))
    closed_ab = sum(
        2.0**m * comb(n, m) / 3.0**n * concurrence_closed_form(m, normalized=False) for m in range(n + 1)
    )
    return MonogamyReport(n, c2_a_bc, c_ab**2, c_ac**2, closed_abc, closed_ab**2)


def decomposition_average_concurrences(
    n_photons: int, samples: int = 1000, extra: int = 0, seed: int | None = 0
) -> np.ndarray:
    """Average concurrence of ``rho_AB`` over random pure-state decompositions.

    Decompositions are generated from the canonical ensemble
    ``sqrt(w_M) |psi_M>`` by Haar-random ``r x r`` unitaries with
    ``r = N + 1 + extra``. Each value is an upper bound on the convex roof.
    """
    from scipy.stats import unitary_group

    n = n_photons
    basis = truncated_basis(2, n)
    vecs = [
        sqrt(2.0**m * comb(n, m) / 3.0**n) * localized_state(CATALOG["rhomboidal"], m, basis).amplitudes
        for m in range(n + 1)
    ]
    r = n + 1 + extra
    vecs += [np.zeros(basis.dim, dtype=complex)] * extra
    ensemble = np.array(vecs)
    rng = np.random.default_rng(seed)
    out = np.empty(samples)
    for s in range(samples):
        u = unitary_group.rvs(r, random_state=rng)
        mixed = u @ ensemble
        avg = 0.0
        for phi in mixed:
            p = float(np.vdot(phi, phi).real)
            if p > 1e-15:
                avg += p * _pure_concurrence_any(phi, basis)
        out[s] = avg
    return out


def wootters_concurrence(rho: np.ndarray) -> float:
    """Two-qubit concurrence of a 4x4 density matrix in the ``|n_A n_B>`` basis."""
    sy = np.array([[0, -1j], [1j, 0]])
    yy = np.kron(sy, sy)
    tilde = yy @ rho.conj() @ yy
    lam = np.sqrt(np.abs(np.linalg.eigvals(rho @ tilde)))
    lam = np.sort(lam.real)[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def as_two_qubits(rho: DensityMatrix) -> np.ndarray:
    """Embed a two-mode density matrix with at most one photon per mode into 4x4."""
    basis = rho.basis
    if basis.mode_count != 2 or np.any(basis.occupations > 1):
        raise ValueError("basis must hold at most one photon per mode")
    idx = basis.occupations @ np.array([2, 1])
    out = np.zeros((4, 4), dtype=complex)
    out[np.ix_(idx, idx)] = rho.matrix
    return out
