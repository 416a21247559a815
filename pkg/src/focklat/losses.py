"""Amplitude damping (photon loss) acting on individual cores.

The single-mode channel is parameterised by ``gamma = 1 - exp(-rate * dt)``
and has Kraus operators with matrix elements
``<n-k|E_k|n> = sqrt(binom(n, k) gamma**k (1 - gamma)**(n - k))``.
Several cores lose photons independently, so the multi-core channel is
the product of the single-core channels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, exp, lgamma, log, sqrt
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .fockspace import DensityMatrix, StateVector, TruncatedFockBasis, truncated_basis
from .hamiltonian import SectorOperator
from .states import CATALOG, localized_state

__all__ = [
    "KrausSet",
    "kraus_set",
    "lift_to_mode",
    "lowering_operator",
    "apply_channel",
    "apply_two_core_channel",
    "loss_branches",
    "mean_photon_number",
    "span_fidelity",
    "master_equation_rhs",
    "master_equation_residual",
    "propagate_density",
    "BranchReport",
    "QubitLossReport",
    "lossy_qubit_report",
    "predicted_branch_state",
]


@dataclass
class KrausSet:
    gamma: float
    operators: list[np.ndarray] = field(repr=False)

    @property
    def n_max(self) -> int:
        return self.operators[0].shape[0] - 1

    def completeness_error(self) -> float:
        total = sum(e.conj().T @ e for e in self.operators)
        return float(np.abs(total - np.eye(self.n_max + 1)).max())


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"loss parameter must lie in [0, 1), got {gamma}")
    return gamma


def _element(n: int, k: int, gamma: float) -> float:
    if gamma == 0.0:
        return 1.0 if k == 0 else 0.0
    return sqrt(comb(n, k) * gamma**k * (1.0 - gamma) ** (n - k))


def kraus_set(gamma: float, n_max: int, tol: float = 1e-12) -> KrausSet:
    """Single-mode Kraus operators ``E_0 .. E_{n_max}`` on Fock levels ``0..n_max``."""
    gamma = _check_gamma(gamma)
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    ops = []
    for k in range(n_max + 1):
        e = np.zeros((n_max + 1, n_max + 1))
        for n in range(k, n_max + 1):
            e[n - k, n] = _element(n, k, gamma)
        ops.append(e)
    ks = KrausSet(gamma, ops)
    err = ks.completeness_error()
    if err > tol:
        raise ArithmeticError(f"Kraus set incomplete (deviation {err:.2e})")
    return ks


def _shift_matrix(basis, mode: int, k: int, weights) -> sp.csr_matrix:
    occ = basis.occupations
    src = np.flatnonzero(occ[:, mode] >= k)
    new = occ[src].copy()
    new[:, mode] -= k
    dst = basis.lookup(new)
    vals = np.array([weights(int(n)) for n in occ[src, mode]], dtype=float)
    return sp.csr_matrix((vals, (dst, src)), shape=(basis.dim, basis.dim))


def lift_to_mode(gamma: float, k: int, basis: TruncatedFockBasis, mode: int) -> sp.csr_matrix:
    """``E_k`` acting on one mode of a multimode truncated basis."""
    gamma = _check_gamma(gamma)
    return _shift_matrix(basis, mode, k, lambda n: _element(n, k, gamma))


def lowering_operator(basis, mode: int) -> sp.csr_matrix:
    return _shift_matrix(basis, mode, 1, sqrt)


def _as_matrix(rho) -> tuple:
    if isinstance(rho, StateVector):
        rho = rho.density_matrix()
    if not isinstance(rho.basis, TruncatedFockBasis):
        raise ValueError("loss channels need a truncated basis (photon number changes)")
    return rho.basis, rho.matrix


def apply_channel(rho: DensityMatrix | StateVector, mode: int, gamma: float) -> DensityMatrix:
    basis, m = _as_matrix(rho)
    out = np.zeros_like(m)
    for k in range(basis.max_total + 1):
        e = lift_to_mode(gamma, k, basis, mode)
        if e.nnz:
            out += e @ (e @ m.conj().T).conj().T
    return DensityMatrix(basis, out)


def apply_two_core_channel(
    rho: DensityMatrix | StateVector, cores: Sequence[int], gamma: float
) -> DensityMatrix:
    """``sum_{k,m} E_m^B E_k^A rho (E_k^A)^dag (E_m^B)^dag`` with independent cores."""
    out = rho
    for mode in cores:
        out = apply_channel(out, mode, gamma)
    return out


def loss_branches(
    rho: DensityMatrix | StateVector, cores: Sequence[int], gamma: float
) -> dict[int, np.ndarray]:
    """Unnormalised channel output grouped by the total number of lost photons."""
    basis, m = _as_matrix(rho)
    gamma = _check_gamma(gamma)
    n_max = basis.max_total
    branches: dict[tuple[int, ...], np.ndarray] = {(): m}
    for mode in cores:
        ops = [lift_to_mode(gamma, k, basis, mode) for k in range(n_max + 1)]
        nxt: dict[tuple[int, ...], np.ndarray] = {}
        for key, mat in branches.items():
            for k, e in enumerate(ops):
                if sum(key) + k > n_max or not e.nnz:
                    continue
                nxt[key + (k,)] = e @ (e @ mat.conj().T).conj().T
        branches = nxt
    out: dict[int, np.ndarray] = {}
    for key, mat in branches.items():
        k = sum(key)
        out[k] = out.get(k, 0) + mat
    return dict(sorted(out.items()))


def mean_photon_number(rho: DensityMatrix, modes: Sequence[int] | None = None) -> float:
    occ = rho.basis.occupations
    cols = list(range(rho.basis.mode_count)) if modes is None else list(modes)
    return float(np.real(np.diag(rho.matrix)) @ occ[:, cols].sum(axis=1))


def span_fidelity(rho: DensityMatrix, kind: str = "rhomboidal", modes: Sequence[int] | None = None) -> float:
    """Weight of ``rho`` inside ``span{|psi_n> : n <= N_max}`` of a catalog cell."""
    spec = CATALOG[kind]
    total = 0.0
    for n in range(rho.basis.max_total + 1):
        v = localized_state(spec, n, rho.basis, modes).amplitudes
        total += float(np.real(np.vdot(v, rho.matrix @ v)))
    return total


def master_equation_rhs(rho: DensityMatrix, cores: Sequence[int], rate: float) -> np.ndarray:
    """``rate/2 * sum_c (2 a rho a^dag - a^dag a rho - rho a^dag a)``."""
    m = rho.matrix
    out = np.zeros_like(m)
    for c in cores:
        a = lowering_operator(rho.basis, c)
        ad = a.conj().T
        n = ad @ a
        out += 2 * (a @ (a @ m.conj().T).conj().T) - n @ m - (n.T @ m.T).T
    return 0.5 * rate * out


def master_equation_residual(rho: DensityMatrix, cores: Sequence[int], rate: float, dt: float) -> float:
    """Max deviation of the channel's finite difference from the master-equation rate."""
    gamma = 1.0 - exp(-rate * dt)
    after = apply_two_core_channel(rho, cores, gamma).matrix
    return float(np.abs((after - rho.matrix) / dt - master_equation_rhs(rho, cores, rate)).max())


def propagate_density(hamiltonian: SectorOperator, rho: DensityMatrix, z: float) -> DensityMatrix:
    if rho.basis != hamiltonian.basis:
        raise ValueError("density matrix and Hamiltonian live on different bases")
    h = hamiltonian.toarray()
    evals, evecs = np.linalg.eigh(0.5 * (h + h.conj().T))
    u = (evecs * np.exp(-1j * evals * z)) @ evecs.conj().T
    return DensityMatrix(rho.basis, u @ rho.matrix @ u.conj().T)


@dataclass
class BranchReport:
    k: int
    weight: float
    purity: float
    overlap: float  # fidelity with the predicted conditional state
    coherence: float  # |<psi_{N-k}| rho_k |psi_{N+M-k}>| of the normalised branch


@dataclass
class QubitLossReport:
    alpha: complex
    beta: complex
    N: int
    M: int
    gamma: float
    branches: list[BranchReport]

    def to_dict(self) -> dict:
        return {
            "alpha": [self.alpha.real, self.alpha.imag],
            "beta": [self.beta.real, self.beta.imag],
            "N": self.N,
            "M": self.M,
            "gamma": self.gamma,
            "branches": [b.__dict__ for b in self.branches],
        }


def _log_falling(n: int, k: int) -> float:
    return lgamma(n + 1) - lgamma(n - k + 1)


def predicted_branch_state(alpha: complex, beta: complex, n: int, m: int, k: int, gamma: float) -> tuple[complex, complex]:
    """Normalised ``(alpha_k, beta_k)`` multiplying ``|psi_{N-k}>`` and ``|psi_{N+M-k}>``."""
    def weight(coeff: complex, total: int) -> complex:
        if k > total or coeff == 0:
            return 0.0
        log_w = 0.5 * _log_falling(total, k)
        if gamma > 0:
            log_w += 0.5 * total * log(1.0 - gamma)
        return coeff * exp(log_w)

    a, b = weight(alpha, n), weight(beta, n + m)
    norm = sqrt(abs(a) ** 2 + abs(b) ** 2)
    return a / norm, b / norm


def lossy_qubit_report(
    alpha: complex, beta: complex, n_photons: int, m_extra: int, gamma: float
) -> QubitLossReport:
    """Channel applied to ``alpha |psi_N> + beta |psi_{N+M}>`` on two cores, split by losses."""
    alpha, beta = complex(alpha), complex(beta)
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > 1e-12:
        raise ValueError("(alpha, beta) must be normalised")
    if m_extra < 1 or n_photons < 0:
        raise ValueError("need N >= 0 and M >= 1")
    spec = CATALOG["rhomboidal"]
    top = n_photons + m_extra
    basis = truncated_basis(2, top)
    psi = lambda n: localized_state(spec, n, basis).amplitudes  # noqa: E731
    state = StateVector(basis, alpha * psi(n_photons) + beta * psi(top))
    reports = []
    for k, mat in loss_branches(state, (0, 1), gamma).items():
        w = float(np.trace(mat).real)
        if w < 1e-15:
            continue
        rho_k = mat / w
        a_k, b_k = predicted_branch_state(alpha, beta, n_photons, m_extra, k, gamma)
        target = np.zeros(basis.dim, dtype=complex)
        if a_k:
            target += a_k * psi(n_photons - k)
        if b_k:
            target += b_k * psi(top - k)
        overlap = float(np.real(np.vdot(target, rho_k @ target)))
        purity = float(np.real(np.trace(rho_k @ rho_k)))
        coherence = 0.0
        if k <= n_photons:
            coherence = abs(np.vdot(psi(n_photons - k), rho_k @ psi(top - k)))
        reports.append(BranchReport(k, w, purity, overlap, float(coherence)))
    return QubitLossReport(alpha, beta, n_photons, m_extra, float(gamma), reports)
