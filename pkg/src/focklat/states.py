"""Compact localized N-photon states of the catalog flat-band lattices.

Each state is a multinomial superposition over the occupations of the
cell sites, ``prod(sign) * sqrt(multinomial(N; occ) / base**N)``, where the
sign is ``(-1)`` to the total occupation of the sign-carrying sites.
Equivalently it is ``(b^dag)**N / sqrt(N!)`` applied to vacuum, with
``b^dag`` the normalised single-particle flat-band mode of the cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil, comb, factorial, lgamma, exp, sqrt
from typing import Callable, Sequence

import numpy as np
from scipy.stats import poisson

from .fockspace import Basis, FockBasis, StateVector, TruncatedFockBasis, enumerate_basis, truncated_basis
from .lattice import Lattice, localized_patch

__all__ = [
    "LocalizedStateSpec",
    "CATALOG",
    "multinomial",
    "sqrt_multinomial_weight",
    "amplitude",
    "localized_state",
    "localized_state_on",
    "sign_free",
    "verify_recursion",
    "poissonian_cutoff",
    "poissonian_superposition",
    "coherent_product_state",
    "catalog_patch_state",
]


@dataclass(frozen=True)
class LocalizedStateSpec:
    lattice_kind: str
    cell_sites: tuple[str, ...]
    sign_sites: tuple[int, ...]  # positions within cell_sites carrying (-1)**occupation
    normalization_base: int
    fb_eigenvalue_coeff: float

    def __post_init__(self):
        if self.normalization_base != len(self.cell_sites):
            raise ValueError("normalization base must equal the number of cell sites")
        if any(not 0 <= s < len(self.cell_sites) for s in self.sign_sites):
            raise ValueError("sign site outside the cell")

    @property
    def size(self) -> int:
        return len(self.cell_sites)


CATALOG: dict[str, LocalizedStateSpec] = {
    "rhomboidal": LocalizedStateSpec("rhomboidal", ("A", "B"), (1,), 2, 0.0),
    "symmetric_rhomboidal": LocalizedStateSpec("symmetric_rhomboidal", ("A", "B"), (1,), 2, 1.0),
    "stub": LocalizedStateSpec("stub", ("A", "B", "C"), (1,), 3, 0.0),
    "lieb": LocalizedStateSpec("lieb", ("A", "B", "C", "D"), (1, 3), 4, 0.0),
    "kagome": LocalizedStateSpec("kagome", ("1", "2", "3", "4", "5", "6"), (1, 3, 5), 6, 2.0),
}

_EXACT_LIMIT = 20


def multinomial(parts: Sequence[int]) -> int:
    out, total = 1, 0
    for p in parts:
        total += p
        out *= comb(total, p)
    return out


def sqrt_multinomial_weight(parts: Sequence[int], base: int) -> float:
    """``sqrt(multinomial(parts) / base**sum(parts))`` without overflow."""
    n = sum(parts)
    if n <= _EXACT_LIMIT:
        return sqrt(float(Fraction(multinomial(parts), base**n)))
    log_w = lgamma(n + 1) - sum(lgamma(p + 1) for p in parts) - n * np.log(base)
    return exp(0.5 * log_w)


def sign_free(spec: LocalizedStateSpec) -> LocalizedStateSpec:
    """Same multinomial weights with every sign positive."""
    return LocalizedStateSpec(
        spec.lattice_kind, spec.cell_sites, (), spec.normalization_base, spec.fb_eigenvalue_coeff
    )


def amplitude(spec: LocalizedStateSpec, occupation: Sequence[int], modes: Sequence[int] | None = None) -> float:
    """Amplitude of one Fock component.

    ``modes`` maps cell positions to entries of ``occupation``; by default
    the first ``spec.size`` entries are the cell.
    """
    occupation = [int(n) for n in occupation]
    if modes is None:
        modes = range(spec.size)
    modes = list(modes)
    if len(modes) != spec.size:
        raise ValueError("need one mode per cell site")
    if any(n < 0 for n in occupation):
        raise ValueError("negative occupation")
    outside = set(range(len(occupation))) - set(modes)
    if any(occupation[m] for m in outside):
        raise ValueError("occupation has support outside the cell sites")
    parts = [occupation[m] for m in modes]
    sign = -1.0 if sum(parts[s] for s in spec.sign_sites) % 2 else 1.0
    return sign * sqrt_multinomial_weight(parts, spec.normalization_base)


def localized_state(
    spec: LocalizedStateSpec,
    n_photons: int,
    basis: Basis | None = None,
    modes: Sequence[int] | None = None,
) -> StateVector:
    """``|psi_N>`` of ``spec`` placed on ``modes`` of ``basis``.

    Defaults: a fixed-N basis over exactly the cell modes.
    """
    if n_photons < 0:
        raise ValueError("photon number must be non-negative")
    if basis is None:
        basis = enumerate_basis(spec.size, n_photons)
    if modes is None:
        modes = range(spec.size)
    modes = list(modes)
    if isinstance(basis, FockBasis) and basis.total_photons != n_photons:
        raise ValueError(f"basis holds {basis.total_photons} photons, not {n_photons}")
    if basis.max_total < n_photons:
        raise ValueError(f"{n_photons} photons exceed the basis cutoff {basis.max_total}")
    occ = basis.occupations
    outside = [m for m in range(basis.mode_count) if m not in modes]
    support = (occ.sum(axis=1) == n_photons) & (occ[:, outside].sum(axis=1) == 0)
    amps = np.zeros(basis.dim, dtype=complex)
    for i in np.flatnonzero(support):
        amps[i] = amplitude(spec, occ[i], modes)
    return StateVector(basis, amps)


def localized_state_on(lattice: Lattice, n_photons: int, spec: LocalizedStateSpec | None = None) -> StateVector:
    """Localized state on the designated cell of ``lattice`` (fixed-N basis)."""
    if spec is None:
        spec = CATALOG[lattice.kind]
    basis = enumerate_basis(lattice.size, n_photons)
    return localized_state(spec, n_photons, basis, lattice.cell_sites)


def verify_recursion(
    spec: LocalizedStateSpec,
    n_photons: int,
    coefficients: Callable[[int, int], float] | None = None,
    tol: float = 1e-14,
) -> bool:
    """Check ``C[p+1,q] = -sqrt(q+1)/sqrt(p+1) * C[p,q+1]`` for ``p+q+1 = N``.

    This is the condition for the two-site state to be annihilated by a
    connector coupled equally to both sites.
    """
    if spec.size != 2:
        raise ValueError("recursion applies to two-site cells")
    if coefficients is None:
        coefficients = lambda p, q: amplitude(spec, (p, q))  # noqa: E731
    for p in range(n_photons):
        q = n_photons - 1 - p
        lhs = coefficients(p + 1, q)
        rhs = -sqrt(q + 1) / sqrt(p + 1) * coefficients(p, q + 1)
        if abs(lhs - rhs) > tol:
            return False
    return True


def poissonian_cutoff(beta: complex) -> int:
    b = abs(beta)
    return max(20, ceil(b * b + 10 * b + 10))


def poissonian_superposition(
    spec: LocalizedStateSpec,
    beta: complex,
    cutoff: int | None = None,
    basis: TruncatedFockBasis | None = None,
    modes: Sequence[int] | None = None,
    tail_tol: float = 1e-12,
) -> StateVector:
    """``exp(-|beta|^2/2) sum_N beta^N / sqrt(N!) |psi_N>``, renormalised after truncation."""
    if cutoff is None:
        cutoff = basis.max_total if basis is not None else poissonian_cutoff(beta)
    mean = abs(beta) ** 2
    tail = float(poisson.sf(cutoff, mean)) if mean > 0 else 0.0
    if tail >= tail_tol:
        raise ValueError(f"cutoff {cutoff} leaves a Poisson tail {tail:.2e} >= {tail_tol:g}")
    if basis is None:
        basis = truncated_basis(spec.size, cutoff)
    if basis.max_total < cutoff:
        raise ValueError("basis cutoff is below the requested cutoff")
    amps = np.zeros(basis.dim, dtype=complex)
    for n in range(cutoff + 1):
        weight = np.exp(-mean / 2) * beta**n / sqrt(factorial(n))
        amps += weight * localized_state(spec, n, basis, modes).amplitudes
    return StateVector(basis, amps).normalized()


def coherent_product_state(alphas: Sequence[complex], basis: TruncatedFockBasis) -> StateVector:
    """Product of single-mode coherent states, truncated to ``basis`` and renormalised."""
    if len(alphas) != basis.mode_count:
        raise ValueError("one coherent amplitude per mode required")
    occ = basis.occupations
    log_fact = np.array([lgamma(n + 1) for n in range(basis.max_total + 1)])
    amps = np.ones(basis.dim, dtype=complex)
    for m, a in enumerate(alphas):
        amps *= np.exp(-abs(a) ** 2 / 2) * np.power(complex(a), occ[:, m]) * np.exp(-0.5 * log_fact[occ[:, m]])
    return StateVector(basis, amps).normalized()


def catalog_patch_state(kind: str, n_photons: int, kappa: float = 1.0, epsilon: float = 0.0):
    """Convenience: ``(patch lattice, basis, |psi_N>)`` for a catalog kind."""
    lattice = localized_patch(kind, kappa, epsilon)
    state = localized_state_on(lattice, n_photons)
    return lattice, state.basis, state
