"""Multimode bosonic Fock bases, pure states and density matrices.

Basis states are occupation vectors (tuples of non-negative photon counts,
one per mode). A :class:`FockBasis` holds every vector with a fixed total
photon number; a :class:`TruncatedFockBasis` stacks the fixed-total bases
for totals ``0..n_max`` in ascending order. Inside each sector, vectors are
sorted lexicographically descending with mode 0 most significant, so the
first state of ``enumerate_basis(2, 1)`` is ``(1, 0)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from math import comb
from typing import Iterator, Sequence, Union

import numpy as np

__all__ = [
    "FockBasis",
    "TruncatedFockBasis",
    "StateVector",
    "DensityMatrix",
    "enumerate_basis",
    "truncated_basis",
    "weak_compositions",
    "apply_ladder",
    "inner_product",
    "fidelity",
    "partial_trace",
    "partial_transpose",
    "product_embedding",
    "transpose_subsystem",
    "embed_state",
    "state_to_json",
    "state_from_json",
]


def weak_compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Yield weak compositions of ``total`` into ``parts`` in descending lex order."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in weak_compositions(total - first, parts - 1):
            yield (first,) + rest


class _BasisBase:
    mode_count: int
    states: tuple[tuple[int, ...], ...]

    @cached_property
    def occupations(self) -> np.ndarray:
        arr = np.array(self.states, dtype=np.int64)
        return arr.reshape(len(self.states), self.mode_count)

    @cached_property
    def index_map(self) -> dict[tuple[int, ...], int]:
        return {occ: i for i, occ in enumerate(self.states)}

    @cached_property
    def totals(self) -> np.ndarray:
        return self.occupations.sum(axis=1)

    @property
    def dim(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)

    def index(self, occupation: Sequence[int]) -> int:
        return self.index_map[tuple(int(n) for n in occupation)]

    # Integer keys in base (n_max + 1) give a vectorised lookup for large bases.
    @cached_property
    def _key_table(self):
        radix = int(self.occupations.max(initial=0)) + 2
        if radix ** self.mode_count >= 2**62:
            return None
        weights = radix ** np.arange(self.mode_count - 1, -1, -1, dtype=np.int64)
        keys = self.occupations @ weights
        order = np.argsort(keys, kind="stable")
        return radix, weights, keys[order], order

    def lookup(self, occupations: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`index`; rows absent from the basis map to -1."""
        occupations = np.asarray(occupations, dtype=np.int64).reshape(-1, self.mode_count)
        table = self._key_table
        if table is None:
            return np.array(
                [self.index_map.get(tuple(row), -1) for row in occupations.tolist()],
                dtype=np.int64,
            )
        radix, weights, sorted_keys, order = table
        valid = np.all((occupations >= 0) & (occupations < radix), axis=1)
        keys = np.where(valid, occupations @ weights, -1)
        pos = np.searchsorted(sorted_keys, keys)
        pos = np.clip(pos, 0, len(sorted_keys) - 1)
        found = valid & (sorted_keys[pos] == keys)
        return np.where(found, order[pos], -1)


@dataclass(frozen=True, eq=False)
class FockBasis(_BasisBase):
    """All occupation vectors of ``mode_count`` modes holding ``total_photons``."""

    mode_count: int
    total_photons: int
    states: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def max_total(self) -> int:
        return self.total_photons

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FockBasis)
            and other.mode_count == self.mode_count
            and other.total_photons == self.total_photons
        )

    def __hash__(self) -> int:
        return hash(("fixed", self.mode_count, self.total_photons))


@dataclass(frozen=True, eq=False)
class TruncatedFockBasis(_BasisBase):
    """Union of fixed-total bases for totals ``0..max_total``, ascending by total."""

    mode_count: int
    max_total: int
    states: tuple[tuple[int, ...], ...] = field(repr=False)

    def sector_slice(self, total: int) -> slice:
        if not 0 <= total <= self.max_total:
            raise ValueError(f"sector {total} outside 0..{self.max_total}")
        start = sum(comb(n + self.mode_count - 1, self.mode_count - 1) for n in range(total))
        size = comb(total + self.mode_count - 1, self.mode_count - 1)
        return slice(start, start + size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TruncatedFockBasis)
            and other.mode_count == self.mode_count
            and other.max_total == self.max_total
        )

    def __hash__(self) -> int:
        return hash(("truncated", self.mode_count, self.max_total))


Basis = Union[FockBasis, TruncatedFockBasis]


@lru_cache(maxsize=256)
def enumerate_basis(mode_count: int, total_photons: int) -> FockBasis:
    if mode_count < 1:
        raise ValueError("mode_count must be at least 1")
    if total_photons < 0:
        raise ValueError("total_photons must be non-negative")
    states = tuple(weak_compositions(total_photons, mode_count))
    return FockBasis(mode_count, total_photons, states)


@lru_cache(maxsize=256)
def truncated_basis(mode_count: int, max_total: int) -> TruncatedFockBasis:
    if mode_count < 1:
        raise ValueError("mode_count must be at least 1")
    if max_total < 0:
        raise ValueError("max_total must be non-negative")
    states = tuple(
        occ for n in range(max_total + 1) for occ in weak_compositions(n, mode_count)
    )
    return TruncatedFockBasis(mode_count, max_total, states)


@dataclass
class StateVector:
    basis: Basis
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.basis.dim,):
            raise ValueError(
                f"expected {self.basis.dim} amplitudes, got {self.amplitudes.shape}"
            )

    @classmethod
    def from_dict(cls, basis: Basis, components: dict) -> "StateVector":
        amps = np.zeros(basis.dim, dtype=complex)
        for occ, amp in components.items():
            amps[basis.index(occ)] += amp
        return cls(basis, amps)

    @classmethod
    def fock(cls, basis: Basis, occupation: Sequence[int]) -> "StateVector":
        return cls.from_dict(basis, {tuple(occupation): 1.0})

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.basis, self.amplitudes / n)

    def populations(self) -> np.ndarray:
        """Mean photon number per mode."""
        probs = np.abs(self.amplitudes) ** 2
        return probs @ self.basis.occupations

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(self.basis, np.outer(self.amplitudes, self.amplitudes.conj()))

    def nonzero(self, tol: float = 0.0) -> dict[tuple[int, ...], complex]:
        idx = np.flatnonzero(np.abs(self.amplitudes) > tol)
        return {self.basis.states[i]: complex(self.amplitudes[i]) for i in idx}

    def __add__(self, other: "StateVector") -> "StateVector":
        _check_same_basis(self.basis, other.basis)
        return StateVector(self.basis, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "StateVector") -> "StateVector":
        _check_same_basis(self.basis, other.basis)
        return StateVector(self.basis, self.amplitudes - other.amplitudes)

    def __mul__(self, scalar) -> "StateVector":
        return StateVector(self.basis, self.amplitudes * scalar)

    __rmul__ = __mul__


@dataclass
class DensityMatrix:
    basis: Basis
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        d = self.basis.dim
        if self.matrix.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} matrix, got {self.matrix.shape}")

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def purity(self) -> float:
        return float(np.vdot(self.matrix, self.matrix).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)) @ self.basis.occupations

    def validate(self, tol: float = 1e-12, psd_tol: float = 1e-10) -> None:
        """Raise ``ValueError`` unless Hermitian, unit trace and PSD."""
        herm = np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0)
        if herm > tol:
            raise ValueError(f"not Hermitian (max deviation {herm:.3e})")
        if abs(self.trace - 1.0) > tol:
            raise ValueError(f"trace {self.trace!r} differs from 1")
        lo = self.eigenvalues().min()
        if lo < -psd_tol:
            raise ValueError(f"negative eigenvalue {lo:.3e}")


def _check_same_basis(a: Basis, b: Basis) -> None:
    if a != b:
        raise ValueError(f"basis mismatch: {a!r} vs {b!r}")


def inner_product(a: StateVector, b: StateVector) -> complex:
    """``<a|b>``, conjugate-linear in ``a``."""
    _check_same_basis(a.basis, b.basis)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: StateVector, b: StateVector) -> float:
    """Squared overlap of two pure states; insensitive to global phase."""
    return abs(inner_product(a, b)) ** 2


def apply_ladder(state: StateVector, mode: int, kind: str) -> StateVector:
    """Apply ``a_mode`` (``kind='lower'``) or ``a_mode^dagger`` (``'raise'``).

    The result is not renormalised. On a fixed-N basis the result lives on
    the N-1 (or N+1) basis; lowering the vacuum returns the zero vector on
    the vacuum basis.
    """
    basis = state.basis
    if not 0 <= mode < basis.mode_count:
        raise IndexError(f"mode {mode} out of range")
    if kind not in ("raise", "lower"):
        raise ValueError(f"unknown ladder kind {kind!r}")
    shift = 1 if kind == "raise" else -1
    if isinstance(basis, FockBasis):
        if kind == "lower" and basis.total_photons == 0:
            return StateVector(basis, np.zeros(basis.dim, dtype=complex))
        target = enumerate_basis(basis.mode_count, basis.total_photons + shift)
    else:
        target = basis
        if kind == "raise":
            top = basis.totals == basis.max_total
            if np.any(state.amplitudes[top] != 0):
                raise ValueError("raising beyond max_total of a truncated basis")
    occ = basis.occupations
    n = occ[:, mode]
    factor = np.sqrt(n + 1.0) if kind == "raise" else np.sqrt(n.astype(float))
    new_occ = occ.copy()
    new_occ[:, mode] += shift
    idx = target.lookup(new_occ)
    keep = (idx >= 0) & (factor > 0)
    out = np.zeros(target.dim, dtype=complex)
    np.add.at(out, idx[keep], factor[keep] * state.amplitudes[keep])
    return StateVector(target, out)


def embed_state(state: StateVector, target: Basis, modes: Sequence[int] | None = None) -> StateVector:
    """Re-express ``state`` on ``target``, placing its modes at ``modes``.

    Modes of ``target`` not listed receive vacuum.
    """
    src = state.basis
    if modes is None:
        modes = range(src.mode_count)
    modes = list(modes)
    if len(modes) != src.mode_count:
        raise ValueError("one target mode per source mode required")
    occ = np.zeros((src.dim, target.mode_count), dtype=np.int64)
    occ[:, modes] = src.occupations
    idx = target.lookup(occ)
    nz = state.amplitudes != 0
    if np.any(idx[nz] < 0):
        raise ValueError("state does not fit in the target basis")
    out = np.zeros(target.dim, dtype=complex)
    np.add.at(out, idx[nz], state.amplitudes[nz])
    return StateVector(target, out)


def _split(basis: Basis, keep: Sequence[int]):
    keep = sorted(set(int(m) for m in keep))
    if any(not 0 <= m < basis.mode_count for m in keep):
        raise IndexError("mode index out of range")
    rest = [m for m in range(basis.mode_count) if m not in keep]
    if not keep or not rest:
        raise ValueError("subsystem must be a nonempty proper subset of modes")
    n_max = basis.max_total
    basis_a = truncated_basis(len(keep), n_max)
    basis_b = truncated_basis(len(rest), n_max)
    occ = basis.occupations
    ia = basis_a.lookup(occ[:, keep])
    ib = basis_b.lookup(occ[:, rest])
    return basis_a, basis_b, ia, ib


def partial_trace(source: StateVector | DensityMatrix, keep_modes: Sequence[int]) -> DensityMatrix:
    """Reduced state on ``keep_modes`` (result on a truncated basis of those modes)."""
    basis_a, basis_b, ia, ib = _split(source.basis, keep_modes)
    if isinstance(source, StateVector):
        psi = np.zeros((basis_a.dim, basis_b.dim), dtype=complex)
        psi[ia, ib] = source.amplitudes
        return DensityMatrix(basis_a, psi @ psi.conj().T)
    rho = source.matrix
    out = np.zeros((basis_a.dim, basis_a.dim), dtype=complex)
    for b in np.unique(ib):
        rows = np.flatnonzero(ib == b)
        out[np.ix_(ia[rows], ia[rows])] += rho[np.ix_(rows, rows)]
    return DensityMatrix(basis_a, out)


def product_embedding(basis: Basis, modes_a: Sequence[int]):
    """Map basis ordinals into the product space of (modes_a, rest).

    Returns ``(basis_a, basis_b, flat_index)`` where ``flat_index[i]`` is the
    row-major position ``ia * dim_b + ib`` of basis state ``i``.
    """
    basis_a, basis_b, ia, ib = _split(basis, modes_a)
    return basis_a, basis_b, ia * basis_b.dim + ib


def transpose_subsystem(matrix: np.ndarray, dim_a: int, dim_b: int) -> np.ndarray:
    """Transpose the first tensor factor of a ``(dim_a*dim_b)`` square matrix."""
    t = matrix.reshape(dim_a, dim_b, dim_a, dim_b).transpose(2, 1, 0, 3)
    return t.reshape(dim_a * dim_b, dim_a * dim_b)


def partial_transpose(rho: DensityMatrix | StateVector, transpose_modes: Sequence[int]) -> np.ndarray:
    """Partial transpose over ``transpose_modes``.

    The input basis is generally not a tensor product, so the result is
    returned on the product space ``trunc(transpose_modes) x trunc(rest)``
    (row-major). Padding adds only zero rows and columns, which leaves the
    spectrum's nonzero part and the trace norm unchanged.
    """
    if isinstance(rho, StateVector):
        rho = rho.density_matrix()
    basis_a, basis_b, flat = product_embedding(rho.basis, transpose_modes)
    d = basis_a.dim * basis_b.dim
    big = np.zeros((d, d), dtype=complex)
    big[np.ix_(flat, flat)] = rho.matrix
    return transpose_subsystem(big, basis_a.dim, basis_b.dim)


def _fmt(x: float) -> float:
    return float(f"{x:.15g}")


def state_to_json(state: StateVector, tol: float = 0.0) -> str:
    """Serialize as ``{modes, total, amplitudes:[{occ, re, im}]}``.

    ``total`` is the fixed photon number, or the cutoff of a truncated basis
    (flagged by ``"truncated": true``). Only amplitudes above ``tol`` are kept.
    """
    basis = state.basis
    payload = {
        "modes": basis.mode_count,
        "total": basis.max_total,
        "truncated": isinstance(basis, TruncatedFockBasis),
        "amplitudes": [
            {"occ": list(occ), "re": _fmt(state.amplitudes[i].real), "im": _fmt(state.amplitudes[i].imag)}
            for i, occ in enumerate(basis.states)
            if abs(state.amplitudes[i]) > tol
        ],
    }
    return json.dumps(payload, indent=1)


def state_from_json(text: str) -> StateVector:
    data = json.loads(text)
    if data.get("truncated"):
        basis = truncated_basis(data["modes"], data["total"])
    else:
        basis = enumerate_basis(data["modes"], data["total"])
    return StateVector.from_dict(
        basis, {tuple(e["occ"]): complex(e["re"], e["im"]) for e in data["amplitudes"]}
    )
