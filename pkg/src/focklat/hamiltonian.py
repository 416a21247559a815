"""Second-quantised hopping Hamiltonians on Fock sectors.

``H = H_0 + H_int`` with ``H_0 = sum_n eps_n a_n^dag a_n`` and
``H_int = -sum_edges kappa (a_i^dag a_j + a_j^dag a_i)``; each undirected
edge contributes one Hermitian pair. Matrices are stored as CSR.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .fockspace import Basis, StateVector
from .lattice import Lattice

__all__ = [
    "SectorOperator",
    "hopping_matrix",
    "build_interaction",
    "build_free",
    "build_hamiltonian",
    "connector_operator",
    "number_operator",
]


@dataclass
class SectorOperator:
    basis: Basis
    matrix: sp.csr_matrix = field(repr=False)
    label: str = ""

    def apply(self, state: StateVector) -> StateVector:
        if state.basis != self.basis:
            raise ValueError("state and operator live on different bases")
        return StateVector(self.basis, self.matrix @ state.amplitudes)

    def hermiticity_error(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(np.abs(diff.data).max(initial=0.0))

    def __add__(self, other: "SectorOperator") -> "SectorOperator":
        if other.basis != self.basis:
            raise ValueError("operators live on different bases")
        return SectorOperator(self.basis, (self.matrix + other.matrix).tocsr(), f"{self.label}+{other.label}")

    def __mul__(self, scalar: float) -> "SectorOperator":
        return SectorOperator(self.basis, (self.matrix * scalar).tocsr(), self.label)

    __rmul__ = __mul__

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def to_json(self) -> str:
        """Sparse triplets ``{dim, triplets: [[row, col, re, im], ...]}``."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        triplets = [
            [int(coo.row[i]), int(coo.col[i]), float(f"{coo.data[i].real:.15g}"), float(f"{coo.data[i].imag:.15g}")]
            for i in order
        ]
        return json.dumps({"dim": self.basis.dim, "label": self.label, "triplets": triplets})

    @classmethod
    def from_json(cls, text: str, basis: Basis) -> "SectorOperator":
        data = json.loads(text)
        if data["dim"] != basis.dim:
            raise ValueError("dimension does not match basis")
        t = np.array(data["triplets"], dtype=float).reshape(-1, 4)
        m = sp.coo_matrix(
            (t[:, 2] + 1j * t[:, 3], (t[:, 0].astype(int), t[:, 1].astype(int))),
            shape=(basis.dim, basis.dim),
        )
        return cls(basis, m.tocsr(), data.get("label", ""))


def hopping_matrix(basis: Basis, pairs: Iterable[tuple[int, int, float]]) -> sp.csr_matrix:
    """Sum of ``c * (a_i^dag a_j + a_j^dag a_i)`` over ``(i, j, c)``."""
    occ = basis.occupations
    rows, cols, vals = [], [], []
    for i, j, c in pairs:
        for dst, src in ((i, j), (j, i)):
            n_src = occ[:, src]
            movable = np.flatnonzero(n_src > 0)
            new = occ[movable].copy()
            new[:, src] -= 1
            new[:, dst] += 1
            target = basis.lookup(new)
            ok = target >= 0
            amp = c * np.sqrt(n_src[movable] * (occ[movable, dst] + 1.0))
            rows.append(target[ok])
            cols.append(movable[ok])
            vals.append(amp[ok])
    d = basis.dim
    if not rows:
        return sp.csr_matrix((d, d), dtype=complex)
    m = sp.coo_matrix(
        (np.concatenate(vals).astype(complex), (np.concatenate(rows), np.concatenate(cols))),
        shape=(d, d),
    )
    return m.tocsr()


def _check_modes(lattice: Lattice, basis: Basis) -> None:
    if basis.mode_count != lattice.size:
        raise ValueError(
            f"basis has {basis.mode_count} modes but lattice has {lattice.size} sites"
        )


def build_interaction(lattice: Lattice, basis: Basis) -> SectorOperator:
    _check_modes(lattice, basis)
    m = hopping_matrix(basis, ((e.i, e.j, -e.kappa) for e in lattice.edges))
    return SectorOperator(basis, m, "H_int")


def build_free(lattice: Lattice, basis: Basis) -> SectorOperator:
    _check_modes(lattice, basis)
    eps = np.array([s.eps for s in lattice.sites], dtype=float)
    diag = basis.occupations @ eps
    return SectorOperator(basis, sp.diags(diag.astype(complex), format="csr"), "H_0")


def build_hamiltonian(lattice: Lattice, basis: Basis) -> SectorOperator:
    h = build_free(lattice, basis) + build_interaction(lattice, basis)
    h.label = "H"
    return h


def connector_operator(lattice: Lattice, basis: Basis, connector_site: int) -> SectorOperator:
    """Unit-coupling hop between a connector and its neighbours in the localized cell."""
    _check_modes(lattice, basis)
    if connector_site not in lattice.connectors:
        raise ValueError(f"site {connector_site} is not tagged as a connector")
    cell = set(lattice.cell_sites)
    partners = [n for n in lattice.neighbors(connector_site) if n in cell]
    m = hopping_matrix(basis, ((connector_site, n, 1.0) for n in partners))
    return SectorOperator(basis, m, f"H_S[{connector_site}]")


def number_operator(basis: Basis, modes: Iterable[int] | None = None) -> SectorOperator:
    occ = basis.occupations
    cols = list(range(basis.mode_count)) if modes is None else list(modes)
    diag = occ[:, cols].sum(axis=1).astype(complex)
    return SectorOperator(basis, sp.diags(diag, format="csr"), "N")
