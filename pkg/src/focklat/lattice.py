"""Flat-band lattice geometries and single-particle Bloch bands.

Every catalog lattice is described by a :class:`UnitCell` in integer
coordinates; finite lattices are built by tiling it. One cell of each finite
lattice is designated as the host of a compact localized state, its sites
listed in ``cell_sites`` in the order expected by :mod:`focklat.states`, and
the sites coupled to it from outside are tagged as ``connectors``.

Hopping matrix elements are ``-kappa`` per edge and the on-site term is
``epsilon``; frequencies are quoted relative to ``epsilon``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "Site",
    "Edge",
    "UnitCell",
    "Lattice",
    "BandStructure",
    "UNIT_CELLS",
    "LATTICE_KINDS",
    "build_lattice",
    "localized_patch",
    "single_particle_matrix",
    "bloch_matrix",
    "bloch_bands",
    "make_k_grid",
    "flat_band_frequency",
]


@dataclass(frozen=True)
class Site:
    id: int
    label: str
    eps: float = 0.0
    cell: tuple[int, ...] = ()


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    kappa: float


@dataclass(frozen=True)
class UnitCell:
    """Sites of one cell and the bonds leaving it.

    A bond ``(a, b, offset)`` couples site ``a`` of cell ``R`` to site ``b``
    of cell ``R + offset``. ``positions`` are integer coordinates of the
    sites inside cell ``(0, ...)``; ``lattice_vectors`` translate cells.
    """

    labels: tuple[str, ...]
    bonds: tuple[tuple[int, int, tuple[int, ...]], ...]
    positions: tuple[tuple[int, ...], ...]
    lattice_vectors: tuple[tuple[int, ...], ...]

    @property
    def dim(self) -> int:
        return len(self.lattice_vectors)

    @property
    def size(self) -> int:
        return len(self.labels)


_RHOMB_BONDS = ((0, 1, (0,)), (0, 2, (0,)), (1, 0, (1,)), (2, 0, (1,)))

UNIT_CELLS: dict[str, UnitCell] = {
    # S in the middle row; A above, B below. A_n and B_n couple to S_n and S_{n+1}.
    "rhomboidal": UnitCell(("S", "A", "B"), _RHOMB_BONDS, ((0,), (0,), (0,)), ((1,),)),
    "symmetric_rhomboidal": UnitCell(
        ("S", "A", "B"), _RHOMB_BONDS + ((1, 2, (0,)),), ((0,), (0,), (0,)), ((1,),)
    ),
    # S: chain node, B: chain link to the next node, A: dangling stub on S.
    "stub": UnitCell(
        ("S", "B", "A"),
        ((0, 2, (0,)), (0, 1, (0,)), (1, 0, (1,))),
        ((0,), (0,), (0,)),
        ((1,),),
    ),
    "lieb": UnitCell(
        ("corner", "edge_x", "edge_y"),
        ((0, 1, (0, 0)), (0, 2, (0, 0)), (1, 0, (1, 0)), (2, 0, (0, 1))),
        ((0, 0), (1, 0), (0, 1)),
        ((2, 0), (0, 2)),
    ),
    # Integer coordinates on the underlying triangular grid (spacing 1).
    "kagome": UnitCell(
        ("s0", "s1", "s2"),
        (
            (0, 1, (0, 0)),
            (0, 2, (0, 0)),
            (1, 2, (0, 0)),
            (1, 0, (1, 0)),
            (2, 0, (0, 1)),
            (1, 2, (1, -1)),
        ),
        ((0, 0), (1, 0), (0, 1)),
        ((2, 0), (0, 2)),
    ),
}

LATTICE_KINDS = tuple(UNIT_CELLS) + ("custom",)

_LIEB_RING = ((1, 0), (0, 1), (-1, 0), (0, -1))
_KAGOME_RING = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))


@dataclass
class Lattice:
    kind: str
    sites: list[Site]
    edges: list[Edge]
    connectors: tuple[int, ...] = ()
    cell_sites: tuple[int, ...] = ()
    unit_cell: UnitCell | None = field(default=None, repr=False)

    def __post_init__(self):
        ids = [s.id for s in self.sites]
        if ids != list(range(len(ids))):
            raise ValueError("site ids must be 0..n-1 in order")
        seen = set()
        for e in self.edges:
            if not (0 <= e.i < len(ids) and 0 <= e.j < len(ids)) or e.i == e.j:
                raise ValueError(f"bad edge {e}")
            if not e.kappa > 0 or not np.isfinite(e.kappa):
                raise ValueError(f"coupling must be positive, got {e.kappa}")
            pair = frozenset((e.i, e.j))
            if pair in seen:
                raise ValueError(f"edge {sorted(pair)} listed twice")
            seen.add(pair)
        if any(not np.isfinite(s.eps) for s in self.sites):
            raise ValueError("propagation constants must be finite")
        if set(self.connectors) & set(self.cell_sites):
            raise ValueError("connectors overlap the localized cell")

    @property
    def size(self) -> int:
        return len(self.sites)

    def neighbors(self, site: int) -> list[int]:
        out = []
        for e in self.edges:
            if e.i == site:
                out.append(e.j)
            elif e.j == site:
                out.append(e.i)
        return sorted(out)

    def degree(self, site: int) -> int:
        return len(self.neighbors(site))

    def has_edge(self, i: int, j: int) -> bool:
        return any({e.i, e.j} == {i, j} for e in self.edges)

    def subgraph(self, site_ids: Sequence[int]) -> "Lattice":
        """Induced sub-lattice; sites renumbered in the order given."""
        remap = {old: new for new, old in enumerate(site_ids)}
        sites = [
            Site(remap[s], self.sites[s].label, self.sites[s].eps, self.sites[s].cell)
            for s in site_ids
        ]
        edges = [
            Edge(remap[e.i], remap[e.j], e.kappa)
            for e in self.edges
            if e.i in remap and e.j in remap
        ]
        return Lattice(
            self.kind,
            sites,
            edges,
            connectors=tuple(remap[c] for c in self.connectors if c in remap),
            cell_sites=tuple(remap[c] for c in self.cell_sites if c in remap),
            unit_cell=self.unit_cell,
        )

    def scaled(self, factor: float) -> "Lattice":
        """Copy with every coupling multiplied by ``factor``."""
        edges = [Edge(e.i, e.j, e.kappa * factor) for e in self.edges]
        return Lattice(self.kind, list(self.sites), edges, self.connectors, self.cell_sites, self.unit_cell)

    def to_dict(self) -> dict:
        uc = self.unit_cell
        return {
            "kind": self.kind,
            "sites": [
                {"id": s.id, "label": s.label, "eps": s.eps, "cell": list(s.cell)}
                for s in self.sites
            ],
            "edges": [{"i": e.i, "j": e.j, "kappa": e.kappa} for e in self.edges],
            "connectors": list(self.connectors),
            "cell_sites": list(self.cell_sites),
            "cell": None
            if uc is None
            else {"labels": list(uc.labels), "offsets": [list(b[2]) for b in uc.bonds]},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "Lattice":
        sites = [
            Site(int(s["id"]), str(s.get("label", s["id"])), float(s.get("eps", 0.0)), tuple(s.get("cell", ())))
            for s in data["sites"]
        ]
        edges = [Edge(int(e["i"]), int(e["j"]), float(e["kappa"])) for e in data["edges"]]
        kind = data.get("kind", "custom")
        return cls(
            kind,
            sites,
            edges,
            connectors=tuple(data.get("connectors", ())),
            cell_sites=tuple(data.get("cell_sites", ())),
            unit_cell=UNIT_CELLS.get(kind),
        )

    @classmethod
    def from_json(cls, text: str) -> "Lattice":
        return cls.from_dict(json.loads(text))


def _tile(uc: UnitCell, extent: tuple[int, ...], kappa: float, epsilon: float):
    cells = list(np.ndindex(*extent))
    sites, where, positions = [], {}, {}
    for cell in cells:
        origin = np.zeros(uc.dim, dtype=int)
        for c, vec in zip(cell, uc.lattice_vectors):
            origin = origin + c * np.array(vec)
        for a, label in enumerate(uc.labels):
            sid = len(sites)
            sites.append(Site(sid, label, epsilon, tuple(int(c) for c in cell)))
            where[(cell, a)] = sid
            positions[tuple(int(x) for x in origin + np.array(uc.positions[a]))] = sid
    edges = []
    for cell in cells:
        for a, b, off in uc.bonds:
            target = tuple(c + o for c, o in zip(cell, off))
            if (target, b) in where:
                edges.append(Edge(where[(cell, a)], where[(target, b)], kappa))
    return sites, edges, where, positions


def _ring_cell(positions: dict, ring: Sequence[tuple[int, int]]) -> tuple[int, ...]:
    coords = np.array(list(positions))
    centroid = coords.mean(axis=0)
    best, best_key = None, None
    xs = range(coords[:, 0].min(), coords[:, 0].max() + 1)
    ys = range(coords[:, 1].min(), coords[:, 1].max() + 1)
    for x in xs:
        for y in ys:
            if x % 2 == 0 or y % 2 == 0:
                continue
            members = [(x + dx, y + dy) for dx, dy in ring]
            if not all(m in positions for m in members):
                continue
            # connectors sit at the sum of two consecutive ring offsets
            tips = [
                (x + ring[i][0] + ring[(i + 1) % len(ring)][0], y + ring[i][1] + ring[(i + 1) % len(ring)][1])
                for i in range(len(ring))
            ]
            present = sum(t in positions for t in tips)
            key = (-present, float(np.hypot(x - centroid[0], y - centroid[1])), x, y)
            if best_key is None or key < best_key:
                best, best_key = [positions[m] for m in members], key
    if best is None:
        raise ValueError("patch too small to host a localized cell")
    return tuple(best)


def _connectors_of(edges: list[Edge], cell: Sequence[int]) -> tuple[int, ...]:
    cell = set(cell)
    out = set()
    for e in edges:
        if e.i in cell and e.j not in cell:
            out.add(e.j)
        elif e.j in cell and e.i not in cell:
            out.add(e.i)
    return tuple(sorted(out))


def build_lattice(
    kind: str,
    cells: int | tuple[int, int] = 3,
    kappa: float = 1.0,
    epsilon: float = 0.0,
    *,
    sites: Sequence[dict] | None = None,
    edges: Sequence[dict] | None = None,
    connectors: Sequence[int] = (),
    cell_sites: Sequence[int] = (),
) -> Lattice:
    """Build a finite lattice.

    ``cells`` is a count for the quasi-1D kinds and ``(rows, cols)`` for
    ``lieb`` and ``kagome``. For ``custom`` pass ``sites`` and ``edges`` as
    dicts in the lattice JSON layout.
    """
    if kind == "custom":
        if sites is None or edges is None:
            raise ValueError("custom lattices need explicit sites and edges")
        return Lattice.from_dict(
            {
                "kind": "custom",
                "sites": sites,
                "edges": edges,
                "connectors": list(connectors),
                "cell_sites": list(cell_sites),
            }
        )
    if kind not in UNIT_CELLS:
        raise ValueError(f"unknown lattice kind {kind!r}")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    uc = UNIT_CELLS[kind]
    if uc.dim == 1:
        if isinstance(cells, tuple):
            raise ValueError(f"{kind} takes an integer cell count")
        extent = (int(cells),)
    else:
        if isinstance(cells, int):
            cells = (cells, cells)
        rows, cols = cells
        extent = (int(cols), int(rows))
    if min(extent) < 1:
        raise ValueError("need at least one cell")
    site_list, edge_list, where, positions = _tile(uc, extent, kappa, epsilon)

    if kind in ("rhomboidal", "symmetric_rhomboidal"):
        j = extent[0] // 2
        cell = (where[((j,), 1)], where[((j,), 2)])
    elif kind == "stub":
        if extent[0] < 2:
            raise ValueError("stub lattice needs at least two cells for a localized cell")
        j = (extent[0] - 1) // 2
        cell = (where[((j,), 2)], where[((j,), 1)], where[((j + 1,), 2)])
    elif kind == "lieb":
        cell = _ring_cell(positions, _LIEB_RING)
    else:
        cell = _ring_cell(positions, _KAGOME_RING)
    return Lattice(
        kind,
        site_list,
        edge_list,
        connectors=_connectors_of(edge_list, cell),
        cell_sites=cell,
        unit_cell=uc,
    )


_PATCH_CELLS = {
    "rhomboidal": 3,
    "symmetric_rhomboidal": 3,
    "stub": 3,
    "lieb": (2, 2),
    "kagome": (3, 3),
}


def localized_patch(kind: str, kappa: float = 1.0, epsilon: float = 0.0) -> Lattice:
    """Smallest lattice holding one localized cell and all of its connectors.

    Sites are ordered cell roles first, then connectors. Edges are the
    couplings of the full lattice induced on those sites.
    """
    full = build_lattice(kind, _PATCH_CELLS[kind], kappa, epsilon)
    return full.subgraph(list(full.cell_sites) + list(full.connectors))


def single_particle_matrix(lattice: Lattice) -> np.ndarray:
    h = np.diag([s.eps for s in lattice.sites]).astype(complex)
    for e in lattice.edges:
        h[e.i, e.j] -= e.kappa
        h[e.j, e.i] -= e.kappa
    return h


def bloch_matrix(kind: str, k, kappa: float = 1.0, epsilon: float = 0.0) -> np.ndarray:
    """Bloch Hamiltonian(s) at wavevector(s) ``k``; shape ``(..., nb, nb)``."""
    if kind not in UNIT_CELLS:
        raise ValueError(f"no unit cell defined for lattice kind {kind!r}")
    uc = UNIT_CELLS[kind]
    k = np.asarray(k, dtype=float)
    if uc.dim == 1:
        k = k.reshape(-1, 1)
    else:
        k = k.reshape(-1, uc.dim)
    h = np.zeros((len(k), uc.size, uc.size), dtype=complex)
    h[:, np.arange(uc.size), np.arange(uc.size)] = epsilon
    for a, b, off in uc.bonds:
        phase = np.exp(1j * (k @ np.array(off, dtype=float)))
        h[:, a, b] -= kappa * phase
        h[:, b, a] -= kappa * phase.conj()
    return h


def make_k_grid(n: int, dim: int = 1) -> np.ndarray:
    """``n`` samples per dimension over ``[-pi, pi]``; shape ``(n**dim, dim)``."""
    axis = np.linspace(-np.pi, np.pi, n)
    if dim == 1:
        return axis.reshape(-1, 1)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass
class BandStructure:
    kind: str
    k: np.ndarray
    bands: np.ndarray  # (n_k, n_bands), ascending per row

    @property
    def dim(self) -> int:
        return self.k.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        kcols = ["k"] if self.dim == 1 else [f"k{i}" for i in range(self.dim)]
        writer.writerow(kcols + [f"band_{b}" for b in range(self.bands.shape[1])])
        for kk, row in zip(self.k, self.bands):
            writer.writerow([f"{x:.15g}" for x in kk] + [f"{x:.15g}" for x in row])
        return buf.getvalue()


def bloch_bands(kind: str, kappa: float = 1.0, epsilon: float = 0.0, k_grid=None, n_k: int = 64) -> BandStructure:
    if kind not in UNIT_CELLS:
        raise ValueError(f"no unit cell defined for lattice kind {kind!r}")
    uc = UNIT_CELLS[kind]
    k = make_k_grid(n_k, uc.dim) if k_grid is None else np.asarray(k_grid, dtype=float).reshape(-1, uc.dim)
    if len(k) == 0:
        raise ValueError("empty k grid")
    if np.any(np.abs(k) > np.pi + 1e-12):
        raise ValueError("k samples must lie in [-pi, pi]")
    h = bloch_matrix(kind, k, kappa, epsilon)
    return BandStructure(kind, k, np.linalg.eigvalsh(h) - epsilon)


def flat_band_frequency(bands: BandStructure, tol: float = 1e-10, min_samples: int = 32) -> float | None:
    """Frequency of a band whose spread over k is below ``tol``, else None.

    Bands are matched by value rather than by sorted index, since a flat
    band may cross a dispersive one (symmetric rhomboidal at ``kappa``).
    """
    per_dim = round(len(bands.k) ** (1.0 / bands.dim))
    if per_dim < min_samples:
        raise ValueError(f"need at least {min_samples} k-samples per dimension")
    for candidate in bands.bands[0]:
        nearest = np.take_along_axis(
            bands.bands, np.abs(bands.bands - candidate).argmin(axis=1)[:, None], axis=1
        ).ravel()
        if nearest.max() - nearest.min() < tol:
            return float(nearest.mean())
    return None
