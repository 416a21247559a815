"""Multi-core fibre layouts carrying localized two-core channels.

A layout is a set of cores with explicit pairwise couplings and a list of
channels, each a pair of cores that hosts a rhomboidal-type localized
state. Core coordinates are metadata only; dynamics use the couplings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import cos, pi, sin
from typing import Sequence

import numpy as np

from .evolution import Propagator
from .fockspace import StateVector, enumerate_basis, truncated_basis
from .hamiltonian import build_hamiltonian
from .lattice import Edge, Lattice, Site
from .losses import apply_channel
from .states import CATALOG, localized_state

__all__ = [
    "Core",
    "Channel",
    "FiberLayout",
    "four_core_layout",
    "grouped_layout",
    "sixteen_core_layout",
    "hex_ring_layout",
    "CrosstalkResult",
    "crosstalk_scan",
    "channel_budget",
    "channel_state",
    "QubitFidelity",
    "qubit_channel_fidelity",
]


@dataclass(frozen=True)
class Core:
    id: int
    x: float = 0.0
    y: float = 0.0
    label: str = ""


@dataclass(frozen=True)
class Channel:
    cores: tuple[int, ...]
    kind: str = "rhomboidal"
    name: str = ""


@dataclass
class FiberLayout:
    cores: list[Core]
    couplings: list[tuple[int, int, float]]
    channels: list[Channel] = field(default_factory=list)
    epsilon: float = 0.0

    def __post_init__(self):
        ids = [c.id for c in self.cores]
        if ids != list(range(len(ids))):
            raise ValueError("core ids must be 0..n-1 in order")
        seen = set()
        for i, j, k in self.couplings:
            if i == j:
                raise ValueError("self-coupling is not allowed")
            if not (0 <= i < len(ids) and 0 <= j < len(ids)):
                raise ValueError(f"coupling ({i}, {j}) refers to an unknown core")
            pair = frozenset((i, j))
            if pair in seen:
                raise ValueError(f"coupling {sorted(pair)} listed twice")
            seen.add(pair)
        used: set[int] = set()
        for ch in self.channels:
            if any(c not in range(len(ids)) for c in ch.cores):
                raise ValueError(f"channel {ch.cores} refers to an unknown core")
            if len(ch.cores) != CATALOG[ch.kind].size:
                raise ValueError(f"channel {ch.cores} does not match a {ch.kind} cell")
            if used & set(ch.cores):
                raise ValueError(f"channel {ch.cores} overlaps another channel")
            used |= set(ch.cores)

    @property
    def size(self) -> int:
        return len(self.cores)

    def coupling_matrix(self) -> np.ndarray:
        k = np.zeros((self.size, self.size))
        for i, j, c in self.couplings:
            k[i, j] = k[j, i] = c
        return k

    def lattice(self) -> Lattice:
        sites = [Site(c.id, c.label or str(c.id), self.epsilon) for c in self.cores]
        edges = [Edge(i, j, k) for i, j, k in self.couplings if k != 0]
        return Lattice("custom", sites, edges)

    def scaled(self, factor: float) -> "FiberLayout":
        return FiberLayout(
            self.cores, [(i, j, k * factor) for i, j, k in self.couplings], self.channels, self.epsilon
        )

    def to_dict(self) -> dict:
        return {
            "cores": [{"id": c.id, "x": c.x, "y": c.y, "label": c.label} for c in self.cores],
            "couplings": [[i, j, k] for i, j, k in self.couplings],
            "channels": [{"cores": list(ch.cores), "kind": ch.kind, "name": ch.name} for ch in self.channels],
            "epsilon": self.epsilon,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "FiberLayout":
        cores = [Core(int(c["id"]), float(c.get("x", 0)), float(c.get("y", 0)), c.get("label", "")) for c in data["cores"]]
        couplings = [(int(i), int(j), float(k)) for i, j, k in data.get("couplings", [])]
        channels = []
        for ch in data.get("channels", []):
            if isinstance(ch, dict):
                channels.append(Channel(tuple(int(c) for c in ch["cores"]), ch.get("kind", "rhomboidal"), ch.get("name", "")))
            else:
                channels.append(Channel(tuple(int(c) for c in ch)))
        return cls(cores, couplings, channels, float(data.get("epsilon", 0.0)))

    @classmethod
    def from_json(cls, text: str) -> "FiberLayout":
        return cls.from_dict(json.loads(text))


_DIAMOND = (("A", -1.0, 0.0), ("B", 1.0, 0.0), ("S'", 0.0, 1.0), ("S", 0.0, -1.0))


def _group(offset: int, cx: float, cy: float, pitch: float, kappa: float, diagonal: float, tag: str):
    cores = [Core(offset + n, cx + pitch * x, cy + pitch * y, f"{name}{tag}") for n, (name, x, y) in enumerate(_DIAMOND)]
    a, b, sp_, s = range(offset, offset + 4)
    couplings = [(a, sp_, kappa), (a, s, kappa), (b, sp_, kappa), (b, s, kappa)]
    if diagonal:
        couplings += [(a, b, diagonal), (sp_, s, diagonal)]
    channels = [Channel((a, b), name=f"AB{tag}"), Channel((sp_, s), name=f"S'S{tag}")]
    return cores, couplings, channels


def four_core_layout(kappa: float = 1.0, diagonal: float = 0.0, pitch: float = 20.0) -> FiberLayout:
    """Diamond of cores A, B, S', S with the two opposite pairs as channels.

    Each channel core couples to both cores of the other pair with
    ``kappa``; ``diagonal`` optionally couples A-B and S'-S.
    """
    cores, couplings, channels = _group(0, 0.0, 0.0, pitch, kappa, diagonal, "")
    return FiberLayout(cores, couplings, channels)


def grouped_layout(
    centers: Sequence[tuple[float, float]],
    kappa: float = 1.0,
    diagonal: float = 0.0,
    inter_kappa: float = 0.0,
    pitch: float = 10.0,
) -> FiberLayout:
    """Four-core diamond groups placed at ``centers``.

    With ``inter_kappa > 0`` the nearest cores of neighbouring groups
    (consecutive centers, cyclically) are coupled; the resulting crosstalk
    is whatever the dynamics give.
    """
    cores, couplings, channels = [], [], []
    for g, (cx, cy) in enumerate(centers):
        c, k, ch = _group(4 * g, cx, cy, pitch, kappa, diagonal, f"_{g}")
        cores += c
        couplings += k
        channels += ch
    n = len(centers)
    if inter_kappa and n > 1:
        pairs = set()
        for g in range(n):
            h = (g + 1) % n
            if g == h or frozenset((g, h)) in pairs:
                continue
            pairs.add(frozenset((g, h)))
            gi = range(4 * g, 4 * g + 4)
            hi = range(4 * h, 4 * h + 4)
            i, j = min(((i, j) for i in gi for j in hi), key=lambda p: _dist(cores[p[0]], cores[p[1]]))
            couplings.append((i, j, inter_kappa))
    return FiberLayout(cores, couplings, channels)


def _dist(a: Core, b: Core) -> float:
    return float(np.hypot(a.x - b.x, a.y - b.y))


def sixteen_core_layout(kappa: float = 1.0, diagonal: float = 0.0, inter_kappa: float = 0.0) -> FiberLayout:
    """Four diamond groups on the corners of a square (16 cores)."""
    r = 40.0
    return grouped_layout([(-r, r), (r, r), (r, -r), (-r, -r)], kappa, diagonal, inter_kappa)


def hex_ring_layout(kappa: float = 1.0, diagonal: float = 0.0, inter_kappa: float = 0.0) -> FiberLayout:
    """Six diamond groups on a hexagonal ring (24 cores)."""
    r = 60.0
    centers = [(r * cos(pi * g / 3), r * sin(pi * g / 3)) for g in range(6)]
    return grouped_layout(centers, kappa, diagonal, inter_kappa)


def channel_budget(layout: FiberLayout) -> tuple[int, int]:
    """``(cores, channels)``; channel overlap is rejected when the layout is built."""
    return layout.size, len(layout.channels)


def channel_state(layout: FiberLayout, channel: Channel, n_photons: int, basis=None) -> StateVector:
    """``|psi_N>`` of the channel's catalog cell placed on its cores."""
    if basis is None:
        basis = enumerate_basis(layout.size, n_photons)
    return localized_state(CATALOG[channel.kind], n_photons, basis, channel.cores)


@dataclass
class CrosstalkResult:
    z: np.ndarray
    leakage: np.ndarray  # population outside the cores of the channels the input occupies
    channel_leakage: dict[str, np.ndarray]  # |change of channel population| per channel
    populations: np.ndarray

    def to_csv(self) -> str:
        names = list(self.channel_leakage)
        lines = [",".join(["z", "leakage"] + [f"leak_{n}" for n in names])]
        for i, z in enumerate(self.z):
            row = [z, self.leakage[i]] + [self.channel_leakage[n][i] for n in names]
            lines.append(",".join(f"{x:.15g}" for x in row))
        return "\n".join(lines) + "\n"


def crosstalk_scan(layout: FiberLayout, state: StateVector, z_grid: Sequence[float]) -> CrosstalkResult:
    """Propagate ``state`` through the layout and track population leaving its channels."""
    if state.basis.mode_count != layout.size:
        raise ValueError("state is not defined on the layout's cores")
    z_grid = np.asarray(z_grid, dtype=float)
    h = build_hamiltonian(layout.lattice(), state.basis)
    pops = np.array([s.populations() for s in Propagator(h).run(state, z_grid)])
    p0 = state.populations()
    names = [ch.name or str(ch.cores) for ch in layout.channels]
    active = [ch for ch in layout.channels if p0[list(ch.cores)].sum() > 1e-14]
    if active:
        inside = sorted({c for ch in active for c in ch.cores})
    else:
        inside = list(np.flatnonzero(p0 > 1e-14))
    outside = [c for c in range(layout.size) if c not in inside]
    leakage = pops[:, outside].sum(axis=1) if outside else np.zeros(len(z_grid))
    per = {
        name: np.abs(pops[:, list(ch.cores)].sum(axis=1) - p0[list(ch.cores)].sum())
        for name, ch in zip(names, layout.channels)
    }
    return CrosstalkResult(z_grid, leakage, per, pops)


@dataclass
class QubitFidelity:
    fidelity: float  # fidelity of the full output with the ideal target
    no_loss_fidelity: float  # fidelity of the renormalised no-loss branch
    no_loss_weight: float


def qubit_channel_fidelity(
    layout: FiberLayout,
    alpha: complex,
    beta: complex,
    z: float,
    gamma: float = 0.0,
    channels: tuple[int, int] = (0, 1),
) -> QubitFidelity:
    """Single photon in ``alpha |psi_1>_{ch0} + beta |psi_1>_{ch1}``, propagated then damped.

    The ideal target is the propagated input without loss; loss acts on every
    core after propagation.
    """
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > 1e-12:
        raise ValueError("(alpha, beta) must be normalised")
    ch0, ch1 = (layout.channels[c] for c in channels)
    basis = truncated_basis(layout.size, 1)
    psi = alpha * channel_state(layout, ch0, 1, basis) + beta * channel_state(layout, ch1, 1, basis)
    h = build_hamiltonian(layout.lattice(), basis)
    out = Propagator(h)(psi, z)
    rho = out.density_matrix()
    for mode in range(layout.size):
        rho = apply_channel(rho, mode, gamma)
    target = out.amplitudes
    fid = float(np.real(np.vdot(target, rho.matrix @ target)))
    sector = basis.sector_slice(1)
    block = rho.matrix[sector, sector]
    w = float(np.trace(block).real)
    t1 = target[sector]
    no_loss = float(np.real(np.vdot(t1, block @ t1))) / w if w > 0 else 0.0
    return QubitFidelity(fid, no_loss, w)
