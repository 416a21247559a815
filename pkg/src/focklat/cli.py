"""Command-line front end.

Every subcommand writes CSV (default) or JSON to ``--out`` or stdout.
Floats are written with 15 significant digits so identical inputs give
byte-identical files. Failures print a one-line JSON error record to
stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from math import pi
from typing import Any, Callable, Sequence

import numpy as np

from .entanglement import (
    concurrence,
    decomposition_average_concurrences,
    monogamy,
    negativity,
    ph_test,
)
from .evolution import evolve, prepare, prepare_and_inject
from .fockspace import StateVector, enumerate_basis, partial_trace, state_to_json, truncated_basis
from .hamiltonian import build_hamiltonian, build_interaction, connector_operator
from .lattice import bloch_bands, build_lattice, flat_band_frequency, localized_patch
from .losses import apply_two_core_channel, lossy_qubit_report, mean_photon_number, span_fidelity
from .scenarios import (
    FiberLayout,
    channel_budget,
    channel_state,
    crosstalk_scan,
    four_core_layout,
    hex_ring_layout,
    sixteen_core_layout,
)
from .states import CATALOG, localized_state, localized_state_on, sign_free

__all__ = ["RunConfig", "UsageError", "VerificationError", "main", "parse_photons", "run"]

SUBCOMMANDS = ("bands", "state", "verify", "evolve", "prepare", "entangle", "monogamy", "loss", "mcf")
LAYOUTS = {"four": four_core_layout, "sixteen": sixteen_core_layout, "hex": hex_ring_layout}


class UsageError(ValueError):
    pass


class VerificationError(RuntimeError):
    def __init__(self, invariant: str, message: str):
        super().__init__(message)
        self.invariant = invariant


@dataclass
class RunConfig:
    subcommand: str
    lattice: str = "rhomboidal"
    photons: list[int] = field(default_factory=lambda: [1])
    kappa: float = 1.0
    epsilon: float = 0.0
    zmax: float | None = None
    zsteps: int | None = None
    gamma: float = 0.0
    format: str = "csv"
    out: str | None = None
    seed: int = 0
    encode: str | None = None
    layout: str = "four"
    layout_file: str | None = None
    samples: int = 0
    sign_free: bool = False
    input: str = "localized"

    def validate(self) -> "RunConfig":
        if self.subcommand not in SUBCOMMANDS:
            raise UsageError(f"unknown subcommand {self.subcommand!r}")
        if self.lattice not in CATALOG:
            raise UsageError(f"unknown lattice {self.lattice!r}; choose from {sorted(CATALOG)}")
        if not self.photons or any(n < 0 for n in self.photons):
            raise UsageError("photon numbers must be non-negative")
        if not (self.kappa > 0 and np.isfinite(self.kappa)):
            raise UsageError("--kappa must be positive")
        if not np.isfinite(self.epsilon):
            raise UsageError("--epsilon must be finite")
        if self.zmax is not None and not self.zmax > 0:
            raise UsageError("--zmax must be positive")
        if self.zsteps is not None and self.zsteps < 2:
            raise UsageError("--zsteps must be at least 2")
        if not 0.0 <= self.gamma < 1.0:
            raise UsageError("--gamma must lie in [0, 1)")
        if self.format not in ("csv", "json"):
            raise UsageError("--format must be csv or json")
        if self.samples < 0:
            raise UsageError("--samples must be non-negative")
        if self.layout not in LAYOUTS:
            raise UsageError(f"unknown layout {self.layout!r}")
        if self.input not in ("localized", "bare"):
            raise UsageError("--input must be localized or bare")
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        if isinstance(data.get("photons"), (str, int)):
            data["photons"] = parse_photons(str(data["photons"]))
        return cls(**data)

    def z_grid(self, zmax: float, zsteps: int) -> np.ndarray:
        return np.linspace(0.0, self.zmax if self.zmax is not None else zmax, self.zsteps or zsteps)


def parse_photons(text: str) -> list[int]:
    """``"3"``, ``"1..12"`` or ``"1,2,5"``."""
    try:
        if ".." in text:
            lo, hi = (int(t) for t in text.split(".."))
            if hi < lo:
                raise UsageError(f"empty photon range {text!r}")
            return list(range(lo, hi + 1))
        return [int(t) for t in text.split(",")]
    except ValueError as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"cannot parse photon spec {text!r}") from None


def _threads() -> int:
    raw = os.environ.get("FOCKLAT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"FOCKLAT_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def _sweep(fn: Callable[[int], Any], values: Sequence[int]) -> list:
    """Ordered map over ``values``, parallel up to ``FOCKLAT_THREADS`` workers."""
    n = _threads()
    if n == 1 or len(values) < 2:
        return [fn(v) for v in values]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, values))


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(f"{float(x):.15g}")
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    return x


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.15g}"
    return str(x)


def _table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _records(header: Sequence[str], rows: Sequence[Sequence], fmt: str, extra: dict | None = None) -> str:
    if fmt == "csv":
        return _table(header, rows)
    payload = {"rows": [dict(zip(header, _num(list(r)))) for r in rows]}
    if extra:
        payload.update(_num(extra))
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


# subcommands -----------------------------------------------------------------


def _cmd_bands(cfg: RunConfig) -> str:
    bands = bloch_bands(cfg.lattice, cfg.kappa, cfg.epsilon)
    flat = flat_band_frequency(bands)
    if cfg.format == "csv":
        return bands.to_csv()
    return json.dumps(
        _num({"lattice": cfg.lattice, "flat_band": flat, "k": bands.k.tolist(), "bands": bands.bands.tolist()}),
        indent=2,
        sort_keys=True,
    ) + "\n"


def _cmd_state(cfg: RunConfig) -> str:
    spec = CATALOG[cfg.lattice]
    rows = []
    states = {}
    for n in cfg.photons:
        psi = localized_state(spec, n)
        states[n] = psi
        for occ, a in psi.nonzero(1e-15).items():
            rows.append([n, " ".join(map(str, occ)), a.real])
    if cfg.format == "json":
        return json.dumps({str(n): json.loads(state_to_json(s)) for n, s in states.items()}, indent=2, sort_keys=True) + "\n"
    return _table(["N", "occupation", "amplitude"], rows)


def _verify_rows(cfg: RunConfig, n: int) -> list[list]:
    lattice = localized_patch(cfg.lattice, cfg.kappa, cfg.epsilon)
    spec = CATALOG[cfg.lattice]
    if cfg.sign_free:
        spec = sign_free(spec)
    psi = localized_state_on(lattice, n, spec)
    basis = psi.basis
    h_int = build_interaction(lattice, basis)
    lam = spec.fb_eigenvalue_coeff * cfg.kappa * n
    rows = [["normalization", abs(psi.norm - 1.0), 1e-12]]
    rows.append(["hermiticity", build_hamiltonian(lattice, basis).hermiticity_error(), 1e-12])
    ann = max(
        (float(np.linalg.norm(connector_operator(lattice, basis, c).apply(psi).amplitudes)) for c in lattice.connectors),
        default=0.0,
    )
    rows.append(["connector_annihilation", ann, 1e-12])
    eig = float(np.linalg.norm(h_int.apply(psi).amplitudes - lam * psi.amplitudes))
    rows.append(["eigenrelation", eig, 1e-10])
    return [[n, name, value, tol, value < tol] for name, value, tol in rows]


def _cmd_verify(cfg: RunConfig) -> str:
    rows = [r for block in _sweep(lambda n: _verify_rows(cfg, n), cfg.photons) for r in block]
    out = _records(["N", "invariant", "residual", "tolerance", "pass"], rows, cfg.format)
    failed = [r for r in rows if not r[4]]
    if failed:
        n, name, value, tol, _ = failed[0]
        _emit(cfg, out)
        raise VerificationError(name, f"{name} failed for {cfg.lattice} N={n}: residual {value:.3e} >= {tol:g}")
    return out


def _cmd_evolve(cfg: RunConfig) -> str:
    if len(cfg.photons) != 1:
        raise UsageError("evolve takes a single photon number")
    n = cfg.photons[0]
    lattice = build_lattice(cfg.lattice, 3, cfg.kappa, cfg.epsilon)
    spec = CATALOG[cfg.lattice]
    basis = enumerate_basis(lattice.size, n)
    psi = localized_state(spec, n, basis, lattice.cell_sites)
    if cfg.input == "bare":
        occ = [0] * lattice.size
        occ[lattice.cell_sites[0]] = n
        start = StateVector.fock(basis, occ)
        watched = [m for m in range(lattice.size) if m != lattice.cell_sites[0]]
    else:
        start = psi
        watched = [m for m in range(lattice.size) if m not in lattice.cell_sites]
    z = cfg.z_grid(20.0 / cfg.kappa, 100)
    traj = evolve(build_hamiltonian(lattice, basis), start, z, reference=psi, watched_modes=watched)
    if cfg.format == "csv":
        return traj.to_csv()
    return json.dumps(
        _num({"z": traj.z.tolist(), "fidelity": traj.fidelity.tolist(), "leakage": traj.leakage.tolist()}),
        indent=2,
        sort_keys=True,
    ) + "\n"


def _cmd_prepare(cfg: RunConfig) -> str:
    if len(cfg.photons) != 1:
        raise UsageError("prepare takes a single photon number")
    n = cfg.photons[0]
    z = cfg.z_grid(2 * pi / cfg.kappa, 400)
    res = prepare(cfg.lattice, n, z, cfg.kappa)
    if cfg.format == "csv":
        return res.trajectory.to_csv()
    pipe = prepare_and_inject(cfg.lattice, n, kappa=cfg.kappa)
    return json.dumps(
        _num(
            {
                "lattice": cfg.lattice,
                "N": n,
                "coupling_length": res.coupling_length,
                "grid_peak": res.grid_peak,
                "peak_probability": res.peak_probability,
                "phased_fidelity": pipe.phased_fidelity,
                "max_leakage": pipe.max_leakage,
            }
        ),
        indent=2,
        sort_keys=True,
    ) + "\n"


def _entangle_row(kind: str, n: int) -> list:
    psi = localized_state(CATALOG[kind], n)
    neg = negativity(psi, [0], cross_check=True)
    conc = concurrence(psi, [0])
    if psi.basis.mode_count > 2:
        ph = ph_test(partial_trace(psi, [0, 1]), [0])
    else:
        ph = ph_test(psi, [0])
    return [n, neg, conc, ph]


def _cmd_entangle(cfg: RunConfig) -> str:
    if any(n < 1 for n in cfg.photons):
        raise UsageError("entangle needs N >= 1")
    rows = _sweep(lambda n: _entangle_row(cfg.lattice, n), cfg.photons)
    return _records(["N", "negativity", "concurrence", "ph_min_eig"], rows, cfg.format)


def _monogamy_row(cfg: RunConfig, n: int) -> list:
    r = monogamy(n)
    row = [n, r.c2_a_bc, r.c2_ab, r.c2_ac, r.gap]
    if cfg.samples:
        avg = decomposition_average_concurrences(n, cfg.samples, seed=cfg.seed + n)
        row += [float(avg.min()), float(avg.max())]
    return row


def _cmd_monogamy(cfg: RunConfig) -> str:
    if any(n < 1 for n in cfg.photons):
        raise UsageError("monogamy needs N >= 1")
    header = ["N", "c2_a_bc", "c2_ab", "c2_ac", "gap"]
    if cfg.samples:
        header += ["sampled_min", "sampled_max"]
    rows = _sweep(lambda n: _monogamy_row(cfg, n), cfg.photons)
    return _records(header, rows, cfg.format)


def _parse_encode(text: str) -> tuple[int, int]:
    try:
        parts = dict(p.split("=") for p in text.split(","))
        return int(parts["N"]), int(parts["M"])
    except (ValueError, KeyError):
        raise UsageError(f"--encode expects N=<int>,M=<int>, got {text!r}") from None


def _cmd_loss(cfg: RunConfig) -> str:
    if cfg.encode:
        n, m = _parse_encode(cfg.encode)
        rep = lossy_qubit_report(2**-0.5, 2**-0.5, n, m, cfg.gamma)
        rows = [[b.k, b.weight, b.purity, b.overlap, b.coherence] for b in rep.branches]
        return _records(
            ["k", "weight", "purity", "overlap", "coherence"],
            rows,
            cfg.format,
            {"N": n, "M": m, "gamma": cfg.gamma},
        )
    rows = []
    for n in cfg.photons:
        basis = truncated_basis(2, n)
        rho = apply_two_core_channel(localized_state(CATALOG["rhomboidal"], n, basis), (0, 1), cfg.gamma)
        for k in range(n + 1):
            v = localized_state(CATALOG["rhomboidal"], k, basis).amplitudes
            rows.append([n, k, float(np.real(np.vdot(v, rho.matrix @ v))), span_fidelity(rho), mean_photon_number(rho)])
    return _records(["N", "n_remaining", "weight", "span_fidelity", "mean_photons"], rows, cfg.format)


def _load_layout(cfg: RunConfig) -> FiberLayout:
    if cfg.layout_file:
        with open(cfg.layout_file, encoding="utf-8") as fh:
            return FiberLayout.from_json(fh.read())
    return LAYOUTS[cfg.layout](cfg.kappa)


def _cmd_mcf(cfg: RunConfig) -> str:
    layout = _load_layout(cfg)
    cores, channels = channel_budget(layout)
    if len(cfg.photons) != 1:
        raise UsageError("mcf takes a single photon number")
    n = cfg.photons[0]
    if not layout.channels:
        raise UsageError("layout defines no channels")
    z = cfg.z_grid(20.0 / cfg.kappa, 100)
    if cfg.input == "bare":
        basis = enumerate_basis(layout.size, n)
        occ = [0] * layout.size
        occ[layout.channels[0].cores[0]] = n
        state = StateVector.fock(basis, occ)
    else:
        state = channel_state(layout, layout.channels[0], n)
    res = crosstalk_scan(layout, state, z)
    if cfg.format == "csv":
        return res.to_csv()
    return json.dumps(
        _num(
            {
                "cores": cores,
                "channels": channels,
                "max_leakage": float(res.leakage.max()),
                "channel_leakage": {k: float(v.max()) for k, v in res.channel_leakage.items()},
            }
        ),
        indent=2,
        sort_keys=True,
    ) + "\n"


COMMANDS: dict[str, Callable[[RunConfig], str]] = {
    "bands": _cmd_bands,
    "state": _cmd_state,
    "verify": _cmd_verify,
    "evolve": _cmd_evolve,
    "prepare": _cmd_prepare,
    "entangle": _cmd_entangle,
    "monogamy": _cmd_monogamy,
    "loss": _cmd_loss,
    "mcf": _cmd_mcf,
}

_HELP = {
    "bands": "Bloch bands on a 64-point grid; CSV of k and band frequencies.",
    "state": "Fock amplitudes of the localized N-photon state.",
    "verify": "Check normalization, hermiticity, connector annihilation and the eigenrelation.",
    "evolve": "Propagate the localized state (or a bare excitation) in a finite lattice.",
    "prepare": "Coupler stage: transfer probability P(z) and coupling length.",
    "entangle": "Negativity, normalized concurrence and minimum partial-transpose eigenvalue per N.",
    "monogamy": "Squared concurrences of the stub state and the monogamy gap per N.",
    "loss": "Photon loss on two cores; with --encode, per-branch qubit coherence.",
    "mcf": "Crosstalk scan of a multi-core fibre layout.",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="focklat", description="Localized multiphoton states on flat-band lattices.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=_HELP[name], description=_HELP[name])
        p.add_argument("--lattice", choices=sorted(CATALOG))
        p.add_argument("--photons", help="N, a range like 1..12, or a list like 1,2,5")
        p.add_argument("--kappa", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--zmax", type=float)
        p.add_argument("--zsteps", type=int)
        p.add_argument("--gamma", type=float)
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--config", help="JSON RunConfig; explicit flags override it")
        p.add_argument("--seed", type=int)
        if name == "loss":
            p.add_argument("--encode", help="qubit encoding N=<int>,M=<int>")
        if name == "mcf":
            p.add_argument("--layout", choices=sorted(LAYOUTS))
            p.add_argument("--layout-file", dest="layout_file", help="layout JSON")
        if name == "monogamy":
            p.add_argument("--samples", type=int, help="random decompositions per N for the sampled bound")
        if name == "verify":
            p.add_argument("--sign-free", dest="sign_free", action="store_const", const=True,
                           help="drop the sign pattern (negative control)")
        if name in ("evolve", "mcf"):
            p.add_argument("--input", choices=("localized", "bare"))
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = RunConfig.from_json(fh.read())
        cfg.subcommand = args.subcommand
    else:
        cfg = RunConfig(args.subcommand)
    for f in fields(RunConfig):
        if f.name in ("subcommand", "photons"):
            continue
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(cfg, f.name, value)
    if args.photons is not None:
        cfg.photons = parse_photons(args.photons)
    return cfg.validate()


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _error(kind: str, message: str, **extra) -> None:
    record = {"error": kind, "message": message, **extra}
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(args)
        _emit(cfg, COMMANDS[cfg.subcommand](cfg))
    except UsageError as exc:
        _error("usage", str(exc))
        return 2
    except VerificationError as exc:
        _error("verification", str(exc), invariant=exc.invariant)
        return 1
    except (ValueError, ArithmeticError, OSError) as exc:
        _error(type(exc).__name__, str(exc))
        return 1
    return 0


def main() -> None:
    sys.exit(run())
