"""Localized multiphoton states of light on flat-band waveguide lattices."""

from .fockspace import (
    DensityMatrix,
    FockBasis,
    StateVector,
    TruncatedFockBasis,
    enumerate_basis,
    fidelity,
    partial_trace,
    partial_transpose,
    truncated_basis,
)
from .lattice import Lattice, bloch_bands, build_lattice, flat_band_frequency, localized_patch
from .hamiltonian import SectorOperator, build_hamiltonian, build_interaction, connector_operator
from .states import CATALOG, LocalizedStateSpec, localized_state, localized_state_on
from .evolution import Propagator, evolve, prepare, prepare_and_inject
from .entanglement import concurrence, monogamy, negativity, ph_test, schmidt
from .losses import apply_two_core_channel, kraus_set, lossy_qubit_report
from .scenarios import FiberLayout, channel_budget, crosstalk_scan

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "FockBasis",
    "StateVector",
    "TruncatedFockBasis",
    "enumerate_basis",
    "fidelity",
    "partial_trace",
    "partial_transpose",
    "truncated_basis",
    "Lattice",
    "bloch_bands",
    "build_lattice",
    "flat_band_frequency",
    "localized_patch",
    "SectorOperator",
    "build_hamiltonian",
    "build_interaction",
    "connector_operator",
    "CATALOG",
    "LocalizedStateSpec",
    "localized_state",
    "localized_state_on",
    "Propagator",
    "evolve",
    "prepare",
    "prepare_and_inject",
    "concurrence",
    "monogamy",
    "negativity",
    "ph_test",
    "schmidt",
    "apply_two_core_channel",
    "kraus_set",
    "lossy_qubit_report",
    "FiberLayout",
    "channel_budget",
    "crosstalk_scan",
]
