"""Optical and microwave polarization of nuclear spins near an NV center.

Seven-level Lindblad model of the NV electronic spin coupled to one nuclear
spin, with the ESLAC and the two precession (m_s=0, m_s=1) protocols.
"""

from importlib import metadata as _metadata

try:
    __version__ = _metadata.version("artifact")
except _metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .dissipation import MODELS, RateModel, RelaxationParams, get_model
from .hyperfine import FamilyRecord, HyperfineTensor, family_registry, get_family
from .model import HamiltonianMode, SystemParams, build_hamiltonian
from .observables import Readout, electron_polarization, nuclear_polarization, singlet_population
from .sequences import (
    Protocol,
    RunSpec,
    Segment,
    compute_delta,
    make_protocol,
    mw_schedule,
    run,
    sweep,
)

__all__ = [
    "MODELS", "RateModel", "RelaxationParams", "get_model",
    "FamilyRecord", "HyperfineTensor", "family_registry", "get_family",
    "HamiltonianMode", "SystemParams", "build_hamiltonian",
    "Readout", "electron_polarization", "nuclear_polarization", "singlet_population",
    "Protocol", "RunSpec", "Segment", "compute_delta", "make_protocol", "mw_schedule",
    "run", "sweep",
]
