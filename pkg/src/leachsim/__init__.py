"""Deterministic simulator for LEACH, FZ-LEACH and OFZ-LEACH clustering in
mobile wireless sensor networks."""

from .config import (
    SimConfig,
    MobilityParams,
    RadioParams,
    EmaConfig,
    ProtocolConfig,
    PROTOCOL_LEACH,
    PROTOCOL_FZ,
    PROTOCOL_OFZ,
    PROTOCOLS,
)
from .engine import run_simulation, simulate
from .scenario import parse_config, run_scenario, verify_trends

__version__ = "0.1.0"

__all__ = [
    "SimConfig",
    "MobilityParams",
    "RadioParams",
    "EmaConfig",
    "ProtocolConfig",
    "PROTOCOL_LEACH",
    "PROTOCOL_FZ",
    "PROTOCOL_OFZ",
    "PROTOCOLS",
    "run_simulation",
    "simulate",
    "parse_config",
    "run_scenario",
    "verify_trends",
    "__version__",
]
