"""Simulation configuration: typed parameter blocks, defaults, and validation.

Every knob the engine reads lives here so a run is fully described by one
SimConfig value.  All defaults are desk-scale choices, overridable from the
scenario file; none of them is measured ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

from .errors import ConfigError

PROTOCOL_LEACH = "LEACH"
PROTOCOL_FZ = "FZ"
PROTOCOL_OFZ = "OFZ"
PROTOCOLS = (PROTOCOL_LEACH, PROTOCOL_FZ, PROTOCOL_OFZ)

# Reserved identifiers.
SINK_NODE_ID = 0
SINK_CLUSTER_ID = 0


@dataclass(frozen=True)
class MobilityParams:
    """Random-waypoint parameters: speed range and pause at each waypoint."""

    v_min_m_s: float = 0.5
    v_max_m_s: float = 5.0
    pause_time_s: float = 2.0

    def validate(self):
        if self.v_min_m_s < 0:
            raise ConfigError("mobility.v_min_m_s", "must be >= 0")
        if self.v_max_m_s < self.v_min_m_s:
            raise ConfigError("mobility.v_max_m_s", "must be >= v_min_m_s")
        if self.pause_time_s < 0:
            raise ConfigError("mobility.pause_time_s", "must be >= 0")


@dataclass(frozen=True)
class RadioParams:
    """First-order radio model constants.

    Transmitting k bits over distance d costs e_elec*k + eps_amp*k*d^2;
    receiving k bits costs e_elec*k.  Idle drain is charged per second.
    """

    e_elec_j_per_bit: float = 50e-9
    eps_amp_j_per_bit_m2: float = 10e-12
    e_idle_j_per_s: float = 0.0

    def validate(self):
        if self.e_elec_j_per_bit < 0:
            raise ConfigError("radio.e_elec_j_per_bit", "must be >= 0")
        if self.eps_amp_j_per_bit_m2 < 0:
            raise ConfigError("radio.eps_amp_j_per_bit_m2", "must be >= 0")
        if self.e_idle_j_per_s < 0:
            raise ConfigError("radio.e_idle_j_per_s", "must be >= 0")


@dataclass(frozen=True)
class EmaConfig:
    """Contact-probability estimator: smoothing weight and silence timeout.

    A contact multiplies fresh observations in with weight alpha; a peer not
    seen for timeout_s has its stored probability decayed by (1 - alpha).
    The 2 s default keeps the estimate fresh enough that a head moving out
    of its cluster is predicted within a round; longer timeouts make the
    departure predictor lag a full rotation behind events.
    """

    alpha: float = 0.3
    timeout_s: float = 2.0

    def validate(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ConfigError("ema.alpha", "must be in [0, 1]")
        if self.timeout_s <= 0:
            raise ConfigError("ema.timeout_s", "must be > 0")


@dataclass(frozen=True)
class ProtocolConfig:
    """Clustering-protocol constants shared by the three variants.

    fz_energy_threshold_j, ch_critical_energy_j and departure_threshold are
    the optimisation knobs: with all three at zero the OFZ variant degrades
    exactly to plain LEACH.  departure_threshold > 0 also enables the
    contact-driven cluster refinement (sync/leave/join and gateway hand-off).

    The critical limit defaults to the cost of one worst-case aggregate
    transmission in the default geometry, so a head above it always
    survives its current transmission and can be relieved before the next;
    a limit below that lets heads die mid-round without ever being seen
    "below critical but alive".
    """

    ch_probability_p: float = 0.1
    round_duration_s: float = 20.0
    membership_threshold_gamma: float = 0.4
    fz_energy_threshold_j: float = 0.0015
    ch_critical_energy_j: float = 0.003
    departure_threshold: float = 0.3

    def validate(self):
        if not (0.0 < self.ch_probability_p <= 1.0):
            raise ConfigError("protocol.ch_probability_p", "must be in (0, 1]")
        if self.round_duration_s <= 0:
            raise ConfigError("protocol.round_duration_s", "must be > 0")
        if not (0.0 <= self.membership_threshold_gamma <= 1.0):
            raise ConfigError("protocol.membership_threshold_gamma", "must be in [0, 1]")
        if self.fz_energy_threshold_j < 0:
            raise ConfigError("protocol.fz_energy_threshold_j", "must be >= 0")
        if self.ch_critical_energy_j < 0:
            raise ConfigError("protocol.ch_critical_energy_j", "must be >= 0")
        if not (0.0 <= self.departure_threshold <= 1.0):
            raise ConfigError("protocol.departure_threshold", "must be in [0, 1]")


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation run.

    Identical SimConfig values (rng_seed included) produce bit-identical
    event traces and reports.  node_count includes the sink, so the default
    scenario of 50 nodes fields 49 mobile sensors reporting to one sink.
    """

    area_width_m: float = 1500.0
    area_height_m: float = 300.0
    node_count: int = 50
    comm_range_m: float = 150.0
    sim_duration_s: float = 300.0
    cbr_interval_s: float = 5.0
    packet_size_bits: int = 500
    packet_ttl_s: float = 60.0
    initial_energy_j: float = 0.015
    rng_seed: int = 1
    mobility_tick_s: float = 1.0
    protocol: str = PROTOCOL_LEACH
    mobility: MobilityParams = field(default_factory=MobilityParams)
    radio: RadioParams = field(default_factory=RadioParams)
    ema: EmaConfig = field(default_factory=EmaConfig)
    protocol_params: ProtocolConfig = field(default_factory=ProtocolConfig)

    def validate(self):
        positive = [
            ("area_width_m", self.area_width_m),
            ("area_height_m", self.area_height_m),
            ("comm_range_m", self.comm_range_m),
            ("cbr_interval_s", self.cbr_interval_s),
            ("packet_size_bits", self.packet_size_bits),
            ("packet_ttl_s", self.packet_ttl_s),
            ("initial_energy_j", self.initial_energy_j),
            ("mobility_tick_s", self.mobility_tick_s),
        ]
        for key, value in positive:
            if not (value > 0) or not math.isfinite(value):
                raise ConfigError(key, "must be > 0 and finite")
        # Zero duration is allowed: it yields an empty timeline.
        if self.sim_duration_s < 0 or not math.isfinite(self.sim_duration_s):
            raise ConfigError("sim_duration_s", "must be >= 0 and finite")
        if self.node_count < 2:
            raise ConfigError("node_count", "must be >= 2 (one sensor plus the sink)")
        if self.protocol not in PROTOCOLS:
            raise ConfigError("protocol", f"must be one of {', '.join(PROTOCOLS)}")
        if not isinstance(self.rng_seed, int):
            raise ConfigError("rng_seed", "must be an integer")
        self.mobility.validate()
        self.radio.validate()
        self.ema.validate()
        self.protocol_params.validate()
        return self

    def to_dict(self):
        return asdict(self)

    def refinement_active(self) -> bool:
        """Contact-driven cluster refinement runs only for OFZ with a live
        departure threshold; at zero the feature is off and OFZ reduces to
        the simpler variants."""
        return (
            self.protocol == PROTOCOL_OFZ
            and self.protocol_params.departure_threshold > 0.0
        )


def _build_block(cls, prefix, data):
    if not isinstance(data, dict):
        raise ConfigError(prefix, "must be a mapping")
    fields = {f for f in cls.__dataclass_fields__}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"{prefix}.{sorted(unknown)[0]}", "unknown key")
    return cls(**data)


def sim_config_from_dict(data: dict, **overrides) -> SimConfig:
    """Build a validated SimConfig from plain dicts (JSON-shaped input).

    Unknown keys are rejected at every nesting level.  Keyword overrides
    (e.g. protocol=..., rng_seed=...) are applied after parsing.
    """
    if not isinstance(data, dict):
        raise ConfigError("sim", "must be a mapping")
    nested = {
        "mobility": MobilityParams,
        "radio": RadioParams,
        "ema": EmaConfig,
        "protocol_params": ProtocolConfig,
    }
    known = set(SimConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    kwargs = {}
    for key, value in data.items():
        if key in nested:
            kwargs[key] = _build_block(nested[key], key, value)
        else:
            kwargs[key] = value
    kwargs.update(overrides)
    try:
        cfg = SimConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError("sim", str(exc)) from exc
    return cfg.validate()
