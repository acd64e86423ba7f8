"""Performance measures computed from a finished run.

All of these are pure functions of the accumulator the engine fills while
running, so a report can be recomputed from a saved trace and compared
field for field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import MetricUndefinedError


def pdr(received: int, sent: int) -> float:
    """Delivered packets as a percentage of packets sent."""
    if sent < 1:
        raise MetricUndefinedError("packet delivery ratio undefined with zero packets sent")
    return received / sent * 100.0


def throughput(received: int, duration_s: float) -> float:
    """Delivered packets per second of simulated time."""
    if duration_s <= 0:
        raise MetricUndefinedError("throughput undefined for a zero-length run")
    return received / duration_s


def end_to_end_delay(delays_s) -> float:
    """Mean creation-to-delivery latency over delivered packets only."""
    delays_s = list(delays_s)
    if not delays_s:
        raise MetricUndefinedError("end-to-end delay undefined with zero delivered packets")
    return sum(delays_s) / len(delays_s)


def _time_weighted(snapshots, value_of, total_duration_s: float) -> float:
    """Mean of value_of(snapshot), each snapshot weighted by the time until
    the next one (the last snapshot runs to the end of the simulation)."""
    if not snapshots or total_duration_s <= 0:
        return 0.0
    total = 0.0
    for i, snap in enumerate(snapshots):
        t_next = snapshots[i + 1].time_s if i + 1 < len(snapshots) else total_duration_s
        total += value_of(snap) * (t_next - snap.time_s)
    return total / total_duration_s


def avg_cluster_members(snapshots, total_duration_s: float) -> float:
    """Time-weighted mean cluster size; intervals with no clusters count 0."""

    def members_per_cluster(snap):
        if snap.cluster_count == 0:
            return 0.0
        return snap.member_total / snap.cluster_count

    return _time_weighted(snapshots, members_per_cluster, total_duration_s)


def avg_cluster_heads(snapshots, total_duration_s: float) -> float:
    """Time-weighted mean number of serving cluster heads."""
    return _time_weighted(snapshots, lambda s: s.head_count, total_duration_s)


def network_lifetime(death_times_s, sensor_count: int, sim_duration_s: float):
    """(first-death time, half-dead time); either falls back to the run
    length when the event never happens."""
    deaths = sorted(death_times_s)
    fnd = deaths[0] if deaths else sim_duration_s
    half = (sensor_count + 1) // 2
    hnd = deaths[half - 1] if len(deaths) >= half and half >= 1 else sim_duration_s
    return fnd, hnd


@dataclass
class ClusterSnapshot:
    """Cluster shape at one round boundary."""

    time_s: float
    cluster_count: int
    member_total: int
    head_count: int


@dataclass
class MetricsAccumulator:
    """Raw counters the engine feeds while a run executes."""

    packets_sent: int = 0
    packets_received: int = 0
    packets_dropped: int = 0
    sink_radio_receptions: int = 0
    delays_s: list = field(default_factory=list)
    received_times_s: list = field(default_factory=list)
    death_times_s: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)


_SCALAR_COLUMNS = [
    "protocol",
    "seed",
    "node_count",
    "sim_duration_s",
    "packets_sent",
    "packets_received",
    "packets_dropped",
    "sink_radio_receptions",
    "pdr_percent",
    "mean_delay_s",
    "throughput_pkts_per_s",
    "throughput_received_per_s_x100",
    "total_energy_j",
    "mean_residual_energy_j",
    "avg_cluster_members",
    "avg_cluster_heads",
    "lifetime_fnd_s",
    "lifetime_hnd_s",
    "deaths",
    "energy_closure_max_rel_err",
]


@dataclass
class RunReport:
    """Everything one run produced: scalar metrics plus plot-ready series.

    ``throughput_received_per_s_x100`` is the received/time ratio scaled by
    100, emitted alongside the plain packets-per-second figure for parity
    with conventions that express it as a percentage.
    """

    protocol: str
    seed: int
    node_count: int
    sim_duration_s: float
    config: dict
    packets_sent: int
    packets_received: int
    packets_dropped: int
    sink_radio_receptions: int
    pdr_percent: float | None
    mean_delay_s: float | None
    throughput_pkts_per_s: float | None
    throughput_received_per_s_x100: float | None
    total_energy_j: float
    mean_residual_energy_j: float
    avg_cluster_members: float
    avg_cluster_heads: float
    lifetime_fnd_s: float
    lifetime_hnd_s: float
    deaths: int
    energy_closure_max_rel_err: float
    members_series: list
    heads_series: list
    delivered_kbytes_series: list
    per_node_consumed_j: dict

    @staticmethod
    def scalar_columns():
        return list(_SCALAR_COLUMNS)

    def scalar_row(self):
        return [getattr(self, name) for name in _SCALAR_COLUMNS]

    def to_json(self) -> str:
        payload = {
            name: getattr(self, name)
            for name in (
                _SCALAR_COLUMNS
                + ["config", "members_series", "heads_series", "delivered_kbytes_series", "per_node_consumed_j"]
            )
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def build_report(protocol, seed, config_dict, acc: MetricsAccumulator, *,
                 node_count, sim_duration_s, total_energy_j, mean_residual_energy_j,
                 energy_closure_max_rel_err, per_node_consumed_j,
                 delivered_kbytes_series) -> RunReport:
    """Derive every report field from the accumulator; metrics that are
    undefined for this run (nothing sent, nothing delivered) become None."""
    sensor_count = node_count - 1
    try:
        pdr_pct = pdr(acc.packets_received, acc.packets_sent)
    except MetricUndefinedError:
        pdr_pct = None
    try:
        tput = throughput(acc.packets_received, sim_duration_s)
    except MetricUndefinedError:
        tput = None
    try:
        delay = end_to_end_delay(acc.delays_s)
    except MetricUndefinedError:
        delay = None
    fnd, hnd = network_lifetime(acc.death_times_s, sensor_count, sim_duration_s)
    return RunReport(
        protocol=protocol,
        seed=seed,
        node_count=node_count,
        sim_duration_s=sim_duration_s,
        config=config_dict,
        packets_sent=acc.packets_sent,
        packets_received=acc.packets_received,
        packets_dropped=acc.packets_dropped,
        sink_radio_receptions=acc.sink_radio_receptions,
        pdr_percent=pdr_pct,
        mean_delay_s=delay,
        throughput_pkts_per_s=tput,
        throughput_received_per_s_x100=(tput * 100.0 if tput is not None else None),
        total_energy_j=total_energy_j,
        mean_residual_energy_j=mean_residual_energy_j,
        avg_cluster_members=avg_cluster_members(acc.snapshots, sim_duration_s),
        avg_cluster_heads=avg_cluster_heads(acc.snapshots, sim_duration_s),
        lifetime_fnd_s=fnd,
        lifetime_hnd_s=hnd,
        deaths=len(acc.death_times_s),
        energy_closure_max_rel_err=energy_closure_max_rel_err,
        members_series=[(s.time_s, (s.member_total / s.cluster_count) if s.cluster_count else 0.0)
                        for s in acc.snapshots],
        heads_series=[(s.time_s, s.head_count) for s in acc.snapshots],
        delivered_kbytes_series=delivered_kbytes_series,
        per_node_consumed_j=per_node_consumed_j,
    )
