"""Scenario files and comparative experiments.

A scenario is a JSON file naming the protocols to compare, the seeds to
average over, an optional node-count sweep, and overrides for the base
simulation parameters.  Running one produces a report per (protocol,
node_count, seed) plus per-protocol aggregates and the directional trend
verdicts between the three variants.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .config import SimConfig, sim_config_from_dict, PROTOCOLS
from .engine import run_simulation, simulate
from .errors import ConfigError
from .metrics import RunReport

_TOP_LEVEL_KEYS = {"name", "protocols", "seeds", "node_counts", "sim"}

# Metrics aggregated over seeds for summaries and trend checks.
AGGREGATE_METRICS = [
    "pdr_percent",
    "mean_delay_s",
    "throughput_pkts_per_s",
    "total_energy_j",
    "mean_residual_energy_j",
    "avg_cluster_members",
    "avg_cluster_heads",
    "lifetime_fnd_s",
    "lifetime_hnd_s",
    "deaths",
    "packets_sent",
    "packets_received",
]


@dataclass
class Scenario:
    name: str
    base: SimConfig
    protocols: list
    seeds: list
    node_counts: list

    def run_keys(self):
        for protocol in self.protocols:
            for node_count in self.node_counts:
                for seed in self.seeds:
                    yield protocol, node_count, seed

    def config_for(self, protocol, node_count, seed) -> SimConfig:
        base = self.base.to_dict()
        return sim_config_from_dict(base, protocol=protocol, node_count=node_count,
                                    rng_seed=seed)

    def echo(self) -> dict:
        return {
            "name": self.name,
            "protocols": list(self.protocols),
            "seeds": list(self.seeds),
            "node_counts": list(self.node_counts),
            "sim": self.base.to_dict(),
        }


def parse_config(source) -> Scenario:
    """Load and validate a scenario from a path or a JSON string.

    Unknown keys anywhere are rejected; every default is filled in so the
    echoed scenario names the complete effective parameter set.
    """
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
        default_name = os.path.splitext(os.path.basename(source))[0]
    else:
        text = source
        default_name = "scenario"
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("<file>", "top level must be an object")
    unknown = set(data) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    name = data.get("name", default_name)
    protocols = data.get("protocols", list(PROTOCOLS))
    if not isinstance(protocols, list) or not protocols:
        raise ConfigError("protocols", "must be a nonempty list")
    for p in protocols:
        if p not in PROTOCOLS:
            raise ConfigError("protocols", f"unknown protocol {p!r}")
    seeds = data.get("seeds", list(range(1, 11)))
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds", "must be a nonempty list of integers")
    base = sim_config_from_dict(data.get("sim", {}))
    node_counts = data.get("node_counts", [base.node_count])
    if (not isinstance(node_counts, list) or not node_counts
            or not all(isinstance(n, int) for n in node_counts)):
        raise ConfigError("node_counts", "must be a nonempty list of integers")
    return Scenario(name=name, base=base, protocols=list(protocols),
                    seeds=list(seeds), node_counts=list(node_counts))


@dataclass
class Verdict:
    claim: str
    node_count: int
    passed: bool
    values: dict

    def describe(self):
        status = "pass" if self.passed else "FAIL"
        detail = ", ".join(f"{k}={v}" for k, v in self.values.items())
        return f"[{status}] n={self.node_count} {self.claim}: {detail}"


@dataclass
class ComparisonReport:
    scenario: Scenario
    reports: dict = field(default_factory=dict)  # (protocol, node_count, seed) -> RunReport
    traces: dict = field(default_factory=dict)   # same key -> trace text, when kept

    def aggregates(self):
        """Per (protocol, node_count): metric -> (mean, min, max) over seeds."""
        out = {}
        for protocol in self.scenario.protocols:
            for node_count in self.scenario.node_counts:
                rows = [self.reports[(protocol, node_count, seed)]
                        for seed in self.scenario.seeds]
                stats = {}
                for metric in AGGREGATE_METRICS:
                    values = [getattr(r, metric) for r in rows if getattr(r, metric) is not None]
                    if values:
                        stats[metric] = (sum(values) / len(values), min(values), max(values))
                    else:
                        stats[metric] = (None, None, None)
                out[(protocol, node_count)] = stats
        return out

    def seed_mean(self, protocol, node_count, metric):
        return self.aggregates()[(protocol, node_count)][metric][0]


def run_scenario(scenario: Scenario, max_workers: int | None = None,
                 keep_traces: bool = False) -> ComparisonReport:
    """Execute every (protocol, node_count, seed) run of a scenario.

    Runs are independent, so with max_workers > 1 (or the
    LEACHSIM_MAX_WORKERS environment variable) they execute in a process
    pool; results are keyed and ordered afterwards, so the output does not
    depend on completion order.
    """
    if max_workers is None:
        max_workers = int(os.environ.get("LEACHSIM_MAX_WORKERS", "1"))
    keys = list(scenario.run_keys())
    comparison = ComparisonReport(scenario=scenario)
    if max_workers > 1 and len(keys) > 1 and not keep_traces:
        from concurrent.futures import ProcessPoolExecutor

        configs = [scenario.config_for(*key) for key in keys]
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            for key, report in zip(keys, pool.map(run_simulation, configs)):
                comparison.reports[key] = report
    else:
        for key in keys:
            config = scenario.config_for(*key)
            if keep_traces:
                result = simulate(config)
                comparison.reports[key] = result.report
                comparison.traces[key] = result.trace_text()
            else:
                comparison.reports[key] = run_simulation(config)
    return comparison


def _ordered_claim(claims, comparison, node_count, metric, ordering, direction):
    """Append pass/fail verdicts for a chain like OFZ >= FZ >= LEACH."""
    for left, right in zip(ordering, ordering[1:]):
        lv = comparison.seed_mean(left, node_count, metric)
        rv = comparison.seed_mean(right, node_count, metric)
        if lv is None or rv is None:
            passed = False
            values = {left: lv, right: rv}
        else:
            passed = lv >= rv if direction == ">=" else lv <= rv
            values = {left: lv, right: rv}
        claims.append(Verdict(
            claim=f"{metric}: {left} {direction} {right}",
            node_count=node_count,
            passed=passed,
            values=values,
        ))


def verify_trends(comparison: ComparisonReport) -> list[Verdict]:
    """Directional claims between the variants, evaluated on seed means.

    Delivery ratio and lifetime must not degrade from LEACH through FZ to
    OFZ; OFZ must not exceed FZ on delay nor LEACH on average head count.
    All comparisons are non-strict.
    """
    scenario = comparison.scenario
    for required in PROTOCOLS:
        if required not in scenario.protocols:
            raise ValueError(f"trend verification needs all three protocols; missing {required}")
    verdicts = []
    for node_count in scenario.node_counts:
        _ordered_claim(verdicts, comparison, node_count, "pdr_percent",
                       ["OFZ", "FZ", "LEACH"], ">=")
        _ordered_claim(verdicts, comparison, node_count, "mean_delay_s",
                       ["OFZ", "FZ"], "<=")
        _ordered_claim(verdicts, comparison, node_count, "lifetime_fnd_s",
                       ["OFZ", "FZ", "LEACH"], ">=")
        _ordered_claim(verdicts, comparison, node_count, "lifetime_hnd_s",
                       ["OFZ", "FZ", "LEACH"], ">=")
        _ordered_claim(verdicts, comparison, node_count, "avg_cluster_heads",
                       ["OFZ", "LEACH"], "<=")
    return verdicts
