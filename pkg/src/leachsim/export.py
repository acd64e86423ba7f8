"""Result files: per-run rows, aggregate summary, and plot-ready series.

Every file is comma-separated with a header line and fully determined by
the comparison report, so re-exporting the same results is byte-identical.
Figure series mirror the comparison plots: cluster members and heads over
time, delivered kilobytes over time, delay, throughput, and energy against
node count.
"""

from __future__ import annotations

import csv
import json
import os

from .metrics import RunReport
from .scenario import ComparisonReport, AGGREGATE_METRICS

FIGURE_SERIES_FILES = [
    "fig2_members_vs_time.csv",
    "fig3_heads_vs_time.csv",
    "fig4_delivered_kbytes_vs_time.csv",
    "fig5_delay.csv",
    "fig6_throughput.csv",
    "fig7_energy_vs_nodes.csv",
]


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])


def _mean_series(reports, attr):
    """Average a per-run (time, value) series over seeds; the engine emits
    identical time grids for a shared configuration."""
    series = [getattr(r, attr) for r in reports]
    if not series or not series[0]:
        return []
    length = min(len(s) for s in series)
    out = []
    for i in range(length):
        t = series[0][i][0]
        out.append((t, sum(s[i][1] for s in series) / len(series)))
    return out


def export_results(comparison: ComparisonReport, out_dir, verdicts=None,
                   make_plots=True) -> list:
    """Write the full output tree for a comparison; returns written paths."""
    os.makedirs(out_dir, exist_ok=True)
    scenario = comparison.scenario
    written = []

    def path(name):
        p = os.path.join(out_dir, name)
        written.append(p)
        return p

    with open(path("config_echo.json"), "w", encoding="utf-8") as fh:
        json.dump(scenario.echo(), fh, sort_keys=True, indent=2)
        fh.write("\n")

    keys = sorted(comparison.reports)
    _write_csv(path("runs.csv"), RunReport.scalar_columns(),
               [comparison.reports[k].scalar_row() for k in keys])

    aggregates = comparison.aggregates()
    rows = []
    for (protocol, node_count) in sorted(aggregates):
        for metric in AGGREGATE_METRICS:
            mean, lo, hi = aggregates[(protocol, node_count)][metric]
            rows.append([protocol, node_count, metric, mean, lo, hi])
    _write_csv(path("summary.csv"), ["protocol", "node_count", "metric", "mean", "min", "max"], rows)

    base_count = scenario.node_counts[0]
    protocols = scenario.protocols
    by_protocol = {
        p: [comparison.reports[(p, base_count, s)] for s in scenario.seeds]
        for p in protocols
    }

    def time_series_file(name, attr):
        columns = {p: _mean_series(by_protocol[p], attr) for p in protocols}
        lengths = [len(v) for v in columns.values() if v]
        rows = []
        if lengths:
            for i in range(min(lengths)):
                t = next(iter(columns.values()))[i][0]
                rows.append([t] + [columns[p][i][1] for p in protocols])
        _write_csv(path(name), ["time_s"] + list(protocols), rows)
        return rows

    members_rows = time_series_file("fig2_members_vs_time.csv", "members_series")
    heads_rows = time_series_file("fig3_heads_vs_time.csv", "heads_series")
    kbytes_rows = time_series_file("fig4_delivered_kbytes_vs_time.csv", "delivered_kbytes_series")

    def scalar_file(name, metric):
        rows = []
        for p in protocols:
            mean, lo, hi = aggregates[(p, base_count)][metric]
            rows.append([p, mean, lo, hi])
        _write_csv(path(name), ["protocol", "mean", "min", "max"], rows)
        return rows

    delay_rows = scalar_file("fig5_delay.csv", "mean_delay_s")
    throughput_rows = scalar_file("fig6_throughput.csv", "throughput_pkts_per_s")

    energy_rows = []
    for node_count in scenario.node_counts:
        row = [node_count]
        for p in protocols:
            row.append(aggregates[(p, node_count)]["total_energy_j"][0])
        energy_rows.append(row)
    _write_csv(path("fig7_energy_vs_nodes.csv"), ["node_count"] + list(protocols), energy_rows)

    if verdicts is not None:
        rows = [[v.claim, v.node_count, "pass" if v.passed else "fail",
                 json.dumps(v.values, sort_keys=True)] for v in verdicts]
        _write_csv(path("verdicts.csv"), ["claim", "node_count", "result", "values"], rows)

    for key in sorted(comparison.traces):
        protocol, node_count, seed = key
        trace_dir = os.path.join(out_dir, "traces")
        os.makedirs(trace_dir, exist_ok=True)
        p = os.path.join(trace_dir, f"{protocol}_n{node_count}_s{seed}.trace")
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(comparison.traces[key])
        written.append(p)

    if make_plots:
        from . import plots

        written.extend(plots.render_figures(
            out_dir,
            protocols=protocols,
            members_rows=members_rows,
            heads_rows=heads_rows,
            kbytes_rows=kbytes_rows,
            delay_rows=delay_rows,
            throughput_rows=throughput_rows,
            energy_rows=energy_rows,
            node_counts=scenario.node_counts,
        ))
    return written


def write_single_report(report: RunReport, out_dir, trace_text=None) -> list:
    """Output tree for a single run: structured report, flat row, trace."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    report_path = os.path.join(out_dir, "report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    written.append(report_path)
    row_path = os.path.join(out_dir, "report.csv")
    _write_csv(row_path, RunReport.scalar_columns(), [report.scalar_row()])
    written.append(row_path)
    if trace_text is not None:
        trace_path = os.path.join(out_dir, "trace.txt")
        with open(trace_path, "w", encoding="utf-8") as fh:
            fh.write(trace_text)
        written.append(trace_path)
    return written
