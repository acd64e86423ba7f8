"""Figure rendering for comparison runs.

Renders the six comparison figures as PNG files next to the CSV series.
Uses the Agg backend with fixed sizes so identical inputs produce
identical image bytes.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_STYLES = {
    "LEACH": {"color": "#777777", "linestyle": "--", "marker": "s"},
    "FZ": {"color": "#1f77b4", "linestyle": "-.", "marker": "^"},
    "OFZ": {"color": "#d62728", "linestyle": "-", "marker": "o"},
}


def _style(protocol):
    return _STYLES.get(protocol, {"color": "black", "linestyle": "-"})


def _save(fig, path):
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def _line_figure(path, rows, protocols, title, ylabel):
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    times = [r[0] for r in rows]
    for i, protocol in enumerate(protocols):
        ax.plot(times, [r[i + 1] for r in rows], label=protocol,
                markersize=3, **_style(protocol))
    ax.set_xlabel("time (s)")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if protocols:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def _bar_figure(path, rows, title, ylabel):
    fig, ax = plt.subplots(figsize=(4.5, 3.6))
    names = [r[0] for r in rows]
    means = [r[1] if r[1] is not None else 0.0 for r in rows]
    colors = [_style(name)["color"] for name in names]
    bars = ax.bar(names, means, color=colors)
    for name, bar, row in zip(names, bars, rows):
        lo, hi = row[2], row[3]
        if lo is not None and hi is not None:
            ax.vlines(bar.get_x() + bar.get_width() / 2, lo, hi, color="black", linewidth=1)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def render_figures(out_dir, *, protocols, members_rows, heads_rows, kbytes_rows,
                   delay_rows, throughput_rows, energy_rows, node_counts):
    """Render fig2..fig7 PNGs; returns the written paths."""
    written = []
    written.append(_line_figure(
        os.path.join(out_dir, "fig2_members_vs_time.png"), members_rows, protocols,
        "Average cluster members over time", "members per cluster"))
    written.append(_line_figure(
        os.path.join(out_dir, "fig3_heads_vs_time.png"), heads_rows, protocols,
        "Cluster heads over time", "cluster heads"))
    written.append(_line_figure(
        os.path.join(out_dir, "fig4_delivered_kbytes_vs_time.png"), kbytes_rows, protocols,
        "Delivered payload over time", "kilobytes"))
    written.append(_bar_figure(
        os.path.join(out_dir, "fig5_delay.png"), delay_rows,
        "End-to-end delay", "mean delay (s)"))
    written.append(_bar_figure(
        os.path.join(out_dir, "fig6_throughput.png"), throughput_rows,
        "Throughput", "packets per second"))

    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for i, protocol in enumerate(protocols):
        ax.plot(node_counts, [row[i + 1] for row in energy_rows], label=protocol,
                markersize=4, **_style(protocol))
    ax.set_xlabel("node count")
    ax.set_ylabel("total energy consumed (J)")
    ax.set_title("Energy consumption vs node count")
    if protocols:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    written.append(_save(fig, os.path.join(out_dir, "fig7_energy_vs_nodes.png")))
    return written
