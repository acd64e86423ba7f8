"""Trace replay: independent reconstruction of tables and metrics.

This module is the oracle side of the engine's dual-route checks.  It reads
the line-oriented event trace and rebuilds every node's knowledge tables
and every report metric using nothing but plain dicts and the arithmetic
written out longhand, deliberately sharing no update code with the contact
module or the engine.  Agreement between the two routes is asserted by the
test suite and by the ``replay`` CLI subcommand.
"""

from __future__ import annotations

from .errors import TraceFormatError

_US = 1_000_000


def parse_trace(text):
    """Split a trace into (meta dict, record list).

    Records come back as (time_us, kind, fields...) tuples in file order.
    """
    meta = {}
    records = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "meta":
            for item in parts[1:]:
                key, _, value = item.partition("=")
                meta[key] = value
            continue
        try:
            t = int(parts[0])
        except ValueError as exc:
            raise TraceFormatError(f"bad record time in line: {line!r}") from exc
        records.append((t, parts[1], parts[2:]))
    if "nodes" not in meta:
        raise TraceFormatError("trace is missing its meta line")
    return meta, records


def _cid(token):
    return None if token == "-" else int(token)


def _cluster_wins(new, old):
    # new/old: (value, cluster_id, ts)
    if new[2] != old[2]:
        return new[2] > old[2]
    if new[0] != old[0]:
        return new[0] > old[0]
    return (new[1] is not None, new[1]) < (old[1] is not None, old[1])


def _gateway_wins(new, old):
    # new/old: (gateway, value, ts)
    if new[2] != old[2]:
        return new[2] > old[2]
    if new[1] != old[1]:
        return new[1] > old[1]
    return new[0] < old[0]


def rebuild_tables(meta, records):
    """Fold the trace into per-node cluster/gateway tables.

    Mirrors the table semantics from first principles: meetings blend the
    stored contact probability toward 1 with weight alpha and stamp the
    peer's cluster, timeouts decay by (1 - alpha), syncs keep the winning
    entry on both sides, joins copy the peer's gateway table, leaves empty
    it, and a dead node's tables freeze.
    """
    alpha = float(meta["alpha"])
    sink = int(meta["sink"])
    nodes = int(meta["nodes"])
    cluster = {i: {} for i in range(nodes) if i != sink}
    gateway = {i: {} for i in range(nodes) if i != sink}
    dead = set()

    for t, kind, fields in records:
        if kind == "meeting":
            a, b = int(fields[0]), int(fields[1])
            ca, cb = _cid(fields[2]), _cid(fields[3])
            for x, peer, peer_c, own_c in ((a, b, cb, ca), (b, a, ca, cb)):
                if x == sink or x in dead:
                    continue
                prev = cluster[x].get(peer, (0.0, None, None))[0]
                value = (1.0 - alpha) * prev + alpha * 1.0
                cluster[x][peer] = (value, peer_c, t)
                if peer_c is not None and peer_c != own_c:
                    candidate = (peer, value, t)
                    old = gateway[x].get(peer_c)
                    if old is None or _gateway_wins(candidate, old):
                        gateway[x][peer_c] = candidate
        elif kind == "timeout":
            a, b = int(fields[0]), int(fields[1])
            for x, peer in ((a, b), (b, a)):
                if x == sink or x in dead:
                    continue
                entry = cluster[x].get(peer)
                if entry is not None:
                    cluster[x][peer] = ((1.0 - alpha) * entry[0], entry[1], t)
        elif kind == "sync":
            a, b = int(fields[0]), int(fields[1])
            for key in set(cluster[a]) | set(cluster[b]):
                ea = cluster[a].get(key)
                eb = cluster[b].get(key)
                if ea is None:
                    winner = eb
                elif eb is None:
                    winner = ea
                else:
                    winner = ea if _cluster_wins(ea, eb) else eb
                if key != a:
                    cluster[a][key] = winner
                if key != b:
                    cluster[b][key] = winner
            for key in set(gateway[a]) | set(gateway[b]):
                ga = gateway[a].get(key)
                gb = gateway[b].get(key)
                if ga is None:
                    winner = gb
                elif gb is None:
                    winner = ga
                else:
                    winner = ga if _gateway_wins(ga, gb) else gb
                gateway[a][key] = winner
                gateway[b][key] = winner
        elif kind == "join":
            node, peer = int(fields[0]), int(fields[1])
            gateway[node] = dict(gateway[peer])
        elif kind == "leave":
            node = int(fields[0])
            gateway[node] = {}
        elif kind == "death":
            dead.add(int(fields[0]))
    return cluster, gateway


def canonical_tables(cluster, gateway, node_id):
    """Render one node's rebuilt tables in the same canonical text form the
    production tables serialize to."""
    lines = []
    for key in sorted(cluster[node_id]):
        value, cid, ts = cluster[node_id][key]
        cid_s = "-" if cid is None else str(cid)
        lines.append(f"cluster {key} {value!r} {cid_s} {ts}")
    for key in sorted(gateway[node_id]):
        gw, value, ts = gateway[node_id][key]
        lines.append(f"gateway {key} {gw} {value!r} {ts}")
    return "\n".join(lines)


def recompute_metrics(meta, records):
    """Re-derive the report's scalar metrics from trace records alone.

    Energy figures come from the periodic ``energies`` records, packet
    counters from send/recv/drop records, and the cluster averages from the
    round snapshots, each weighted by the time until the next one.
    """
    duration_s = int(meta["duration_us"]) / _US
    nodes = int(meta["nodes"])
    sink = int(meta["sink"])
    initial = float(meta["initial_energy_j"])
    sensor_count = nodes - 1

    sent = received = dropped = 0
    delays = []
    deaths = []
    snapshots = []  # (time_s, cluster_count, member_total)
    received_times = []
    last_energies = None
    for t, kind, fields in records:
        if kind == "send":
            sent += 1
        elif kind == "recv":
            received += 1
            delays.append((t - int(fields[3])) / _US)
            received_times.append(t / _US)
        elif kind == "drop":
            dropped += 1
        elif kind == "death":
            deaths.append(t / _US)
        elif kind == "round":
            member_total = 0
            count = 0
            for desc in fields[1:]:
                _cid_, _head, members, _fz, _zh = desc.split(":")
                count += 1
                if members != "-":
                    member_total += len(members.split(","))
            snapshots.append((t / _US, count, member_total))
        elif kind == "energies":
            last_energies = {int(k): float(v) for k, v in (f.split(":") for f in fields)}

    def weighted(value_of):
        if not snapshots or duration_s <= 0:
            return 0.0
        total = 0.0
        for i, snap in enumerate(snapshots):
            t_next = snapshots[i + 1][0] if i + 1 < len(snapshots) else duration_s
            total += value_of(snap) * (t_next - snap[0])
        return total / duration_s

    total_energy = None
    mean_residual = None
    if last_energies is not None:
        total_energy = 0.0
        residual_sum = 0.0
        for i in range(nodes):
            if i == sink:
                continue
            total_energy += initial - last_energies[i]
            residual_sum += last_energies[i]
        mean_residual = residual_sum / sensor_count
    deaths_sorted = sorted(deaths)
    half = (sensor_count + 1) // 2
    return {
        "packets_sent": sent,
        "packets_received": received,
        "packets_dropped": dropped,
        "pdr_percent": (received / sent * 100.0) if sent >= 1 else None,
        "throughput_pkts_per_s": (received / duration_s) if duration_s > 0 else None,
        "mean_delay_s": (sum(delays) / len(delays)) if delays else None,
        "avg_cluster_members": weighted(lambda s: (s[2] / s[1]) if s[1] else 0.0),
        "avg_cluster_heads": weighted(lambda s: s[1]),
        "lifetime_fnd_s": deaths_sorted[0] if deaths_sorted else duration_s,
        "lifetime_hnd_s": deaths_sorted[half - 1] if len(deaths_sorted) >= half and half >= 1 else duration_s,
        "deaths": len(deaths),
        "total_energy_j": total_energy,
        "mean_residual_energy_j": mean_residual,
    }


def check_invariants(meta, records):
    """Scan a trace for structural violations; returns a list of findings
    (empty means the trace is clean).

    Checks: event times nondecreasing; each round snapshot partitions nodes
    (disjoint member sets, heads not members); per-node energies never
    increase between snapshots; every join strictly improves the recorded
    stability and starts from the cluster the node was actually in; every
    leave names a cluster the node belonged to; every re-election carries a
    trigger value strictly under its threshold and promotes a member of the
    re-elected cluster.  Table-level leave/join semantics (gateway table
    emptied or copied) are bound by comparing the rebuilt tables against
    the engine's, which the test suite does alongside this scan.
    """
    problems = []
    last_t = None
    prev_energy = None
    assignment = {}

    for t, kind, fields in records:
        if last_t is not None and t < last_t:
            problems.append(f"time went backwards: {last_t} -> {t}")
        last_t = t
        if kind == "round":
            seen = set()
            assignment = {}
            for desc in fields[1:]:
                cid, head, members, _fz, _zh = desc.split(":")
                roster = [int(head)] + ([int(m) for m in members.split(",")] if members != "-" else [])
                for node in roster:
                    if node in seen:
                        problems.append(f"t={t}: node {node} assigned to two clusters")
                    seen.add(node)
                    assignment[node] = int(cid)
        elif kind == "energies":
            energies = {int(k): float(v) for k, v in (f.split(":") for f in fields)}
            if prev_energy is not None:
                for node, value in energies.items():
                    if value > prev_energy[node]:
                        problems.append(f"t={t}: node {node} energy increased")
            prev_energy = energies
        elif kind == "join":
            node = int(fields[0])
            from_cid = _cid(fields[2])
            to_cid = int(fields[3])
            before = float(fields[4])
            after = float(fields[5])
            if not after > before:
                problems.append(f"t={t}: join of node {node} did not improve stability "
                                f"({before!r} -> {after!r})")
            if assignment.get(node) != from_cid:
                problems.append(f"t={t}: join of node {node} claims cluster {from_cid} "
                                f"but it was in {assignment.get(node)}")
            assignment[node] = to_cid
        elif kind == "leave":
            node = int(fields[0])
            cid = int(fields[1])
            if assignment.get(node) != cid:
                problems.append(f"t={t}: leave of node {node} names cluster {cid} "
                                f"but it was in {assignment.get(node)}")
            assignment[node] = None
        elif kind == "reelect":
            cid = int(fields[0])
            new = fields[2]
            trigger = fields[3]
            value = float(fields[4])
            threshold = float(fields[5])
            if trigger not in ("departure", "critical_energy"):
                problems.append(f"t={t}: unknown re-election trigger {trigger!r}")
            elif not value < threshold:
                problems.append(f"t={t}: re-election trigger not verified "
                                f"({trigger}: {value!r} vs {threshold!r})")
            if new != "-":
                if assignment.get(int(new)) != cid:
                    problems.append(f"t={t}: re-elected head {new} was not in cluster {cid}")
    return problems
