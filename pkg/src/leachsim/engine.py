"""Deterministic discrete-event engine.

One run is a single-threaded loop over a time-ordered queue of mobility
ticks, contact timeouts, round boundaries and traffic ticks.  Time is kept
in integer microseconds so event ordering is exact; ties break on a fixed
(kind rank, node ids) order.  All randomness flows from the configured seed
through dedicated streams (one mobility stream per node, one election draw
per round and node) so the same SimConfig replays bit for bit and protocol
variants stay comparable under a shared seed.

Data plane: sensors generate one packet per traffic tick and keep custody
until they can hand it upstream.  Members transfer to their cluster head
(or serving zone head) packet by packet; relays and heads forward as a
single aggregated transmission per tick regardless of how many packets it
carries.  Heads reach the sink at any distance, paying the quadratic
amplifier cost; member links are limited to the communication range, so a
head that moved away or died strands its members until they recover.

The engine also appends one line per event to an in-memory trace; the
replay module can rebuild every knowledge table and every report metric
from that trace alone.
"""

from __future__ import annotations

import math
import heapq
import random

from .config import (
    SimConfig,
    PROTOCOL_LEACH,
    PROTOCOL_FZ,
    PROTOCOL_OFZ,
    SINK_NODE_ID,
    SINK_CLUSTER_ID,
)
from . import mobility
from . import protocols as proto
from .contact import KnowledgeState
from .energy import tx_energy, rx_energy, idle_energy
from .metrics import MetricsAccumulator, ClusterSnapshot, build_report, RunReport

US_PER_S = 1_000_000

ROLE_SINK = "sink"
ROLE_MEMBER = "member"
ROLE_CLUSTER_HEAD = "cluster_head"
ROLE_ZONE_HEAD = "zone_head"
ROLE_GATEWAY = "gateway"

# Queue ranks fix the processing order of same-time events.
_RANK_MOBILITY = 0
_RANK_TIMEOUT = 1
_RANK_ROUND = 2
_RANK_TRAFFIC = 3

DROP_EXPIRED = "expired"
DROP_LINK = "link"
DROP_HOLDER_DIED = "holder_died"

TRACE_VERSION = 1


def to_us(seconds: float) -> int:
    return round(seconds * US_PER_S)


def _fmt_cid(cluster_id):
    return "-" if cluster_id is None else str(cluster_id)


class Packet:
    """One logical sensor reading on its way to the sink."""

    __slots__ = ("pkt_id", "src", "created_us", "delivered_us", "size_bits", "hops")

    def __init__(self, pkt_id, src, created_us, size_bits):
        self.pkt_id = pkt_id
        self.src = src
        self.created_us = created_us
        self.delivered_us = None
        self.size_bits = size_bits
        self.hops = 0


class NodeState:
    """Position, energy, role and custody buffers of one node."""

    __slots__ = (
        "node_id", "mob", "residual_energy_j", "role", "alive",
        "queue", "relay_buffer", "zone_buffer", "round_buffer", "consumed",
    )

    def __init__(self, node_id, mob_state, energy_j, role):
        self.node_id = node_id
        self.mob = mob_state
        self.residual_energy_j = energy_j
        self.role = role
        self.alive = True
        self.queue = []          # packets this node originated or took custody of
        self.relay_buffer = []   # packets accepted for same-tick relay to own head
        self.zone_buffer = []    # packets accepted as a serving zone head
        self.round_buffer = []   # packets a head will aggregate upstream
        self.consumed = {"tx": 0.0, "rx": 0.0, "idle": 0.0}

    @property
    def is_sink(self):
        return self.role == ROLE_SINK

    def position(self):
        return self.mob.position()


def detect_meetings(nodes, comm_range_m):
    """All unordered pairs of alive nodes within communication range.

    The boundary is inclusive: a pair exactly comm_range_m apart meets.
    """
    alive = sorted(n.node_id for n in nodes.values() if n.alive)
    pairs = []
    for i, a in enumerate(alive):
        ax, ay = nodes[a].position()
        for b in alive[i + 1:]:
            bx, by = nodes[b].position()
            if math.hypot(ax - bx, ay - by) <= comm_range_m:
                pairs.append((a, b))
    return pairs


def forward_packet(pkt, route, nodes, radio, comm_range_m, now_us):
    """Push one packet along an explicit route of node ids.

    Each hop debits transmit energy at the sender and receive energy at the
    receiver; reaching the sink stamps the delivery time.  A dead or
    out-of-range next hop (or a sender/receiver that cannot afford the hop)
    breaks the route and the packet is dropped.  Returns True on delivery
    or successful custody transfer to the last node of the route.
    """
    if len(route) < 2:
        return False
    for sender_id, receiver_id in zip(route, route[1:]):
        sender = nodes[sender_id]
        receiver = nodes[receiver_id]
        if not sender.alive or not receiver.alive:
            return False
        sx, sy = sender.position()
        rx_, ry_ = receiver.position()
        d = math.hypot(sx - rx_, sy - ry_)
        if not receiver.is_sink and d > comm_range_m:
            return False
        if not _debit(sender, tx_energy(pkt.size_bits, d, radio), "tx"):
            return False
        if not receiver.is_sink:
            if not _debit(receiver, rx_energy(pkt.size_bits, radio), "rx"):
                return False
        pkt.hops += 1
        if receiver.is_sink:
            pkt.delivered_us = now_us
    return True


def _debit(node, amount, kind):
    """Charge energy to a node; spending past the residual kills it and the
    action fails.  The sink has no battery to drain."""
    if node.is_sink or amount == 0.0:
        return True
    if node.residual_energy_j >= amount:
        node.residual_energy_j -= amount
        node.consumed[kind] += amount
        if node.residual_energy_j == 0.0:
            node.alive = False
        return True
    node.consumed[kind] += node.residual_energy_j
    node.residual_energy_j = 0.0
    node.alive = False
    return False


class Simulation:
    """One seeded run of one protocol variant."""

    def __init__(self, config: SimConfig):
        config.validate()
        self.cfg = config
        pp = config.protocol_params
        self.end_us = to_us(config.sim_duration_s)
        self.tick_us = to_us(config.mobility_tick_s)
        self.round_us = to_us(pp.round_duration_s)
        self.cbr_us = to_us(config.cbr_interval_s)
        self.timeout_us = to_us(config.ema.timeout_s)
        self.ttl_us = to_us(config.packet_ttl_s)

        base = random.Random(config.rng_seed)
        self.elect_seed = base.getrandbits(64)
        self.node_rng = {}
        self.nodes = {}
        sink_mob = mobility.MobilityState(
            config.area_width_m / 2.0, config.area_height_m / 2.0,
            config.area_width_m / 2.0, config.area_height_m / 2.0, 0.0)
        self.nodes[SINK_NODE_ID] = NodeState(SINK_NODE_ID, sink_mob, math.inf, ROLE_SINK)
        for node_id in range(1, config.node_count):
            rng = random.Random(base.getrandbits(64))
            self.node_rng[node_id] = rng
            state = mobility.initial_state(config.area_width_m, config.area_height_m,
                                           config.mobility, rng)
            self.nodes[node_id] = NodeState(node_id, state, config.initial_energy_j, ROLE_MEMBER)
        self.sensor_ids = list(range(1, config.node_count))

        self.knowledge = {i: KnowledgeState(i) for i in self.sensor_ids}
        self.clusters_by_id = {}
        self.node_cluster = {i: None for i in self.sensor_ids}
        self.zone_serve = {}
        self.round_state = proto.RoundState()
        self.next_cluster_id = SINK_CLUSTER_ID + 1

        self.acc = MetricsAccumulator()
        self.trace = []
        self.events = []
        self.timeout_gen = {}
        self.last_mobility_us = 0
        self.last_departure_us = {}
        self.next_pkt_id = 1
        self.dead_recorded = set()
        self.refinement = config.refinement_active()
        # Energy by cause, for analysis; not part of the report.
        self.energy_breakdown = {
            "member_tx": 0.0, "waste_tx": 0.0, "handoff_tx": 0.0, "direct_tx": 0.0,
            "relay_flush_tx": 0.0, "head_flush_tx": 0.0, "rx": 0.0, "idle": 0.0,
        }

    # ------------------------------------------------------------------ setup

    def _emit(self, line):
        self.trace.append(line)

    def _schedule_static(self):
        t = 0
        while t <= self.end_us:
            heapq.heappush(self.events, (t, _RANK_MOBILITY, 0, 0, 0))
            t += self.tick_us
        r = 0
        while r * self.round_us <= self.end_us:
            heapq.heappush(self.events, (r * self.round_us, _RANK_ROUND, r, 0, 0))
            r += 1
        t = self.cbr_us
        while t <= self.end_us:
            heapq.heappush(self.events, (t, _RANK_TRAFFIC, 0, 0, 0))
            t += self.cbr_us

    # ------------------------------------------------------------------- run

    def run(self):
        self._emit(f"# leachsim-trace {TRACE_VERSION}")
        cfg = self.cfg
        self._emit(
            "meta"
            f" nodes={cfg.node_count}"
            f" sink={SINK_NODE_ID}"
            f" seed={cfg.rng_seed}"
            f" duration_us={self.end_us}"
            f" alpha={cfg.ema.alpha!r}"
            f" timeout_us={self.timeout_us}"
            f" gamma={cfg.protocol_params.membership_threshold_gamma!r}"
            f" initial_energy_j={cfg.initial_energy_j!r}"
        )
        self._schedule_static()
        while self.events:
            t, rank, a, b, gen = heapq.heappop(self.events)
            if rank == _RANK_MOBILITY:
                self._handle_mobility(t)
            elif rank == _RANK_TIMEOUT:
                self._handle_timeout(t, a, b, gen)
            elif rank == _RANK_ROUND:
                self._handle_round(t, a)
            else:
                self._handle_traffic(t)
        self._emit_energies(self.end_us)
        return self._finish()

    # -------------------------------------------------------------- mobility

    def _handle_mobility(self, t):
        cfg = self.cfg
        dt = (t - self.last_mobility_us) / US_PER_S
        self.last_mobility_us = t
        for node_id in self.sensor_ids:
            node = self.nodes[node_id]
            if not node.alive:
                continue
            if dt > 0:
                mobility.advance(node.mob, dt, cfg.area_width_m, cfg.area_height_m,
                                 cfg.mobility, self.node_rng[node_id])
            if cfg.radio.e_idle_j_per_s > 0 and dt > 0:
                amount = idle_energy(dt, cfg.radio)
                if _debit(node, amount, "idle"):
                    self.energy_breakdown["idle"] += amount
                if not node.alive:
                    self._die(node, t)
        self._emit(f"{t} mobility")
        for a, b in detect_meetings(self.nodes, cfg.comm_range_m):
            self._handle_meeting(t, a, b)
        if cfg.protocol == PROTOCOL_OFZ:
            self._check_heads(t)

    def _cluster_label(self, node_id):
        if node_id == SINK_NODE_ID:
            return SINK_CLUSTER_ID
        return self.node_cluster.get(node_id)

    def _in_range(self, a, b):
        ax, ay = self.nodes[a].position()
        bx, by = self.nodes[b].position()
        return math.hypot(ax - bx, ay - by) <= self.cfg.comm_range_m

    def _zone_served_head(self, node_id):
        cid = self.node_cluster.get(node_id)
        if cid is None or cid not in self.clusters_by_id:
            return False
        cluster = self.clusters_by_id[cid]
        return cluster.head == node_id and cluster.zone_head is not None

    def _election_draw(self, round_index, node_id):
        """Stable per-(round, node) uniform draw.  Keying on (seed, round,
        node) keeps each node's election lottery independent of every other
        node's fate, so runs differing only in protocol stay comparable."""
        key = (self.elect_seed * 1_000_003 + round_index) * 1_000_003 + node_id
        return random.Random(key).random()

    def _handle_meeting(self, t, a, b):
        ca = self._cluster_label(a)
        cb = self._cluster_label(b)
        self._emit(f"{t} meeting {a} {b} {_fmt_cid(ca)} {_fmt_cid(cb)}")
        ema = self.cfg.ema
        for node_id, peer_id, peer_cluster, own_cluster in ((a, b, cb, ca), (b, a, ca, cb)):
            if node_id == SINK_NODE_ID:
                continue
            know = self.knowledge[node_id]
            know.record_meeting(peer_id, peer_cluster, t, ema)
            if peer_cluster is not None and peer_cluster != own_cluster:
                know.record_gateway(peer_id, peer_cluster, t)
        gen = self.timeout_gen.get((a, b), 0) + 1
        self.timeout_gen[(a, b)] = gen
        due = t + self.timeout_us
        if due <= self.end_us:
            heapq.heappush(self.events, (due, _RANK_TIMEOUT, a, b, gen))
        if self.refinement and a != SINK_NODE_ID and b != SINK_NODE_ID:
            records = proto.refine_on_meeting(
                a, b, self.knowledge, self.clusters_by_id, self.node_cluster,
                self.cfg.protocol_params.membership_threshold_gamma,
                can_reach=self._in_range)
            for rec in records:
                if rec[0] == "sync":
                    self._emit(f"{t} sync {rec[1]} {rec[2]}")
                elif rec[0] == "leave":
                    self._emit(f"{t} leave {rec[1]} {rec[2]}")
                else:
                    _, node, peer, from_cid, to_cid, before, after = rec
                    self._emit(f"{t} join {node} {peer} {_fmt_cid(from_cid)} {to_cid} {before!r} {after!r}")

    def _handle_timeout(self, t, a, b, gen):
        if self.timeout_gen.get((a, b)) != gen:
            return
        ema = self.cfg.ema
        applied = False
        for node_id, peer_id in ((a, b), (b, a)):
            if node_id == SINK_NODE_ID or not self.nodes[node_id].alive:
                continue
            know = self.knowledge[node_id]
            if peer_id in know.cluster_table:
                know.apply_timeout(peer_id, t, ema)
                applied = True
        if not applied:
            return
        self._emit(f"{t} timeout {a} {b}")
        gen += 1
        self.timeout_gen[(a, b)] = gen
        due = t + self.timeout_us
        if due <= self.end_us:
            heapq.heappush(self.events, (due, _RANK_TIMEOUT, a, b, gen))

    # -------------------------------------------------- OFZ mid-round checks

    def _check_heads(self, t):
        pp = self.cfg.protocol_params
        for cid in sorted(self.clusters_by_id):
            cluster = self.clusters_by_id[cid]
            head = cluster.head
            if head is None or not self.nodes[head].alive:
                continue
            energy = self.nodes[head].residual_energy_j
            if pp.ch_critical_energy_j > 0 and energy < pp.ch_critical_energy_j:
                # Relief only helps if somebody stronger can take over;
                # otherwise the weak head serves on rather than churning.
                takeover = any(
                    self.nodes[m].alive and self.nodes[m].residual_energy_j > energy
                    for m in cluster.members
                )
                if takeover:
                    self._reelect(t, cluster, proto.TRIGGER_CRITICAL_ENERGY, energy,
                                  pp.ch_critical_energy_j)
            elif (self.refinement
                  and t - self.last_departure_us.get(cid, -self.timeout_us) >= self.timeout_us
                  and proto.predict_ch_departure(
                      head, cluster, self.knowledge[head], pp.departure_threshold)):
                # One decay interval of quiet between departure re-elections
                # gives the fresh head's contacts time to re-form.
                value = proto.stability(head, cluster, self.knowledge[head])
                self.last_departure_us[cid] = t
                self._reelect(t, cluster, proto.TRIGGER_DEPARTURE, value,
                              pp.departure_threshold)

    def _reelect(self, t, cluster, trigger, value, threshold):
        energies = {n: self.nodes[n].residual_energy_j for n in cluster.members}
        alive = {n for n in cluster.members if self.nodes[n].alive}
        old_head = cluster.head
        new_head = proto.reelect_ch(cluster, energies, alive)
        new_label = "-" if new_head is None else str(new_head)
        self._emit(f"{t} reelect {cluster.cluster_id} {old_head} {new_label} {trigger} {value!r} {threshold!r}")
        if new_head is None:
            # Nobody can take over: the cluster dissolves.
            for member in sorted(cluster.members | {old_head}):
                self._exit_cluster(t, member, cluster)
            cluster.head = None
            cluster.members.clear()
            cluster.far_zone.clear()
            cluster.zone_head = None
            del self.clusters_by_id[cluster.cluster_id]
            return
        cluster.members.discard(new_head)
        cluster.far_zone.discard(new_head)
        cluster.head = new_head
        self.nodes[new_head].role = ROLE_CLUSTER_HEAD
        self.round_state.was_ch_in_cycle[new_head] = True
        departed = (
            trigger == proto.TRIGGER_DEPARTURE
            and self.knowledge[old_head].contact_probability(new_head)
            < self.cfg.protocol_params.departure_threshold
        )
        if departed:
            # Contact with the successor has decayed too: the old head
            # really left and is out of the cluster entirely.
            self._exit_cluster(t, old_head, cluster)
        else:
            cluster.members.add(old_head)
            self.nodes[old_head].role = ROLE_MEMBER
            self.node_cluster[old_head] = cluster.cluster_id
            self.knowledge[old_head].own_cluster_id = cluster.cluster_id

    def _exit_cluster(self, t, node_id, cluster):
        """Forced departure shares leave() semantics: gateway knowledge is
        stale outside the cluster, so it is emptied along with the id."""
        proto.leave(node_id, self.knowledge[node_id], cluster)
        self.node_cluster[node_id] = None
        self.nodes[node_id].role = ROLE_MEMBER
        self._emit(f"{t} leave {node_id} {cluster.cluster_id}")

    # ----------------------------------------------------------------- round

    def _handle_round(self, t, round_index):
        cfg = self.cfg
        pp = cfg.protocol_params
        self.round_state.start_round(round_index, pp.ch_probability_p)
        alive_sensors = [i for i in self.sensor_ids if self.nodes[i].alive]
        energies = {i: self.nodes[i].residual_energy_j for i in alive_sensors}
        if cfg.protocol == PROTOCOL_LEACH:
            eligible = lambda n: True
        else:
            # Nodes below the zone floor are not fit to act as heads.
            eligible = lambda n: energies[n] >= pp.fz_energy_threshold_j
        heads = proto.elect_cluster_heads(self.round_state, alive_sensors, energies,
                                          eligible, pp.ch_probability_p,
                                          self._election_draw)
        positions = {i: self.nodes[i].position() for i in alive_sensors}
        clusters, unclustered = proto.form_clusters(alive_sensors, positions, heads,
                                                    cfg.comm_range_m, self.next_cluster_id)
        self.next_cluster_id += len(clusters)
        self.clusters_by_id = {c.cluster_id: c for c in clusters}
        self.zone_serve = {}
        for i in alive_sensors:
            self.node_cluster[i] = None
            self.nodes[i].role = ROLE_MEMBER
        for cluster in clusters:
            self.nodes[cluster.head].role = ROLE_CLUSTER_HEAD
            self.node_cluster[cluster.head] = cluster.cluster_id
            self.knowledge[cluster.head].own_cluster_id = cluster.cluster_id
            for member in cluster.members:
                self.node_cluster[member] = cluster.cluster_id
                self.knowledge[member].own_cluster_id = cluster.cluster_id
        for i in unclustered:
            self.knowledge[i].own_cluster_id = None

        zone_lines = []
        if cfg.protocol in (PROTOCOL_FZ, PROTOCOL_OFZ):
            alive_set = set(alive_sensors)
            for cluster in clusters:
                cluster.far_zone = proto.detect_far_zone(cluster, energies, pp.fz_energy_threshold_j)
                if proto.is_hidden(cluster, energies, pp.fz_energy_threshold_j):
                    zh = proto.choose_outside_zone_head(
                        cluster, clusters, positions, energies, alive_set,
                        cfg.comm_range_m, pp.fz_energy_threshold_j)
                    cluster.zone_head = zh
                    zone_lines.append(f"{t} zone {cluster.cluster_id} {'-' if zh is None else zh}")
                    if zh is not None and self.nodes[zh].role == ROLE_MEMBER:
                        self.nodes[zh].role = ROLE_ZONE_HEAD
            for u in sorted(unclustered):
                if energies[u] >= pp.fz_energy_threshold_j:
                    continue
                ux, uy = positions[u]
                candidates = [
                    x for x in alive_sensors
                    if x != u and self.node_cluster[x] is not None
                    and energies[x] >= pp.fz_energy_threshold_j
                    and math.hypot(ux - positions[x][0], uy - positions[x][1]) <= cfg.comm_range_m
                ]
                if candidates:
                    zh = proto.elect_zone_head(candidates, energies)
                    self.zone_serve[u] = zh
                    zone_lines.append(f"{t} serve {u} {zh}")
                    if self.nodes[zh].role == ROLE_MEMBER:
                        self.nodes[zh].role = ROLE_ZONE_HEAD

        descs = []
        for cluster in clusters:
            members = ",".join(str(m) for m in sorted(cluster.members)) or "-"
            fz = ",".join(str(m) for m in sorted(cluster.far_zone)) or "-"
            zh = "-" if cluster.zone_head is None else str(cluster.zone_head)
            descs.append(f"{cluster.cluster_id}:{cluster.head}:{members}:{fz}:{zh}")
        self._emit(f"{t} round {round_index} " + " ".join(descs))
        for line in zone_lines:
            self._emit(line)
        self._emit_energies(t)
        self.acc.snapshots.append(ClusterSnapshot(
            time_s=t / US_PER_S,
            cluster_count=len(clusters),
            member_total=sum(len(c.members) for c in clusters),
            head_count=len(clusters),
        ))

    def _emit_energies(self, t):
        parts = " ".join(f"{i}:{self.nodes[i].residual_energy_j!r}" for i in self.sensor_ids)
        self._emit(f"{t} energies {parts}")

    # --------------------------------------------------------------- traffic

    def _handle_traffic(self, t):
        cfg = self.cfg
        # Generation: one reading per alive sensor per traffic tick.
        for node_id in self.sensor_ids:
            node = self.nodes[node_id]
            if not node.alive:
                continue
            pkt = Packet(self.next_pkt_id, node_id, t, cfg.packet_size_bits)
            self.next_pkt_id += 1
            node.queue.append(pkt)
            self.acc.packets_sent += 1
            self._emit(f"{t} send {pkt.pkt_id} {node_id}")
        # Upstream custody moves, member side.  Heads of zone-served
        # clusters also push their own readings through the zone head.
        for node_id in self.sensor_ids:
            node = self.nodes[node_id]
            if not node.alive:
                continue
            if node.role == ROLE_CLUSTER_HEAD and not self._zone_served_head(node_id):
                continue
            self._expire_queue(t, node)
            if not node.queue:
                continue
            self._transfer_queue(t, node)
        # Serving zone heads aggregate their zone straight to the sink;
        # gateway custodians push to their own head in the same tick.
        for node_id in self.sensor_ids:
            node = self.nodes[node_id]
            if node.zone_buffer:
                self._flush_zone(t, node)
        for node_id in self.sensor_ids:
            node = self.nodes[node_id]
            if node.relay_buffer:
                self._flush_relay(t, node)
        # Heads aggregate everything they hold into one upstream packet.
        for node_id in self.sensor_ids:
            node = self.nodes[node_id]
            if not node.alive or node.role != ROLE_CLUSTER_HEAD:
                continue
            self._expire_queue(t, node)
            self._flush_head(t, node)

    def _expire_queue(self, t, node):
        fresh = []
        for pkt in node.queue:
            if t - pkt.created_us > self.ttl_us:
                self._drop(t, pkt, DROP_EXPIRED)
            else:
                fresh.append(pkt)
        node.queue = fresh

    def _upstream_target(self, node):
        """Choose this tick's upstream hop.

        A node with an assigned upstream (its cluster head, or the zone head
        serving it) transmits to it blindly, like a reserved slot: the
        assignment is returned without checking liveness or range, and a
        broken link wastes the transmission.  Nodes with no assignment are
        opportunistic: deliver straight to the sink when it is in range,
        otherwise (refinement only) hand custody to the in-range clustered
        peer with the best contact probability, otherwise retain.
        """
        node_id = node.node_id
        cid = self.node_cluster.get(node_id)
        if cid is not None and cid in self.clusters_by_id:
            cluster = self.clusters_by_id[cid]
            served = cluster.zone_head is not None and (
                node_id in cluster.far_zone or node_id == cluster.head)
            if served:
                zh = self.nodes[cluster.zone_head]
                if zh.alive and self._in_range(node_id, cluster.zone_head):
                    return cluster.zone_head, "relay"
                # Zone service is opportunistic; fall back to the own slot.
            if node_id == cluster.head:
                return None, None
            return cluster.head, "head"
        if node_id in self.zone_serve:
            zh_id = self.zone_serve[node_id]
            zh = self.nodes[zh_id]
            if zh.alive and self._in_range(node_id, zh_id):
                return zh_id, "serve"
        x, y = node.position()
        sink = self.nodes[SINK_NODE_ID]
        sx, sy = sink.position()
        if math.hypot(x - sx, y - sy) <= self.cfg.comm_range_m:
            return SINK_NODE_ID, "sink"
        if self.refinement:
            floor = self.cfg.protocol_params.fz_energy_threshold_j
            if node.residual_energy_j < floor:
                # A nearly drained node conserves what is left and keeps
                # custody rather than paying to hand off.
                return None, None
            know = self.knowledge[node_id]
            best = None
            for other_id in self.sensor_ids:
                other = self.nodes[other_id]
                if other_id == node_id or not other.alive:
                    continue
                if other.residual_energy_j < floor:
                    # Nodes below the zone floor are spared relay duty.
                    continue
                prob = know.contact_probability(other_id)
                if prob <= 0.0:
                    continue
                cid_other = self.node_cluster.get(other_id)
                if cid_other is None or cid_other not in self.clusters_by_id:
                    continue
                ox, oy = other.position()
                d_other = math.hypot(x - ox, y - oy)
                if d_other > self.cfg.comm_range_m:
                    continue
                # Only known peers that can forward upstream right now
                # qualify; custody must not bounce between stranded nodes.
                head_id = self.clusters_by_id[cid_other].head
                if head_id != other_id:
                    head = self.nodes[head_id]
                    if not head.alive or not self._in_range(other_id, head_id):
                        continue
                # Cheapest hop first; knowledge breaks ties.
                key = (d_other, -prob, other_id)
                if best is None or key < best[0]:
                    best = (key, other_id)
            if best is not None:
                return best[1], "gateway"
        return None, None

    def _transfer_queue(self, t, node):
        target_id, kind = self._upstream_target(node)
        if target_id is None:
            return
        target = self.nodes[target_id]
        queue, node.queue = node.queue, []
        remaining = []
        x, y = node.position()
        tx_pos = target.position()
        d = math.hypot(x - tx_pos[0], y - tx_pos[1])
        # Only the cluster-head slot is transmitted blindly; every other
        # target was verified usable when chosen.
        assigned = kind == "head"
        for idx, pkt in enumerate(queue):
            if not node.alive:
                remaining.extend(queue[idx:])
                break
            if kind in ("serve", "gateway"):
                # Rescue paths must never be what kills the sender: keep
                # custody of anything the node would not survive sending.
                if node.residual_energy_j <= tx_energy(pkt.size_bits, d, self.cfg.radio):
                    remaining.extend(queue[idx:])
                    break
            usable = target.alive and d <= self.cfg.comm_range_m
            if not usable:
                if not assigned:
                    # Opportunistic targets were verified when chosen; if
                    # one fell mid-burst, keep custody of the rest.
                    remaining.extend(queue[idx:])
                    break
                # Blind slot transmission into a broken link: the energy is
                # spent (capped at full in-cluster power) and the packet is
                # lost.
                waste = tx_energy(pkt.size_bits, min(d, self.cfg.comm_range_m), self.cfg.radio)
                if not _debit(node, waste, "tx"):
                    remaining.extend(queue[idx:])
                    break
                self.energy_breakdown["waste_tx"] += waste
                self._drop(t, pkt, DROP_LINK)
                continue
            ok = forward_packet(pkt, [node.node_id, target_id], self.nodes,
                                self.cfg.radio, self.cfg.comm_range_m, t)
            if not ok:
                if not node.alive:
                    remaining.extend(queue[idx:])
                    break
                # Receiver could not afford the reception: packet lost; the
                # sender keeps transmitting blindly or retains, per kind.
                self._drop(t, pkt, DROP_LINK)
                continue
            hop_tx = tx_energy(pkt.size_bits, d, self.cfg.radio)
            if target.is_sink:
                self.energy_breakdown["direct_tx"] += hop_tx
                self._deliver(t, pkt)
                self.acc.sink_radio_receptions += 1
            else:
                tag = "handoff_tx" if kind == "gateway" else "member_tx"
                self.energy_breakdown[tag] += hop_tx
                self.energy_breakdown["rx"] += rx_energy(pkt.size_bits, self.cfg.radio)
                if kind == "head":
                    target.round_buffer.append(pkt)
                elif kind in ("relay", "serve"):
                    target.zone_buffer.append(pkt)
                else:
                    target.relay_buffer.append(pkt)
                    if target.role == ROLE_MEMBER:
                        target.role = ROLE_GATEWAY
        node.queue = remaining
        if not node.alive:
            self._die(node, t)
        if not target.alive and not target.is_sink:
            self._die(target, t)

    def _flush_relay(self, t, node):
        packets, node.relay_buffer = node.relay_buffer, []
        if node.role == ROLE_GATEWAY:
            node.role = ROLE_MEMBER
        if not node.alive:
            for pkt in packets:
                self._drop(t, pkt, DROP_HOLDER_DIED)
            return
        if node.role == ROLE_CLUSTER_HEAD:
            node.round_buffer.extend(packets)
            return
        cid = self.node_cluster.get(node.node_id)
        head_id = None
        if cid is not None and cid in self.clusters_by_id:
            head_id = self.clusters_by_id[cid].head
        usable = False
        if head_id is not None and self.nodes[head_id].alive:
            x, y = node.position()
            hx, hy = self.nodes[head_id].position()
            usable = math.hypot(x - hx, y - hy) <= self.cfg.comm_range_m
        if not usable:
            node.queue.extend(packets)
            return
        head = self.nodes[head_id]
        x, y = node.position()
        hx, hy = head.position()
        d = math.hypot(x - hx, y - hy)
        # One aggregated transmission regardless of the packet count.
        agg_tx = tx_energy(self.cfg.packet_size_bits, d, self.cfg.radio)
        if not _debit(node, agg_tx, "tx"):
            node.queue.extend(packets)
            self._die(node, t)
            return
        self.energy_breakdown["relay_flush_tx"] += agg_tx
        if not _debit(head, rx_energy(self.cfg.packet_size_bits, self.cfg.radio), "rx"):
            for pkt in packets:
                self._drop(t, pkt, DROP_LINK)
            self._die(head, t)
            if not node.alive:
                self._die(node, t)
            return
        for pkt in packets:
            pkt.hops += 1
        head.round_buffer.extend(packets)
        if not head.alive:
            self._die(head, t)
        if not node.alive:
            self._die(node, t)

    def _flush_zone(self, t, node):
        """A serving zone head forwards its zone's readings with one
        aggregated transmission: through its own cluster head when that is
        reachable, straight to the sink (long range) otherwise, so zone
        traffic always gets out the same tick it was collected."""
        packets, node.zone_buffer = node.zone_buffer, []
        if not node.alive:
            for pkt in packets:
                self._drop(t, pkt, DROP_HOLDER_DIED)
            return
        if node.role == ROLE_CLUSTER_HEAD:
            node.round_buffer.extend(packets)
            return
        cid = self.node_cluster.get(node.node_id)
        head_id = None
        if cid is not None and cid in self.clusters_by_id:
            head_id = self.clusters_by_id[cid].head
        if (head_id is not None and self.nodes[head_id].alive
                and self._in_range(node.node_id, head_id)):
            head = self.nodes[head_id]
            x, y = node.position()
            hx, hy = head.position()
            agg_tx = tx_energy(self.cfg.packet_size_bits, math.hypot(x - hx, y - hy),
                               self.cfg.radio)
            if not _debit(node, agg_tx, "tx"):
                node.queue.extend(packets)
                self._die(node, t)
                return
            self.energy_breakdown["relay_flush_tx"] += agg_tx
            if not _debit(head, rx_energy(self.cfg.packet_size_bits, self.cfg.radio), "rx"):
                for pkt in packets:
                    self._drop(t, pkt, DROP_LINK)
                self._die(head, t)
                if not node.alive:
                    self._die(node, t)
                return
            for pkt in packets:
                pkt.hops += 1
            head.round_buffer.extend(packets)
            if not head.alive:
                self._die(head, t)
            if not node.alive:
                self._die(node, t)
            return
        x, y = node.position()
        sink = self.nodes[SINK_NODE_ID]
        sx, sy = sink.position()
        d = math.hypot(x - sx, y - sy)
        agg_tx = tx_energy(self.cfg.packet_size_bits, d, self.cfg.radio)
        if not _debit(node, agg_tx, "tx"):
            node.queue.extend(packets)
            self._die(node, t)
            return
        self.energy_breakdown["head_flush_tx"] += agg_tx
        self.acc.sink_radio_receptions += 1
        self._emit(f"{t} agg {node.node_id} {len(packets)}")
        for pkt in packets:
            pkt.hops += 1
            self._deliver(t, pkt)
        if not node.alive:
            self._die(node, t)

    def _flush_head(self, t, node):
        packets = node.round_buffer + node.queue
        node.round_buffer = []
        node.queue = []
        if not packets:
            return
        x, y = node.position()
        sink = self.nodes[SINK_NODE_ID]
        sx, sy = sink.position()
        d = math.hypot(x - sx, y - sy)
        # One aggregated long-range transmission carries the whole bundle.
        agg_tx = tx_energy(self.cfg.packet_size_bits, d, self.cfg.radio)
        if not _debit(node, agg_tx, "tx"):
            node.queue = packets
            self._die(node, t)
            return
        self.energy_breakdown["head_flush_tx"] += agg_tx
        self.acc.sink_radio_receptions += 1
        self._emit(f"{t} agg {node.node_id} {len(packets)}")
        for pkt in packets:
            pkt.hops += 1
            pkt.delivered_us = t
            self._deliver(t, pkt)
        if not node.alive:
            self._die(node, t)

    def _deliver(self, t, pkt):
        pkt.delivered_us = t
        self.acc.packets_received += 1
        self.acc.delays_s.append((t - pkt.created_us) / US_PER_S)
        self.acc.received_times_s.append(t / US_PER_S)
        self._emit(f"{t} recv {pkt.pkt_id} {SINK_NODE_ID} {pkt.src} {pkt.created_us}")

    def _drop(self, t, pkt, reason):
        self.acc.packets_dropped += 1
        self._emit(f"{t} drop {pkt.pkt_id} {pkt.src} {reason}")

    def _die(self, node, t):
        """Record a death once and lose whatever the node was holding."""
        if node.is_sink or node.node_id in self.dead_recorded:
            return
        self.dead_recorded.add(node.node_id)
        node.alive = False
        for pkt in node.queue + node.relay_buffer + node.zone_buffer + node.round_buffer:
            self._drop(t, pkt, DROP_HOLDER_DIED)
        node.queue = []
        node.relay_buffer = []
        node.zone_buffer = []
        node.round_buffer = []
        self._emit(f"{t} death {node.node_id}")
        self.acc.death_times_s.append(t / US_PER_S)

    # ---------------------------------------------------------------- finish

    def _finish(self):
        cfg = self.cfg
        duration_s = self.end_us / US_PER_S
        total = 0.0
        residual_sum = 0.0
        max_rel = 0.0
        per_node = {}
        for i in self.sensor_ids:
            node = self.nodes[i]
            consumed = cfg.initial_energy_j - node.residual_energy_j
            booked = node.consumed["tx"] + node.consumed["rx"] + node.consumed["idle"]
            rel = abs(consumed - booked) / cfg.initial_energy_j
            max_rel = max(max_rel, rel)
            total += consumed
            residual_sum += node.residual_energy_j
            per_node[str(i)] = consumed
        kb_series = _cumulative_kbytes(self.acc, cfg, duration_s)
        report = build_report(
            cfg.protocol, cfg.rng_seed, cfg.to_dict(), self.acc,
            node_count=cfg.node_count,
            sim_duration_s=duration_s,
            total_energy_j=total,
            mean_residual_energy_j=residual_sum / len(self.sensor_ids),
            energy_closure_max_rel_err=max_rel,
            per_node_consumed_j=per_node,
            delivered_kbytes_series=kb_series,
        )
        return report


def _cumulative_kbytes(acc, cfg, duration_s):
    """Cumulative delivered payload (kilobytes) sampled at round boundaries."""
    times = sorted({s.time_s for s in acc.snapshots} | {duration_s})
    received = sorted(acc.received_times_s)
    series = []
    idx = 0
    count = 0
    for t in times:
        while idx < len(received) and received[idx] <= t:
            count += 1
            idx += 1
        series.append((t, count * cfg.packet_size_bits / 8.0 / 1000.0))
    return series


class SimResult:
    """Report plus the raw artifacts tests and the replay oracle consume."""

    def __init__(self, report, trace_lines, knowledge, nodes):
        self.report = report
        self.trace_lines = trace_lines
        self.knowledge = knowledge
        self.nodes = nodes

    def trace_text(self):
        return "\n".join(self.trace_lines) + "\n"


def simulate(config: SimConfig) -> SimResult:
    """Run one configuration to completion, keeping trace and final state."""
    sim = Simulation(config)
    report = sim.run()
    return SimResult(report, sim.trace, sim.knowledge, sim.nodes)


def run_simulation(config: SimConfig) -> RunReport:
    """Run one configuration and return just the report."""
    return simulate(config).report
