"""Clustering state machines for the three protocol variants.

LEACH: rotating randomized cluster-head election each round, every sensor
joins its nearest in-range head.  FZ: same election restricted to nodes
with enough residual energy, plus service for zones where no member can
head (an outside node is recruited as zone head).  OFZ: FZ plus the
contact-probability machinery: heads predicted to be moving away are
re-elected mid-round, heads below a critical energy hand off, and cluster
membership is refined on meetings through sync/leave/join.

All selections tie-break on the lower node id so a run replays exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .contact import KnowledgeState, sync_tables
from .errors import UnservedZoneError


@dataclass
class ClusterView:
    """One cluster as seen by the engine during a round.

    ``head`` is kept out of ``members``.  ``far_zone`` is the subset of
    members below the energy floor; ``zone_head`` is set only when the whole
    member set fell below it and an outside node was recruited to serve.
    """

    cluster_id: int
    head: int | None
    members: set[int] = field(default_factory=set)
    far_zone: set[int] = field(default_factory=set)
    zone_head: int | None = None

    def roster(self):
        """Head plus members, the parties a membership check runs against."""
        if self.head is None:
            return set(self.members)
        return self.members | {self.head}


@dataclass
class RoundState:
    """LEACH rotation bookkeeping: which nodes already served this cycle."""

    round_index: int = 0
    was_ch_in_cycle: dict[int, bool] = field(default_factory=dict)

    def cycle_length(self, p: float) -> int:
        return max(1, math.ceil(1.0 / p))

    def start_round(self, round_index: int, p: float):
        self.round_index = round_index
        if round_index % self.cycle_length(p) == 0:
            self.was_ch_in_cycle.clear()


def leach_ch_threshold(p: float, round_index: int, was_ch_in_cycle: bool) -> float:
    """Election threshold for one node this round; zero once it has served
    within the current rotation cycle."""
    if not (0.0 < p <= 1.0):
        raise ValueError("p must be in (0, 1]")
    if was_ch_in_cycle:
        return 0.0
    cycle = max(1, math.ceil(1.0 / p))
    return p / (1.0 - p * (round_index % cycle))


def elect_cluster_heads(round_state, sensors, energies, eligible, p, draw):
    """Draw this round's cluster heads.

    ``draw(round_index, node)`` supplies one uniform value per sensor per
    round, independent of which other nodes are alive, so election outcomes
    stay aligned across protocol variants under a shared seed.  If nobody
    wins the draw, the highest-energy alive sensor is force-elected to
    avoid a dead round.
    """
    heads = []
    for node in sensors:
        value = draw(round_state.round_index, node)
        if not eligible(node):
            continue
        threshold = leach_ch_threshold(p, round_state.round_index, round_state.was_ch_in_cycle.get(node, False))
        if value < threshold:
            heads.append(node)
    if not heads and sensors:
        best = min(sensors, key=lambda n: (-energies[n], n))
        heads.append(best)
    for node in heads:
        round_state.was_ch_in_cycle[node] = True
    return heads


def form_clusters(sensors, positions, heads, comm_range, first_cluster_id):
    """Partition sensors around the elected heads.

    Every non-head sensor joins the nearest head within comm_range (ties to
    the lower head id); the rest stay unclustered and become candidates for
    zone service.  Returns the clusters plus the unclustered set.
    """
    clusters = []
    by_head = {}
    for offset, head in enumerate(sorted(heads)):
        view = ClusterView(cluster_id=first_cluster_id + offset, head=head)
        clusters.append(view)
        by_head[head] = view
    unclustered = set()
    head_list = sorted(by_head)
    for node in sensors:
        if node in by_head:
            continue
        x, y = positions[node]
        best = None
        best_d = None
        for head in head_list:
            hx, hy = positions[head]
            d = math.hypot(x - hx, y - hy)
            if d <= comm_range and (best_d is None or d < best_d):
                best = head
                best_d = d
        if best is None:
            unclustered.add(node)
        else:
            by_head[best].members.add(node)
    return clusters, unclustered


def detect_far_zone(cluster: ClusterView, energies, fz_threshold) -> set[int]:
    """Members whose residual energy fell below the zone floor."""
    return {m for m in cluster.members if energies[m] < fz_threshold}


def is_hidden(cluster: ClusterView, energies, fz_threshold) -> bool:
    """True when the whole cluster, head included, is below the floor:
    nobody local is fit to act as head, so the cluster needs an outside
    zone head to keep reporting."""
    if not cluster.members:
        return False
    if cluster.head is not None and energies[cluster.head] >= fz_threshold:
        return False
    return all(energies[m] < fz_threshold for m in cluster.members)


def elect_zone_head(candidates, energies) -> int:
    """Highest-energy candidate, ties to the lower id."""
    if not candidates:
        raise UnservedZoneError("no candidate available to serve the zone")
    return min(candidates, key=lambda n: (-energies[n], n))


def choose_outside_zone_head(cluster, clusters, positions, energies, alive,
                             comm_range, fz_threshold) -> int | None:
    """Recruit a serving head for a hidden cluster from an adjacent cluster.

    Candidates are alive nodes of other clusters with energy at or above the
    floor that every far-zone member can reach; the nearest one (smallest
    worst-case member distance, ties to the lower id) wins.  None means the
    zone stays unserved this round.
    """
    zone = sorted(cluster.far_zone)
    if not zone:
        return None
    candidates = []
    for other in clusters:
        if other.cluster_id == cluster.cluster_id:
            continue
        for node in other.roster():
            if node not in alive or energies[node] < fz_threshold:
                continue
            nx, ny = positions[node]
            worst = max(math.hypot(nx - positions[m][0], ny - positions[m][1]) for m in zone)
            if worst <= comm_range:
                candidates.append((worst, node))
    if not candidates:
        return None
    candidates.sort()
    return candidates[0][1]


def membership_check(candidate: int, cluster: ClusterView, knowledge: KnowledgeState, gamma) -> bool:
    """True iff the candidate's contact probability with every current
    member and the head reaches gamma.  Vacuously true for an empty roster."""
    for other in cluster.roster():
        if other == candidate:
            continue
        if knowledge.contact_probability(other) < gamma:
            return False
    return True


def stability(node: int, cluster: ClusterView | None, knowledge: KnowledgeState) -> float:
    """Minimum contact probability the node holds toward its cluster peers.

    A node alone in its cluster is vacuously stable (1.0); a node with no
    cluster at all has nothing to be stable in and scores 0.0.
    """
    if cluster is None:
        return 0.0
    peers = [p for p in cluster.roster() if p != node]
    if not peers:
        return 1.0
    return min(knowledge.contact_probability(p) for p in peers)


def leave(node: int, knowledge: KnowledgeState, cluster: ClusterView | None) -> None:
    """Drop the node from its cluster: gateway table emptied, cluster id
    reset, membership removed.  No-op for an unclustered node."""
    if cluster is None:
        return
    knowledge.clear_gateway_table()
    knowledge.own_cluster_id = None
    cluster.members.discard(node)
    cluster.far_zone.discard(node)


def join(node: int, knowledge: KnowledgeState, peer_knowledge: KnowledgeState,
         target: ClusterView, current: ClusterView | None, gamma) -> bool:
    """Move the node into the peer's cluster when that is strictly better.

    Requires passing the membership check against the whole target roster
    and a strict stability improvement.  On success the node copies the
    peer's gateway table and adopts the target cluster id.
    """
    if not membership_check(node, target, knowledge, gamma):
        return False
    stability_now = stability(node, current, knowledge)
    stability_new = stability(node, target, knowledge)
    if stability_new <= stability_now:
        return False
    if current is not None:
        current.members.discard(node)
        current.far_zone.discard(node)
    target.members.add(node)
    knowledge.copy_gateway_table_from(peer_knowledge)
    knowledge.own_cluster_id = target.cluster_id
    return True


def predict_ch_departure(head: int, cluster: ClusterView, knowledge: KnowledgeState,
                         departure_threshold) -> bool:
    """A head whose minimum contact probability with its members decayed
    below the threshold is judged to be moving out of the cluster."""
    if not cluster.members:
        return False
    return stability(head, cluster, knowledge) < departure_threshold


TRIGGER_DEPARTURE = "departure"
TRIGGER_CRITICAL_ENERGY = "critical_energy"


def reelect_ch(cluster: ClusterView, energies, alive) -> int | None:
    """Promote the highest-energy alive member (ties to the lower id).

    Returns the new head, or None when no member can take over and the
    cluster must dissolve.  The caller demotes or removes the old head.
    """
    candidates = [m for m in cluster.members if m in alive]
    if not candidates:
        return None
    return min(candidates, key=lambda n: (-energies[n], n))


def refine_on_meeting(a: int, b: int, knowledge, clusters_by_id, node_cluster, gamma,
                      can_reach=None):
    """Contact-driven cluster maintenance when two sensors meet (OFZ only).

    Same cluster: both must still pass the membership check; if both do the
    tables are synchronized, otherwise the strictly less stable node leaves.
    Different (or missing) clusters: each node in lower-id order gets one
    chance to join the other's cluster under the strict-improvement rule;
    when the caller supplies a reachability predicate, only clusters whose
    head is currently reachable are offered, so a join never strands the
    node behind an unreachable head.  Heads are infrastructure for the
    round and never leave or join here.

    Returns a list of protocol records for the trace:
    ("sync", a, b) / ("leave", node, cluster_id) /
    ("join", node, peer, from_id_or_None, to_id, stab_before, stab_after).
    """
    records = []
    ca = node_cluster.get(a)
    cb = node_cluster.get(b)
    if ca is not None and ca == cb:
        cluster = clusters_by_id[ca]
        ok_a = membership_check(a, cluster, knowledge[a], gamma)
        ok_b = membership_check(b, cluster, knowledge[b], gamma)
        if ok_a and ok_b:
            sync_tables(knowledge[a], knowledge[b])
            records.append(("sync", a, b))
            return records
        stab_a = stability(a, cluster, knowledge[a])
        stab_b = stability(b, cluster, knowledge[b])
        if stab_a == stab_b:
            return records
        leaver = a if stab_a < stab_b else b
        if leaver == cluster.head:
            # Heads are this round's infrastructure; they hand off through
            # re-election, never by walking out mid-round.
            return records
        leave(leaver, knowledge[leaver], cluster)
        node_cluster[leaver] = None
        records.append(("leave", leaver, cluster.cluster_id))
        return records
    # Cross-cluster or one-sided: consider at most one join per meeting.
    for node, peer in ((a, b), (b, a)) if a < b else ((b, a), (a, b)):
        node_cid = node_cluster.get(node)
        peer_cid = node_cluster.get(peer)
        if peer_cid is None or peer_cid == node_cid:
            continue
        target = clusters_by_id[peer_cid]
        if target.head == node:
            continue
        if can_reach is not None and target.head is not None and not can_reach(node, target.head):
            continue
        current = clusters_by_id[node_cid] if node_cid is not None else None
        if current is not None and current.head == node:
            continue
        before = stability(node, current, knowledge[node])
        if join(node, knowledge[node], knowledge[peer], target, current, gamma):
            node_cluster[node] = target.cluster_id
            after = stability(node, target, knowledge[node])
            records.append(("join", node, peer, node_cid, target.cluster_id, before, after))
            break
    return records
