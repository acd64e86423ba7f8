"""Per-node knowledge state: contact probabilities and routing tables.

Every sensor keeps two tables it learns purely from its own encounters:

* a cluster table, keyed by peer node id, holding the EMA-estimated contact
  probability for that peer plus the peer's cluster and a timestamp;
* a gateway table, keyed by foreign cluster id, naming a node through which
  that cluster was last reachable.

Tables from two nodes can be merged; conflicts resolve by newest timestamp,
then highest probability, then lowest id, so merging is deterministic and
idempotent.  Timestamps are plain integers (the engine uses microseconds).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractError

TRANSMISSION = "transmission"
TIMEOUT = "timeout"

# Contact probability assumed for a peer that has never been observed.
INITIAL_PROBABILITY = 0.0
# Probability credited to a realized, direct contact.
DIRECT_CONTACT_PROBABILITY = 1.0


def ema_update(value: float, alpha: float, trigger: str, observed: float | None = None) -> float:
    """One exponential-moving-average step on a stored probability.

    A ``TRANSMISSION`` step blends in the observed probability:
    ``(1 - alpha) * value + alpha * observed``.  A ``TIMEOUT`` step decays
    the stored value to ``(1 - alpha) * value``.  Inputs in [0, 1] always
    produce an output in [0, 1].
    """
    if not (0.0 <= value <= 1.0):
        raise ContractError(f"stored probability {value!r} outside [0, 1]")
    if not (0.0 <= alpha <= 1.0):
        raise ContractError(f"alpha {alpha!r} outside [0, 1]")
    if trigger == TRANSMISSION:
        if observed is None:
            raise ContractError("transmission update requires an observed probability")
        if not (0.0 <= observed <= 1.0):
            raise ContractError(f"observed probability {observed!r} outside [0, 1]")
        return (1.0 - alpha) * value + alpha * observed
    if trigger == TIMEOUT:
        return (1.0 - alpha) * value
    raise ContractError(f"unknown trigger {trigger!r}")


@dataclass(frozen=True)
class ClusterTableEntry:
    node_id: int
    contact_probability: float
    cluster_id: int | None
    time_stamp: int


@dataclass(frozen=True)
class GatewayTableEntry:
    cluster_id: int
    gateway: int
    contact_probability: float
    time_stamp: int


def _cluster_entry_wins(new: ClusterTableEntry, old: ClusterTableEntry) -> bool:
    """Newest timestamp wins; ties fall to higher probability, then to the
    smaller remaining fields so the outcome never depends on merge order."""
    if new.time_stamp != old.time_stamp:
        return new.time_stamp > old.time_stamp
    if new.contact_probability != old.contact_probability:
        return new.contact_probability > old.contact_probability
    new_key = (new.cluster_id is not None, new.cluster_id)
    old_key = (old.cluster_id is not None, old.cluster_id)
    return new_key < old_key


def _gateway_entry_wins(new: GatewayTableEntry, old: GatewayTableEntry) -> bool:
    if new.time_stamp != old.time_stamp:
        return new.time_stamp > old.time_stamp
    if new.contact_probability != old.contact_probability:
        return new.contact_probability > old.contact_probability
    return new.gateway < old.gateway


class KnowledgeState:
    """Everything one node knows about the rest of the network."""

    __slots__ = ("owner", "cluster_table", "gateway_table", "own_cluster_id")

    def __init__(self, owner: int):
        self.owner = owner
        self.cluster_table: dict[int, ClusterTableEntry] = {}
        self.gateway_table: dict[int, GatewayTableEntry] = {}
        self.own_cluster_id: int | None = None

    def contact_probability(self, peer: int) -> float:
        entry = self.cluster_table.get(peer)
        return entry.contact_probability if entry is not None else INITIAL_PROBABILITY

    def record_meeting(self, peer: int, peer_cluster: int | None, now: int, ema) -> None:
        """Fold a realized contact with ``peer`` into the cluster table.

        The stored probability moves toward certainty by the EMA weight; the
        peer's current cluster and the meeting time are stamped in.  The
        engine collapses repeated contacts within one tick to a single call.
        """
        if peer == self.owner:
            raise ContractError("a node does not record meetings with itself")
        previous = self.contact_probability(peer)
        value = ema_update(previous, ema.alpha, TRANSMISSION, DIRECT_CONTACT_PROBABILITY)
        self.cluster_table[peer] = ClusterTableEntry(peer, value, peer_cluster, now)

    def record_gateway(self, peer: int, peer_cluster: int, now: int) -> None:
        """Remember ``peer`` as the freshest way into ``peer_cluster``."""
        prob = self.contact_probability(peer)
        candidate = GatewayTableEntry(peer_cluster, peer, prob, now)
        current = self.gateway_table.get(peer_cluster)
        if current is None or _gateway_entry_wins(candidate, current):
            self.gateway_table[peer_cluster] = candidate

    def apply_timeout(self, peer: int, now: int, ema) -> None:
        """Decay the entry for a peer that has stayed silent; no-op if the
        peer was never recorded (or was evicted)."""
        entry = self.cluster_table.get(peer)
        if entry is None:
            return
        value = ema_update(entry.contact_probability, ema.alpha, TIMEOUT)
        self.cluster_table[peer] = ClusterTableEntry(peer, value, entry.cluster_id, now)

    def lookup_gateway(self, target_cluster: int) -> GatewayTableEntry | None:
        return self.gateway_table.get(target_cluster)

    def clear_gateway_table(self) -> None:
        self.gateway_table.clear()

    def copy_gateway_table_from(self, other: "KnowledgeState") -> None:
        self.gateway_table = dict(other.gateway_table)

    def canonical(self) -> str:
        """Sorted, byte-stable text form of both tables (golden-file safe)."""
        lines = []
        for key in sorted(self.cluster_table):
            e = self.cluster_table[key]
            cid = "-" if e.cluster_id is None else str(e.cluster_id)
            lines.append(f"cluster {e.node_id} {e.contact_probability!r} {cid} {e.time_stamp}")
        for key in sorted(self.gateway_table):
            e = self.gateway_table[key]
            lines.append(f"gateway {e.cluster_id} {e.gateway} {e.contact_probability!r} {e.time_stamp}")
        return "\n".join(lines)


def sync_tables(a: KnowledgeState, b: KnowledgeState) -> None:
    """Merge two nodes' tables in place so both hold the better knowledge.

    For every key present on either side the winning entry (newest
    timestamp, ties per the deterministic order above) is kept by both.
    Entries a node holds about the sync partner are exchanged like any
    other key; a node never stores an entry about itself, so each side's
    view *of the other* stays its own.  Syncing twice is a no-op.
    """
    for key in set(a.cluster_table) | set(b.cluster_table):
        ea = a.cluster_table.get(key)
        eb = b.cluster_table.get(key)
        if ea is None:
            winner = eb
        elif eb is None:
            winner = ea
        else:
            winner = ea if _cluster_entry_wins(ea, eb) else eb
        if key != a.owner:
            a.cluster_table[key] = winner
        if key != b.owner:
            b.cluster_table[key] = winner
    for key in set(a.gateway_table) | set(b.gateway_table):
        ga = a.gateway_table.get(key)
        gb = b.gateway_table.get(key)
        if ga is None:
            winner = gb
        elif gb is None:
            winner = ga
        else:
            winner = ga if _gateway_entry_wins(ga, gb) else gb
        a.gateway_table[key] = winner
        b.gateway_table[key] = winner
