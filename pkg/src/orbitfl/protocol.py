"""Synchronous federated-learning protocols over a satellite constellation.

Two transports for the same learning round are implemented:

* Ring-assisted ("fedisl"): the server hands the current model to the first
  satellite of each plane that connects; that satellite floods it around the
  plane's ring, every satellite trains, and sample-weighted partial sums fold
  along a hop-minimal tree rooted at an elected sink, which is predicted to see
  the server when aggregation finishes. One downlink and one uplink of model
  parameters per plane per epoch.
* Direct ("fednonisl"): the server talks to every satellite individually, one
  model down and one update up per satellite per epoch.

This module owns decision logic and node state; it does not schedule events or
move time. The simulator calls in with concrete times, geometry, and link
costs and carries out the returned decisions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# message kinds
GLOBAL_MODEL = "global_model"
PARTIAL_UPDATE = "partial_update"
WAIT_HINT = "wait_hint"
RECONNECT_HINT = "reconnect_hint"
ACK = "ack"

# node phases within an epoch
DISTRIBUTION = "distribution"
COMPUTATION = "computation"
AGGREGATION = "aggregation"

# PS decisions on an incoming connection or delivery
SEND_MODEL = "send_model"
RECONNECT = "reconnect"
WAIT = "wait"
TERMINATE = "terminate"
ACCEPT = "accept"

FALLBACK = -1  # sink field of a partial that lost its route and circles the ring

DEFAULT_RECONNECT_WAIT_S = 10.0
DEFAULT_GRACE_FACTOR = 2.0


class ProtocolError(RuntimeError):
    pass


@dataclass
class Message:
    kind: str
    epoch: int
    sender: int
    dest: int
    size_bits: int
    sink: int | None = None  # routing sink for this epoch, or FALLBACK
    source: int | None = None  # distribution source; relays derive forwarding from it
    payload: np.ndarray | None = None


# -- ring geometry ------------------------------------------------------------


def ring_position(ring_ids: list[int], node: int) -> int:
    try:
        return ring_ids.index(node)
    except ValueError:
        raise ProtocolError(f"node {node} is not on the ring {ring_ids}") from None


def ring_distance(num_nodes: int, pos_a: int, pos_b: int) -> int:
    ahead = (pos_a - pos_b) % num_nodes
    return min(ahead, num_nodes - ahead)


def ring_neighbors(ring_ids: list[int], node: int) -> list[int]:
    """Distinct ring neighbors of ``node``, ascending."""
    k = len(ring_ids)
    if k < 2:
        return []
    p = ring_position(ring_ids, node)
    return sorted({ring_ids[(p - 1) % k], ring_ids[(p + 1) % k]})


def distribution_targets(
    ring_ids: list[int], node: int, source: int, received_from: int | None
) -> list[int]:
    """Neighbors the node should forward a freshly received global model to.

    The source floods both directions. A relay forwards to its other neighbor
    only if that neighbor sits strictly farther from the source along the
    ring; the node where the two wavefronts meet receives from both sides and
    forwards nothing, so each epoch's flood terminates on its own.
    """
    k = len(ring_ids)
    if k < 2:
        return []
    my_dist = ring_distance(k, ring_position(ring_ids, node), ring_position(ring_ids, source))
    targets = []
    for neighbor in ring_neighbors(ring_ids, node):
        if neighbor == received_from:
            continue
        n_dist = ring_distance(
            k, ring_position(ring_ids, neighbor), ring_position(ring_ids, source)
        )
        if n_dist > my_dist:
            targets.append(neighbor)
    return targets


@dataclass(frozen=True)
class RoutingTree:
    """Hop-minimal aggregation tree over one plane's ring, rooted at the sink."""

    sink: int
    parent: dict[int, int]  # node -> next hop toward the sink; sink absent
    children: dict[int, tuple[int, ...]]  # node -> ascending child ids

    @property
    def depth(self) -> int:
        longest = 0
        for node in self.parent:
            hops, cursor = 0, node
            while cursor != self.sink:
                cursor = self.parent[cursor]
                hops += 1
            longest = max(longest, hops)
        return longest


def build_routing_tree(ring_ids: list[int], sink: int) -> RoutingTree:
    """Each non-sink node points at the ring neighbor nearest the sink.

    At the single antipodal tie of an even ring, the route goes through the
    smaller-id neighbor.
    """
    k = len(ring_ids)
    sink_pos = ring_position(ring_ids, sink)
    parent: dict[int, int] = {}
    for pos, node in enumerate(ring_ids):
        if node == sink:
            continue
        best = None
        for neighbor in ring_neighbors(ring_ids, node):
            d = ring_distance(k, ring_position(ring_ids, neighbor), sink_pos)
            if best is None or d < best[0] or (d == best[0] and neighbor < best[1]):
                best = (d, neighbor)
        parent[node] = best[1]
    children: dict[int, list[int]] = {node: [] for node in ring_ids}
    for node, up in parent.items():
        children[up].append(node)
    return RoutingTree(
        sink=sink,
        parent=parent,
        children={node: tuple(sorted(kids)) for node, kids in children.items()},
    )


def estimate_aggregation_time(
    num_satellites: int, adjacent_transfer_s: float, learning_s: float
) -> float:
    """Predicted span from the source receiving the model to the sink holding
    the plane's aggregate: half a ring of distribution hops, the slowest local
    training, and half a ring of aggregation hops."""
    half = num_satellites // 2
    return half * adjacent_transfer_s + learning_s + half * adjacent_transfer_s


def select_sink(
    constellation,
    plane_ids: list[int],
    ps_node: int,
    t_decision: float,
    estimate_s: float,
    horizon_s: float,
) -> int:
    """Pick the plane's delivery satellite for this epoch.

    Among satellites predicted visible to the server when aggregation is
    expected to finish, take the one with the longest remaining contact
    (clamped to ``horizon_s``; ties go to the smallest id). If none will be
    visible, take the one whose next server contact opens soonest after that
    moment.
    """
    t_target = t_decision + estimate_s
    best_id = None
    best_remaining = -1.0
    for sat in sorted(plane_ids):
        if bool(constellation.visible(sat, ps_node, t_target)):
            remaining = constellation.remaining_contact_time(sat, ps_node, t_target, horizon_s)
            if remaining > best_remaining:
                best_id, best_remaining = sat, remaining
    if best_id is not None:
        return best_id
    soonest_start = None
    for sat in sorted(plane_ids):
        window = constellation.next_contact(sat, ps_node, t_target, horizon_s)
        if window is not None and (soonest_start is None or window.start_s < soonest_start):
            best_id, soonest_start = sat, window.start_s
    if best_id is not None:
        return best_id
    return sorted(plane_ids)[0]  # nothing in range this horizon; fallback delivery will cope


def fallback_next_hop(
    constellation,
    ring_ids: list[int],
    node: int,
    exclude: int | None,
    ps_node: int,
    t: float,
) -> int | None:
    """Ring neighbor currently closest to the server, never the one the
    fallback arrived from (keeps the parcel moving around the ring)."""
    candidates = [n for n in ring_neighbors(ring_ids, node) if n != exclude]
    best = None
    for neighbor in candidates:
        d = float(constellation.distance_km(neighbor, ps_node, t))
        if best is None or d < best[0] or (d == best[0] and neighbor < best[1]):
            best = (d, neighbor)
    return None if best is None else best[1]


# -- satellite state -----------------------------------------------------------


@dataclass
class SatelliteState:
    """Everything one satellite tracks across an epoch."""

    node: int
    plane: int
    num_samples: int
    epoch: int = 1
    phase: str = DISTRIBUTION
    has_model: bool = False
    told_to_wait: bool = False
    awaiting_reconnect: bool = False
    sink: int | None = None
    source: int | None = None
    global_params: np.ndarray | None = None
    trained_params: np.ndarray | None = None
    cached_partials: dict[int, np.ndarray] = field(default_factory=dict)
    partial_sent: bool = False
    # a plane aggregate waiting for a server window, held by the sink or a
    # fallback recipient
    holding: np.ndarray | None = None
    holding_epoch: int = 0
    holding_from: int | None = None

    def reset_for_next_epoch(self):
        self.epoch += 1
        self.phase = DISTRIBUTION
        self.has_model = False
        self.told_to_wait = False
        self.awaiting_reconnect = False
        self.sink = None
        self.source = None
        self.global_params = None
        self.trained_params = None
        self.cached_partials = {}
        self.partial_sent = False


# -- server state machines ------------------------------------------------------


@dataclass
class PsState:
    """Ring-protocol server: serves whole planes, collects one partial each."""

    num_planes: int
    total_samples: int
    global_params: np.ndarray
    epoch: int = 1
    phase: str = DISTRIBUTION
    sent_planes: set[int] = field(default_factory=set)
    inflight_planes: set[int] = field(default_factory=set)
    received: dict[int, np.ndarray] = field(default_factory=dict)

    def handle_connection(self, plane: int) -> str:
        """Decide the response to a satellite of ``plane`` asking for the model."""
        if self.phase != DISTRIBUTION:
            return TERMINATE
        if plane in self.inflight_planes:
            return RECONNECT
        if plane in self.sent_planes:
            return WAIT
        self.inflight_planes.add(plane)
        return SEND_MODEL

    def downlink_acked(self, plane: int):
        """A satellite confirmed receipt; the plane is now served."""
        self.inflight_planes.discard(plane)
        self.sent_planes.add(plane)
        if len(self.sent_planes) == self.num_planes:
            self.phase = AGGREGATION

    def handle_partial(self, plane: int, weighted: np.ndarray) -> str:
        """Accept the first aggregate per plane; duplicates are turned away."""
        if plane in self.received:
            return TERMINATE
        self.received[plane] = np.asarray(weighted, dtype=np.float64)
        if len(self.received) == self.num_planes:
            self._complete_epoch()
        return ACCEPT

    def _complete_epoch(self):
        total = np.zeros_like(self.global_params)
        for plane in sorted(self.received):  # fixed fold order keeps replays bit-identical
            total = total + self.received[plane]
        self.global_params = total / self.total_samples
        self.epoch += 1
        self.phase = DISTRIBUTION
        self.sent_planes = set()
        self.inflight_planes = set()
        self.received = {}


@dataclass
class DirectPsState:
    """Direct-protocol server: serves and collects every satellite individually."""

    num_satellites: int
    total_samples: int
    global_params: np.ndarray
    epoch: int = 1
    sent: set[int] = field(default_factory=set)
    inflight: set[int] = field(default_factory=set)
    received: dict[int, np.ndarray] = field(default_factory=dict)

    def handle_connection(self, sat: int) -> str:
        if sat in self.inflight:
            return RECONNECT
        if sat in self.sent:
            return TERMINATE  # already served; it is polling for the next epoch
        self.inflight.add(sat)
        return SEND_MODEL

    def downlink_acked(self, sat: int):
        self.inflight.discard(sat)
        self.sent.add(sat)

    def handle_update(self, sat: int, weighted: np.ndarray) -> str:
        if sat in self.received:
            return TERMINATE
        self.received[sat] = np.asarray(weighted, dtype=np.float64)
        if len(self.received) == self.num_satellites:
            self._complete_epoch()
        return ACCEPT

    def _complete_epoch(self):
        total = np.zeros_like(self.global_params)
        for sat in sorted(self.received):
            total = total + self.received[sat]
        self.global_params = total / self.total_samples
        self.epoch += 1
        self.sent = set()
        self.inflight = set()
        self.received = {}
