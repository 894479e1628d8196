"""Chord identifier ring: consistent hashing, finger tables, churn, lookup.

Identifiers live on a ring of 2**m positions; a key belongs to the first
node at or clockwise after it.  Joins and leaves are polite (the departing
or arriving node splices successor/predecessor pointers and hands keys over
at event time -- the discrete-event scheduler mutates the overlay one event
at a time, so there are no concurrent partial states).  Finger tables go
stale on churn and are repaired by explicit stabilization rounds; a lookup
only ever follows finger entries whose current position still lies inside
the queried interval, so routing stays correct, just slower, between
stabilizations.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterable

from . import crypto
from .model import NodeId


class ChordError(Exception):
    pass


def ring_successor(ids: Iterable[int], key: int) -> int:
    """Brute-force clockwise scan: first id equal to or following ``key``.

    This is the reference resolution rule; protocol lookups are checked
    against it and must never disagree at quiescence.
    """
    ordered = sorted(set(ids))
    if not ordered:
        raise ChordError("empty ring")
    for candidate in ordered:
        if candidate >= key:
            return candidate
    return ordered[0]


def in_open(x: int, a: int, b: int) -> bool:
    """x in (a, b) on the ring; (a, a) is the whole ring minus a."""
    if a == b:
        return x != a
    if a < b:
        return a < x < b
    return x > a or x < b


def in_open_closed(x: int, a: int, b: int) -> bool:
    """x in (a, b] on the ring; (a, a] is the whole ring."""
    if a == b:
        return True
    if a < b:
        return a < x <= b
    return x > a or x <= b


@dataclass
class ChordNode:
    node_id: NodeId
    ring_id: int
    successor: NodeId
    predecessor: NodeId
    fingers: list[NodeId] = field(default_factory=list)
    keys: set[int] = field(default_factory=set)
    epoch: int = 0


class ChordOverlay:
    def __init__(self, m: int = 32) -> None:
        if not 1 <= m <= 160:
            raise ValueError(f"identifier width m={m} out of range")
        self.m = m
        self.space = 1 << m
        self.nodes: dict[NodeId, ChordNode] = {}
        self._ids_in_use: set[int] = set()
        self.key_registry: set[int] = set()

    # -- identifiers ---------------------------------------------------------

    def derive_ring_id(self, node_id: NodeId, epoch: int) -> int:
        """Hash the node key into the id space, bumping past collisions."""
        attempt = epoch
        while True:
            rid = crypto.digest_int(f"{node_id}#{attempt}".encode(), self.m)
            if rid not in self._ids_in_use:
                return rid
            attempt += 1

    def ring_ids(self) -> list[int]:
        return sorted(n.ring_id for n in self.nodes.values())

    def ring_id_of(self, node_id: NodeId) -> int:
        return self.nodes[node_id].ring_id

    def oracle_owner(self, key: int) -> NodeId:
        """Owner per the brute-force clockwise scan over live nodes."""
        rid = ring_successor(self._ids_in_use, key)
        for node in self.nodes.values():
            if node.ring_id == rid:
                return node.node_id
        raise ChordError("ring id without node")  # pragma: no cover

    # -- membership ------------------------------------------------------------

    def build(self, node_ids: Iterable[NodeId]) -> int:
        """Construct an initial quiescent ring as a batch.

        Pointers and finger entries follow directly from the successor rule
        over the full membership; all later churn goes through join/leave
        and stabilization.  Returns the number of table entries written.
        """
        if self.nodes:
            raise ChordError("build requires an empty overlay")
        ids: dict[NodeId, int] = {}
        for node_id in sorted(node_ids):
            rid = self.derive_ring_id(node_id, 0)
            ids[node_id] = rid
            self._ids_in_use.add(rid)
        if not ids:
            return 0
        by_rid = {rid: node_id for node_id, rid in ids.items()}
        ordered = sorted(by_rid)
        count = len(ordered)

        def scan(key: int) -> NodeId:
            idx = bisect.bisect_left(ordered, key)
            return by_rid[ordered[idx % count]]

        entries = 0
        for idx, rid in enumerate(ordered):
            node_id = by_rid[rid]
            succ = by_rid[ordered[(idx + 1) % count]]
            pred = by_rid[ordered[(idx - 1) % count]]
            fingers = [scan((rid + (1 << k)) % self.space) for k in range(self.m)]
            self.nodes[node_id] = ChordNode(node_id, rid, succ, pred, fingers)
            entries += 2 + self.m
        return entries

    def join(self, node_id: NodeId) -> ChordNode:
        if node_id in self.nodes:
            raise ChordError(f"duplicate join of {node_id}")
        return self._join_with_epoch(node_id, 0)

    def leave(self, node_id: NodeId) -> None:
        node = self.nodes.get(node_id)
        if node is None:
            raise ChordError(f"unknown leave of {node_id}")
        if len(self.nodes) == 1:
            if node.keys:
                raise ChordError("last node cannot leave while holding keys")
            del self.nodes[node_id]
            self._ids_in_use.discard(node.ring_id)
            return
        succ = self.nodes[node.successor]
        succ.keys |= node.keys
        self.nodes[node.predecessor].successor = node.successor
        succ.predecessor = node.predecessor
        del self.nodes[node_id]
        self._ids_in_use.discard(node.ring_id)

    def reposition(self, node_id: NodeId) -> int:
        """Leave (handing keys over) and rejoin under a freshly derived id."""
        node = self.nodes.get(node_id)
        if node is None:
            raise ChordError(f"unknown node {node_id}")
        next_epoch = node.epoch + 1
        if len(self.nodes) == 1:
            # Degenerate ring: nobody to hand keys to, keep them through the move.
            carried = set(node.keys)
            node.keys.clear()
            self.leave(node_id)
            rejoined = self._join_with_epoch(node_id, next_epoch)
            rejoined.keys |= carried
            return rejoined.ring_id
        self.leave(node_id)
        rejoined = self._join_with_epoch(node_id, next_epoch)
        return rejoined.ring_id

    def _join_with_epoch(self, node_id: NodeId, epoch: int) -> ChordNode:
        rid = self.derive_ring_id(node_id, epoch)
        if not self.nodes:
            node = ChordNode(node_id, rid, node_id, node_id,
                             fingers=[node_id] * self.m, epoch=epoch)
            self.nodes[node_id] = node
            self._ids_in_use.add(rid)
            return node
        introducer = min(self.nodes)
        owner, _ = self.lookup(introducer, rid)
        owner_node = self.nodes[owner]
        pred = owner_node.predecessor
        node = ChordNode(node_id, rid, owner, pred,
                         fingers=[owner] * self.m, epoch=epoch)
        self.nodes[node_id] = node
        self._ids_in_use.add(rid)
        self.nodes[pred].successor = node_id
        owner_node.predecessor = node_id
        # Keys now clockwise-owned by the newcomer move off its successor.
        moving = {k for k in owner_node.keys
                  if not in_open_closed(k, rid, owner_node.ring_id)}
        owner_node.keys -= moving
        node.keys |= moving
        return node

    # -- key placement -----------------------------------------------------------

    def put_key(self, key: int) -> NodeId:
        if not 0 <= key < self.space:
            raise ValueError(f"key {key} outside id space")
        start = min(self.nodes)
        owner, _ = self.lookup(start, key)
        self.nodes[owner].keys.add(key)
        self.key_registry.add(key)
        return owner

    # -- lookup --------------------------------------------------------------------

    def _closest_preceding(self, cur: ChordNode, key: int) -> NodeId | None:
        for finger in reversed(cur.fingers):
            peer = self.nodes.get(finger)
            # Skip departed nodes and entries whose current position
            # (possibly changed by repositioning) fell outside the interval.
            if peer is None or peer.node_id == cur.node_id:
                continue
            if in_open(peer.ring_id, cur.ring_id, key):
                return peer.node_id
        return None

    def lookup(self, start: NodeId, key: int) -> tuple[NodeId, list[NodeId]]:
        """Resolve ``successor(key)`` from ``start``; returns (owner, path).

        The path lists each node the query is forwarded to, ending with the
        owner, so a key owned by ``start`` resolves in zero hops.
        """
        path = list(self.lookup_hops(start, key))
        return (path[-1] if path else start), path

    def lookup_hops(self, start: NodeId, key: int):
        """Yield the forwarding hops of a lookup one at a time, ending with
        the owner.  Lets callers intercept the query mid-route."""
        if start not in self.nodes:
            raise ChordError(f"unknown start node {start}")
        cur = self.nodes[start]
        if in_open_closed(key, self.nodes[cur.predecessor].ring_id, cur.ring_id):
            return
        limit = len(self.nodes) + self.m
        count = 0
        while True:
            succ = self.nodes[cur.successor]
            if in_open_closed(key, cur.ring_id, succ.ring_id):
                yield succ.node_id
                return
            nxt = self._closest_preceding(cur, key) or cur.successor
            yield nxt
            cur = self.nodes[nxt]
            count += 1
            if count > limit:
                raise ChordError("lookup failed to converge")  # pragma: no cover

    # -- stabilization ------------------------------------------------------------

    def stabilize(self) -> int:
        """One global round of pointer verification and finger repair.

        Returns the number of table entries corrected; repeated invocation
        without churn reaches 0 in finitely many rounds.
        """
        corrections = 0
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            # successor verification (x = successor.predecessor)
            succ = self.nodes[node.successor]
            x = succ.predecessor
            if (x != node_id and x in self.nodes
                    and in_open(self.nodes[x].ring_id, node.ring_id, succ.ring_id)):
                node.successor = x
                corrections += 1
            # notify
            succ = self.nodes[node.successor]
            pred = succ.predecessor
            if pred not in self.nodes or (
                pred != node_id
                and in_open(node.ring_id, self.nodes[pred].ring_id, succ.ring_id)
            ):
                succ.predecessor = node_id
                corrections += 1
            # finger repair
            for k in range(self.m):
                target = (node.ring_id + (1 << k)) % self.space
                owner, _ = self.lookup(node_id, target)
                if node.fingers[k] != owner:
                    node.fingers[k] = owner
                    corrections += 1
        return corrections

    def stabilize_to_quiescence(self, max_rounds: int = 64) -> tuple[int, int]:
        """Stabilize until a round corrects nothing; (rounds, total corrections)."""
        total = 0
        for rounds in range(1, max_rounds + 1):
            corrected = self.stabilize()
            total += corrected
            if corrected == 0:
                return rounds, total
        raise ChordError(f"no quiescence after {max_rounds} rounds")

    # -- introspection ---------------------------------------------------------------

    def check_ring(self) -> None:
        """Successor pointers must form a single cycle over all live nodes."""
        if not self.nodes:
            return
        start = min(self.nodes)
        seen = [start]
        cur = self.nodes[start].successor
        while cur != start:
            if cur in seen or cur not in self.nodes:
                raise ChordError(f"successor cycle broken at {cur}")
            seen.append(cur)
            cur = self.nodes[cur].successor
        if len(seen) != len(self.nodes):
            raise ChordError("successor cycle does not cover all nodes")

    def dump_lines(self) -> list[str]:
        lines = []
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            lines.append(
                f"node {node_id} {node.ring_id} {node.successor} {node.predecessor}"
            )
            for k, entry in enumerate(node.fingers, start=1):
                lines.append(f"finger {node_id} {k} {entry}")
        return lines
