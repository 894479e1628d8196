"""Spanning-tree embedding with coordinate-prefix greedy routing.

Nodes receive coordinate vectors along a BFS spanning tree: the root gets
the empty vector and each child extends its parent's vector by the child's
1-based index.  Tree hop distance between two nodes is then

    distance(a, b) = depth(a) + depth(b) - 2 * cpl(a, b)

where ``cpl`` is the common prefix length.  On the wire, coordinates travel
only as cumulative per-prefix digests padded with random entries to a fixed
depth, so a holder can measure the shared prefix against its own plaintext
coordinates without learning the rest of the target's position.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import crypto
from .model import CreditNetwork, NodeId


class DisconnectedGraphError(Exception):
    def __init__(self, unreachable: NodeId) -> None:
        super().__init__(f"graph is not weakly connected: {unreachable} unreachable")
        self.unreachable = unreachable


@dataclass(frozen=True)
class PrefixId:
    coords: tuple[int, ...]

    @property
    def depth(self) -> int:
        return len(self.coords)


def cpl(a: PrefixId, b: PrefixId) -> int:
    n = 0
    for x, y in zip(a.coords, b.coords):
        if x != y:
            break
        n += 1
    return n


def tree_distance(a: PrefixId, b: PrefixId) -> int:
    return a.depth + b.depth - 2 * cpl(a, b)


@dataclass
class SpanningTree:
    root: NodeId
    parent: dict[NodeId, NodeId]
    children: dict[NodeId, list[NodeId]]

    def nodes(self) -> list[NodeId]:
        return sorted(self.children)

    def tree_neighbors(self, node: NodeId) -> list[NodeId]:
        out = list(self.children[node])
        if node != self.root:
            out.append(self.parent[node])
        return out

    def depth(self, node: NodeId) -> int:
        d = 0
        while node != self.root:
            node = self.parent[node]
            d += 1
        return d

    def max_depth(self) -> int:
        # Children are always at parent depth + 1, so one pass suffices.
        depths = {self.root: 0}
        frontier = [self.root]
        deepest = 0
        while frontier:
            cur = frontier.pop()
            for child in self.children[cur]:
                depths[child] = depths[cur] + 1
                deepest = max(deepest, depths[child])
                frontier.append(child)
        return deepest

    def to_lines(self) -> list[str]:
        lines = [f"tree root {self.root}"]
        for node in self.nodes():
            if node != self.root:
                lines.append(f"tree edge {self.parent[node]} {node}")
        return lines

    @classmethod
    def from_lines(cls, lines: list[str]) -> "SpanningTree":
        root: NodeId | None = None
        parent: dict[NodeId, NodeId] = {}
        children: dict[NodeId, list[NodeId]] = {}
        for line in lines:
            parts = line.split()
            if parts[:2] == ["tree", "root"]:
                root = parts[2]
                children.setdefault(root, [])
            elif parts[:2] == ["tree", "edge"]:
                p, c = parts[2], parts[3]
                parent[c] = p
                children.setdefault(p, []).append(c)
                children.setdefault(c, [])
        if root is None:
            raise ValueError("missing tree root line")
        for kids in children.values():
            kids.sort()
        return cls(root, parent, children)


def build_spanning_tree(net: CreditNetwork, root: NodeId) -> SpanningTree:
    """BFS tree over the undirected skeleton, children in sorted NodeId order."""
    if not net.has_node(root):
        raise ValueError(f"unknown root {root}")
    parent: dict[NodeId, NodeId] = {}
    children: dict[NodeId, list[NodeId]] = {n: [] for n in net.nodes}
    visited = {root}
    frontier = [root]
    while frontier:
        nxt: list[NodeId] = []
        for cur in frontier:
            for nb in sorted(net.neighbors(cur)):
                if nb not in visited:
                    visited.add(nb)
                    parent[nb] = cur
                    children[cur].append(nb)
                    nxt.append(nb)
        frontier = nxt
    for node in net.nodes:
        if node not in visited:
            raise DisconnectedGraphError(node)
    return SpanningTree(root, parent, children)


def assign_prefix_ids(tree: SpanningTree) -> dict[NodeId, PrefixId]:
    ids: dict[NodeId, PrefixId] = {tree.root: PrefixId(())}
    frontier = [tree.root]
    while frontier:
        cur = frontier.pop()
        base = ids[cur].coords
        for index, child in enumerate(tree.children[cur], start=1):
            ids[child] = PrefixId(base + (index,))
            frontier.append(child)
    return ids


# -- hashed coordinates ------------------------------------------------------

@dataclass(frozen=True)
class HashedPrefixId:
    """Per-prefix digests padded with random entries to a fixed depth."""

    salt: bytes
    digests: tuple[bytes, ...]


def _prefix_bytes(coords: tuple[int, ...]) -> bytes:
    return b"".join(c.to_bytes(4, "big") for c in coords)


def prefix_digest(salt: bytes, coords: tuple[int, ...]) -> bytes:
    return crypto.digest(salt + _prefix_bytes(coords))


def hash_prefix_id(pid: PrefixId, *, pad_to: int, rng: random.Random) -> HashedPrefixId:
    if pad_to < pid.depth:
        raise ValueError("pad target shallower than the id itself")
    salt = rng.randbytes(16)
    digests = [prefix_digest(salt, pid.coords[: k + 1]) for k in range(pid.depth)]
    digests += [rng.randbytes(crypto.DIGEST_BYTES) for _ in range(pad_to - pid.depth)]
    return HashedPrefixId(salt, tuple(digests))


def hashed_cpl(coords: tuple[int, ...], target: HashedPrefixId) -> int:
    n = 0
    for k in range(min(len(coords), len(target.digests))):
        if prefix_digest(target.salt, coords[: k + 1]) != target.digests[k]:
            break
        n += 1
    return n


class PrefixEmbedding:
    """A built embedding: tree, plaintext ids, and greedy routing over them.

    Querying plaintext ids is simulator-side bookkeeping; routing decisions
    themselves use only hashed coordinates, mirroring what travels on the
    wire.
    """

    def __init__(self, net: CreditNetwork, root: NodeId | None = None,
                 pad_slack: int = 4) -> None:
        nodes = net.nodes
        if not nodes:
            raise ValueError("empty network")
        self.root = root if root is not None else nodes[0]
        self.tree = build_spanning_tree(net, self.root)
        self.ids = assign_prefix_ids(self.tree)
        self.pad_to = self.tree.max_depth() + pad_slack
        # Per-salt digest memo: routing one request probes the same node
        # prefixes many times over.
        self._memo_salt: bytes | None = None
        self._memo: dict[tuple[int, ...], bytes] = {}

    def hashed_id(self, node: NodeId, rng: random.Random) -> HashedPrefixId:
        return hash_prefix_id(self.ids[node], pad_to=self.pad_to, rng=rng)

    def _digest(self, salt: bytes, coords: tuple[int, ...]) -> bytes:
        if salt != self._memo_salt:
            self._memo_salt = salt
            self._memo = {}
        cached = self._memo.get(coords)
        if cached is None:
            cached = prefix_digest(salt, coords)
            self._memo[coords] = cached
        return cached

    def _hashed_cpl(self, coords: tuple[int, ...], target: HashedPrefixId) -> int:
        n = 0
        for k in range(min(len(coords), len(target.digests))):
            if self._digest(target.salt, coords[: k + 1]) != target.digests[k]:
                break
            n += 1
        return n

    def _score(self, node: NodeId, target: HashedPrefixId) -> int:
        coords = self.ids[node].coords
        # Equals tree_distance minus the (hidden) target depth: a constant
        # offset, so comparisons between candidates are exact.
        return len(coords) - 2 * self._hashed_cpl(coords, target)

    def holds(self, node: NodeId, target: HashedPrefixId) -> bool:
        """True iff no tree neighbor is strictly closer to the target."""
        own = self._score(node, target)
        return all(self._score(nb, target) >= own
                   for nb in self.tree.tree_neighbors(node))

    def next_hop(self, current: NodeId, target: HashedPrefixId) -> NodeId:
        """Tree neighbor minimizing distance to target, ties to smallest id."""
        candidates = self.tree.tree_neighbors(current)
        if not candidates:
            raise ValueError(f"{current} has no tree neighbors")
        return min(candidates, key=lambda nb: (self._score(nb, target), nb))

    def find_route(self, src: NodeId, target: HashedPrefixId) -> list[NodeId]:
        """Greedy hop sequence from ``src`` to the target's holder (exclusive
        of ``src``); empty when ``src`` already holds the target id."""
        path: list[NodeId] = []
        cur = src
        limit = 2 * self.pad_to + 2
        while not self.holds(cur, target):
            nxt = self.next_hop(cur, target)
            path.append(nxt)
            cur = nxt
            if len(path) > limit:
                raise RuntimeError("greedy routing failed to make progress")
        return path

    def route_length(self, src: NodeId, dst: NodeId) -> int:
        return tree_distance(self.ids[src], self.ids[dst])
