"""Directed weighted credit graph with per-node link tables.

A link ``borrower -> lender`` of weight ``w`` means the lender has extended
``w`` units of credit to the borrower.  Every node keeps a local table of
its adjacent links; the graph and the tables are mutated together so that
re-deriving the tables from the edge list always reproduces them exactly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

NodeId = str

INTEREST_DECIMALS = 6


class CreditNetworkError(Exception):
    pass


class UnknownNodeError(CreditNetworkError):
    pass


class LinkExistsError(CreditNetworkError):
    pass


@dataclass(frozen=True)
class CreditLink:
    borrower: NodeId
    lender: NodeId
    weight: int
    interest: float

    def __post_init__(self) -> None:
        if self.weight < 0:
            raise ValueError(f"negative link weight {self.weight}")
        if self.interest < 0:
            raise ValueError(f"negative interest rate {self.interest}")


@dataclass(frozen=True)
class NetworkConfig:
    node_count: int
    edge_density: float = 4.0
    seed: int = 0
    interest_range: tuple[float, float] = (0.01, 0.25)
    max_weight: int = 100

    def validate(self) -> None:
        if self.node_count < 2:
            raise ValueError(f"node_count must be >= 2, got {self.node_count}")
        if self.edge_density < 1:
            raise ValueError(f"edge_density must be >= 1, got {self.edge_density}")
        lo, hi = self.interest_range
        if lo < 0 or hi < lo:
            raise ValueError(f"invalid interest_range {self.interest_range}")
        if self.max_weight < 1:
            raise ValueError("max_weight must be >= 1")


class LocalTable:
    """A node's private record of its adjacent links.

    Entries are keyed by ``(neighbor, inlink)``; ``inlink`` is true iff the
    neighbor borrows from the owner (edge ``neighbor -> owner``), so the same
    neighbor may appear once per direction.
    """

    def __init__(self, owner: NodeId) -> None:
        self.owner = owner
        self.entries: dict[tuple[NodeId, bool], int] = {}

    def put(self, neighbor: NodeId, inlink: bool, weight: int) -> None:
        self.entries[(neighbor, inlink)] = weight

    def drop(self, neighbor: NodeId, inlink: bool) -> None:
        self.entries.pop((neighbor, inlink), None)

    def get(self, neighbor: NodeId, inlink: bool) -> int | None:
        return self.entries.get((neighbor, inlink))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, LocalTable)
            and other.owner == self.owner
            and other.entries == self.entries
        )

    def __repr__(self) -> str:
        return f"LocalTable({self.owner!r}, {self.entries!r})"


class CreditNetwork:
    def __init__(self, seed: int = 0) -> None:
        self.seed = seed
        self.links: dict[tuple[NodeId, NodeId], CreditLink] = {}
        self.tables: dict[NodeId, LocalTable] = {}
        # lenders[n]: nodes n borrows from; borrowers[n]: nodes that borrow from n
        self._lenders: dict[NodeId, set[NodeId]] = {}
        self._borrowers: dict[NodeId, set[NodeId]] = {}

    # -- nodes ------------------------------------------------------------

    @property
    def nodes(self) -> list[NodeId]:
        return sorted(self.tables)

    def node_count(self) -> int:
        return len(self.tables)

    def has_node(self, node: NodeId) -> bool:
        return node in self.tables

    def add_node(self, node: NodeId) -> None:
        if node in self.tables:
            raise CreditNetworkError(f"node {node} already exists")
        self.tables[node] = LocalTable(node)
        self._lenders[node] = set()
        self._borrowers[node] = set()

    def _require_node(self, node: NodeId) -> None:
        if node not in self.tables:
            raise UnknownNodeError(f"unknown node {node}")

    # -- links ------------------------------------------------------------

    def link(self, borrower: NodeId, lender: NodeId) -> CreditLink | None:
        return self.links.get((borrower, lender))

    def apply_link_update(
        self,
        borrower: NodeId,
        lender: NodeId,
        new_weight: int,
        interest: float | None = None,
    ) -> None:
        """Set (or delete, at weight 0) a link, keeping both tables in step."""
        self._require_node(borrower)
        self._require_node(lender)
        if borrower == lender:
            raise CreditNetworkError(f"self-link on {borrower}")
        if new_weight < 0:
            raise ValueError(f"negative link weight {new_weight}")
        key = (borrower, lender)
        existing = self.links.get(key)
        if new_weight == 0:
            if existing is not None:
                del self.links[key]
                self._lenders[borrower].discard(lender)
                self._borrowers[lender].discard(borrower)
                self.tables[borrower].drop(lender, inlink=False)
                self.tables[lender].drop(borrower, inlink=True)
            return
        if interest is None:
            interest = existing.interest if existing is not None else 0.0
        self.links[key] = CreditLink(borrower, lender, new_weight, interest)
        self._lenders[borrower].add(lender)
        self._borrowers[lender].add(borrower)
        self.tables[borrower].put(lender, inlink=False, weight=new_weight)
        self.tables[lender].put(borrower, inlink=True, weight=new_weight)

    def create_link(
        self, borrower: NodeId, lender: NodeId, weight: int, interest: float
    ) -> None:
        """Create a fresh link; a second creation on the same ordered pair is an error."""
        if (borrower, lender) in self.links:
            raise LinkExistsError(f"link {borrower}->{lender} already exists")
        if weight <= 0:
            raise ValueError("new link weight must be positive")
        self.apply_link_update(borrower, lender, weight, interest)

    def out_links(self, node: NodeId) -> list[CreditLink]:
        """Links on which ``node`` is the borrower, sorted by lender."""
        self._require_node(node)
        return [self.links[(node, l)] for l in sorted(self._lenders[node])]

    def in_links(self, node: NodeId) -> list[CreditLink]:
        """Links on which ``node`` is the lender, sorted by borrower."""
        self._require_node(node)
        return [self.links[(b, node)] for b in sorted(self._borrowers[node])]

    def total_debt(self, node: NodeId) -> int:
        return sum(link.weight for link in self.out_links(node))

    def neighbors(self, node: NodeId) -> set[NodeId]:
        """Adjacent nodes, ignoring link direction."""
        self._require_node(node)
        return self._lenders[node] | self._borrowers[node]

    # -- invariants --------------------------------------------------------

    def derive_tables(self) -> dict[NodeId, LocalTable]:
        """Rebuild all local tables from the edge list alone."""
        derived = {n: LocalTable(n) for n in self.tables}
        for (borrower, lender), link in self.links.items():
            derived[borrower].put(lender, inlink=False, weight=link.weight)
            derived[lender].put(borrower, inlink=True, weight=link.weight)
        return derived

    def check_consistency(self) -> None:
        """Table/graph bisimulation plus the no-negative-weights sweep."""
        for link in self.links.values():
            if link.weight <= 0:
                raise CreditNetworkError(f"non-positive stored weight on {link}")
        derived = self.derive_tables()
        for node, table in self.tables.items():
            if derived[node].entries != table.entries:
                raise CreditNetworkError(
                    f"table for {node} diverges from edge list: "
                    f"{table.entries} != {derived[node].entries}"
                )

    # -- serialization -----------------------------------------------------

    def to_text(self) -> str:
        """Stable text form: one header line, then edges sorted by (borrower, lender)."""
        lines = [f"nodes {self.node_count()} seed {self.seed}"]
        for (borrower, lender) in sorted(self.links):
            link = self.links[(borrower, lender)]
            lines.append(
                f"edge {borrower} {lender} {link.weight} "
                f"{link.interest:.{INTEREST_DECIMALS}f}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CreditNetwork":
        net: CreditNetwork | None = None
        declared = 0
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "nodes":
                declared = int(parts[1])
                net = cls(seed=int(parts[3]))
            elif parts[0] == "edge":
                assert net is not None, "header line missing"
                borrower, lender, weight, interest = parts[1:5]
                for endpoint in (borrower, lender):
                    if not net.has_node(endpoint):
                        net.add_node(endpoint)
                net.apply_link_update(borrower, lender, int(weight), float(interest))
            else:
                raise ValueError(f"unrecognized graph line {lineno}: {raw!r}")
        if net is None:
            raise ValueError("empty graph text")
        if net.node_count() != declared:
            raise ValueError(
                f"header declares {declared} nodes, edges cover {net.node_count()}"
            )
        return net


def node_name(index: int) -> NodeId:
    return f"n{index:05d}"


def generate_network(cfg: NetworkConfig) -> CreditNetwork:
    """Deterministically generate a weakly connected random credit graph."""
    cfg.validate()
    rng = random.Random(cfg.seed)
    net = CreditNetwork(seed=cfg.seed)
    names = [node_name(i) for i in range(cfg.node_count)]
    for name in names:
        net.add_node(name)

    def draw_weight() -> int:
        return rng.randint(1, cfg.max_weight)

    def draw_interest() -> float:
        lo, hi = cfg.interest_range
        return round(rng.uniform(lo, hi), INTEREST_DECIMALS)

    target = round(cfg.node_count * cfg.edge_density)
    attempts = 0
    while len(net.links) < target and attempts < target * 20:
        attempts += 1
        borrower = names[rng.randrange(cfg.node_count)]
        lender = names[rng.randrange(cfg.node_count)]
        if borrower == lender or (borrower, lender) in net.links:
            continue
        net.apply_link_update(borrower, lender, draw_weight(), draw_interest())

    # Stitch weakly connected components together with spanning links so the
    # undirected skeleton admits a spanning tree.
    components = _weak_components(net)
    base = components[0]
    for comp in components[1:]:
        a = base[rng.randrange(len(base))]
        b = comp[rng.randrange(len(comp))]
        borrower, lender = (a, b) if rng.random() < 0.5 else (b, a)
        if (borrower, lender) in net.links:
            borrower, lender = lender, borrower
        net.apply_link_update(borrower, lender, draw_weight(), draw_interest())
        base = base + comp
    return net


def _weak_components(net: CreditNetwork) -> list[list[NodeId]]:
    seen: set[NodeId] = set()
    components: list[list[NodeId]] = []
    for start in net.nodes:
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        frontier = [start]
        while frontier:
            current = frontier.pop()
            for nb in net.neighbors(current):
                if nb not in seen:
                    seen.add(nb)
                    comp.append(nb)
                    frontier.append(nb)
        components.append(comp)
    return components
