"""Shared hash logs and segment-level path auditing.

Every node forwarding a routed response first writes a signed digest of the
next hop's identifier to its shared log.  An arbiter replaying those entries
against a claimed path can verify the longest honest prefix and name the
first segment where the trail breaks.  The verdict deliberately names a
*segment* (an adjacent pair), never a single node: a missing downstream
entry cannot distinguish a sender that never forwarded from a receiver that
silently discarded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .model import CreditNetwork, NodeId

# Role allowed to read every entry regardless of graph adjacency.
ARBITER: NodeId = "__arbiter__"

DELIVERED = "delivered"
BROKEN = "broken"
NO_TRAIL = "no-trail"


@dataclass(frozen=True)
class SharedHashLogEntry:
    writer: NodeId
    hashed_next_hop: bytes
    signature: bytes
    seq: int
    request_id: str


class SharedHashLog:
    """Append-only per-request store of next-hop commitments."""

    def __init__(self) -> None:
        self._by_request: dict[str, list[SharedHashLogEntry]] = {}
        self._seq: dict[tuple[NodeId, str], int] = {}

    def append(self, writer: NodeId, request_id: str, hashed_next_hop: bytes,
               signature: bytes) -> SharedHashLogEntry:
        key = (writer, request_id)
        seq = self._seq.get(key, -1) + 1
        self._seq[key] = seq
        entry = SharedHashLogEntry(writer, hashed_next_hop, signature, seq, request_id)
        self._by_request.setdefault(request_id, []).append(entry)
        return entry

    def entries(self, request_id: str) -> list[SharedHashLogEntry]:
        return list(self._by_request.get(request_id, []))

    def read(self, request_id: str, reader: NodeId,
             net: CreditNetwork | None = None) -> list[SharedHashLogEntry]:
        """Visibility-filtered view: a writer's entries are readable by its
        graph neighbors and by the arbiter; everyone else sees nothing."""
        entries = self.entries(request_id)
        if reader == ARBITER:
            return entries
        if net is None:
            return []
        visible = net.neighbors(reader) | {reader}
        return [e for e in entries if e.writer in visible]

    def request_ids(self) -> list[str]:
        return sorted(self._by_request)


@dataclass(frozen=True)
class AuditVerdict:
    status: str
    verified_prefix: tuple[NodeId, ...]
    suspect_segment: tuple[NodeId, NodeId] | None

    @property
    def delivered(self) -> bool:
        return self.status == DELIVERED


def audit_path(
    entries: list[SharedHashLogEntry],
    claimed_path: list[NodeId],
    *,
    verify: Callable[[NodeId, bytes, bytes], bool],
    expected_digest: Callable[[NodeId], bytes],
) -> AuditVerdict:
    """Replay log entries along ``claimed_path``.

    ``claimed_path`` runs responder-first, requestor-last; every node but the
    last should have written one entry committing to its successor on the
    path.  ``verify(writer, message, signature)`` checks a writer's signature
    and ``expected_digest(node)`` recomputes the digest a correct forwarder
    would have logged for ``node``.
    """
    if not entries:
        return AuditVerdict(NO_TRAIL, (), None)
    if len(claimed_path) < 2:
        return AuditVerdict(DELIVERED, tuple(claimed_path), None)

    pending: dict[NodeId, list[SharedHashLogEntry]] = {}
    for entry in entries:
        pending.setdefault(entry.writer, []).append(entry)
    for queue in pending.values():
        queue.sort(key=lambda e: e.seq)

    for i in range(len(claimed_path) - 1):
        writer = claimed_path[i]
        nxt = claimed_path[i + 1]
        queue = pending.get(writer)
        entry = queue.pop(0) if queue else None
        entry_ok = entry is not None and verify(writer, entry.hashed_next_hop, entry.signature)
        if not entry_ok:
            # No authenticated commitment from this hop: the break sits between
            # the last committed node and this one.
            prev = claimed_path[i - 1] if i > 0 else claimed_path[i]
            segment = (prev, writer) if i > 0 else (claimed_path[0], claimed_path[1])
            return AuditVerdict(BROKEN, tuple(claimed_path[:i + 1]), segment)
        if entry.hashed_next_hop != expected_digest(nxt):
            # Valid signature over the wrong next hop: forged or misdirected.
            return AuditVerdict(BROKEN, tuple(claimed_path[:i + 1]), (writer, nxt))
    return AuditVerdict(DELIVERED, tuple(claimed_path), None)
