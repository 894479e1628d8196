"""Adversary injection and the post-hoc audit that localizes it.

Corrupt nodes can drop routed responses after logging, misdirect them with a
forged next-hop digest, stay silent on requests they should answer, or
misreport their link weights.  The audit replays shared hash logs for every
failed delivery and cross-checks every contract-backed link weight against
what each endpoint claims; route faults are localized to a path segment
(never a single node), misreports to the claiming node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .hashlog import BROKEN, AuditVerdict, audit_path
from .model import NodeId
from .protocol import ProtocolContext, flow_id

BEHAVIORS = ("drop", "misreport-link", "selective-response", "misdirect")


@dataclass(frozen=True)
class AdversarySpec:
    corrupt: dict[NodeId, str] = field(default_factory=dict)

    def validate(self, all_nodes: list[NodeId], landmark: NodeId | None = None) -> None:
        for node, behavior in self.corrupt.items():
            if behavior not in BEHAVIORS:
                raise ValueError(f"unknown adversary behavior {behavior!r} for {node}")
        if landmark is not None and landmark in self.corrupt:
            raise ValueError("the landmark can never be corrupted")
        if all_nodes and set(self.corrupt) >= set(all_nodes):
            raise ValueError("the adversary cannot corrupt all nodes")


class Adversary:
    """Runtime state for one simulation run."""

    def __init__(self, spec: AdversarySpec) -> None:
        self.spec = spec
        # Claimed link weights that diverge from the node's true table.
        self.claims: dict[tuple[NodeId, NodeId, NodeId], int] = {}

    def behavior_of(self, node: NodeId) -> str | None:
        behavior = self.spec.corrupt.get(node)
        if behavior in ("drop", "misdirect", "selective-response"):
            return behavior
        return None

    def misreporters(self) -> list[NodeId]:
        return sorted(n for n, b in self.spec.corrupt.items() if b == "misreport-link")

    def apply_misreports(self, ctx: ProtocolContext, skew: int = 15) -> None:
        """Corrupt each misreporter's *claimed* weight on one contract-backed
        link; the graph itself stays consistent."""
        for node in self.misreporters():
            for (borrower, lender), val in sorted(ctx.trace.link_contract_values.items()):
                if node in (borrower, lender) and ctx.net.link(borrower, lender) is not None:
                    self.claims[(node, borrower, lender)] = val + skew
                    break

    def claimed_weight(self, node: NodeId, borrower: NodeId, lender: NodeId,
                       ctx: ProtocolContext) -> int | None:
        override = self.claims.get((node, borrower, lender))
        if override is not None:
            return override
        inlink = node == lender
        other = borrower if inlink else lender
        return ctx.net.tables[node].get(other, inlink)


@dataclass(frozen=True)
class RouteFinding:
    request_id: str
    responder: NodeId
    segment: tuple[NodeId, NodeId]
    verified_prefix: tuple[NodeId, ...]


@dataclass(frozen=True)
class MisreportFinding:
    node: NodeId
    borrower: NodeId
    lender: NodeId
    claimed: int
    contracted: int


@dataclass
class AuditReport:
    route_findings: list[RouteFinding] = field(default_factory=list)
    misreport_findings: list[MisreportFinding] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.route_findings and not self.misreport_findings

    def suspects(self) -> set[NodeId]:
        out: set[NodeId] = set()
        for f in self.route_findings:
            out.update(f.segment)
        for f in self.misreport_findings:
            out.add(f.node)
        return out

    def to_lines(self) -> list[str]:
        lines = []
        for f in self.route_findings:
            lines.append(
                f"route-break request={f.request_id} responder={f.responder} "
                f"segment={f.segment[0]},{f.segment[1]}"
            )
        for f in self.misreport_findings:
            lines.append(
                f"misreport node={f.node} link={f.borrower}->{f.lender} "
                f"claimed={f.claimed} contracted={f.contracted}"
            )
        return lines


def audit_failed_delivery(ctx: ProtocolContext, request_id: str,
                          responder: NodeId, intended_path: list[NodeId],
                          received: bool) -> AuditVerdict:
    routing = ctx.trace.routings[request_id]
    verdict = audit_path(
        ctx.hashlog.entries(flow_id(request_id, responder)),
        intended_path,
        verify=ctx.verify_from,
        expected_digest=routing.digest_for,
    )
    if verdict.delivered and not received and len(intended_path) >= 2:
        # Every commitment checks out yet the requestor saw nothing: the
        # trail is unverifiable exactly at its final segment.
        verdict = AuditVerdict(
            BROKEN,
            verdict.verified_prefix,
            (intended_path[-2], intended_path[-1]),
        )
    return verdict


def run_audit(ctx: ProtocolContext, adversary: Adversary) -> AuditReport:
    """Arbiter pass over a finished run: every failed delivery is traced to a
    suspect segment, every contract-backed link weight is compared against
    both endpoints' claims."""
    report = AuditReport()
    for response in ctx.trace.responses:
        if response.route.delivered:
            continue
        verdict = audit_failed_delivery(
            ctx,
            response.request_id,
            response.responder,
            response.route.intended_path,
            received=False,
        )
        if verdict.suspect_segment is not None:
            report.route_findings.append(RouteFinding(
                response.request_id,
                response.responder,
                verdict.suspect_segment,
                verdict.verified_prefix,
            ))
    for (borrower, lender), val in sorted(ctx.trace.link_contract_values.items()):
        if ctx.net.link(borrower, lender) is None:
            continue  # superseded by a later settlement
        for endpoint in (borrower, lender):
            claimed = adversary.claimed_weight(endpoint, borrower, lender, ctx)
            if claimed is not None and claimed != val:
                report.misreport_findings.append(
                    MisreportFinding(endpoint, borrower, lender, claimed, val)
                )
    return report
