"""Balance-transfer and bailout protocol steps.

Balance transfer: a poorly connected requestor broadcasts an offer
(budget, interest rate, deadline); borrowers whose current lender charges
more respond with their full outstanding balance, encrypted, routed back
over the overlay while logging signed next-hop commitments.  Accepted
responders sign a dual contract with the requestor for the full amount,
zero out the old link with a countersigned acknowledgement, and exactly one
ledger write records each completed contract.

Bailout: a trusted landmark temporarily links the requestor to candidate
lenders; any candidate answering an outgoing-link request with an amount
signs the same dual contract, and the landmark exits with a fee
proportional to the links established.
"""

from __future__ import annotations

import json
import random
import struct
from dataclasses import dataclass, field
from typing import Callable, Iterable

from . import crypto
from .contracts import ContractCtBal, SettlementAck, ack_bytes, contract_bytes, encode_id
from .chord import ChordOverlay
from .crypto import CryptoSuite, DecryptionError, EncryptKey, NodeKeys, VerifyKey
from .hashlog import SharedHashLog
from .ledger import Ledger, TopologyDelta
from .model import CreditLink, CreditNetwork, NodeId
from .prefix import HashedPrefixId, PrefixEmbedding

BehaviorFn = Callable[[NodeId], "str | None"]
LendPolicy = Callable[[NodeId, NodeId], "int | None"]


class ProtocolError(Exception):
    pass


class MultisigAborted(ProtocolError):
    pass


class BailoutFailed(ProtocolError):
    def __init__(self, result: "BailoutResult") -> None:
        super().__init__("no outgoing links established")
        self.result = result


# -- requests and responses ----------------------------------------------------

@dataclass(frozen=True)
class BalanceTransferRequest:
    requestor: NodeId
    amt: int
    intr: float
    tp: int
    request_id: str
    issued_at: int
    key: int | None = None  # Chord variant only

    def __post_init__(self) -> None:
        if self.amt <= 0:
            raise ValueError("offered budget must be positive")
        if self.intr < 0:
            raise ValueError("advertised interest must be non-negative")
        if self.tp <= self.issued_at:
            raise ValueError("response deadline must be in the future")


@dataclass
class RouteOutcome:
    delivered: bool
    intended_path: list[NodeId]
    reached: list[NodeId]
    log_writes: int
    messages: int
    fail_segment: tuple[NodeId, NodeId] | None = None
    abandoned: str | None = None
    wire: bytes = b""

    @property
    def hops(self) -> int:
        return len(self.intended_path) - 1


@dataclass
class TransferResponse:
    request_id: str
    responder: NodeId
    src: NodeId  # current lender whose balance is being moved
    amount: int  # plaintext amount, simulator-side bookkeeping only
    ciphertext: bytes
    sent_at: int
    arrival_ts: int | None
    route: RouteOutcome


@dataclass(frozen=True)
class AcceptedResponse:
    responder: NodeId
    src: NodeId
    amount: int
    arrival_ts: int


@dataclass(frozen=True)
class OutlinkRequest:
    requestor: NodeId
    candidate: NodeId
    inlink: bool
    t: int
    signature: bytes


@dataclass
class BailoutResult:
    landmark: NodeId
    requestor: NodeId
    rounds_used: int
    links: list[tuple[NodeId, int]]
    fee: int
    failed: bool
    candidate_rounds: list[list[NodeId]] = field(default_factory=list)


def outreq_bytes(requestor: NodeId, candidate: NodeId, inlink: bool, t: int) -> bytes:
    flag = b"\x01" if inlink else b"\x00"
    return b"".join([
        encode_id(requestor),
        encode_id(candidate),
        flag,
        struct.pack(">Q", t),
    ])


# -- routing contexts ------------------------------------------------------------

@dataclass
class RequestRouting:
    """Per-request routing material shared with the arbiter.

    ``routing_bytes`` snapshots each node's routing identifier at request
    time (coordinate bytes or ring id), so audits recompute the same digests
    even if nodes re-embed or reposition later.
    """

    variant: str
    requestor: NodeId
    salt: bytes
    routing_bytes: dict[NodeId, bytes]
    target: HashedPrefixId | None = None
    key: int | None = None

    def digest_for(self, node: NodeId) -> bytes:
        return crypto.digest(self.salt + self.routing_bytes[node])


class PrefixRouter:
    variant = "prefix"

    def __init__(self, embedding: PrefixEmbedding) -> None:
        self.embedding = embedding

    def prepare(self, requestor: NodeId, rng: random.Random) -> RequestRouting:
        target = self.embedding.hashed_id(requestor, rng)
        routing_bytes = {
            node: b"".join(c.to_bytes(4, "big") for c in pid.coords)
            for node, pid in self.embedding.ids.items()
        }
        return RequestRouting("prefix", requestor, target.salt, routing_bytes,
                              target=target)

    def intended_path(self, src: NodeId, routing: RequestRouting) -> list[NodeId]:
        assert routing.target is not None
        return [src] + self.embedding.find_route(src, routing.target)


class ChordRouter:
    variant = "chord"

    def __init__(self, overlay: ChordOverlay) -> None:
        self.overlay = overlay

    def prepare(self, requestor: NodeId, rng: random.Random) -> RequestRouting:
        routing_bytes = {
            node_id: node.ring_id.to_bytes(8, "big")
            for node_id, node in self.overlay.nodes.items()
        }
        return RequestRouting(
            "chord",
            requestor,
            rng.randbytes(16),
            routing_bytes,
            key=self.overlay.ring_id_of(requestor),
        )

    def intended_path(self, src: NodeId, routing: RequestRouting) -> list[NodeId]:
        assert routing.key is not None
        return [src] + [hop for hop in self.overlay.lookup_hops(src, routing.key)]


Router = PrefixRouter | ChordRouter


def wire_message(request_id: str, routing: RequestRouting, ciphertext: bytes) -> bytes:
    """Serialized routed response; carries only hashed routing material."""
    body: dict[str, object] = {
        "request_id": request_id,
        "salt": routing.salt.hex(),
        "payload": ciphertext.hex(),
    }
    if routing.target is not None:
        body["target"] = [d.hex() for d in routing.target.digests]
    if routing.key is not None:
        body["key"] = routing.key
    return json.dumps(body, sort_keys=True).encode()


# -- trace ----------------------------------------------------------------------

@dataclass
class DisputeRecord:
    kind: str
    request_id: str
    parties: tuple[NodeId, ...]
    detail: str


@dataclass
class RunTrace:
    broadcasts: list[tuple[str, int, int]] = field(default_factory=list)
    routings: dict[str, RequestRouting] = field(default_factory=dict)
    responses: list[TransferResponse] = field(default_factory=list)
    accepted: list[AcceptedResponse] = field(default_factory=list)
    rejected: list[tuple[str, NodeId, str]] = field(default_factory=list)
    contracts: list[ContractCtBal] = field(default_factory=list)
    settlements: list[SettlementAck] = field(default_factory=list)
    disputes: list[DisputeRecord] = field(default_factory=list)
    security_events: list[DisputeRecord] = field(default_factory=list)
    link_contract_values: dict[tuple[NodeId, NodeId], int] = field(default_factory=dict)
    messages: int = 0


# -- context ----------------------------------------------------------------------

class ProtocolContext:
    """Everything the protocol steps read and mutate during a run."""

    def __init__(
        self,
        net: CreditNetwork,
        suite: CryptoSuite,
        rng: random.Random,
        behavior_of: BehaviorFn | None = None,
    ) -> None:
        self.net = net
        self.suite = suite
        self.rng = rng
        self.keys: dict[NodeId, NodeKeys] = {}
        self.vk_dir: dict[NodeId, VerifyKey] = {}
        self.pk_dir: dict[NodeId, EncryptKey] = {}
        for node in net.nodes:
            self.register_node(node)
        self.hashlog = SharedHashLog()
        self.ledger = Ledger(suite, self.vk_dir)
        self.trace = RunTrace()
        self.behavior_of: BehaviorFn = behavior_of or (lambda node: None)

    def register_node(self, node: NodeId) -> None:
        keys = self.suite.keygen(node)
        self.keys[node] = keys
        self.vk_dir[node] = keys.signing.vk
        self.pk_dir[node] = keys.encryption.pk

    def sign_as(self, node: NodeId, message: bytes) -> bytes:
        return self.suite.sign(self.keys[node].signing.sk, message)

    def verify_from(self, node: NodeId, message: bytes, signature: bytes) -> bool:
        vk = self.vk_dir.get(node)
        return vk is not None and self.suite.verify(vk, message, signature)


# -- balance transfer --------------------------------------------------------------

def bt_broadcast(ctx: ProtocolContext, bt: BalanceTransferRequest,
                 router: Router) -> list[NodeId]:
    """Deliver the request tuple once to every live node except the requestor.

    Constructing and emitting the tuple is a constant-cost act for the
    requestor; the per-recipient deliveries are charged to the recipients.
    """
    routing = router.prepare(bt.requestor, ctx.rng)
    ctx.trace.routings[bt.request_id] = routing
    recipients = [n for n in ctx.net.nodes if n != bt.requestor]
    ctx.trace.broadcasts.append((bt.request_id, bt.issued_at, len(recipients)))
    ctx.trace.messages += len(recipients)
    return recipients


def choose_transfer_subject(ctx: ProtocolContext, responder: NodeId,
                            requestor: NodeId) -> CreditLink | None:
    """The responder's highest-interest lender link, if transferable.

    A responder abstains when its costliest lender already is the requestor
    or when it already borrows from the requestor (at most one link per
    ordered pair).
    """
    if responder == requestor:
        return None
    if ctx.net.link(responder, requestor) is not None:
        return None
    lenders = ctx.net.out_links(responder)
    if not lenders:
        return None
    subject = max(lenders, key=lambda l: (l.interest, l.lender))
    if subject.lender == requestor:
        return None
    return subject


def flow_id(request_id: str, responder: NodeId) -> str:
    """Correlation id for one response flow: log entries from different
    responders to the same request must never be conflated by the audit."""
    return f"{request_id}/{responder}"


def route_response(ctx: ProtocolContext, router: Router, request_id: str,
                   responder: NodeId, ciphertext: bytes) -> RouteOutcome:
    """Walk the overlay route hop by hop, each forwarder logging a signed
    digest of its next hop and checking the downstream node logs too."""
    routing = ctx.trace.routings[request_id]
    flow = flow_id(request_id, responder)
    intended = router.intended_path(responder, routing)
    outcome = RouteOutcome(
        delivered=False,
        intended_path=intended,
        reached=[intended[0]],
        log_writes=0,
        messages=0,
        wire=wire_message(request_id, routing, ciphertext),
    )
    if intended[-1] != routing.requestor:
        outcome.abandoned = f"route ends at {intended[-1]}, not the requestor"
        return outcome
    if len(intended) == 1:
        outcome.delivered = True
        return outcome

    for i in range(len(intended) - 1):
        writer = intended[i]
        nxt = intended[i + 1]
        # A corrupt responder does not sabotage its own response (i == 0);
        # interception applies to intermediaries.
        behavior = ctx.behavior_of(writer) if i > 0 else None
        if behavior == "drop-silent":
            # No entry at all: the upstream sender's write-check fails and,
            # with no alternate route on the overlay, the response is abandoned.
            outcome.fail_segment = (intended[i - 1], writer)
            outcome.abandoned = f"{writer} made no log entry"
            return outcome
        if behavior == "misdirect":
            wrong = _misdirect_choice(routing, writer, nxt)
            digest = routing.digest_for(wrong)
            ctx.hashlog.append(writer, flow, digest, ctx.sign_as(writer, digest))
            outcome.log_writes += 1
            outcome.messages += 1
            outcome.fail_segment = (writer, nxt)
            return outcome
        digest = routing.digest_for(nxt)
        ctx.hashlog.append(writer, flow, digest, ctx.sign_as(writer, digest))
        outcome.log_writes += 1
        if behavior == "drop":
            # Logged, then discarded: the trail simply stops downstream.
            outcome.fail_segment = (writer, nxt)
            return outcome
        outcome.messages += 1
        outcome.reached.append(nxt)
    outcome.delivered = True
    return outcome


def _misdirect_choice(routing: RequestRouting, writer: NodeId, correct: NodeId) -> NodeId:
    for node in sorted(routing.routing_bytes):
        if node not in (writer, correct):
            return node
    return correct


def bt_respond(ctx: ProtocolContext, responder: NodeId, bt: BalanceTransferRequest,
               router: Router, now: int,
               should_respond: Callable[[NodeId, BalanceTransferRequest, CreditLink], bool] | None = None,
               ) -> TransferResponse | None:
    """Respond with the full balance of the chosen lender link, encrypted to
    the requestor, routed over the overlay.  Returns None when the responder
    abstains (no transferable link, rate rule not met, or adversarial
    silence)."""
    if ctx.behavior_of(responder) == "selective-response":
        return None
    subject = choose_transfer_subject(ctx, responder, bt.requestor)
    if subject is None:
        return None
    decide = should_respond or (lambda n, req, link: req.intr < link.interest)
    if not decide(responder, bt, subject):
        return None
    amount = subject.weight
    ciphertext = ctx.suite.encrypt(ctx.pk_dir[bt.requestor], amount)
    outcome = route_response(ctx, router, bt.request_id, responder, ciphertext)
    arrival = now + outcome.hops if outcome.delivered else None
    response = TransferResponse(
        request_id=bt.request_id,
        responder=responder,
        src=subject.lender,
        amount=amount,
        ciphertext=ciphertext,
        sent_at=now,
        arrival_ts=arrival,
        route=outcome,
    )
    ctx.trace.responses.append(response)
    ctx.trace.messages += outcome.messages
    return response


def bt_accept(ctx: ProtocolContext, bt: BalanceTransferRequest,
              responses: Iterable[TransferResponse]) -> list[AcceptedResponse]:
    """Deadline-time acceptance: arrival order, strict ts < tp, sequential
    budget; acceptance stops once the budget is exhausted."""
    delivered = [r for r in responses if r.arrival_ts is not None]
    delivered.sort(key=lambda r: (r.arrival_ts, r.responder))
    accepted: list[AcceptedResponse] = []
    budget = bt.amt
    for resp in delivered:
        assert resp.arrival_ts is not None
        if resp.arrival_ts >= bt.tp:
            ctx.trace.rejected.append((bt.request_id, resp.responder, "late"))
            continue
        try:
            amount = ctx.suite.decrypt(ctx.keys[bt.requestor].encryption.dk,
                                       resp.ciphertext)
        except DecryptionError:
            ctx.trace.rejected.append((bt.request_id, resp.responder, "undecryptable"))
            continue
        if amount > budget:
            ctx.trace.rejected.append((bt.request_id, resp.responder, "over-budget"))
            continue
        budget -= amount
        item = AcceptedResponse(resp.responder, resp.src, amount, resp.arrival_ts)
        accepted.append(item)
        ctx.trace.accepted.append(item)
        if budget == 0:
            break
    return accepted


def multisig(ctx: ProtocolContext, dest: NodeId, val: int, user: NodeId,
             request_id: str, interest: float,
             refuse: Iterable[NodeId] = ()) -> ContractCtBal:
    """Two-round sign/countersign creating the new link atomically.

    Any refusal or failure leaves the graph untouched and nothing queued for
    the ledger.
    """
    if val <= 0:
        raise ValueError("contract value must be positive")
    refusing = set(refuse)
    if ctx.net.link(user, dest) is not None:
        raise MultisigAborted(f"link {user}->{dest} already exists")
    message = contract_bytes(dest, user, val, request_id)
    if dest in refusing:
        raise MultisigAborted(f"{dest} refused to sign")
    sig_dest = ctx.sign_as(dest, message)
    if user in refusing:
        raise MultisigAborted(f"{user} refused to countersign")
    if not ctx.verify_from(dest, message, sig_dest):
        raise MultisigAborted(f"{user} rejected {dest}'s signature")
    sig_user = ctx.sign_as(user, message)
    ctx.net.create_link(user, dest, val, interest)
    contract = ContractCtBal(dest, user, val, request_id, sig_dest, sig_user)
    ctx.trace.contracts.append(contract)
    ctx.trace.link_contract_values[(user, dest)] = val
    ctx.trace.messages += 3  # offer, countersignature, confirmation
    return contract


def settle_old_link(ctx: ProtocolContext, user: NodeId, src: NodeId,
                    request_id: str, src_offline: bool = False) -> SettlementAck:
    """Zero and delete the old lender link, acknowledged by both parties.

    If the old lender refuses or is unreachable the borrower still zeroes
    the link locally and the settlement is recorded as contested for the
    arbiter."""
    link = ctx.net.link(user, src)
    if link is None:
        raise ProtocolError(f"no link {user}->{src} to settle")
    ctx.net.apply_link_update(user, src, 0)
    message = ack_bytes(src, user, 0, request_id)
    sig_user = ctx.sign_as(user, message)
    if src_offline:
        ack = SettlementAck(src, user, request_id, b"", sig_user, contested=True)
        ctx.trace.disputes.append(DisputeRecord(
            "contested-settlement", request_id, (src, user),
            f"{src} did not acknowledge zeroing of {user}->{src}",
        ))
    else:
        sig_src = ctx.sign_as(src, message)
        if not ctx.verify_from(src, message, sig_src):
            raise ProtocolError("settlement acknowledgement failed verification")
        ack = SettlementAck(src, user, request_id, sig_src, sig_user)
        ctx.trace.messages += 2
    ctx.trace.settlements.append(ack)
    return ack


def complete_transfer(ctx: ProtocolContext, bt: BalanceTransferRequest,
                      accepted: AcceptedResponse, timestamp: int,
                      src_offline: bool = False) -> ContractCtBal:
    """Contract with the new lender, settle the old link, write the ledger
    entry covering both topology changes (the single write per contract)."""
    subject = ctx.net.link(accepted.responder, accepted.src)
    if subject is None or subject.weight != accepted.amount:
        # Another settlement got there first (several outstanding requests
        # may accept the same responder); abort before any signature.
        raise MultisigAborted(
            f"subject link {accepted.responder}->{accepted.src} changed since response"
        )
    contract = multisig(ctx, bt.requestor, accepted.amount, accepted.responder,
                        bt.request_id, bt.intr)
    settle_old_link(ctx, accepted.responder, accepted.src, bt.request_id,
                    src_offline=src_offline)
    deltas = [
        TopologyDelta("set", accepted.responder, bt.requestor,
                      accepted.amount, bt.intr),
        TopologyDelta("del", accepted.responder, accepted.src),
    ]
    ctx.ledger.write(contract, deltas, timestamp)
    return contract


# -- bailout -------------------------------------------------------------------------

def out_req(ctx: ProtocolContext, request: OutlinkRequest, tr: int,
            lend_policy: LendPolicy) -> int | None:
    """Relay a signed outgoing-link request; the candidate verifies the
    signature and answers with a credit amount or declines."""
    if request.t >= tr:
        raise ProtocolError("request timestamp beyond the response window")
    message = outreq_bytes(request.requestor, request.candidate,
                           request.inlink, request.t)
    if not ctx.verify_from(request.requestor, message, request.signature):
        ctx.trace.security_events.append(DisputeRecord(
            "forged-outreq", "bailout", (request.requestor, request.candidate),
            f"{request.candidate} rejected a request with a bad signature",
        ))
        return None
    val = lend_policy(request.candidate, request.requestor)
    if val is not None and val <= 0:
        return None
    return val


def bailout(ctx: ProtocolContext, requestor: NodeId, landmark: NodeId, *,
            m_out: int, tr: int, fee_per_link: int, max_rounds: int,
            candidate_supplier: Callable[[int], list[NodeId]],
            lend_policy: LendPolicy, timestamp: int,
            interest: float = 0.0, temp_weight: int = 1,
            out_threshold: int | None = None) -> BailoutResult:
    """Landmark-assisted creation of outgoing links (see module docstring).

    Raises BailoutFailed after ``max_rounds`` candidate lists produce no
    link; either way the landmark ends with zero adjacent links.
    """
    if out_threshold is not None:
        degree = len(ctx.net.out_links(requestor))
        if degree >= out_threshold:
            raise ProtocolError(
                f"{requestor} already has {degree} outgoing links (threshold {out_threshold})"
            )
    ctx.net.apply_link_update(requestor, landmark, temp_weight, 0.0)
    established: list[tuple[NodeId, int]] = []
    candidate_rounds: list[list[NodeId]] = []
    rounds_used = 0
    try:
        for round_no in range(1, max_rounds + 1):
            rounds_used = round_no
            candidates = [c for c in candidate_supplier(round_no)
                          if c not in (requestor, landmark)][:m_out]
            candidate_rounds.append(list(candidates))
            if not candidates:
                continue
            for candidate in candidates:
                ctx.net.apply_link_update(landmark, candidate, temp_weight, 0.0)
            willing: list[tuple[NodeId, int]] = []
            for offset, candidate in enumerate(candidates):
                t = min(offset, tr - 1)
                message = outreq_bytes(requestor, candidate, False, t)
                request = OutlinkRequest(requestor, candidate, False, t,
                                         ctx.sign_as(requestor, message))
                ctx.trace.messages += 2  # relayed through the landmark
                val = out_req(ctx, request, tr, lend_policy)
                if val is not None:
                    willing.append((candidate, val))
            for candidate, val in willing:
                try:
                    contract = multisig(ctx, candidate, val, requestor,
                                        f"bailout-{requestor}-{round_no}", interest)
                except MultisigAborted:
                    continue
                ctx.ledger.write(
                    contract,
                    [TopologyDelta("set", requestor, candidate, val, interest)],
                    timestamp,
                )
                established.append((candidate, val))
            for candidate in candidates:
                ctx.net.apply_link_update(landmark, candidate, 0)
            if established:
                break
    finally:
        for neighbor in list(ctx.net.neighbors(landmark)):
            ctx.net.apply_link_update(landmark, neighbor, 0)
            ctx.net.apply_link_update(neighbor, landmark, 0)
    fee = fee_per_link * len(established)
    result = BailoutResult(landmark, requestor, rounds_used, established,
                           fee, failed=not established,
                           candidate_rounds=candidate_rounds)
    if not established:
        raise BailoutFailed(result)
    return result
