"""Dual-signed contract records and their canonical byte serializations.

Signatures cover these exact bytes, with a fixed field order, big-endian
integers, and length-prefixed identifiers, so any two parties serialize a
contract identically.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .model import NodeId


def encode_id(value: str) -> bytes:
    raw = value.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError("identifier too long")
    return struct.pack(">H", len(raw)) + raw


def contract_bytes(dest: NodeId, user: NodeId, val: int, request_id: str) -> bytes:
    """Canonical serialization of a link-update contract <dest, user, val, request_id>."""
    if val < 0:
        raise ValueError("contract value must be non-negative")
    return b"".join([
        encode_id(dest),
        encode_id(user),
        struct.pack(">Q", val),
        encode_id(request_id),
    ])


def ack_bytes(src: NodeId, user: NodeId, lw: int, request_id: str) -> bytes:
    """Canonical serialization of a settlement acknowledgement <src, user, lw, request_id>."""
    return b"".join([
        encode_id(src),
        encode_id(user),
        struct.pack(">Q", lw),
        encode_id(request_id),
    ])


@dataclass(frozen=True)
class ContractCtBal:
    """Link-update contract signed by both endpoints of the new link."""

    dest: NodeId
    user: NodeId
    val: int
    request_id: str
    sig_dest: bytes
    sig_user: bytes

    def message(self) -> bytes:
        return contract_bytes(self.dest, self.user, self.val, self.request_id)


@dataclass(frozen=True)
class SettlementAck:
    """Dual-signed acknowledgement that the old link was zeroed.

    ``contested`` marks settlements where the old lender failed to sign; the
    borrower zeroes the link locally anyway and emits a dispute record for
    the arbiter.
    """

    src: NodeId
    user: NodeId
    request_id: str
    sig_src: bytes
    sig_user: bytes
    contested: bool = False

    def message(self) -> bytes:
        return ack_bytes(self.src, self.user, 0, self.request_id)
