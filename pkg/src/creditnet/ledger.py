"""Simulated append-only ledger of completed rebalancing contracts.

Each entry carries one dual-signed contract plus the topology delta it
caused, and chains to its predecessor by digest of the predecessor's exact
serialized line.  There is no consensus here: the ledger is a trusted
append-only sink, and a single write happens per completed contract, never
for intermediate protocol messages.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import crypto
from .contracts import ContractCtBal, contract_bytes
from .crypto import CryptoSuite, VerifyKey
from .model import NodeId

GENESIS_DIGEST = b"\x00" * crypto.DIGEST_BYTES


class LedgerError(Exception):
    pass


class InvalidContractError(LedgerError):
    pass


@dataclass(frozen=True)
class TopologyDelta:
    """One link change: op is 'set' (weight > 0) or 'del'."""

    op: str
    borrower: NodeId
    lender: NodeId
    weight: int = 0
    interest: float = 0.0

    def token(self) -> str:
        if self.op == "set":
            return f"set:{self.borrower}:{self.lender}:{self.weight}:{self.interest:.6f}"
        return f"del:{self.borrower}:{self.lender}"

    @classmethod
    def from_token(cls, token: str) -> "TopologyDelta":
        parts = token.split(":")
        if parts[0] == "set":
            return cls("set", parts[1], parts[2], int(parts[3]), float(parts[4]))
        if parts[0] == "del":
            return cls("del", parts[1], parts[2])
        raise ValueError(f"bad delta token {token!r}")


@dataclass(frozen=True)
class LedgerEntry:
    index: int
    prev_digest: bytes
    timestamp: int
    contract: ContractCtBal
    deltas: tuple[TopologyDelta, ...]

    def to_line(self) -> str:
        c = self.contract
        delta = ",".join(d.token() for d in self.deltas) or "-"
        return "|".join(
            [
                str(self.index),
                self.prev_digest.hex(),
                str(self.timestamp),
                c.request_id,
                c.dest,
                c.user,
                str(c.val),
                c.sig_dest.hex(),
                c.sig_user.hex(),
                delta,
            ]
        )

    @classmethod
    def from_line(cls, line: str) -> "LedgerEntry":
        parts = line.rstrip("\n").split("|")
        if len(parts) != 10:
            raise LedgerError(f"malformed ledger line: {line!r}")
        contract = ContractCtBal(
            dest=parts[4],
            user=parts[5],
            val=int(parts[6]),
            request_id=parts[3],
            sig_dest=bytes.fromhex(parts[7]),
            sig_user=bytes.fromhex(parts[8]),
        )
        deltas = ()
        if parts[9] != "-":
            deltas = tuple(TopologyDelta.from_token(t) for t in parts[9].split(","))
        return cls(int(parts[0]), bytes.fromhex(parts[1]), int(parts[2]), contract, deltas)


class Ledger:
    def __init__(self, suite: CryptoSuite, directory: dict[NodeId, VerifyKey]) -> None:
        self.suite = suite
        self.directory = directory
        self.entries: list[LedgerEntry] = []
        self._by_contract: dict[tuple[str, NodeId, NodeId], int] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def write(self, contract: ContractCtBal, deltas: list[TopologyDelta],
              timestamp: int) -> int:
        """Append one contract; idempotent per (request_id, dest, user)."""
        key = (contract.request_id, contract.dest, contract.user)
        existing = self._by_contract.get(key)
        if existing is not None:
            return existing
        message = contract_bytes(contract.dest, contract.user, contract.val,
                                 contract.request_id)
        for party, signature in ((contract.dest, contract.sig_dest),
                                 (contract.user, contract.sig_user)):
            vk = self.directory.get(party)
            if vk is None or not self.suite.verify(vk, message, signature):
                raise InvalidContractError(f"signature of {party} does not verify")
        prev = GENESIS_DIGEST if not self.entries else crypto.digest(
            self.entries[-1].to_line().encode()
        )
        entry = LedgerEntry(len(self.entries), prev, timestamp, contract, tuple(deltas))
        self.entries.append(entry)
        self._by_contract[key] = entry.index
        return entry.index

    def read(self, index: int) -> LedgerEntry:
        if not 0 <= index < len(self.entries):
            raise LedgerError(f"index {index} out of range (length {len(self.entries)})")
        return self.entries[index]

    def verify_chain(self) -> bool:
        """True iff digest linkage holds end-to-end and every stored contract
        still carries two valid signatures."""
        prev = GENESIS_DIGEST
        for i, entry in enumerate(self.entries):
            if entry.index != i or entry.prev_digest != prev:
                return False
            c = entry.contract
            message = contract_bytes(c.dest, c.user, c.val, c.request_id)
            for party, signature in ((c.dest, c.sig_dest), (c.user, c.sig_user)):
                vk = self.directory.get(party)
                if vk is None or not self.suite.verify(vk, message, signature):
                    return False
            prev = crypto.digest(entry.to_line().encode())
        return True

    # -- persistence -----------------------------------------------------------

    def to_lines(self) -> list[str]:
        return [e.to_line() for e in self.entries]

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.to_lines():
                fh.write(line + "\n")

    @classmethod
    def load(cls, path: str, suite: CryptoSuite,
             directory: dict[NodeId, VerifyKey]) -> "Ledger":
        ledger = cls(suite, directory)
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                entry = LedgerEntry.from_line(line)
                ledger.entries.append(entry)
                key = (entry.contract.request_id, entry.contract.dest, entry.contract.user)
                ledger._by_contract[key] = entry.index
        return ledger

    def replay_deltas(self) -> list[TopologyDelta]:
        """Flattened topology deltas, in ledger order, for graph reconstruction."""
        out: list[TopologyDelta] = []
        for entry in self.entries:
            out.extend(entry.deltas)
        return out
