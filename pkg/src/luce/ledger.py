"""Append-only, hash-linked transaction ledger shared by all simulated nodes.

Blocks chain by SHA-256 over the canonical serialization of their contents;
transactions carry a keyed-hash signature verifiable against the sender's
registered key. Block validation is pluggable; the default rule is
round-robin among the full nodes (providers and the authority), which stands
in for mining without changing any on-chain observable.

The export format is one block per line as compact JSON with sorted keys, so
two chains can be diffed byte for byte (see README for the field list).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

from .canonical import ZERO_DIGEST, digest, digest_bytes, sign, verify_signature
from .errors import (
    DuplicateTxId,
    EmptyPending,
    InvalidSignature,
    NotCurrentValidator,
    NotFound,
    UnknownSender,
)

FULL_NODE_ROLES = frozenset({"provider", "authority"})
NODE_ROLES = frozenset({"provider", "requester", "authority", "replica-holder"})


@dataclass(frozen=True, slots=True)
class NodeId:
    """Network identity: opaque id, role, and signature-verification key."""

    id: str
    role: str
    key: str

    def __post_init__(self) -> None:
        if self.role not in NODE_ROLES:
            raise ValueError(f"unknown node role {self.role!r}")


@dataclass(frozen=True, slots=True)
class Transaction:
    tx_id: str
    sender: str
    contract_address: str | None
    function_name: str
    payload: Mapping
    timestamp: int
    signature: str

    def signing_material(self):
        return [
            self.tx_id,
            self.sender,
            self.contract_address,
            self.function_name,
            dict(self.payload),
            self.timestamp,
        ]


def make_transaction(
    key: str,
    tx_id: str,
    sender: str,
    contract_address: str | None,
    function_name: str,
    payload: Mapping,
    timestamp: int,
) -> Transaction:
    """Build a transaction signed with the sender's key."""
    unsigned = Transaction(tx_id, sender, contract_address, function_name, dict(payload), timestamp, "")
    return Transaction(
        tx_id, sender, contract_address, function_name, dict(payload), timestamp,
        sign(key, unsigned.signing_material()),
    )


@dataclass(frozen=True, slots=True)
class Block:
    index: int
    prev_hash: str
    timestamp: int
    transactions: tuple[Transaction, ...]
    block_hash: str


def compute_block_hash(index: int, prev_hash: str, timestamp: int, transactions: Sequence[Transaction]) -> str:
    tx_material = [
        [tx.tx_id, tx.sender, tx.contract_address, tx.function_name, dict(tx.payload), tx.timestamp, tx.signature]
        for tx in transactions
    ]
    return digest([index, prev_hash, timestamp, tx_material])


def make_block(index: int, prev_hash: str, timestamp: int, transactions: Sequence[Transaction]) -> Block:
    txs = tuple(transactions)
    return Block(index, prev_hash, timestamp, txs, compute_block_hash(index, prev_hash, timestamp, txs))


@dataclass(slots=True)
class Chain:
    blocks: list[Block] = field(default_factory=list)
    pending: list[Transaction] = field(default_factory=list)


@dataclass(frozen=True, slots=True)
class ChainFault:
    block_index: int | None
    tx_id: str | None
    code: str
    detail: str


@dataclass(frozen=True, slots=True)
class VerificationReport:
    ok: bool
    faults: tuple[ChainFault, ...]

    @property
    def first_fault(self) -> ChainFault | None:
        return self.faults[0] if self.faults else None


class ValidatorRule(Protocol):
    """Selects the node allowed to form the block for a given round."""

    def select(self, round_index: int, full_nodes: Sequence[str]) -> str: ...


class RoundRobinValidators:
    """Default rule: rotate through the sorted full-node ids."""

    def select(self, round_index: int, full_nodes: Sequence[str]) -> str:
        if not full_nodes:
            raise UnknownSender("no full nodes registered to validate blocks")
        ordered = sorted(full_nodes)
        return ordered[round_index % len(ordered)]


class Ledger:
    """Shared chain plus the node registry used to verify signatures."""

    def __init__(self, validator_rule: ValidatorRule | None = None):
        self.chain = Chain()
        self.chain.blocks.append(make_block(0, ZERO_DIGEST, 0, ()))
        self.nodes: dict[str, NodeId] = {}
        self.validator_rule: ValidatorRule = validator_rule or RoundRobinValidators()
        self._tx_index: dict[str, tuple[int, Transaction]] = {}
        self._pending_ids: set[str] = set()

    # -- registry --

    def register_node(self, node: NodeId) -> NodeId:
        if node.id in self.nodes:
            raise ValueError(f"node id {node.id!r} already registered")
        self.nodes[node.id] = node
        return node

    def full_nodes(self) -> list[str]:
        return sorted(n.id for n in self.nodes.values() if n.role in FULL_NODE_ROLES)

    # -- write path --

    def submit_transaction(self, tx: Transaction) -> str:
        node = self.nodes.get(tx.sender)
        if node is None:
            raise UnknownSender(f"sender {tx.sender!r} is not a registered node")
        if not verify_signature(node.key, tx.signing_material(), tx.signature):
            raise InvalidSignature(f"signature check failed for tx {tx.tx_id}")
        if tx.tx_id in self._tx_index or tx.tx_id in self._pending_ids:
            raise DuplicateTxId(f"tx id {tx.tx_id!r} already submitted")
        self.chain.pending.append(tx)
        self._pending_ids.add(tx.tx_id)
        return tx.tx_id

    def next_validator(self) -> str:
        round_index = len(self.chain.blocks) - 1
        return self.validator_rule.select(round_index, self.full_nodes())

    def form_block(self, caller: str, now: int) -> Block:
        if not self.chain.pending:
            raise EmptyPending("no pending transactions")
        validator = self.next_validator()
        if caller != validator:
            raise NotCurrentValidator(f"{caller!r} is not this round's validator ({validator!r})")
        prev = self.chain.blocks[-1]
        block = make_block(prev.index + 1, prev.block_hash, now, self.chain.pending)
        self.chain.blocks.append(block)
        for tx in block.transactions:
            self._tx_index[tx.tx_id] = (block.index, tx)
        self.chain.pending = []
        self._pending_ids.clear()
        return block

    # -- read path --

    def get_transaction(self, tx_id: str) -> Transaction:
        entry = self._tx_index.get(tx_id)
        if entry is None:
            raise NotFound(f"no committed transaction with id {tx_id!r}")
        return entry[1]

    def committed_transactions(self) -> list[Transaction]:
        return [tx for block in self.chain.blocks for tx in block.transactions]

    def verify(self) -> VerificationReport:
        keys = {node_id: node.key for node_id, node in self.nodes.items()}
        return verify_chain(self.chain, keys)


def verify_chain(chain: Chain, keys: Mapping[str, str] | None = None) -> VerificationReport:
    """Check every block and chain invariant; report all faults in scan order.

    Signature checks run only when a key registry is supplied; structural
    tampering is caught without it because block hashes cover every
    transaction field including the signature.
    """
    faults: list[ChainFault] = []
    seen_tx: dict[str, int] = {}
    for position, block in enumerate(chain.blocks):
        if block.index != position:
            faults.append(ChainFault(position, None, "index-mismatch",
                                     f"block at position {position} carries index {block.index}"))
        expected_prev = ZERO_DIGEST if position == 0 else chain.blocks[position - 1].block_hash
        if block.prev_hash != expected_prev:
            faults.append(ChainFault(position, None, "prev-hash-mismatch",
                                     f"block {position} does not link to its predecessor"))
        recomputed = compute_block_hash(block.index, block.prev_hash, block.timestamp, block.transactions)
        if recomputed != block.block_hash:
            faults.append(ChainFault(position, None, "block-hash-mismatch",
                                     f"stored hash does not recompute for block {position}"))
        if position > 0 and not block.transactions:
            faults.append(ChainFault(position, None, "empty-block",
                                     f"non-genesis block {position} has no transactions"))
        for tx in block.transactions:
            if tx.tx_id in seen_tx:
                faults.append(ChainFault(position, tx.tx_id, "duplicate-tx",
                                         f"tx {tx.tx_id} already committed in block {seen_tx[tx.tx_id]}"))
            seen_tx[tx.tx_id] = position
            if keys is not None:
                key = keys.get(tx.sender)
                if key is None:
                    faults.append(ChainFault(position, tx.tx_id, "unknown-sender",
                                             f"tx {tx.tx_id} sender {tx.sender!r} not registered"))
                elif not verify_signature(key, tx.signing_material(), tx.signature):
                    faults.append(ChainFault(position, tx.tx_id, "bad-signature",
                                             f"tx {tx.tx_id} signature does not verify"))
    return VerificationReport(ok=not faults, faults=tuple(faults))


# -- export / import -------------------------------------------------------


def _tx_record(tx: Transaction) -> dict:
    return {
        "txId": tx.tx_id,
        "sender": tx.sender,
        "contractAddress": tx.contract_address,
        "functionName": tx.function_name,
        "payload": tx.payload if isinstance(tx.payload, dict) else dict(tx.payload),
        "timestamp": tx.timestamp,
        "signature": tx.signature,
    }


def _block_record(block: Block) -> dict:
    return {
        "index": block.index,
        "prevHash": block.prev_hash,
        "timestamp": block.timestamp,
        "blockHash": block.block_hash,
        "transactions": [_tx_record(tx) for tx in block.transactions],
    }


def export_chain_lines(chain: Chain) -> list[str]:
    """One block per line, compact JSON, keys sorted: the diffable wire form."""
    return [json.dumps(_block_record(b), sort_keys=True, separators=(",", ":")) for b in chain.blocks]


def import_chain_lines(lines: Sequence[str]) -> Chain:
    """Parse an exported chain without validating it (use verify_chain for that)."""
    chain = Chain()
    for line in lines:
        rec = json.loads(line)
        txs = tuple(
            Transaction(
                t["txId"], t["sender"], t["contractAddress"], t["functionName"],
                t["payload"], t["timestamp"], t["signature"],
            )
            for t in rec["transactions"]
        )
        chain.blocks.append(Block(rec["index"], rec["prevHash"], rec["timestamp"], txs, rec["blockHash"]))
    return chain


def chain_digest(chain: Chain) -> str:
    """Digest of the exported form; equal digests mean byte-identical chains."""
    payload = "\n".join(export_chain_lines(chain)) + "\n"
    return digest_bytes(payload.encode("utf-8"))


Clock = Callable[[], int]
IdMint = Callable[[str], str]
