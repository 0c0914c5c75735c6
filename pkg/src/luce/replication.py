"""Event-log replication onto randomly chosen nodes, with hash-checked retrieval.

Replicas live off-chain on the holders' (simulated) disks; only the log hash
ever reaches a block. Placement uses the seeded simulation RNG, so the same
seed always picks the same holders.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Sequence

from .canonical import digest_bytes
from .errors import (
    AllReplicasCorrupt,
    DuplicateReplica,
    InsufficientNodes,
    ReplicationUnavailable,
    Unauthorized,
    UnknownRef,
)
from .ledger import IdMint, NodeId
from .monitor import EventLog, parse_log_bytes, serialize_log

DEFAULT_REPLICA_COUNT = 3


@dataclass(frozen=True, slots=True)
class ReplicaRef:
    ref_id: str
    requester: str
    epoch: int
    created_at: int


@dataclass(slots=True)
class ReplicaRecord:
    ref: ReplicaRef
    dataset: str
    log_hash: str
    holders: tuple[str, ...]
    copies: dict[str, bytes]


@dataclass(frozen=True, slots=True)
class ReplicaAuditRow:
    ref: ReplicaRef
    holders: tuple[str, ...]
    log_hash: str
    intact: bool


class ReplicationService:
    """Keeps the executable ↔ replica ↔ holder map and serves verified copies."""

    def __init__(self, rng: random.Random, directory: Callable[[], Sequence[str]],
                 k: int = DEFAULT_REPLICA_COUNT, mint: IdMint | None = None):
        if k < 1:
            raise ValueError("replica count k must be at least 1")
        self.rng = rng
        self.directory = directory
        self.k = k
        self.mint = mint or (lambda kind: f"{kind}-{rng.getrandbits(48):012x}")
        self.records: dict[str, ReplicaRecord] = {}
        self._by_key: dict[tuple[str, str, int], str] = {}
        self.available = True

    def set_available(self, available: bool) -> None:
        self.available = available

    def replicate_log(self, log: EventLog, requester: str, timestamp: int) -> ReplicaRef:
        """Store byte-identical copies of the log on k randomly chosen nodes."""
        if not self.available:
            raise ReplicationUnavailable("replication module is unreachable")
        key = (requester, log.dataset, log.epoch)
        if key in self._by_key:
            raise DuplicateReplica(f"epoch {log.epoch} of {log.dataset!r} already replicated")
        eligible = sorted(n for n in self.directory() if n != requester)
        if len(eligible) < self.k:
            raise InsufficientNodes(f"need {self.k} holders, only {len(eligible)} eligible nodes")
        holders = tuple(self.rng.sample(eligible, self.k))
        data = serialize_log(log)
        ref = ReplicaRef(self.mint("ref"), requester, log.epoch, timestamp)
        self.records[ref.ref_id] = ReplicaRecord(
            ref=ref,
            dataset=log.dataset,
            log_hash=digest_bytes(data),
            holders=holders,
            copies={holder: data for holder in holders},
        )
        self._by_key[key] = ref.ref_id
        return ref

    def get_record(self, ref_id: str) -> ReplicaRecord:
        record = self.records.get(ref_id)
        if record is None:
            raise UnknownRef(f"no replica with reference {ref_id!r}")
        return record

    def retrieve_log(self, ref_id: str) -> EventLog:
        """Return the log from the first holder whose copy still hashes correctly."""
        record = self.get_record(ref_id)
        for holder in record.holders:
            data = record.copies.get(holder)
            if data is not None and digest_bytes(data) == record.log_hash:
                return parse_log_bytes(data, record.ref.requester, record.dataset, record.ref.epoch)
        raise AllReplicasCorrupt(f"no intact copy remains for {ref_id!r}")

    def corrupt_copy(self, ref_id: str, holder: str, data: bytes) -> None:
        """Overwrite one holder's copy (test/fault-injection hook)."""
        record = self.get_record(ref_id)
        if holder not in record.copies:
            raise UnknownRef(f"{holder!r} does not hold a copy of {ref_id!r}")
        record.copies[holder] = data

    def drop_copy(self, ref_id: str, holder: str) -> None:
        record = self.get_record(ref_id)
        record.copies.pop(holder, None)

    def audit_replicas(self, caller: NodeId) -> tuple[ReplicaAuditRow, ...]:
        """Full map dump with per-replica integrity; supervisory-authority only."""
        if caller.role != "authority":
            raise Unauthorized(f"{caller.id!r} ({caller.role}) may not audit the replica map")
        rows = []
        for ref_id in sorted(self.records):
            record = self.records[ref_id]
            intact = all(
                holder in record.copies and digest_bytes(record.copies[holder]) == record.log_hash
                for holder in record.holders
            )
            rows.append(ReplicaAuditRow(record.ref, record.holders, record.log_hash, intact))
        return tuple(rows)
