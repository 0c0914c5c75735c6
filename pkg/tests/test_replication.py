from __future__ import annotations

import random

import pytest

from conftest import admit_and_open, make_network, publish
from luce.errors import (
    AllReplicasCorrupt,
    DuplicateReplica,
    InsufficientNodes,
    ReplicationUnavailable,
    Unauthorized,
    UnknownRef,
)
from luce.ledger import NodeId, export_chain_lines
from luce.license import ActionKind, DataAction, Verdict
from luce.monitor import EventLog, LogEntry, serialize_log
from luce.replication import ReplicationService

NODES = ("providerA", "authority", "holder1", "holder2", "requesterB", "requesterC")


def make_service(k=3, nodes=NODES, seed=0) -> ReplicationService:
    return ReplicationService(rng=random.Random(seed), directory=lambda: nodes, k=k)


def make_log(requester="requesterB", dataset="ct-1", epoch=1, entries=2) -> EventLog:
    log = EventLog(requester, dataset, epoch)
    for tick in range(entries):
        log.append(LogEntry(tick, DataAction(ActionKind.READ), Verdict.ok()))
    return log


def test_replication_places_k_distinct_holders_excluding_producer():
    service = make_service()
    ref = service.replicate_log(make_log(), "requesterB", timestamp=5)
    record = service.get_record(ref.ref_id)
    assert len(record.holders) == 3
    assert len(set(record.holders)) == 3
    assert "requesterB" not in record.holders
    assert ref.requester == "requesterB" and ref.epoch == 1 and ref.created_at == 5


def test_insufficient_nodes():
    service = make_service(k=3, nodes=("providerA", "authority", "requesterB"))
    with pytest.raises(InsufficientNodes):
        service.replicate_log(make_log(), "requesterB", timestamp=0)


def test_placement_is_deterministic_per_seed():
    holders = []
    for _ in range(2):
        service = make_service(seed=42)
        ref = service.replicate_log(make_log(), "requesterB", timestamp=0)
        holders.append(service.get_record(ref.ref_id).holders)
    assert holders[0] == holders[1]


def test_retrieval_with_intact_copies():
    service = make_service()
    log = make_log(entries=3)
    ref = service.replicate_log(log, "requesterB", timestamp=0)
    retrieved = service.retrieve_log(ref.ref_id)
    assert serialize_log(retrieved) == serialize_log(log)
    assert retrieved.requester == "requesterB"


def test_retrieval_survives_up_to_k_minus_one_corruptions():
    service = make_service()
    log = make_log(entries=3)
    ref = service.replicate_log(log, "requesterB", timestamp=0)
    record = service.get_record(ref.ref_id)
    for holder in record.holders[:2]:
        service.corrupt_copy(ref.ref_id, holder, b"garbage")
    retrieved = service.retrieve_log(ref.ref_id)
    assert serialize_log(retrieved) == serialize_log(log)


def test_all_copies_corrupt():
    service = make_service()
    ref = service.replicate_log(make_log(), "requesterB", timestamp=0)
    for holder in service.get_record(ref.ref_id).holders:
        service.corrupt_copy(ref.ref_id, holder, b"garbage")
    with pytest.raises(AllReplicasCorrupt):
        service.retrieve_log(ref.ref_id)


def test_dropped_copies_also_count_as_corrupt():
    service = make_service()
    ref = service.replicate_log(make_log(), "requesterB", timestamp=0)
    for holder in service.get_record(ref.ref_id).holders:
        service.drop_copy(ref.ref_id, holder)
    with pytest.raises(AllReplicasCorrupt):
        service.retrieve_log(ref.ref_id)


def test_unknown_ref():
    service = make_service()
    with pytest.raises(UnknownRef):
        service.retrieve_log("ref-nope")


def test_duplicate_epoch_replica_rejected():
    service = make_service()
    service.replicate_log(make_log(), "requesterB", timestamp=0)
    with pytest.raises(DuplicateReplica):
        service.replicate_log(make_log(), "requesterB", timestamp=1)
    # same requester, next epoch: fine
    service.replicate_log(make_log(epoch=2), "requesterB", timestamp=1)


def test_unavailable_service():
    service = make_service()
    service.set_available(False)
    with pytest.raises(ReplicationUnavailable):
        service.replicate_log(make_log(), "requesterB", timestamp=0)


def test_audit_requires_authority():
    service = make_service()
    ref = service.replicate_log(make_log(), "requesterB", timestamp=0)
    authority = NodeId("authority", "authority", "k")
    rows = service.audit_replicas(authority)
    assert len(rows) == 1 and rows[0].intact
    service.corrupt_copy(ref.ref_id, service.get_record(ref.ref_id).holders[0], b"x")
    rows = service.audit_replicas(authority)
    assert not rows[0].intact
    with pytest.raises(Unauthorized):
        service.audit_replicas(NodeId("requesterB", "requester", "k"))


def test_audit_empty_map():
    service = make_service()
    assert service.audit_replicas(NodeId("authority", "authority", "k")) == ()


def test_replicas_never_stored_in_blocks():
    sim = make_network()
    publish(sim, "d1", license_code=63, period=5)
    handle = admit_and_open(sim, "requesterB", "d1")
    handle.perform_action(DataAction(ActionKind.REPRODUCE), now=1)
    handle.perform_action(DataAction(ActionKind.DISTRIBUTE, True, True), now=2)
    sim.tick(5)
    sim.flush()
    block_text = "\n".join(export_chain_lines(sim.ledger.chain))
    for record in sim.replication.records.values():
        for data in record.copies.values():
            assert data  # the epoch had entries, so the log is non-empty
            assert data.decode("utf-8") not in block_text
        assert record.log_hash in block_text  # only the hash is on-chain
