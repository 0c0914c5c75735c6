from __future__ import annotations

import pytest

from conftest import admit, admit_and_open, make_network, make_profile, publish
from luce.contract import RequesterState
from luce.errors import PartialFailure, SchemaMismatch, UnknownSubject
from luce.gdpr import PurposeTag, access_report, check_purpose_compatibility
from luce.license import ActionKind, DataAction


@pytest.fixture
def net():
    sim = make_network(requesters=("requesterB", "requesterC"))
    publish(sim, "d1", license_code=63, period=10, records=3)
    return sim


def module_of(sim, provider="providerA"):
    return sim.nodes[provider].modification


# -- purpose compatibility -----------------------------------------------------


def test_purpose_allowed_for_personal_data():
    profile = make_profile("d", "p", purposes=(PurposeTag("general-research"),), personal=True)
    assert check_purpose_compatibility(PurposeTag("general-research"), profile)


def test_purpose_denied_for_personal_data():
    profile = make_profile("d", "p", purposes=(PurposeTag("general-research"),), personal=True)
    assert not check_purpose_compatibility(PurposeTag("commercial"), profile)


def test_purpose_recorded_but_not_gating_without_personal_data():
    profile = make_profile("d", "p", purposes=(PurposeTag("general-research"),), personal=False)
    assert check_purpose_compatibility(PurposeTag("commercial"), profile)


# -- access reports ---------------------------------------------------------------


def test_access_report_names_requesters_and_purposes(net):
    admit(net, "requesterB", "d1", purpose=PurposeTag("general-research", "replication"))
    vault = net.nodes["providerA"].vault
    report = access_report(net.engine, net.pages, vault, "providerA", "s1")
    assert report.subject_id == "s1"
    assert len(report.sections) == 1
    section = report.sections[0]
    assert section.dataset_id == "d1"
    assert [r.requester for r in section.requesters] == ["requesterB"]
    assert section.requesters[0].purpose_tag == "general-research"
    assert section.requesters[0].use_info["identity"] == "requesterB"
    assert section.transfers[0][0] == "requesterB"


def test_access_report_unknown_subject(net):
    vault = net.nodes["providerA"].vault
    with pytest.raises(UnknownSubject):
        access_report(net.engine, net.pages, vault, "providerA", "s99")


def test_access_report_two_datasets_two_sections(net):
    publish(net, "d2", license_code=63, period=10, records=3)
    vault = net.nodes["providerA"].vault
    report = access_report(net.engine, net.pages, vault, "providerA", "s1")
    assert [s.dataset_id for s in report.sections] == ["d1", "d2"]


def test_access_report_matches_chain_admissions(net):
    admit(net, "requesterB", "d1")
    admit(net, "requesterC", "d1")
    net.flush()
    vault = net.nodes["providerA"].vault
    report = access_report(net.engine, net.pages, vault, "providerA", "s1")
    named = {r.requester for s in report.sections for r in s.requesters}
    # the authority (a full node) can independently recover the same set
    address = net.pages.get("d1").contract_address
    on_chain = {tx.sender for tx in net.ledger.committed_transactions()
                if tx.function_name == "addDataRequester" and tx.contract_address == address}
    assert named == on_chain == {"requesterB", "requesterC"}


# -- erasure -------------------------------------------------------------------------


def test_erasure_roundtrip_with_two_requesters(net):
    admit_and_open(net, "requesterB", "d1")
    admit_and_open(net, "requesterC", "d1")
    anon = net.nodes["providerA"].vault.lookup_subject("s1")[0][1]
    proof = module_of(net).request_erasure("s1", now=net.clock)
    net.flush()
    assert len(proof.sections) == 1
    section = proof.sections[0]
    assert section.anon_id == anon
    assert [r for r, _ in section.requester_tx_ids] == ["requesterB", "requesterC"]
    for _, tx_id in section.requester_tx_ids:
        tx = net.ledger.get_transaction(tx_id)
        assert tx.function_name == "modificationConfirmed"
        assert tx.payload["anonId"] == anon and tx.payload["opKind"] == "erase"
    provider_tx = net.ledger.get_transaction(section.provider_tx_id)
    assert provider_tx.payload["copy"] == "provider"
    assert net.scan_for_record(anon) == []


def test_second_erasure_fails_unknown_subject(net):
    admit_and_open(net, "requesterB", "d1")
    module_of(net).request_erasure("s1", now=0)
    with pytest.raises(UnknownSubject):
        module_of(net).request_erasure("s1", now=1)


def test_erasure_with_no_requesters(net):
    proof = module_of(net).request_erasure("s2", now=0)
    assert proof.sections[0].requester_tx_ids == ()
    assert proof.sections[0].provider_tx_id
    net.flush()
    anon = proof.sections[0].anon_id
    assert net.scan_for_record(anon) == []


def test_erasure_covers_requester_without_copy(net):
    admit(net, "requesterB", "d1")  # admitted but never opened
    proof = module_of(net).request_erasure("s1", now=0)
    assert [r for r, _ in proof.sections[0].requester_tx_ids] == ["requesterB"]


def test_erasure_spans_multiple_datasets(net):
    publish(net, "d2", license_code=63, period=10, records=2)
    admit_and_open(net, "requesterB", "d1")
    admit_and_open(net, "requesterC", "d2")
    proof = module_of(net).request_erasure("s1", now=0)
    assert [s.dataset_id for s in proof.sections] == ["d1", "d2"]
    net.flush()
    for section in proof.sections:
        assert net.scan_for_record(section.anon_id) == []


# -- rectification ----------------------------------------------------------------------


def test_rectification_updates_all_copies(net):
    handle_b = admit_and_open(net, "requesterB", "d1")
    handle_c = admit_and_open(net, "requesterC", "d1")
    anon = net.nodes["providerA"].vault.lookup_subject("s2")[0][1]
    proof = module_of(net).request_rectification("s2", ("age:40", "city:utrecht"), now=0)
    assert len(proof.sections[0].requester_tx_ids) == 2
    for handle in (handle_b, handle_c):
        rows = {r.anon_id: r.attributes for r in handle.read_records(now=1)}
        assert rows[anon] == ("age:40", "city:utrecht")
    provider_records = net.nodes["providerA"].vault.datasets["d1"].records
    assert provider_records[anon].attributes == ("age:40", "city:utrecht")


def test_rectification_reaches_revoked_sealed_copy(net):
    handle = admit_and_open(net, "requesterB", "d1")
    handle.perform_action(DataAction(ActionKind.COMMERCIAL_USE), now=1)
    net.tick(10)  # boundary: non-compliant -> revoked, handle sealed
    assert handle.sealed
    record = net.engine.contracts[handle.address].requesters["requesterB"]
    assert record.state is RequesterState.REVOKED
    anon = net.nodes["providerA"].vault.lookup_subject("s1")[0][1]
    module_of(net).request_rectification("s1", ("fixed1", "fixed2"), now=net.clock)
    assert handle.holds_record(anon)
    assert handle._records[anon].attributes == ("fixed1", "fixed2")


def test_rectification_schema_mismatch(net):
    with pytest.raises(SchemaMismatch):
        module_of(net).request_rectification("s1", ("only-one",), now=0)


def test_rectification_keeps_subject_mapping(net):
    module_of(net).request_rectification("s1", ("a", "b"), now=0)
    vault = net.nodes["providerA"].vault
    report = access_report(net.engine, net.pages, vault, "providerA", "s1")
    assert report.subject_id == "s1"  # still mapped; a later erase must work
    module_of(net).request_erasure("s1", now=1)


# -- unreachable nodes -------------------------------------------------------------------


def test_offline_requester_defers_proof(net):
    admit_and_open(net, "requesterB", "d1")
    admit_and_open(net, "requesterC", "d1")
    net.set_online("requesterC", False)
    anon = net.nodes["providerA"].vault.lookup_subject("s1")[0][1]
    with pytest.raises(PartialFailure) as exc_info:
        module_of(net).request_erasure("s1", now=net.clock)
    assert exc_info.value.unreached == ("requesterC",)
    # the reachable copy and the provider copy were already handled
    assert not net.nodes["requesterB"].handles["d1"].holds_record(anon)
    assert anon not in net.nodes["providerA"].vault.datasets["d1"].records
    assert net.completed_proofs() == []
    # mapping survives until the proof completes
    assert net.nodes["providerA"].vault.lookup_subject("s1")

    net.set_online("requesterC", True)
    net.tick(1)  # redelivery happens on the next tick
    proofs = net.completed_proofs()
    assert len(proofs) == 1
    assert [r for r, _ in proofs[0].sections[0].requester_tx_ids] == ["requesterB", "requesterC"]
    net.flush()
    assert net.scan_for_record(anon) == []
    with pytest.raises(UnknownSubject):
        module_of(net).request_erasure("s1", now=net.clock)
