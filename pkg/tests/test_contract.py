from __future__ import annotations

import pytest

from conftest import admit, admit_and_open, make_network, publish
from luce.contract import (
    AccessToken,
    ComplianceReport,
    RequesterState,
    RevokedNotice,
    replay_contracts,
)
from luce.errors import (
    AlreadyRegistered,
    DuplicateReport,
    InvalidLicenseCode,
    LicenseMismatch,
    NoReportForEpoch,
    NotRegistered,
    Revoked,
    TokenAlreadyIssued,
    Unauthorized,
    UnknownContract,
    UnknownSender,
    WrongEpoch,
)


@pytest.fixture
def net():
    sim = make_network(requesters=("requesterB", "requesterC"))
    publish(sim, "d1", license_code=63, period=10, records=3)
    return sim


def address_of(sim, dataset="d1"):
    return sim.pages.get(dataset).contract_address


def report_for(sim, requester, dataset="d1", epoch=1, compliant=True):
    return ComplianceReport(requester, epoch, compliant, f"ref-{requester}-{epoch}", "0" * 64)


# -- publication ---------------------------------------------------------------


def test_publish_commits_transaction(net):
    net.flush()
    txs = [tx for tx in net.ledger.committed_transactions()
           if tx.function_name == "publishedDataset"]
    assert len(txs) == 1
    assert txs[0].payload["license"] == 63
    assert txs[0].payload["period"] == 10
    assert txs[0].contract_address is None  # creation carries no address field


def test_publish_invalid_license_code(net):
    with pytest.raises(InvalidLicenseCode):
        net.engine.publish_dataset("providerA", "x", "repo://x", 64, 10)
    with pytest.raises(InvalidLicenseCode):
        net.engine.publish_dataset("providerA", "x", "repo://x", 300, 10)


def test_publish_twice_yields_distinct_contracts(net):
    a1 = net.engine.publish_dataset("providerA", "same", "repo://same", 63, 10)
    a2 = net.engine.publish_dataset("providerA", "same", "repo://same", 63, 10)
    assert a1 != a2
    assert a1 in net.engine.contracts and a2 in net.engine.contracts


def test_publish_requires_provider_role(net):
    with pytest.raises(Unauthorized):
        net.engine.publish_dataset("requesterB", "x", "repo://x", 63, 10)
    with pytest.raises(UnknownSender):
        net.engine.publish_dataset("nobody", "x", "repo://x", 63, 10)


# -- admission -------------------------------------------------------------------


def test_admission_exact_license_match(net):
    admission = admit(net, "requesterB", "d1")
    record = net.engine.contracts[admission.address].requesters["requesterB"]
    assert record.state is RequesterState.ACTIVE
    assert record.epoch == 1
    assert admission.download_token
    assert admission.link.startswith("repo://")


def test_admission_license_mismatch(net):
    with pytest.raises(LicenseMismatch):
        admit(net, "requesterB", "d1", offered_license=7)


def test_admission_twice_rejected(net):
    admit(net, "requesterB", "d1")
    with pytest.raises(AlreadyRegistered):
        admit(net, "requesterB", "d1")


def test_admission_on_chain(net):
    admit(net, "requesterB", "d1")
    net.flush()
    tx = next(tx for tx in net.ledger.committed_transactions()
              if tx.function_name == "addDataRequester")
    assert tx.sender == "requesterB"
    assert tx.payload["useInfo"]["identity"] == "requesterB"
    assert tx.payload["license"] == 63


# -- tokens ----------------------------------------------------------------------


def test_token_expiry_arithmetic(net):
    admit(net, "requesterB", "d1")
    token = net.engine.issue_access_token(address_of(net), "requesterB", now=0)
    assert isinstance(token, AccessToken)
    assert token.epoch == 1
    assert token.expires_at - token.issued_at == 10
    assert token.unexpired_at(9) and not token.unexpired_at(10)


def test_duplicate_token_issue_rejected(net):
    admit(net, "requesterB", "d1")
    net.engine.issue_access_token(address_of(net), "requesterB", now=0)
    with pytest.raises(TokenAlreadyIssued):
        net.engine.issue_access_token(address_of(net), "requesterB", now=0)
    # even after expiry: the epoch was consumed, renewal is the only way on
    with pytest.raises(TokenAlreadyIssued):
        net.engine.issue_access_token(address_of(net), "requesterB", now=99)


def test_issue_requires_registration(net):
    with pytest.raises(NotRegistered):
        net.engine.issue_access_token(address_of(net), "requesterC", now=0)
    with pytest.raises(UnknownContract):
        net.engine.issue_access_token("ct-nope", "requesterB", now=0)


def test_issue_after_revocation_rejected(net):
    address = address_of(net)
    admit(net, "requesterB", "d1")
    net.engine.issue_access_token(address, "requesterB", now=0)
    net.engine.record_compliance_report(address, report_for(net, "requesterB", compliant=False), now=10)
    outcome = net.engine.renew_token(address, "requesterB", now=10)
    assert isinstance(outcome, RevokedNotice)
    with pytest.raises(Revoked):
        net.engine.issue_access_token(address, "requesterB", now=10)


# -- compliance reports ------------------------------------------------------------


def test_report_recorded_and_committed(net):
    address = address_of(net)
    admit(net, "requesterB", "d1")
    tx_id = net.engine.record_compliance_report(address, report_for(net, "requesterB"), now=10)
    net.flush()
    tx = net.ledger.get_transaction(tx_id)
    assert tx.function_name == "complianceReport"
    assert tx.payload["compliant"] is True
    assert net.engine.contracts[address].requesters["requesterB"].reports[0].epoch == 1


def test_duplicate_report_rejected(net):
    address = address_of(net)
    admit(net, "requesterB", "d1")
    net.engine.record_compliance_report(address, report_for(net, "requesterB"), now=10)
    with pytest.raises(DuplicateReport):
        net.engine.record_compliance_report(address, report_for(net, "requesterB"), now=11)


def test_wrong_epoch_report_rejected(net):
    address = address_of(net)
    admit(net, "requesterB", "d1")
    with pytest.raises(WrongEpoch):
        net.engine.record_compliance_report(
            address, report_for(net, "requesterB", epoch=3), now=10)


# -- renewal ------------------------------------------------------------------------


def test_renewal_after_compliant_report(net):
    address = address_of(net)
    admit(net, "requesterB", "d1")
    first = net.engine.issue_access_token(address, "requesterB", now=0)
    net.engine.record_compliance_report(address, report_for(net, "requesterB"), now=10)
    renewed = net.engine.renew_token(address, "requesterB", now=10)
    assert isinstance(renewed, AccessToken)
    assert renewed.epoch == 2
    assert renewed.token_id != first.token_id
    assert renewed.expires_at == 20
    record = net.engine.contracts[address].requesters["requesterB"]
    assert record.state is RequesterState.ACTIVE and record.epoch == 2


def test_revocation_after_noncompliant_report(net):
    address = address_of(net)
    admit(net, "requesterB", "d1")
    net.engine.record_compliance_report(address, report_for(net, "requesterB", compliant=False), now=10)
    notice = net.engine.renew_token(address, "requesterB", now=10)
    assert isinstance(notice, RevokedNotice)
    assert notice.epoch == 1
    record = net.engine.contracts[address].requesters["requesterB"]
    assert record.state is RequesterState.REVOKED
    assert record.token is None
    net.flush()
    assert net.ledger.get_transaction(notice.tx_id).payload["outcome"] == "revoked"
    with pytest.raises(Revoked):
        net.engine.renew_token(address, "requesterB", now=11)


def test_renewal_without_report_rejected(net):
    address = address_of(net)
    admit(net, "requesterB", "d1")
    with pytest.raises(NoReportForEpoch):
        net.engine.renew_token(address, "requesterB", now=10)
    with pytest.raises(NotRegistered):
        net.engine.renew_token(address, "requesterC", now=10)


def test_epoch_history_strictly_increasing(net):
    address = address_of(net)
    admit(net, "requesterB", "d1")
    for epoch in range(1, 4):
        net.engine.record_compliance_report(
            address, report_for(net, "requesterB", epoch=epoch), now=epoch * 10)
        net.engine.renew_token(address, "requesterB", now=epoch * 10)
    assert net.engine.epoch_history[(address, "requesterB")] == [1, 2, 3, 4]


# -- queries --------------------------------------------------------------------------


def test_get_requesters_includes_revoked(net):
    address = address_of(net)
    admit(net, "requesterB", "d1")
    admit(net, "requesterC", "d1")
    net.engine.record_compliance_report(address, report_for(net, "requesterC", compliant=False), now=10)
    net.engine.renew_token(address, "requesterC", now=10)
    statuses = net.engine.get_requesters(address, "providerA")
    assert [(s.requester, s.state) for s in statuses] == [
        ("requesterB", RequesterState.ACTIVE),
        ("requesterC", RequesterState.REVOKED),
    ]


def test_get_requesters_authorization(net):
    address = address_of(net)
    assert net.engine.get_requesters(address, "authority") == ()
    with pytest.raises(Unauthorized):
        net.engine.get_requesters(address, "requesterB")


def test_read_usage_info_contents_and_authorization(net):
    address = address_of(net)
    admit(net, "requesterB", "d1")
    usage = net.engine.read_usage_info(address, "providerA")
    assert usage.license_code == 63
    assert usage.requesters[0].requester == "requesterB"
    assert usage.requesters[0].use_info["institution"] == "requesterB-institute"
    assert net.engine.read_usage_info(address, "authority").address == address
    with pytest.raises(Unauthorized):
        net.engine.read_usage_info(address, "requesterB")


def test_fresh_contract_usage_has_no_requesters(net):
    usage = net.engine.read_usage_info(address_of(net), "providerA")
    assert usage.requesters == ()


# -- modification confirmations ----------------------------------------------------


def test_modification_confirmation_roundtrip(net):
    address = address_of(net)
    admit(net, "requesterB", "d1")
    tx_id = net.engine.record_modification_confirmation(address, "requesterB", "anon-17", "erase")
    net.flush()
    tx = net.ledger.get_transaction(tx_id)
    assert tx.function_name == "modificationConfirmed"
    assert tx.payload == {"anonId": "anon-17", "opKind": "erase"}


def test_modification_confirmation_unknown_requester(net):
    with pytest.raises(NotRegistered):
        net.engine.record_modification_confirmation(address_of(net), "requesterC", "anon-17", "erase")


def test_rectify_after_erase_both_recorded_in_order(net):
    address = address_of(net)
    admit(net, "requesterB", "d1")
    t1 = net.engine.record_modification_confirmation(address, "requesterB", "anon-17", "erase")
    t2 = net.engine.record_modification_confirmation(address, "requesterB", "anon-17", "rectify")
    net.flush()
    record = net.engine.contracts[address].requesters["requesterB"]
    assert [(c.op_kind, c.tx_id) for c in record.confirmations] == [("erase", t1), ("rectify", t2)]
    committed = [tx.tx_id for tx in net.ledger.committed_transactions()
                 if tx.function_name == "modificationConfirmed"]
    assert committed == [t1, t2]


def test_provider_copy_confirmation(net):
    address = address_of(net)
    tx_id = net.engine.record_modification_confirmation(address, None, "anon-3", "erase")
    net.flush()
    assert net.ledger.get_transaction(tx_id).payload["copy"] == "provider"
    assert net.engine.contracts[address].provider_confirmations[0].tx_id == tx_id


# -- event sourcing -------------------------------------------------------------------


def test_replay_reconstructs_contract_state(net):
    address = address_of(net)
    admit_and_open(net, "requesterB", "d1")
    admit(net, "requesterC", "d1")
    net.engine.record_compliance_report(address, report_for(net, "requesterB"), now=10)
    net.engine.renew_token(address, "requesterB", now=10)
    net.engine.record_modification_confirmation(address, "requesterC", "anon-1", "rectify")
    net.engine.record_modification_confirmation(address, None, "anon-1", "rectify")
    net.flush()
    replayed = replay_contracts(net.ledger.chain)
    assert replayed == net.engine.contracts
    rebuilt = replayed[address].requesters["requesterB"]
    assert rebuilt.epoch == 2 and rebuilt.token.epoch == 2


def test_replay_of_empty_chain_is_empty(net):
    sim = make_network(seed=99)
    sim.flush()
    assert replay_contracts(sim.ledger.chain) == {}
