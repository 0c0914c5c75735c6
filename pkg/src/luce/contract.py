"""Per-dataset contract state machine, event-sourced from the ledger.

Every state change is carried by exactly one committed transaction, and all
mutations — live or replayed — go through the same `apply_transaction`
transition, so rebuilding a contract from the chain reproduces the live
in-memory state field for field.

Transaction payload field names are part of the wire format (see README):
description, link, license, period, address, datasetId, purpose,
purposeDetail, useInfo, downloadToken, tokenId, epoch, issuedAt, expiresAt,
prevEpoch, outcome, compliant, logRef, logHash, anonId, opKind, copy.
"""

from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum

from .errors import (
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
from .ledger import Chain, Clock, IdMint, Ledger, Transaction, make_transaction
from .license import is_valid_code


class RequesterState(str, Enum):
    AGREED = "agreed"
    ACTIVE = "active"
    REVOKED = "revoked"


@dataclass(frozen=True, slots=True)
class AccessToken:
    token_id: str
    requester: str
    dataset: str
    epoch: int
    issued_at: int
    expires_at: int

    def unexpired_at(self, now: int) -> bool:
        return now < self.expires_at


@dataclass(frozen=True, slots=True)
class ComplianceReport:
    requester: str
    epoch: int
    compliant: bool
    log_ref: str
    log_hash: str


@dataclass(frozen=True, slots=True)
class ModificationConfirmation:
    anon_id: str
    op_kind: str
    tx_id: str
    recorded_at: int


@dataclass(frozen=True, slots=True)
class RevokedNotice:
    requester: str
    dataset: str
    epoch: int
    tx_id: str


@dataclass(frozen=True, slots=True)
class AdmissionGrant:
    address: str
    download_token: str
    link: str


@dataclass(slots=True)
class RequesterRecord:
    requester: str
    agreed_license: int
    purpose_tag: str
    purpose_detail: str
    use_info: dict
    state: RequesterState
    epoch: int
    admitted_at: int
    download_token: str
    token: AccessToken | None = None
    reports: list[ComplianceReport] = field(default_factory=list)
    confirmations: list[ModificationConfirmation] = field(default_factory=list)

    def report_for(self, epoch: int) -> ComplianceReport | None:
        for report in self.reports:
            if report.epoch == epoch:
                return report
        return None


@dataclass(slots=True)
class DatasetContract:
    address: str
    provider: str
    dataset_id: str | None
    description: str
    link: str
    license_code: int
    period_T: int
    published_at: int
    requesters: dict[str, RequesterRecord] = field(default_factory=dict)
    provider_confirmations: list[ModificationConfirmation] = field(default_factory=list)


@dataclass(frozen=True, slots=True)
class RequesterStatus:
    requester: str
    state: RequesterState
    epoch: int


@dataclass(frozen=True, slots=True)
class RequesterUsage:
    requester: str
    purpose_tag: str
    purpose_detail: str
    use_info: dict
    state: RequesterState
    epoch: int
    admitted_at: int
    reports: tuple[ComplianceReport, ...]
    confirmations: tuple[ModificationConfirmation, ...]


@dataclass(frozen=True, slots=True)
class UsageInfo:
    address: str
    dataset_id: str | None
    provider: str
    description: str
    link: str
    license_code: int
    period_T: int
    published_at: int
    requesters: tuple[RequesterUsage, ...]


# -- event-sourced transitions ----------------------------------------------


def apply_transaction(contracts: dict[str, DatasetContract], tx: Transaction) -> None:
    """Fold one committed transaction into the contract map.

    Committed transactions are trusted: validation happened before they were
    submitted, so the transitions here are unconditional.
    """
    p = tx.payload
    name = tx.function_name
    if name == "publishedDataset":
        contracts[p["address"]] = DatasetContract(
            address=p["address"],
            provider=tx.sender,
            dataset_id=p["datasetId"],
            description=p["description"],
            link=p["link"],
            license_code=p["license"],
            period_T=p["period"],
            published_at=tx.timestamp,
        )
        return
    contract = contracts[tx.contract_address]
    if name == "addDataRequester":
        contract.requesters[tx.sender] = RequesterRecord(
            requester=tx.sender,
            agreed_license=p["license"],
            purpose_tag=p["purpose"],
            purpose_detail=p["purposeDetail"],
            use_info=dict(p["useInfo"]),
            state=RequesterState.ACTIVE,
            epoch=1,
            admitted_at=tx.timestamp,
            download_token=p["downloadToken"],
        )
    elif name == "issuedToken":
        record = contract.requesters[tx.sender]
        record.token = AccessToken(p["tokenId"], tx.sender, tx.contract_address,
                                   p["epoch"], p["issuedAt"], p["expiresAt"])
    elif name == "complianceReport":
        record = contract.requesters[tx.sender]
        record.reports.append(ComplianceReport(tx.sender, p["epoch"], p["compliant"],
                                               p["logRef"], p["logHash"]))
    elif name == "renewToken":
        record = contract.requesters[tx.sender]
        if p["outcome"] == "renewed":
            record.epoch = p["epoch"]
            record.token = AccessToken(p["tokenId"], tx.sender, tx.contract_address,
                                       p["epoch"], p["issuedAt"], p["expiresAt"])
        else:
            record.state = RequesterState.REVOKED
            record.token = None
    elif name == "modificationConfirmed":
        confirmation = ModificationConfirmation(p["anonId"], p["opKind"], tx.tx_id, tx.timestamp)
        if p.get("copy") == "provider":
            contract.provider_confirmations.append(confirmation)
        else:
            contract.requesters[tx.sender].confirmations.append(confirmation)


def replay_contracts(chain: Chain) -> dict[str, DatasetContract]:
    """Rebuild every contract purely from the committed transactions."""
    contracts: dict[str, DatasetContract] = {}
    for block in chain.blocks:
        for tx in block.transactions:
            if tx.function_name in _CONTRACT_FUNCTIONS:
                apply_transaction(contracts, tx)
    return contracts


_CONTRACT_FUNCTIONS = frozenset({
    "publishedDataset", "addDataRequester", "issuedToken",
    "complianceReport", "renewToken", "modificationConfirmed",
})


def _default_mint() -> IdMint:
    counter = iter(range(10**9))

    def mint(kind: str) -> str:
        n = next(counter)
        return f"{kind}-{hashlib.sha256(f'{kind}|{n}'.encode()).hexdigest()[:12]}"

    return mint


class ContractEngine:
    """Owns the live contract map; all mutations flow through ledger txs."""

    def __init__(self, ledger: Ledger, clock: Clock, mint: IdMint | None = None):
        self.ledger = ledger
        self.clock = clock
        self.mint = mint or _default_mint()
        self.contracts: dict[str, DatasetContract] = {}
        # bookkeeping for invariant checks and report figures (not contract state)
        self.epoch_history: dict[tuple[str, str], list[int]] = defaultdict(list)
        self.report_events: list[tuple[str, str, int, bool, int]] = []
        self.revocation_events: list[tuple[str, str, int, int]] = []

    # -- helpers --

    def _submit(self, sender: str, address: str | None, function: str, payload: dict,
                timestamp: int) -> Transaction:
        node = self.ledger.nodes.get(sender)
        if node is None:
            raise UnknownSender(f"node {sender!r} is not registered")
        tx = make_transaction(node.key, self.mint("tx"), sender, address, function, payload, timestamp)
        self.ledger.submit_transaction(tx)
        apply_transaction(self.contracts, tx)
        return tx

    def get_contract(self, address: str) -> DatasetContract:
        contract = self.contracts.get(address)
        if contract is None:
            raise UnknownContract(f"no contract at address {address!r}")
        return contract

    def _record(self, address: str, requester: str) -> tuple[DatasetContract, RequesterRecord]:
        contract = self.get_contract(address)
        record = contract.requesters.get(requester)
        if record is None:
            raise NotRegistered(f"{requester!r} is not registered with contract {address!r}")
        return contract, record

    def _is_authority(self, caller: str) -> bool:
        node = self.ledger.nodes.get(caller)
        return node is not None and node.role == "authority"

    # -- operations --

    def publish_dataset(self, provider: str, description: str, link: str,
                        license_code: int, period_T: int,
                        dataset_id: str | None = None) -> str:
        node = self.ledger.nodes.get(provider)
        if node is None:
            raise UnknownSender(f"provider {provider!r} is not registered")
        if node.role != "provider":
            raise Unauthorized(f"{provider!r} has role {node.role!r}; only providers publish")
        if not is_valid_code(license_code):
            raise InvalidLicenseCode(f"code {license_code!r} is not a valid license code")
        if period_T < 1:
            raise ValueError("period_T must be a positive number of ticks")
        address = self.mint("ct")
        payload = {
            "address": address,
            "datasetId": dataset_id,
            "description": description,
            "link": link,
            "license": license_code,
            "period": period_T,
        }
        self._submit(provider, None, "publishedDataset", payload, self.clock())
        return address

    def add_data_requester(self, address: str, requester: str, offered_license: int,
                           purpose_tag: str, purpose_detail: str, use_info: dict) -> AdmissionGrant:
        contract = self.get_contract(address)
        if self.ledger.nodes.get(requester) is None:
            raise UnknownSender(f"requester {requester!r} is not registered")
        if requester in contract.requesters:
            raise AlreadyRegistered(f"{requester!r} already registered with {address!r}")
        if offered_license != contract.license_code:
            raise LicenseMismatch(
                f"offered license {offered_license} does not match contract license {contract.license_code}")
        download_token = self.mint("dl")
        payload = {
            "license": offered_license,
            "purpose": purpose_tag,
            "purposeDetail": purpose_detail,
            "useInfo": dict(use_info),
            "downloadToken": download_token,
        }
        self._submit(requester, address, "addDataRequester", payload, self.clock())
        self.epoch_history[(address, requester)].append(1)
        return AdmissionGrant(address, download_token, contract.link)

    def issue_access_token(self, address: str, requester: str, now: int) -> AccessToken:
        contract, record = self._record(address, requester)
        if record.state is RequesterState.REVOKED:
            raise Revoked(f"{requester!r} was revoked on contract {address!r}")
        if record.token is not None and record.token.epoch == record.epoch:
            raise TokenAlreadyIssued(
                f"epoch {record.epoch} already has a token; renewal is the only path forward")
        payload = {
            "tokenId": self.mint("tok"),
            "epoch": record.epoch,
            "issuedAt": now,
            "expiresAt": now + contract.period_T,
        }
        self._submit(requester, address, "issuedToken", payload, now)
        assert record.token is not None
        return record.token

    def record_compliance_report(self, address: str, report: ComplianceReport, now: int) -> str:
        contract, record = self._record(address, report.requester)
        if report.epoch != record.epoch:
            raise WrongEpoch(f"report is for epoch {report.epoch}, requester is at epoch {record.epoch}")
        if record.report_for(report.epoch) is not None:
            raise DuplicateReport(f"epoch {report.epoch} already has a compliance report")
        payload = {
            "epoch": report.epoch,
            "compliant": report.compliant,
            "logRef": report.log_ref,
            "logHash": report.log_hash,
        }
        tx = self._submit(report.requester, address, "complianceReport", payload, now)
        self.report_events.append((address, report.requester, report.epoch, report.compliant, now))
        return tx.tx_id

    def renew_token(self, address: str, requester: str, now: int) -> AccessToken | RevokedNotice:
        contract, record = self._record(address, requester)
        if record.state is RequesterState.REVOKED:
            raise Revoked(f"{requester!r} was already revoked on contract {address!r}")
        report = record.report_for(record.epoch)
        if report is None:
            raise NoReportForEpoch(f"no compliance report recorded for epoch {record.epoch}")
        prev_epoch = record.epoch
        if report.compliant:
            payload = {
                "prevEpoch": prev_epoch,
                "outcome": "renewed",
                "epoch": prev_epoch + 1,
                "tokenId": self.mint("tok"),
                "issuedAt": now,
                "expiresAt": now + contract.period_T,
            }
            self._submit(requester, address, "renewToken", payload, now)
            self.epoch_history[(address, requester)].append(record.epoch)
            assert record.token is not None
            return record.token
        payload = {"prevEpoch": prev_epoch, "outcome": "revoked"}
        tx = self._submit(requester, address, "renewToken", payload, now)
        self.revocation_events.append((address, requester, prev_epoch, now))
        return RevokedNotice(requester, address, prev_epoch, tx.tx_id)

    def get_requesters(self, address: str, caller: str) -> tuple[RequesterStatus, ...]:
        contract = self.get_contract(address)
        if caller != contract.provider and not self._is_authority(caller):
            raise Unauthorized(f"{caller!r} may not list requesters of {address!r}")
        return tuple(
            RequesterStatus(r.requester, r.state, r.epoch)
            for r in sorted(contract.requesters.values(), key=lambda r: r.requester)
        )

    def record_modification_confirmation(self, address: str, requester: str | None,
                                         anon_id: str, op_kind: str) -> str:
        contract = self.get_contract(address)
        if op_kind not in ("erase", "rectify"):
            raise ValueError(f"op_kind must be 'erase' or 'rectify', got {op_kind!r}")
        if requester is None:
            payload = {"anonId": anon_id, "opKind": op_kind, "copy": "provider"}
            tx = self._submit(contract.provider, address, "modificationConfirmed", payload, self.clock())
            return tx.tx_id
        if requester not in contract.requesters:
            raise NotRegistered(f"{requester!r} is not registered with contract {address!r}")
        payload = {"anonId": anon_id, "opKind": op_kind}
        tx = self._submit(requester, address, "modificationConfirmed", payload, self.clock())
        return tx.tx_id

    def read_usage_info(self, address: str, caller: str) -> UsageInfo:
        contract = self.get_contract(address)
        if caller != contract.provider and not self._is_authority(caller):
            raise Unauthorized(f"{caller!r} may not read usage info of {address!r}")
        return UsageInfo(
            address=contract.address,
            dataset_id=contract.dataset_id,
            provider=contract.provider,
            description=contract.description,
            link=contract.link,
            license_code=contract.license_code,
            period_T=contract.period_T,
            published_at=contract.published_at,
            requesters=tuple(
                RequesterUsage(
                    requester=r.requester,
                    purpose_tag=r.purpose_tag,
                    purpose_detail=r.purpose_detail,
                    use_info=dict(r.use_info),
                    state=r.state,
                    epoch=r.epoch,
                    admitted_at=r.admitted_at,
                    reports=tuple(r.reports),
                    confirmations=tuple(r.confirmations),
                )
                for r in sorted(contract.requesters.values(), key=lambda r: r.requester)
            ),
        )

    def token_valid(self, address: str, requester: str, token: AccessToken, now: int) -> bool:
        """A token is good iff it is the requester's current-epoch token and unexpired."""
        try:
            _, record = self._record(address, requester)
        except (UnknownContract, NotRegistered):
            return False
        return (
            record.state is RequesterState.ACTIVE
            and record.token is not None
            and record.token.token_id == token.token_id
            and record.epoch == token.epoch
            and token.unexpired_at(now)
        )

    def address_of(self, dataset_id: str) -> str | None:
        for contract in self.contracts.values():
            if contract.dataset_id == dataset_id:
                return contract.address
        return None
