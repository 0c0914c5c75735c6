"""Data-subject rights workflows: access reports, rectification, and erasure.

The provider keeps the only mapping from subjects to their anonymized record
ids (the vault). Rectify/erase fan out through the provider's modification
module to every requester copy — sealed and revoked copies included — and
every applied change is confirmed by an on-chain transaction whose id goes
into the proof handed back to the subject. Proofs are all-or-nothing: if a
requester node is unreachable, the command stays queued for redelivery and
the proof is withheld until every copy has confirmed.

Requesters admitted but not (or no longer) holding a copy confirm a no-op:
the proof must name every requester the contract knows about.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .contract import ContractEngine, RequesterUsage
from .errors import (
    DownloadTokenSpent,
    PartialFailure,
    SchemaMismatch,
    TokenMismatch,
    UnknownSubject,
)
from .monitor import DataRecord, ModificationCommand
from .registry import AdamProfile, PurposeTag, YellowPages


def check_purpose_compatibility(requested: PurposeTag, profile: AdamProfile) -> bool:
    """Gate reuse purpose against the profile's allowed purposes.

    Datasets without personal data record the purpose but do not gate on it.
    """
    if not profile.meta_conditions.contains_personal_data:
        return True
    return requested.tag in {p.tag for p in profile.permissions.allowed_purposes}


# -- provider-private state ---------------------------------------------------


@dataclass(slots=True)
class ProviderDataset:
    dataset_id: str
    address: str
    columns: tuple[str, ...]
    records: dict[str, DataRecord]
    download_grants: dict[str, tuple[str, bool]] = field(default_factory=dict)

    def register_download(self, token: str, requester: str) -> None:
        self.download_grants[token] = (requester, False)


class ProviderVault:
    """Everything only the provider may see: repository copies and the subject map."""

    def __init__(self, provider: str):
        self.provider = provider
        self.datasets: dict[str, ProviderDataset] = {}
        self._mapping: dict[str, list[tuple[str, str]]] = {}

    # subject mapping

    def map_subject(self, subject_id: str, dataset_id: str, anon_id: str) -> None:
        self._mapping.setdefault(subject_id, []).append((dataset_id, anon_id))

    def lookup_subject(self, subject_id: str) -> list[tuple[str, str]]:
        pairs = self._mapping.get(subject_id)
        if not pairs:
            raise UnknownSubject(f"no mapping held for subject {subject_id!r}")
        return sorted(pairs)

    def forget_subject(self, subject_id: str) -> None:
        self._mapping.pop(subject_id, None)

    def subjects(self) -> list[str]:
        return sorted(self._mapping)

    # repository duties (download redemption for the monitor)

    def redeem_download(self, address: str, token: str, requester: str) -> dict[str, DataRecord]:
        for dataset in self.datasets.values():
            if dataset.address != address:
                continue
            grant = dataset.download_grants.get(token)
            if grant is None:
                raise TokenMismatch(f"download token {token!r} was not issued by this repository")
            owner, spent = grant
            if owner != requester:
                raise TokenMismatch(f"download token {token!r} belongs to {owner!r}")
            if spent:
                raise DownloadTokenSpent(f"download token {token!r} was already used")
            dataset.download_grants[token] = (owner, True)
            return dict(dataset.records)
        raise TokenMismatch(f"no dataset at address {address!r} in this repository")


# -- access report (article-15 material) --------------------------------------


@dataclass(frozen=True, slots=True)
class AccessReportSection:
    dataset_id: str
    contract_address: str
    anon_id: str
    processing_purposes: tuple[str, ...]
    requesters: tuple[RequesterUsage, ...]
    transfers: tuple[tuple[str, int], ...]


@dataclass(frozen=True, slots=True)
class AccessReport:
    subject_id: str
    sections: tuple[AccessReportSection, ...]


def access_report(engine: ContractEngine, pages: YellowPages, vault: ProviderVault,
                  provider: str, subject_id: str) -> AccessReport:
    """Assemble the full disclosure for one subject across all mapped datasets."""
    pairs = vault.lookup_subject(subject_id)
    sections = []
    for dataset_id, anon_id in pairs:
        entry = pages.get(dataset_id)
        usage = engine.read_usage_info(entry.contract_address, provider)
        sections.append(AccessReportSection(
            dataset_id=dataset_id,
            contract_address=entry.contract_address,
            anon_id=anon_id,
            processing_purposes=tuple(p.tag for p in entry.profile.permissions.allowed_purposes),
            requesters=usage.requesters,
            transfers=tuple((r.requester, r.admitted_at) for r in usage.requesters),
        ))
    return AccessReport(subject_id, tuple(sections))


# -- rectification / erasure fan-out ------------------------------------------


@dataclass(frozen=True, slots=True)
class ProofSection:
    dataset_id: str
    anon_id: str
    requester_tx_ids: tuple[tuple[str, str], ...]
    provider_tx_id: str


@dataclass(frozen=True, slots=True)
class ModificationProof:
    subject_id: str
    op_kind: str
    sections: tuple[ProofSection, ...]
    completed_at: int


@dataclass(slots=True)
class _WorkItem:
    dataset_id: str
    address: str
    anon_id: str
    pending: list[str]
    collected: dict[str, str] = field(default_factory=dict)
    provider_tx: str | None = None


@dataclass(slots=True)
class _Workflow:
    subject_id: str
    op_kind: str
    new_attributes: tuple[str, ...] | None
    items: list[_WorkItem]

    def unreached(self) -> tuple[str, ...]:
        return tuple(sorted({r for item in self.items for r in item.pending}))


# deliver(address, requester, command) -> confirmation tx id, or None if the
# requester node is unreachable right now
DeliverFn = Callable[[str, str, ModificationCommand], "str | None"]


class ModificationModule:
    """Provider-owned fan-out of rectify/erase commands to every copy."""

    def __init__(self, provider: str, engine: ContractEngine, pages: YellowPages,
                 vault: ProviderVault, deliver: DeliverFn):
        self.provider = provider
        self.engine = engine
        self.pages = pages
        self.vault = vault
        self.deliver = deliver
        self.pending: list[_Workflow] = []
        self.completed: list[ModificationProof] = []

    def request_erasure(self, subject_id: str, now: int) -> ModificationProof:
        return self._request(subject_id, "erase", None, now)

    def request_rectification(self, subject_id: str, new_attributes: tuple[str, ...],
                              now: int) -> ModificationProof:
        return self._request(subject_id, "rectify", tuple(new_attributes), now)

    def _request(self, subject_id: str, op_kind: str,
                 new_attributes: tuple[str, ...] | None, now: int) -> ModificationProof:
        pairs = self.vault.lookup_subject(subject_id)
        items = []
        for dataset_id, anon_id in pairs:
            dataset = self.vault.datasets[dataset_id]
            if op_kind == "rectify" and new_attributes is not None \
                    and len(new_attributes) != len(dataset.columns):
                raise SchemaMismatch(
                    f"dataset {dataset_id!r} has {len(dataset.columns)} attribute columns, "
                    f"got {len(new_attributes)} values")
            requesters = self.engine.get_requesters(dataset.address, self.provider)
            items.append(_WorkItem(
                dataset_id=dataset_id,
                address=dataset.address,
                anon_id=anon_id,
                pending=[status.requester for status in requesters],
            ))
        workflow = _Workflow(subject_id, op_kind, new_attributes, items)
        self._dispatch(workflow, apply_provider_copy=True)
        return self._conclude(workflow, now)

    def _command(self, workflow: _Workflow, anon_id: str) -> ModificationCommand:
        return ModificationCommand(anon_id, workflow.op_kind, workflow.new_attributes)

    def _dispatch(self, workflow: _Workflow, apply_provider_copy: bool) -> None:
        for item in workflow.items:
            for requester in list(item.pending):
                tx_id = self.deliver(item.address, requester, self._command(workflow, item.anon_id))
                if tx_id is not None:
                    item.collected[requester] = tx_id
                    item.pending.remove(requester)
            if apply_provider_copy:
                dataset = self.vault.datasets[item.dataset_id]
                if workflow.op_kind == "erase":
                    dataset.records.pop(item.anon_id, None)
                else:
                    assert workflow.new_attributes is not None
                    dataset.records[item.anon_id] = DataRecord(item.anon_id, workflow.new_attributes)
                item.provider_tx = self.engine.record_modification_confirmation(
                    item.address, None, item.anon_id, workflow.op_kind)

    def _conclude(self, workflow: _Workflow, now: int) -> ModificationProof:
        unreached = workflow.unreached()
        if unreached:
            self.pending.append(workflow)
            raise PartialFailure(workflow.subject_id, unreached)
        return self._finalize(workflow, now)

    def _finalize(self, workflow: _Workflow, now: int) -> ModificationProof:
        sections = tuple(
            ProofSection(
                dataset_id=item.dataset_id,
                anon_id=item.anon_id,
                requester_tx_ids=tuple(sorted(item.collected.items())),
                provider_tx_id=item.provider_tx or "",
            )
            for item in workflow.items
        )
        proof = ModificationProof(workflow.subject_id, workflow.op_kind, sections, now)
        if workflow.op_kind == "erase":
            # rectified records still exist, so the mapping survives rectification
            self.vault.forget_subject(workflow.subject_id)
        self.completed.append(proof)
        return proof

    def retry_pending(self, now: int) -> list[ModificationProof]:
        """Redeliver queued commands; finalize workflows that completed."""
        finished = []
        still_pending = []
        for workflow in self.pending:
            self._dispatch(workflow, apply_provider_copy=False)
            if workflow.unreached():
                still_pending.append(workflow)
            else:
                finished.append(self._finalize(workflow, now))
        self.pending = still_pending
        return finished


# -- text renderings (CLI output) ----------------------------------------------


def render_access_report(report: AccessReport) -> str:
    lines = [f"access report for subject {report.subject_id}"]
    if not report.sections:
        lines.append("  (no datasets hold records of this subject)")
    for section in report.sections:
        lines.append(f"  dataset {section.dataset_id} (contract {section.contract_address})")
        lines.append(f"    record: {section.anon_id}")
        lines.append("    processing purposes: " + (", ".join(section.processing_purposes) or "(none)"))
        if not section.requesters:
            lines.append("    requesters: (none)")
        for r in section.requesters:
            state = r.state.value + (f"(epoch {r.epoch})" if r.state.value == "active" else "")
            compliance = ", ".join(
                f"epoch {rep.epoch}: {'compliant' if rep.compliant else 'violation'}" for rep in r.reports
            ) or "no reports yet"
            lines.append(f"    requester {r.requester} [{state}] purpose={r.purpose_tag}"
                         + (f" ({r.purpose_detail})" if r.purpose_detail else ""))
            lines.append(f"      use info: " + ", ".join(f"{k}={v}" for k, v in sorted(r.use_info.items())))
            lines.append(f"      compliance: {compliance}")
        if section.transfers:
            transfers = ", ".join(f"{who} at tick {when}" for who, when in section.transfers)
            lines.append(f"    transferred to: {transfers}")
    return "\n".join(lines)


def render_proof(proof: ModificationProof) -> str:
    lines = [f"{proof.op_kind} proof for subject {proof.subject_id} (completed at tick {proof.completed_at})"]
    for section in proof.sections:
        lines.append(f"  dataset {section.dataset_id}, record {section.anon_id}")
        for requester, tx_id in section.requester_tx_ids:
            lines.append(f"    {requester}: tx {tx_id}")
        lines.append(f"    provider copy: tx {section.provider_tx_id}")
    return "\n".join(lines)
