"""Requester-side dataset wrapper: gated access, action logging, updates.

A DatasetHandle models the sealed executable a requester downloads: records
stay unreadable until a valid access token unseals it, every declared action
is checked against the license and logged, and at each period boundary the
log is replicated, hashed, reported on-chain, and the token renewal decided.

Event-log wire format, one entry per line (hashed and replicated byte-exactly):

    tick|action_kind|n<0|1>a<0|1>d<code or ->|verdict

where verdict is ``ok``, ``attested``, or ``violation:<reason>``.

Dataset files are CSV with a header row whose first column is the anonymized
record id.

Two monitoring modes exist: ``full`` checks every action against the license;
``attest`` skips per-action checking and self-declares compliance each epoch
(the log then records what was done, marked "attested").
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .canonical import digest_bytes
from .contract import AccessToken, ComplianceReport, ContractEngine, RevokedNotice
from .errors import (
    ReplicationUnavailable,
    Sealed,
    TokenExpired,
    TokenMismatch,
    UnauthorizedOrigin,
    UnknownAnonId,
)
from .license import (
    ActionKind,
    DataAction,
    Verdict,
    VERDICT_VIOLATION,
    check_action,
    decode_license,
    validate_action,
)


@dataclass(frozen=True, slots=True)
class DataRecord:
    anon_id: str
    attributes: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class LogEntry:
    tick: int
    action: DataAction
    verdict: Verdict


@dataclass(slots=True)
class EventLog:
    requester: str
    dataset: str
    epoch: int
    entries: list[LogEntry] = field(default_factory=list)

    def append(self, entry: LogEntry) -> None:
        if self.entries and entry.tick < self.entries[-1].tick:
            raise ValueError("event-log entries must be appended in tick order")
        self.entries.append(entry)

    def has_violation(self) -> bool:
        return any(e.verdict.status == VERDICT_VIOLATION for e in self.entries)


def _verdict_label(verdict: Verdict) -> str:
    if verdict.status == VERDICT_VIOLATION:
        return f"violation:{verdict.reason}"
    return verdict.status


def format_entry(entry: LogEntry) -> str:
    a = entry.action
    deriv = "-" if a.derivative_license is None else str(a.derivative_license)
    flags = f"n{int(a.carried_notice)}a{int(a.carried_attribution)}d{deriv}"
    return f"{entry.tick}|{a.kind.value}|{flags}|{_verdict_label(entry.verdict)}"


def serialize_log(log: EventLog) -> bytes:
    return "\n".join(format_entry(e) for e in log.entries).encode("utf-8")


def log_digest(log: EventLog) -> str:
    return digest_bytes(serialize_log(log))


def parse_log_bytes(data: bytes, requester: str, dataset: str, epoch: int) -> EventLog:
    log = EventLog(requester, dataset, epoch)
    text = data.decode("utf-8")
    if not text:
        return log
    for line in text.split("\n"):
        tick_s, kind_s, flags, label = line.split("|", 3)
        deriv = flags[flags.index("d") + 1:]
        action = DataAction(
            kind=ActionKind(kind_s),
            carried_notice=flags[1] == "1",
            carried_attribution=flags[3] == "1",
            derivative_license=None if deriv == "-" else int(deriv),
        )
        if label.startswith("violation:"):
            verdict = Verdict.violation(label[len("violation:"):])
        else:
            verdict = Verdict(label, "self-declared" if label == "attested" else "")
        log.append(LogEntry(int(tick_s), action, verdict))
    return log


@dataclass(frozen=True, slots=True)
class ModificationCommand:
    anon_id: str
    op_kind: str  # "erase" | "rectify"
    new_attributes: tuple[str, ...] | None = None


# -- CSV helpers -------------------------------------------------------------


def load_csv(text: str) -> tuple[tuple[str, ...], dict[str, DataRecord]]:
    """Parse dataset CSV text into (attribute column names, records by anon id)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or len(rows[0]) < 2:
        raise ValueError("dataset CSV needs a header row with an anon-id column plus attributes")
    columns = tuple(rows[0][1:])
    records: dict[str, DataRecord] = {}
    for row in rows[1:]:
        if not row:
            continue
        anon_id, attributes = row[0], tuple(row[1:])
        if anon_id in records:
            raise ValueError(f"duplicate anon id {anon_id!r} in dataset CSV")
        records[anon_id] = DataRecord(anon_id, attributes)
    return columns, records


def dump_csv(columns: tuple[str, ...], records: dict[str, DataRecord]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("anon_id",) + columns)
    for anon_id in sorted(records):
        writer.writerow((anon_id,) + records[anon_id].attributes)
    return out.getvalue()


# -- the handle ---------------------------------------------------------------


class DatasetHandle:
    """One requester's working copy of a dataset, wrapped in the monitor."""

    def __init__(self, requester: str, address: str, provider: str, license_code: int,
                 period: int, token: AccessToken, records: dict[str, DataRecord],
                 mode: str = "full"):
        if mode not in ("full", "attest"):
            raise ValueError(f"monitoring mode must be 'full' or 'attest', got {mode!r}")
        self.requester = requester
        self.address = address
        self.provider = provider
        self.license_code = license_code
        self.license_terms = decode_license(license_code)
        self.period = period
        self.mode = mode
        self.token = token
        self.epoch = token.epoch
        self.sealed = False
        self.revoked = False
        self.deferred_report = False
        self.log = EventLog(requester, address, token.epoch)
        self.verdict_totals: dict[str, int] = {"ok": 0, "violation": 0, "attested": 0}
        self.effects: dict[str, int] = {kind.value: 0 for kind in ActionKind}
        self._records = dict(records)

    # -- access gate --

    def _check_gate(self, now: int) -> None:
        if self.sealed:
            raise Sealed(f"handle for {self.address!r} is sealed")
        if self.token is None or not self.token.unexpired_at(now):
            raise TokenExpired(f"access token expired at {self.token.expires_at if self.token else '?'}")

    def perform_action(self, action: DataAction, now: int) -> Verdict:
        """Check, log, and (when compliant) apply one declared action."""
        validate_action(action)
        self._check_gate(now)
        if self.mode == "attest":
            verdict = Verdict.attested()
        else:
            verdict = check_action(action, self.license_terms)
        self.log.append(LogEntry(now, action, verdict))
        self.verdict_totals[verdict.status] += 1
        if verdict.compliant:
            self.effects[action.kind.value] += 1
        return verdict

    def read_records(self, now: int) -> tuple[DataRecord, ...]:
        """Perform a read action and return the rows (the only data-out path)."""
        verdict = self.perform_action(DataAction(ActionKind.READ), now)
        assert verdict.compliant  # reads never violate license terms
        return tuple(self._records[a] for a in sorted(self._records))

    def record_count(self) -> int:
        return len(self._records)

    def holds_record(self, anon_id: str) -> bool:
        # simulator-level introspection (erasure scans); not a data-out path
        return anon_id in self._records

    # -- period boundary --

    def end_period(self, engine: ContractEngine, replication, now: int) -> ComplianceReport | None:
        """Close the epoch: replicate the log, report on-chain, renew or seal.

        Returns None when the replication module is unavailable; the report
        is deferred and `retry_deferred` must be called on later ticks.
        """
        if self.sealed:
            raise Sealed(f"handle for {self.address!r} is sealed")
        if self.token is None or now != self.token.expires_at:
            raise ValueError(f"end_period called at {now}, token expires at "
                             f"{self.token.expires_at if self.token else '?'}")
        return self._close_epoch(engine, replication, now)

    def retry_deferred(self, engine: ContractEngine, replication, now: int) -> ComplianceReport | None:
        if not self.deferred_report:
            return None
        return self._close_epoch(engine, replication, now)

    def _close_epoch(self, engine: ContractEngine, replication, now: int) -> ComplianceReport | None:
        try:
            ref = replication.replicate_log(self.log, self.requester, now)
        except ReplicationUnavailable:
            self.deferred_report = True
            return None
        self.deferred_report = False
        report = ComplianceReport(
            requester=self.requester,
            epoch=self.epoch,
            compliant=not self.log.has_violation(),
            log_ref=ref.ref_id,
            log_hash=log_digest(self.log),
        )
        engine.record_compliance_report(self.address, report, now)
        outcome = engine.renew_token(self.address, self.requester, now)
        if isinstance(outcome, RevokedNotice):
            self.sealed = True
            self.revoked = True
            self.token = None
        else:
            self.token = outcome
            self.epoch = outcome.epoch
            self.log = EventLog(self.requester, self.address, self.epoch)
        return report

    # -- GDPR path (works regardless of seal state) --

    def apply_modification(self, engine: ContractEngine, cmd: ModificationCommand, origin: str) -> str:
        """Erase or rectify one record on command from the dataset's provider."""
        if origin != self.provider:
            raise UnauthorizedOrigin(
                f"modification commands for {self.address!r} must come from {self.provider!r}")
        if cmd.op_kind == "erase":
            self._records.pop(cmd.anon_id, None)  # absent id: idempotent no-op
        elif cmd.op_kind == "rectify":
            if cmd.anon_id not in self._records:
                raise UnknownAnonId(f"no record {cmd.anon_id!r} to rectify")
            assert cmd.new_attributes is not None
            self._records[cmd.anon_id] = DataRecord(cmd.anon_id, tuple(cmd.new_attributes))
        else:
            raise ValueError(f"unknown modification kind {cmd.op_kind!r}")
        return engine.record_modification_confirmation(self.address, self.requester,
                                                       cmd.anon_id, cmd.op_kind)


def open_dataset(engine: ContractEngine, repository, requester: str, address: str,
                 download_token: str, access_token: AccessToken, now: int,
                 mode: str = "full") -> DatasetHandle:
    """Unseal a fresh handle: consume the one-time download token and copy records.

    `repository` is the provider-side store; it must expose
    ``redeem_download(dataset_address, download_token, requester) -> records``.
    """
    if access_token.requester != requester or access_token.dataset != address:
        raise TokenMismatch("access token was issued for a different requester or dataset")
    if not access_token.unexpired_at(now):
        raise TokenExpired(f"access token expired at tick {access_token.expires_at}")
    if not engine.token_valid(address, requester, access_token, now):
        raise TokenMismatch("access token is not the requester's current token")
    records = repository.redeem_download(address, download_token, requester)
    contract = engine.get_contract(address)
    return DatasetHandle(
        requester=requester,
        address=address,
        provider=contract.provider,
        license_code=contract.license_code,
        period=contract.period_T,
        token=access_token,
        records=records,
        mode=mode,
    )
