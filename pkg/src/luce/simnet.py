"""Deterministic discrete-tick simulation of the peer-to-peer network.

One logical event loop advances the whole network. Per tick, in order:
messages due this tick are delivered (FIFO per sender, cross-sender by node
id), queued modification commands are redelivered, period boundaries fire
(closing epochs on handles whose token expires now), and a block is formed
whenever transactions are pending. Everything is driven by a seeded RNG, so
a (seed, scenario) pair always produces the same chain, byte for byte.

Scenario files are line-delimited: ``tick actor command args...`` with ``#``
comments. Quoting follows shell rules. Commands:

    node <role>                                   declare the acting node
    publish <dataset> license=N [period=N] [records=N] [purposes=a,b:detail]
            [personal=bool] [desc="..."] [datafile=path] [title=...]
            [attrib-name=...] [attrib-url=...] [jurisdiction=...]
    query <keyword>...
    request <dataset> <purpose> [detail...]       ask the provider for access
    agree <dataset> <license> [institution=...] [processing=...]
    open <dataset>
    act <dataset> <action> [notice] [attrib] [deriv=N]
    tick <n>
    erase <subject>
    rectify <subject> <v1,v2,...>
    access-report <subject>
    inspect chain | contract <id> | replicas | node <id>

The actor ``-`` is allowed for query, tick, and inspect. Request/grant
round-trips take two ticks (one hop each way); scenarios must leave that gap
between ``request`` and ``agree``.
"""

from __future__ import annotations

import random
import shlex
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .canonical import derive_node_key, digest
from .contract import ContractEngine, replay_contracts
from .errors import (
    LuceError,
    NotGranted,
    ParseError,
    StepFailure,
    UnknownTarget,
)
from .gdpr import (
    ModificationModule,
    ProviderDataset,
    ProviderVault,
    PurposeTag,
    access_report,
    check_purpose_compatibility,
    render_access_report,
    render_proof,
)
from .ledger import (
    Block,
    Chain,
    FULL_NODE_ROLES,
    Ledger,
    NODE_ROLES,
    NodeId,
    chain_digest,
)
from .license import ActionKind, DataAction, render_deed
from .monitor import DataRecord, DatasetHandle, load_csv, log_digest, open_dataset
from .registry import (
    AdamProfile,
    ProfileHeader,
    ProfileMetaConditions,
    ProfilePermissions,
    ProfileTerms,
    WorkProperties,
    YellowPages,
)
from .replication import ReplicationService

SCENARIO_COMMANDS = frozenset({
    "node", "publish", "query", "request", "agree", "open", "act",
    "tick", "erase", "rectify", "access-report", "inspect",
})

ANONYMOUS_OK = frozenset({"query", "tick", "inspect"})


class IdFactory:
    """Opaque but reproducible ids: same seed and call order, same ids."""

    def __init__(self, seed: int):
        self.seed = seed
        self._counters: dict[str, int] = {}

    def new(self, kind: str) -> str:
        n = self._counters.get(kind, 0)
        self._counters[kind] = n + 1
        return f"{kind}-{digest(f'{self.seed}|{kind}|{n}')[:12]}"


@dataclass(frozen=True, slots=True)
class Message:
    deliver_at: int
    seq: int
    sender: str
    recipient: str
    kind: str
    payload: dict


@dataclass(frozen=True, slots=True)
class Grant:
    address: str
    purpose_tag: str
    purpose_detail: str


@dataclass(slots=True)
class SimNode:
    node: NodeId
    online: bool = True
    handles: dict[str, DatasetHandle] = field(default_factory=dict)
    grants: dict[str, Grant] = field(default_factory=dict)
    denials: dict[str, str] = field(default_factory=dict)
    pending_downloads: dict[str, str] = field(default_factory=dict)
    mirror: list[Block] | None = None
    vault: ProviderVault | None = None
    modification: ModificationModule | None = None


@dataclass(frozen=True, slots=True)
class Step:
    tick: int
    actor: str
    command: str
    args: tuple[str, ...]
    line_no: int = 0

    def text(self) -> str:
        return " ".join([str(self.tick), self.actor, self.command, *self.args])


@dataclass(frozen=True, slots=True)
class StepOutcome:
    index: int
    tick: int
    actor: str
    command: str
    output: str


@dataclass(slots=True)
class ScenarioResult:
    chain_digest: str
    steps: list[StepOutcome]
    trace: tuple[str, ...]
    invariants: dict[str, tuple[bool, str]]
    sim: "Simulation"

    @property
    def ok(self) -> bool:
        return all(ok for ok, _ in self.invariants.values())


def parse_scenario(text: str, base_dir: Path | None = None) -> list[Step]:
    steps: list[Step] = []
    last_tick = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            tokens = shlex.split(line, comments=True)
        except ValueError as exc:
            raise ParseError(line_no, f"bad quoting: {exc}")
        if len(tokens) < 3:
            raise ParseError(line_no, "expected: tick actor command [args...]")
        tick_s, actor, command, *args = tokens
        try:
            tick = int(tick_s)
        except ValueError:
            raise ParseError(line_no, f"tick must be an integer, got {tick_s!r}")
        if tick < 0:
            raise ParseError(line_no, "ticks must be non-negative")
        if tick < last_tick:
            raise ParseError(line_no, f"ticks must be non-decreasing ({tick} after {last_tick})")
        last_tick = tick
        if command not in SCENARIO_COMMANDS:
            raise ParseError(line_no, f"unknown command {command!r}")
        steps.append(Step(tick, actor, command, tuple(args), line_no))
    return steps


def _split_kv(args: Sequence[str]) -> tuple[list[str], dict[str, str]]:
    positional: list[str] = []
    keyed: dict[str, str] = {}
    for arg in args:
        if "=" in arg:
            key, _, value = arg.partition("=")
            keyed[key] = value
        else:
            positional.append(arg)
    return positional, keyed


class Simulation:
    """The whole network: ledger, directory, replication, and per-node state."""

    def __init__(self, seed: int = 0, mode: str = "full", k: int = 3):
        if mode not in ("full", "attest"):
            raise ValueError(f"mode must be 'full' or 'attest', got {mode!r}")
        self.seed = seed
        self.mode = mode
        self.clock = 0
        self.ids = IdFactory(seed)
        self._key_salt = str(seed)
        self.ledger = Ledger()
        self.engine = ContractEngine(self.ledger, clock=lambda: self.clock, mint=self.ids.new)
        self.pages = YellowPages(self.engine)
        self.replication = ReplicationService(
            rng=random.Random(f"replica|{seed}"),
            directory=lambda: sorted(self.nodes),
            k=k,
            mint=self.ids.new,
        )
        self.nodes: dict[str, SimNode] = {}
        self._queue: list[Message] = []
        self._seq = 0
        self.add_node("authority", "authority")

    # -- topology --

    def add_node(self, node_id: str, role: str) -> SimNode:
        if role not in NODE_ROLES:
            raise LuceError(f"unknown node role {role!r}")
        node = NodeId(node_id, role, derive_node_key(self._key_salt, node_id))
        self.ledger.register_node(node)
        sim_node = SimNode(node=node)
        if role == "provider":
            vault = ProviderVault(node_id)
            sim_node.vault = vault
            sim_node.modification = ModificationModule(
                node_id, self.engine, self.pages, vault, self._make_deliver(node_id))
        if role in FULL_NODE_ROLES:
            sim_node.mirror = list(self.ledger.chain.blocks)
        self.nodes[node_id] = sim_node
        return sim_node

    def node(self, node_id: str) -> SimNode:
        sim_node = self.nodes.get(node_id)
        if sim_node is None:
            raise UnknownTarget(f"no node named {node_id!r}")
        return sim_node

    def set_online(self, node_id: str, online: bool) -> None:
        self.node(node_id).online = online

    def _make_deliver(self, provider_id: str):
        def deliver(address: str, requester: str, cmd) -> str | None:
            target = self.nodes.get(requester)
            if target is None or not target.online:
                return None
            dataset_id = self.engine.contracts[address].dataset_id
            handle = target.handles.get(dataset_id or "")
            if handle is None:
                # admitted but holds no copy: confirm the no-op on-chain anyway
                return self.engine.record_modification_confirmation(
                    address, requester, cmd.anon_id, cmd.op_kind)
            return handle.apply_modification(self.engine, cmd, provider_id)
        return deliver

    # -- messaging --

    def _send(self, sender: str, recipient: str, kind: str, payload: dict) -> None:
        self._seq += 1
        self._queue.append(Message(self.clock + 1, self._seq, sender, recipient, kind, payload))

    def _handle_message(self, msg: Message) -> None:
        if msg.kind == "request":
            provider = msg.recipient
            dataset_id = msg.payload["dataset"]
            purpose = PurposeTag(msg.payload["purpose"], msg.payload["detail"])
            try:
                entry = self.pages.get(dataset_id)
            except UnknownTarget:
                self._send(provider, msg.sender, "deny",
                           {"dataset": dataset_id, "reason": "unknown dataset"})
                return
            if check_purpose_compatibility(purpose, entry.profile):
                self._send(provider, msg.sender, "grant", {
                    "dataset": dataset_id,
                    "address": entry.contract_address,
                    "purpose": purpose.tag,
                    "detail": purpose.detail,
                })
            else:
                self._send(provider, msg.sender, "deny",
                           {"dataset": dataset_id, "reason": "purpose incompatible"})
        elif msg.kind == "grant":
            self.node(msg.recipient).grants[msg.payload["dataset"]] = Grant(
                msg.payload["address"], msg.payload["purpose"], msg.payload["detail"])
        elif msg.kind == "deny":
            self.node(msg.recipient).denials[msg.payload["dataset"]] = msg.payload["reason"]
        else:
            raise LuceError(f"unroutable message kind {msg.kind!r}")

    # -- the event loop --

    def tick(self, n: int = 1) -> int:
        if n < 1:
            raise ValueError("tick count must be >= 1")
        for _ in range(n):
            self._advance_one()
        return self.clock

    def advance_to(self, target: int) -> None:
        while self.clock < target:
            self._advance_one()

    def _advance_one(self) -> None:
        self.clock += 1
        due = [m for m in self._queue if m.deliver_at <= self.clock]
        self._queue = [m for m in self._queue if m.deliver_at > self.clock]
        for msg in sorted(due, key=lambda m: (m.sender, m.seq)):
            if not self.node(msg.recipient).online:
                self._seq += 1
                self._queue.append(Message(self.clock + 1, self._seq, msg.sender,
                                           msg.recipient, msg.kind, msg.payload))
                continue
            self._handle_message(msg)
        for node_id in sorted(self.nodes):
            module = self.nodes[node_id].modification
            if module is not None:
                module.retry_pending(self.clock)
        for handle in self._handles_in_order():
            if handle.deferred_report:
                handle.retry_deferred(self.engine, self.replication, self.clock)
            elif (not handle.sealed and handle.token is not None
                  and handle.token.expires_at == self.clock):
                handle.end_period(self.engine, self.replication, self.clock)
        self._form_block_if_pending()

    def _handles_in_order(self) -> list[DatasetHandle]:
        handles = []
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            for dataset_id in sorted(node.handles):
                handles.append(node.handles[dataset_id])
        return handles

    def _form_block_if_pending(self) -> None:
        if not self.ledger.chain.pending:
            return
        block = self.ledger.form_block(self.ledger.next_validator(), self.clock)
        for node in self.nodes.values():
            if node.mirror is not None:
                node.mirror.append(block)

    def flush(self) -> None:
        """Commit any still-pending transactions without advancing the clock."""
        self._form_block_if_pending()

    # -- command execution --

    def execute(self, step: Step) -> str:
        handler = getattr(self, "_cmd_" + step.command.replace("-", "_"))
        if step.actor != "-" and step.command != "node":
            self.node(step.actor)  # actors must exist
        elif step.actor == "-" and step.command not in ANONYMOUS_OK:
            raise LuceError(f"command {step.command!r} needs a named actor")
        return handler(step.actor, list(step.args))

    def _cmd_node(self, actor: str, args: list[str]) -> str:
        if len(args) != 1:
            raise LuceError("usage: node <role>")
        self.add_node(actor, args[0])
        return f"{actor} joined as {args[0]}"

    def _cmd_publish(self, actor: str, args: list[str]) -> str:
        positional, kv = _split_kv(args)
        if len(positional) != 1:
            raise LuceError("usage: publish <dataset> license=N [key=value...]")
        dataset_id = positional[0]
        if "license" not in kv:
            raise LuceError("publish needs license=<code>")
        license_code = int(kv["license"])
        period = int(kv.get("period", "10"))
        n_records = int(kv.get("records", "3"))
        personal = kv.get("personal", "true").lower() in ("true", "yes", "1")
        desc = kv.get("desc", f"dataset {dataset_id}")
        purposes = []
        for chunk in kv.get("purposes", "general-research").split(","):
            tag, _, detail = chunk.partition(":")
            purposes.append(PurposeTag(tag.strip(), detail.strip()))
        profile = AdamProfile(
            header=ProfileHeader(dataset_id, self.clock, desc, actor),
            permissions=ProfilePermissions(tuple(purposes)),
            terms=ProfileTerms(license_ref=license_code,
                               jurisdiction=kv.get("jurisdiction") or None),
            meta_conditions=ProfileMetaConditions(personal),
            work=WorkProperties(
                title=kv.get("title", desc),
                attribution_name=kv.get("attrib-name", actor),
                attribution_url=kv.get("attrib-url", f"https://{actor}.example"),
            ),
        )
        datafile = kv.get("datafile")
        csv_text = Path(datafile).read_text(encoding="utf-8") if datafile else None
        return self.publish(actor, profile, license_code, period,
                            n_records=n_records, csv_text=csv_text)

    def publish(self, actor: str, profile: AdamProfile, license_code: int, period: int,
                n_records: int = 3, csv_text: str | None = None) -> str:
        node = self.node(actor)
        if node.vault is None:
            raise LuceError(f"{actor!r} is not a provider node")
        dataset_id = self.pages.publish_profile(actor, profile, license_code, period)
        address = self.pages.get(dataset_id).contract_address
        if csv_text is not None:
            columns, records = load_csv(csv_text)
        else:
            columns = ("v1", "v2")
            records = {}
            for i in range(n_records):
                anon = self.ids.new("anon")
                records[anon] = DataRecord(anon, (f"{dataset_id}-r{i + 1}-v1", f"{dataset_id}-r{i + 1}-v2"))
        node.vault.datasets[dataset_id] = ProviderDataset(dataset_id, address, columns, dict(records))
        for i, anon in enumerate(records):
            node.vault.map_subject(f"s{i + 1}", dataset_id, anon)
        return (f"published {dataset_id} at {address} "
                f"(license {license_code}, T={period}, {len(records)} records)")

    def _cmd_query(self, actor: str, args: list[str]) -> str:
        hits = self.pages.query(args)
        if not hits:
            return "no matching datasets"
        return "\n".join(
            f"{e.dataset_id} | provider={e.provider_name} | license={e.license_type} | "
            f"{e.profile.header.data_description}"
            for e in hits
        )

    def _cmd_request(self, actor: str, args: list[str]) -> str:
        if len(args) < 2:
            raise LuceError("usage: request <dataset> <purpose> [detail...]")
        dataset_id, purpose_tag, *detail = args
        entry = self.pages.get(dataset_id)
        self._send(actor, entry.provider_name, "request", {
            "dataset": dataset_id,
            "purpose": purpose_tag,
            "detail": " ".join(detail),
        })
        return f"{actor} requested {dataset_id} for {purpose_tag}"

    def _cmd_agree(self, actor: str, args: list[str]) -> str:
        positional, kv = _split_kv(args)
        if len(positional) != 2:
            raise LuceError("usage: agree <dataset> <license> [institution=...] [processing=...]")
        dataset_id, license_s = positional
        node = self.node(actor)
        if dataset_id in node.denials:
            raise NotGranted(f"access to {dataset_id!r} was denied: {node.denials[dataset_id]}")
        grant = node.grants.get(dataset_id)
        if grant is None:
            raise NotGranted(f"{actor!r} was not granted the contract address for {dataset_id!r}")
        use_info = {
            "identity": actor,
            "institution": kv.get("institution", f"{actor}-institute"),
            "processing": kv.get("processing", grant.purpose_detail or grant.purpose_tag),
        }
        admission = self.engine.add_data_requester(
            grant.address, actor, int(license_s), grant.purpose_tag, grant.purpose_detail, use_info)
        node.pending_downloads[dataset_id] = admission.download_token
        provider = self.engine.contracts[grant.address].provider
        vault = self.node(provider).vault
        assert vault is not None
        vault.datasets[dataset_id].register_download(admission.download_token, actor)
        return f"{actor} admitted to {dataset_id}; download token {admission.download_token}"

    def _cmd_open(self, actor: str, args: list[str]) -> str:
        if len(args) != 1:
            raise LuceError("usage: open <dataset>")
        dataset_id = args[0]
        node = self.node(actor)
        grant = node.grants.get(dataset_id)
        download_token = node.pending_downloads.get(dataset_id)
        if grant is None or download_token is None:
            raise NotGranted(f"{actor!r} holds no download token for {dataset_id!r}")
        token = self.engine.issue_access_token(grant.address, actor, self.clock)
        provider = self.engine.contracts[grant.address].provider
        vault = self.node(provider).vault
        assert vault is not None
        handle = open_dataset(self.engine, vault, actor, grant.address,
                              download_token, token, self.clock, mode=self.mode)
        node.handles[dataset_id] = handle
        del node.pending_downloads[dataset_id]
        return (f"{actor} opened {dataset_id} (epoch {handle.epoch}, "
                f"token expires at tick {token.expires_at})")

    def _cmd_act(self, actor: str, args: list[str]) -> str:
        positional, kv = _split_kv(args)
        flags = {a for a in positional[2:]}
        if len(positional) < 2:
            raise LuceError("usage: act <dataset> <action> [notice] [attrib] [deriv=N]")
        dataset_id, kind_s = positional[0], positional[1]
        unknown = flags - {"notice", "attrib"}
        if unknown:
            raise LuceError(f"unknown act flags: {', '.join(sorted(unknown))}")
        handle = self.node(actor).handles.get(dataset_id)
        if handle is None:
            raise LuceError(f"{actor!r} has not opened {dataset_id!r}")
        action = DataAction(
            kind=ActionKind(kind_s),
            carried_notice="notice" in flags,
            carried_attribution="attrib" in flags,
            derivative_license=int(kv["deriv"]) if "deriv" in kv else None,
        )
        verdict = handle.perform_action(action, self.clock)
        label = verdict.status if verdict.compliant else f"violation ({verdict.reason})"
        return f"{actor} {kind_s} on {dataset_id}: {label}"

    def _cmd_tick(self, actor: str, args: list[str]) -> str:
        if len(args) != 1:
            raise LuceError("usage: tick <n>")
        return f"clock now {self.tick(int(args[0]))}"

    def _provider_module(self, actor: str) -> ModificationModule:
        module = self.node(actor).modification
        if module is None:
            raise LuceError(f"{actor!r} is not a provider node")
        return module

    def _cmd_erase(self, actor: str, args: list[str]) -> str:
        if len(args) != 1:
            raise LuceError("usage: erase <subject>")
        module = self._provider_module(actor)
        proof = module.request_erasure(args[0], self.clock)
        return render_proof(proof)

    def _cmd_rectify(self, actor: str, args: list[str]) -> str:
        if len(args) != 2:
            raise LuceError("usage: rectify <subject> <v1,v2,...>")
        module = self._provider_module(actor)
        row = tuple(args[1].split(","))
        proof = module.request_rectification(args[0], row, self.clock)
        return render_proof(proof)

    def _cmd_access_report(self, actor: str, args: list[str]) -> str:
        if len(args) != 1:
            raise LuceError("usage: access-report <subject>")
        node = self.node(actor)
        if node.vault is None:
            raise LuceError(f"{actor!r} is not a provider node")
        report = access_report(self.engine, self.pages, node.vault, actor, args[0])
        return render_access_report(report)

    # -- inspection --

    def _cmd_inspect(self, actor: str, args: list[str]) -> str:
        if not args:
            raise UnknownTarget("usage: inspect chain | contract <id> | replicas | node <id>")
        target = args[0]
        if target == "chain":
            return self.inspect_chain()
        if target == "contract":
            if len(args) != 2:
                raise UnknownTarget("usage: inspect contract <dataset-or-address>")
            return self.inspect_contract(args[1])
        if target == "replicas":
            return self.inspect_replicas()
        if target == "node":
            if len(args) != 2:
                raise UnknownTarget("usage: inspect node <id>")
            return self.inspect_node(args[1])
        raise UnknownTarget(f"unknown inspect target {target!r}")

    def inspect_chain(self) -> str:
        lines = []
        for block in self.ledger.chain.blocks:
            names = ",".join(tx.function_name for tx in block.transactions) or "(genesis)"
            lines.append(f"block {block.index} @tick {block.timestamp} "
                         f"hash {block.block_hash[:12]}.. txs=[{names}]")
        if self.ledger.chain.pending:
            lines.append(f"pending: {len(self.ledger.chain.pending)} transaction(s)")
        report = self.ledger.verify()
        if report.ok:
            lines.append("verification: ok")
        else:
            fault = report.first_fault
            assert fault is not None
            lines.append(f"verification: FAILED at block {fault.block_index}: "
                         f"{fault.code} ({fault.detail})")
        return "\n".join(lines)

    def resolve_address(self, ref: str) -> str:
        if ref in self.engine.contracts:
            return ref
        address = self.engine.address_of(ref)
        if address is None:
            raise UnknownTarget(f"no contract or dataset named {ref!r}")
        return address

    def inspect_contract(self, ref: str) -> str:
        contract = self.engine.get_contract(self.resolve_address(ref))
        lines = [
            f"contract {contract.address} (dataset {contract.dataset_id})",
            f"provider {contract.provider}, published at tick {contract.published_at}, "
            f"period T={contract.period_T}",
            render_deed(contract.license_code),
        ]
        if not contract.requesters:
            lines.append("requesters: (none)")
        for requester in sorted(contract.requesters):
            r = contract.requesters[requester]
            reports = ", ".join(
                f"e{rep.epoch}:{'ok' if rep.compliant else 'VIOLATION'}" for rep in r.reports
            ) or "none"
            lines.append(f"requester {requester}: {r.state.value} epoch={r.epoch} "
                         f"purpose={r.purpose_tag} reports=[{reports}] "
                         f"confirmations={len(r.confirmations)}")
        if contract.provider_confirmations:
            lines.append(f"provider confirmations: {len(contract.provider_confirmations)}")
        return "\n".join(lines)

    def inspect_replicas(self) -> str:
        authority = next(
            (n.node for n in self.nodes.values() if n.node.role == "authority"), None)
        if authority is None:
            raise UnknownTarget("no authority node present")
        rows = self.replication.audit_replicas(authority)
        if not rows:
            return "replica map: (empty)"
        lines = ["replica map:"]
        for row in rows:
            lines.append(
                f"{row.ref.ref_id} requester={row.ref.requester} epoch={row.ref.epoch} "
                f"holders=[{','.join(row.holders)}] hash={row.log_hash[:12]}.. "
                f"{'intact' if row.intact else 'CORRUPT'}")
        return "\n".join(lines)

    def inspect_node(self, node_id: str) -> str:
        sim_node = self.node(node_id)
        lines = [f"node {node_id} role={sim_node.node.role} "
                 f"{'online' if sim_node.online else 'OFFLINE'}"]
        if sim_node.vault is not None:
            for dataset_id in sorted(sim_node.vault.datasets):
                dataset = sim_node.vault.datasets[dataset_id]
                lines.append(f"  provides {dataset_id}: {len(dataset.records)} records")
            subjects = sim_node.vault.subjects()
            if subjects:
                lines.append(f"  subject mapping: {', '.join(subjects)}")
        for dataset_id in sorted(sim_node.handles):
            handle = sim_node.handles[dataset_id]
            state = "sealed" if handle.sealed else f"epoch {handle.epoch}"
            lines.append(f"  handle {dataset_id}: {state}, {handle.record_count()} records, "
                         f"{len(handle.log.entries)} log entries this epoch")
        return "\n".join(lines)

    # -- network-wide checks --

    def scan_for_record(self, anon_id: str) -> list[str]:
        """Exhaustive search for a record: provider copies, handles, queued commands."""
        locations = []
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            if node.vault is not None:
                for dataset_id in sorted(node.vault.datasets):
                    if anon_id in node.vault.datasets[dataset_id].records:
                        locations.append(f"provider {node_id} dataset {dataset_id}")
            for dataset_id in sorted(node.handles):
                if node.handles[dataset_id].holds_record(anon_id):
                    locations.append(f"handle {node_id}/{dataset_id}")
            if node.modification is not None:
                for workflow in node.modification.pending:
                    for item in workflow.items:
                        if item.anon_id == anon_id and workflow.op_kind == "rectify":
                            locations.append(f"queued rectify at {node_id}")
        return locations

    def check_invariants(self) -> dict[str, tuple[bool, str]]:
        results: dict[str, tuple[bool, str]] = {}
        report = self.ledger.verify()
        fault = report.first_fault
        results["chain-verification"] = (
            report.ok, "ok" if report.ok else f"{fault.code} at block {fault.block_index}")

        replayed = replay_contracts(self.ledger.chain)
        same = replayed == self.engine.contracts
        results["event-sourcing-replay"] = (
            same, "replayed state matches live state" if same else "replay diverged from live state")

        bad_epochs = [
            f"{addr}/{req}"
            for (addr, req), history in self.engine.epoch_history.items()
            if history != list(range(1, len(history) + 1))
        ]
        results["epoch-monotonicity"] = (
            not bad_epochs, "ok" if not bad_epochs else "gaps at " + ", ".join(bad_epochs))

        mirror_ok = True
        for node in self.nodes.values():
            if node.mirror is not None:
                if chain_digest(Chain(blocks=list(node.mirror))) != chain_digest(self.ledger.chain):
                    mirror_ok = False
        results["full-node-mirrors"] = (
            mirror_ok, "every full node holds the canonical chain" if mirror_ok else "mirror diverged")

        repl_ok, repl_detail = True, "all on-chain log hashes verify against replicas"
        for tx in self.ledger.committed_transactions():
            if tx.function_name != "complianceReport":
                continue
            try:
                record = self.replication.get_record(tx.payload["logRef"])
                retrieved = self.replication.retrieve_log(tx.payload["logRef"])
            except LuceError as exc:
                repl_ok, repl_detail = False, f"{tx.payload['logRef']}: {exc}"
                break
            if record.log_hash != tx.payload["logHash"] or log_digest(retrieved) != record.log_hash:
                repl_ok, repl_detail = False, f"hash mismatch for {tx.payload['logRef']}"
                break
        results["replication-hash-consistency"] = (repl_ok, repl_detail)

        lingering = []
        for proof in self.completed_proofs():
            if proof.op_kind != "erase":
                continue
            for section in proof.sections:
                lingering.extend(self.scan_for_record(section.anon_id))
        results["erasure-completeness"] = (
            not lingering, "no erased record remains" if not lingering else "; ".join(lingering))
        return results

    def completed_proofs(self) -> list:
        proofs = []
        for node_id in sorted(self.nodes):
            module = self.nodes[node_id].modification
            if module is not None:
                proofs.extend(module.completed)
        return proofs


# -- scenario driver ----------------------------------------------------------


def bundled_scenario_dir() -> Path:
    return Path(__file__).resolve().parent / "scenarios"


def resolve_scenario_path(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    candidate = bundled_scenario_dir() / name
    if candidate.exists():
        return candidate
    candidate = bundled_scenario_dir() / f"{name}.scn"
    if candidate.exists():
        return candidate
    raise FileNotFoundError(f"no scenario file or bundled scenario named {name!r}")


def run_scenario_text(text: str, *, seed: int = 0, mode: str = "full",
                      k: int = 3) -> ScenarioResult:
    steps = parse_scenario(text)
    sim = Simulation(seed=seed, mode=mode, k=k)
    outcomes: list[StepOutcome] = []
    for index, step in enumerate(steps):
        try:
            if step.tick < sim.clock:
                raise LuceError(f"scenario clock already at {sim.clock}, step declares {step.tick}")
            sim.advance_to(step.tick)
            output = sim.execute(step)
        except LuceError as exc:
            raise StepFailure(index, step.text(), exc) from exc
        outcomes.append(StepOutcome(index, step.tick, step.actor, step.command, output))
    sim.flush()
    trace = tuple(tx.function_name for tx in sim.ledger.committed_transactions())
    return ScenarioResult(
        chain_digest=chain_digest(sim.ledger.chain),
        steps=outcomes,
        trace=trace,
        invariants=sim.check_invariants(),
        sim=sim,
    )


def run_scenario(source: str | Path, *, seed: int = 0, mode: str = "full",
                 k: int = 3) -> ScenarioResult:
    path = resolve_scenario_path(str(source))
    return run_scenario_text(path.read_text(encoding="utf-8"), seed=seed, mode=mode, k=k)
