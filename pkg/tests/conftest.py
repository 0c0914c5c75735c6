from __future__ import annotations

import random

import pytest
from hypothesis import HealthCheck, settings

from luce.gdpr import PurposeTag
from luce.monitor import open_dataset
from luce.registry import (
    AdamProfile,
    ProfileHeader,
    ProfileMetaConditions,
    ProfilePermissions,
    ProfileTerms,
    WorkProperties,
)
from luce.simnet import Simulation

settings.register_profile(
    "suite",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def make_profile(dataset_id: str, provider: str, description: str = "",
                 purposes: tuple[PurposeTag, ...] = (PurposeTag("general-research"),),
                 personal: bool = True, license_ref: int | None = None) -> AdamProfile:
    return AdamProfile(
        header=ProfileHeader(dataset_id, 0, description or f"dataset {dataset_id}", provider),
        permissions=ProfilePermissions(purposes),
        terms=ProfileTerms(license_ref=license_ref),
        meta_conditions=ProfileMetaConditions(personal),
        work=WorkProperties(title=dataset_id, attribution_name=provider,
                            attribution_url=f"https://{provider}.example"),
    )


def make_network(seed: int = 0, mode: str = "full", k: int = 3,
                 holders: int = 2, requesters: tuple[str, ...] = ("requesterB",),
                 provider: str = "providerA") -> Simulation:
    sim = Simulation(seed=seed, mode=mode, k=k)
    sim.add_node(provider, "provider")
    for i in range(holders):
        sim.add_node(f"holder{i + 1}", "replica-holder")
    for requester in requesters:
        sim.add_node(requester, "requester")
    return sim


def publish(sim: Simulation, dataset_id: str = "d1", license_code: int = 63,
            period: int = 10, records: int = 3, provider: str = "providerA",
            purposes: tuple[PurposeTag, ...] = (PurposeTag("general-research"),),
            personal: bool = True) -> str:
    """Publish a synthesized dataset; returns the contract address."""
    profile = make_profile(dataset_id, provider, purposes=purposes, personal=personal)
    sim.publish(provider, profile, license_code, period, n_records=records)
    return sim.pages.get(dataset_id).contract_address


def admit(sim: Simulation, requester: str, dataset_id: str,
          offered_license: int | None = None,
          purpose: PurposeTag = PurposeTag("general-research")):
    """Register a requester with the contract (bypassing the request/grant hop)."""
    entry = sim.pages.get(dataset_id)
    code = offered_license if offered_license is not None else entry.license_type
    use_info = {"identity": requester, "institution": f"{requester}-institute",
                "processing": purpose.detail or purpose.tag}
    admission = sim.engine.add_data_requester(
        entry.contract_address, requester, code, purpose.tag, purpose.detail, use_info)
    provider = sim.engine.contracts[entry.contract_address].provider
    vault = sim.nodes[provider].vault
    assert vault is not None
    vault.datasets[dataset_id].register_download(admission.download_token, requester)
    return admission


def admit_and_open(sim: Simulation, requester: str, dataset_id: str,
                   offered_license: int | None = None):
    """Admission plus token issue plus unseal; returns the live handle."""
    admission = admit(sim, requester, dataset_id, offered_license)
    address = admission.address
    token = sim.engine.issue_access_token(address, requester, sim.clock)
    provider = sim.engine.contracts[address].provider
    vault = sim.nodes[provider].vault
    handle = open_dataset(sim.engine, vault, requester, address,
                          admission.download_token, token, sim.clock, mode=sim.mode)
    sim.nodes[requester].handles[dataset_id] = handle
    return handle


def semantic_fingerprint(sim: Simulation):
    """Contract-state outcomes with all opaque ids stripped.

    Two runs that differ only in seed must agree on this value even though
    their chains differ byte-wise (ids and signatures embed the seed).
    """
    out = []
    for address in sorted(sim.engine.contracts,
                          key=lambda a: sim.engine.contracts[a].dataset_id or a):
        contract = sim.engine.contracts[address]
        requesters = []
        for requester in sorted(contract.requesters):
            record = contract.requesters[requester]
            requesters.append((
                requester,
                record.state.value,
                record.epoch,
                tuple((r.epoch, r.compliant) for r in record.reports),
                tuple(c.op_kind for c in record.confirmations),
                record.purpose_tag,
            ))
        out.append((contract.dataset_id, contract.license_code, contract.period_T,
                    tuple(requesters),
                    tuple(c.op_kind for c in contract.provider_confirmations)))
    return tuple(out)


@pytest.fixture
def sim() -> Simulation:
    return make_network()


@pytest.fixture
def rng() -> random.Random:
    return random.Random(1234)
