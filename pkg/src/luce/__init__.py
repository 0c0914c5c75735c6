"""Desk-scale data-sharing network with on-chain accountability.

Per-dataset contracts live on an append-only hash-linked ledger; requesters
work through monitored dataset handles whose access tokens renew only after
a compliant epoch; event logs replicate to random nodes; and data-subject
rights (access, rectification, erasure) propagate to every copy with
on-chain proof. Everything runs inside a deterministic tick-driven network
simulation with a scenario driver and a CLI.
"""

from .contract import ContractEngine, replay_contracts
from .ledger import Chain, Ledger, chain_digest, export_chain_lines, import_chain_lines, verify_chain
from .license import (
    ActionKind,
    DataAction,
    LicenseTerms,
    Verdict,
    check_action,
    decode_license,
    encode_license,
)
from .simnet import Simulation, run_scenario, run_scenario_text

__version__ = "0.1.0"

__all__ = [
    "ActionKind",
    "Chain",
    "ContractEngine",
    "DataAction",
    "Ledger",
    "LicenseTerms",
    "Simulation",
    "Verdict",
    "chain_digest",
    "check_action",
    "decode_license",
    "encode_license",
    "export_chain_lines",
    "import_chain_lines",
    "replay_contracts",
    "run_scenario",
    "run_scenario_text",
    "verify_chain",
    "__version__",
]
