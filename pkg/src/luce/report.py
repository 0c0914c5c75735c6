"""Run reports: delimited chain/trace exports plus rendered figures.

`write_report` drops the full artifact set for a finished run into one
directory:

    chain.ldj        exported chain, one block per line (diffable)
    trace.txt        committed transaction function names, one per line
    steps.txt        per-step outputs of the scenario
    invariants.txt   end-of-run invariant results
    epochs.png       per-requester epoch timeline with report/revocation marks
    actions.png      per-requester verdict totals

Figures render with the Agg backend so reports work headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .ledger import export_chain_lines
from .simnet import ScenarioResult, Simulation


def write_trace(result: ScenarioResult, path: Path) -> None:
    path.write_text("\n".join(result.trace) + "\n", encoding="utf-8")


def _dataset_label(sim: Simulation, address: str) -> str:
    contract = sim.engine.contracts.get(address)
    if contract is not None and contract.dataset_id:
        return contract.dataset_id
    return address


def render_epoch_figure(sim: Simulation, path: Path) -> None:
    """Step lines of each requester's epoch over time, with report markers."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    series = sorted(sim.engine.epoch_history)
    plotted = False
    for address, requester in series:
        events = [(t, e) for a, r, e, _, t in sim.engine.report_events
                  if a == address and r == requester]
        label = f"{requester} @ {_dataset_label(sim, address)}"
        history = sim.engine.epoch_history[(address, requester)]
        ticks = [0] + [t for t, _ in events]
        epochs = history[: len(ticks)]
        if len(epochs) < len(ticks):
            epochs = epochs + [epochs[-1]] * (len(ticks) - len(epochs))
        ax.step(ticks, epochs, where="post", label=label)
        plotted = True
        for a, r, epoch, compliant, t in sim.engine.report_events:
            if a == address and r == requester:
                ax.plot(t, epoch, "o", color="tab:green" if compliant else "tab:red",
                        markersize=6)
        for a, r, epoch, t in sim.engine.revocation_events:
            if a == address and r == requester:
                ax.plot(t, epoch, "x", color="tab:red", markersize=10, markeredgewidth=2)
    ax.set_xlabel("tick")
    ax.set_ylabel("epoch")
    ax.set_title("token epochs per requester (dots: reports, x: revocation)")
    if plotted:
        ax.legend(loc="upper left", fontsize=8)
    else:
        ax.text(0.5, 0.5, "no requester activity", ha="center", va="center",
                transform=ax.transAxes)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_action_figure(sim: Simulation, path: Path) -> None:
    """Grouped bars of ok/violation/attested verdict counts per requester."""
    totals: dict[str, dict[str, int]] = {}
    for node_id in sorted(sim.nodes):
        for dataset_id in sorted(sim.nodes[node_id].handles):
            handle = sim.nodes[node_id].handles[dataset_id]
            key = f"{node_id} @ {dataset_id}"
            totals[key] = dict(handle.verdict_totals)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    if totals:
        labels = list(totals)
        statuses = ["ok", "violation", "attested"]
        colors = {"ok": "tab:green", "violation": "tab:red", "attested": "tab:blue"}
        width = 0.25
        for offset, status in enumerate(statuses):
            xs = [i + (offset - 1) * width for i in range(len(labels))]
            ys = [totals[label].get(status, 0) for label in labels]
            ax.bar(xs, ys, width=width, label=status, color=colors[status])
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, fontsize=8)
        ax.legend(fontsize=8)
    else:
        ax.text(0.5, 0.5, "no monitored actions", ha="center", va="center",
                transform=ax.transAxes)
    ax.set_ylabel("actions")
    ax.set_title("monitored actions by verdict")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(result: ScenarioResult, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    chain_path = out / "chain.ldj"
    chain_path.write_text("\n".join(export_chain_lines(result.sim.ledger.chain)) + "\n",
                          encoding="utf-8")
    written.append(chain_path)

    trace_path = out / "trace.txt"
    write_trace(result, trace_path)
    written.append(trace_path)

    steps_path = out / "steps.txt"
    step_lines = []
    for step in result.steps:
        step_lines.append(f"[{step.index}] tick {step.tick} {step.actor} {step.command}")
        for line in step.output.splitlines():
            step_lines.append(f"    {line}")
    steps_path.write_text("\n".join(step_lines) + "\n", encoding="utf-8")
    written.append(steps_path)

    invariants_path = out / "invariants.txt"
    inv_lines = [
        f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
        for name, (ok, detail) in result.invariants.items()
    ]
    inv_lines.append(f"chain digest: {result.chain_digest}")
    invariants_path.write_text("\n".join(inv_lines) + "\n", encoding="utf-8")
    written.append(invariants_path)

    epochs_path = out / "epochs.png"
    render_epoch_figure(result.sim, epochs_path)
    written.append(epochs_path)

    actions_path = out / "actions.png"
    render_action_figure(result.sim, actions_path)
    written.append(actions_path)
    return written
