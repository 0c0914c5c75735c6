"""Command-line interface.

Two ways to drive the network:

  * ``luce run <scenario>`` executes a scenario file (or a bundled scenario
    by name) in a fresh simulation and optionally writes the full report
    (delimited exports plus figures) with ``--report-dir``.

  * every other verb operates on a persistent session (default ``./.luce``):
    commands append to a journal that is replayed deterministically on each
    invocation, so the session state is always reconstructible from the
    journal alone.

The session is pinned to the seed/mode/k of its first command. Mutating
commands are journaled; query/inspect/access-report are read-only.
"""

from __future__ import annotations

import argparse
import shlex
import sys
from pathlib import Path

from .errors import LuceError
from .registry import parse_profile
from .simnet import (
    Simulation,
    Step,
    parse_scenario,
    run_scenario,
)

META_FILE = "meta"
JOURNAL_FILE = "journal.scn"


class _SubParser(argparse.ArgumentParser):
    """Subcommand parser that also accepts the global options."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        _add_global_options(self, trailing=True)


class Session:
    def __init__(self, directory: Path, seed: int, mode: str, k: int):
        self.directory = directory
        self.seed = seed
        self.mode = mode
        self.k = k
        self.sim = Simulation(seed=seed, mode=mode, k=k)

    @classmethod
    def load(cls, directory: Path, seed: int | None, mode: str | None, k: int | None) -> "Session":
        meta_path = directory / META_FILE
        if meta_path.exists():
            stored: dict[str, str] = {}
            for line in meta_path.read_text(encoding="utf-8").splitlines():
                key, _, value = line.partition("=")
                stored[key.strip()] = value.strip()
            s_seed, s_mode, s_k = int(stored["seed"]), stored["mode"], int(stored["k"])
            if seed is not None and seed != s_seed:
                raise LuceError(f"session is pinned to seed {s_seed}; cannot switch to {seed}")
            if mode is not None and mode != s_mode:
                raise LuceError(f"session is pinned to mode {s_mode!r}; cannot switch to {mode!r}")
            if k is not None and k != s_k:
                raise LuceError(f"session is pinned to k={s_k}; cannot switch to {k}")
            session = cls(directory, s_seed, s_mode, s_k)
        else:
            directory.mkdir(parents=True, exist_ok=True)
            session = cls(directory, seed if seed is not None else 0,
                          mode or "full", k if k is not None else 3)
            meta_path.write_text(
                f"seed = {session.seed}\nmode = {session.mode}\nk = {session.k}\n",
                encoding="utf-8")
        session._replay()
        return session

    def _journal_path(self) -> Path:
        return self.directory / JOURNAL_FILE

    def _replay(self) -> None:
        journal = self._journal_path()
        if not journal.exists():
            return
        for step in parse_scenario(journal.read_text(encoding="utf-8")):
            self.sim.advance_to(step.tick)
            self.sim.execute(step)

    def run(self, actor: str, command: str, args: list[str], journal: bool) -> str:
        step = Step(self.sim.clock, actor, command, tuple(args))
        output = self.sim.execute(step)
        if journal:
            with self._journal_path().open("a", encoding="utf-8") as fh:
                fh.write(" ".join([str(step.tick), actor, command,
                                   *(shlex.quote(a) for a in args)]) + "\n")
        return output


def _default_actor(sim: Simulation, roles: tuple[str, ...], flag_value: str | None) -> str:
    if flag_value:
        return flag_value
    candidates = [nid for nid, node in sim.nodes.items() if node.node.role in roles]
    if len(candidates) == 1:
        return candidates[0]
    raise LuceError(
        f"cannot infer the acting node (candidates: {', '.join(sorted(candidates)) or 'none'}); "
        "pass --as <node>")


def _profile_to_publish_args(profile_path: Path, license_code: int | None,
                             period: int | None, records: int | None,
                             datafile: Path | None) -> tuple[str, str, list[str]]:
    """Normalize a profile file into the scenario-grammar publish arguments."""
    profile = parse_profile(profile_path.read_text(encoding="utf-8"))
    code = license_code if license_code is not None else profile.terms.license_ref
    if code is None:
        raise LuceError("no license code: pass --license or set license-ref in the profile")
    purposes = ",".join(
        f"{p.tag}:{p.detail}" if p.detail else p.tag
        for p in profile.permissions.allowed_purposes
    )
    args = [
        f"license={code}",
        f"period={period if period is not None else 10}",
        f"records={records if records is not None else 3}",
        f"purposes={purposes}",
        f"personal={'true' if profile.meta_conditions.contains_personal_data else 'false'}",
        f"desc={profile.header.data_description}",
    ]
    if profile.terms.jurisdiction:
        args.append(f"jurisdiction={profile.terms.jurisdiction}")
    if profile.work is not None:
        args.append(f"title={profile.work.title}")
        args.append(f"attrib-name={profile.work.attribution_name}")
        args.append(f"attrib-url={profile.work.attribution_url}")
    if datafile is not None:
        args.append(f"datafile={datafile}")
    return profile.header.profile_id, profile.header.provider_name, args


def _add_global_options(parser: argparse.ArgumentParser, trailing: bool) -> None:
    # trailing copies use SUPPRESS so they never clobber values parsed before
    # the subcommand; this lets global flags appear on either side of it
    default = argparse.SUPPRESS if trailing else None
    parser.add_argument("--session", default=argparse.SUPPRESS if trailing else ".luce",
                        help="session directory (default ./.luce)")
    parser.add_argument("--seed", type=int, default=default, help="simulation seed")
    parser.add_argument("--mode", choices=["full", "attest"], default=default,
                        help="monitoring mode: per-action checking or periodic attestation")
    parser.add_argument("--k", type=int, default=default, help="replica count for event logs")
    parser.add_argument("--as", dest="actor", default=default, metavar="NODE",
                        help="node performing the command")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="luce",
        description="data-sharing network simulator: contracts, monitoring, and subject rights")
    _add_global_options(parser, trailing=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_SubParser)

    p = sub.add_parser("run", help="run a scenario file in a fresh simulation")
    p.add_argument("scenario", help="path or bundled scenario name")
    p.add_argument("--report-dir", default=None, help="write chain/trace exports and figures here")

    p = sub.add_parser("node", help="declare a node")
    p.add_argument("id")
    p.add_argument("role", choices=["provider", "requester", "authority", "replica-holder"])

    p = sub.add_parser("publish", help="list a dataset (creates its contract)")
    p.add_argument("--profile", required=True, help="profile file")
    p.add_argument("--license", type=int, default=None, help="license code (overrides profile)")
    p.add_argument("--period", type=int, default=None, help="token validity in ticks")
    p.add_argument("--records", type=int, default=None, help="synthesize N records")
    p.add_argument("--data", default=None, help="CSV file with anon_id + attribute columns")

    p = sub.add_parser("query", help="search the directory")
    p.add_argument("keywords", nargs="*")

    p = sub.add_parser("request", help="ask a provider for access")
    p.add_argument("dataset")
    p.add_argument("--purpose", required=True)
    p.add_argument("--detail", default="")

    p = sub.add_parser("agree", help="accept the license and join the contract")
    p.add_argument("dataset")
    p.add_argument("--license", type=int, required=True)

    p = sub.add_parser("open", help="redeem the download token and unseal the dataset")
    p.add_argument("dataset")

    p = sub.add_parser("act", help="perform a monitored action")
    p.add_argument("dataset")
    p.add_argument("action", choices=["read", "reproduce", "distribute", "derive",
                                      "share-derivative", "commercial-use"])
    p.add_argument("--notice", action="store_true")
    p.add_argument("--attrib", action="store_true")
    p.add_argument("--deriv-license", type=int, default=None)

    p = sub.add_parser("tick", help="advance the simulation clock")
    p.add_argument("n", type=int)

    p = sub.add_parser("erase", help="erase a subject's records everywhere")
    p.add_argument("subject")

    p = sub.add_parser("rectify", help="rectify a subject's record everywhere")
    p.add_argument("subject")
    p.add_argument("--row", required=True, help="replacement attributes, comma-separated")

    p = sub.add_parser("access-report", help="assemble the subject's disclosure")
    p.add_argument("subject")

    p = sub.add_parser("inspect", help="dump chain, contract, replicas, or node state")
    p.add_argument("target", nargs="+")

    p = sub.add_parser("report", help="write session report artifacts and figures")
    p.add_argument("--out", default="luce-report")
    return parser


def _run_command(ns: argparse.Namespace) -> int:
    from .report import write_report
    from .simnet import run_scenario as _run

    result = _run(ns.scenario, seed=ns.seed if ns.seed is not None else 0,
                  mode=ns.mode or "full", k=ns.k if ns.k is not None else 3)
    for step in result.steps:
        print(f"[{step.index}] tick {step.tick} {step.actor} {step.command}")
        for line in step.output.splitlines():
            print(f"    {line}")
    for name, (ok, detail) in result.invariants.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    print(f"chain digest: {result.chain_digest}")
    if ns.report_dir:
        for path in write_report(result, ns.report_dir):
            print(f"wrote {path}")
    return 0 if result.ok else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        if ns.command == "run":
            return _run_command(ns)

        session = Session.load(Path(ns.session), ns.seed, ns.mode, ns.k)
        sim = session.sim

        if ns.command == "report":
            from .ledger import chain_digest
            from .report import write_report
            from .simnet import ScenarioResult
            result = ScenarioResult(
                chain_digest=chain_digest(sim.ledger.chain),
                steps=[], trace=tuple(tx.function_name for tx in sim.ledger.committed_transactions()),
                invariants=sim.check_invariants(), sim=sim)
            for path in write_report(result, ns.out):
                print(f"wrote {path}")
            return 0

        if ns.command == "node":
            print(session.run(ns.id, "node", [ns.role], journal=True))
        elif ns.command == "publish":
            datafile = None
            if ns.data:
                source = Path(ns.data)
                data_dir = session.directory / "data"
                data_dir.mkdir(exist_ok=True)
                datafile = (data_dir / source.name).resolve()
                datafile.write_text(source.read_text(encoding="utf-8"), encoding="utf-8")
            dataset_id, provider, args = _profile_to_publish_args(
                Path(ns.profile), ns.license, ns.period, ns.records, datafile)
            actor = ns.actor or provider
            print(session.run(actor, "publish", [dataset_id, *args], journal=True))
        elif ns.command == "query":
            print(session.run("-", "query", list(ns.keywords), journal=False))
        elif ns.command == "request":
            actor = _default_actor(sim, ("requester",), ns.actor)
            args = [ns.dataset, ns.purpose] + ([ns.detail] if ns.detail else [])
            print(session.run(actor, "request", args, journal=True))
        elif ns.command == "agree":
            actor = _default_actor(sim, ("requester",), ns.actor)
            print(session.run(actor, "agree", [ns.dataset, str(ns.license)], journal=True))
        elif ns.command == "open":
            actor = _default_actor(sim, ("requester",), ns.actor)
            print(session.run(actor, "open", [ns.dataset], journal=True))
        elif ns.command == "act":
            actor = _default_actor(sim, ("requester",), ns.actor)
            args = [ns.dataset, ns.action]
            if ns.notice:
                args.append("notice")
            if ns.attrib:
                args.append("attrib")
            if ns.deriv_license is not None:
                args.append(f"deriv={ns.deriv_license}")
            print(session.run(actor, "act", args, journal=True))
        elif ns.command == "tick":
            print(session.run("-", "tick", [str(ns.n)], journal=True))
        elif ns.command == "erase":
            actor = _default_actor(sim, ("provider",), ns.actor)
            print(session.run(actor, "erase", [ns.subject], journal=True))
        elif ns.command == "rectify":
            actor = _default_actor(sim, ("provider",), ns.actor)
            print(session.run(actor, "rectify", [ns.subject, ns.row], journal=True))
        elif ns.command == "access-report":
            actor = _default_actor(sim, ("provider",), ns.actor)
            print(session.run(actor, "access-report", [ns.subject], journal=False))
        elif ns.command == "inspect":
            print(session.run("-", "inspect", list(ns.target), journal=False))
        else:  # pragma: no cover - argparse enforces the choices
            parser.error(f"unknown command {ns.command!r}")
    except LuceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
