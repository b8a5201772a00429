"""Command-line entry points: lint, diff, ledger checks, scenarios, serving.

Exit codes: 0 success, 1 domain finding (violations, differences, chain
breaks, trace mismatches), 2 usage or I/O failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from mcpcare.document.changes import diff
from mcpcare.document.model import parse_document
from mcpcare.document.validate import validate
from mcpcare.errors import McpError
from mcpcare.gateway.runtime import DEFAULT_PORT, build_runtime
from mcpcare.gateway.scenario import ScenarioRunner
from mcpcare.jsoncanon import canonical_bytes
from mcpcare.ledger import Ledger, LedgerProof, verify_chain
from mcpcare.replay import replay

log = logging.getLogger("mcpcare")


def _read_document(path: str):
    return parse_document(Path(path).read_bytes())


def _cmd_lint(args: argparse.Namespace) -> int:
    doc = _read_document(args.file)
    violations = validate(doc)
    for v in violations:
        print(f"{v.path}: {v.rule}: {v.message}")
    if violations:
        return 1
    print(f"{doc.header.id} v{doc.header.version}: ok")
    return 0


def _cmd_diff(args: argparse.Namespace) -> int:
    a = _read_document(args.old)
    b = _read_document(args.new)
    changes = diff(a, b)
    print(canonical_bytes(changes.to_tree()).decode("utf-8"))
    return 0 if changes.is_empty() else 1


def _cmd_verify_ledger(args: argparse.Namespace) -> int:
    ledger = Ledger.load(Path(args.file))
    proof = verify_chain(ledger.events())
    if isinstance(proof, LedgerProof):
        print(f"ok length={proof.length} head={proof.head_hash}")
        return 0
    print(f"chain break at seq {proof.seq}")
    return 1


def _cmd_replay(args: argparse.Namespace) -> int:
    ledger = Ledger.load(Path(args.file))
    snapshot = replay(ledger.events())
    print(snapshot.canonical().decode("utf-8"))
    return 0


def _cmd_run_scenario(args: argparse.Namespace) -> int:
    ref = args.scenario
    if ref.endswith(".json") or "/" in ref:
        scenario = json.loads(Path(ref).read_text(encoding="utf-8"))
    else:
        from mcpcare import fixtures

        scenario = fixtures.load_scenario(ref)
    report = ScenarioRunner(scenario).run()
    print(json.dumps(report.summary(), indent=2, sort_keys=True))
    return 0 if report.passed else 1


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from mcpcare.gateway.app import create_app

    root = args.root or os.environ.get("MCP_HOME")
    runtime = build_runtime(root=Path(root) if root else None)
    log.info("serving on %s:%d (root=%s)", args.host, args.port, root or "in-memory")
    uvicorn.run(create_app(runtime), host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcpcare")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lint", help="validate a document file")
    p.add_argument("file")
    p.set_defaults(fn=_cmd_lint)

    p = sub.add_parser("diff", help="structural diff between two document versions")
    p.add_argument("old")
    p.add_argument("new")
    p.set_defaults(fn=_cmd_diff)

    p = sub.add_parser("verify-ledger", help="check an audit ledger's hash chain")
    p.add_argument("file")
    p.set_defaults(fn=_cmd_verify_ledger)

    p = sub.add_parser("replay", help="rebuild the engine snapshot from a ledger")
    p.add_argument("file")
    p.set_defaults(fn=_cmd_replay)

    p = sub.add_parser("run-scenario", help="execute a scripted episode and check its trace")
    p.add_argument("scenario", help="packaged scenario id or path to a .scenario.json file")
    p.set_defaults(fn=_cmd_run_scenario)

    p = sub.add_parser("serve", help="run the HTTP gateway")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--root", default=None, help="storage directory (default: $MCP_HOME or in-memory)")
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (McpError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main(argv=sys.argv[1:]))
