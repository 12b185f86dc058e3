"""Command-line entry points.

Exit codes are stable: 0 success/clean, 1 audit findings at error severity,
2 usage or input error, 3 infeasible request. stdout is the contract and is
golden-file tested; flags are long-form only.
"""

from __future__ import annotations

import argparse
import json
import sys

from .access import Role, SharingAcl, export_local
from .audit import audit_protection, has_blocking_findings, render_machine, render_text
from .errors import Infeasible, NoPassword, PwsError
from .fileformat import load_workbook
from .passwords import ElementPasswordRecord, crack_element
from .protection import Actor, copy_range
from .server import PwsService, RevisionStore, serve
from .values import display_value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pws", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_audit = sub.add_parser("audit", help="lint a workbook's protection state")
    p_audit.add_argument("file")
    p_audit.add_argument("--format", choices=("text", "machine"), default="text")

    p_eval = sub.add_parser("eval", help="evaluate a cell after optional input edits")
    p_eval.add_argument("file")
    p_eval.add_argument("--set", action="append", default=[], metavar="ADDR=TEXT")
    p_eval.add_argument("--get", required=True, metavar="ADDR")

    p_crack = sub.add_parser("crack-element", help="recover a verifying element password")
    p_crack.add_argument("file")
    p_crack.add_argument("--sheet", required=True)

    p_attack = sub.add_parser("attack-copy", help="copy a rectangle as a local user")
    p_attack.add_argument("file")
    p_attack.add_argument("--rect", required=True, metavar="A1:C3")
    p_attack.add_argument("--sheet", default=None)

    p_serve = sub.add_parser("serve", help="host a master workbook")
    p_serve.add_argument("--bind", required=True, metavar="HOST:PORT")
    p_serve.add_argument("--store", required=True)
    p_serve.add_argument("--users", required=True)
    p_serve.add_argument("--transport", choices=("tcp", "http"), default="tcp")
    p_serve.add_argument("--workbook", default=None, help="seed an empty store from this file")
    p_serve.add_argument("--web-root", default=None, help="serve static files over http")

    p_export = sub.add_parser("export", help="flattened local export for a role")
    p_export.add_argument("file")
    p_export.add_argument(
        "--as-role",
        required=True,
        choices=("owner", "collaborator", "viewer", "limited-user"),
    )
    p_export.add_argument("--out", default=None)

    return parser


def _cmd_audit(args) -> int:
    workbook = load_workbook(args.file)
    findings = audit_protection(workbook)
    if args.format == "machine":
        if findings:
            print(render_machine(findings))
    else:
        print(render_text(findings), end="")
    return 1 if has_blocking_findings(findings) else 0


def _cmd_eval(args) -> int:
    workbook = load_workbook(args.file)
    for assignment in args.set:
        if "=" not in assignment:
            print(f"bad --set {assignment!r}, expected ADDR=TEXT", file=sys.stderr)
            return 2
        addr_text, text = assignment.split("=", 1)
        workbook.set_input(addr_text, text)
    value = workbook.value(args.get)
    print(display_value(value))
    return 0


def _cmd_crack_element(args) -> int:
    workbook = load_workbook(args.file)
    record = workbook.sheet(args.sheet).protection.element_password
    if record is None:
        raise NoPassword(f"sheet {args.sheet!r} has no element password")
    if not isinstance(record, ElementPasswordRecord):
        raise Infeasible("record is open-file strength; exhaustive search is impractical")
    password, attempts = crack_element(record)
    print(f"cracked: {json.dumps(password)}")
    print(f"attempts: {attempts}")
    return 0


def _cmd_attack_copy(args) -> int:
    workbook = load_workbook(args.file)
    sheet_name = args.sheet or (workbook.sheets[0].name if workbook.sheets else None)
    if sheet_name is None:
        print("workbook has no sheets", file=sys.stderr)
        return 2
    payload = copy_range(workbook, sheet_name, args.rect, Actor.USER)
    for entry in payload.entries:
        kind = "source" if entry.is_source else "value"
        print(f"{entry.addr.a1}\t{entry.text}\t{kind}")
    leaked = [e for e in payload.leaked_sources() if e.text.startswith("=")]
    print(f"leaked formula sources: {len(leaked)}")
    return 0


def _cmd_serve(args) -> int:
    host, _, port_text = args.bind.rpartition(":")
    if not host or not port_text.isdigit():
        print(f"bad --bind {args.bind!r}, expected HOST:PORT", file=sys.stderr)
        return 2
    store = RevisionStore(args.store)
    if store.is_empty():
        if args.workbook is None:
            print("store is empty; pass --workbook to seed it", file=sys.stderr)
            return 2
        store.initialize(load_workbook(args.workbook))
    service = PwsService(args.store, args.users)
    print(f"serving workbook {service.workbook_id!r} on {host}:{port_text} ({args.transport})")
    serve(
        service,
        host,
        int(port_text),
        transport=args.transport,
        web_root=args.web_root,
    )
    return 0


def _cmd_export(args) -> int:
    workbook = load_workbook(args.file)
    role = Role(args.as_role.replace("-", "_"))
    acl = workbook.acl
    if acl is None:
        acl = SharingAcl(owner="owner")
    if role is Role.OWNER:
        user = acl.owner
    else:
        user = "export-session"
        acl.grants[user] = role
    data = export_local(workbook, acl, user)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data.decode("utf-8"))
    return 0


_COMMANDS = {
    "audit": _cmd_audit,
    "eval": _cmd_eval,
    "crack-element": _cmd_crack_element,
    "attack-copy": _cmd_attack_copy,
    "serve": _cmd_serve,
    "export": _cmd_export,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Infeasible as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 3
    except PwsError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"no such file: {exc.filename}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
