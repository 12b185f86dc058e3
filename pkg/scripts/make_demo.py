#!/usr/bin/env python3
"""Build a demo store + users file for the server and the web client.

Creates a small shared workbook (owner alice; bob limited user; carol
collaborator; vera viewer) with three input cells and two formulas, seeds a
revision store, and writes matching users. Default passwords are
"<name>-pw".
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from pws.access import Role, SharingAcl  # noqa: E402
from pws.fileformat import save_users, save_workbook  # noqa: E402
from pws.passwords import make_open_file_record  # noqa: E402
from pws.server import RevisionStore  # noqa: E402
from pws.workbook import Workbook  # noqa: E402


def build_demo_workbook() -> Workbook:
    wb = Workbook()
    wb.add_sheet("Model")
    wb.set_input("A1", "Units")
    wb.set_input("B1", "10")
    wb.set_input("A2", "Unit price")
    wb.set_input("B2", "2.5")
    wb.set_input("A3", "Discount %")
    wb.set_input("B3", "0")
    wb.set_input("A5", "Subtotal")
    wb.set_input("B5", "=B1*B2")
    wb.set_input("A6", "Total")
    wb.set_input("B6", "=B5*(1-B3/100)")
    acl = SharingAcl(owner="alice")
    acl.grants.update(
        {"bob": Role.LIMITED_USER, "carol": Role.COLLABORATOR, "vera": Role.VIEWER}
    )
    wb.acl = acl
    return wb


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo", help="output directory")
    parser.add_argument("--iterations", type=int, default=None,
                        help="override login-record iterations (tests use small values)")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wb = build_demo_workbook()
    save_workbook(wb, out / "model.pws")
    RevisionStore(out / "store").initialize(wb)
    kwargs = {"iterations": args.iterations} if args.iterations else {}
    users = {
        name: make_open_file_record(f"{name}-pw", **kwargs)
        for name in ("alice", "bob", "carol", "vera")
    }
    save_users(users, out / "users.json")
    print(f"demo written under {out}/: model.pws, store/, users.json")
    print(f"serve with: pws serve --bind 127.0.0.1:8642 --store {out}/store "
          f"--users {out}/users.json --transport http")
    return 0


if __name__ == "__main__":
    sys.exit(main())
