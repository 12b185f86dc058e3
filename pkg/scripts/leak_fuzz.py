#!/usr/bin/env python3
"""Leak-freedom fuzz: random workbooks and ACLs, asserting that no
display-access or no-access formula source ever appears in a limited-user
or viewer view or export.
"""

import argparse
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from conftest import random_workbook, randomize_protection  # noqa: E402
from pws.access import AccessClass, Role, SharingAcl, export_local, render_view  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cases", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    started = time.perf_counter()
    payloads = 0
    for case in range(args.cases):
        wb = random_workbook(
            rng,
            max_cells=rng.randint(4, 14),
            region=6,
            formula_ratio=0.5,
            sheets=rng.randint(1, 2),
            mark_formulas=True,
        )
        randomize_protection(rng, wb)
        acl = SharingAcl(owner="owner")
        acl.grants["lim"] = Role.LIMITED_USER
        acl.grants["view"] = Role.VIEWER
        wb.acl = acl
        for addr, _ in list(wb.formula_cells()):
            if rng.random() < 0.2:
                acl.overrides[addr] = AccessClass.NO_ACCESS
        sources = [f.source for _, f in wb.formula_cells()]
        for user in ("lim", "view"):
            for blob in (render_view(wb, acl, user).serialize(), export_local(wb, acl, user)):
                text = blob.decode("utf-8")
                for source in sources:
                    if source in text:
                        print(f"LEAK in case {case} for {user}: {source!r}")
                        return 1
                payloads += 1
        if (case + 1) % 2_000 == 0:
            print(f"  {case + 1:,} cases, {time.perf_counter() - started:.1f}s")
    print(
        f"clean: {args.cases:,} cases, {payloads:,} payloads, "
        f"{time.perf_counter() - started:.1f}s"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
