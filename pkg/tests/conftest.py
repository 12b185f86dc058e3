"""Shared builders: quick workbooks and a seeded random workbook generator."""

from __future__ import annotations

import random

from pws.access import Role, SharingAcl
from pws.addresses import CellAddress, col_to_letters
from pws.workbook import CellProtectionFormat, SheetVisibility, Workbook


def make_workbook(cells: dict[str, str], sheet: str = "Sheet1") -> Workbook:
    """cells maps 'A1' (or 'Other!A1') to input text."""
    wb = Workbook()
    wb.add_sheet(sheet)
    for addr, text in cells.items():
        if "!" in addr:
            name = addr.split("!", 1)[0].strip("'")
            if not wb.has_sheet(name):
                wb.add_sheet(name)
        wb.set_input(addr, text)
    return wb


def shared_workbook(cells: dict[str, str], grants: dict[str, Role], owner: str = "alice") -> Workbook:
    wb = make_workbook(cells)
    acl = SharingAcl(owner=owner)
    acl.grants.update(grants)
    wb.acl = acl
    return wb


def a1(col: int, row: int) -> str:
    return f"{col_to_letters(col)}{row}"


_SAFE_TEXTS = ("alpha", "beta", "gamma", "delta", "note", "label x", "total")


def random_formula(rng: random.Random, region: int, marker: int | None = None) -> str:
    """A random formula over a square region; ``marker`` plants a unique
    integer so the source text is globally unique and substring-searchable."""

    def ref() -> str:
        return a1(rng.randint(1, region), rng.randint(1, region))

    def rng_ref() -> str:
        c1, r1 = rng.randint(1, region), rng.randint(1, region)
        c2 = min(region, c1 + rng.randint(0, 2))
        r2 = min(region, r1 + rng.randint(0, 2))
        return f"{a1(c1, r1)}:{a1(c2, r2)}"

    shape = rng.randrange(8)
    if shape == 0:
        body = f"{ref()}+{ref()}"
    elif shape == 1:
        body = f"{ref()}*{rng.randint(2, 9)}"
    elif shape == 2:
        body = f"SUM({rng_ref()})"
    elif shape == 3:
        body = f"IF({ref()}>{rng.randint(0, 50)},{ref()},{rng.randint(0, 9)})"
    elif shape == 4:
        body = f"{ref()}-{ref()}/{rng.randint(1, 9)}"
    elif shape == 5:
        body = f"AVERAGE({rng_ref()})"
    elif shape == 6:
        body = f'{ref()}&"-"&{ref()}'
    else:
        body = f"MIN({rng_ref()})+MAX({rng_ref()})"
    if marker is not None:
        body = f"{body}+{marker}"
    return "=" + body


def random_workbook(
    rng: random.Random,
    *,
    max_cells: int = 60,
    region: int = 12,
    formula_ratio: float = 0.4,
    sheets: int = 1,
    mark_formulas: bool = False,
) -> Workbook:
    """Random grid of literals and formulas; cycles can occur naturally.

    With ``mark_formulas`` every formula source embeds a unique integer so
    leak checks can substring-search without false positives.
    """
    wb = Workbook()
    names = [f"Sheet{i + 1}" for i in range(sheets)]
    for name in names:
        wb.add_sheet(name)
    capacity = len(names) * region * region
    n_cells = min(rng.randint(max(1, max_cells // 2), max_cells), capacity)
    marker = rng.randint(10**6, 9 * 10**6)
    positions = set()
    while len(positions) < n_cells:
        positions.add(
            (rng.choice(names), rng.randint(1, region), rng.randint(1, region))
        )
    for sheet_name, col, row in sorted(positions):
        addr = CellAddress(sheet_name, col, row)
        if rng.random() < formula_ratio:
            marker += 1
            wb.set_input(
                addr, random_formula(rng, region, marker if mark_formulas else None)
            )
        elif rng.random() < 0.8:
            wb.set_input(addr, str(rng.randint(-100, 100)))
        else:
            wb.set_input(addr, rng.choice(_SAFE_TEXTS))
    return wb


def randomize_protection(rng: random.Random, wb: Workbook) -> None:
    """Scramble formats, sheet protection, and visibility."""
    for sheet in wb.sheets:
        sheet.default_format = CellProtectionFormat(
            locked=rng.random() < 0.7, hidden=rng.random() < 0.3
        )
        for cell in sheet.cells.values():
            if rng.random() < 0.6:
                cell.format = CellProtectionFormat(
                    locked=rng.random() < 0.6, hidden=rng.random() < 0.4
                )
        sheet.protection.enabled = rng.random() < 0.6
        sheet.protection.allow_select_locked = rng.random() < 0.7
        sheet.protection.allow_select_unlocked = rng.random() < 0.9
        sheet.protection.allow_format_cells = rng.random() < 0.2
        if rng.random() < 0.3 and len(wb.sheets) > 1:
            sheet.visibility = rng.choice(
                [SheetVisibility.VISIBLE, SheetVisibility.HIDDEN, SheetVisibility.VERY_HIDDEN]
            )
    wb.protection.structure = rng.random() < 0.5
