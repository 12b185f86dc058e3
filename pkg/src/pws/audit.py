"""Protection audit: ten rules producing deterministic findings.

    R1  Error    formula or empty cell not locked+hidden
    R2  Warning  data-entry cell not unlocked+unhidden
    R3  Error    sheet protection disabled
    R4  Warning  sheet protection grants more than select-unlocked
    R5  Warning  sheet with no unlocked cells left visible
    R6  Error    workbook structure protection off
    R7  Warning  protection enabled without an element password
    R8  Warning  cell unlocked+hidden (editable but invisible)
    R9  Error    a selection rectangle can reveal formula source on copy
    R10 Info     element passwords present: weak keyspace notice

R9 marks exactly the copy-leakable formula cells: on an unprotected sheet
every cell is selectable and every cell's source is revealed, so every
formula cell is flagged; on a protected sheet a formula cell is flagged
when it still reveals its source (unhidden) and lies inside a rectangle
spanned by two selectable cells (including itself).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .addresses import CellAddress, parse_a1
from .protection import capability_for_format, data_entry_cells
from .workbook import Empty, Formula, Sheet, SheetVisibility, Workbook


class Severity(Enum):
    ERROR = "Error"
    WARNING = "Warning"
    INFO = "Info"


RULE_SEVERITY: dict[str, Severity] = {
    "R1": Severity.ERROR,
    "R2": Severity.WARNING,
    "R3": Severity.ERROR,
    "R4": Severity.WARNING,
    "R5": Severity.WARNING,
    "R6": Severity.ERROR,
    "R7": Severity.WARNING,
    "R8": Severity.WARNING,
    "R9": Severity.ERROR,
    "R10": Severity.INFO,
}


@dataclass(frozen=True, slots=True)
class Finding:
    rule_id: str
    severity: Severity
    location: str
    message: str

    def machine_line(self) -> str:
        return f"{self.rule_id}\t{self.severity.value}\t{self.location}\t{self.message}"


def _finding(rule_id: str, location: str, message: str) -> Finding:
    return Finding(rule_id, RULE_SEVERITY[rule_id], location, message)


def _rule_num(rule_id: str) -> int:
    return int(rule_id[1:])


def _sort_key(workbook: Workbook):
    sheet_index = {sheet.name: i for i, sheet in enumerate(workbook.sheets)}

    def key(item: tuple[Finding, tuple]):
        finding, pos = item
        sheet, row, col = pos
        return (
            sheet_index.get(sheet, -1) if sheet is not None else -1,
            row,
            col,
            _rule_num(finding.rule_id),
        )

    return key


def _selectable_positions(sheet: Sheet) -> list[tuple[int, int]]:
    return [
        pos
        for pos in sheet.cells
        if capability_for_format(sheet, sheet.format_at(*pos)).selectable
    ]


def _revealing_formula_positions(sheet: Sheet) -> list[tuple[int, int]]:
    return [
        pos
        for pos, cell in sheet.cells.items()
        if isinstance(cell.content, Formula)
        and capability_for_format(sheet, sheet.format_at(*pos)).copy_reveals_contents
    ]


def _spanned_by_some_pair(pos: tuple[int, int], selectable: list[tuple[int, int]]) -> bool:
    """True when two selectable cells span an axis-aligned rectangle
    containing ``pos`` (a cell paired with itself spans itself)."""
    col, row = pos
    nw = ne = sw = se = False
    for (c, r) in selectable:
        if c <= col and r <= row:
            nw = True
        if c >= col and r <= row:
            ne = True
        if c <= col and r >= row:
            sw = True
        if c >= col and r >= row:
            se = True
    return (nw and se) or (ne and sw)


def evasion_scan(workbook: Workbook) -> list[Finding]:
    """R9 findings for every formula cell whose source a copy can reveal."""
    keyed: list[tuple[Finding, tuple]] = []
    for sheet in workbook.sheets:
        if sheet.visibility is not SheetVisibility.VISIBLE:
            continue
        selectable = _selectable_positions(sheet)
        if not selectable:
            continue
        for (col, row) in _revealing_formula_positions(sheet):
            if _spanned_by_some_pair((col, row), selectable):
                addr = CellAddress(sheet.name, col, row)
                keyed.append(
                    (
                        _finding(
                            "R9",
                            str(addr),
                            "formula source is revealed by copying a selection spanning this cell",
                        ),
                        (sheet.name, row, col),
                    )
                )
    keyed.sort(key=_sort_key(workbook))
    return [f for f, _ in keyed]


def audit_protection(workbook: Workbook) -> list[Finding]:
    """Run every rule; deterministic order (sheet, row, col, rule)."""
    keyed: list[tuple[Finding, tuple]] = []
    inputs = data_entry_cells(workbook)

    for sheet in workbook.sheets:
        sheet_loc = f"sheet:{sheet.name}"

        # R1 / R8 over the sheet-wide default format.
        if not (sheet.default_format.locked and sheet.default_format.hidden):
            keyed.append(
                (
                    _finding("R1", sheet_loc, "default cell format is not locked+hidden"),
                    (sheet.name, 0, 0),
                )
            )
        if not sheet.default_format.locked and sheet.default_format.hidden:
            keyed.append(
                (
                    _finding("R8", sheet_loc, "default cell format is unlocked+hidden"),
                    (sheet.name, 0, 0),
                )
            )

        # R3: protection switch.
        if not sheet.protection.enabled:
            has_formulas = any(isinstance(c.content, Formula) for c in sheet.cells.values())
            detail = " and it contains formulas" if has_formulas else ""
            keyed.append(
                (
                    _finding("R3", sheet_loc, f"sheet protection is disabled{detail}"),
                    (sheet.name, 0, 0),
                )
            )
        else:
            # R4: more permissions than select-unlocked.
            extras = []
            if sheet.protection.allow_select_locked:
                extras.append("select-locked")
            if sheet.protection.allow_format_cells:
                extras.append("format-cells")
            if extras:
                keyed.append(
                    (
                        _finding(
                            "R4",
                            sheet_loc,
                            f"protection grants extra permission(s): {', '.join(extras)}",
                        ),
                        (sheet.name, 0, 0),
                    )
                )
            # R7: protected without a password.
            if sheet.protection.element_password is None:
                keyed.append(
                    (
                        _finding("R7", sheet_loc, "sheet protection has no element password"),
                        (sheet.name, 0, 0),
                    )
                )

        # R5: nothing for a user to touch, yet visible.
        has_unlocked = not sheet.default_format.locked or any(
            not sheet.format_at(*pos).locked for pos in sheet.cells
        )
        if not has_unlocked and sheet.visibility is SheetVisibility.VISIBLE:
            keyed.append(
                (
                    _finding("R5", sheet_loc, "sheet has no unlocked cells but is visible"),
                    (sheet.name, 0, 0),
                )
            )

        # Per-cell rules.
        for (col, row), cell in sheet.cells.items():
            addr = CellAddress(sheet.name, col, row)
            fmt = sheet.format_at(col, row)
            is_input = addr in inputs
            if isinstance(cell.content, (Formula, Empty)) and not is_input:
                if not (fmt.locked and fmt.hidden):
                    what = "formula" if isinstance(cell.content, Formula) else "empty"
                    keyed.append(
                        (
                            _finding("R1", str(addr), f"{what} cell is not locked+hidden"),
                            (sheet.name, row, col),
                        )
                    )
            if is_input and not (not fmt.locked and not fmt.hidden):
                keyed.append(
                    (
                        _finding("R2", str(addr), "data-entry cell is not unlocked+unhidden"),
                        (sheet.name, row, col),
                    )
                )
            if cell.format is not None and not fmt.locked and fmt.hidden:
                keyed.append(
                    (
                        _finding("R8", str(addr), "cell is unlocked+hidden: editable but invisible"),
                        (sheet.name, row, col),
                    )
                )

    # R6: workbook structure.
    if not workbook.protection.structure:
        keyed.append(
            (
                _finding("R6", "workbook", "workbook structure protection is off"),
                (None, 0, 0),
            )
        )
    # R7 for workbook protection without a password.
    if (workbook.protection.structure or workbook.protection.windows) and (
        workbook.protection.element_password is None
    ):
        keyed.append(
            (
                _finding("R7", "workbook", "workbook protection has no element password"),
                (None, 0, 0),
            )
        )

    # R9: the copy evasion.
    for finding in evasion_scan(workbook):
        sheet_name, a1 = finding.location.split("!", 1)
        col, row = parse_a1(a1)
        keyed.append((finding, (sheet_name.strip("'"), row, col)))

    # R10: weak keyspace notice whenever any element password exists.
    has_element_password = workbook.protection.element_password is not None or any(
        sheet.protection.element_password is not None for sheet in workbook.sheets
    )
    if has_element_password:
        keyed.append(
            (
                _finding(
                    "R10",
                    "workbook",
                    "element passwords have a 194,560-class keyspace and are crackable",
                ),
                (None, 0, 1),
            )
        )

    keyed.sort(key=_sort_key(workbook))
    return [f for f, _ in keyed]


def has_blocking_findings(findings: list[Finding]) -> bool:
    return any(f.severity is Severity.ERROR for f in findings)


def render_machine(findings: list[Finding]) -> str:
    return "\n".join(f.machine_line() for f in findings)


def render_text(findings: list[Finding]) -> str:
    if not findings:
        return "clean: no findings\n"
    lines = []
    counts = {Severity.ERROR: 0, Severity.WARNING: 0, Severity.INFO: 0}
    for f in findings:
        counts[f.severity] += 1
        lines.append(f"[{f.severity.value:7}] {f.rule_id:4} {f.location}: {f.message}")
    lines.append(
        f"{counts[Severity.ERROR]} error(s), {counts[Severity.WARNING]} warning(s), "
        f"{counts[Severity.INFO]} notice(s)"
    )
    return "\n".join(lines) + "\n"
