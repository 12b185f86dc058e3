"""Local protection semantics: cell formats x sheet protection x visibility.

The derived capability table:

    protection disabled          -> every capability is true
    protection enabled:
      selectable  = allow_select_locked  (locked cell)
                  | allow_select_unlocked (unlocked cell)
      editable    = not locked and selectable
      visible in normal view      = selectable and not hidden
      visible in formula view     = not hidden
      copy reveals source         = not hidden

The last line is the model's single leak channel: a locked-but-unhidden
formula cell engulfed by a selection built from two selectable cells gives
up its source on copy. ``apply_recommended_protection`` is the one-call
recipe that closes it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .addresses import CellAddress, parse_rect, rect_cells
from .engine import dependents_of
from .errors import (
    CornerNotSelectable,
    NoUnlockedCells,
    ProtectionNotEnabled,
    ProtectionTabUnavailable,
    SheetNotVisible,
    StructureProtected,
    UnknownAddress,
    VeryHiddenNotListable,
    WrongPassword,
)
from .passwords import PasswordRecord, verify_record
from .values import display_value
from .workbook import (
    CellProtectionFormat,
    Empty,
    Literal,
    Sheet,
    SheetVisibility,
    Workbook,
    content_source,
)


class Actor(Enum):
    USER = "user"
    PROGRAMMER = "programmer"


class Direction(Enum):
    TAB = "tab"
    ENTER = "enter"
    UP = "up"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True, slots=True)
class ProtectionCapability:
    selectable: bool
    editable: bool
    contents_visible_normal: bool
    contents_visible_formula_view: bool
    copy_reveals_contents: bool


ALL_TRUE = ProtectionCapability(True, True, True, True, True)


def capability_for_format(sheet: Sheet, fmt: CellProtectionFormat) -> ProtectionCapability:
    if not sheet.protection.enabled:
        return ALL_TRUE
    p = sheet.protection
    selectable = p.allow_select_locked if fmt.locked else p.allow_select_unlocked
    return ProtectionCapability(
        selectable=selectable,
        editable=not fmt.locked and selectable,
        contents_visible_normal=selectable and not fmt.hidden,
        contents_visible_formula_view=not fmt.hidden,
        copy_reveals_contents=not fmt.hidden,
    )


def effective_capability(
    workbook: Workbook, addr: CellAddress | str, actor: Actor = Actor.USER
) -> ProtectionCapability:
    """What ``actor`` may do with the cell; programmers bypass everything."""
    addr = workbook.resolve(addr)
    sheet = workbook.sheet(addr.sheet)
    if actor is Actor.PROGRAMMER:
        return ALL_TRUE
    if sheet.visibility is not SheetVisibility.VISIBLE:
        raise SheetNotVisible(f"sheet {sheet.name!r} is not visible")
    return capability_for_format(sheet, sheet.format_at(addr.col, addr.row))


# --- Navigation ---------------------------------------------------------------

def _unlocked_positions(sheet: Sheet) -> list[tuple[int, int]]:
    positions = [
        (col, row)
        for (col, row) in sheet.cells
        if not sheet.format_at(col, row).locked
    ]
    if not sheet.default_format.locked:
        # With an unlocked default the untouched grid is navigable too, but
        # cycling an unbounded grid is meaningless; restrict to stored cells.
        positions = sorted(set(positions) | set(sheet.cells))
    return positions


def navigate_next(
    workbook: Workbook,
    sheet_name: str,
    from_addr: CellAddress | str,
    direction: Direction = Direction.TAB,
) -> CellAddress:
    """Next unlocked cell from ``from_addr``; wraps, never lands on a locked cell."""
    from_addr = workbook.resolve(from_addr)
    sheet = workbook.sheet(sheet_name)
    if not sheet.protection.enabled:
        raise ProtectionNotEnabled(f"sheet {sheet_name!r} is not protected")
    unlocked = _unlocked_positions(sheet)
    if not unlocked:
        raise NoUnlockedCells(f"sheet {sheet_name!r} has no unlocked cells")

    pos = (from_addr.col, from_addr.row)
    if direction in (Direction.TAB, Direction.ENTER):
        ordered = sorted(unlocked, key=lambda p: (p[1], p[0]))  # row-major
        following = [p for p in ordered if (p[1], p[0]) > (pos[1], pos[0])]
        chosen = following[0] if following else ordered[0]
        return CellAddress(sheet_name, chosen[0], chosen[1])

    if direction in (Direction.LEFT, Direction.RIGHT):
        axis = sorted(p for p in unlocked if p[1] == pos[1])
        forward = direction is Direction.RIGHT
    else:
        axis = sorted((p for p in unlocked if p[0] == pos[0]), key=lambda p: p[1])
        forward = direction is Direction.DOWN
    if axis:
        if not forward:
            axis = list(reversed(axis))
        key = (lambda p: p > pos) if forward else (lambda p: p < pos)
        following = [p for p in axis if key(p)]
        chosen = following[0] if following else axis[0]
        return CellAddress(sheet_name, chosen[0], chosen[1])
    # Nothing unlocked on that row/column: fall back to the row-major cycle.
    return navigate_next(workbook, sheet_name, from_addr, Direction.TAB)


# --- Format changes -------------------------------------------------------------

def set_protection_format(
    workbook: Workbook,
    addr: CellAddress | str,
    fmt: CellProtectionFormat,
    actor: Actor,
) -> None:
    """Users lose the Format Cells protection tab while the sheet is protected."""
    addr = workbook.resolve(addr)
    sheet = workbook.sheet(addr.sheet)
    if actor is Actor.USER:
        if sheet.visibility is not SheetVisibility.VISIBLE:
            raise SheetNotVisible(f"sheet {sheet.name!r} is not visible")
        if sheet.protection.enabled:
            raise ProtectionTabUnavailable(
                "the protection tab is unavailable while the sheet is protected"
            )
    sheet.set_format(addr.col, addr.row, fmt)


# --- Copy ---------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class ClipboardEntry:
    addr: CellAddress
    text: str
    is_source: bool  # True when the cell's source text leaked into the payload


@dataclass(frozen=True, slots=True)
class ClipboardPayload:
    entries: tuple[ClipboardEntry, ...]

    def as_text(self) -> str:
        return "\n".join(f"{e.addr.a1}\t{e.text}" for e in self.entries)

    def leaked_sources(self) -> list[ClipboardEntry]:
        return [e for e in self.entries if e.is_source]


def copy_range(
    workbook: Workbook,
    sheet_name: str,
    rect: str | tuple[CellAddress, CellAddress],
    actor: Actor = Actor.USER,
) -> ClipboardPayload:
    """Copy the rectangle spanned by two selectable corners.

    Every engulfed cell contributes: source text when its format still
    reveals contents on copy, otherwise only the displayed value.
    """
    sheet = workbook.sheet(sheet_name)
    if isinstance(rect, str):
        corner_a, corner_b = parse_rect(rect)
    else:
        corner_a = (rect[0].col, rect[0].row)
        corner_b = (rect[1].col, rect[1].row)
    for corner in {corner_a, corner_b}:
        cap = effective_capability(
            workbook, CellAddress(sheet_name, corner[0], corner[1]), actor
        )
        if not cap.selectable:
            raise CornerNotSelectable(
                f"{CellAddress(sheet_name, corner[0], corner[1])} is not selectable"
            )
    values = workbook.values()
    entries = []
    for col, row in rect_cells(corner_a, corner_b):
        addr = CellAddress(sheet_name, col, row)
        cell = sheet.cell_at(col, row)
        content = cell.content if cell is not None else Empty()
        cap = effective_capability(workbook, addr, actor)
        if cap.copy_reveals_contents:
            entries.append(
                ClipboardEntry(addr, content_source(content), not isinstance(content, Empty))
            )
        else:
            entries.append(ClipboardEntry(addr, display_value(values.get(addr)), False))
    return ClipboardPayload(tuple(entries))


# --- Sheet visibility and structure ---------------------------------------------

def list_sheets(workbook: Workbook, actor: Actor = Actor.USER) -> list[tuple[str, SheetVisibility]]:
    """Sheet listing; very-hidden sheets are absent from the user's view."""
    out = []
    for sheet in workbook.sheets:
        if actor is Actor.USER and sheet.visibility is SheetVisibility.VERY_HIDDEN:
            continue
        out.append((sheet.name, sheet.visibility))
    return out


def set_sheet_visibility(
    workbook: Workbook,
    sheet_name: str,
    visibility: SheetVisibility,
    actor: Actor,
) -> None:
    sheet = workbook.sheet(sheet_name)
    if actor is Actor.USER:
        if (
            sheet.visibility is SheetVisibility.VERY_HIDDEN
            or visibility is SheetVisibility.VERY_HIDDEN
        ):
            raise VeryHiddenNotListable(
                "very-hidden state is only reachable through the programmer API"
            )
        if workbook.protection.structure:
            raise StructureProtected("workbook structure is protected")
    sheet.visibility = visibility


def _check_element_password(record: PasswordRecord | None, password: str | None) -> None:
    if record is None:
        return
    if password is None or not verify_record(record, password):
        raise WrongPassword("element password does not match")


def protect_sheet(
    workbook: Workbook,
    sheet_name: str,
    actor: Actor = Actor.PROGRAMMER,
    *,
    password: str | None = None,
    password_record: PasswordRecord | None = None,
    allow_select_locked: bool = True,
    allow_select_unlocked: bool = True,
    allow_format_cells: bool = False,
) -> None:
    """Enable sheet protection. A user toggling protection must present the
    matching element password whenever one is already set."""
    sheet = workbook.sheet(sheet_name)
    protection = sheet.protection
    if actor is Actor.USER:
        _check_element_password(protection.element_password, password)
    protection.enabled = True
    protection.allow_select_locked = allow_select_locked
    protection.allow_select_unlocked = allow_select_unlocked
    protection.allow_format_cells = allow_format_cells
    if password_record is not None:
        protection.element_password = password_record


def unprotect_sheet(
    workbook: Workbook,
    sheet_name: str,
    actor: Actor,
    password: str | None = None,
) -> None:
    sheet = workbook.sheet(sheet_name)
    if actor is Actor.USER:
        _check_element_password(sheet.protection.element_password, password)
    sheet.protection.enabled = False


def protect_workbook(
    workbook: Workbook,
    actor: Actor = Actor.PROGRAMMER,
    *,
    structure: bool = True,
    windows: bool = False,
    password: str | None = None,
    password_record: PasswordRecord | None = None,
) -> None:
    if actor is Actor.USER:
        _check_element_password(workbook.protection.element_password, password)
    workbook.protection.structure = structure
    workbook.protection.windows = windows
    if password_record is not None:
        workbook.protection.element_password = password_record


def unprotect_workbook(
    workbook: Workbook,
    actor: Actor,
    password: str | None = None,
) -> None:
    if actor is Actor.USER:
        _check_element_password(workbook.protection.element_password, password)
    workbook.protection.structure = False
    workbook.protection.windows = False


def resize_window(workbook: Workbook, actor: Actor) -> None:
    """Window geometry is out of scope; the flag only gates the attempt."""
    if actor is Actor.USER and workbook.protection.windows:
        raise StructureProtected("workbook windows are protected")


def _require_structure_unprotected(workbook: Workbook, actor: Actor) -> None:
    if actor is Actor.USER and workbook.protection.structure:
        raise StructureProtected("workbook structure is protected")


def add_sheet(workbook: Workbook, name: str, actor: Actor) -> Sheet:
    _require_structure_unprotected(workbook, actor)
    return workbook.add_sheet(name)


def delete_sheet(workbook: Workbook, name: str, actor: Actor) -> None:
    _require_structure_unprotected(workbook, actor)
    sheet = workbook.sheet(name)
    if actor is Actor.USER and sheet.visibility is SheetVisibility.VERY_HIDDEN:
        raise VeryHiddenNotListable(f"no sheet named {name!r}")
    workbook.sheets.remove(sheet)
    workbook.invalidate()


def rename_sheet(workbook: Workbook, name: str, new_name: str, actor: Actor) -> None:
    _require_structure_unprotected(workbook, actor)
    sheet = workbook.sheet(name)
    if actor is Actor.USER and sheet.visibility is SheetVisibility.VERY_HIDDEN:
        raise VeryHiddenNotListable(f"no sheet named {name!r}")
    if any(s.name == new_name for s in workbook.sheets):
        raise ValueError(f"duplicate sheet name {new_name!r}")
    sheet.name = new_name
    workbook.invalidate()


def audit_arrows_available(workbook: Workbook, sheet_name: str, actor: Actor) -> bool:
    """Precedence/dependence arrows: a programmer-only facility under protection."""
    if actor is Actor.PROGRAMMER:
        return True
    return not workbook.sheet(sheet_name).protection.enabled


def trace_dependents(workbook: Workbook, addr: CellAddress | str, actor: Actor):
    addr = workbook.resolve(addr)
    if not audit_arrows_available(workbook, addr.sheet, actor):
        raise ProtectionTabUnavailable("formula auditing is unavailable under protection")
    return dependents_of(workbook, addr)


# --- The recommended-protection recipe ------------------------------------------

def data_entry_cells(workbook: Workbook) -> set[CellAddress]:
    """Literal cells referenced by at least one formula, plus tagged inputs."""
    from .formula import RangeRef, Ref, walk

    referenced: set[CellAddress] = set(workbook.input_tags)
    for faddr, formula in workbook.formula_cells():
        for node in walk(formula.ast):
            if not isinstance(node, (Ref, RangeRef)) or node.is_external:
                continue
            sheet_name = node.sheet if node.sheet is not None else faddr.sheet
            if not workbook.has_sheet(sheet_name):
                continue
            sheet = workbook.sheet(sheet_name)
            if isinstance(node, RangeRef):
                positions = list(_iter_range_stored(node, sheet))
            else:
                positions = [(node.col, node.row)]
            for col, row in positions:
                cell = sheet.cell_at(col, row)
                if cell is not None and isinstance(cell.content, Literal):
                    referenced.add(CellAddress(sheet_name, col, row))
    return referenced


def _iter_range_stored(rng, sheet: Sheet):
    c1, c2 = sorted((rng.col1, rng.col2))
    r1, r2 = sorted((rng.row1, rng.row2))
    for (col, row) in sheet.cells:
        if c1 <= col <= c2 and r1 <= row <= r2:
            yield col, row


def apply_recommended_protection(
    workbook: Workbook,
    *,
    password_record: PasswordRecord | None = None,
) -> None:
    """One call that applies the full hardening recipe:

    1. format every formula and empty cell locked+hidden, every data-entry
       cell unlocked+unhidden;
    2. protect each sheet allowing only select-unlocked;
    3. hide sheets with no data-entry cells;
    4. protect workbook structure;
    5. attach the element password to every protected element.
    """
    inputs = data_entry_cells(workbook)
    for sheet in workbook.sheets:
        sheet.default_format = CellProtectionFormat(locked=True, hidden=True)
        for (col, row), cell in sheet.cells.items():
            addr = CellAddress(sheet.name, col, row)
            if addr in inputs:
                cell.format = CellProtectionFormat(locked=False, hidden=False)
            else:
                cell.format = CellProtectionFormat(locked=True, hidden=True)
        sheet_has_inputs = any(a.sheet == sheet.name for a in inputs)
        if not sheet_has_inputs and sheet.visibility is SheetVisibility.VISIBLE:
            sheet.visibility = SheetVisibility.HIDDEN
        protect_sheet(
            workbook,
            sheet.name,
            Actor.PROGRAMMER,
            password_record=password_record,
            allow_select_locked=False,
            allow_select_unlocked=True,
            allow_format_cells=False,
        )
    protect_workbook(
        workbook,
        Actor.PROGRAMMER,
        structure=True,
        windows=False,
        password_record=password_record,
    )
