"""Workbook, sheet, and cell model with protection state.

A cell's protection format defaults to the sheet-wide default (locked,
unhidden -- the classic default), so an untouched cell is still locked.
``VeryHidden`` visibility is representable here but only the programmer
entry points in :mod:`pws.protection` may set or clear it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .addresses import MAX_DIM, CellAddress, parse_address
from .errors import UnknownAddress
from .formula import Expr, has_external_ref, parse_formula
from .passwords import PasswordRecord


class SheetVisibility(Enum):
    VISIBLE = "visible"
    HIDDEN = "hidden"
    VERY_HIDDEN = "very_hidden"


@dataclass(frozen=True, slots=True)
class CellProtectionFormat:
    locked: bool = True
    hidden: bool = False


DEFAULT_FORMAT = CellProtectionFormat(locked=True, hidden=False)


@dataclass(slots=True)
class SheetProtection:
    enabled: bool = False
    element_password: PasswordRecord | None = None
    allow_select_locked: bool = True
    allow_select_unlocked: bool = True
    allow_format_cells: bool = False


@dataclass(slots=True)
class WorkbookProtection:
    structure: bool = False
    windows: bool = False
    element_password: PasswordRecord | None = None


# --- Cell content -------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Empty:
    pass


@dataclass(frozen=True, slots=True)
class Literal:
    value: float | str


class Formula:
    """Formula source plus its parsed AST; source always re-parses to ast."""

    __slots__ = ("source", "ast")

    def __init__(self, source: str, ast: Expr | None = None):
        self.source = source
        self.ast = ast if ast is not None else parse_formula(source)

    def __eq__(self, other) -> bool:
        return isinstance(other, Formula) and self.ast == other.ast

    def __hash__(self) -> int:
        return hash(self.ast)

    def __repr__(self) -> str:
        return f"Formula({self.source!r})"


CellContent = Empty | Literal | Formula

EMPTY_CONTENT = Empty()


def content_from_input(text: str) -> CellContent:
    """What typing ``text`` into a cell produces: formula, number, or text.

    Only finite numbers become numeric literals; "nan"/"inf" spellings stay
    text, keeping every stored Number finite.
    """
    if text == "":
        return EMPTY_CONTENT
    if text.startswith("="):
        return Formula(text)
    try:
        value = float(text)
    except ValueError:
        return Literal(text)
    return Literal(value) if math.isfinite(value) else Literal(text)


def content_source(content: CellContent) -> str:
    """The editable source text of a cell (what the formula bar would show)."""
    if isinstance(content, Empty):
        return ""
    if isinstance(content, Literal):
        if isinstance(content.value, float):
            if content.value == int(content.value) and abs(content.value) < 1e16:
                return str(int(content.value))
            return repr(content.value)
        return content.value
    return content.source


@dataclass(slots=True)
class Cell:
    content: CellContent = EMPTY_CONTENT
    format: CellProtectionFormat | None = None  # None -> sheet default
    flattened: bool = False


@dataclass(slots=True)
class Sheet:
    name: str
    visibility: SheetVisibility = SheetVisibility.VISIBLE
    protection: SheetProtection = field(default_factory=SheetProtection)
    default_format: CellProtectionFormat = DEFAULT_FORMAT
    cells: dict[tuple[int, int], Cell] = field(default_factory=dict)

    def cell_at(self, col: int, row: int) -> Cell | None:
        return self.cells.get((col, row))

    def format_at(self, col: int, row: int) -> CellProtectionFormat:
        cell = self.cells.get((col, row))
        if cell is not None and cell.format is not None:
            return cell.format
        return self.default_format

    def content_at(self, col: int, row: int) -> CellContent:
        cell = self.cells.get((col, row))
        return cell.content if cell is not None else EMPTY_CONTENT

    def set_format(self, col: int, row: int, fmt: CellProtectionFormat) -> None:
        cell = self.cells.get((col, row))
        if cell is None:
            cell = Cell()
            self.cells[(col, row)] = cell
        cell.format = fmt


class Workbook:
    """A single-threaded workbook instance; all multi-user coordination is
    the server's job."""

    def __init__(self):
        self.sheets: list[Sheet] = []
        self.protection = WorkbookProtection()
        self.open_file_password: PasswordRecord | None = None
        self.version: int = 1
        self.acl = None  # set by pws.access when the workbook is shared
        self.external_books: dict[str, "Workbook"] = {}
        self.input_tags: set[CellAddress] = set()  # runtime-only, audit rule R2
        self._values: dict[CellAddress, object] | None = None

    # -- sheets --

    def add_sheet(self, name: str) -> Sheet:
        if any(s.name == name for s in self.sheets):
            raise ValueError(f"duplicate sheet name {name!r}")
        sheet = Sheet(name=name)
        self.sheets.append(sheet)
        self.invalidate()
        return sheet

    def sheet(self, name: str) -> Sheet:
        for sheet in self.sheets:
            if sheet.name == name:
                return sheet
        raise UnknownAddress(f"no sheet named {name!r}")

    def has_sheet(self, name: str) -> bool:
        return any(s.name == name for s in self.sheets)

    # -- cells --

    def resolve(self, addr: CellAddress | str) -> CellAddress:
        if isinstance(addr, str):
            default = self.sheets[0].name if self.sheets else None
            addr = parse_address(addr, default_sheet=default)
        if addr.col > MAX_DIM or addr.row > MAX_DIM:
            raise UnknownAddress(f"{addr} beyond the {MAX_DIM}x{MAX_DIM} grid")
        if not self.has_sheet(addr.sheet):
            raise UnknownAddress(f"no sheet named {addr.sheet!r}")
        return addr

    def get_cell(self, addr: CellAddress | str) -> Cell | None:
        addr = self.resolve(addr)
        return self.sheet(addr.sheet).cell_at(addr.col, addr.row)

    def content(self, addr: CellAddress | str) -> CellContent:
        addr = self.resolve(addr)
        return self.sheet(addr.sheet).content_at(addr.col, addr.row)

    def set_content(self, addr: CellAddress | str, content: CellContent, *, flattened: bool = False) -> CellAddress:
        addr = self.resolve(addr)
        sheet = self.sheet(addr.sheet)
        cell = sheet.cells.get((addr.col, addr.row))
        if cell is None:
            cell = Cell()
            sheet.cells[(addr.col, addr.row)] = cell
        cell.content = content
        cell.flattened = flattened
        self.invalidate()
        return addr

    def set_input(self, addr: CellAddress | str, text: str) -> CellAddress:
        """Programmer convenience: parse ``text`` the way cell entry would."""
        return self.set_content(addr, content_from_input(text))

    def tag_input(self, addr: CellAddress | str) -> None:
        """Mark a cell as a data-entry field for the audit's benefit."""
        self.input_tags.add(self.resolve(addr))

    # -- formula helpers --

    def formula_cells(self):
        for sheet in self.sheets:
            for (col, row), cell in sheet.cells.items():
                if isinstance(cell.content, Formula):
                    yield CellAddress(sheet.name, col, row), cell.content

    def has_external_links(self) -> bool:
        return any(has_external_ref(f.ast) for _, f in self.formula_cells())

    # -- value cache (filled by pws.engine.recalculate) --

    def invalidate(self) -> None:
        self._values = None

    def values(self) -> dict[CellAddress, object]:
        if self._values is None:
            from .engine import recalculate

            self._values = recalculate(self)
        return self._values

    def value(self, addr: CellAddress | str):
        addr = self.resolve(addr)
        return self.values().get(addr)

    # -- copying --

    def clone(self) -> "Workbook":
        """Deep-enough copy: content objects are immutable and shared."""
        out = Workbook()
        for sheet in self.sheets:
            copied = Sheet(
                name=sheet.name,
                visibility=sheet.visibility,
                protection=replace(sheet.protection),
                default_format=sheet.default_format,
                cells={
                    key: Cell(content=c.content, format=c.format, flattened=c.flattened)
                    for key, c in sheet.cells.items()
                },
            )
            out.sheets.append(copied)
        out.protection = replace(self.protection)
        out.open_file_password = self.open_file_password
        out.version = self.version
        out.external_books = dict(self.external_books)
        out.input_tags = set(self.input_tags)
        if self.acl is not None:
            out.acl = self.acl.clone()
        return out
