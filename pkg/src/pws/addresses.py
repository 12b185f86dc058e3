"""Cell addresses and their A1-style textual form.

Grid coordinates are 1-based and capped at MAX_DIM in each dimension; sheet
names are nonempty, contain no control characters, and never contain ``!``
or ``'`` (which keeps the textual form unambiguous without an escape
grammar). ``parse_address(format(a)) == a`` round-trips.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import UnknownAddress

MAX_DIM = 10_000

_A1_RE = re.compile(r"^([A-Za-z]+)([0-9]+)$")
_BARE_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def col_to_letters(col: int) -> str:
    if col < 1:
        raise UnknownAddress(f"column index {col} out of range")
    out = []
    n = col
    while n:
        n, rem = divmod(n - 1, 26)
        out.append(chr(ord("A") + rem))
    return "".join(reversed(out))


def letters_to_col(letters: str) -> int:
    n = 0
    for ch in letters.upper():
        n = n * 26 + (ord(ch) - ord("A") + 1)
    return n


def validate_sheet_name(name: str) -> str:
    if not name:
        raise ValueError("sheet name must be nonempty")
    if any(ord(c) < 32 for c in name):
        raise ValueError("sheet name must not contain control characters")
    if "!" in name or "'" in name or "[" in name or "]" in name or ":" in name:
        raise ValueError(f"sheet name {name!r} contains a reserved character")
    return name


@dataclass(frozen=True, slots=True)
class CellAddress:
    sheet: str
    col: int
    row: int

    def __post_init__(self):
        validate_sheet_name(self.sheet)
        if self.col < 1 or self.row < 1:
            raise UnknownAddress(f"coordinates ({self.col},{self.row}) out of range")

    @property
    def a1(self) -> str:
        return f"{col_to_letters(self.col)}{self.row}"

    def __str__(self) -> str:
        return f"{format_sheet_name(self.sheet)}!{self.a1}"

    def in_bounds(self) -> bool:
        return self.col <= MAX_DIM and self.row <= MAX_DIM


def format_sheet_name(name: str) -> str:
    return name if _BARE_NAME_RE.match(name) else f"'{name}'"


def parse_a1(text: str) -> tuple[int, int]:
    """``"B3"`` -> ``(2, 3)``."""
    m = _A1_RE.match(text)
    if not m:
        raise UnknownAddress(f"not an A1 reference: {text!r}")
    col = letters_to_col(m.group(1))
    row = int(m.group(2))
    if row < 1:
        raise UnknownAddress(f"row index {row} out of range")
    return col, row


def parse_address(text: str, default_sheet: str | None = None) -> CellAddress:
    """Parse ``Sheet1!A1`` / ``'My Sheet'!A1`` / bare ``A1`` (needs a default sheet)."""
    sheet: str | None
    rest = text.strip()
    if "!" in rest:
        sheet_part, rest = rest.split("!", 1)
        sheet_part = sheet_part.strip()
        if sheet_part.startswith("'") and sheet_part.endswith("'") and len(sheet_part) >= 2:
            sheet_part = sheet_part[1:-1]
        sheet = sheet_part
    else:
        sheet = default_sheet
    if sheet is None:
        raise UnknownAddress(f"address {text!r} has no sheet and no default was given")
    col, row = parse_a1(rest)
    return CellAddress(sheet, col, row)


def parse_rect(text: str) -> tuple[tuple[int, int], tuple[int, int]]:
    """``"A1:C3"`` -> ``((1, 1), (3, 3))``; a single address is a 1x1 rect."""
    if ":" in text:
        first, second = text.split(":", 1)
        return parse_a1(first.strip()), parse_a1(second.strip())
    corner = parse_a1(text.strip())
    return corner, corner


def rect_cells(corner_a: tuple[int, int], corner_b: tuple[int, int]):
    """All (col, row) pairs in the axis-aligned rectangle spanned by two corners."""
    c1, c2 = sorted((corner_a[0], corner_b[0]))
    r1, r2 = sorted((corner_a[1], corner_b[1]))
    for row in range(r1, r2 + 1):
        for col in range(c1, c2 + 1):
            yield col, row
