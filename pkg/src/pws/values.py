"""Cell values and their display form.

Values are plain Python floats / strings / bools plus two sentinels: a
``CellError`` carrying one of the closed error kinds, and ``EMPTY`` for a
reference to a cell with no content (coerced per context: 0 in arithmetic,
"" in concatenation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class ErrorKind(Enum):
    CYCLE = "CYCLE"
    REF = "REF"
    DIV0 = "DIV0"
    VALUE = "VALUE"
    NAME = "NAME"


@dataclass(frozen=True, slots=True)
class CellError:
    kind: ErrorKind

    @property
    def display(self) -> str:
        return f"#{self.kind.value}"


class _Empty:
    __slots__ = ()

    def __repr__(self) -> str:
        return "EMPTY"


EMPTY = _Empty()

Value = float | str | bool | CellError
# EMPTY appears only transiently during evaluation, never as a cell's value.

CYCLE = CellError(ErrorKind.CYCLE)
REF = CellError(ErrorKind.REF)
DIV0 = CellError(ErrorKind.DIV0)
VALUE_ERROR = CellError(ErrorKind.VALUE)
NAME_ERROR = CellError(ErrorKind.NAME)


def is_error(v) -> bool:
    return isinstance(v, CellError)


def make_finite(v: float) -> Value:
    """Arithmetic results must be finite; otherwise degrade to an error."""
    if math.isnan(v):
        return VALUE_ERROR
    if math.isinf(v):
        return DIV0 if v > 0 or v < 0 else VALUE_ERROR
    return v


def display_value(v) -> str:
    """The string a user sees in the grid for a computed value."""
    if v is None or v is EMPTY:
        return ""
    if isinstance(v, CellError):
        return v.display
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, float):
        if v == int(v) and abs(v) < 1e16:
            return str(int(v))
        return repr(v)
    return str(v)
