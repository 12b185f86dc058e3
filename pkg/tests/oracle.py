"""An independent recalculation oracle.

Deliberately different machinery from the engine under test:

  * cycle membership by Kahn-style peeling (cells whose references never
    fully resolve are exactly the cells on or downstream of a cycle);
  * values by Jacobi sweeps (re-evaluate every formula against the previous
    sweep's map until nothing changes), instead of topological ordering;
  * its own recursive expression evaluator.

Shared with the engine: only the AST node types and the documented
semantics.
"""

from __future__ import annotations

from pws.addresses import CellAddress
from pws.formula import Binary, Boolean, Call, Number, RangeRef, Ref, Text, Unary
from pws.values import CellError, ErrorKind
from pws.workbook import Formula, Literal, Workbook

_CYCLE = CellError(ErrorKind.CYCLE)
_REF = CellError(ErrorKind.REF)
_DIV0 = CellError(ErrorKind.DIV0)
_VALUE = CellError(ErrorKind.VALUE)
_NAME = CellError(ErrorKind.NAME)

_EMPTY = object()


class _Err(Exception):
    def __init__(self, error):
        self.error = error


def _fmt(v: float) -> str:
    return str(int(v)) if v == int(v) and abs(v) < 1e16 else repr(v)


def _num(v) -> float:
    if v is _EMPTY:
        return 0.0
    if isinstance(v, bool):
        return float(v)
    if isinstance(v, float):
        return v
    if isinstance(v, CellError):
        raise _Err(v)
    raise _Err(_VALUE)


def _text(v) -> str:
    if v is _EMPTY:
        return ""
    if isinstance(v, CellError):
        raise _Err(v)
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, float):
        return _fmt(v)
    if isinstance(v, str):
        return v
    raise _Err(_VALUE)


def _truth(v) -> bool:
    if v is _EMPTY:
        return False
    if isinstance(v, bool):
        return v
    if isinstance(v, float):
        return v != 0.0
    if isinstance(v, CellError):
        raise _Err(v)
    raise _Err(_VALUE)


def _finite(x: float):
    if x != x:
        raise _Err(_VALUE)
    if x in (float("inf"), float("-inf")):
        raise _Err(_DIV0)
    return x


def _cmp(op, a, b):
    if isinstance(a, CellError):
        raise _Err(a)
    if isinstance(b, CellError):
        raise _Err(b)
    if a is _EMPTY and b is _EMPTY:
        a = b = 0.0
    elif a is _EMPTY:
        a = False if isinstance(b, bool) else 0.0 if isinstance(b, float) else ""
    elif b is _EMPTY:
        b = False if isinstance(a, bool) else 0.0 if isinstance(a, float) else ""
    both_bool = isinstance(a, bool) and isinstance(b, bool)
    both_num = (
        isinstance(a, float) and isinstance(b, float) and not isinstance(a, bool) and not isinstance(b, bool)
    )
    both_text = isinstance(a, str) and isinstance(b, str)
    if not (both_bool or both_num or both_text):
        raise _Err(_VALUE)
    return {
        "=": a == b,
        "<>": a != b,
        "<": a < b,
        "<=": a <= b,
        ">": a > b,
        ">=": a >= b,
    }[op]


class _List:
    def __init__(self, items):
        self.items = items


def _numbers(values):
    for v in values:
        if isinstance(v, _List):
            for item in v.items:
                if isinstance(item, CellError):
                    raise _Err(item)
                if isinstance(item, float) and not isinstance(item, bool):
                    yield item
        elif v is _EMPTY:
            continue
        else:
            yield _num(v)


def _eval(expr, lookup, sheet_name):
    if isinstance(expr, Number):
        return expr.value
    if isinstance(expr, Text):
        return expr.value
    if isinstance(expr, Boolean):
        return expr.value
    if isinstance(expr, Ref):
        if expr.book is not None:
            return _REF
        return lookup(expr.sheet or sheet_name, expr.col, expr.row)
    if isinstance(expr, RangeRef):
        if expr.book is not None:
            return _List([_REF])
        target = expr.sheet or sheet_name
        items = []
        for row in range(min(expr.row1, expr.row2), max(expr.row1, expr.row2) + 1):
            for col in range(min(expr.col1, expr.col2), max(expr.col1, expr.col2) + 1):
                v = lookup(target, col, row, stored_only=True)
                if v is not _EMPTY:
                    items.append(v)
        return _List(items)
    if isinstance(expr, Unary):
        v = _num(_eval(expr.operand, lookup, sheet_name))
        return _finite(-v) if expr.op == "-" else v
    if isinstance(expr, Binary):
        a = _eval(expr.left, lookup, sheet_name)
        b = _eval(expr.right, lookup, sheet_name)
        op = expr.op
        if op == "&":
            return _text(a) + _text(b)
        if op in ("=", "<>", "<", "<=", ">", ">="):
            return _cmp(op, a, b)
        x, y = _num(a), _num(b)
        if op == "+":
            return _finite(x + y)
        if op == "-":
            return _finite(x - y)
        if op == "*":
            return _finite(x * y)
        if op == "/":
            if y == 0:
                raise _Err(_DIV0)
            return _finite(x / y)
        if op == "^":
            try:
                out = x**y
            except ZeroDivisionError:
                raise _Err(_DIV0) from None
            except OverflowError:
                raise _Err(_VALUE) from None
            if isinstance(out, complex):
                raise _Err(_VALUE)
            return _finite(out)
        raise AssertionError(op)
    if isinstance(expr, Call):
        values = [_eval(a, lookup, sheet_name) for a in expr.args]
        f = expr.func
        if f == "SUM":
            return _finite(sum(_numbers(values), 0.0))
        if f == "COUNT":
            return float(len(list(_numbers(values))))
        if f == "AVERAGE":
            nums = list(_numbers(values))
            if not nums:
                raise _Err(_DIV0)
            return _finite(sum(nums) / len(nums))
        if f == "MIN":
            nums = list(_numbers(values))
            return min(nums) if nums else 0.0
        if f == "MAX":
            nums = list(_numbers(values))
            return max(nums) if nums else 0.0
        if f == "IF":
            for v in values:
                if isinstance(v, CellError):
                    raise _Err(v)
                if isinstance(v, _List):
                    raise _Err(_VALUE)
            return values[1] if _truth(values[0]) else values[2]
        raise _Err(_NAME)
    raise AssertionError(expr)


def _formula_edges(wb: Workbook, addr: CellAddress, ast) -> set[CellAddress]:
    """Formula cells this formula reads (ranges included), same book only."""
    out = set()
    stack = [ast]
    while stack:
        node = stack.pop()
        if isinstance(node, Ref) and node.book is None:
            target = node.sheet or addr.sheet
            if wb.has_sheet(target):
                cell = wb.sheet(target).cell_at(node.col, node.row)
                if cell is not None and isinstance(cell.content, Formula):
                    out.add(CellAddress(target, node.col, node.row))
        elif isinstance(node, RangeRef) and node.book is None:
            target = node.sheet or addr.sheet
            if wb.has_sheet(target):
                sheet = wb.sheet(target)
                for (col, row), cell in sheet.cells.items():
                    if (
                        min(node.col1, node.col2) <= col <= max(node.col1, node.col2)
                        and min(node.row1, node.row2) <= row <= max(node.row1, node.row2)
                        and isinstance(cell.content, Formula)
                    ):
                        out.add(CellAddress(target, col, row))
        elif isinstance(node, Unary):
            stack.append(node.operand)
        elif isinstance(node, Binary):
            stack.extend((node.left, node.right))
        elif isinstance(node, Call):
            stack.extend(node.args)
    return out


def oracle_recalculate(wb: Workbook) -> dict[CellAddress, object]:
    literals: dict[CellAddress, object] = {}
    formulas: dict[CellAddress, object] = {}
    for sheet in wb.sheets:
        for (col, row), cell in sheet.cells.items():
            addr = CellAddress(sheet.name, col, row)
            if isinstance(cell.content, Literal):
                literals[addr] = cell.content.value
            elif isinstance(cell.content, Formula):
                formulas[addr] = cell.content.ast

    # Cycle set by peeling: repeatedly remove formulas all of whose formula
    # references are already resolved; whatever survives depends on a cycle.
    edges = {addr: _formula_edges(wb, addr, ast) for addr, ast in formulas.items()}
    resolved: set[CellAddress] = set()
    changed = True
    while changed:
        changed = False
        for addr in list(formulas):
            if addr in resolved:
                continue
            if all(dep in resolved for dep in edges[addr] if dep != addr) and addr not in edges[addr]:
                resolved.add(addr)
                changed = True
    cyclic = {addr for addr in formulas if addr not in resolved}

    values: dict[CellAddress, object] = dict(literals)
    for addr in cyclic:
        values[addr] = _CYCLE

    def lookup(sheet_name, col, row, stored_only=False):
        if col > 10_000 or row > 10_000:
            return _REF
        if not wb.has_sheet(sheet_name):
            return _REF
        addr = CellAddress(sheet_name, col, row)
        if addr in values:
            return values[addr]
        return _EMPTY

    pending = sorted(set(formulas) - cyclic, key=str)
    for _ in range(len(pending) + 2):
        changed = False
        for addr in pending:
            try:
                new = _eval(formulas[addr], lookup, addr.sheet)
                if isinstance(new, _List):
                    new = _VALUE
                elif new is _EMPTY:
                    new = 0.0
            except _Err as err:
                new = err.error
            if values.get(addr, _EMPTY) != new or addr not in values:
                values[addr] = new
                changed = True
        if not changed:
            break
    else:
        raise AssertionError("oracle failed to converge")
    return values
