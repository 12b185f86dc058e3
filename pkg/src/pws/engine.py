"""Formula evaluation over a workbook grid.

Recalculation builds the cell dependency graph, condenses strongly
connected components (any cell on a cycle evaluates to #CYCLE), and
evaluates in topological order; cells downstream of a cycle pick the error
up through ordinary error propagation. Results are deterministic.

Coercion rules (closed and total):
  - arithmetic coerces EMPTY -> 0 and booleans -> 1/0; text is #VALUE.
  - ``&`` coerces everything to display text; EMPTY -> "".
  - comparisons require like types (numbers, texts ordinal case-sensitive,
    booleans); EMPTY coerces to the other side's zero value; mixed -> #VALUE.
  - aggregate functions skip non-numbers inside ranges but propagate errors.
  - IF is strict: all three arguments are evaluated and any error wins,
    which makes "downstream of a cycle" a pure graph property.
  - external references resolve only through registered books; otherwise #REF.
"""

from __future__ import annotations

from .addresses import MAX_DIM, CellAddress
from .formula import Binary, Boolean, Call, Expr, Number, RangeRef, Ref, Text, Unary
from .values import (
    CYCLE,
    DIV0,
    EMPTY,
    NAME_ERROR,
    REF,
    VALUE_ERROR,
    CellError,
    display_value,
    is_error,
    make_finite,
)
from .workbook import Formula, Literal, Sheet, Workbook


class _ErrorSignal(Exception):
    def __init__(self, error: CellError):
        self.error = error


class _RangeValues:
    """Evaluated range: the scalar values of its stored cells."""

    __slots__ = ("values",)

    def __init__(self, values: list):
        self.values = values


def _num(v) -> float:
    if v is EMPTY:
        return 0.0
    if isinstance(v, bool):
        return 1.0 if v else 0.0
    if isinstance(v, float):
        return v
    if is_error(v):
        raise _ErrorSignal(v)
    raise _ErrorSignal(VALUE_ERROR)


def _text(v) -> str:
    if v is EMPTY:
        return ""
    if is_error(v):
        raise _ErrorSignal(v)
    if isinstance(v, _RangeValues):
        raise _ErrorSignal(VALUE_ERROR)
    return display_value(v)


def _bool(v) -> bool:
    if v is EMPTY:
        return False
    if isinstance(v, bool):
        return v
    if isinstance(v, float):
        return v != 0.0
    if is_error(v):
        raise _ErrorSignal(v)
    raise _ErrorSignal(VALUE_ERROR)


def _zero_like(other):
    if isinstance(other, bool):
        return False
    if isinstance(other, float):
        return 0.0
    if isinstance(other, str):
        return ""
    return other


def _compare(op: str, a, b) -> bool:
    if is_error(a):
        raise _ErrorSignal(a)
    if is_error(b):
        raise _ErrorSignal(b)
    if a is EMPTY and b is EMPTY:
        a = b = 0.0
    elif a is EMPTY:
        a = _zero_like(b)
    elif b is EMPTY:
        b = _zero_like(a)
    same_kind = (
        (isinstance(a, bool) and isinstance(b, bool))
        or (isinstance(a, float) and isinstance(b, float) and not isinstance(a, bool) and not isinstance(b, bool))
        or (isinstance(a, str) and isinstance(b, str))
    )
    if not same_kind:
        raise _ErrorSignal(VALUE_ERROR)
    if op == "=":
        return a == b
    if op == "<>":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _arith(op: str, a, b):
    x, y = _num(a), _num(b)
    if op == "+":
        return make_finite(x + y)
    if op == "-":
        return make_finite(x - y)
    if op == "*":
        return make_finite(x * y)
    if op == "/":
        if y == 0.0:
            raise _ErrorSignal(DIV0)
        return make_finite(x / y)
    if op == "^":
        try:
            result = x ** y
        except ZeroDivisionError:
            raise _ErrorSignal(DIV0) from None
        except OverflowError:
            raise _ErrorSignal(VALUE_ERROR) from None
        if isinstance(result, complex):
            raise _ErrorSignal(VALUE_ERROR)
        return make_finite(result)
    raise AssertionError(op)


def _numeric_stream(args_values):
    """Numbers from scalar args and range contents; errors propagate."""
    for v in args_values:
        if isinstance(v, _RangeValues):
            for item in v.values:
                if is_error(item):
                    raise _ErrorSignal(item)
                if isinstance(item, float) and not isinstance(item, bool):
                    yield item
        elif v is EMPTY:
            continue
        else:
            yield _num(v)


def _call(func: str, values: list):
    if func == "SUM":
        return make_finite(sum(_numeric_stream(values), 0.0))
    if func == "COUNT":
        return float(sum(1 for _ in _numeric_stream(values)))
    if func == "AVERAGE":
        nums = list(_numeric_stream(values))
        if not nums:
            raise _ErrorSignal(DIV0)
        return make_finite(sum(nums) / len(nums))
    if func == "MIN":
        nums = list(_numeric_stream(values))
        return min(nums) if nums else 0.0
    if func == "MAX":
        nums = list(_numeric_stream(values))
        return max(nums) if nums else 0.0
    if func == "IF":
        cond, then_v, else_v = values
        for v in (cond, then_v, else_v):
            if is_error(v):
                raise _ErrorSignal(v)
            if isinstance(v, _RangeValues):
                raise _ErrorSignal(VALUE_ERROR)
        return then_v if _bool(cond) else else_v
    raise _ErrorSignal(NAME_ERROR)


class _EvalContext:
    """Resolves references against computed values during one recalculation."""

    def __init__(self, workbook: Workbook, sheet_name: str, values: dict):
        self.workbook = workbook
        self.sheet_name = sheet_name
        self.values = values

    def _lookup(self, book: str | None, sheet: str | None, col: int, row: int):
        sheet_name = sheet if sheet is not None else self.sheet_name
        if book is not None:
            target = self.workbook.external_books.get(book)
            if target is None or getattr(target, "_recalc_in_progress", False):
                return REF
            if not target.has_sheet(sheet_name):
                return REF
            ext = target.values().get(CellAddress(sheet_name, col, row))
            return ext if ext is not None else EMPTY
        if col > MAX_DIM or row > MAX_DIM:
            return REF
        if not self.workbook.has_sheet(sheet_name):
            return REF
        v = self.values.get(CellAddress(sheet_name, col, row))
        return v if v is not None else EMPTY

    def ref_value(self, ref: Ref):
        return self._lookup(ref.book, ref.sheet, ref.col, ref.row)

    def range_values(self, rng: RangeRef) -> _RangeValues:
        sheet_name = rng.sheet if rng.sheet is not None else self.sheet_name
        if rng.book is not None:
            target = self.workbook.external_books.get(rng.book)
            if target is None or getattr(target, "_recalc_in_progress", False):
                return _RangeValues([REF])
            if not target.has_sheet(sheet_name):
                return _RangeValues([REF])
            values, sheet = target.values(), target.sheet(sheet_name)
        elif self.workbook.has_sheet(sheet_name):
            values, sheet = self.values, self.workbook.sheet(sheet_name)
        else:
            return _RangeValues([REF])
        out = []
        for col, row in _range_positions(rng, sheet):
            v = values.get(CellAddress(sheet_name, col, row))
            if v is not None:
                out.append(v)
        return _RangeValues(out)


def _range_positions(rng: RangeRef, sheet: Sheet):
    """Stored-cell positions covered by a range, cheap even for huge ranges."""
    c1, c2 = sorted((rng.col1, rng.col2))
    r1, r2 = sorted((rng.row1, rng.row2))
    area = (c2 - c1 + 1) * (r2 - r1 + 1)
    if area <= len(sheet.cells):
        for row in range(r1, r2 + 1):
            for col in range(c1, c2 + 1):
                if (col, row) in sheet.cells:
                    yield col, row
    else:
        # Same row-major order as above: float aggregation order is part of
        # the deterministic contract.
        for col, row in sorted(sheet.cells, key=lambda p: (p[1], p[0])):
            if c1 <= col <= c2 and r1 <= row <= r2:
                yield col, row


def evaluate_expr(expr: Expr, ctx: _EvalContext):
    try:
        result = _eval(expr, ctx)
    except _ErrorSignal as sig:
        return sig.error
    if isinstance(result, _RangeValues):
        return VALUE_ERROR  # a bare range is not a scalar cell value
    if result is EMPTY:
        return 0.0  # e.g. IF picking a reference to an empty cell
    return result


def _eval(expr: Expr, ctx: _EvalContext):
    if isinstance(expr, Number):
        return expr.value
    if isinstance(expr, Text):
        return expr.value
    if isinstance(expr, Boolean):
        return expr.value
    if isinstance(expr, Ref):
        return ctx.ref_value(expr)
    if isinstance(expr, RangeRef):
        return ctx.range_values(expr)
    if isinstance(expr, Unary):
        v = _num(_eval(expr.operand, ctx))
        return make_finite(-v) if expr.op == "-" else v
    if isinstance(expr, Binary):
        left = _eval(expr.left, ctx)
        right = _eval(expr.right, ctx)
        if expr.op == "&":
            return _text(left) + _text(right)
        if expr.op in ("+", "-", "*", "/", "^"):
            return _arith(expr.op, left, right)
        return _compare(expr.op, left, right)
    if isinstance(expr, Call):
        return _call(expr.func, [_eval(a, ctx) for a in expr.args])
    raise AssertionError(f"not an AST node: {expr!r}")


# --- Dependency analysis -------------------------------------------------------


def _internal_ref_targets(workbook: Workbook, sheet_name: str, expr: Expr):
    """Formula-cell addresses this expression reads (same book only)."""
    for node in _walk_refs(expr):
        if node.is_external:
            continue
        target_sheet = node.sheet if node.sheet is not None else sheet_name
        if not workbook.has_sheet(target_sheet):
            continue
        sheet = workbook.sheet(target_sheet)
        if isinstance(node, Ref):
            cell = sheet.cell_at(node.col, node.row)
            if cell is not None and isinstance(cell.content, Formula):
                yield CellAddress(target_sheet, node.col, node.row)
        else:
            for col, row in _range_positions(node, sheet):
                cell = sheet.cells[(col, row)]
                if isinstance(cell.content, Formula):
                    yield CellAddress(target_sheet, col, row)


def _walk_refs(expr: Expr):
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, (Ref, RangeRef)):
            yield node
        elif isinstance(node, Unary):
            stack.append(node.operand)
        elif isinstance(node, Binary):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Call):
            stack.extend(node.args)


def _references_address(expr: Expr, sheet_name: str, addr: CellAddress) -> bool:
    for node in _walk_refs(expr):
        if node.is_external:
            continue
        target_sheet = node.sheet if node.sheet is not None else sheet_name
        if target_sheet != addr.sheet:
            continue
        if isinstance(node, Ref):
            if node.col == addr.col and node.row == addr.row:
                return True
        else:
            c1, c2 = sorted((node.col1, node.col2))
            r1, r2 = sorted((node.row1, node.row2))
            if c1 <= addr.col <= c2 and r1 <= addr.row <= r2:
                return True
    return False


def _tarjan_sccs(nodes: list, edges: dict) -> list[list]:
    """Iterative Tarjan; returns SCCs in reverse topological order."""
    index_of: dict = {}
    lowlink: dict = {}
    on_stack: set = set()
    stack: list = []
    sccs: list[list] = []
    counter = 0

    for root in nodes:
        if root in index_of:
            continue
        work = [(root, iter(edges.get(root, ())))]
        index_of[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for succ in it:
                if succ not in index_of:
                    index_of[succ] = lowlink[succ] = counter
                    counter += 1
                    stack.append(succ)
                    on_stack.add(succ)
                    work.append((succ, iter(edges.get(succ, ()))))
                    advanced = True
                    break
                if succ in on_stack:
                    lowlink[node] = min(lowlink[node], index_of[succ])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
            if lowlink[node] == index_of[node]:
                scc = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    scc.append(member)
                    if member == node:
                        break
                sccs.append(scc)
    return sccs


def recalculate(workbook: Workbook) -> dict[CellAddress, object]:
    """Evaluate every non-empty cell; never raises, errors become values."""
    values: dict[CellAddress, object] = {}
    formulas: dict[CellAddress, Formula] = {}
    for sheet in workbook.sheets:
        for (col, row), cell in sheet.cells.items():
            addr = CellAddress(sheet.name, col, row)
            if isinstance(cell.content, Literal):
                values[addr] = cell.content.value
            elif isinstance(cell.content, Formula):
                formulas[addr] = cell.content

    edges = {
        addr: sorted(set(_internal_ref_targets(workbook, addr.sheet, f.ast)),
                     key=lambda a: (a.sheet, a.row, a.col))
        for addr, f in formulas.items()
    }
    order = sorted(formulas, key=lambda a: (a.sheet, a.row, a.col))
    sccs = _tarjan_sccs(order, edges)

    workbook._recalc_in_progress = True
    tainted: set[CellAddress] = set()
    try:
        for scc in sccs:  # reverse topological order: dependencies first
            on_cycle = len(scc) > 1 or scc[0] in edges.get(scc[0], ())
            # Cells downstream of a cycle are #CYCLE by construction, no
            # matter what other errors evaluation might meet first.
            downstream = not on_cycle and any(
                dep in tainted for dep in edges.get(scc[0], ())
            )
            if on_cycle or downstream:
                tainted.update(scc)
                for addr in scc:
                    values[addr] = CYCLE
                continue
            addr = scc[0]
            ctx = _EvalContext(workbook, addr.sheet, values)
            values[addr] = evaluate_expr(formulas[addr].ast, ctx)
    finally:
        workbook._recalc_in_progress = False
    return values


def dependents_of(workbook: Workbook, addr: CellAddress | str) -> set[CellAddress]:
    """Transitive closure of cells whose value can change when addr changes."""
    addr = workbook.resolve(addr)
    formulas = [(a, f) for a, f in workbook.formula_cells()]
    result: set[CellAddress] = set()
    frontier = [addr]
    while frontier:
        current = frontier.pop()
        for faddr, formula in formulas:
            if faddr in result:
                continue
            if _references_address(formula.ast, faddr.sheet, current):
                result.add(faddr)
                frontier.append(faddr)
    return result
