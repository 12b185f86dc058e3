"""The formula language: tokenizer, AST, parser, and canonical unparser.

The grammar is a closed subset on purpose -- anything outside it is a
syntax error, which keeps redaction and auditing decidable:

    formula    := '=' expr
    expr       := concat (CMPOP concat)*          CMPOP: = <> < <= > >=
    concat     := additive ('&' additive)*
    additive   := term (('+'|'-') term)*
    term       := power (('*'|'/') power)*
    power      := unary ('^' power)               right-associative
    unary      := ('-'|'+') unary | atom
    atom       := NUMBER | STRING | TRUE | FALSE
                | NAME '(' args ')'               SUM AVERAGE MIN MAX IF COUNT
                | reference (':' A1)?             optional range tail
                | '(' expr ')'
    reference  := ('[' bookname ']')? (sheetname '!')? A1

External references (``[book]Sheet!A1``) carry an explicit marker so the
linking restriction can reject them without evaluating anything.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .addresses import format_sheet_name, letters_to_col, validate_sheet_name
from .errors import ArityError, FormulaSyntaxError

FUNCTIONS = {
    "SUM": (1, None),
    "AVERAGE": (1, None),
    "MIN": (1, None),
    "MAX": (1, None),
    "COUNT": (1, None),
    "IF": (3, 3),
}

CMP_OPS = ("<=", ">=", "<>", "=", "<", ">")


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Number:
    value: float


@dataclass(frozen=True, slots=True)
class Text:
    value: str


@dataclass(frozen=True, slots=True)
class Boolean:
    value: bool


@dataclass(frozen=True, slots=True)
class Ref:
    """A single-cell reference; ``book`` is set only for external references."""

    col: int
    row: int
    sheet: str | None = None
    book: str | None = None

    @property
    def is_external(self) -> bool:
        return self.book is not None


@dataclass(frozen=True, slots=True)
class RangeRef:
    col1: int
    row1: int
    col2: int
    row2: int
    sheet: str | None = None
    book: str | None = None

    @property
    def is_external(self) -> bool:
        return self.book is not None

    def cells(self):
        for row in range(min(self.row1, self.row2), max(self.row1, self.row2) + 1):
            for col in range(min(self.col1, self.col2), max(self.col1, self.col2) + 1):
                yield col, row


@dataclass(frozen=True, slots=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True, slots=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True, slots=True)
class Call:
    func: str
    args: tuple["Expr", ...]


Expr = Number | Text | Boolean | Ref | RangeRef | Unary | Binary | Call


def walk(expr: Expr):
    """Yield every node of the AST, depth-first."""
    yield expr
    if isinstance(expr, Unary):
        yield from walk(expr.operand)
    elif isinstance(expr, Binary):
        yield from walk(expr.left)
        yield from walk(expr.right)
    elif isinstance(expr, Call):
        for arg in expr.args:
            yield from walk(arg)


def has_external_ref(expr: Expr) -> bool:
    return any(
        isinstance(node, (Ref, RangeRef)) and node.is_external for node in walk(expr)
    )


# --- Tokenizer ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?)
  | (?P<string>"(?:[^"]|"")*")
  | (?P<extref>\[[^\]\x00-\x1f]+\])
  | (?P<quoted>'[^'\x00-\x1f]*')
  | (?P<name>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<op><=|>=|<>|[=<>+\-*/^&(),:!])
    """,
    re.VERBOSE,
)

_A1_TOKEN_RE = re.compile(r"^([A-Za-z]{1,3})([0-9]+)$")


@dataclass(frozen=True, slots=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(source: str, offset: int) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            raise FormulaSyntaxError(
                f"unexpected character {source[pos]!r}", offset + pos
            )
        kind = m.lastgroup or ""
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), offset + pos))
        pos = m.end()
    tokens.append(_Token("eof", "", offset + pos))
    return tokens


# --- Parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text:
            raise FormulaSyntaxError(f"expected {text!r}", tok.pos)
        return self.next()

    def parse_expr(self) -> Expr:
        node = self.parse_concat()
        while self.peek().text in CMP_OPS:
            op = self.next().text
            node = Binary(op, node, self.parse_concat())
        return node

    def parse_concat(self) -> Expr:
        node = self.parse_additive()
        while self.peek().text == "&":
            self.next()
            node = Binary("&", node, self.parse_additive())
        return node

    def parse_additive(self) -> Expr:
        node = self.parse_term()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            node = Binary(op, node, self.parse_term())
        return node

    def parse_term(self) -> Expr:
        node = self.parse_power()
        while self.peek().text in ("*", "/"):
            op = self.next().text
            node = Binary(op, node, self.parse_power())
        return node

    def parse_power(self) -> Expr:
        node = self.parse_unary()
        if self.peek().text == "^":
            self.next()
            node = Binary("^", node, self.parse_power())
        return node

    def parse_unary(self) -> Expr:
        tok = self.peek()
        if tok.text in ("-", "+"):
            self.next()
            operand = self.parse_unary()
            # Fold signs on numeric literals so "-1" is canonical Number(-1).
            if isinstance(operand, Number):
                return Number(-operand.value) if tok.text == "-" else operand
            return Unary(tok.text, operand)
        return self.parse_atom()

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "number":
            self.next()
            value = float(tok.text)
            if math.isinf(value):
                raise FormulaSyntaxError("number literal out of range", tok.pos)
            return Number(value)
        if tok.kind == "string":
            self.next()
            return Text(tok.text[1:-1].replace('""', '"'))
        if tok.text == "(":
            self.next()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if tok.kind == "extref" or tok.kind == "quoted":
            return self.parse_reference()
        if tok.kind == "name":
            upper = tok.text.upper()
            if upper in ("TRUE", "FALSE") and self.tokens[self.i + 1].text != "!":
                self.next()
                return Boolean(upper == "TRUE")
            if self.tokens[self.i + 1].text == "(":
                return self.parse_call()
            return self.parse_reference()
        raise FormulaSyntaxError(f"unexpected token {tok.text!r}", tok.pos)

    def parse_call(self) -> Expr:
        name_tok = self.next()
        func = name_tok.text.upper()
        self.expect("(")
        args: list[Expr] = []
        if self.peek().text != ")":
            args.append(self.parse_expr())
            while self.peek().text == ",":
                self.next()
                args.append(self.parse_expr())
        self.expect(")")
        spec = FUNCTIONS.get(func)
        if spec is not None:
            lo, hi = spec
            if len(args) < lo or (hi is not None and len(args) > hi):
                raise ArityError(
                    f"{func} takes {'exactly ' + str(lo) if lo == hi else 'at least ' + str(lo)}"
                    f" argument(s), got {len(args)}",
                    name_tok.pos,
                )
        return Call(func, tuple(args))

    def parse_reference(self) -> Expr:
        book: str | None = None
        sheet: str | None = None
        tok = self.peek()
        if tok.kind == "extref":
            self.next()
            book = tok.text[1:-1]
            tok = self.peek()
        if tok.kind == "quoted":
            self.next()
            sheet = tok.text[1:-1]
            self.expect("!")
            tok = self.peek()
        elif tok.kind == "name" and self.tokens[self.i + 1].text == "!":
            self.next()
            sheet = tok.text
            self.next()  # '!'
            tok = self.peek()
        elif book is not None:
            # [book]A1 with no sheet is not addressable; require a sheet.
            raise FormulaSyntaxError("external reference requires a sheet", tok.pos)
        if sheet is not None:
            try:
                validate_sheet_name(sheet)
            except ValueError as exc:
                raise FormulaSyntaxError(str(exc), tok.pos) from None
        if tok.kind != "name":
            raise FormulaSyntaxError("expected a cell reference", tok.pos)
        m = _A1_TOKEN_RE.match(tok.text)
        if not m:
            raise FormulaSyntaxError(f"not a cell reference: {tok.text!r}", tok.pos)
        self.next()
        col, row = letters_to_col(m.group(1)), int(m.group(2))
        if self.peek().text == ":":
            self.next()
            end_tok = self.peek()
            m2 = _A1_TOKEN_RE.match(end_tok.text) if end_tok.kind == "name" else None
            if not m2:
                raise FormulaSyntaxError("expected a cell reference after ':'", end_tok.pos)
            self.next()
            col2, row2 = letters_to_col(m2.group(1)), int(m2.group(2))
            return RangeRef(col, row, col2, row2, sheet=sheet, book=book)
        return Ref(col, row, sheet=sheet, book=book)


def parse_formula(source: str) -> Expr:
    """Parse ``=...`` source text into an AST.

    Raises FormulaSyntaxError (with character offset) or ArityError.
    """
    if not source.startswith("="):
        raise FormulaSyntaxError("formula must begin with '='", 0)
    tokens = _tokenize(source[1:], 1)
    parser = _Parser(tokens)
    expr = parser.parse_expr()
    trailing = parser.peek()
    if trailing.kind != "eof":
        raise FormulaSyntaxError(f"unexpected trailing input {trailing.text!r}", trailing.pos)
    return expr


# --- Unparser ---------------------------------------------------------------

_PRECEDENCE = {
    "=": 1, "<>": 1, "<": 1, "<=": 1, ">": 1, ">=": 1,
    "&": 2,
    "+": 3, "-": 3,
    "*": 4, "/": 4,
    "^": 5,
}
_UNARY_PRECEDENCE = 6


def _fmt_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _ref_prefix(sheet: str | None, book: str | None) -> str:
    out = ""
    if book is not None:
        out += f"[{book}]"
    if sheet is not None:
        out += f"{format_sheet_name(sheet)}!"
    return out


def _cell_text(col: int, row: int) -> str:
    from .addresses import col_to_letters

    return f"{col_to_letters(col)}{row}"


def _unparse(expr: Expr, parent_prec: int) -> str:
    if isinstance(expr, Number):
        return _fmt_number(expr.value)
    if isinstance(expr, Text):
        return '"' + expr.value.replace('"', '""') + '"'
    if isinstance(expr, Boolean):
        return "TRUE" if expr.value else "FALSE"
    if isinstance(expr, Ref):
        return _ref_prefix(expr.sheet, expr.book) + _cell_text(expr.col, expr.row)
    if isinstance(expr, RangeRef):
        return (
            _ref_prefix(expr.sheet, expr.book)
            + _cell_text(expr.col1, expr.row1)
            + ":"
            + _cell_text(expr.col2, expr.row2)
        )
    if isinstance(expr, Unary):
        inner = _unparse(expr.operand, _UNARY_PRECEDENCE)
        text = expr.op + inner
        return f"({text})" if parent_prec > _UNARY_PRECEDENCE else text
    if isinstance(expr, Binary):
        prec = _PRECEDENCE[expr.op]
        # Left-associative chains need parens on an equal-precedence right
        # child; '^' is right-associative so the rule flips there.
        if expr.op == "^":
            left = _unparse(expr.left, prec + 1)
            right = _unparse(expr.right, prec)
        else:
            left = _unparse(expr.left, prec)
            right = _unparse(expr.right, prec + 1)
        text = f"{left}{expr.op}{right}"
        return f"({text})" if parent_prec > prec else text
    if isinstance(expr, Call):
        args = ",".join(_unparse(a, 0) for a in expr.args)
        return f"{expr.func}({args})"
    raise TypeError(f"not an AST node: {expr!r}")


def unparse(expr: Expr) -> str:
    """Canonical source text for an AST; ``parse_formula(unparse(e)) == e``."""
    return "=" + _unparse(expr, 0)
