"""Formula language: lexer, parser, canonical renderer.

Grammar (loosest to tightest binding):

    compare   :=  concat (("=" | "<>" | "<" | "<=" | ">" | ">=") concat)*
    concat    :=  additive ("&" additive)*
    additive  :=  multiplicative (("+" | "-") multiplicative)*
    multiplicative := power (("*" | "/") power)*
    power     :=  unary ("^" unary)*
    unary     :=  "-" unary | postfix
    postfix   :=  intersect "%"*
    intersect :=  primary (INTERSECT primary)*
    primary   :=  number | text | bool | name | sheet "!" name
               |  cellref | call | "(" compare ")"

All binary operators associate left.  Unary minus binds tighter than "^"
(so -2 ^ 2 is 4) and looser than "%".  Range intersection is written as
whitespace between two reference terms and binds tightest of all.

Identifiers: first character a letter or "←", then letters, digits,
"." and "_", with one optional trailing "?".  A candidate identifier that
matches the A1 cell-reference pattern (like J16 or $F$5) or the column-range
pattern (like $F:$X) lexes as a cell reference instead; those exist only so
legacy formulas can be parsed and linted, and never name anything.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum, auto


class LexError(ValueError):
    def __init__(self, offset, reason):
        super().__init__("offset %d: %s" % (offset, reason))
        self.offset = offset
        self.reason = reason


class ParseError(ValueError):
    def __init__(self, offset, expected, found):
        super().__init__("offset %d: expected %s, found %s" % (offset, expected, found))
        self.offset = offset
        self.expected = expected
        self.found = found


class TokenKind(Enum):
    NUMBER = auto()
    TEXT = auto()
    BOOL = auto()
    IDENT = auto()
    SHEET_QUAL = auto()   # identifier with a trailing "!"
    CELLREF = auto()
    OP = auto()
    LPAREN = auto()
    RPAREN = auto()
    COMMA = auto()
    INTERSECT = auto()    # whitespace between two reference-producing tokens


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    start: int
    end: int


ARROW = "←"

CELLREF_RE = re.compile(
    r"\$?[A-Za-z]{1,3}\$?[0-9]{1,7}(?::\$?[A-Za-z]{1,3}\$?[0-9]{1,7})?"
    r"|\$?[A-Za-z]{1,3}:\$?[A-Za-z]{1,3}"
)
NUMBER_RE = re.compile(r"(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")

# Whole-lexeme form, used to reject candidate defined names that read as refs.
_CELLREF_FULL = re.compile(r"^(?:%s)$" % CELLREF_RE.pattern)


def _ident_end(text: str, pos: int) -> int:
    """End offset of the identifier starting at pos, or pos if none starts."""
    n = len(text)
    ch = text[pos]
    if not (ch.isalpha() or ch == ARROW):
        return pos
    i = pos + 1
    while i < n and (text[i].isalpha() or text[i].isdigit() or text[i] in "._"):
        i += 1
    if i < n and text[i] == "?":
        i += 1
    return i


def is_identifier(text: str) -> bool:
    """True when text is a legal defined name."""
    if not text:
        return False
    if _ident_end(text, 0) != len(text):
        return False
    if _CELLREF_FULL.match(text):
        return False
    if text.upper() in ("TRUE", "FALSE"):
        return False
    return True


def matches_cellref(text: str) -> bool:
    return bool(_CELLREF_FULL.match(text))


_REF_LEFT = (TokenKind.IDENT, TokenKind.CELLREF, TokenKind.RPAREN)
_REF_RIGHT = (TokenKind.IDENT, TokenKind.CELLREF)


def tokenize(text: str) -> list[Token]:
    """Lex a formula.  A leading "=" or surrounding "{=...}" is tolerated."""
    n = len(text)
    pos = 0
    # Tolerate array-entry braces and the leading equals sign.
    end_limit = n
    while pos < n and text[pos] in " \t":
        pos += 1
    if pos < n and text[pos] == "{":
        close = text.rstrip()
        if not close.endswith("}"):
            raise LexError(pos, "unmatched '{'")
        end_limit = len(close) - 1
        pos += 1
    while pos < end_limit and text[pos] in " \t":
        pos += 1
    if pos < end_limit and text[pos] == "=":
        pos += 1

    tokens: list[Token] = []

    def prev_kind():
        return tokens[-1].kind if tokens else None

    while pos < end_limit:
        ws_start = pos
        while pos < end_limit and text[pos] in " \t":
            pos += 1
        if pos >= end_limit:
            break
        ws_end = pos
        start = pos
        ch = text[pos]

        tok = None
        if ch == '"':
            i = pos + 1
            buf = []
            while True:
                if i >= end_limit:
                    raise LexError(pos, "unterminated text literal")
                if text[i] == '"':
                    if i + 1 < end_limit and text[i + 1] == '"':
                        buf.append('"')
                        i += 2
                        continue
                    i += 1
                    break
                buf.append(text[i])
                i += 1
            tok = Token(TokenKind.TEXT, text[start:i], start, i)
            pos = i
        elif ch == "(":
            tok = Token(TokenKind.LPAREN, "(", start, start + 1)
            pos += 1
        elif ch == ")":
            tok = Token(TokenKind.RPAREN, ")", start, start + 1)
            pos += 1
        elif ch == ",":
            tok = Token(TokenKind.COMMA, ",", start, start + 1)
            pos += 1
        elif text.startswith(("<=", ">=", "<>"), pos):
            tok = Token(TokenKind.OP, text[pos:pos + 2], start, start + 2)
            pos += 2
        elif ch in "+-*/^&=<>%":
            tok = Token(TokenKind.OP, ch, start, start + 1)
            pos += 1
        elif ch.isdigit() or (ch == "." and pos + 1 < end_limit and text[pos + 1].isdigit()):
            m = NUMBER_RE.match(text, pos)
            tok = Token(TokenKind.NUMBER, m.group(0), start, m.end())
            pos = m.end()
        else:
            ident_end = _ident_end(text, pos) if (ch.isalpha() or ch == ARROW) else pos
            cm = CELLREF_RE.match(text, pos) if (ch.isalpha() or ch == "$") else None
            cell_end = cm.end() if cm else pos
            if cell_end <= pos and ident_end <= pos:
                raise LexError(pos, "unexpected character %r" % ch)
            if cell_end >= ident_end and cell_end > pos:
                tok = Token(TokenKind.CELLREF, text[start:cell_end], start, cell_end)
                pos = cell_end
            else:
                lexeme = text[start:ident_end]
                pos = ident_end
                if lexeme.upper() in ("TRUE", "FALSE"):
                    tok = Token(TokenKind.BOOL, lexeme, start, pos)
                elif pos < end_limit and text[pos] == "!":
                    pos += 1
                    tok = Token(TokenKind.SHEET_QUAL, text[start:pos], start, pos)
                else:
                    tok = Token(TokenKind.IDENT, lexeme, start, pos)

        if (ws_end > ws_start and prev_kind() in _REF_LEFT
                and tok.kind in _REF_RIGHT):
            tokens.append(Token(TokenKind.INTERSECT, text[ws_start:ws_end],
                                ws_start, ws_end))
        tokens.append(tok)
    return tokens


# --- AST ---------------------------------------------------------------------

class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class NumberLit(Expr):
    value: float


@dataclass(frozen=True)
class TextLit(Expr):
    value: str


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class NameRef(Expr):
    name: str
    sheet: str | None = None


@dataclass(frozen=True)
class CellRef(Expr):
    """A1-style reference kept only so legacy formulas parse and lint."""
    ref: str
    sheet: str | None = None

    @property
    def is_relative(self) -> bool:
        """True when any row or column component lacks an absolute marker."""
        parts = self.ref.split(":")
        for p in parts:
            m = re.match(r"^(\$?)[A-Z]{1,3}(?:(\$?)[0-9]{1,7})?$", p)
            if m is None:
                return True
            if m.group(1) != "$" or (m.group(2) is not None and m.group(2) != "$"):
                return True
        return False


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    operand: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Intersect(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Percent(Expr):
    operand: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple = ()


def _normalize_cellref(lexeme: str) -> str:
    """Uppercase and order a reference's corners canonically."""
    text = lexeme.upper()
    if ":" not in text:
        return text
    a, b = text.split(":")

    def key(part):
        m = re.match(r"^\$?([A-Z]{1,3})\$?([0-9]{1,7})?$", part)
        col = 0
        for ch in m.group(1):
            col = col * 26 + (ord(ch) - 64)
        row = int(m.group(2)) if m.group(2) else 0
        return (col, row)

    if key(a) > key(b):
        a, b = b, a
    return a + ":" + b


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def advance(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, kind, what):
        tok = self.peek()
        if tok is None or tok.kind is not kind:
            self.fail(what)
        return self.advance()

    def fail(self, expected):
        tok = self.peek()
        if tok is None:
            offset = self.tokens[-1].end if self.tokens else 0
            raise ParseError(offset, expected, "end of formula")
        raise ParseError(tok.start, expected, repr(tok.lexeme))

    def at_op(self, *ops):
        tok = self.peek()
        return tok is not None and tok.kind is TokenKind.OP and tok.lexeme in ops

    def parse(self):
        if not self.tokens:
            raise ParseError(0, "a formula", "end of formula")
        e = self.compare()
        if self.peek() is not None:
            self.fail("end of formula")
        return e

    def compare(self):
        e = self.concat()
        while self.at_op("=", "<>", "<", "<=", ">", ">="):
            op = self.advance().lexeme
            e = Binary(op, e, self.concat())
        return e

    def concat(self):
        e = self.additive()
        while self.at_op("&"):
            self.advance()
            e = Binary("&", e, self.additive())
        return e

    def additive(self):
        e = self.multiplicative()
        while self.at_op("+", "-"):
            op = self.advance().lexeme
            e = Binary(op, e, self.multiplicative())
        return e

    def multiplicative(self):
        e = self.power()
        while self.at_op("*", "/"):
            op = self.advance().lexeme
            e = Binary(op, e, self.power())
        return e

    def power(self):
        e = self.unary()
        while self.at_op("^"):
            self.advance()
            e = Binary("^", e, self.unary())
        return e

    def unary(self):
        if self.at_op("-"):
            self.advance()
            return Unary("-", self.unary())
        return self.postfix()

    def postfix(self):
        e = self.intersect()
        while self.at_op("%"):
            self.advance()
            e = Percent(e)
        return e

    def intersect(self):
        e = self.primary()
        while self.peek() is not None and self.peek().kind is TokenKind.INTERSECT:
            self.advance()
            e = Intersect(e, self.primary())
        return e

    def primary(self):
        tok = self.peek()
        if tok is None:
            self.fail("a value or reference")
        if tok.kind is TokenKind.NUMBER:
            self.advance()
            return NumberLit(float(tok.lexeme))
        if tok.kind is TokenKind.TEXT:
            self.advance()
            return TextLit(tok.lexeme[1:-1].replace('""', '"'))
        if tok.kind is TokenKind.BOOL:
            self.advance()
            return BoolLit(tok.lexeme.upper() == "TRUE")
        if tok.kind is TokenKind.SHEET_QUAL:
            self.advance()
            sheet = tok.lexeme[:-1]
            nxt = self.peek()
            if nxt is not None and nxt.kind is TokenKind.IDENT:
                self.advance()
                return NameRef(nxt.lexeme, sheet)
            if nxt is not None and nxt.kind is TokenKind.CELLREF:
                self.advance()
                return CellRef(_normalize_cellref(nxt.lexeme), sheet)
            self.fail("a name after %r" % tok.lexeme)
        if tok.kind is TokenKind.IDENT:
            self.advance()
            nxt = self.peek()
            if nxt is not None and nxt.kind is TokenKind.LPAREN:
                self.advance()
                args = []
                if self.peek() is not None and self.peek().kind is TokenKind.RPAREN:
                    self.advance()
                else:
                    args.append(self.compare())
                    while self.peek() is not None and self.peek().kind is TokenKind.COMMA:
                        self.advance()
                        args.append(self.compare())
                    self.expect(TokenKind.RPAREN, "')'")
                return Call(tok.lexeme.upper(), tuple(args))
            return NameRef(tok.lexeme)
        if tok.kind is TokenKind.CELLREF:
            self.advance()
            return CellRef(_normalize_cellref(tok.lexeme))
        if tok.kind is TokenKind.LPAREN:
            self.advance()
            e = self.compare()
            self.expect(TokenKind.RPAREN, "')'")
            return e
        self.fail("a value or reference")


def parse(tokens: list[Token]) -> Expr:
    return _Parser(tokens).parse()


def parse_formula(text: str) -> Expr:
    return parse(tokenize(text))


# --- canonical rendering -----------------------------------------------------

_LEVEL_COMPARE = 1
_LEVEL_CONCAT = 2
_LEVEL_ADD = 3
_LEVEL_MUL = 4
_LEVEL_POW = 5
_LEVEL_UNARY = 6
_LEVEL_PERCENT = 7
_LEVEL_INTERSECT = 8
_LEVEL_PRIMARY = 9

_BINARY_LEVEL = {
    "=": _LEVEL_COMPARE, "<>": _LEVEL_COMPARE, "<": _LEVEL_COMPARE,
    "<=": _LEVEL_COMPARE, ">": _LEVEL_COMPARE, ">=": _LEVEL_COMPARE,
    "&": _LEVEL_CONCAT,
    "+": _LEVEL_ADD, "-": _LEVEL_ADD,
    "*": _LEVEL_MUL, "/": _LEVEL_MUL,
    "^": _LEVEL_POW,
}


def _level(e: Expr) -> int:
    if isinstance(e, Binary):
        return _BINARY_LEVEL[e.op]
    if isinstance(e, Unary):
        return _LEVEL_UNARY
    if isinstance(e, Percent):
        return _LEVEL_PERCENT
    if isinstance(e, Intersect):
        return _LEVEL_INTERSECT
    return _LEVEL_PRIMARY


def _wrap(text: str, child: Expr, parent_level: int, right_side: bool) -> str:
    lvl = _level(child)
    if lvl < parent_level or (lvl == parent_level and right_side):
        return "(" + text + ")"
    return text


def render(e: Expr) -> str:
    """Canonical text for an expression; render . parse is the identity."""
    from .values import format_number

    if isinstance(e, NumberLit):
        return format_number(e.value)
    if isinstance(e, TextLit):
        return '"' + e.value.replace('"', '""') + '"'
    if isinstance(e, BoolLit):
        return "TRUE" if e.value else "FALSE"
    if isinstance(e, NameRef):
        return (e.sheet + "!" + e.name) if e.sheet else e.name
    if isinstance(e, CellRef):
        return (e.sheet + "!" + e.ref) if e.sheet else e.ref
    if isinstance(e, Call):
        return e.func + "(" + ", ".join(render(a) for a in e.args) + ")"
    if isinstance(e, Unary):
        inner = _wrap(render(e.operand), e.operand, _LEVEL_UNARY, False)
        return e.op + inner
    if isinstance(e, Percent):
        inner = _wrap(render(e.operand), e.operand, _LEVEL_PERCENT, False)
        return inner + "%"
    if isinstance(e, Intersect):
        lhs = _wrap(render(e.lhs), e.lhs, _LEVEL_INTERSECT, False)
        rhs = _wrap(render(e.rhs), e.rhs, _LEVEL_INTERSECT, True)
        return lhs + " " + rhs
    if isinstance(e, Binary):
        lvl = _BINARY_LEVEL[e.op]
        lhs = _wrap(render(e.lhs), e.lhs, lvl, False)
        rhs = _wrap(render(e.rhs), e.rhs, lvl, True)
        return lhs + " " + e.op + " " + rhs
    raise TypeError("not an expression: %r" % (e,))


def names_referenced(e: Expr) -> set[tuple[str | None, str]]:
    """All (sheet qualifier, identifier) pairs referenced by the expression."""
    out: set[tuple[str | None, str]] = set()

    def walk(node):
        if isinstance(node, NameRef):
            out.add((node.sheet, node.name))
        elif isinstance(node, Unary):
            walk(node.operand)
        elif isinstance(node, Percent):
            walk(node.operand)
        elif isinstance(node, Binary):
            walk(node.lhs)
            walk(node.rhs)
        elif isinstance(node, Intersect):
            walk(node.lhs)
            walk(node.rhs)
        elif isinstance(node, Call):
            for a in node.args:
                walk(a)

    walk(e)
    return out


def cell_refs(e: Expr) -> list[CellRef]:
    """All CellRef nodes, in reading order; used by the linter."""
    out: list[CellRef] = []

    def walk(node):
        if isinstance(node, CellRef):
            out.append(node)
        elif isinstance(node, Unary):
            walk(node.operand)
        elif isinstance(node, Percent):
            walk(node.operand)
        elif isinstance(node, (Binary, Intersect)):
            walk(node.lhs)
            walk(node.rhs)
        elif isinstance(node, Call):
            for a in node.args:
                walk(a)

    walk(e)
    return out
