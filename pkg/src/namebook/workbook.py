"""Workbook model: sheets, grid ranges, defined names.

A workbook is a set of sheets holding literal cell contents plus a set of
defined names.  Names are the only referencing mechanism formulas may use;
each name either targets a rectangular grid range (kind "range") or is a
pure named formula with no cells of its own (kind "formula").  A range name
may additionally carry one array formula that populates every cell of its
rectangle.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .formula import Expr, is_identifier, render


class WorkbookError(Exception):
    pass


class DuplicateNameError(WorkbookError):
    pass


class OverlappingFormulaRangeError(WorkbookError):
    pass


class BadIdentifierError(WorkbookError):
    pass


class UnknownNameError(WorkbookError):
    pass


class UnknownSheetError(WorkbookError):
    pass


class RefError(WorkbookError):
    """Range algebra produced a reference outside any sheet (#REF!)."""


WORKBOOK_SCOPE = None  # scope value for workbook-scoped names

_SHEET_NAME_RE = re.compile(r"^[^\W\d][\w.]*$")


def col_to_index(letters: str) -> int:
    n = 0
    for ch in letters.upper():
        n = n * 26 + (ord(ch) - 64)
    return n


def index_to_col(n: int) -> str:
    out = []
    while n > 0:
        n, rem = divmod(n - 1, 26)
        out.append(chr(65 + rem))
    return "".join(reversed(out))


@dataclass(frozen=True)
class GridRange:
    """1-based inclusive rectangle on one sheet.

    row_start/row_end of None (always both) mean the whole-column form: every
    row the sheet declares.  Whole-column ranges clamp to the declared row
    count at evaluation time.
    """

    sheet: str
    col_start: int
    col_end: int
    row_start: int | None = None
    row_end: int | None = None

    def __post_init__(self):
        if (self.row_start is None) != (self.row_end is None):
            raise ValueError("row bounds are whole as a pair")
        if self.col_start < 1 or self.col_end < self.col_start:
            c1, c2 = sorted((self.col_start, self.col_end))
            if c1 < 1:
                raise ValueError("columns are 1-based")
            object.__setattr__(self, "col_start", c1)
            object.__setattr__(self, "col_end", c2)
        if self.row_start is not None:
            if self.row_start < 1 or self.row_end < self.row_start:
                r1, r2 = sorted((self.row_start, self.row_end))
                if r1 < 1:
                    raise ValueError("rows are 1-based")
                object.__setattr__(self, "row_start", r1)
                object.__setattr__(self, "row_end", r2)

    @property
    def is_whole_rows(self) -> bool:
        return self.row_start is None

    def clamp(self, sheet_rows: int) -> "GridRange":
        """Bounded version of this range for a sheet with sheet_rows rows."""
        if not self.is_whole_rows:
            return self
        return GridRange(self.sheet, self.col_start, self.col_end, 1, sheet_rows)

    def shape(self, sheet_rows: int | None = None):
        r = self.clamp(sheet_rows) if self.is_whole_rows else self
        if r.is_whole_rows:
            raise ValueError("whole-column range needs a row count for its shape")
        return (r.row_end - r.row_start + 1, r.col_end - r.col_start + 1)

    def contains(self, row: int, col: int) -> bool:
        if not (self.col_start <= col <= self.col_end):
            return False
        if self.is_whole_rows:
            return True
        return self.row_start <= row <= self.row_end

    def intersect(self, other: "GridRange") -> "GridRange | None":
        """Intersection, or None for the empty result (the #NULL! case).

        WHOLE bounds intersect as the other operand's bounds, so the
        operation is commutative, associative and idempotent.
        """
        if self.sheet != other.sheet:
            return None
        c1 = max(self.col_start, other.col_start)
        c2 = min(self.col_end, other.col_end)
        if c1 > c2:
            return None
        if self.is_whole_rows and other.is_whole_rows:
            return GridRange(self.sheet, c1, c2)
        if self.is_whole_rows:
            r1, r2 = other.row_start, other.row_end
        elif other.is_whole_rows:
            r1, r2 = self.row_start, self.row_end
        else:
            r1 = max(self.row_start, other.row_start)
            r2 = min(self.row_end, other.row_end)
            if r1 > r2:
                return None
        return GridRange(self.sheet, c1, c2, r1, r2)

    def shift(self, dr: int, dc: int) -> "GridRange":
        """Displaced copy; raises RefError when pushed off the sheet's edge."""
        c1, c2 = self.col_start + dc, self.col_end + dc
        if c1 < 1:
            raise RefError("shift moves %s off the sheet" % (self.address(),))
        if self.is_whole_rows:
            if dr != 0:
                raise RefError("whole-column range cannot shift by rows")
            return GridRange(self.sheet, c1, c2)
        r1, r2 = self.row_start + dr, self.row_end + dr
        if r1 < 1:
            raise RefError("shift moves %s off the sheet" % (self.address(),))
        return GridRange(self.sheet, c1, c2, r1, r2)

    def index_slice(self, row: int, col: int) -> "GridRange":
        """Sub-range selection; index 0 keeps the whole extent on that axis.

        Raises RefError when an index falls outside the band.
        """
        if row < 0 or col < 0:
            raise RefError("negative index")
        out = self
        if col != 0:
            if col > self.col_end - self.col_start + 1:
                raise RefError("column index %d outside %s" % (col, self.address()))
            c = self.col_start + col - 1
            out = GridRange(out.sheet, c, c, out.row_start, out.row_end)
        if row != 0:
            if self.is_whole_rows:
                r = row  # whole-column band: row index is the absolute row
            else:
                if row > self.row_end - self.row_start + 1:
                    raise RefError("row index %d outside %s" % (row, self.address()))
                r = self.row_start + row - 1
            out = GridRange(out.sheet, out.col_start, out.col_end, r, r)
        return out

    def cells(self, sheet_rows: int | None = None):
        r = self.clamp(sheet_rows) if self.is_whole_rows else self
        for row in range(r.row_start, r.row_end + 1):
            for col in range(r.col_start, r.col_end + 1):
                yield (row, col)

    def address(self, with_sheet: bool = False) -> str:
        """A1 text for this range (only serialization may show addresses)."""
        if self.is_whole_rows:
            body = "%s:%s" % (index_to_col(self.col_start), index_to_col(self.col_end))
        else:
            a = "%s%d" % (index_to_col(self.col_start), self.row_start)
            b = "%s%d" % (index_to_col(self.col_end), self.row_end)
            body = a if a == b else a + ":" + b
        return ("%s!%s" % (self.sheet, body)) if with_sheet else body


_A1_PART = re.compile(r"^\$?([A-Z]{1,3})\$?([0-9]{1,7})?$", re.IGNORECASE)


def parse_a1(sheet: str, text: str) -> GridRange:
    """GridRange for an A1 rectangle like F5:X16, C3 or F:X."""
    parts = text.split(":")
    if len(parts) > 2 or not parts[0]:
        raise ValueError("bad A1 rectangle %r" % text)
    m1 = _A1_PART.match(parts[0])
    m2 = _A1_PART.match(parts[-1])
    if not m1 or not m2:
        raise ValueError("bad A1 rectangle %r" % text)
    c1, r1 = col_to_index(m1.group(1)), m1.group(2)
    c2, r2 = col_to_index(m2.group(1)), m2.group(2)
    if (r1 is None) != (r2 is None):
        raise ValueError("bad A1 rectangle %r" % text)
    if r1 is None:
        if len(parts) == 1:
            raise ValueError("bad A1 rectangle %r" % text)
        lo, hi = sorted((c1, c2))
        return GridRange(sheet, lo, hi)
    return GridRange(sheet, min(c1, c2), max(c1, c2),
                     min(int(r1), int(r2)), max(int(r1), int(r2)))


RANGE = "range"
FORMULA = "formula"


@dataclass
class NameDef:
    """One defined name.

    kind "range" names target a GridRange and may carry an array formula
    that populates it.  kind "formula" names are pure expressions with no
    cells.  `derive` records that the target was produced by shifting
    another name's range, as (base identifier, dr, dc).  A range name whose
    target is None is dangling (its sheet was deleted) and evaluates to
    #REF!.
    """

    identifier: str
    scope: str | None = WORKBOOK_SCOPE
    kind: str = RANGE
    target: GridRange | None = None
    formula: Expr | None = None
    array: bool = False
    derive: tuple[str, int, int] | None = None

    def key(self):
        return (self.scope, self.identifier)

    def display(self) -> str:
        if self.scope is None:
            return self.identifier
        return "%s!%s" % (self.scope, self.identifier)

    def formula_text(self) -> str | None:
        return render(self.formula) if self.formula is not None else None


@dataclass
class Sheet:
    name: str
    rows: int
    cols: int
    cells: dict = field(default_factory=dict)  # (row, col) -> scalar literal

    def get(self, row: int, col: int):
        return self.cells.get((row, col))

    def set(self, row: int, col: int, value):
        if not (1 <= row <= self.rows and 1 <= col <= self.cols):
            raise RefError("cell (%d, %d) outside sheet %s" % (row, col, self.name))
        if value is None:
            self.cells.pop((row, col), None)
        else:
            if isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            self.cells[(row, col)] = value


class Workbook:
    """Sheets plus defined names.  Mutators return self for chaining.

    A workbook behaves as a value: evaluation never mutates it, and callers
    that need an independent copy take one with copy().
    """

    def __init__(self):
        self.sheets: dict[str, Sheet] = {}
        self.names: dict[tuple, NameDef] = {}

    # -- sheets ---------------------------------------------------------

    def add_sheet(self, name: str, rows: int, cols: int) -> "Workbook":
        if not _SHEET_NAME_RE.match(name) or name == "workbook":
            raise BadIdentifierError("bad sheet name %r" % name)
        if name in self.sheets:
            raise DuplicateNameError("sheet %r already exists" % name)
        if rows < 1 or cols < 1:
            raise ValueError("sheet extent must be positive")
        self.sheets[name] = Sheet(name, rows, cols)
        return self

    def sheet(self, name: str) -> Sheet:
        try:
            return self.sheets[name]
        except KeyError:
            raise UnknownSheetError("no sheet named %r" % name) from None

    def set_cell(self, sheet: str, row: int, col: int, value) -> "Workbook":
        self.sheet(sheet).set(row, col, value)
        return self

    def fill_block(self, rng: GridRange, rows) -> "Workbook":
        """Write a rectangle of literals covering rng, row-major."""
        sh = self.sheet(rng.sheet)
        bounded = rng.clamp(sh.rows)
        data = [list(r) for r in rows]
        shape = bounded.shape()
        if len(data) != shape[0] or any(len(r) != shape[1] for r in data):
            raise ValueError("block shape %s does not cover %s"
                             % ((len(data), len(data[0]) if data else 0), rng.address()))
        for i, row in enumerate(range(bounded.row_start, bounded.row_end + 1)):
            for j, col in enumerate(range(bounded.col_start, bounded.col_end + 1)):
                sh.set(row, col, data[i][j])
        return self

    def delete_sheet(self, name: str) -> "Workbook":
        """Remove a sheet, its sheet-scoped names, and dangle the rest.

        Sheet-scoped names die with their sheet.  Workbook-scoped range
        names that target the sheet keep their identity but lose the
        target, evaluating to #REF! from then on.
        """
        self.sheet(name)
        del self.sheets[name]
        for key in [k for k, d in self.names.items() if d.scope == name]:
            del self.names[key]
        for d in self.names.values():
            if d.target is not None and d.target.sheet == name:
                d.target = None
                d.formula = None
                d.derive = None
                d.array = False
        return self

    # -- names ----------------------------------------------------------

    def _check_target(self, target: GridRange):
        sh = self.sheet(target.sheet)
        if target.col_end > sh.cols:
            raise RefError("%s exceeds sheet columns" % target.address(True))
        if not target.is_whole_rows and target.row_end > sh.rows:
            raise RefError("%s exceeds sheet rows" % target.address(True))

    def _check_formula_overlap(self, candidate: NameDef):
        if candidate.formula is None or candidate.target is None:
            return
        mine = candidate.target.clamp(self.sheet(candidate.target.sheet).rows)
        for other in self.names.values():
            if other.key() == candidate.key():
                continue
            if other.formula is None or other.target is None:
                continue
            theirs = other.target.clamp(self.sheet(other.target.sheet).rows)
            if mine.intersect(theirs) is not None:
                raise OverlappingFormulaRangeError(
                    "%s overlaps formula range %s"
                    % (candidate.display(), other.display()))

    def define_name(self, nd: NameDef) -> "Workbook":
        if not is_identifier(nd.identifier):
            raise BadIdentifierError("bad identifier %r" % nd.identifier)
        if nd.scope is not None and nd.scope not in self.sheets:
            raise UnknownSheetError("scope sheet %r does not exist" % nd.scope)
        if nd.key() in self.names:
            raise DuplicateNameError("name %s already defined" % nd.display())
        if nd.kind == RANGE:
            if nd.target is None:
                raise ValueError("range name %s needs a target" % nd.display())
            self._check_target(nd.target)
        elif nd.kind == FORMULA:
            if nd.formula is None:
                raise ValueError("formula name %s needs a formula" % nd.display())
            if nd.target is not None:
                raise ValueError("formula name %s cannot target cells" % nd.display())
        else:
            raise ValueError("unknown name kind %r" % nd.kind)
        self._check_formula_overlap(nd)
        self.names[nd.key()] = nd
        return self

    def rebind_name(self, identifier: str, scope: str | None, refers_to) -> "Workbook":
        """Point an existing name at a new range or a new formula.

        The late-binding contract: formulas referencing this name pick up
        the new meaning on the next evaluation.  Rebinding to a GridRange
        yields a plain range name (any defining formula is dropped);
        rebinding to an Expr yields a pure formula name.
        """
        key = (scope, identifier)
        nd = self.names.get(key)
        if nd is None:
            raise UnknownNameError("no name %r in scope %r" % (identifier, scope))
        if isinstance(refers_to, GridRange):
            self._check_target(refers_to)
            nd.kind = RANGE
            nd.target = refers_to
            nd.formula = None
            nd.derive = None
        elif isinstance(refers_to, Expr):
            nd.kind = FORMULA
            nd.target = None
            nd.formula = refers_to
            nd.derive = None
            nd.array = False
        else:
            raise TypeError("rebind target must be a GridRange or an Expr")
        return self

    def resolve(self, identifier: str, context: str | None = None,
                qualifier: str | None = None) -> NameDef | None:
        """Find the definition an occurrence of `identifier` binds to.

        Sheet-scoped names shadow workbook-scoped ones inside their sheet's
        context; an explicit qualifier re-targets the context instead.
        Returns None when nothing matches (the #NAME? case).
        """
        where = qualifier if qualifier is not None else context
        if where is not None:
            nd = self.names.get((where, identifier))
            if nd is not None:
                return nd
        return self.names.get((WORKBOOK_SCOPE, identifier))

    def formula_bearing(self):
        """Range names that own an array formula, in definition order."""
        return [d for d in self.names.values()
                if d.kind == RANGE and d.formula is not None and d.target is not None]

    def input_ranges(self):
        """Range names without formulas (the workbook's declared inputs)."""
        return [d for d in self.names.values()
                if d.kind == RANGE and d.formula is None and d.target is not None]

    def context_sheet(self, nd: NameDef) -> str | None:
        """Sheet whose names an unqualified reference in nd's formula sees."""
        if nd.scope is not None:
            return nd.scope
        if nd.target is not None:
            return nd.target.sheet
        return None

    def copy(self) -> "Workbook":
        out = Workbook()
        for sh in self.sheets.values():
            out.sheets[sh.name] = Sheet(sh.name, sh.rows, sh.cols, dict(sh.cells))
        for key, nd in self.names.items():
            out.names[key] = NameDef(nd.identifier, nd.scope, nd.kind, nd.target,
                                     nd.formula, nd.array, nd.derive)
        return out


def shift_name(base: NameDef, identifier: str, dr: int, dc: int) -> NameDef:
    """Displaced twin of a range name, carrying its derivation marker.

    The conventional use is the one-left twin: shift_name(price, "←price",
    0, -1) names the same rectangle displaced one column left, which is what
    lets an array formula read its own previous column.
    """
    if base.target is None:
        raise ValueError("cannot shift a dangling name")
    return NameDef(identifier, base.scope, RANGE,
                   target=base.target.shift(dr, dc),
                   derive=(base.identifier, dr, dc))
