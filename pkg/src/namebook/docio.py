"""The Names document: export a workbook to text, rebuild it from text.

The document is the workbook.  Sheets give the grid its size, name
declarations carry every formula, and data blocks carry every literal
cell of the non-formula named ranges.  Rebuilding the document and
evaluating gives back exactly the values of the original, and exporting
a rebuilt document reproduces it byte for byte.

This is the one corner of the system where A1 grid addresses are
written down: a range name has to bottom out at actual cells somewhere,
and target= fields are that somewhere.  Formulas never contain them.

Format (UTF-8, LF):

    #%NAMESDOC v1
    [SHEET] <name> rows=<int> cols=<int>
    [NAME] scope=<workbook|sheetname> id=<id> kind=<range|formula> array=<0|1>
      target=<sheet>!<A1rect>
      derive=shift(<base-id>,<dr>,<dc>)
      formula=<canonical formula text>
    [DATA] <sheet>!<A1rect>
    <tab-separated literals, one line per grid row>

Sheet lines keep declaration order; name blocks sort by (scope, id); data
blocks sort by address.  Within a name block the field order is fixed.
"""

from __future__ import annotations

import re

from .formula import is_identifier, names_referenced, parse_formula, render
from .values import format_number
from .workbook import (FORMULA, RANGE, GridRange, NameDef, Workbook,
                       WorkbookError, parse_a1)

HEADER = "#%NAMESDOC v1"


class ExportError(Exception):
    """The workbook cannot be fully described by a document."""


class DocSyntaxError(Exception):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__("line %d: %s" % (line, reason))


class UnknownVersion(Exception):
    pass


class UndeclaredName(Exception):
    """A formula in the document references a name the document never
    declares, breaking the closed-world property."""

    def __init__(self, name: str, referenced_by: str):
        self.name = name
        self.referenced_by = referenced_by
        super().__init__("%s, referenced by %s, is not declared" %
                         (name, referenced_by))


# --- literal field codec -----------------------------------------------------

_ESCAPES = {"\\": "\\\\", '"': '\\"', "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {"\\": "\\", '"': '"', "t": "\t", "n": "\n", "r": "\r"}


def encode_field(v) -> str:
    """One literal cell as document text.  Blank is the empty field."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, float):
        return format_number(v)
    if isinstance(v, str):
        out = ['"']
        for ch in v:
            out.append(_ESCAPES.get(ch, ch))
        out.append('"')
        return "".join(out)
    raise ExportError("cell holds an unserializable value %r" % (v,))


def decode_field(text: str, line: int):
    if text == "":
        return None
    if text == "TRUE":
        return True
    if text == "FALSE":
        return False
    if text.startswith('"'):
        if len(text) < 2 or not text.endswith('"'):
            raise DocSyntaxError(line, "unterminated text literal %r" % text)
        out = []
        i = 1
        while i < len(text) - 1:
            ch = text[i]
            if ch == "\\":
                i += 1
                if i >= len(text) - 1:
                    raise DocSyntaxError(line, "dangling escape in %r" % text)
                esc = _UNESCAPES.get(text[i])
                if esc is None:
                    raise DocSyntaxError(line, "unknown escape \\%s" % text[i])
                out.append(esc)
            elif ch == '"':
                raise DocSyntaxError(line, "unescaped quote inside %r" % text)
            else:
                out.append(ch)
            i += 1
        return "".join(out)
    try:
        return float(text)
    except ValueError:
        raise DocSyntaxError(line, "unreadable literal %r" % text) from None


# --- export ------------------------------------------------------------------

def _scope_text(scope) -> str:
    return "workbook" if scope is None else scope


def stray_formula_cells(wb: Workbook):
    """Literal text cells that carry a leading "=", i.e. formulas living
    outside any named range's single defining formula."""
    stray = []
    for sheet in wb.sheets.values():
        for (r, c), v in sorted(sheet.cells.items()):
            if isinstance(v, str) and v.startswith("="):
                stray.append(GridRange(sheet.name, c, c, r, r).address(True))
    return stray


def export_doc(wb: Workbook) -> str:
    stray = stray_formula_cells(wb)
    if stray:
        raise ExportError("formula cells outside any named formula: %s" %
                          ", ".join(stray))
    lines = [HEADER]
    for sheet in wb.sheets.values():
        lines.append("[SHEET] %s rows=%d cols=%d" %
                     (sheet.name, sheet.rows, sheet.cols))

    def name_key(nd: NameDef):
        return (_scope_text(nd.scope), nd.identifier)

    for nd in sorted(wb.names.values(), key=name_key):
        if nd.kind == RANGE and nd.target is None:
            raise ExportError("name %s dangles (its sheet was deleted); "
                              "rebind or delete it before exporting" %
                              nd.display())
        lines.append("[NAME] scope=%s id=%s kind=%s array=%d" %
                     (_scope_text(nd.scope), nd.identifier, nd.kind,
                      1 if nd.array else 0))
        if nd.kind == RANGE:
            lines.append("  target=%s" % nd.target.address(with_sheet=True))
            if nd.derive is not None:
                base, dr, dc = nd.derive
                lines.append("  derive=shift(%s,%d,%d)" % (base, dr, dc))
        if nd.formula is not None:
            text = render(nd.formula)
            if "\n" in text or "\r" in text:
                raise ExportError("formula of %s contains a line break" %
                                  nd.display())
            lines.append("  formula=%s" % text)

    blocks = {}
    for nd in wb.names.values():
        if nd.kind != RANGE or nd.formula is not None or nd.target is None:
            continue
        addr = nd.target.address(with_sheet=True)
        blocks[addr] = nd.target
    for addr in sorted(blocks):
        rng = blocks[addr]
        sheet = wb.sheet(rng.sheet)
        bounded = rng.clamp(sheet.rows)
        lines.append("[DATA] %s" % addr)
        for r in range(bounded.row_start, bounded.row_end + 1):
            fields = [encode_field(sheet.get(r, c))
                      for c in range(bounded.col_start, bounded.col_end + 1)]
            lines.append("\t".join(fields))
    return "\n".join(lines) + "\n"


# --- rebuild -----------------------------------------------------------------

_SHEET_LINE = re.compile(r"^\[SHEET\] (\S+) rows=(\d+) cols=(\d+)$")
_NAME_LINE = re.compile(
    r"^\[NAME\] scope=(\S+) id=(\S+) kind=(range|formula) array=([01])$")
_DATA_LINE = re.compile(r"^\[DATA\] (\S+)!(\S+)$")
_DERIVE = re.compile(r"^shift\(([^,()]+),(-?\d+),(-?\d+)\)$")


def rebuild(text: str) -> Workbook:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DocSyntaxError(1, "empty document")
    if lines[0] != HEADER:
        if lines[0].startswith("#%NAMESDOC"):
            raise UnknownVersion(lines[0][len("#%NAMESDOC"):].strip())
        raise DocSyntaxError(1, "missing %s header" % HEADER)

    wb = Workbook()
    pending = []           # (line, NameDef fields) until sheets are known
    i = 1
    n = len(lines)

    # sheets come first, in declaration order
    while i < n and lines[i].startswith("[SHEET]"):
        m = _SHEET_LINE.match(lines[i])
        if not m:
            raise DocSyntaxError(i + 1, "bad sheet line %r" % lines[i])
        try:
            wb.add_sheet(m.group(1), int(m.group(2)), int(m.group(3)))
        except WorkbookError as exc:
            raise DocSyntaxError(i + 1, str(exc)) from None
        i += 1

    # then every name block
    while i < n and lines[i].startswith("[NAME]"):
        m = _NAME_LINE.match(lines[i])
        if not m:
            raise DocSyntaxError(i + 1, "bad name line %r" % lines[i])
        header_line = i + 1
        scope_text, ident, kind, array = m.groups()
        scope = None if scope_text == "workbook" else scope_text
        if scope is not None and scope not in wb.sheets:
            raise DocSyntaxError(header_line,
                                 "scope %s is not a declared sheet" % scope)
        if not is_identifier(ident):
            raise DocSyntaxError(header_line, "bad identifier %r" % ident)
        i += 1
        target = None
        derive = None
        formula = None
        if i < n and lines[i].startswith("  target="):
            spec = lines[i][len("  target="):]
            if "!" not in spec:
                raise DocSyntaxError(i + 1, "target %r has no sheet" % spec)
            sheet_name, a1 = spec.split("!", 1)
            try:
                target = parse_a1(sheet_name, a1)
            except ValueError as exc:
                raise DocSyntaxError(i + 1, str(exc)) from None
            i += 1
        if i < n and lines[i].startswith("  derive="):
            dm = _DERIVE.match(lines[i][len("  derive="):])
            if not dm:
                raise DocSyntaxError(i + 1, "bad derive %r" % lines[i])
            derive = (dm.group(1), int(dm.group(2)), int(dm.group(3)))
            i += 1
        if i < n and lines[i].startswith("  formula="):
            ftext = lines[i][len("  formula="):]
            try:
                formula = parse_formula(ftext)
            except ValueError as exc:
                raise DocSyntaxError(i + 1, str(exc)) from None
            i += 1
        if kind == "range" and target is None:
            raise DocSyntaxError(header_line, "range name %s without target" %
                                 ident)
        if kind == "formula" and (target is not None or derive is not None):
            raise DocSyntaxError(header_line,
                                 "formula name %s cannot carry a target" %
                                 ident)
        if kind == "formula" and formula is None:
            raise DocSyntaxError(header_line, "formula name %s without formula"
                                 % ident)
        if kind == "formula" and array == "1":
            raise DocSyntaxError(header_line,
                                 "formula name %s cannot be an array range" %
                                 ident)
        nd = NameDef(ident, scope,
                     RANGE if kind == "range" else FORMULA,
                     target=target, formula=formula,
                     array=(array == "1"), derive=derive)
        try:
            wb.define_name(nd)
        except WorkbookError as exc:
            raise DocSyntaxError(header_line, str(exc)) from None
        pending.append((header_line, nd))

    # then the data blocks
    input_addresses = {}
    for nd in wb.names.values():
        if nd.kind == RANGE and nd.formula is None and nd.target is not None:
            input_addresses[nd.target.address(with_sheet=True)] = nd.target
    seen_blocks = set()
    while i < n and lines[i].startswith("[DATA]"):
        m = _DATA_LINE.match(lines[i])
        if not m:
            raise DocSyntaxError(i + 1, "bad data line %r" % lines[i])
        addr = "%s!%s" % (m.group(1), m.group(2))
        rng = input_addresses.get(addr)
        if rng is None:
            raise DocSyntaxError(i + 1, "data block %s matches no input range"
                                 % addr)
        if addr in seen_blocks:
            raise DocSyntaxError(i + 1, "duplicate data block %s" % addr)
        seen_blocks.add(addr)
        block_line = i + 1
        i += 1
        sheet = wb.sheet(rng.sheet)
        bounded = rng.clamp(sheet.rows)
        height, width = bounded.shape()
        rows = []
        for k in range(height):
            if i >= n or lines[i].startswith(("[SHEET]", "[NAME]", "[DATA]")):
                raise DocSyntaxError(block_line,
                                     "data block %s needs %d rows, found %d" %
                                     (addr, height, k))
            fields = lines[i].split("\t")
            if len(fields) != width:
                raise DocSyntaxError(i + 1,
                                     "data row has %d fields, range %s is %d "
                                     "wide" % (len(fields), addr, width))
            rows.append([decode_field(f, i + 1) for f in fields])
            i += 1
        wb.fill_block(bounded, rows)

    if i < n:
        raise DocSyntaxError(i + 1, "unexpected line %r" % lines[i])

    _check_closed_world(wb, pending)
    return wb


def _check_closed_world(wb: Workbook, pending):
    for line, nd in pending:
        if nd.derive is not None:
            base_id, dr, dc = nd.derive
            base = wb.resolve(base_id, context=nd.scope)
            if base is None:
                raise UndeclaredName(base_id, nd.display())
            if base.kind != RANGE or base.target is None:
                raise DocSyntaxError(line, "derive base %s is not a range name"
                                     % base_id)
            try:
                expected = base.target.shift(dr, dc)
            except WorkbookError as exc:
                raise DocSyntaxError(line, str(exc)) from None
            if expected != nd.target:
                raise DocSyntaxError(
                    line, "target of %s does not equal shift(%s,%d,%d)" %
                    (nd.display(), base_id, dr, dc))
        if nd.formula is None:
            continue
        ctx = wb.context_sheet(nd)
        for qual, ident in sorted(names_referenced(nd.formula),
                                  key=lambda p: (p[1], p[0] or "")):
            if qual is not None and qual not in wb.sheets:
                raise UndeclaredName("%s!%s" % (qual, ident), nd.display())
            if wb.resolve(ident, context=ctx, qualifier=qual) is None:
                shown = ("%s!%s" % (qual, ident)) if qual else ident
                raise UndeclaredName(shown, nd.display())
