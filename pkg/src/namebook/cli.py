"""Command line front end over Names documents.

Four commands, one pipeline: rebuild the workbook from its document,
then evaluate (eval), inspect (audit graph / audit list), check (lint)
or rewrite canonically (fmt).

Exit codes: 0 success, 1 unreadable or malformed document (also an
unknown name given to --focus or --name), 2 evaluation produced error
values or hit a cycle, 3 lint found an error-severity problem.
"""

from __future__ import annotations

import argparse
import sys

from .audit import export_dot, focus_graph, has_errors, linear_listing, lint
from .docio import (DocSyntaxError, ExportError, UndeclaredName,
                    UnknownVersion, export_doc, rebuild)
from .engine import CycleError, evaluate
from .values import Array, CellError, format_number
from .workbook import UnknownNameError, WorkbookError


class _DocFailure(Exception):
    pass


def _load(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise _DocFailure(str(exc)) from None
    try:
        return rebuild(text)
    except (DocSyntaxError, UnknownVersion, UndeclaredName,
            WorkbookError) as exc:
        raise _DocFailure("%s: %s" % (path, exc)) from None


def _show(scalar) -> str:
    if scalar is None:
        return ""
    if isinstance(scalar, bool):
        return "TRUE" if scalar else "FALSE"
    if isinstance(scalar, float):
        return format_number(scalar)
    if isinstance(scalar, CellError):
        return str(scalar)
    return (scalar.replace("\\", "\\\\").replace("\t", "\\t")
                  .replace("\n", "\\n").replace("\r", "\\r"))


def _value_block(display, value):
    if isinstance(value, Array):
        r, c = value.shape
        lines = ["# %s %dx%d" % (display, r, c)]
        for row in value.cells:
            lines.append("\t".join(_show(s) for s in row))
    else:
        lines = ["# %s 1x1" % display, _show(value)]
    return lines


def cmd_eval(args) -> int:
    wb = _load(args.doc)
    try:
        store = evaluate(wb)
    except CycleError as exc:
        print("#CYCLE! %s" % exc, file=sys.stderr)
        return 2
    items = store.items()
    if args.name is not None:
        wanted = [(k, v) for k, v in items
                  if store.display[k] == args.name or k[1] == args.name]
        if not wanted:
            print("no name %r in %s" % (args.name, args.doc), file=sys.stderr)
            return 1
        items = wanted
    lines = []
    for key, value in items:
        lines.extend(_value_block(store.display[key], value))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 2 if store.has_errors() else 0


def cmd_audit(args) -> int:
    wb = _load(args.doc)
    if args.sub == "list":
        try:
            entries = linear_listing(wb)
        except CycleError as exc:
            print("#CYCLE! %s" % exc, file=sys.stderr)
            return 2
        for e in entries:
            if e.kind == "input":
                print("%s := %s %dx%d" % (e.name, e.address,
                                          e.shape[0], e.shape[1]))
            elif e.address is not None:
                print("%s = %s  @ %s %dx%d" % (e.name, e.formula, e.address,
                                               e.shape[0], e.shape[1]))
            else:
                print("%s = %s" % (e.name, e.formula))
        return 0
    try:
        graph_slice = focus_graph(wb, args.focus, args.radius)
    except UnknownNameError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    dot = export_dot(graph_slice)
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as fh:
            fh.write(dot)
    else:
        sys.stdout.write(dot)
    return 0


def cmd_lint(args) -> int:
    wb = _load(args.doc)
    findings = lint(wb, outputs=tuple(args.output))
    for f in findings:
        print(f.line())
    return 3 if has_errors(findings) else 0


def cmd_fmt(args) -> int:
    wb = _load(args.doc)
    try:
        text = export_doc(wb)
    except ExportError as exc:
        print("%s: %s" % (args.doc, exc), file=sys.stderr)
        return 1
    try:
        with open(args.doc, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="namebook",
        description="evaluate and audit name-driven workbook documents")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate a document, print values as TSV")
    p.add_argument("doc")
    p.add_argument("--name", help="print only this name's block")
    p.add_argument("--out", help="write TSV here instead of stdout")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("audit", help="graph and listing views")
    audit_sub = p.add_subparsers(dest="sub", required=True)
    pg = audit_sub.add_parser("graph", help="DOT slice around one name")
    pg.add_argument("doc")
    pg.add_argument("--focus", required=True)
    pg.add_argument("--radius", type=int, default=1)
    pg.add_argument("--dot", help="write DOT here instead of stdout")
    pg.set_defaults(func=cmd_audit)
    pl = audit_sub.add_parser("list", help="workbook as ordered statements")
    pl.add_argument("doc")
    pl.set_defaults(func=cmd_audit)

    p = sub.add_parser("lint", help="name-discipline findings")
    p.add_argument("doc")
    p.add_argument("--output", action="append", default=[],
                   help="name meant to be read externally; exempt from N4")
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser("fmt", help="rewrite a document in canonical form")
    p.add_argument("doc")
    p.set_defaults(func=cmd_fmt)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _DocFailure as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
