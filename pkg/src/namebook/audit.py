"""Audit views over a workbook: listing, graph slices, DOT export, linter.

A workbook built purely from names reads like a program.  linear_listing
prints it as one: declarations first, then each formula in an order where
everything is defined before it is used.  focus_graph cuts out the
neighborhood of one name for inspection, export_dot renders that cut for
Graphviz, and lint enforces the discipline that makes the rest work.
"""

from __future__ import annotations

from dataclasses import dataclass

from .docio import stray_formula_cells
from .engine import build_dep_graph, topo_order
from .formula import cell_refs, render
from .workbook import FORMULA, RANGE, UnknownNameError, Workbook


@dataclass(frozen=True)
class ListingEntry:
    name: str                  # display text, sheet-qualified when sheet-scoped
    kind: str                  # "input" or "formula"
    formula: str | None        # canonical text, None for plain inputs
    address: str | None        # target rectangle, None for formula names
    shape: tuple | None        # (rows, cols), None for formula names


def _address_and_shape(wb: Workbook, nd):
    if nd.target is None:
        return None, None
    rng = nd.target.clamp(wb.sheet(nd.target.sheet).rows)
    return nd.target.address(with_sheet=True), rng.shape()


def linear_listing(wb: Workbook):
    """The workbook as a straight-line program.

    Plain input ranges come first as declarations, then every
    formula-bearing name in dependency order.  Raises CycleError when no
    such order exists.
    """
    g = build_dep_graph(wb)
    order = topo_order(g)
    entries = []
    for key in order:
        nd = wb.names[key]
        if nd.formula is not None:
            continue
        address, shape = _address_and_shape(wb, nd)
        entries.append(ListingEntry(nd.display(), "input", None, address, shape))
    for key in order:
        nd = wb.names[key]
        if nd.formula is None:
            continue
        address, shape = _address_and_shape(wb, nd)
        entries.append(ListingEntry(nd.display(), "formula",
                                    render(nd.formula), address, shape))
    return entries


@dataclass(frozen=True)
class GraphSlice:
    focus: str            # display text of the focus name
    nodes: tuple          # display texts, sorted
    edges: tuple          # (from_display, to_display) reference edges, sorted
    recurrence: frozenset  # the subset of edges that are displaced self-reads
    labels: dict          # display -> annotation (formula text or address)


def _find_name(wb: Workbook, name: str):
    if "!" in name:
        qual, ident = name.split("!", 1)
        nd = wb.resolve(ident, qualifier=qual)
    else:
        nd = wb.resolve(name)
        if nd is None:
            hits = [d for d in wb.names.values() if d.identifier == name]
            if len(hits) == 1:
                nd = hits[0]
    if nd is None:
        raise UnknownNameError("no name %r in this workbook" % name)
    return nd


def focus_graph(wb: Workbook, name: str, radius: int = 1) -> GraphSlice:
    """The names within the given distance of one focus name.

    Predecessors are what the focus (transitively, up to radius) reads;
    dependents are what reads it.  Edges point from referencing name to
    referenced name, mirroring build_dep_graph.
    """
    g = build_dep_graph(wb)
    focus = _find_name(wb, name).key()
    kept_edges = set()
    seen = {focus}
    frontier = [focus]
    for _ in range(max(radius, 0)):
        nxt = []
        for u in frontier:
            for v in g.predecessors(u):
                kept_edges.add((u, v))
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    frontier = [focus]
    back = {focus}
    for _ in range(max(radius, 0)):
        nxt = []
        for u in frontier:
            for w in g.dependents(u):
                kept_edges.add((w, u))
                if w not in back:
                    back.add(w)
                    nxt.append(w)
        frontier = nxt
    seen |= back
    labels = {}
    for key in seen:
        nd = wb.names[key]
        if nd.formula is not None:
            labels[nd.display()] = render(nd.formula)
        elif nd.target is not None:
            labels[nd.display()] = nd.target.address(with_sheet=True)
        else:
            labels[nd.display()] = "#REF!"
    disp = g.display
    nodes = tuple(sorted(disp[k] for k in seen))
    edges = tuple(sorted((disp[u], disp[v]) for (u, v) in kept_edges))
    rec = frozenset((disp[u], disp[v]) for (u, v) in kept_edges
                    if (u, v) in g.recurrence)
    return GraphSlice(disp[focus], nodes, edges, rec, labels)


def _dot_quote(text: str) -> str:
    return '"%s"' % text.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(slice: GraphSlice) -> str:
    """DOT digraph of a slice.  Arrows follow the flow of data, so an
    edge u -> v means v's formula reads u.  Recurrence reads are dashed."""
    lines = ["digraph names {", "  rankdir=LR;"]
    for node in slice.nodes:
        label = node
        note = slice.labels.get(node)
        if note:
            label = "%s\\n%s" % (node, note.replace("\\", "\\\\")
                                          .replace('"', '\\"'))
        shape = "box" if node == slice.focus else "ellipse"
        lines.append("  %s [shape=%s, label=\"%s\"];" %
                     (_dot_quote(node), shape, label))
    for (u, v) in slice.edges:
        attr = " [style=dashed]" if (u, v) in slice.recurrence else ""
        lines.append("  %s -> %s%s;" % (_dot_quote(v), _dot_quote(u), attr))
    lines.append("}")
    return "\n".join(lines) + "\n"


# --- linter ------------------------------------------------------------------

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Finding:
    rule: str
    severity: str
    locus: str
    message: str

    def line(self) -> str:
        return "\t".join((self.rule, self.severity, self.locus, self.message))


def lint(wb: Workbook, outputs=()) -> list:
    """Name-discipline findings, machine-readable.

    N1 (error):   a formula living in a plain cell instead of a name.
    N2 (error):   a grid address inside a formula.
    N3 (warning): two input ranges overlap.
    N4 (warning): a name nothing references, unless listed in outputs.
    N5 (error):   a multi-cell formula range not marked as an array
                  formula whose copies would disagree cell to cell.

    outputs lists names (identifier or sheet-qualified display text) that
    are meant to be read from outside the workbook; they are exempt from
    N4.
    """
    findings = []
    for addr in stray_formula_cells(wb):
        findings.append(Finding("N1", ERROR, addr,
                                "formula cell outside any named formula"))

    sorted_names = sorted(wb.names.values(),
                          key=lambda d: (d.identifier, d.scope or ""))
    for nd in sorted_names:
        if nd.formula is None:
            continue
        for ref in cell_refs(nd.formula):
            shown = ref.ref if ref.sheet is None else "%s!%s" % (ref.sheet,
                                                                 ref.ref)
            findings.append(Finding("N2", ERROR, nd.display(),
                                    "grid address %s in formula" % shown))

    inputs = [nd for nd in sorted_names
              if nd.kind == RANGE and nd.formula is None
              and nd.target is not None]
    for i, a in enumerate(inputs):
        for b in inputs[i + 1:]:
            if a.target.sheet != b.target.sheet:
                continue
            rows = wb.sheet(a.target.sheet).rows
            if a.target.clamp(rows).intersect(b.target.clamp(rows)) is not None:
                findings.append(Finding(
                    "N3", WARNING, a.display(),
                    "input ranges %s and %s overlap" % (a.display(),
                                                        b.display())))

    referenced = set()
    g = build_dep_graph(wb)
    for u, vs in g.edges.items():
        referenced.update(vs)
    for nd in sorted_names:
        if nd.derive is not None:
            base = wb.resolve(nd.derive[0], context=nd.scope)
            if base is not None:
                referenced.add(base.key())
    exempt = set(outputs)
    for nd in sorted_names:
        if nd.key() in referenced:
            continue
        if nd.identifier in exempt or nd.display() in exempt:
            continue
        findings.append(Finding("N4", WARNING, nd.display(),
                                "name is never referenced"))

    for nd in sorted_names:
        if nd.kind != RANGE or nd.formula is None or nd.array:
            continue
        rows = wb.sheet(nd.target.sheet).rows
        if nd.target.clamp(rows).shape() == (1, 1):
            continue
        if any(ref.is_relative for ref in cell_refs(nd.formula)):
            findings.append(Finding(
                "N5", ERROR, nd.display(),
                "multi-cell range repeats a formula whose relative "
                "addresses drift cell to cell; mark it as an array formula"))

    order = {"N1": 1, "N2": 2, "N3": 3, "N4": 4, "N5": 5}
    findings.sort(key=lambda f: (order[f.rule], f.locus, f.message))
    return findings


def has_errors(findings) -> bool:
    return any(f.severity == ERROR for f in findings)
