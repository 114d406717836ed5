"""Audit views: the straight-line listing respects dependencies, focus
graphs slice by distance in both directions, DOT arrows follow data flow,
and each lint rule fires exactly where it should."""

import pytest

from namebook.audit import (ERROR, WARNING, export_dot, focus_graph,
                            has_errors, linear_listing, lint)
from namebook.docio import ExportError, export_doc
from namebook.engine import CycleError
from namebook.formula import names_referenced, parse_formula
from namebook.workbook import (FORMULA, RANGE, GridRange, NameDef,
                               UnknownNameError, Workbook, shift_name)

from gen import random_workbook


def _chain():
    """c reads b reads a, plus an unrelated name off to the side."""
    wb = Workbook().add_sheet("s", 4, 6)
    wb.set_cell("s", 1, 1, 2.0)
    wb.define_name(NameDef("base", target=GridRange("s", 1, 1, 1, 1)))
    wb.define_name(NameDef("mid", None, FORMULA,
                           formula=parse_formula("base * 10")))
    wb.define_name(NameDef("top", None, FORMULA,
                           formula=parse_formula("mid + 1")))
    wb.define_name(NameDef("aside", target=GridRange("s", 2, 2, 1, 1)))
    return wb


# --- linear listing ---------------------------------------------------------

def test_listing_declares_inputs_then_formulas_in_dependency_order():
    entries = linear_listing(_chain())
    kinds = [e.kind for e in entries]
    assert kinds == sorted(kinds, key=lambda k: k != "input")
    pos = {e.name: i for i, e in enumerate(entries)}
    assert pos["mid"] < pos["top"]
    assert entries[pos["base"]].address == "s!A1"
    assert entries[pos["base"]].shape == (1, 1)
    assert entries[pos["base"]].formula is None
    assert entries[pos["top"]].formula == "mid + 1"
    assert entries[pos["top"]].address is None


def test_listing_order_holds_on_random_workbooks():
    for seed in range(80):
        wb = random_workbook(seed + 9000)
        entries = linear_listing(wb)
        assert len(entries) == len(wb.names)
        pos = {e.name: i for i, e in enumerate(entries)}
        formula_names = {e.name for e in entries if e.kind == "formula"}
        for e in entries:
            if e.formula is None:
                continue
            nd = _lookup(wb, e.name)
            ctx = wb.context_sheet(nd)
            for qual, ident in names_referenced(nd.formula):
                ref = wb.resolve(ident, ctx, qual)
                if ref is None:
                    continue
                shown = ref.display()
                if shown in formula_names and shown != e.name:
                    assert pos[shown] < pos[e.name], (seed, e.name, shown)


def _lookup(wb, display):
    for nd in wb.names.values():
        if nd.display() == display:
            return nd
    raise AssertionError(display)


def test_listing_reports_cycles():
    wb = Workbook().add_sheet("s", 2, 2)
    wb.define_name(NameDef("pf", None, FORMULA, formula=parse_formula("qf")))
    wb.define_name(NameDef("qf", None, FORMULA, formula=parse_formula("pf")))
    with pytest.raises(CycleError):
        linear_listing(wb)


# --- focus graphs -----------------------------------------------------------

def test_focus_graph_respects_the_radius():
    wb = _chain()
    s0 = focus_graph(wb, "mid", radius=0)
    assert s0.nodes == ("mid",) and s0.edges == ()
    s1 = focus_graph(wb, "mid", radius=1)
    assert s1.nodes == ("base", "mid", "top")
    assert s1.edges == (("mid", "base"), ("top", "mid"))
    s_far = focus_graph(wb, "base", radius=1)
    assert s_far.nodes == ("base", "mid")
    s_all = focus_graph(wb, "base", radius=2)
    assert s_all.nodes == ("base", "mid", "top")
    assert "aside" not in s_all.nodes
    assert s_all.focus == "base"
    assert s_all.labels["base"] == "s!A1"
    assert s_all.labels["top"] == "mid + 1"


def test_focus_graph_rejects_unknown_names():
    with pytest.raises(UnknownNameError):
        focus_graph(_chain(), "nothing.here")


def test_focus_graph_finds_scoped_names_by_bare_identifier():
    wb = Workbook().add_sheet("s", 2, 2)
    wb.set_cell("s", 1, 1, 1.0)
    wb.define_name(NameDef("only", "s", RANGE,
                           target=GridRange("s", 1, 1, 1, 1)))
    assert focus_graph(wb, "only").focus == "s!only"
    assert focus_graph(wb, "s!only").focus == "s!only"


def _recurrence_book():
    wb = Workbook().add_sheet("s", 3, 7)
    for c, v in enumerate([True, False, False, False, False], start=2):
        wb.set_cell("s", 1, c, v)
    wb.define_name(NameDef("start", target=GridRange("s", 2, 6, 1, 1)))
    band = NameDef("roll", None, RANGE, target=GridRange("s", 2, 6, 2, 2),
                   formula=parse_formula("IF(start, 1, ←roll * 2)"),
                   array=True)
    wb.define_name(band)
    wb.define_name(shift_name(band, "←roll", 0, -1))
    return wb


def test_recurrence_edges_are_flagged():
    s = focus_graph(_recurrence_book(), "roll")
    assert ("roll", "←roll") in s.edges
    assert ("roll", "←roll") in s.recurrence
    assert ("roll", "start") in s.edges
    assert ("roll", "start") not in s.recurrence


# --- DOT export -------------------------------------------------------------

def test_dot_arrows_follow_the_flow_of_data():
    text = export_dot(focus_graph(_chain(), "mid"))
    assert text.startswith("digraph names {")
    assert text.rstrip().endswith("}")
    assert '"base" -> "mid";' in text            # mid reads base
    assert '"mid" -> "top";' in text
    assert "shape=box" in text                   # the focus stands out
    assert text.count("shape=box") == 1


def test_dot_recurrence_edges_are_dashed():
    text = export_dot(focus_graph(_recurrence_book(), "roll"))
    assert '"←roll" -> "roll" [style=dashed];' in text
    assert '"start" -> "roll";' in text


def test_dot_quotes_awkward_labels():
    wb = Workbook().add_sheet("s", 2, 2)
    wb.set_cell("s", 1, 1, 1.0)
    wb.define_name(NameDef("is.ready?", target=GridRange("s", 1, 1, 1, 1)))
    wb.define_name(NameDef("says", None, FORMULA,
                           formula=parse_formula('IF(is.ready?, "a ""b""", 0)')))
    text = export_dot(focus_graph(wb, "says"))
    assert '"is.ready?"' in text
    assert "\\\"b\\\"" in text                   # quotes inside labels escape


# --- lint -------------------------------------------------------------------

def _clean_book():
    wb = Workbook().add_sheet("s", 4, 6)
    wb.set_cell("s", 1, 1, 2.0)
    wb.define_name(NameDef("base", target=GridRange("s", 1, 1, 1, 1)))
    wb.define_name(NameDef("twice", None, FORMULA,
                           formula=parse_formula("base * 2")))
    return wb


def test_clean_workbook_yields_only_the_output_warning():
    wb = _clean_book()
    assert [f.rule for f in lint(wb)] == ["N4"]  # nothing reads `twice`
    assert lint(wb, outputs=("twice",)) == []
    assert lint(wb, outputs=("twice",)) == lint(wb, outputs=("twice",))


def test_n1_formula_cell_in_the_grid():
    wb = _clean_book()
    wb.set_cell("s", 3, 3, "=B1+1")
    findings = lint(wb, outputs=("twice",))
    assert [(f.rule, f.severity, f.locus) for f in findings] == [
        ("N1", ERROR, "s!C3")]
    assert has_errors(findings)


def test_n2_grid_address_inside_a_formula():
    wb = _clean_book()
    wb.define_name(NameDef("bad", None, FORMULA,
                           formula=parse_formula("$A$1 + base")))
    findings = lint(wb, outputs=("twice", "bad"))
    assert [(f.rule, f.locus) for f in findings] == [("N2", "bad")]
    assert "$A$1" in findings[0].message


def test_n3_overlapping_inputs_warn_once_per_pair():
    wb = _clean_book()
    wb.define_name(NameDef("again", target=GridRange("s", 1, 2, 1, 2)))
    findings = lint(wb, outputs=("twice",))
    n3 = [f for f in findings if f.rule == "N3"]
    assert len(n3) == 1
    assert n3[0].severity == WARNING
    assert "again" in n3[0].message and "base" in n3[0].message
    assert not has_errors(findings)


def test_n3_sees_through_whole_row_bounds():
    wb = Workbook().add_sheet("s", 4, 6)
    wb.define_name(NameDef("whole", target=GridRange("s", 2, 3)))
    wb.define_name(NameDef("spot", target=GridRange("s", 3, 3, 2, 2)))
    rules = [f.rule for f in lint(wb, outputs=("whole", "spot"))]
    assert rules == ["N3"]


def test_n4_exemptions_and_derive_bases():
    wb = _recurrence_book()
    findings = lint(wb)
    # `roll` is read by nothing, but it is the derive base of its own
    # twin, which counts as a reference; nothing else is unreferenced.
    assert [f.rule for f in findings] == []
    wb.define_name(NameDef("orphan", target=GridRange("s", 7, 7, 1, 1)))
    findings = lint(wb)
    assert [(f.rule, f.locus) for f in findings] == [("N4", "orphan")]
    assert lint(wb, outputs=("orphan",)) == []


def test_n5_multi_cell_range_with_drifting_addresses():
    wb = Workbook().add_sheet("s", 4, 6)
    wb.set_cell("s", 1, 1, 1.0)
    wb.define_name(NameDef("seedv", target=GridRange("s", 1, 1, 1, 1)))
    wb.define_name(NameDef("spread", None, RANGE,
                           target=GridRange("s", 2, 2, 1, 3),
                           formula=parse_formula("A1 * 2"), array=False))
    findings = lint(wb, outputs=("spread", "seedv"))
    assert [f.rule for f in findings] == ["N2", "N5"]
    assert findings[1].locus == "spread"
    # Marking it as an array formula settles the ambiguity.
    wb2 = Workbook().add_sheet("s", 4, 6)
    wb2.set_cell("s", 1, 1, 1.0)
    wb2.define_name(NameDef("seedv", target=GridRange("s", 1, 1, 1, 1)))
    wb2.define_name(NameDef("spread", None, RANGE,
                            target=GridRange("s", 2, 2, 1, 3),
                            formula=parse_formula("A1 * 2"), array=True))
    assert [f.rule for f in lint(wb2, outputs=("spread", "seedv"))] == ["N2"]
    # Absolute addresses cannot drift, so no N5 either.
    wb3 = Workbook().add_sheet("s", 4, 6)
    wb3.set_cell("s", 1, 1, 1.0)
    wb3.define_name(NameDef("seedv", target=GridRange("s", 1, 1, 1, 1)))
    wb3.define_name(NameDef("spread", None, RANGE,
                            target=GridRange("s", 2, 2, 1, 3),
                            formula=parse_formula("$A$1 * 2"), array=False))
    assert [f.rule for f in lint(wb3, outputs=("spread", "seedv"))] == ["N2"]


def test_findings_sort_by_rule_then_locus():
    wb = _clean_book()
    wb.set_cell("s", 3, 3, "=B1")
    wb.set_cell("s", 2, 2, "=C1")
    wb.define_name(NameDef("bad", None, FORMULA,
                           formula=parse_formula("$A$1")))
    findings = lint(wb, outputs=("twice", "bad"))
    assert [(f.rule, f.locus) for f in findings] == [
        ("N1", "s!B2"), ("N1", "s!C3"), ("N2", "bad")]
    for f in findings:
        assert f.line() == "\t".join((f.rule, f.severity, f.locus, f.message))


def test_n1_and_export_share_one_predicate():
    wb = _clean_book()
    wb.set_cell("s", 3, 3, "=B1+1")
    assert any(f.rule == "N1" for f in lint(wb))
    with pytest.raises(ExportError):
        export_doc(wb)
    wb.set_cell("s", 3, 3, None)
    assert not any(f.rule == "N1" for f in lint(wb))
    export_doc(wb)


def test_random_workbooks_lint_without_errors():
    # The generator builds well-formed books: warnings are fair game
    # (overlaps and outputs), hard errors never.
    for seed in range(60):
        findings = lint(random_workbook(seed + 400))
        assert not has_errors(findings), seed
