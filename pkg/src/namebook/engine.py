"""Evaluation: dependency graph, scheduling, array semantics.

Every range name with a formula evaluates that single formula once as an
array formula, broadcast over its rectangle.  The interesting case is a
recurrence: a formula that reads a displaced copy of the range it is being
computed into (the "←" idiom).  Such names cannot be computed whole; they
are swept cell by cell in the direction that makes each displaced
predecessor available, and any names entangled with them through same-shape
displaced reads are swept together in the same pass.

The public dependency graph (build_dep_graph / topo_order) is syntactic:
edges mirror names_referenced over the defining formulas, with the subset
whose target is a displaced overlapping copy of the referencing name's own
range classified as recurrence edges.  The scheduler behind evaluate()
additionally resolves every read down to the formula ranges that own the
cells being read, which is what makes cross-name recurrences (interest on
a prior balance feeding the balance itself) come out in the right order.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from . import values as V
from .formula import (BoolLit, Call, CellRef, Expr, Intersect, NameRef,
                      NumberLit, Percent, TextLit, Unary, Binary,
                      names_referenced)
from .values import Array, CellError
from .workbook import FORMULA, RANGE, GridRange, NameDef, RefError, Workbook

NameKey = tuple  # (scope | None, identifier)


class CycleError(Exception):
    """Raised by topo_order for a strongly connected component of names."""

    def __init__(self, members):
        self.members = tuple(sorted(members))
        super().__init__("cycle through {%s}" % ", ".join(self.members))


@dataclass
class DepGraph:
    nodes: tuple
    edges: dict            # NameKey -> tuple of NameKey, sorted
    recurrence: frozenset  # subset of (u, v) edges that are displaced self-reads
    displacements: dict    # (u, v) -> (dr, dc) for recurrence edges
    unresolved: dict       # NameKey -> tuple of reference texts with no definition
    display: dict          # NameKey -> display text

    def predecessors(self, key: NameKey):
        return self.edges.get(key, ())

    def dependents(self, key: NameKey):
        out = [u for u, vs in self.edges.items() if key in vs]
        out.sort(key=_sort_key)
        return tuple(out)


def _sort_key(key: NameKey):
    return (key[1], key[0] or "")


def _shift_between(u: NameDef, v: NameDef):
    """(dr, dc) such that v's range is u's range displaced, else None.

    Only same-sheet, same-shape ranges qualify; whole-column bands pair
    with whole-column bands.
    """
    a, b = u.target, v.target
    if a is None or b is None or a.sheet != b.sheet:
        return None
    if a.is_whole_rows != b.is_whole_rows:
        return None
    if (a.col_end - a.col_start) != (b.col_end - b.col_start):
        return None
    if a.is_whole_rows:
        dr = 0
    else:
        if (a.row_end - a.row_start) != (b.row_end - b.row_start):
            return None
        dr = b.row_start - a.row_start
    dc = b.col_start - a.col_start
    if (dr, dc) == (0, 0):
        return None
    return (dr, dc)


def _overlapping(wb: Workbook, a: GridRange, b: GridRange) -> bool:
    rows_a = wb.sheet(a.sheet).rows if a.sheet in wb.sheets else 1
    rows_b = wb.sheet(b.sheet).rows if b.sheet in wb.sheets else 1
    return a.clamp(rows_a).intersect(b.clamp(rows_b)) is not None


def build_dep_graph(wb: Workbook) -> DepGraph:
    edges = {}
    recurrence = set()
    displacements = {}
    unresolved = {}
    display = {key: nd.display() for key, nd in wb.names.items()}
    for key, nd in wb.names.items():
        if nd.formula is None:
            edges[key] = ()
            continue
        ctx = wb.context_sheet(nd)
        targets = []
        missing = []
        for qual, ident in sorted(names_referenced(nd.formula),
                                  key=lambda p: (p[1], p[0] or "")):
            hit = wb.resolve(ident, context=ctx, qualifier=qual)
            if hit is None:
                missing.append(("%s!%s" % (qual, ident)) if qual else ident)
            else:
                targets.append(hit.key())
        targets = sorted(set(targets), key=_sort_key)
        edges[key] = tuple(targets)
        if missing:
            unresolved[key] = tuple(missing)
        if nd.kind == RANGE and nd.target is not None:
            for tkey in targets:
                other = wb.names[tkey]
                if other.kind != RANGE or other.target is None:
                    continue
                d = _shift_between(nd, other)
                if d is not None and _overlapping(wb, nd.target, other.target):
                    recurrence.add((key, tkey))
                    displacements[(key, tkey)] = d
    nodes = tuple(sorted(wb.names.keys(), key=_sort_key))
    return DepGraph(nodes, edges, frozenset(recurrence), displacements,
                    unresolved, display)


def topo_order(g: DepGraph) -> list:
    """Names ordered so each follows its non-recurrence predecessors.

    Ties break in lexicographic identifier order, so the result is total
    and deterministic.  Raises CycleError naming the strongly connected
    component when no such order exists.
    """
    deps = {k: set() for k in g.nodes}
    for u, vs in g.edges.items():
        for v in vs:
            if (u, v) in g.recurrence or v not in deps:
                continue
            deps[u].add(v)
    dependents = {k: [] for k in g.nodes}
    for u, vs in deps.items():
        for v in vs:
            if v != u:
                dependents[v].append(u)
    ready = [_sort_key(k) + (k,) for k, d in deps.items() if not d]
    heapq.heapify(ready)
    seen_ready = {k for k, d in deps.items() if not d}
    order = []
    while ready:
        key = heapq.heappop(ready)[-1]
        order.append(key)
        for u in dependents[key]:
            deps[u].discard(key)
            if not deps[u] and u not in seen_ready:
                seen_ready.add(u)
                heapq.heappush(ready, _sort_key(u) + (u,))
    if len(order) != len(g.nodes):
        stuck = [k for k in g.nodes if k not in seen_ready]
        comp = _cycle_component(stuck, deps)
        raise CycleError([g.display[k] for k in comp])
    return order


def _cycle_component(stuck, deps):
    """Smallest strongly connected knot among the unordered names."""
    stuck_set = set(stuck)
    adj = {k: sorted((v for v in deps[k] if v in stuck_set), key=_sort_key)
           for k in stuck}
    comps = _tarjan(sorted(stuck, key=_sort_key), adj)
    cyclic = [c for c in comps if len(c) > 1 or c[0] in adj[c[0]]]
    if not cyclic:
        cyclic = [max(comps, key=len)]
    return min(cyclic, key=lambda c: min(_sort_key(k) for k in c))


def _tarjan(nodes, adj):
    """Strongly connected components, iterative so deep chains don't recurse."""
    index = {}
    low = {}
    on_stack = {}
    stack = []
    counter = [0]
    comps = []

    def connect(root):
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack[root] = True
        work = [(root, iter(sorted(adj[root], key=_sort_key)))]
        while work:
            node, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, iter(sorted(adj[w], key=_sort_key))))
                    advanced = True
                    break
                elif on_stack.get(w):
                    low[node] = min(low[node], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == node:
                        break
                comps.append(sorted(comp, key=_sort_key))

    for v in nodes:
        if v not in index:
            connect(v)
    return comps


# --- value store -------------------------------------------------------------

@dataclass(eq=False)
class ValueStore:
    """Computed value for every name, keyed by (scope, identifier)."""

    values: dict
    display: dict

    def value(self, identifier: str, scope: str | None = None):
        key = (scope, identifier)
        if key not in self.values and scope is None:
            hits = [k for k in self.values if k[1] == identifier]
            if len(hits) == 1:
                key = hits[0]
        return self.values[key]

    def scalar(self, identifier: str, scope: str | None = None):
        return V.collapse(self.value(identifier, scope))

    def has_errors(self) -> bool:
        for v in self.values.values():
            for s in _iter_scalars(v):
                if isinstance(s, CellError):
                    return True
        return False

    def items(self):
        return sorted(self.values.items(), key=lambda kv: _sort_key(kv[0]))

    def __eq__(self, other):
        return isinstance(other, ValueStore) and self.values == other.values


@dataclass(frozen=True)
class RangeValue:
    """A reference flowing through evaluation before any cells are read."""
    rng: GridRange


# --- scheduling --------------------------------------------------------------

def _expanded_range_targets(wb: Workbook, nd: NameDef):
    """Range names readable from nd's formula, seen through formula names."""
    out = []
    seen_formula = set()

    def visit(expr, ctx):
        for qual, ident in sorted(names_referenced(expr),
                                  key=lambda p: (p[1], p[0] or "")):
            hit = wb.resolve(ident, context=ctx, qualifier=qual)
            if hit is None:
                continue
            if hit.kind == FORMULA:
                if hit.key() in seen_formula:
                    continue
                seen_formula.add(hit.key())
                visit(hit.formula, wb.context_sheet(hit))
            elif hit.target is not None:
                out.append(hit)

    visit(nd.formula, wb.context_sheet(nd))
    return out


def _unit_axis_shift(d) -> bool:
    return d is not None and abs(d[0]) + abs(d[1]) == 1


@dataclass
class _Group:
    members: list       # NameKeys of formula ranges scheduled together
    displaced: dict     # (u, w) -> (dr, dc) edges inside the group
    plain_inside: list  # (u, w) plain edges inside the group, u reads w aligned
    failed: str | None = None

    def direction(self):
        return next(iter(set(self.displaced.values())))


class _Scheduler:
    """Orders formula ranges by who owns the cells each formula reads."""

    def __init__(self, wb: Workbook):
        self.wb = wb
        self.fkeys = sorted((nd.key() for nd in wb.formula_bearing()),
                            key=_sort_key)
        self.plain = {k: set() for k in self.fkeys}
        self.disp = {}
        self.bad_self = set()
        for key in self.fkeys:
            self._edges_for(key)

    def _edges_for(self, ukey):
        u = self.wb.names[ukey]
        for v in _expanded_range_targets(self.wb, u):
            vr = v.target
            for wkey in self.fkeys:
                w = self.wb.names[wkey]
                if w.target.sheet != vr.sheet:
                    continue
                if not _overlapping(self.wb, vr, w.target):
                    continue
                if vr == w.target:
                    if wkey != ukey:
                        self.plain[ukey].add(wkey)
                    else:
                        self.bad_self.add(ukey)
                    continue
                d = _shift_between(w, v)
                if _unit_axis_shift(d):
                    self.disp[(ukey, wkey)] = d
                elif wkey == ukey:
                    # An overlapping non-unit displacement of itself can
                    # never be swept into order.
                    self.bad_self.add(ukey)
                else:
                    self.plain[ukey].add(wkey)

    def groups(self):
        """Schedulable units in evaluation order."""
        adj = {k: set(self.plain[k]) for k in self.fkeys}
        for (u, w) in self.disp:
            adj[u].add(w)
        made = []
        for comp in _tarjan(self.fkeys, {k: sorted(vs, key=_sort_key)
                                         for k, vs in adj.items()}):
            comp_set = set(comp)
            displaced = {(u, w): d for (u, w), d in self.disp.items()
                         if u in comp_set and w in comp_set}
            plain_inside = sorted(
                ((u, w) for u in comp for w in self.plain[u]
                 if w in comp_set and u != w),
                key=lambda e: (_sort_key(e[0]), _sort_key(e[1])))
            g = _Group(list(comp), displaced, plain_inside)
            self._validate(g)
            made.append(g)
        index = {}
        for i, g in enumerate(made):
            for m in g.members:
                index[m] = i
        gdeps = {i: set() for i in range(len(made))}
        for u in self.fkeys:
            for w in self.plain[u]:
                if index[u] != index[w]:
                    gdeps[index[u]].add(index[w])
        for (u, w) in self.disp:
            if index[u] != index[w]:
                gdeps[index[u]].add(index[w])
        ordered = []
        left = dict(gdeps)
        while left:
            avail = sorted((i for i, d in left.items() if not (d & left.keys())),
                           key=lambda i: _sort_key(made[i].members[0]))
            if not avail:
                # unreachable: the component condensation is acyclic
                avail = sorted(left, key=lambda i: _sort_key(made[i].members[0]))
            i = avail[0]
            del left[i]
            ordered.append(made[i])
        return ordered

    def _validate(self, g: _Group):
        members = g.members
        if any(m in self.bad_self for m in members):
            g.failed = "self-overlapping read"
            return
        if not g.displaced:
            if len(members) > 1:
                g.failed = "mutual reference"
            return
        dirs = set(g.displaced.values())
        if len(dirs) > 1:
            g.failed = "conflicting recurrence directions"
            return
        dr, dc = next(iter(dirs))
        wb = self.wb
        extents = set()
        for m in members:
            nd = wb.names[m]
            shape = nd.target.clamp(wb.sheet(nd.target.sheet).rows).shape()
            extents.add(shape[1] if dc != 0 else shape[0])
        if len(extents) > 1:
            g.failed = "recurrence ranges disagree on sweep extent"
            return
        if _member_order(members, g.plain_inside) is None:
            g.failed = "mutual reference"


def _member_order(members, plain_inside):
    """Within-step order over a group, or None when plain edges cycle."""
    deps = {m: set() for m in members}
    for u, w in plain_inside:
        deps[u].add(w)
    out = []
    left = dict(deps)
    while left:
        avail = sorted((m for m, d in left.items() if not (d & left.keys())),
                       key=_sort_key)
        if not avail:
            return None
        m = avail[0]
        del left[m]
        out.append(m)
    return out


# --- builtin functions -------------------------------------------------------

BUILTIN_FUNCTIONS = ("AND", "IF", "INDEX", "LOOKUP", "MATCH", "MAX", "MIN",
                     "NOT", "OR", "SUM")


def _iter_scalars(v):
    if isinstance(v, Array):
        for row in v.cells:
            yield from row
    else:
        yield v


def _elementwise1(fn, a):
    if not isinstance(a, Array):
        return fn(a)
    return Array([[fn(s) for s in row] for row in a.cells])


def _elementwise2(fn, a, b):
    shape = V.broadcast_shapes(V.value_shape(a), V.value_shape(b))
    if shape is None:
        return V.VALUE_ERROR
    if shape == (1, 1):
        return fn(V.collapse(a), V.collapse(b))
    rows = []
    for i in range(shape[0]):
        rows.append([fn(V.element_at(a, i, j, shape),
                        V.element_at(b, i, j, shape))
                     for j in range(shape[1])])
    return Array(rows)


def _builtin_sum(args):
    total = 0.0
    for v in args:
        for s in _iter_scalars(v):
            if isinstance(s, CellError):
                return s
            if s is None or isinstance(s, (bool, str)):
                continue
            total += float(s)
    return total


def _builtin_minmax(args, pick):
    best = None
    for v in args:
        for s in _iter_scalars(v):
            if isinstance(s, CellError):
                return s
            if s is None or isinstance(s, (bool, str)):
                continue
            s = float(s)
            best = s if best is None else pick(best, s)
    return 0.0 if best is None else best


def _builtin_if(args):
    if len(args) == 2:
        args = (args[0], args[1], False)
    cond, yes, no = args
    shape = V.value_shape(cond)
    for v in (yes, no):
        s = V.broadcast_shapes(shape, V.value_shape(v))
        if s is None:
            return V.VALUE_ERROR
        shape = s

    def pick(c, a, b):
        t = V.to_bool(c)
        if isinstance(t, CellError):
            return t
        return a if t else b

    if shape == (1, 1):
        return pick(V.collapse(cond), V.collapse(yes), V.collapse(no))
    rows = []
    for i in range(shape[0]):
        rows.append([pick(V.element_at(cond, i, j, shape),
                          V.element_at(yes, i, j, shape),
                          V.element_at(no, i, j, shape))
                     for j in range(shape[1])])
    return Array(rows)


def _as_vector(v):
    """(position, scalar) pairs of a single-row or single-column value."""
    if not isinstance(v, Array):
        return [(1, v)]
    r, c = v.shape
    if r != 1 and c != 1:
        return None
    out = []
    pos = 0
    for row in v.cells:
        for s in row:
            pos += 1
            out.append((pos, s))
    return out


def _match_scalar(key, vector, exact):
    """Position of key in vector.  Blank slots are skipped but still count
    toward the position.  exact picks the first equal element; otherwise
    the last element <= key over ascending data wins.  No hit is #VALUE!."""
    if isinstance(key, CellError):
        return key
    best = None
    for pos, s in vector:
        if s is None:
            continue
        if isinstance(s, CellError):
            return s
        if exact:
            eq = V.compare("=", key, s)
            if isinstance(eq, CellError):
                return eq
            if eq:
                return float(pos)
        else:
            same_class = (isinstance(s, bool) == isinstance(key, bool)
                          and isinstance(s, str) == isinstance(key, str))
            if not same_class:
                continue
            le = V.compare("<=", s, key)
            if isinstance(le, CellError):
                return le
            if le:
                best = float(pos)
    if best is None:
        return V.VALUE_ERROR
    return best


def _builtin_match(args):
    if len(args) not in (2, 3):
        return V.VALUE_ERROR
    vector = _as_vector(args[1])
    if vector is None:
        return V.VALUE_ERROR
    exact = False
    if len(args) == 3:
        mode = V.to_number(V.collapse(args[2]))
        if isinstance(mode, CellError):
            return mode
        exact = (mode == 0)
    return _elementwise1(lambda k: _match_scalar(k, vector, exact), args[0])


def _builtin_lookup(args):
    if len(args) != 3:
        return V.VALUE_ERROR
    vector = _as_vector(args[1])
    result = _as_vector(args[2])
    if vector is None or result is None:
        return V.VALUE_ERROR
    by_pos = dict(result)

    def one(k):
        pos = _match_scalar(k, vector, exact=False)
        if isinstance(pos, CellError):
            return pos
        if int(pos) not in by_pos:
            return V.REF_ERROR
        return by_pos[int(pos)]

    return _elementwise1(one, args[0])


def _index_int(s):
    n = V.to_number(s)
    if isinstance(n, CellError):
        return n
    if n < 0:
        return V.VALUE_ERROR
    return int(n)


def _builtin_index(state, args):
    if len(args) not in (2, 3):
        return V.VALUE_ERROR
    source = args[0]
    if isinstance(source, CellError):
        return source
    idx_args = [_deref(state, a) for a in args[1:]]
    for a in idx_args:
        if isinstance(a, CellError):
            return a
    if all(V.value_shape(a) == (1, 1) for a in idx_args):
        nums = [_index_int(V.collapse(a)) for a in idx_args]
        for n in nums:
            if isinstance(n, CellError):
                return n
        if isinstance(source, RangeValue):
            rng = source.rng
            if len(nums) == 1:
                rows_decl = (state.wb.sheet(rng.sheet).rows
                             if rng.sheet in state.wb.sheets else 1)
                shp = rng.clamp(rows_decl).shape()
                if shp[1] == 1:
                    row, col = nums[0], 0
                elif shp[0] == 1:
                    row, col = 0, nums[0]
                else:
                    return V.VALUE_ERROR
            else:
                row, col = nums
            try:
                return RangeValue(rng.index_slice(row, col))
            except RefError:
                return V.REF_ERROR
        src = source if isinstance(source, Array) else Array([[source]])
        r, c = src.shape
        if len(nums) == 1:
            if c == 1:
                row, col = nums[0], 0
            elif r == 1:
                row, col = 0, nums[0]
            else:
                return V.VALUE_ERROR
        else:
            row, col = nums
        if row > r or col > c:
            return V.REF_ERROR
        rows = range(r) if row == 0 else [row - 1]
        cols = range(c) if col == 0 else [col - 1]
        out = [[src.cells[i][j] for j in cols] for i in rows]
        if len(out) == 1 and len(out[0]) == 1:
            return out[0][0]
        return Array(out)

    # Array indices gather elementwise; a whole-axis 0 has no meaning here.
    src = _deref(state, source)
    if isinstance(src, CellError):
        return src
    if not isinstance(src, Array):
        src = Array([[src]])
    r, c = src.shape
    if len(idx_args) == 1:
        if c == 1:
            row_idx, col_idx = idx_args[0], 1.0
        else:
            row_idx, col_idx = 1.0, idx_args[0]
    else:
        row_idx, col_idx = idx_args

    def gather(ri, ci):
        i = _index_int(ri)
        if isinstance(i, CellError):
            return i
        j = _index_int(ci)
        if isinstance(j, CellError):
            return j
        if i == 0 or j == 0:
            return V.VALUE_ERROR
        if i > r or j > c:
            return V.REF_ERROR
        return src.cells[i - 1][j - 1]

    return _elementwise2(gather, row_idx, col_idx)


def _bool_reduce(args, fold, seed):
    acc = seed
    seen = False
    for v in args:
        for s in _iter_scalars(v):
            if isinstance(s, CellError):
                return s
            if s is None or isinstance(s, str):
                continue
            b = s if isinstance(s, bool) else (float(s) != 0)
            acc = fold(acc, b)
            seen = True
    if not seen:
        return V.VALUE_ERROR
    return acc


# --- whole-array evaluation --------------------------------------------------

class _EvalState:
    def __init__(self, wb: Workbook):
        self.wb = wb
        self.computed = {}        # NameKey -> Value for formula ranges
        self.formula_cache = {}   # NameKey -> Value | RangeValue
        self.in_progress = set()
        self.owner = {}           # (sheet, row, col) -> NameKey
        for nd in wb.formula_bearing():
            rows = wb.sheet(nd.target.sheet).rows
            for (r, c) in nd.target.cells(rows):
                self.owner[(nd.target.sheet, r, c)] = nd.key()

    def cell_value(self, sheet: str, row: int, col: int):
        okey = self.owner.get((sheet, row, col))
        if okey is not None:
            arr = self.ensure_computed(okey)
            rng = self.wb.names[okey].target.clamp(self.wb.sheet(sheet).rows)
            return V.element_at(arr, row - rng.row_start, col - rng.col_start,
                                rng.shape())
        sh = self.wb.sheets.get(sheet)
        if sh is None:
            return V.REF_ERROR
        return sh.get(row, col)

    def ensure_computed(self, key):
        if key in self.computed:
            return self.computed[key]
        # The schedule normally precomputes every owner; this on-demand
        # path answers reads of a range still being swept, which can only
        # be an unorderable read and so collapses to the cycle error.
        if key in self.in_progress:
            return V.CYCLE_ERROR
        self.in_progress.add(key)
        try:
            value = _eval_whole_name(self, self.wb.names[key])
            self.computed[key] = value
            return value
        finally:
            self.in_progress.discard(key)

    def formula_value(self, key):
        if key in self.formula_cache:
            return self.formula_cache[key]
        if key in self.in_progress:
            return V.CYCLE_ERROR
        self.in_progress.add(key)
        try:
            nd = self.wb.names[key]
            out = _eval_expr(self, nd.formula, self.wb.context_sheet(nd))
            self.formula_cache[key] = out
            return out
        finally:
            self.in_progress.discard(key)

    def materialize(self, rv: RangeValue):
        rng = rv.rng
        sh = self.wb.sheets.get(rng.sheet)
        if sh is None:
            return V.REF_ERROR
        bounded = rng.clamp(sh.rows)
        rows = []
        for r in range(bounded.row_start, bounded.row_end + 1):
            rows.append([self.cell_value(rng.sheet, r, c)
                         for c in range(bounded.col_start, bounded.col_end + 1)])
        if len(rows) == 1 and len(rows[0]) == 1:
            return rows[0][0]
        return Array(rows)


def _deref(state, v):
    if isinstance(v, RangeValue):
        return state.materialize(v)
    return v


def _eval_call(state, func, raw_args, ctx_sheet):
    if func not in BUILTIN_FUNCTIONS:
        return V.NAME_ERROR
    args = [_eval_expr(state, a, ctx_sheet) for a in raw_args]
    if func == "INDEX":
        return _builtin_index(state, args)
    args = [_deref(state, a) for a in args]
    if func == "IF":
        if len(args) not in (2, 3):
            return V.VALUE_ERROR
        return _builtin_if(args)
    if func == "SUM":
        return _builtin_sum(args)
    if func == "MIN":
        return _builtin_minmax(args, min)
    if func == "MAX":
        return _builtin_minmax(args, max)
    if func == "MATCH":
        return _builtin_match(args)
    if func == "LOOKUP":
        return _builtin_lookup(args)
    if func == "AND":
        return _bool_reduce(args, lambda a, b: a and b, True)
    if func == "OR":
        return _bool_reduce(args, lambda a, b: a or b, False)
    if len(args) != 1:  # NOT
        return V.VALUE_ERROR
    return _elementwise1(V.logical_not, args[0])


def _eval_expr(state: _EvalState, e: Expr, ctx_sheet):
    """Whole-array evaluation; may yield a RangeValue for reference results."""
    if isinstance(e, NumberLit):
        return e.value
    if isinstance(e, TextLit):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, CellRef):
        return V.REF_ERROR
    if isinstance(e, NameRef):
        nd = state.wb.resolve(e.name, context=ctx_sheet, qualifier=e.sheet)
        if nd is None:
            return V.NAME_ERROR
        if nd.kind == FORMULA:
            return state.formula_value(nd.key())
        if nd.target is None:
            return V.REF_ERROR
        return RangeValue(nd.target)
    if isinstance(e, Unary):
        v = _deref(state, _eval_expr(state, e.operand, ctx_sheet))
        return _elementwise1(V.negate, v)
    if isinstance(e, Percent):
        v = _deref(state, _eval_expr(state, e.operand, ctx_sheet))
        return _elementwise1(V.percent, v)
    if isinstance(e, Binary):
        a = _deref(state, _eval_expr(state, e.lhs, ctx_sheet))
        b = _deref(state, _eval_expr(state, e.rhs, ctx_sheet))
        op = e.op
        if op in ("+", "-", "*", "/", "^"):
            return _elementwise2(lambda x, y: V.arith(op, x, y), a, b)
        if op == "&":
            return _elementwise2(V.concat, a, b)
        return _elementwise2(lambda x, y: V.compare(op, x, y), a, b)
    if isinstance(e, Intersect):
        a = _eval_expr(state, e.lhs, ctx_sheet)
        b = _eval_expr(state, e.rhs, ctx_sheet)
        for v in (a, b):
            if isinstance(v, CellError):
                return v
        if not isinstance(a, RangeValue) or not isinstance(b, RangeValue):
            return V.VALUE_ERROR
        hit = a.rng.intersect(b.rng)
        if hit is None:
            return V.NULL_ERROR
        return RangeValue(hit)
    if isinstance(e, Call):
        return _eval_call(state, e.func, e.args, ctx_sheet)
    raise TypeError("not an expression: %r" % (e,))


def _expand_to_shape(value, shape):
    """Broadcast a computed value over the owning rectangle."""
    if shape == (1, 1):
        out = V.collapse(value)
        return V.VALUE_ERROR if isinstance(out, Array) else out
    if V.broadcast_shapes(V.value_shape(value), shape) != shape:
        value = V.VALUE_ERROR
    rows = []
    for i in range(shape[0]):
        rows.append([V.element_at(value, i, j, shape) for j in range(shape[1])])
    return Array(rows)


def _eval_whole_name(state: _EvalState, nd: NameDef):
    rows = state.wb.sheet(nd.target.sheet).rows
    shape = nd.target.clamp(rows).shape()
    raw = _deref(state, _eval_expr(state, nd.formula, state.wb.context_sheet(nd)))
    return _expand_to_shape(raw, shape)


# --- per-cell recurrence sweeps ----------------------------------------------

class _SweepContext:
    """Shared state for the members of one co-swept recurrence group.

    refmap sends each readable range name to the group member whose cells
    it denotes, either aligned or displaced by the sweep direction; reads
    through it index the partially built arrays.  Everything else in a
    member formula is constant across the sweep and is computed whole once.
    """

    def __init__(self, state: _EvalState, group: _Group):
        self.state = state
        self.partial = {}
        self.shapes = {}
        direction = group.direction()
        for m in group.members:
            nd = state.wb.names[m]
            rows = state.wb.sheet(nd.target.sheet).rows
            shape = nd.target.clamp(rows).shape()
            self.shapes[m] = shape
            self.partial[m] = [[None] * shape[1] for _ in range(shape[0])]
        self.whole_memo = {}
        self.refmap = {}
        by_target = {state.wb.names[m].target: m for m in group.members}
        for m in group.members:
            for v in _expanded_range_targets(state.wb, state.wb.names[m]):
                vkey = v.key()
                if vkey in self.refmap:
                    continue
                vrng = v.target.clamp(state.wb.sheet(v.target.sheet).rows)
                aligned = by_target.get(v.target)
                if aligned is not None:
                    self.refmap[vkey] = (aligned, 0, 0, vrng)
                    continue
                for w in group.members:
                    d = _shift_between(state.wb.names[w], v)
                    if d == direction and _overlapping(state.wb, v.target,
                                                       state.wb.names[w].target):
                        self.refmap[vkey] = (w, d[0], d[1], vrng)
                        break

    def whole(self, expr, ctx_sheet):
        key = id(expr)
        if key not in self.whole_memo:
            self.whole_memo[key] = _eval_expr(self.state, expr, ctx_sheet)
        return self.whole_memo[key]


def _eval_cell(swp: _SweepContext, e: Expr, member, i, j, ctx_sheet):
    state = swp.state
    shape = swp.shapes[member]
    if isinstance(e, NumberLit):
        return e.value
    if isinstance(e, TextLit):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, CellRef):
        return V.REF_ERROR
    if isinstance(e, NameRef):
        nd = state.wb.resolve(e.name, context=ctx_sheet, qualifier=e.sheet)
        if nd is None:
            return V.NAME_ERROR
        if nd.kind == FORMULA:
            return _eval_cell(swp, nd.formula, member, i, j,
                              state.wb.context_sheet(nd))
        if nd.target is None:
            return V.REF_ERROR
        hit = swp.refmap.get(nd.key())
        if hit is not None:
            w, dr, dc, vrng = hit
            vshape = vrng.shape()
            # broadcast this cell's position over the read range's shape
            if vshape[0] == shape[0]:
                vi = i
            elif vshape[0] == 1:
                vi = 0
            else:
                return V.VALUE_ERROR
            if vshape[1] == shape[1]:
                vj = j
            elif vshape[1] == 1:
                vj = 0
            else:
                return V.VALUE_ERROR
            ti, tj = vi + dr, vj + dc
            wshape = swp.shapes[w]
            if 0 <= ti < wshape[0] and 0 <= tj < wshape[1]:
                return swp.partial[w][ti][tj]
            # The slice of the band hanging past the swept range holds
            # plain sheet cells; read them directly.
            return state.cell_value(vrng.sheet, vrng.row_start + vi,
                                    vrng.col_start + vj)
        val = _deref(state, swp.whole(e, ctx_sheet))
        return V.element_at(val, i, j, shape)
    if isinstance(e, Unary):
        return V.negate(_eval_cell(swp, e.operand, member, i, j, ctx_sheet))
    if isinstance(e, Percent):
        return V.percent(_eval_cell(swp, e.operand, member, i, j, ctx_sheet))
    if isinstance(e, Binary):
        a = _eval_cell(swp, e.lhs, member, i, j, ctx_sheet)
        b = _eval_cell(swp, e.rhs, member, i, j, ctx_sheet)
        if e.op in ("+", "-", "*", "/", "^"):
            return V.arith(e.op, a, b)
        if e.op == "&":
            return V.concat(a, b)
        return V.compare(e.op, a, b)
    if isinstance(e, Call) and e.func == "IF" and len(e.args) in (2, 3):
        cond = _eval_cell(swp, e.args[0], member, i, j, ctx_sheet)
        t = V.to_bool(cond)
        if isinstance(t, CellError):
            return t
        if t:
            return _eval_cell(swp, e.args[1], member, i, j, ctx_sheet)
        if len(e.args) == 3:
            return _eval_cell(swp, e.args[2], member, i, j, ctx_sheet)
        return False
    # Aggregations, gathers and intersections read whole ranges; those are
    # constant across the sweep, so compute once and index in.
    val = _deref(state, swp.whole(e, ctx_sheet))
    return V.element_at(val, i, j, shape)


def _run_sweep(state: _EvalState, group: _Group):
    wb = state.wb
    swp = _SweepContext(state, group)
    order = _member_order(group.members, group.plain_inside)
    dr, dc = group.direction()

    def step_col(j):
        for m in order:
            nd = wb.names[m]
            ctx = wb.context_sheet(nd)
            for i in range(swp.shapes[m][0]):
                swp.partial[m][i][j] = _eval_cell(swp, nd.formula, m, i, j, ctx)

    def step_row(i):
        for m in order:
            nd = wb.names[m]
            ctx = wb.context_sheet(nd)
            for j in range(swp.shapes[m][1]):
                swp.partial[m][i][j] = _eval_cell(swp, nd.formula, m, i, j, ctx)

    first = swp.shapes[order[0]]
    if dc != 0:
        cols = range(first[1]) if dc < 0 else range(first[1] - 1, -1, -1)
        for j in cols:
            step_col(j)
    else:
        rows = range(first[0]) if dr < 0 else range(first[0] - 1, -1, -1)
        for i in rows:
            step_row(i)
    for m in group.members:
        cells = swp.partial[m]
        if len(cells) == 1 and len(cells[0]) == 1:
            state.computed[m] = cells[0][0]
        else:
            state.computed[m] = Array(cells)


def evaluate(wb: Workbook) -> ValueStore:
    """Evaluate every name.  A static dependency cycle raises CycleError;
    every other failure surfaces as an error value in the affected cells."""
    graph = build_dep_graph(wb)
    topo_order(graph)  # a name-level cycle fails here, before any work

    state = _EvalState(wb)
    for group in _Scheduler(wb).groups():
        if group.failed is not None:
            for m in group.members:
                nd = wb.names[m]
                rows = wb.sheet(nd.target.sheet).rows
                shape = nd.target.clamp(rows).shape()
                state.computed[m] = _expand_to_shape(V.CYCLE_ERROR, shape)
        elif group.displaced:
            _run_sweep(state, group)
        else:
            key = group.members[0]
            state.computed[key] = _eval_whole_name(state, wb.names[key])

    store = {}
    display = {}
    for key in sorted(wb.names.keys(), key=_sort_key):
        nd = wb.names[key]
        display[key] = nd.display()
        if nd.kind == FORMULA:
            store[key] = _deref(state, state.formula_value(key))
        elif nd.target is None:
            store[key] = V.REF_ERROR
        elif nd.formula is not None:
            store[key] = state.ensure_computed(key)
        else:
            store[key] = state.materialize(RangeValue(nd.target))
    return ValueStore(store, display)
