"""Line-oriented problem-spec files.

Grammar (``#`` starts a comment; blank lines are ignored)::

    kind: source | channel | aux-wak | aux-bc | fdg | ineq-system
    alphabet NAME SIZE
    pmf A B ...           numeric rows follow, one row per index of all but the last axis
    target A B ...        like pmf; the coordination target of a source
    cond T ... | G ...    one row per joint index of G, entries over T
    map G ... -> T        integer entries, one per joint index of G (row-major)
    node NAME ...
    edge A -> B
    factor A B ... [-> C ...]
    query A ... | B ... [| C ...]

Rows belong to the directive above them. Indices are row-major with the first
listed axis most significant. ``ineq-system`` files use the inequality syntax of
:mod:`coopduality.entropyspace` instead.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .entropyspace import LinIneqSystem, SystemError_, format_system, parse_system
from .markovgraph import Factor, FactorGraphSpec, Fdg, GraphError, MarkovQuery, fdg_from_factorization
from .probability import NORM_TOL, Alphabet, ConditionalPmf, JointPmf, PmfError
from .regions import ChannelSpec, RegionError, SourceSpec, WakAux

KINDS = ("source", "channel", "aux-wak", "aux-bc", "fdg", "ineq-system")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_NUMERIC_START = re.compile(r"[-+.0-9]")


class SpecParseError(ValueError):
    def __init__(self, line: int, col: int, msg: str) -> None:
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line = line
        self.col = col
        self.msg = msg


@dataclass(eq=False)
class Table:
    """One ``pmf``/``target``/``cond``/``map`` block. ``values`` has shape given + target."""

    kind: str
    target: tuple
    given: tuple = ()
    values: np.ndarray | None = None
    line: int = 0

    def same(self, other: "Table") -> bool:
        return (self.kind, self.target, self.given) == (other.kind, other.target, other.given) and \
            np.array_equal(self.values, other.values)


@dataclass(eq=False)
class SpecDoc:
    kind: str
    alphabets: dict = field(default_factory=dict)
    tables: list = field(default_factory=list)
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    factors: list = field(default_factory=list)
    query: tuple | None = None
    system: LinIneqSystem | None = None
    lines: dict = field(default_factory=dict)  # alphabet name, "edge i", "factor i" or "query" -> line

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SpecDoc):
            return NotImplemented
        if self.kind == "ineq-system" or other.kind == "ineq-system":
            return self.kind == other.kind and format_system(self.system) == format_system(other.system)
        return (self.kind == other.kind and self.alphabets == other.alphabets
                and len(self.tables) == len(other.tables)
                and all(a.same(b) for a, b in zip(self.tables, other.tables))
                and self.nodes == other.nodes and sorted(self.edges) == sorted(other.edges)
                and self.factors == other.factors and self.query == other.query)

    def find(self, kind: str, target: tuple | None = None, given: tuple | None = None) -> Table | None:
        for t in self.tables:
            if t.kind == kind and (target is None or t.target == target) and (given is None or t.given == given):
                return t
        return None

    def alphabet(self, name: str) -> Alphabet:
        if name not in self.alphabets:
            raise SpecParseError(1, 1, f"alphabet {name} is not declared")
        return Alphabet(name, self.alphabets[name])


# --- parsing --------------------------------------------------------------------------

def _split_names(words: list[str], line: int, col: int) -> tuple:
    for w in words:
        if not _NAME.match(w):
            raise SpecParseError(line, col, f"invalid name {w!r}")
    return tuple(words)


def _split_bar(text: str) -> list[list[str]]:
    return [part.split() for part in text.split("|")]


class _Reader:
    def __init__(self, text: str) -> None:
        self.doc: SpecDoc | None = None
        self.open: Table | None = None
        self.rows: list[tuple[int, list[float]]] = []
        self.text = text

    def sizes(self, names: tuple, line: int) -> tuple:
        out = []
        for n in names:
            if n not in self.doc.alphabets:
                raise SpecParseError(line, 1, f"alphabet {n} is not declared")
            out.append(self.doc.alphabets[n])
        return tuple(out)

    def close(self) -> None:
        t = self.open
        if t is None:
            return
        self.open = None
        gshape = self.sizes(t.given, t.line)
        tshape = self.sizes(t.target, t.line)
        flat = [v for _, row in self.rows for v in row]
        if t.kind == "map":
            want = int(np.prod(gshape, dtype=np.int64))
            if len(flat) != want:
                raise SpecParseError(t.line, 1, f"map needs {want} entries, got {len(flat)}")
            arr = np.asarray(flat, dtype=float)
            if np.any(arr != np.round(arr)):
                raise SpecParseError(t.line, 1, "map entries must be integers")
            arr = arr.astype(np.int64)
            if np.any(arr < 0) or np.any(arr >= tshape[0]):
                raise SpecParseError(t.line, 1, f"map entries must lie in 0..{tshape[0] - 1}")
            t.values = arr.reshape(gshape)
        else:
            if t.kind == "cond":
                width = int(np.prod(tshape, dtype=np.int64))
                nrows = int(np.prod(gshape, dtype=np.int64))
            else:
                width = tshape[-1]
                nrows = int(np.prod(tshape[:-1], dtype=np.int64))
            for ln, row in self.rows:
                if len(row) != width:
                    raise SpecParseError(ln, 1, f"row has {len(row)} entries, expected {width}")
            if len(self.rows) != nrows:
                raise SpecParseError(t.line, 1, f"table needs {nrows} rows, got {len(self.rows)}")
            for ln, row in self.rows:
                if any(v < 0 or not np.isfinite(v) for v in row):
                    raise SpecParseError(ln, 1, "probabilities must be finite and nonnegative")
                if t.kind == "cond" and abs(sum(row) - 1.0) > NORM_TOL:
                    raise SpecParseError(ln, 1, f"row sums to {sum(row)!r}, expected 1")
            arr = np.asarray(flat, dtype=float)
            if t.kind != "cond" and abs(arr.sum() - 1.0) > NORM_TOL:
                raise SpecParseError(t.line, 1, f"table sums to {arr.sum()!r}, expected 1")
            t.values = arr.reshape(gshape + tshape)
        self.doc.tables.append(t)
        self.rows = []

    def numbers(self, body: str, line: int) -> None:
        if self.open is None:
            raise SpecParseError(line, 1, "numeric row outside a table")
        row = []
        col = 1
        for m in re.finditer(r"\S+", body):
            col = m.start() + 1
            try:
                row.append(float(m.group()))
            except ValueError:
                raise SpecParseError(line, col, f"not a number: {m.group()!r}") from None
        self.rows.append((line, row))

    def directive(self, body: str, line: int) -> None:
        stripped = body.strip()
        indent = len(body) - len(body.lstrip())
        word, _, rest = stripped.partition(" ")
        rest = rest.strip()
        doc = self.doc
        self.close()
        if word == "alphabet":
            parts = rest.split()
            if len(parts) != 2 or not _NAME.match(parts[0]):
                raise SpecParseError(line, indent + 1, "expected 'alphabet NAME SIZE'")
            try:
                size = int(parts[1])
            except ValueError:
                raise SpecParseError(line, indent + 1, f"alphabet size must be an integer, got {parts[1]!r}") from None
            if size < 1:
                raise SpecParseError(line, indent + 1, "alphabet size must be at least 1")
            if parts[0] in doc.alphabets:
                raise SpecParseError(line, indent + 1, f"alphabet {parts[0]} declared twice")
            doc.alphabets[parts[0]] = size
            doc.lines[parts[0]] = line
        elif word in ("pmf", "target"):
            names = _split_names(rest.split(), line, indent + 1)
            if not names or len(set(names)) != len(names):
                raise SpecParseError(line, indent + 1, f"{word} needs distinct axis names")
            self.sizes(names, line)
            self.open = Table(word, names, (), None, line)
        elif word == "cond":
            parts = _split_bar(rest)
            if len(parts) != 2 or not parts[0]:
                raise SpecParseError(line, indent + 1, "expected 'cond T ... | G ...'")
            tgt = _split_names(parts[0], line, indent + 1)
            given = _split_names(parts[1], line, indent + 1)
            if set(tgt) & set(given) or len(set(tgt + given)) != len(tgt + given):
                raise SpecParseError(line, indent + 1, "cond axes must be distinct")
            self.sizes(tgt + given, line)
            self.open = Table("cond", tgt, given, None, line)
        elif word == "map":
            lhs, arrow, rhs = rest.partition("->")
            if not arrow or len(rhs.split()) != 1:
                raise SpecParseError(line, indent + 1, "expected 'map G ... -> T'")
            given = _split_names(lhs.split(), line, indent + 1)
            tgt = _split_names(rhs.split(), line, indent + 1)
            self.sizes(given + tgt, line)
            self.open = Table("map", tgt, given, None, line)
        elif word == "node":
            doc.nodes.extend(_split_names(rest.split(), line, indent + 1))
        elif word == "edge":
            lhs, arrow, rhs = rest.partition("->")
            if not arrow or len(lhs.split()) != 1 or len(rhs.split()) != 1:
                raise SpecParseError(line, indent + 1, "expected 'edge A -> B'")
            doc.lines[f"edge {len(doc.edges)}"] = line
            doc.edges.append((_split_names(lhs.split(), line, 1)[0], _split_names(rhs.split(), line, 1)[0]))
        elif word == "factor":
            lhs, arrow, rhs = rest.partition("->")
            scope = _split_names(lhs.split(), line, indent + 1)
            kids = _split_names(rhs.split(), line, indent + 1) if arrow else ()
            if not scope and not kids:
                raise SpecParseError(line, indent + 1, "empty factor")
            doc.lines[f"factor {len(doc.factors)}"] = line
            doc.factors.append((scope + tuple(k for k in kids if k not in scope), kids))
        elif word == "query":
            parts = _split_bar(rest)
            if len(parts) not in (2, 3):
                raise SpecParseError(line, indent + 1, "expected 'query A ... | B ... [| C ...]'")
            parts = [_split_names(p, line, indent + 1) for p in parts] + [()] * (3 - len(parts))
            doc.query = tuple(parts)
            doc.lines["query"] = line
        else:
            raise SpecParseError(line, indent + 1, f"unknown directive {word!r}")

    def run(self) -> SpecDoc:
        for ln, raw in enumerate(self.text.splitlines(), start=1):
            body = raw.split("#", 1)[0].rstrip()
            if not body.strip():
                continue
            stripped = body.lstrip()
            if self.doc is None:
                key, sep, val = stripped.partition(":")
                if not sep or key.strip() != "kind":
                    raise SpecParseError(ln, 1, "file must start with 'kind: ...'")
                kind = val.strip()
                if kind not in KINDS:
                    raise SpecParseError(ln, body.index(":") + 2, f"unknown kind {kind!r}")
                if kind == "ineq-system":
                    try:
                        system = parse_system(self.text)
                    except SystemError_ as exc:
                        line = getattr(exc, "line", ln)
                        col = getattr(exc, "col", 1)
                        raise SpecParseError(line, col, getattr(exc, "msg", str(exc))) from None
                    return SpecDoc("ineq-system", system=system)
                self.doc = SpecDoc(kind)
                continue
            if stripped.startswith("kind:"):
                raise SpecParseError(ln, 1, "kind declared twice")
            if _NUMERIC_START.match(stripped):
                self.numbers(body, ln)
            else:
                self.directive(body, ln)
        if self.doc is None:
            raise SpecParseError(1, 1, "empty spec file")
        self.close()
        return self.doc


def parse_spec(text: str) -> SpecDoc:
    return _Reader(text).run()


def read_spec(path) -> SpecDoc:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


# --- emitting --------------------------------------------------------------------------

def _fmt(v) -> str:
    return str(int(v)) if isinstance(v, (int, np.integer)) else repr(float(v))


def emit_spec(doc: SpecDoc) -> str:
    if doc.kind == "ineq-system":
        return format_system(doc.system)
    out = [f"kind: {doc.kind}"]
    out += [f"alphabet {n} {s}" for n, s in doc.alphabets.items()]
    for t in doc.tables:
        if t.kind == "map":
            out.append(f"map {' '.join(t.given)} -> {t.target[0]}")
            out.append("  " + " ".join(_fmt(v) for v in t.values.reshape(-1)))
            continue
        if t.kind == "cond":
            out.append(f"cond {' '.join(t.target)} | {' '.join(t.given)}")
            width = int(np.prod([doc.alphabets[a] for a in t.target], dtype=np.int64))
        else:
            out.append(f"{t.kind} {' '.join(t.target)}")
            width = doc.alphabets[t.target[-1]]
        for row in t.values.reshape(-1, width):
            out.append("  " + " ".join(_fmt(v) for v in row))
    if doc.nodes:
        out.append("node " + " ".join(doc.nodes))
    out += [f"edge {a} -> {b}" for a, b in doc.edges]
    for scope, kids in doc.factors:
        plain = [v for v in scope if v not in kids]
        out.append(" ".join(["factor", *plain] + (["->", *kids] if kids else [])))
    if doc.query is not None:
        a, b, c = doc.query
        out.append("query " + " | ".join(" ".join(p) for p in ((a, b, c) if c else (a, b))))
    return "\n".join(out) + "\n"


# --- typed views -----------------------------------------------------------------------

def _expect(doc: SpecDoc, kind: str) -> None:
    if doc.kind != kind:
        raise SpecParseError(1, 1, f"expected a {kind} file, got {doc.kind}")


def _need(doc: SpecDoc, kind: str, target: tuple, given: tuple | None = None) -> Table:
    t = doc.find(kind, target, given)
    if t is None:
        form = f"{kind} {' '.join(target)}" if given is None else (
            f"map {' '.join(given)} -> {target[0]}" if kind == "map" else f"cond {' '.join(target)} | {' '.join(given)}")
        raise SpecParseError(1, 1, f"missing table '{form}'")
    return t


def _joint(doc: SpecDoc, t: Table, order: tuple) -> JointPmf:
    if sorted(t.target) != sorted(order):
        raise SpecParseError(t.line, 1, f"expected a PMF over {' '.join(order)}")
    p = JointPmf([doc.alphabet(a) for a in t.target], t.values)
    return p.reorder(order)


def _wrap(t: Table | None, fn):
    try:
        return fn()
    except (RegionError, PmfError, GraphError) as exc:
        raise SpecParseError(t.line if t is not None else 1, 1, str(exc)) from None


def source_from_doc(doc: SpecDoc) -> SourceSpec:
    _expect(doc, "source")
    pmf = _need(doc, "pmf", None)
    fmap = _need(doc, "map", ("X1",), ("Y",))
    tgt = doc.find("target")
    joint = _wrap(pmf, lambda: _joint(doc, pmf, ("X1", "X2")))
    target = _wrap(tgt, lambda: _joint(doc, tgt, ("X1", "X2", "Y"))) if tgt is not None else None
    return _wrap(fmap, lambda: SourceSpec(joint, fmap.values, doc.alphabet("Y"), target))


def channel_from_doc(doc: SpecDoc) -> ChannelSpec:
    _expect(doc, "channel")
    fmap = _need(doc, "map", ("Y1",), ("X",))
    noisy = _need(doc, "cond", ("Y2",), ("X",))
    px = doc.find("pmf")
    X = doc.alphabet("X")
    cond = _wrap(noisy, lambda: ConditionalPmf([doc.alphabet("Y2")], [X], noisy.values))
    p_x = _wrap(px, lambda: _joint(doc, px, ("X",))) if px is not None else None
    return _wrap(fmap, lambda: ChannelSpec(X, fmap.values, cond, doc.alphabet("Y1"), p_x))


def wak_aux_from_doc(doc: SpecDoc, src: SourceSpec) -> WakAux:
    _expect(doc, "aux-wak")
    tv = _need(doc, "cond", ("V",), ("X1",))
    tu = _need(doc, "cond", ("U",), ("X2", "V"))
    ty = _need(doc, "cond", ("Y",), ("X1", "U", "V"))
    for name, want in (("X1", src.x1.size), ("X2", src.x2.size), ("Y", src.y_alphabet.size)):
        if doc.alphabets.get(name) != want:
            raise SpecParseError(doc.lines.get(name, 1), 1, f"alphabet {name} must have size {want} to match the source")
    return _wrap(ty, lambda: WakAux.from_arrays(src, tv.values, tu.values, ty.values))


def bc_aux_from_doc(doc: SpecDoc, ch: ChannelSpec) -> JointPmf:
    """Joint over (V, U, X) or (V, U1, U2, X), depending on what the file declares."""
    _expect(doc, "aux-bc")
    t = _need(doc, "pmf", None)
    order = ("V", "U", "X") if "U" in t.target else ("V", "U1", "U2", "X")
    if doc.alphabets.get("X") != ch.x_alphabet.size:
        raise SpecParseError(doc.lines.get("X", t.line), 1, f"alphabet X must have size {ch.x_alphabet.size}")
    return _wrap(t, lambda: _joint(doc, t, order))


@dataclass(frozen=True)
class GraphBundle:
    fdg: Fdg | None
    factors: FactorGraphSpec | None
    query: MarkovQuery | None


def graph_from_doc(doc: SpecDoc) -> GraphBundle:
    """Graph and/or factorization; a factorization whose factors all name outputs also yields an FDG."""
    _expect(doc, "fdg")
    known = set(doc.nodes)
    for i, edge in enumerate(doc.edges):
        if not set(edge) <= known:
            raise SpecParseError(doc.lines.get(f"edge {i}", 1), 1, f"edge {edge[0]} -> {edge[1]} uses an undeclared node")
    for i, (scope, _) in enumerate(doc.factors):
        if not set(scope) <= known:
            raise SpecParseError(doc.lines.get(f"factor {i}", 1), 1,
                                 f"factor mentions undeclared variables {sorted(set(scope) - known)}")
    if doc.query is not None and not set().union(*doc.query) <= known:
        raise SpecParseError(doc.lines.get("query", 1), 1, "query mentions undeclared variables")
    try:
        g = Fdg(doc.nodes, doc.edges) if doc.edges or (doc.nodes and not doc.factors) else None
        spec = None
        if doc.factors:
            spec = FactorGraphSpec(doc.nodes, [Factor(s, k) for s, k in doc.factors])
            if g is None and all(f.children for f in spec.factors):
                g = fdg_from_factorization(spec)
        q = MarkovQuery(*doc.query) if doc.query is not None else None
    except GraphError as exc:
        line = doc.lines.get("query", 1) if "query" in str(exc) else doc.lines.get("edge 0", 1)
        raise SpecParseError(line, 1, str(exc)) from None
    return GraphBundle(g, spec, q)


# --- object -> document ---------------------------------------------------------------

def doc_from_source(src: SourceSpec) -> SpecDoc:
    doc = SpecDoc("source", {"X1": src.x1.size, "X2": src.x2.size, "Y": src.y_alphabet.size})
    doc.tables.append(Table("pmf", ("X1", "X2"), (), np.array(src.joint.values)))
    doc.tables.append(Table("map", ("X1",), ("Y",), np.array(src.f)))
    if src.target is not None:
        doc.tables.append(Table("target", ("X1", "X2", "Y"), (), np.array(src.target.values)))
    return doc


def doc_from_channel(ch: ChannelSpec) -> SpecDoc:
    doc = SpecDoc("channel", {"X": ch.x_alphabet.size, "Y1": ch.y1_alphabet.size, "Y2": ch.y2_alphabet.size})
    doc.tables.append(Table("map", ("Y1",), ("X",), np.array(ch.f)))
    doc.tables.append(Table("cond", ("Y2",), ("X",), np.array(ch.noisy.table)))
    if ch.p_x is not None:
        doc.tables.append(Table("pmf", ("X",), (), np.array(ch.p_x.values)))
    return doc


def doc_from_wak_aux(aux: WakAux, src: SourceSpec) -> SpecDoc:
    nv, nu = aux.cards
    doc = SpecDoc("aux-wak", {"X1": src.x1.size, "X2": src.x2.size, "Y": src.y_alphabet.size, "V": nv, "U": nu})
    doc.tables.append(Table("cond", ("V",), ("X1",), np.array(aux.p_v_given_x1.table)))
    doc.tables.append(Table("cond", ("U",), ("X2", "V"), np.array(aux.p_u_given_x2v.table)))
    doc.tables.append(Table("cond", ("Y",), ("X1", "U", "V"), np.array(aux.p_y_given_x1uv.table)))
    return doc


def doc_from_joint(kind: str, p: JointPmf) -> SpecDoc:
    doc = SpecDoc(kind, {a.name: a.size for a in p.axes})
    doc.tables.append(Table("pmf", p.names, (), np.array(p.values)))
    return doc


def doc_from_graph(g: Fdg | None = None, spec: FactorGraphSpec | None = None,
                   query: MarkovQuery | None = None) -> SpecDoc:
    nodes = list(g.nodes if g is not None else spec.variables)
    order = {v: i for i, v in enumerate(nodes)}
    srt = lambda xs: tuple(sorted(xs, key=order.__getitem__))  # noqa: E731
    doc = SpecDoc("fdg", nodes=nodes)
    if g is not None:
        doc.edges = sorted(g.edges, key=lambda e: (order[e[0]], order[e[1]]))
    if spec is not None:
        doc.factors = [(srt(f.parents) + srt(f.children), srt(f.children)) for f in spec.factors]
    if query is not None:
        doc.query = (srt(query.a), srt(query.b), srt(query.c))
    return doc
