"""Linear information inequalities in the entropy-vector basis.

Every information expression is stored as exact rational coefficients over joint
entropies H(S) of subsets S of a ground set, plus a rational constant. Rate
variables live on the left of each inequality; the right side is an entropy
expression. Fourier-Motzkin elimination is exact; redundancy removal uses LPs on
numeric witness distributions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .probability import JointPmf, entropy

Subset = frozenset


class SystemError_(ValueError):
    """Malformed inequality system or expression."""


class SystemParseError(SystemError_):
    def __init__(self, line: int, col: int, msg: str) -> None:
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line = line
        self.col = col
        self.msg = msg


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _subset_key(s: frozenset) -> tuple:
    return (len(s), tuple(sorted(s)))


class EntropyExpr:
    """sum_S c_S H(S) + constant, with exact rational coefficients."""

    __slots__ = ("terms", "constant")

    def __init__(self, terms: Mapping[frozenset, Fraction] | None = None, constant=0) -> None:
        clean: dict[frozenset, Fraction] = {}
        for s, c in (terms or {}).items():
            s = frozenset(s)
            c = _frac(c)
            if not s or c == 0:
                continue
            clean[s] = clean.get(s, Fraction(0)) + c
            if clean[s] == 0:
                del clean[s]
        self.terms = clean
        self.constant = _frac(constant)

    @classmethod
    def H(cls, subset: Iterable[str]) -> "EntropyExpr":
        return cls({frozenset(subset): Fraction(1)})

    def variables(self) -> frozenset:
        out: set[str] = set()
        for s in self.terms:
            out |= s
        return frozenset(out)

    def is_constant(self) -> bool:
        return not self.terms

    def __add__(self, other: "EntropyExpr") -> "EntropyExpr":
        terms = dict(self.terms)
        for s, c in other.terms.items():
            terms[s] = terms.get(s, Fraction(0)) + c
        return EntropyExpr(terms, self.constant + other.constant)

    def __neg__(self) -> "EntropyExpr":
        return EntropyExpr({s: -c for s, c in self.terms.items()}, -self.constant)

    def __sub__(self, other: "EntropyExpr") -> "EntropyExpr":
        return self + (-other)

    def scale(self, k) -> "EntropyExpr":
        k = _frac(k)
        return EntropyExpr({s: c * k for s, c in self.terms.items()}, self.constant * k)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, EntropyExpr) and self.terms == other.terms and self.constant == other.constant

    def __hash__(self) -> int:
        return hash((frozenset(self.terms.items()), self.constant))

    def sorted_terms(self) -> list[tuple[frozenset, Fraction]]:
        return sorted(self.terms.items(), key=lambda kv: _subset_key(kv[0]))

    def map_subsets(self, fn) -> "EntropyExpr":
        out: dict[frozenset, Fraction] = {}
        for s, c in self.terms.items():
            t = frozenset(fn(s))
            out[t] = out.get(t, Fraction(0)) + c
        return EntropyExpr(out, self.constant)

    def __repr__(self) -> str:
        return f"EntropyExpr({format_expr(self)})"


def expr_from_measure(kind: str, *subsets: Iterable[str]) -> EntropyExpr:
    """H(A), H(A|C), I(A;B) or I(A;B|C) expanded in the entropy basis.

    kind "H" takes (A[, C]); kind "I" takes (A, B[, C]).
    """
    sets = [frozenset(s) for s in subsets]
    if kind == "H":
        if len(sets) not in (1, 2):
            raise SystemError_("H takes one or two subsets")
        a = sets[0]
        c = sets[1] if len(sets) == 2 else frozenset()
        if not a:
            raise SystemError_("H needs a nonempty subset")
        if a & c:
            raise SystemError_("H(A|C) needs disjoint subsets")
        return EntropyExpr.H(a | c) - EntropyExpr.H(c)
    if kind == "I":
        if len(sets) not in (2, 3):
            raise SystemError_("I takes two or three subsets")
        a, b = sets[0], sets[1]
        c = sets[2] if len(sets) == 3 else frozenset()
        if not a or not b:
            raise SystemError_("I needs nonempty A and B")
        if a & b or a & c or b & c:
            raise SystemError_("I(A;B|C) needs pairwise disjoint subsets")
        return EntropyExpr.H(a | c) + EntropyExpr.H(b | c) - EntropyExpr.H(a | b | c) - EntropyExpr.H(c)
    raise SystemError_(f"unknown measure kind {kind!r}")


def evaluate(expr: EntropyExpr, p: JointPmf) -> float:
    total = float(expr.constant)
    for s, c in expr.terms.items():
        total += float(c) * entropy(p, sorted(s))
    return total


LE = "<="
GE = ">="


@dataclass(frozen=True)
class LinIneq:
    """sum_k lhs[k] R_k  (<= | >=)  rhs."""

    lhs: Mapping[str, Fraction]
    relation: str
    rhs: EntropyExpr

    def __post_init__(self) -> None:
        if self.relation not in (LE, GE):
            raise SystemError_(f"relation must be <= or >=, got {self.relation!r}")
        object.__setattr__(self, "lhs", {k: _frac(v) for k, v in self.lhs.items() if _frac(v) != 0})

    def as_le(self) -> "LinIneq":
        if self.relation == LE:
            return self
        return LinIneq({k: -v for k, v in self.lhs.items()}, LE, -self.rhs)

    def is_constant(self) -> bool:
        return not self.lhs

    def scale(self, k: Fraction) -> "LinIneq":
        if k <= 0:
            raise SystemError_("inequalities scale only by positive factors")
        return LinIneq({v: c * k for v, c in self.lhs.items()}, self.relation, self.rhs.scale(k))

    def canonical(self) -> "LinIneq":
        """<= form scaled so the leading coefficient has magnitude one."""
        le = self.as_le()
        if le.lhs:
            lead = le.lhs[sorted(le.lhs)[0]]
        elif le.rhs.terms:
            lead = le.rhs.sorted_terms()[0][1]
        elif le.rhs.constant != 0:
            lead = le.rhs.constant
        else:
            return le
        return le.scale(1 / abs(lead))

    def key(self) -> tuple:
        c = self.canonical()
        return (tuple(sorted(c.lhs.items())), frozenset(c.rhs.terms.items()), c.rhs.constant)

    def variables(self) -> frozenset:
        return frozenset(self.lhs)


@dataclass(frozen=True)
class LinIneqSystem:
    """Rate inequalities over a ground set of random variables.

    Variables listed in ``nonneg`` carry an implicit R >= 0 domain constraint.
    """

    ground_set: frozenset
    vars: tuple
    ineqs: tuple
    nonneg: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ground_set", frozenset(self.ground_set))
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "ineqs", tuple(self.ineqs))
        object.__setattr__(self, "nonneg", frozenset(self.nonneg))
        declared = set(self.vars)
        if len(declared) != len(self.vars):
            raise SystemError_("duplicate rate variable")
        if not self.nonneg <= declared:
            raise SystemError_(f"nonneg names undeclared variables {sorted(self.nonneg - declared)}")
        for q in self.ineqs:
            extra = set(q.lhs) - declared
            if extra:
                raise SystemError_(f"undeclared rate variables {sorted(extra)}")
            outside = q.rhs.variables() - self.ground_set
            if outside:
                raise SystemError_(f"entropy terms use variables outside the ground set: {sorted(outside)}")

    def rate_ineqs(self) -> list[LinIneq]:
        return [q for q in self.ineqs if not q.is_constant()]

    def constant_ineqs(self) -> list[LinIneq]:
        return [q for q in self.ineqs if q.is_constant()]

    def with_ineqs(self, ineqs: Iterable[LinIneq]) -> "LinIneqSystem":
        return LinIneqSystem(self.ground_set, self.vars, tuple(ineqs), self.nonneg)


def dedupe(ineqs: Iterable[LinIneq]) -> list[LinIneq]:
    seen: set = set()
    out = []
    for q in ineqs:
        c = q.canonical()
        k = c.key()
        if k in seen:
            continue
        seen.add(k)
        out.append(c)
    return out


def substitute(system: LinIneqSystem, var: str, replacement: Mapping[str, Fraction],
               offset: EntropyExpr | None = None) -> LinIneqSystem:
    """Replace rate ``var`` by sum_k replacement[k] R_k + offset everywhere."""
    if var not in system.vars:
        raise SystemError_(f"unknown rate variable {var!r}")
    offset = offset or EntropyExpr()
    repl = {k: _frac(v) for k, v in replacement.items()}
    if var in repl:
        raise SystemError_("replacement may not reference the substituted variable")
    new_vars = [v for v in system.vars if v != var]
    for k in repl:
        if k not in new_vars:
            new_vars.append(k)
    out = []
    for q in system.ineqs:
        c = q.lhs.get(var, Fraction(0))
        if c == 0:
            out.append(q)
            continue
        lhs = {k: v for k, v in q.lhs.items() if k != var}
        for k, v in repl.items():
            lhs[k] = lhs.get(k, Fraction(0)) + c * v
        out.append(LinIneq(lhs, q.relation, q.rhs - offset.scale(c)))
    nonneg = set(system.nonneg) - {var}
    if var in system.nonneg:
        out.append(LinIneq(dict(repl), GE, -offset))
    return LinIneqSystem(system.ground_set, tuple(new_vars), tuple(out), frozenset(nonneg))


def fme_eliminate(system: LinIneqSystem, var: str) -> LinIneqSystem:
    """Project out ``var`` by pairing its upper and lower bounds."""
    if var not in system.vars:
        raise SystemError_(f"unknown rate variable {var!r}")
    upper, lower, rest = [], [], []
    for q in system.ineqs:
        le = q.as_le()
        c = le.lhs.get(var, Fraction(0))
        if c > 0:
            upper.append(le)
        elif c < 0:
            lower.append(le)
        else:
            rest.append(q)
    if var in system.nonneg:
        lower.append(LinIneq({var: Fraction(-1)}, LE, EntropyExpr()))
    combined = []
    if upper and lower:
        for u in upper:
            a = u.lhs[var]
            for lo in lower:
                b = -lo.lhs[var]
                lhs: dict[str, Fraction] = {}
                for k, v in u.lhs.items():
                    lhs[k] = lhs.get(k, Fraction(0)) + b * v
                for k, v in lo.lhs.items():
                    lhs[k] = lhs.get(k, Fraction(0)) + a * v
                lhs.pop(var, None)
                combined.append(LinIneq(lhs, LE, u.rhs.scale(b) + lo.rhs.scale(a)))
    ineqs = dedupe(rest + combined)
    return LinIneqSystem(system.ground_set, tuple(v for v in system.vars if v != var),
                         tuple(ineqs), system.nonneg - {var})


def fme_eliminate_all(system: LinIneqSystem, variables: Sequence[str]) -> LinIneqSystem:
    for v in variables:
        system = fme_eliminate(system, v)
    return system


class _WitnessTable:
    """Per-witness right-hand sides and the shared coefficient matrix of a system."""

    def __init__(self, system: LinIneqSystem, ineqs: Sequence[LinIneq], witnesses: Sequence[JointPmf]) -> None:
        idx = {v: i for i, v in enumerate(system.vars)}
        self.le = [q.as_le() for q in ineqs]
        self.A = np.zeros((len(ineqs), len(system.vars)))
        for r, q in enumerate(self.le):
            for k, v in q.lhs.items():
                self.A[r, idx[k]] = float(v)
        subsets = sorted({s for q in self.le for s in q.rhs.terms}, key=_subset_key)
        self.b = np.zeros((len(witnesses), len(ineqs)))
        for w, p in enumerate(witnesses):
            h = {s: entropy(p, sorted(s)) for s in subsets}
            for r, q in enumerate(self.le):
                self.b[w, r] = float(q.rhs.constant) + sum(float(c) * h[s] for s, c in q.rhs.terms.items())
        self.bounds = [(0, None) if v in system.nonneg else (None, None) for v in system.vars]

    def implied(self, target: int, others: Sequence[int], tol: float) -> bool:
        q = self.le[target]
        if q.is_constant():
            return bool(np.all(self.b[:, target] >= -tol))
        rows = [r for r in others if not self.le[r].is_constant()]
        c = -self.A[target]
        if rows:
            stacked = self._stacked(c, rows, target, tol)
            if stacked is not None:
                return stacked
        feasible = 0
        for w in range(self.b.shape[0]):
            if rows:
                res = linprog(c, A_ub=self.A[rows], b_ub=self.b[w, rows], bounds=self.bounds, method="highs")
            else:
                res = linprog(c, bounds=self.bounds, method="highs")
            if res.status == 2:
                continue
            if res.status != 0:
                return False
            feasible += 1
            if -res.fun > self.b[w, target] + tol:
                return False
        return feasible > 0

    def _stacked(self, c: np.ndarray, rows: Sequence[int], target: int, tol: float) -> bool | None:
        """All witnesses in one block-diagonal LP; None when some block is infeasible."""
        nw, nv = self.b.shape[0], self.A.shape[1]
        A = sparse.block_diag([self.A[rows]] * nw, format="csr")
        res = linprog(np.tile(c, nw), A_ub=A, b_ub=self.b[:, rows].reshape(-1), bounds=self.bounds * nw,
                      method="highs")
        if res.status == 2:
            return None
        if res.status != 0:
            return False
        best = -(res.x.reshape(nw, nv) @ c)
        return bool(np.all(best <= self.b[:, target] + tol))

    def feasible(self, w: int) -> bool:
        rows = [r for r, q in enumerate(self.le) if not q.is_constant()]
        if not rows:
            return True
        res = linprog(np.zeros(self.A.shape[1]), A_ub=self.A[rows], b_ub=self.b[w, rows],
                      bounds=self.bounds, method="highs")
        return res.status == 0


def is_implied(system: LinIneqSystem, target: LinIneq, others: Sequence[LinIneq],
               witnesses: Sequence[JointPmf], tol: float = 1e-9) -> bool:
    """True iff target holds on every feasible point of ``others`` for every witness.

    Witnesses on which ``others`` is infeasible carry no evidence; at least one
    feasible witness is required before declaring implication. A constant
    target is implied iff it holds on every witness.
    """
    table = _WitnessTable(system, [target, *others], witnesses)
    return table.implied(0, range(1, len(others) + 1), tol)


def remove_redundant(system: LinIneqSystem, numeric_joints: Sequence[JointPmf],
                     tol: float = 1e-9) -> LinIneqSystem:
    """Drop inequalities implied by the remaining ones on every witness joint.

    Constant (entropy-only) inequalities are checked on their own: they are
    dropped only when they hold on every witness.
    """
    if not numeric_joints:
        raise SystemError_("redundancy removal needs at least one witness joint")
    kept_ineqs = dedupe(system.ineqs)
    table = _WitnessTable(system, kept_ineqs, numeric_joints)
    kept = list(range(len(kept_ineqs)))
    i = 0
    while i < len(kept):
        others = kept[:i] + kept[i + 1:]
        if table.implied(kept[i], others, tol):
            kept = others
        else:
            i += 1
    return system.with_ineqs(kept_ineqs[k] for k in kept)


def feasible_witnesses(system: LinIneqSystem, rng: np.random.Generator, count: int,
                       alphabet_size: int = 2, max_tries: int = 10_000) -> list[JointPmf]:
    """Random joints over the ground set on which the rate inequalities are feasible.

    Sparse Dirichlet draws give near-functional dependencies, so every kind of
    information term takes both small and large values across the sample.
    """
    from .probability import Alphabet, random_joint

    axes = [Alphabet(n, alphabet_size) for n in sorted(system.ground_set)]
    out: list[JointPmf] = []
    for _ in range(max_tries):
        if len(out) == count:
            return out
        p = random_joint(rng, axes, concentration=float(rng.choice([0.05, 0.1, 0.3, 1.0])))
        if _WitnessTable(system, system.ineqs, [p]).feasible(0):
            out.append(p)
    raise SystemError_(f"found only {len(out)} feasible witnesses in {max_tries} draws")


def rename_variables(system: LinIneqSystem, mapping: Mapping[str, str]) -> LinIneqSystem:
    """Substitute random variables inside entropy terms (subsets may merge)."""
    def fn(s: frozenset) -> frozenset:
        return frozenset(mapping.get(x, x) for x in s)

    ineqs = [LinIneq(q.lhs, q.relation, q.rhs.map_subsets(fn)) for q in system.ineqs]
    ground = fn(system.ground_set)
    return LinIneqSystem(ground, system.vars, tuple(dedupe(ineqs)), system.nonneg)


def specialize_u1_y1(system: LinIneqSystem) -> LinIneqSystem:
    """Set the first private auxiliary equal to the deterministic output and rename U2 to U."""
    return rename_variables(system, {"U1": "Y1", "U2": "U"})


def canonical_keys(system: LinIneqSystem, include_constant: bool = False) -> frozenset:
    return frozenset(q.key() for q in system.ineqs if include_constant or not q.is_constant())


def systems_equal(a: LinIneqSystem, b: LinIneqSystem, include_constant: bool = False) -> bool:
    """Coefficient-wise equality of the normalized inequality sets."""
    return canonical_keys(a, include_constant) == canonical_keys(b, include_constant)


# --- text form ---------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:/\d+|\.\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_']*)"
                    r"|(?P<op><=|>=|<|>|=|[-+*(),;|]))")


def _tokenize(text: str, line: int) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise SystemParseError(line, pos + 1, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, tokens, line: int, rate_vars: set[str], ground: set[str]) -> None:
        self.toks = tokens
        self.i = 0
        self.line = line
        self.rate_vars = rate_vars
        self.ground = ground

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None, self._end_col())

    def _end_col(self) -> int:
        if not self.toks:
            return 1
        k, v, c = self.toks[-1]
        return c + len(v)

    def take(self, value: str | None = None, kind: str | None = None):
        k, v, c = self.peek()
        if k is None or (value is not None and v != value) or (kind is not None and k != kind):
            want = value or kind or "token"
            raise SystemParseError(self.line, c, f"expected {want!r}, found {v!r}")
        self.i += 1
        return k, v, c

    def varlist(self) -> frozenset:
        names = []
        _, v, c = self.take(kind="name")
        names.append((v, c))
        while self.peek()[1] == ",":
            self.take(",")
            _, v, c = self.take(kind="name")
            names.append((v, c))
        for v, c in names:
            if v not in self.ground:
                raise SystemParseError(self.line, c, f"{v!r} is not in the ground set")
        return frozenset(v for v, _ in names)

    def measure(self, kind: str) -> EntropyExpr:
        self.take("(")
        a = self.varlist()
        if kind == "H":
            given = frozenset()
            if self.peek()[1] == "|":
                self.take("|")
                given = self.varlist()
            self.take(")")
            return expr_from_measure("H", a, given)
        self.take(";")
        b = self.varlist()
        given = frozenset()
        if self.peek()[1] == "|":
            self.take("|")
            given = self.varlist()
        self.take(")")
        try:
            return expr_from_measure("I", a, b, given)
        except SystemError_ as exc:
            raise SystemParseError(self.line, self.peek()[2], str(exc)) from None

    def side(self) -> tuple[dict[str, Fraction], EntropyExpr]:
        rates: dict[str, Fraction] = {}
        expr = EntropyExpr()
        sign = Fraction(1)
        if self.peek()[1] in ("+", "-"):
            sign = Fraction(-1) if self.take()[1] == "-" else Fraction(1)
        while True:
            expr = self.term(sign, rates, expr)
            if self.peek()[1] not in ("+", "-"):
                return rates, expr
            sign = Fraction(-1) if self.take()[1] == "-" else Fraction(1)

    def term(self, coef: Fraction, rates: dict[str, Fraction], expr: EntropyExpr) -> EntropyExpr:
        k, v, c = self.peek()
        if k == "num":
            self.take()
            coef = coef * Fraction(v)
            if self.peek()[1] == "*":
                self.take("*")
            elif self.peek()[0] != "name":
                return expr + EntropyExpr({}, coef)
        k, v, c = self.peek()
        if k != "name":
            raise SystemParseError(self.line, c, f"expected a term, found {v!r}")
        self.take()
        if v in ("H", "I") and self.peek()[1] == "(":
            return expr + self.measure(v).scale(coef)
        if v in self.rate_vars:
            rates[v] = rates.get(v, Fraction(0)) + coef
            return expr
        raise SystemParseError(self.line, c, f"undeclared rate variable {v!r}")


def parse_ineq_line(text: str, line: int, rate_vars: set[str], ground: set[str]) -> list[LinIneq]:
    """Parse one inequality or equality line; an equality yields two inequalities."""
    toks = _tokenize(text, line)
    rel_idx = [i for i, t in enumerate(toks) if t[1] in ("<=", ">=", "<", ">", "=")]
    if len(rel_idx) != 1:
        col = toks[rel_idx[1]][2] if len(rel_idx) > 1 else 1
        raise SystemParseError(line, col, "each line needs exactly one relation")
    r = rel_idx[0]
    rel = toks[r][1]
    left = _Parser(toks[:r], line, rate_vars, ground)
    if not toks[:r]:
        raise SystemParseError(line, 1, "empty left-hand side")
    lr, le = left.side()
    if left.i != len(left.toks):
        raise SystemParseError(line, left.peek()[2], f"unexpected token {left.peek()[1]!r}")
    right = _Parser(toks[r + 1:], line, rate_vars, ground)
    if not toks[r + 1:]:
        raise SystemParseError(line, toks[r][2] + len(rel), "empty right-hand side")
    rr, re_ = right.side()
    if right.i != len(right.toks):
        raise SystemParseError(line, right.peek()[2], f"unexpected token {right.peek()[1]!r}")
    # move everything to rates on the left, entropy on the right
    lhs = dict(lr)
    for k, v in rr.items():
        lhs[k] = lhs.get(k, Fraction(0)) - v
    rhs = re_ - le
    if rel in ("<=", "<"):
        return [LinIneq(lhs, LE, rhs)]
    if rel in (">=", ">"):
        return [LinIneq(lhs, GE, rhs)]
    return [LinIneq(lhs, LE, rhs), LinIneq(lhs, GE, rhs)]


def parse_system(text: str, first_line: int = 1) -> LinIneqSystem:
    ground: list[str] | None = None
    rate_vars: list[str] | None = None
    nonneg: list[str] = []
    ineqs: list[LinIneq] = []
    for off, raw in enumerate(text.splitlines()):
        line = first_line + off
        body = raw.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        head, sep, rest = body.partition(":")
        key = head.strip()
        if sep and key in ("ground", "vars", "nonneg", "kind"):
            names = rest.split()
            if key == "ground":
                ground = names
            elif key == "vars":
                rate_vars = names
            elif key == "nonneg":
                nonneg = names
            elif key == "kind" and rest.strip() != "ineq-system":
                raise SystemParseError(line, raw.index(":") + 2, f"expected kind ineq-system, got {rest.strip()!r}")
            continue
        if ground is None or rate_vars is None:
            raise SystemParseError(line, 1, "declare 'ground:' and 'vars:' before inequalities")
        ineqs.extend(parse_ineq_line(body, line, set(rate_vars), set(ground)))
    if ground is None or rate_vars is None:
        raise SystemParseError(first_line, 1, "missing 'ground:' or 'vars:' declaration")
    try:
        return LinIneqSystem(frozenset(ground), tuple(rate_vars), tuple(ineqs), frozenset(nonneg))
    except SystemError_ as exc:
        raise SystemParseError(first_line, 1, str(exc)) from None


def _fmt_coef(c: Fraction, first: bool) -> tuple[str, str]:
    sign = "-" if c < 0 else "+"
    mag = abs(c)
    body = "" if mag == 1 else f"{mag}*"
    if first:
        return ("-" if c < 0 else ""), body
    return f" {sign} ", body


def format_expr(expr: EntropyExpr) -> str:
    parts = []
    for s, c in expr.sorted_terms():
        pre, body = _fmt_coef(c, not parts)
        parts.append(f"{pre}{body}H({','.join(sorted(s))})")
    if expr.constant != 0 or not parts:
        c = expr.constant
        if not parts:
            parts.append(str(c))
        else:
            parts.append(f" {'-' if c < 0 else '+'} {abs(c)}")
    return "".join(parts)


def format_ineq(q: LinIneq, var_order: Sequence[str]) -> str:
    parts = []
    for v in var_order:
        c = q.lhs.get(v)
        if not c:
            continue
        pre, body = _fmt_coef(c, not parts)
        parts.append(f"{pre}{body}{v}")
    lhs = "".join(parts) if parts else "0"
    return f"{lhs} {q.relation} {format_expr(q.rhs)}"


def format_system(system: LinIneqSystem, header: Sequence[str] = ()) -> str:
    lines = [f"# {h}" for h in header]
    lines.append("kind: ineq-system")
    lines.append("ground: " + " ".join(sorted(system.ground_set)))
    lines.append("vars: " + " ".join(system.vars))
    if system.nonneg:
        lines.append("nonneg: " + " ".join(v for v in system.vars if v in system.nonneg))
    for q in system.ineqs:
        lines.append(format_ineq(q, system.vars))
    return "\n".join(lines) + "\n"
